"""Module boundaries: each layer imports only from layers below it."""

import ast
from pathlib import Path

import pqchain

LAYERS = {
    "errors": 0, "rlp": 0, "tlv": 0, "wire": 0,
    "crypto": 1,
    "entropy": 2, "did": 2,
    "certs": 3,
    "keyfile": 4, "tunnel": 4, "metatx": 4,
    "pipeline": 5,
    "sim": 6,
    "cli": 7, "__main__": 8,
}

ROOT = Path(pqchain.__file__).parent


def _top(path: Path) -> str:
    rel = path.relative_to(ROOT).with_suffix("")
    return rel.parts[0]


def _imports(path: Path):
    """Top-level pqchain modules imported by ``path``."""
    parts = list(path.relative_to(ROOT).with_suffix("").parts)
    pkg = parts[:-1]
    out = set()
    for node in ast.walk(ast.parse(path.read_text())):
        if isinstance(node, ast.ImportFrom):
            if node.level:
                base = pkg[:len(pkg) - (node.level - 1)]
                target = base + (node.module.split(".") if node.module else [])
                if target:
                    out.add(target[0])
                else:
                    out.update(a.name.split(".")[0] for a in node.names)
            elif node.module and node.module.startswith("pqchain."):
                out.add(node.module.split(".")[1])
        elif isinstance(node, ast.Import):
            out.update(a.name.split(".")[1] for a in node.names if a.name.startswith("pqchain."))
    return out


def test_every_module_has_a_layer():
    tops = {_top(p) for p in ROOT.rglob("*.py") if p.name != "__init__.py" or p.parent != ROOT}
    assert tops <= set(LAYERS), tops - set(LAYERS)


def test_no_upward_imports():
    bad = []
    for path in ROOT.rglob("*.py"):
        if path.parent == ROOT and path.name == "__init__.py":
            continue
        me = _top(path)
        for dep in _imports(path):
            if dep != me and LAYERS[dep] >= LAYERS[me]:
                bad.append(f"{path.relative_to(ROOT)} -> {dep}")
    assert bad == []
