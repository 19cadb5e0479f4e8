"""Falcon-512 parameter set."""

import math

LOGN = 9
N = 1 << LOGN
Q = 12289

SIGMA = 165.7366171829776
SIGMA_MIN = 1.2778336969128337
SIGMA_MAX = 1.8205
INV_SIGMA = 1.0 / SIGMA
# Squared-norm acceptance bound on (s1, s2).
SIG_BOUND = 34034726

NONCE_LEN = 40
PUBLIC_KEY_LEN = 897
SECRET_KEY_LEN = 1281
SIG_PADDED_LEN = 666
SIG_MAX_LEN = 752  # hard cap for the variable-length (compressed) format

PK_HEADER = 0x00 + LOGN
SK_HEADER = 0x50 + LOGN
SIG_COMPRESSED_HEADER = 0x30 + LOGN

# Bit widths of f/g and F in the secret-key encoding for n = 512.
FG_BITS = 6
BIG_F_BITS = 8

INV_2SQRSIGMA0 = 1.0 / (2.0 * SIGMA_MAX * SIGMA_MAX)
LN2 = math.log(2.0)
INV_LN2 = 1.0 / LN2
