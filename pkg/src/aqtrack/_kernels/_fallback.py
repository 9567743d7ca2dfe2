"""Pure-numpy reference implementations of the hot kernels.

These define the canonical arithmetic. The compiled versions in _speedups.pyx
must follow the exact same operation order so both backends produce
bit-identical results; any change here must be mirrored there.
"""

import numpy as np

BACKEND = "fallback"


def quantize_block(scaled, L, codes_out):
    """Quantize pre-scaled values into integer codes; return saturation count.

    scaled: (m,) float64, the (value - recon)/l ratios (caller does the division
    so both backends share it). codes_out: (m,) int64, written in place.
    Levels: 0 on [-1/2, 1/2]; i on ((2i-1)/2, (2i+1)/2]; clamped to +-L beyond.
    A coordinate counts as saturated only strictly past (2L+1)/2.
    """
    a = np.abs(scaled)
    Lf = float(L)
    mag = np.minimum(Lf, np.ceil(a - 0.5))
    codes = np.sign(scaled) * mag
    codes[a <= 0.5] = 0.0
    codes_out[:] = codes.astype(np.int64)
    return int(np.count_nonzero(a > Lf + 0.5))


def apply_codes(R, codes, l):
    """Advance every receiver's reconstruction of every sender by one code.

    R: (N, N, r) replica tensor, R[i, j] = receiver i's reconstruction of
    sender j (the diagonal doubles as the sender's own encoder mirror).
    codes: (N, r) int64, one code vector per sender. l: scale for this round.
    """
    R += l * codes.astype(np.float64)[None, :, :]


def mix_replicas(A, R, out):
    """Per-receiver weighted sum of reconstructions: out[i] = sum_j A[i,j] R[i,j].

    Accumulates over senders in ascending index order; the compiled kernel
    keeps the same order so both are bit-identical.
    """
    out[:] = 0.0
    n = A.shape[0]
    for j in range(n):
        out += A[:, j, None] * R[:, j, :]
