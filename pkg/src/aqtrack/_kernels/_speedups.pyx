# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled twins of the kernels in _fallback.py. Operation order matches the
# fallback exactly (see -ffp-contract=off in setup.py); results must be
# bit-identical, which tests/test_kernels.py enforces.

from libc.math cimport ceil, fabs

BACKEND = "speedups"

# np.int64 surfaces as C long on LP64 and long long on LLP64; accept either
ctypedef fused code_t:
    long
    long long


def quantize_block(const double[::1] scaled, long long L, code_t[::1] codes_out):
    cdef Py_ssize_t i, m = scaled.shape[0]
    cdef double c, a, mag, s
    cdef double Lf = <double> L
    cdef long long nsat = 0
    for i in range(m):
        c = scaled[i]
        a = fabs(c)
        if a <= 0.5:
            codes_out[i] = 0
        else:
            mag = ceil(a - 0.5)
            if mag > Lf:
                mag = Lf
            s = 1.0 if c > 0.0 else -1.0
            codes_out[i] = <long long> (s * mag)
            if a > Lf + 0.5:
                nsat += 1
    return nsat


def apply_codes(double[:, :, ::1] R, const code_t[:, ::1] codes, double l):
    cdef Py_ssize_t i, j, q
    cdef Py_ssize_t N = R.shape[0], r = R.shape[2]
    cdef double upd
    for j in range(N):
        for q in range(r):
            upd = l * (<double> codes[j, q])
            for i in range(N):
                R[i, j, q] = R[i, j, q] + upd


def mix_replicas(const double[:, ::1] A, const double[:, :, ::1] R, double[:, ::1] out):
    cdef Py_ssize_t i, j, q
    cdef Py_ssize_t N = A.shape[0], r = R.shape[2]
    for i in range(N):
        for q in range(r):
            out[i, q] = 0.0
    # sender-ascending accumulation, same order as the fallback
    for j in range(N):
        for i in range(N):
            for q in range(r):
                out[i, q] = out[i, q] + A[i, j] * R[i, j, q]
