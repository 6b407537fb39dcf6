"""2D discrete Fourier transforms and spectral helpers.

Convention: unnormalized forward DFT with negative exponent, each axis
transformed by its own length,

    F[u, v] = sum_{y, x} f[y, x] * exp(-2j*pi*(u*y/H + v*x/W))

Power-of-two axis lengths run through an iterative radix-2
Cooley-Tukey kernel; any other length goes through Bluestein's chirp-z
construction on a padded power of two, so arbitrary image sizes work.
The inverse transform exists for test oracles and the Bluestein
internals; the feature pipeline never returns to the spatial domain.

Twiddle and bit-reversal tables are precomputed with numpy and shared
by both kernel backends. Each backend is bit-deterministic (reruns and
parallel row scheduling cannot change results; rows are independent and
there are no cross-row reductions), and the two backends agree to a few
ulps - not bitwise, because numpy's SIMD complex multiply and LLVM's
codegen round intermediate products differently.
"""

from __future__ import annotations

import numpy as np

from . import _backend

# ---------------------------------------------------------------------------
# precomputed tables, keyed by transform length


_radix2_tables_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_bluestein_tables_cache: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _radix2_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    cached = _radix2_tables_cache.get(n)
    if cached is not None:
        return cached
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
    tw = np.exp((-2j * np.pi / n) * np.arange(n // 2))
    rev.setflags(write=False)
    tw.setflags(write=False)
    _radix2_tables_cache[n] = (rev, tw)
    return rev, tw


def _bluestein_tables(n: int) -> tuple[np.ndarray, np.ndarray, int]:
    cached = _bluestein_tables_cache.get(n)
    if cached is not None:
        return cached
    j = np.arange(n, dtype=np.int64)
    # exponent j^2/(2n) reduced mod 2n keeps the chirp argument small and exact
    q = (j * j) % (2 * n)
    chirp = np.exp((-1j * np.pi / n) * q)
    m = 1
    while m < 2 * n - 1:
        m *= 2
    kernel = np.zeros(m, dtype=np.complex128)
    kernel[:n] = np.conj(chirp)
    kernel[m - n + 1 :] = np.conj(chirp[1:][::-1])
    kspec = kernel[np.newaxis, :].copy()
    _fft_rows(kspec)
    chirp.setflags(write=False)
    kspec.setflags(write=False)
    _bluestein_tables_cache[n] = (chirp, kspec, m)
    return chirp, kspec, m


# ---------------------------------------------------------------------------
# 1D batch kernels (rows of a C-contiguous (m, n) array, in place)


def _fft_rows_numpy(a: np.ndarray, rev: np.ndarray, tw: np.ndarray) -> None:
    a[:] = a[:, rev]
    n = a.shape[1]
    span = 2
    while span <= n:
        half = span // 2
        stride = n // span
        w = tw[: half * stride : stride]
        blocks = a.reshape(a.shape[0], n // span, span)
        even = blocks[:, :, :half]
        odd = blocks[:, :, half:]
        t = odd * w
        diff = even - t
        even += t
        odd[:] = diff
        span *= 2


if _backend.numba_available:
    import numba
    from numba import prange

    # prange splits rows across threads; each row's butterfly sequence is
    # sequential and rows are disjoint, so scheduling cannot change results.
    @numba.njit(cache=True, parallel=True)
    def _fft_rows_numba(a, rev, tw):  # pragma: no cover - exercised via dispatch
        m, n = a.shape
        for r in prange(m):
            row = np.empty(n, np.complex128)
            for i in range(n):
                row[i] = a[r, rev[i]]
            span = 2
            while span <= n:
                half = span // 2
                stride = n // span
                start = 0
                while start < n:
                    for k in range(half):
                        w = tw[k * stride]
                        t = w * row[start + k + half]
                        u = row[start + k]
                        row[start + k] = u + t
                        row[start + k + half] = u - t
                    start += span
                span *= 2
            for i in range(n):
                a[r, i] = row[i]

    @numba.njit(cache=True, parallel=True)
    def _naive_dft2_numba(a):  # pragma: no cover - exercised via dispatch
        h, w = a.shape
        out = np.empty((h, w), np.complex128)
        for u in prange(h):
            for v in range(w):
                acc = 0.0 + 0.0j
                for y in range(h):
                    for x in range(w):
                        ang = -2.0 * np.pi * (u * y / h + v * x / w)
                        acc += a[y, x] * (np.cos(ang) + 1j * np.sin(ang))
                out[u, v] = acc
        return out


def _fft_rows(rows: np.ndarray) -> None:
    """Length-n forward FFT of every row, in place. n must be a power of 2."""
    n = rows.shape[1]
    rev, tw = _radix2_tables(n)
    if _backend.use_numba():
        _fft_rows_numba(rows, rev, tw)
    else:
        _fft_rows_numpy(rows, rev, tw)


def _bluestein_rows(rows: np.ndarray) -> np.ndarray:
    """Forward DFT of every row for arbitrary length, via chirp-z."""
    n = rows.shape[1]
    chirp, kspec, m = _bluestein_tables(n)
    buf = np.zeros((rows.shape[0], m), dtype=np.complex128)
    buf[:, :n] = rows * chirp
    _fft_rows(buf)
    buf *= kspec
    np.conj(buf, out=buf)
    _fft_rows(buf)
    np.conj(buf, out=buf)
    buf /= m
    return buf[:, :n] * chirp


def _transform_last_axis(a: np.ndarray) -> np.ndarray:
    """Forward DFT along the last axis of a C-contiguous complex array."""
    n = a.shape[-1]
    if n == 1:
        return a
    rows = a.reshape(-1, n)
    if _is_pow2(n):
        _fft_rows(rows)
        return a
    return _bluestein_rows(rows).reshape(a.shape)


def _dft_all_axes(a: np.ndarray) -> np.ndarray:
    a = _transform_last_axis(a)
    a = np.ascontiguousarray(a.swapaxes(-1, -2))
    a = _transform_last_axis(a)
    return np.ascontiguousarray(a.swapaxes(-1, -2))


# ---------------------------------------------------------------------------
# public operations


def _as_finite_complex(m, ndim: int, name: str) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"{name} has an empty axis: shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr.astype(np.complex128, copy=True, order="C")


def dft2_forward(m) -> np.ndarray:
    """Unnormalized forward 2D DFT of a real or complex matrix."""
    return _dft_all_axes(_as_finite_complex(m, 2, "transform input"))


def dft2_stack(stack) -> np.ndarray:
    """dft2_forward applied to a (batch, H, W) stack in one sweep.

    Equals per-image dft2_forward exactly; exists so batch drivers can
    amortize table lookups and kernel launches.
    """
    return _dft_all_axes(_as_finite_complex(stack, 3, "transform input"))


def dft2_inverse(m) -> np.ndarray:
    """Inverse of dft2_forward (1/(H*W) normalization). Test-oracle use."""
    arr = _as_finite_complex(m, 2, "transform input")
    np.conj(arr, out=arr)
    arr = _dft_all_axes(arr)
    np.conj(arr, out=arr)
    arr /= arr.shape[0] * arr.shape[1]
    return arr


def _naive_dft2_numpy(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    ey = np.exp((-2j * np.pi / h) * np.outer(np.arange(h), np.arange(h)))
    ex = np.exp((-2j * np.pi / w) * np.outer(np.arange(w), np.arange(w)))
    return ey @ a @ ex


def dft2_naive(m) -> np.ndarray:
    """Direct evaluation of the defining double sum. Reference oracle.

    O(n^4) on the numba path (literal quadruple loop), O(n^3) matrix
    form on the numpy path; both evaluate the definition with no
    fast-transform machinery shared with dft2_forward.
    """
    arr = _as_finite_complex(m, 2, "transform input")
    if _backend.use_numba():
        return _naive_dft2_numba(arr)
    return _naive_dft2_numpy(arr)


def fftshift(m) -> np.ndarray:
    """Rotate rows by floor(H/2) and columns by floor(W/2).

    Moves the zero-frequency bin (0, 0) to (floor(H/2), floor(W/2)).
    """
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"fftshift input must be 2-D, got shape {arr.shape}")
    return np.roll(arr, (arr.shape[0] // 2, arr.shape[1] // 2), axis=(0, 1))


def pointwise_mul(a, b) -> np.ndarray:
    """Element-wise complex product of two equal-shape matrices."""
    aa = np.asarray(a)
    bb = np.asarray(b)
    if aa.shape != bb.shape:
        raise ValueError(f"shape mismatch: {aa.shape} vs {bb.shape}")
    return aa * bb


def magnitude(m) -> np.ndarray:
    """Element-wise |z|."""
    return np.abs(np.asarray(m))
