# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: batched radix-2 centered unitary 2D FFTs plus fused
elementwise optics ops.

Mirrors the API of ``onn4f._kernels_py``: arrays are C-contiguous complex128
of shape (n, n) or (batch, n, n) with n a power of two; phase grids are
shared (n, n) float64.
"""

import numpy as np

from libc.math cimport cos, sin, sqrt

NAME = "compiled"

ctypedef double complex cplx

cdef double complex J = 1j


# ---------------------------------------------------------------------------
# FFT plans (per grid size): bit-reversal tables with the centering shift
# folded in, and twiddle factors for both directions.
# ---------------------------------------------------------------------------

_plans = {}


def _plan(n):
    got = _plans.get(n)
    if got is not None:
        return got
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"FFT size must be a power of two, got {n}")
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for i in range(n):
        r = 0
        x = i
        for _ in range(bits):
            r = (r << 1) | (x & 1)
            x >>= 1
        rev[i] = r
    half = n >> 1
    gather = ((rev + half) % n).astype(np.int64)
    k = np.arange(max(half, 1), dtype=np.float64)
    tw_f = np.exp(-2j * np.pi * k / n).astype(np.complex128)
    tw_i = np.conj(tw_f)
    plan = (gather, rev, tw_f, tw_i)
    _plans[n] = plan
    return plan


cdef void _fft2_image(cplx[:, :, ::1] src, cplx[:, :, ::1] out, Py_ssize_t b,
                      cplx[:, ::1] work, cplx[:, ::1] mid,
                      long long[::1] gather, long long[::1] rev,
                      cplx[::1] tw, int n) nogil:
    cdef int half = n >> 1
    cdef int imask = n - 1
    cdef int r, j, sr
    cdef int length, hl, step, start, k, ru, rt
    cdef cplx w, t, u
    cdef double scale = 1.0 / n

    # Row pass. The input ifftshift on both axes and the per-row bit-reversal
    # are folded into one gather: rows shift by n/2, columns use gather[].
    for r in range(n):
        sr = (r + half) & imask
        for j in range(n):
            work[r, j] = src[b, sr, gather[j]]
        length = 2
        while length <= n:
            hl = length >> 1
            step = n / length
            start = 0
            while start < n:
                for k in range(hl):
                    w = tw[k * step]
                    t = w * work[r, start + hl + k]
                    u = work[r, start + k]
                    work[r, start + k] = u + t
                    work[r, start + hl + k] = u - t
                start += length
            length <<= 1

    # Column pass: bit-reverse whole rows, then butterflies vectorized over
    # the contiguous column index.
    for r in range(n):
        sr = rev[r]
        for j in range(n):
            mid[r, j] = work[sr, j]
    length = 2
    while length <= n:
        hl = length >> 1
        step = n / length
        start = 0
        while start < n:
            for k in range(hl):
                w = tw[k * step]
                ru = start + k
                rt = start + hl + k
                for j in range(n):
                    t = w * mid[rt, j]
                    u = mid[ru, j]
                    mid[ru, j] = u + t
                    mid[rt, j] = u - t
            start += length
        length <<= 1

    # Output fftshift on both axes plus the unitary 1/n scale.
    for r in range(n):
        sr = (r + half) & imask
        for j in range(n):
            out[b, r, j] = mid[sr, (j + half) & imask] * scale


def _fft2_dispatch(a, inverse):
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[None, :, :]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError("expected an (n, n) or (batch, n, n) array")
    n = arr.shape[1]
    gather, rev, tw_f, tw_i = _plan(n)
    tw = tw_i if inverse else tw_f
    out = np.empty_like(arr)
    work = np.empty((n, n), dtype=np.complex128)
    mid = np.empty((n, n), dtype=np.complex128)

    cdef cplx[:, :, ::1] src_v = arr
    cdef cplx[:, :, ::1] out_v = out
    cdef cplx[:, ::1] work_v = work
    cdef cplx[:, ::1] mid_v = mid
    cdef long long[::1] gather_v = gather
    cdef long long[::1] rev_v = rev
    cdef cplx[::1] tw_v = tw
    cdef int cn = n
    cdef Py_ssize_t bi, nb = src_v.shape[0]
    with nogil:
        for bi in range(nb):
            _fft2_image(src_v, out_v, bi, work_v, mid_v, gather_v, rev_v, tw_v, cn)
    return out[0] if squeeze else out


def fft2(a):
    """Centered unitary 2D FFT over the last two axes (DC at grid center)."""
    return _fft2_dispatch(a, False)


def ifft2(a):
    """Exact inverse of :func:`fft2` under the same convention."""
    return _fft2_dispatch(a, True)


# ---------------------------------------------------------------------------
# Fused elementwise kernels.  cos/sin of the shared phase row are computed
# once and reused across the batch.
# ---------------------------------------------------------------------------

def _as_batch3(a):
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.ndim == 2:
        return arr[None, :, :], True
    if arr.ndim != 3:
        raise ValueError("expected an (n, n) or (batch, n, n) array")
    return arr, False


def apply_phase_mask(spec, theta):
    """Elementwise spectrum * exp(i*theta); theta broadcasts over the batch."""
    spec3, squeeze = _as_batch3(spec)
    th = np.ascontiguousarray(theta, dtype=np.float64)
    if th.shape != spec3.shape[1:]:
        raise ValueError("phase grid shape does not match the spectrum")
    out = np.empty_like(spec3)
    n = spec3.shape[1]
    cbuf = np.empty(n, dtype=np.float64)
    sbuf = np.empty(n, dtype=np.float64)

    cdef cplx[:, :, ::1] sv = spec3
    cdef cplx[:, :, ::1] ov = out
    cdef double[:, ::1] tv = th
    cdef double[::1] cb = cbuf
    cdef double[::1] sb = sbuf
    cdef Py_ssize_t b, i, j, nb = sv.shape[0], nn = n
    cdef double re, im
    with nogil:
        for i in range(nn):
            for j in range(nn):
                cb[j] = cos(tv[i, j])
                sb[j] = sin(tv[i, j])
            for b in range(nb):
                for j in range(nn):
                    re = sv[b, i, j].real
                    im = sv[b, i, j].imag
                    ov[b, i, j] = (re * cb[j] - im * sb[j]) + J * (re * sb[j] + im * cb[j])
    return out[0] if squeeze else out


def phase_mask_grads(d_masked, masked, theta):
    """Adjoints of :func:`apply_phase_mask`.

    Returns (d_spec, d_theta): d_spec = d_masked * exp(-i*theta) and
    d_theta = Re((i*masked) * conj(d_masked)) summed over the batch axis.
    """
    dm3, squeeze = _as_batch3(d_masked)
    mk3, _ = _as_batch3(masked)
    if mk3.shape != dm3.shape:
        raise ValueError("masked spectrum shape does not match the gradient")
    th = np.ascontiguousarray(theta, dtype=np.float64)
    if th.shape != dm3.shape[1:]:
        raise ValueError("phase grid shape does not match the spectrum")
    d_spec = np.empty_like(dm3)
    n = dm3.shape[1]
    d_theta = np.zeros((n, n), dtype=np.float64)
    cbuf = np.empty(n, dtype=np.float64)
    sbuf = np.empty(n, dtype=np.float64)

    cdef cplx[:, :, ::1] dv = dm3
    cdef cplx[:, :, ::1] mv = mk3
    cdef cplx[:, :, ::1] ov = d_spec
    cdef double[:, ::1] tv = th
    cdef double[:, ::1] gv = d_theta
    cdef double[::1] cb = cbuf
    cdef double[::1] sb = sbuf
    cdef Py_ssize_t b, i, j, nb = dv.shape[0], nn = n
    cdef double dr, di, mr, mi, acc
    with nogil:
        for i in range(nn):
            for j in range(nn):
                cb[j] = cos(tv[i, j])
                sb[j] = sin(tv[i, j])
            for j in range(nn):
                acc = 0.0
                for b in range(nb):
                    dr = dv[b, i, j].real
                    di = dv[b, i, j].imag
                    mr = mv[b, i, j].real
                    mi = mv[b, i, j].imag
                    ov[b, i, j] = (dr * cb[j] + di * sb[j]) + J * (di * cb[j] - dr * sb[j])
                    acc += mr * di - mi * dr
                gv[i, j] = acc
    return (d_spec[0] if squeeze else d_spec), d_theta


def shifted_relu(field, shift):
    """Modulus shrink by ``shift`` with phase preserved.

    Cells with modulus <= shift are zeroed.  Returns (activated, pass_mask).
    """
    f3, squeeze = _as_batch3(field)
    out = np.empty_like(f3)
    mask = np.empty(f3.shape, dtype=np.uint8)

    cdef cplx[:, :, ::1] fv = f3
    cdef cplx[:, :, ::1] ov = out
    cdef unsigned char[:, :, ::1] kv = mask
    cdef double s = shift
    cdef Py_ssize_t b, i, j
    cdef double re, im, m, fac
    with nogil:
        for b in range(fv.shape[0]):
            for i in range(fv.shape[1]):
                for j in range(fv.shape[2]):
                    re = fv[b, i, j].real
                    im = fv[b, i, j].imag
                    m = sqrt(re * re + im * im)
                    if m > s:
                        fac = (m - s) / m
                        ov[b, i, j] = fac * fv[b, i, j]
                        kv[b, i, j] = 1
                    else:
                        ov[b, i, j] = 0
                        kv[b, i, j] = 0
    mask_b = mask.view(np.bool_)
    return (out[0] if squeeze else out), (mask_b[0] if squeeze else mask_b)


def shifted_relu_grad(d_out, field, shift):
    """Reverse-mode gradient of shifted_relu w.r.t. its input field.

    ``field`` is the pre-activation input.  Subgradient 0 at the turning
    point and on zeroed cells.
    """
    d3, squeeze = _as_batch3(d_out)
    f3, _ = _as_batch3(field)
    if f3.shape != d3.shape:
        raise ValueError("field shape does not match the gradient")
    out = np.empty_like(d3)

    cdef cplx[:, :, ::1] dv = d3
    cdef cplx[:, :, ::1] fv = f3
    cdef cplx[:, :, ::1] ov = out
    cdef double s = shift
    cdef Py_ssize_t b, i, j
    cdef double re, im, dr, di, m, radial, base
    with nogil:
        for b in range(fv.shape[0]):
            for i in range(fv.shape[1]):
                for j in range(fv.shape[2]):
                    re = fv[b, i, j].real
                    im = fv[b, i, j].imag
                    m = sqrt(re * re + im * im)
                    if m > s:
                        dr = dv[b, i, j].real
                        di = dv[b, i, j].imag
                        radial = (re * dr + im * di) / (m * m * m)
                        base = 1.0 - s / m
                        ov[b, i, j] = (base * dr + s * radial * re) + J * (base * di + s * radial * im)
                    else:
                        ov[b, i, j] = 0
    return out[0] if squeeze else out


def intensity(field):
    """Elementwise squared modulus |v|^2."""
    f3, squeeze = _as_batch3(field)
    out = np.empty(f3.shape, dtype=np.float64)

    cdef cplx[:, :, ::1] fv = f3
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t b, i, j
    cdef double re, im
    with nogil:
        for b in range(fv.shape[0]):
            for i in range(fv.shape[1]):
                for j in range(fv.shape[2]):
                    re = fv[b, i, j].real
                    im = fv[b, i, j].imag
                    ov[b, i, j] = re * re + im * im
    return out[0] if squeeze else out
