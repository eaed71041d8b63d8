"""Pure-numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension
(``onn4f._core``) is unavailable.  Both backends expose the same functions
over C-contiguous complex128 arrays of shape (n, n) or (batch, n, n); the
phase grid is always a shared (n, n) float64 array.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

_AXES = (-2, -1)


def fft2(a: np.ndarray) -> np.ndarray:
    """Centered unitary 2D FFT over the last two axes (DC at grid center)."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    shifted = np.fft.ifftshift(a, axes=_AXES)
    spec = np.fft.fft2(shifted, axes=_AXES, norm="ortho")
    return np.fft.fftshift(spec, axes=_AXES)


def ifft2(a: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`fft2` under the same convention."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    shifted = np.fft.ifftshift(a, axes=_AXES)
    field = np.fft.ifft2(shifted, axes=_AXES, norm="ortho")
    return np.fft.fftshift(field, axes=_AXES)


def apply_phase_mask(spec: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Elementwise spectrum * exp(i*theta); theta broadcasts over the batch."""
    return spec * np.exp(1j * theta)


def phase_mask_grads(
    d_masked: np.ndarray, masked: np.ndarray, theta: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Adjoints of :func:`apply_phase_mask`.

    Returns (d_spec, d_theta) where d_spec routes the upstream gradient to
    the unmasked spectrum (multiply by exp(-i*theta)) and d_theta is
    Re((i*masked) * conj(d_masked)) summed over the batch axis.
    """
    d_spec = d_masked * np.exp(-1j * theta)
    per_cell = (1j * masked * np.conj(d_masked)).real
    if per_cell.ndim == 3:
        d_theta = per_cell.sum(axis=0)
    else:
        d_theta = per_cell
    return d_spec, d_theta


def shifted_relu(field: np.ndarray, shift: float) -> tuple[np.ndarray, np.ndarray]:
    """Modulus shrink by ``shift`` with phase preserved.

    Cells with modulus <= shift are zeroed.  Returns (activated, pass_mask).
    """
    m = np.abs(field)
    mask = m > shift
    # avoid 0/0 on clipped cells; their scale is forced to 0 by the mask
    safe = np.where(mask, m, 1.0)
    scale = np.where(mask, (m - shift) / safe, 0.0)
    return scale * field, mask


def shifted_relu_grad(d_out: np.ndarray, field: np.ndarray, shift: float) -> np.ndarray:
    """Reverse-mode gradient of shifted_relu w.r.t. its input field.

    ``field`` is the pre-activation input.  Subgradient 0 at the turning
    point (modulus == shift) and on zeroed cells.
    """
    m = np.abs(field)
    mask = m > shift
    safe = np.where(mask, m, 1.0)
    radial = (field.real * d_out.real + field.imag * d_out.imag) / safe**3
    g = (1.0 - shift / safe) * d_out + shift * radial * field
    return np.where(mask, g, 0.0)


def intensity(field: np.ndarray) -> np.ndarray:
    """Elementwise squared modulus |v|^2."""
    return field.real**2 + field.imag**2
