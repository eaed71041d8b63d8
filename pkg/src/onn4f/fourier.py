"""Complex 2D fields and centered unitary Fourier transforms.

Conventions used throughout the package:

* grids are square with a power-of-two side (radix-2 friendly);
* a *field* is a complex128 array, a *grid* is a float64 array;
* ``fft2``/``ifft2`` put DC at the grid center (index n/2) and scale by
  1/n per transform, so they preserve the L2 norm exactly and are adjoints
  of each other — which is what makes the reverse-mode pass simple.

A leading batch axis is accepted by every operation; the shape rules apply
to the trailing two axes.
"""

from __future__ import annotations

import numpy as np

from . import backend


class ShapeError(ValueError):
    """Grid is not square/power-of-two, or operand shapes do not match."""


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def check_grid_shape(a: np.ndarray, name: str = "grid") -> None:
    """Reject arrays that are not (...,n,n) with n a power of two."""
    if a.ndim < 2:
        raise ShapeError(f"{name} must be at least 2D, got shape {a.shape}")
    rows, cols = a.shape[-2], a.shape[-1]
    if rows != cols:
        raise ShapeError(f"{name} must be square, got {rows}x{cols}")
    if not _is_pow2(rows):
        raise ShapeError(f"{name} side must be a power of two, got {rows}")


def as_field(a, name: str = "field") -> np.ndarray:
    """Validate and return ``a`` as a C-contiguous complex128 field."""
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    check_grid_shape(arr, name)
    return arr


def as_real_grid(a, name: str = "grid") -> np.ndarray:
    if np.iscomplexobj(a):
        raise TypeError(f"{name} must be real, got complex data")
    arr = np.ascontiguousarray(a, dtype=np.float64)
    check_grid_shape(arr, name)
    return arr


def fft2(f) -> np.ndarray:
    """Centered unitary 2D DFT: DC at index n/2, norm preserved exactly."""
    return backend.get().fft2(as_field(f))


def ifft2(f) -> np.ndarray:
    """Inverse of :func:`fft2`; round trips to ~1e-15 relative."""
    return backend.get().ifft2(as_field(f))


def hadamard(a, b) -> np.ndarray:
    """Elementwise complex product of two fields."""
    fa = as_field(a, "a")
    fb = as_field(b, "b")
    if fa.shape != fb.shape:
        raise ShapeError(f"shape mismatch: {fa.shape} vs {fb.shape}")
    return fa * fb


def intensity(f) -> np.ndarray:
    """Elementwise squared modulus |v|^2 (what a detector measures)."""
    return backend.get().intensity(as_field(f))


def l2_norm_sq(f) -> float:
    """Total power of a field: sum of |v|^2."""
    arr = np.asarray(f)
    return float(np.sum(arr.real**2 + arr.imag**2))
