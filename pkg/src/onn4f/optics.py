"""Forward optical model.

One layer of the stack is: elementwise preprocessing of the incoming field
(transmittance grid W times field, plus bias field B), then propagation
through a 4f correlator whose Fourier-plane element multiplies the centered
spectrum by exp(i*theta), i.e. a unit-modulus spectral mask.  Between layers
a modulus-shrinking activation (phase preserved) stands in for the optical
nonlinearity; after the last layer the detector measures intensity, summed
over 10 disjoint regions, one per digit class.

The bias is physically an incoherent superposition: two beams polarized at
90 degrees add in intensity without a cross term (see
:func:`superpose_intensity`), which is what justifies modelling W*X + B as
plain addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import backend
from .fourier import ShapeError, as_field, as_real_grid, check_grid_shape


class LayoutError(ValueError):
    """Detector layout invalid or inconsistent with the grid."""


class Region(NamedTuple):
    """Axis-aligned rectangle on the detector plane."""

    row0: int
    col0: int
    height: int
    width: int


NUM_CLASSES = 10


def _overlaps(a: Region, b: Region) -> bool:
    return (
        a.row0 < b.row0 + b.height
        and b.row0 < a.row0 + a.height
        and a.col0 < b.col0 + b.width
        and b.col0 < a.col0 + a.width
    )


@dataclass(frozen=True)
class DetectorLayout:
    """Ten disjoint readout rectangles, index k belongs to digit class k."""

    regions: tuple[Region, ...]

    def __post_init__(self):
        regions = tuple(Region(*r) for r in self.regions)
        object.__setattr__(self, "regions", regions)
        if len(regions) != NUM_CLASSES:
            raise LayoutError(f"need exactly {NUM_CLASSES} regions, got {len(regions)}")
        for r in regions:
            if r.row0 < 0 or r.col0 < 0 or r.height < 1 or r.width < 1:
                raise LayoutError(f"region {r} is empty or out of bounds")
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                if _overlaps(regions[i], regions[j]):
                    raise LayoutError(f"regions {i} and {j} overlap")

    def validate_for(self, grid_size: int) -> None:
        for k, r in enumerate(self.regions):
            if r.row0 + r.height > grid_size or r.col0 + r.width > grid_size:
                raise LayoutError(
                    f"region {k} {tuple(r)} exceeds the {grid_size}x{grid_size} grid"
                )

    @classmethod
    def default(cls, grid_size: int) -> "DetectorLayout":
        """Two rows of five square regions of side n/8.

        Regions are spread with equal gaps (exact for n >= 16, nearest-integer
        below); digits 0-4 sit on the top row, 5-9 on the bottom.
        """
        n = grid_size
        if n < 8 or n & (n - 1):
            raise LayoutError(f"grid size must be a power of two >= 8, got {n}")
        d = n // 8
        cols = [((i + 1) * (n - 5 * d) + 6 * i * d + 3) // 6 for i in range(5)]
        rows = [(2 * ((j + 1) * (n - 2 * d) + 3 * j * d) + 3) // 6 for j in range(2)]
        regions = tuple(
            Region(rows[k // 5], cols[k % 5], d, d) for k in range(NUM_CLASSES)
        )
        return cls(regions)


@dataclass(frozen=True)
class LayerParams:
    """Learnables of one optical layer.

    weight: real transmittance grid applied elementwise to the input field.
    bias:   real field offset added after weighting.
    phase:  mask angles in radians; the applied element is exp(i*phase), so
            only the value mod 2*pi is physical (stored unwrapped).
    """

    weight: np.ndarray
    bias: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        for name in ("weight", "bias", "phase"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            check_grid_shape(arr, name)
            if arr.ndim != 2:
                raise ShapeError(f"{name} must be 2D, got shape {arr.shape}")
            object.__setattr__(self, name, arr)
        if not (self.weight.shape == self.bias.shape == self.phase.shape):
            raise ShapeError("weight, bias and phase must share one shape")

    @property
    def grid_size(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def identity(cls, grid_size: int) -> "LayerParams":
        """Fully transparent layer: W=1, B=0, theta=0."""
        n = grid_size
        return cls(np.ones((n, n)), np.zeros((n, n)), np.zeros((n, n)))


@dataclass(frozen=True)
class Model:
    """An ordered stack of optical layers plus the detector geometry."""

    layers: tuple[LayerParams, ...]
    grid_size: int
    activation_shift: float
    detector: DetectorLayout

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 1:
            raise ShapeError("a model needs at least one layer")
        for i, layer in enumerate(self.layers):
            if layer.grid_size != self.grid_size:
                raise ShapeError(
                    f"layer {i} grid {layer.grid_size} != model grid {self.grid_size}"
                )
        if self.activation_shift < 0:
            raise ValueError("activation shift must be >= 0")
        self.detector.validate_for(self.grid_size)

    @property
    def num_layers(self) -> int:
        return len(self.layers)


@dataclass
class LayerTape:
    """Intermediates of one layer's forward pass (batched)."""

    field_in: np.ndarray  # complex input field E
    preprocessed: np.ndarray  # W*E + B
    spectrum: np.ndarray  # centered FFT of the preprocessed field
    masked: np.ndarray  # spectrum * exp(i*theta)
    field_out: np.ndarray  # inverse FFT of the masked spectrum
    act_mask: np.ndarray | None  # which cells passed the activation (None on last layer)


@dataclass
class ForwardTape:
    """Everything the backward pass needs, recorded by forward()."""

    layers: tuple[LayerTape, ...]
    intensity: np.ndarray  # (batch, n, n)
    readout: np.ndarray  # (batch, 10)

    @property
    def batch_size(self) -> int:
        return self.intensity.shape[0]


def superpose_intensity(i1: float, i2: float, alpha: float, mean_cos_psi: float) -> float:
    """Intensity of two superposed beams with polarization angle ``alpha``.

    I = I1 + I2 + 2*sqrt(I1*I2)*cos(alpha)*<cos psi>.  At alpha = pi/2 the
    cross term vanishes and intensities simply add, which is the regime the
    preprocessing bias relies on.
    """
    if i1 < 0 or i2 < 0:
        raise ValueError(f"intensities must be non-negative, got {i1}, {i2}")
    if not -1.0 <= mean_cos_psi <= 1.0:
        raise ValueError(f"mean_cos_psi must lie in [-1, 1], got {mean_cos_psi}")
    return i1 + i2 + 2.0 * math.sqrt(i1 * i2) * math.cos(alpha) * mean_cos_psi


def preprocess(x, layer: LayerParams) -> np.ndarray:
    """W * x + B as a complex field.

    ``x`` may be a non-negative amplitude image (first layer) or the complex
    field leaving a previous layer; W and B stay real, so the bias adds to
    the real part.
    """
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        field = as_field(arr, "x")
    else:
        field = as_real_grid(arr, "x").astype(np.complex128)
    if field.shape[-2:] != layer.weight.shape:
        raise ShapeError(
            f"input shape {field.shape[-2:]} != layer shape {layer.weight.shape}"
        )
    return layer.weight * field + layer.bias


def apply_spectral_mask(f, mask) -> np.ndarray:
    """ifft2(fft2(f) * mask) for an arbitrary complex spectral mask.

    General amplitude-and-phase propagation primitive.  The training path
    always goes through :func:`propagate_4f`, whose mask is unit-modulus.
    """
    fa = as_field(f)
    ma = as_field(mask, "mask")
    if fa.shape[-2:] != ma.shape[-2:]:
        raise ShapeError(f"mask shape {ma.shape} does not match field {fa.shape}")
    k = backend.get()
    return k.ifft2(k.fft2(fa) * ma)


def propagate_4f(pre, layer: LayerParams) -> np.ndarray:
    """One 4f stage: ifft2(fft2(pre) * exp(i*theta)).

    The mask has unit modulus, so total intensity is conserved for any theta.
    """
    fa = as_field(pre)
    if fa.shape[-2:] != layer.phase.shape:
        raise ShapeError(
            f"field shape {fa.shape[-2:]} != layer shape {layer.phase.shape}"
        )
    k = backend.get()
    return k.ifft2(k.apply_phase_mask(k.fft2(fa), layer.phase))


def shifted_relu(f, shift: float) -> np.ndarray:
    """Shrink each cell's modulus by ``shift`` (phase kept); clip at zero.

    shift=0 is the exact identity.  The turning point sits at modulus ==
    shift, where the output is 0.
    """
    if shift < 0:
        raise ValueError("shift must be >= 0")
    out, _ = backend.get().shifted_relu(as_field(f), shift)
    return out


def region_readout(i, layout: DetectorLayout) -> np.ndarray:
    """Sum intensity over each detector region; entry k is region k's power."""
    grid = as_real_grid(i, "intensity")
    layout.validate_for(grid.shape[-1])
    out = np.empty(grid.shape[:-2] + (NUM_CLASSES,), dtype=np.float64)
    for k, r in enumerate(layout.regions):
        block = grid[..., r.row0 : r.row0 + r.height, r.col0 : r.col0 + r.width]
        out[..., k] = block.sum(axis=(-2, -1))
    return out


def classify(readout) -> int:
    """Argmax detector region; ties resolve to the lowest index."""
    v = np.asarray(readout, dtype=np.float64)
    if v.shape != (NUM_CLASSES,):
        raise ValueError(f"readout must have shape ({NUM_CLASSES},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("readout contains non-finite values")
    return int(np.argmax(v))


def forward_batch(model: Model, images) -> tuple[np.ndarray, ForwardTape]:
    """Run the full stack over a batch of amplitude images (B, n, n).

    Returns (readouts (B, 10), tape).  The tape keeps every intermediate
    field needed by the reverse pass.
    """
    xb = np.ascontiguousarray(images, dtype=np.float64)
    if xb.ndim != 3 or xb.shape[1:] != (model.grid_size, model.grid_size):
        raise ShapeError(
            f"expected batch of shape (B, {model.grid_size}, {model.grid_size}), "
            f"got {xb.shape}"
        )
    if xb.size and xb.min() < 0:
        raise ValueError("amplitude images must be non-negative")
    k = backend.get()
    cur = xb.astype(np.complex128)
    records: list[LayerTape] = []
    last = model.num_layers - 1
    for idx, layer in enumerate(model.layers):
        pre = layer.weight * cur + layer.bias
        spec = k.fft2(pre)
        masked = k.apply_phase_mask(spec, layer.phase)
        out = k.ifft2(masked)
        if idx != last:
            nxt, mask = k.shifted_relu(out, model.activation_shift)
            records.append(LayerTape(cur, pre, spec, masked, out, mask))
            cur = nxt
        else:
            records.append(LayerTape(cur, pre, spec, masked, out, None))
    inten = k.intensity(records[-1].field_out)
    readouts = region_readout(inten, model.detector)
    return readouts, ForwardTape(tuple(records), inten, readouts)


def forward(model: Model, x) -> tuple[np.ndarray, ForwardTape]:
    """Single-sample forward pass: returns (readout (10,), tape)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2D image, got shape {arr.shape}")
    readouts, tape = forward_batch(model, arr[None, :, :])
    return readouts[0], tape
