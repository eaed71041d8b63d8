"""Reverse-mode gradients of the optical forward pass.

Complex intermediates carry gradients in the convention
g = dL/dRe(v) + i*dL/dIm(v), so for any holomorphic step v -> c*v the
upstream gradient is multiplied by conj(c), and the adjoint of the centered
unitary fft2 is the centered unitary ifft2 (and vice versa).  Real-valued
learnables (weight, bias) take the real part of the complex chain product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .optics import ForwardTape, Model, forward


class ConsistencyError(ValueError):
    """Tape, model and gradient structures do not belong together."""


@dataclass
class LayerGrads:
    """Loss gradients for one layer's learnables."""

    d_weight: np.ndarray
    d_bias: np.ndarray
    d_phase: np.ndarray


@dataclass
class Gradients:
    layers: tuple[LayerGrads, ...]


def backward(model: Model, tape: ForwardTape, d_readout) -> Gradients:
    """Propagate dL/d(readout) back to every layer's W, B and theta.

    ``d_readout`` is (10,) for a single sample or (B, 10) for a batch; batch
    gradients are summed, so seed with per-sample weights (e.g. 1/B) to get
    a mean.  The pass is linear in ``d_readout``.
    """
    if len(tape.layers) != model.num_layers:
        raise ConsistencyError(
            f"tape has {len(tape.layers)} layers, model has {model.num_layers}"
        )
    n = model.grid_size
    if tape.intensity.shape[-2:] != (n, n):
        raise ConsistencyError(
            f"tape grid {tape.intensity.shape[-2:]} != model grid ({n}, {n})"
        )
    d_read = np.asarray(d_readout, dtype=np.float64)
    if d_read.ndim == 1:
        d_read = d_read[None, :]
    bsz = tape.batch_size
    if d_read.shape != (bsz, 10):
        raise ConsistencyError(
            f"d_readout shape {np.asarray(d_readout).shape} does not match "
            f"batch size {bsz}"
        )

    k = backend.get()
    # Readout is a plain sum over disjoint regions: scatter each region's
    # gradient back onto its cells, zero elsewhere.
    d_int = np.zeros_like(tape.intensity)
    for idx, r in enumerate(model.detector.regions):
        d_int[:, r.row0 : r.row0 + r.height, r.col0 : r.col0 + r.width] = d_read[
            :, idx, None, None
        ]
    # I = O * conj(O): dL/dO = 2 * dL/dI * O in the real-pair convention.
    d_out = 2.0 * d_int * tape.layers[-1].field_out

    grads: list[LayerGrads | None] = [None] * model.num_layers
    for li in range(model.num_layers - 1, -1, -1):
        rec = tape.layers[li]
        layer = model.layers[li]
        d_masked = k.fft2(d_out)  # adjoint of the final ifft2
        d_spec, d_phase = k.phase_mask_grads(d_masked, rec.masked, layer.phase)
        d_pre = k.ifft2(d_spec)  # adjoint of the forward fft2
        d_weight = (d_pre * np.conj(rec.field_in)).real.sum(axis=0)
        d_bias = d_pre.real.sum(axis=0)
        grads[li] = LayerGrads(d_weight, d_bias, d_phase)
        if li > 0:
            d_field = layer.weight * d_pre
            prev = tape.layers[li - 1]
            d_out = k.shifted_relu_grad(d_field, prev.field_out, model.activation_shift)
    return Gradients(tuple(grads))


def _loss_and_masks(model: Model, x, label: int):
    from .train import cross_entropy, softmax

    readout, tape = forward(model, x)
    loss = cross_entropy(softmax(readout), label)
    masks = tuple(
        rec.act_mask.tobytes() for rec in tape.layers if rec.act_mask is not None
    )
    return loss, masks


def grad_check(model: Model, x, label: int, step: float = 1e-5) -> float:
    """Central-difference check of backward() on the cross-entropy loss.

    Perturbs every parameter of every layer by +-step (scaled by the
    parameter's magnitude) and compares the finite-difference slope against
    the analytic gradient.  Parameters whose perturbation flips any
    activation on/off are skipped: the activation has a kink there and the
    two-sided difference is meaningless.  Returns the maximum relative error
    over all checked parameters.
    """
    from .train import cross_entropy, softmax

    if step <= 0:
        raise ValueError("step must be > 0")
    readout, tape = forward(model, x)
    probs = softmax(readout)
    base_masks = tuple(
        rec.act_mask.tobytes() for rec in tape.layers if rec.act_mask is not None
    )
    seed = probs.copy()
    seed[label] -= 1.0  # d(cross entropy after softmax)/d(readout)
    grads = backward(model, tape, seed)

    worst = 0.0
    for li, layer in enumerate(model.layers):
        for name in ("weight", "bias", "phase"):
            param = getattr(layer, name)  # mutated in place, restored below
            grad = getattr(grads.layers[li], f"d_{name}")
            it = np.nditer(param, flags=["multi_index"])
            for _ in it:
                ij = it.multi_index
                orig = param[ij]
                h = step * max(1.0, abs(orig))
                param[ij] = orig + h
                lo_plus, masks_plus = _loss_and_masks(model, x, label)
                param[ij] = orig - h
                lo_minus, masks_minus = _loss_and_masks(model, x, label)
                param[ij] = orig
                if masks_plus != base_masks or masks_minus != base_masks:
                    continue  # stepped across an activation kink
                fd = (lo_plus - lo_minus) / (2.0 * h)
                an = grad[ij]
                diff = abs(an - fd)
                if abs(fd) < 1e-8:
                    # near-zero slope: judge by absolute disagreement
                    err = 0.0 if diff <= 1e-10 else diff / 1e-8
                else:
                    err = diff / abs(fd)
                worst = max(worst, err)
    return float(worst)
