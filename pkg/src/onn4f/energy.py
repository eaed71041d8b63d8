"""Throughput and energy-efficiency arithmetic for the optical stack.

A 4f convolution applies one complex multiply per node pair per pass, so an
L-layer stack of N x N planes performs 2 * total_nodes^2 floating-point
operations per clock cycle (multiply + accumulate), at the optical clock
rate and the total drive power.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class EnergyReport:
    layers: int
    nodes_per_layer: float
    total_nodes: float
    clock_rate: float
    flops_per_second: float
    total_power: float
    flops_per_joule: float

    def lines(self) -> list[str]:
        return [
            f"layers={self.layers}",
            f"nodes_per_layer={self.nodes_per_layer!r}",
            f"total_nodes={self.total_nodes!r}",
            f"clock_rate_hz={self.clock_rate!r}",
            f"flops_per_second={self.flops_per_second!r}",
            f"total_power_w={self.total_power!r}",
            f"flops_per_joule={self.flops_per_joule!r}",
        ]


def energy_report(
    layers: int,
    grid_size: int | None,
    clock_rate: float,
    total_power: float,
    total_nodes: float | None = None,
) -> EnergyReport:
    """Compute the report; ``total_nodes`` overrides L*N^2 when given.

    The override exists so rounded node counts quoted elsewhere can be
    plugged in verbatim next to the exact grid-derived figure.
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    if clock_rate <= 0:
        raise ValueError("clock rate must be > 0")
    if total_power <= 0:
        raise ValueError("power must be > 0")
    if total_nodes is None:
        if grid_size is None or grid_size < 1:
            raise ValueError("need a positive grid size or an explicit node count")
        total_nodes = float(layers) * grid_size * grid_size
    elif total_nodes <= 0:
        raise ValueError("node count must be > 0")
    total_nodes = float(total_nodes)
    fps = 2.0 * total_nodes * total_nodes * clock_rate
    return EnergyReport(
        layers=layers,
        nodes_per_layer=total_nodes / layers,
        total_nodes=total_nodes,
        clock_rate=float(clock_rate),
        flops_per_second=fps,
        total_power=float(total_power),
        flops_per_joule=fps / total_power,
    )
