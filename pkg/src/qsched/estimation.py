"""Synthetic resource estimates for proxies on machines.

Processing time is estimated once per job from a generic device model and
rescaled for fragments by the ratio of circuit depths. Noise is
device-specific; machines too small for a job yield no estimate, in which
case the value is extrapolated from a capacity-sized stand-in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from .circuits import CircuitProxy
    from .devices import Machine

_NOISE_CEIL = math.nextafter(1.0, 0.0)


class CapacityError(Exception):
    """Job does not fit the machine; the caller must cut first."""


@dataclass(frozen=True, slots=True)
class EstimateModel:
    """Per-machine timing and noise coefficients.

    ``per_layer_time`` and ``per_shot_readout`` build the processing-time
    estimate, ``noise_per_qubit_layer`` the error accumulated per
    (qubit x layer), ``base_setup`` the reconfiguration time between
    unrelated jobs and ``fragment_setup`` the (near-zero) switch time
    between fragments of the same parent circuit.
    """

    per_layer_time: float
    per_shot_readout: float
    noise_per_qubit_layer: float
    base_setup: float
    fragment_setup: float = 0.0

    def __post_init__(self) -> None:
        for name in ("per_layer_time", "per_shot_readout", "base_setup", "fragment_setup"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 < self.noise_per_qubit_layer < 1.0:
            raise ValueError("noise_per_qubit_layer must lie in (0, 1)")


def raw_processing_time(depth: int, shots: int, model: EstimateModel) -> float:
    if depth < 1:
        raise ValueError("depth must be positive")
    if shots < 0:
        raise ValueError("shots must be non-negative")
    return depth * model.per_layer_time + shots * model.per_shot_readout


def processing_time(proxy: CircuitProxy, machine: Machine) -> float:
    """Estimated seconds to run ``proxy`` natively on ``machine``."""
    if proxy.num_qubits > machine.capacity:
        raise CapacityError(
            f"job needs {proxy.num_qubits} qubits, machine {machine.id} has {machine.capacity}"
        )
    return raw_processing_time(proxy.depth, proxy.shots, machine.model)


def scaled_processing_time(parent: CircuitProxy, fragment_depth: int) -> float:
    """Fragment processing time: parent time scaled by the depth ratio."""
    if fragment_depth < 1:
        raise ValueError("fragment_depth must be positive")
    if parent.base_processing_time is None:
        raise ValueError("parent proxy has no base processing time")
    return parent.base_processing_time * (fragment_depth / parent.depth)


def _noise_value(num_qubits: int, depth: int, model: EstimateModel) -> float:
    eps = model.noise_per_qubit_layer
    value = 1.0 - (1.0 - eps) ** (num_qubits * depth)
    return min(max(value, 0.0), _NOISE_CEIL)


def base_noise(proxy: CircuitProxy, machine: Machine) -> float | None:
    """Expected noise of the job on the machine; None when it does not fit."""
    if proxy.num_qubits > machine.capacity:
        return None
    return _noise_value(proxy.num_qubits, proxy.depth, machine.model)


def extrapolated_noise(
    parent: CircuitProxy, fragment_depth: int, machines: Iterable[Machine]
) -> float:
    """Depth-scaled worst-case noise over all devices.

    Oversize parents are seeded from a stand-in job shrunk to the largest
    machine capacity (same depth); the maximum over the devices that yield
    an estimate is then scaled by the fragment/parent depth ratio.
    """
    machines = list(machines)
    if not machines:
        raise ValueError("no machines to estimate noise on")
    if fragment_depth < 1:
        raise ValueError("fragment_depth must be positive")
    q_eff = min(parent.num_qubits, max(m.capacity for m in machines))
    worst = max(
        _noise_value(q_eff, parent.depth, m.model)
        for m in machines
        if q_eff <= m.capacity
    )
    value = worst * (fragment_depth / parent.depth)
    return min(max(value, 0.0), _NOISE_CEIL)


def initial_estimates(
    num_qubits: int, depth: int, shots: int, machines: Iterable[Machine]
) -> tuple[float, float]:
    """Submission-time (processing time, noise) estimates for a new job.

    Time comes from the largest device's coefficients (one generic estimate
    per job, later rescaled for fragments); noise is the worst case over
    devices, seeded from a capacity-sized stand-in when the job fits none.
    """
    machines = list(machines)
    if not machines:
        raise ValueError("no machines to estimate on")
    reference = max(machines, key=lambda m: m.capacity)
    ptime = raw_processing_time(depth, shots, reference.model)
    q_eff = min(num_qubits, reference.capacity)
    noise = max(
        _noise_value(q_eff, depth, m.model) for m in machines if q_eff <= m.capacity
    )
    return ptime, noise


def setup_time(prev: CircuitProxy | None, nxt: CircuitProxy, machine: Machine) -> float:
    """Reconfiguration seconds between two consecutive jobs on a machine."""
    if prev is None:
        return 0.0
    if prev.parent_id == nxt.parent_id:
        return machine.model.fragment_setup
    return machine.model.base_setup
