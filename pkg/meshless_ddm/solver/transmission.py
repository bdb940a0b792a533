"""
Robin transmission condition between neighbouring subdomains.

A trace carries the producer's value and normal derivative on the shared interface points,
with the derivative taken along the *receiver's* outward normal, so the receiver can compare
it directly against its own normal derivative.
"""
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from meshless_ddm.solver.exceptions import ProtocolError
from meshless_ddm.solver.nets import JetBatch

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class InterfaceTrace:
    interface: int
    producer: int
    receiver: int
    values: FloatArray
    normal_derivatives: FloatArray
    iteration: int

    def __post_init__(self):
        if self.values.shape != self.normal_derivatives.shape:
            raise ProtocolError(f"trace on interface {self.interface} has mismatched value/flux arrays")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.normal_derivatives))):
            raise ProtocolError(f"trace on interface {self.interface} from {self.producer} is not finite")

    def __len__(self) -> int:
        return self.values.shape[0]


def zero_trace(interface: int, producer: int, receiver: int, n_points: int) -> InterfaceTrace:
    """Trace used before the first exchange."""
    return InterfaceTrace(interface, producer, receiver, np.zeros(n_points), np.zeros(n_points), iteration=0)


@dataclass
class RobinMismatch:
    """Per-point residuals with their partial derivatives."""

    residuals: FloatArray
    value_gap: FloatArray
    flux_gap: FloatArray
    d_value: FloatArray
    d_flux: FloatArray


def robin_mismatch_partials(
    own: JetBatch, trace: InterfaceTrace, alpha: float, normals: ArrayLike
) -> RobinMismatch:
    if len(own) != len(trace):
        raise ProtocolError(
            f"interface {trace.interface}: {len(own)} own points but trace from {trace.producer} has {len(trace)}"
        )
    du = own.value - trace.values
    dq = own.normal_derivative(normals) - trace.normal_derivatives
    a2, b2 = alpha * alpha, (1.0 - alpha) ** 2
    return RobinMismatch(
        residuals=a2 * du * du + b2 * dq * dq,
        value_gap=du,
        flux_gap=dq,
        d_value=2.0 * a2 * du,
        d_flux=2.0 * b2 * dq,
    )


def robin_mismatch(own: JetBatch, trace: InterfaceTrace, alpha: float, normals: ArrayLike) -> FloatArray:
    """``alpha^2 (u - u_trace)^2 + (1 - alpha)^2 (du/dn - du_trace/dn)^2`` at each interface point."""
    return robin_mismatch_partials(own, trace, alpha, normals).residuals


def closed_form_alpha(value_gaps: FloatArray, flux_gaps: FloatArray) -> float | None:
    """Minimiser ``B / (A + B)`` of ``alpha^2 A + (1 - alpha)^2 B``; None when both gaps vanish."""
    a, b = float(np.sum(value_gaps**2)), float(np.sum(flux_gaps**2))
    if a + b == 0.0:
        return None
    return b / (a + b)


def normalized_alpha_gradient(alpha: float, value_gaps: FloatArray, flux_gaps: FloatArray) -> float:
    """
    Derivative of the summed Robin mismatch in ``alpha``, divided by ``A + B``.

    With ``A`` and ``B`` the summed squared value and flux gaps this is ``2 (alpha - B / (A + B))``:
    it lies in ``[-2, 2]`` whatever the size of the gaps, and vanishes when both gaps do.
    """
    a, b = float(np.sum(value_gaps**2)), float(np.sum(flux_gaps**2))
    if a + b == 0.0:
        return 0.0
    return (2.0 * alpha * a - 2.0 * (1.0 - alpha) * b) / (a + b)
