"""Reduced-order model operators and their runtime evaluation.

A ROM is the reduction basis plus diagonal reduced mass (identity by
construction), diagonal linear stiffness, unique-entry quadratic/cubic
tensors, and the two Rayleigh damping coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .newmark import ImplicitModel
from .sym_tensor import force_cubic, force_quadratic, tangent_cubic, tangent_quadratic
from .tensor_id import IdentifiedTensors

__all__ = [
    "RomOperators",
    "reduced_force",
    "reduced_tangent",
    "rayleigh_params",
    "assemble_damping",
    "linearize",
    "reconstruct",
    "rom_model",
]


@dataclass
class RomOperators:
    """One reduced model: basis, diagonal linear part, tensors, damping."""

    basis: np.ndarray  # (n, m); reduced mass is the identity through it
    k1_diag: np.ndarray  # (m,) squared angular frequencies
    tensors: IdentifiedTensors
    alpha: float  # Rayleigh mass coefficient, 1/s
    beta: float  # Rayleigh stiffness coefficient, s
    p_hat: np.ndarray = field(default=None)  # source parameter point

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=float)
        self.k1_diag = np.asarray(self.k1_diag, dtype=float)
        if self.tensors.m != self.m:
            raise ValueError("tensor size does not match the basis")

    def validate(self) -> "RomOperators":
        """Enforce positivity of the stiffness diagonal and damping."""
        if np.any(self.k1_diag <= 0.0):
            raise ValueError("reduced stiffness diagonal must be positive")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("Rayleigh coefficients must be nonnegative")
        return self

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def m(self) -> int:
        return self.basis.shape[1]

    @property
    def omegas(self) -> np.ndarray:
        return np.sqrt(self.k1_diag)


def reduced_force(ops: RomOperators, eta) -> np.ndarray:
    """Cubic restoring force in reduced coordinates."""
    eta = np.asarray(eta, dtype=float)
    return (
        ops.k1_diag * eta
        + force_quadratic(ops.tensors.k2_unique, eta)
        + force_cubic(ops.tensors.k3_unique, eta)
    )


def reduced_tangent(ops: RomOperators, eta) -> np.ndarray:
    """Jacobian of the reduced force; quadratic in the reduced coordinates."""
    eta = np.asarray(eta, dtype=float)
    return (
        np.diag(ops.k1_diag)
        + 2.0 * tangent_quadratic(ops.tensors.k2_unique, eta)
        + 3.0 * tangent_cubic(ops.tensors.k3_unique, eta)
    )


def rayleigh_params(omega1: float, omega2: float, zeta: float) -> tuple[float, float]:
    """Mass/stiffness damping coefficients imposing `zeta` at two frequencies."""
    if omega1 <= 0.0 or omega2 <= 0.0:
        raise ValueError("frequencies must be positive")
    if omega1 == omega2:
        raise ValueError("frequencies must be distinct")
    alpha = 2.0 * zeta * omega1 * omega2 / (omega1 + omega2)
    beta = 2.0 * zeta / (omega1 + omega2)
    return alpha, beta


def assemble_damping(ops: RomOperators) -> np.ndarray:
    """Diagonal reduced Rayleigh damping: alpha + beta * k1_diag."""
    return ops.alpha + ops.beta * ops.k1_diag


def linearize(ops: RomOperators) -> RomOperators:
    """Same model with the nonlinear tensors zeroed."""
    return replace(ops, tensors=IdentifiedTensors.zeros(ops.m, method="zero"))


def reconstruct(basis: np.ndarray, eta_history: np.ndarray) -> np.ndarray:
    """Map reduced-coordinate history (steps, m) back to full order (steps, n)."""
    eta_history = np.atleast_2d(np.asarray(eta_history, dtype=float))
    if eta_history.shape[1] != basis.shape[1]:
        raise ValueError("reduced history width does not match the basis")
    return eta_history @ basis.T


def rom_model(ops: RomOperators, load_fn) -> ImplicitModel:
    """Wrap the ROM in the shared integration contract.

    `load_fn` maps time to the full-order load vector; it is projected on
    the basis here.
    """
    vt = ops.basis.T
    damping = np.diag(assemble_damping(ops))
    return ImplicitModel(
        mass=np.eye(ops.m),
        damping=damping,
        force=lambda eta: reduced_force(ops, eta),
        tangent=lambda eta: reduced_tangent(ops, eta),
        load=lambda t: vt @ load_fn(t),
    )
