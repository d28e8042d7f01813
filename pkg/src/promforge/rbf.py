"""Radial basis function interpolation of reduced-model operators.

Every operator entry is a scalar function of the normalized parameter
point; one shared kernel matrix factorization per shape parameter serves
all entries of an operator.  Evaluation reassembles the interpolated
entries into structure-checked reduced operators, and parameter gradients
come from differentiating the kernel analytically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import IllConditionedError, StructureViolationError
from .rom import RomOperators
from .tensor_id import IdentifiedTensors

__all__ = [
    "RbfKernel",
    "RbfInterpolant",
    "PromModel",
    "ValidationReport",
    "kernel_eval",
    "kernel_slope_over_distance",
    "fit_weights",
    "fit_prom_interpolants",
    "evaluate_prom",
    "prom_gradient",
    "validate_eps",
    "OPERATOR_NAMES",
    "operator_vectors",
    "default_eps_grid",
]

OPERATOR_NAMES = ("k1", "k2", "k3", "v", "alpha", "beta")

KERNEL_KINDS = ("inverse_multiquadric", "gaussian")


@dataclass(frozen=True)
class RbfKernel:
    """Radial kernel with a positive shape parameter acting on distances."""

    kind: str = "inverse_multiquadric"
    eps: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.eps <= 0.0:
            raise ValueError("shape parameter must be positive")


def kernel_eval(kernel: RbfKernel, delta):
    """Kernel value at distance delta (vectorized)."""
    delta = np.asarray(delta, dtype=float)
    x2 = (kernel.eps * delta) ** 2
    if kernel.kind == "inverse_multiquadric":
        return 1.0 / np.sqrt(1.0 + x2)
    return np.exp(-x2)


def kernel_slope_over_distance(kernel: RbfKernel, delta):
    """gamma'(delta)/delta, smooth through delta = 0 for both kernels."""
    delta = np.asarray(delta, dtype=float)
    x2 = (kernel.eps * delta) ** 2
    if kernel.kind == "inverse_multiquadric":
        return -(kernel.eps**2) * (1.0 + x2) ** (-1.5)
    return -2.0 * kernel.eps**2 * np.exp(-x2)


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=2))


@dataclass
class RbfInterpolant:
    """Weights of one operator's entries over shared centers.

    The training data is mean-centered before the kernel solve; the offset
    is restored at evaluation.  Without this, constant-dominated operator
    entries force enormous oscillating weights out of near-flat kernels.
    """

    centers: np.ndarray  # (n_centers, n_params)
    weights: np.ndarray  # (n_entries, n_centers)
    kernel: RbfKernel
    offset: np.ndarray = None  # (n_entries,) training mean
    name: str = ""
    condition: float = 0.0

    def __post_init__(self):
        if self.offset is None:
            self.offset = np.zeros(self.weights.shape[0])

    def evaluate(self, p_hat) -> np.ndarray:
        p_hat = np.asarray(p_hat, dtype=float)
        delta = np.linalg.norm(self.centers - p_hat[None, :], axis=1)
        return self.offset + self.weights @ kernel_eval(self.kernel, delta)

    def gradient(self, p_hat) -> np.ndarray:
        """(n_entries, n_params) derivative of every entry at p_hat."""
        p_hat = np.asarray(p_hat, dtype=float)
        diff = p_hat[None, :] - self.centers  # (n_centers, n_params)
        delta = np.linalg.norm(diff, axis=1)
        dgamma = kernel_slope_over_distance(self.kernel, delta)[:, None] * diff
        return self.weights @ dgamma


def fit_weights(values: np.ndarray, centers: np.ndarray, kernel: RbfKernel, name: str = "") -> RbfInterpolant:
    """Solve the kernel system for the weight matrix of one operator.

    `values` holds one column per center.  A single factorization of the
    symmetric kernel matrix serves all entry rows; two refinement passes
    keep the interpolation property at round-off.  Conditioning above 1e12
    warns with shape-parameter guidance; a singular matrix raises.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    n_centers = centers.shape[0]
    if values.shape[1] != n_centers:
        raise ValueError("one value column per center required")
    d = _pairwise_distances(centers, centers)
    if n_centers > 1 and np.min(d[~np.eye(n_centers, dtype=bool)]) == 0.0:
        raise ValueError("centers must be pairwise distinct")
    gamma = kernel_eval(kernel, d)
    cond = float(np.linalg.cond(gamma))
    if not np.isfinite(cond):
        raise IllConditionedError(
            f"kernel matrix is singular for eps={kernel.eps:.4g}; increase eps"
        )
    if cond > 1e12:
        warnings.warn(
            f"kernel matrix condition {cond:.3g} exceeds 1e12 for eps={kernel.eps:.4g}; "
            "weights may be inaccurate (a larger eps sharpens the kernel)",
            RuntimeWarning,
            stacklevel=2,
        )
    offset = np.mean(values, axis=1)
    deviations = values - offset[:, None]
    try:
        lu, piv = sla.lu_factor(gamma)
        weights = sla.lu_solve((lu, piv), deviations.T).T
        for _ in range(2):
            residual = deviations - weights @ gamma
            weights += sla.lu_solve((lu, piv), residual.T).T
    except sla.LinAlgError as exc:
        raise IllConditionedError(f"kernel system solve failed: {exc}") from exc
    return RbfInterpolant(
        centers=centers, weights=weights, kernel=kernel, offset=offset, name=name,
        condition=cond,
    )


@dataclass
class PromModel:
    """Per-operator interpolants sharing one set of training centers."""

    centers: np.ndarray
    interpolants: dict  # name -> RbfInterpolant
    n: int
    m: int

    def __post_init__(self):
        missing = set(OPERATOR_NAMES) - set(self.interpolants)
        if missing:
            raise ValueError(f"missing interpolants for {sorted(missing)}")


@dataclass
class ValidationReport:
    """Shape-parameter sweep: per-operator error curves and the selected eps."""

    eps_grid: np.ndarray
    curves: dict  # name -> errors over the grid
    selected: dict  # name -> eps
    kernel_kind: str
    metric: str = "verbatim"


def operator_vectors(ops: RomOperators) -> dict:
    """Flatten one ROM into the per-operator entry vectors used for fitting."""
    return {
        "k1": ops.k1_diag.copy(),
        "k2": ops.tensors.k2_unique.copy(),
        "k3": ops.tensors.k3_unique.copy(),
        "v": ops.basis.ravel(order="C").copy(),
        "alpha": np.array([ops.alpha]),
        "beta": np.array([ops.beta]),
    }


def default_eps_grid(lo: float = 1e-2, hi: float = 10.0, count: int = 50) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), count)


def fit_prom_interpolants(
    rom_list: list[RomOperators],
    centers: np.ndarray,
    kernel_kind: str,
    eps_by_operator: dict,
) -> PromModel:
    """Final per-operator weight fit at the chosen shape parameters."""
    n, m = rom_list[0].n, rom_list[0].m
    tables = {name: np.column_stack([operator_vectors(r)[name] for r in rom_list])
              for name in OPERATOR_NAMES}
    interpolants = {
        name: fit_weights(
            tables[name], centers, RbfKernel(kernel_kind, eps_by_operator[name]), name
        )
        for name in OPERATOR_NAMES
    }
    return PromModel(centers=np.asarray(centers, dtype=float), interpolants=interpolants, n=n, m=m)


def validate_eps(
    train_roms: list[RomOperators],
    train_centers: np.ndarray,
    val_roms: list[RomOperators],
    val_centers: np.ndarray,
    kernel_kind: str = "inverse_multiquadric",
    eps_grid=None,
    metric: str = "verbatim",
    condition_limit: float = 1e12,
) -> ValidationReport:
    """Sweep the shape parameter per operator against a validation database.

    The error measure aggregates, over validation points, the norm of the
    interpolation defect relative to the exact operator norm: the default
    form sums the unsquared ratios under a square root; "rms" uses the root
    mean of squared ratios instead.  The argmin is selected independently
    per operator (first grid point on ties).  Grid values whose kernel
    matrix conditioning exceeds `condition_limit` produce numerically
    meaningless weights and are excluded from selection.
    """
    if eps_grid is None:
        eps_grid = default_eps_grid()
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0:
        raise ValueError("shape-parameter grid is empty")
    if len(val_roms) == 0:
        raise ValueError("validation set is empty")
    if metric not in ("verbatim", "rms"):
        raise ValueError("metric must be 'verbatim' or 'rms'")

    train_tables = {
        name: np.column_stack([operator_vectors(r)[name] for r in train_roms])
        for name in OPERATOR_NAMES
    }
    val_tables = {
        name: np.column_stack([operator_vectors(r)[name] for r in val_roms])
        for name in OPERATOR_NAMES
    }
    val_centers = np.atleast_2d(np.asarray(val_centers, dtype=float))

    curves = {}
    selected = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # sweep hits bad eps values
        for name in OPERATOR_NAMES:
            errors = np.empty(eps_grid.size)
            for k, eps in enumerate(eps_grid):
                try:
                    interp = fit_weights(
                        train_tables[name], train_centers, RbfKernel(kernel_kind, eps), name
                    )
                except IllConditionedError:
                    errors[k] = np.inf
                    continue
                if interp.condition > condition_limit:
                    errors[k] = np.inf
                    continue
                ratios = []
                for i in range(val_centers.shape[0]):
                    exact = val_tables[name][:, i]
                    approx = interp.evaluate(val_centers[i])
                    ratios.append(
                        np.linalg.norm(exact - approx) / max(np.linalg.norm(exact), 1e-300)
                    )
                ratios = np.asarray(ratios)
                if metric == "verbatim":
                    errors[k] = np.sqrt(np.sum(ratios))
                else:
                    errors[k] = np.sqrt(np.mean(ratios**2))
            curves[name] = errors
            if not np.any(np.isfinite(errors)):
                raise IllConditionedError(
                    f"no usable shape parameter for operator {name!r}: every grid "
                    "value left the kernel matrix singular or ill conditioned"
                )
            selected[name] = float(eps_grid[int(np.argmin(errors))])
    return ValidationReport(
        eps_grid=eps_grid, curves=curves, selected=selected, kernel_kind=kernel_kind,
        metric=metric,
    )


def evaluate_prom(
    model: PromModel,
    p_hat,
    structure_check: str = "error",
) -> RomOperators:
    """Interpolate all operators at a parameter point and reassemble the ROM.

    The reduced damping is rebuilt from the interpolated Rayleigh
    coefficients and stiffness diagonal rather than interpolated entrywise.
    Positivity of the stiffness diagonal and damping coefficients is
    checked after interpolation; `structure_check` picks error/warn
    behaviour.  Points outside the unit hypercube only warn (extrapolation).
    """
    p_hat = np.asarray(p_hat, dtype=float)
    if np.any(p_hat < -1e-12) or np.any(p_hat > 1.0 + 1e-12):
        warnings.warn(
            f"evaluating outside the unit hypercube at {p_hat}: extrapolation",
            RuntimeWarning,
            stacklevel=2,
        )
    k1_diag = model.interpolants["k1"].evaluate(p_hat)
    alpha = float(model.interpolants["alpha"].evaluate(p_hat)[0])
    beta = float(model.interpolants["beta"].evaluate(p_hat)[0])

    problems = []
    if np.any(k1_diag <= 0.0):
        problems.append(f"non-positive stiffness diagonal entries at {p_hat}")
    if alpha <= 0.0:
        problems.append(f"non-positive mass damping coefficient {alpha:.4g}")
    if beta <= 0.0:
        problems.append(f"non-positive stiffness damping coefficient {beta:.4g}")
    if problems:
        message = "interpolated model lost positivity: " + "; ".join(problems)
        if structure_check == "error":
            raise StructureViolationError(message, details=problems)
        warnings.warn(message, RuntimeWarning, stacklevel=2)

    basis = model.interpolants["v"].evaluate(p_hat).reshape(model.n, model.m)
    tensors = IdentifiedTensors(
        m=model.m,
        k2_unique=model.interpolants["k2"].evaluate(p_hat),
        k3_unique=model.interpolants["k3"].evaluate(p_hat),
        method="interpolated",
    )
    # values pass through as interpolated, including any flagged violations
    return RomOperators(
        basis=basis,
        k1_diag=k1_diag,
        tensors=tensors,
        alpha=alpha,
        beta=beta,
        p_hat=p_hat.copy(),
    )


def prom_gradient(model: PromModel, p_hat) -> dict:
    """Analytic d(entries)/d(p_hat) for every operator at one point."""
    p_hat = np.asarray(p_hat, dtype=float)
    return {name: interp.gradient(p_hat) for name, interp in model.interpolants.items()}
