"""Non-intrusive identification of reduced nonlinear stiffness tensors.

Two routes with the same output contract:

* tangent-based: project the black-box tangent stiffness at imposed
  displacements along single and paired basis directions (2m + m(m-1)/2
  evaluations) and extract quadratic/cubic slices in closed form;
* force-based: probe the black-box internal force along single, paired and
  tripled directions (2m + 2*C(m,2) + C(m,3) evaluations).  The reduced
  probe set is square only because the tensors are symmetric in all
  indices (they derive from an elastic potential); the extraction resolves
  shared unknowns across probe pairs in a fixed order and records every
  redundant equation as a consistency residual.

Both routes return fully symmetric tensors in unique-entry storage.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .sym_tensor import (
    full_from_unique,
    n_unique,
    sorted_multi_indices,
    symmetrize_full,
    unique_from_full,
)

__all__ = [
    "IdentifiedTensors",
    "plan_scales",
    "build_eed_plan",
    "build_ed_plan",
    "identify_eed",
    "identify_ed",
    "symmetrize_and_check",
]


@dataclass
class IdentifiedTensors:
    """Quadratic/cubic reduced stiffness tensors in unique-entry storage."""

    m: int
    k2_unique: np.ndarray  # C(m+2, 3) entries, sorted index triples
    k3_unique: np.ndarray  # C(m+3, 4) entries, sorted index quadruples
    method: str  # "eed" | "ed" | "direct" | "interpolated" | "zero"
    scales: np.ndarray | None = None
    asymmetry: float = 0.0
    eval_count: int = 0

    def __post_init__(self):
        self.k2_unique = np.asarray(self.k2_unique, dtype=float)
        self.k3_unique = np.asarray(self.k3_unique, dtype=float)
        if self.k2_unique.size != n_unique(self.m, 3):
            raise ValueError("quadratic tensor has wrong unique-entry count")
        if self.k3_unique.size != n_unique(self.m, 4):
            raise ValueError("cubic tensor has wrong unique-entry count")

    def k2_full(self) -> np.ndarray:
        return full_from_unique(self.k2_unique, self.m, 3)

    def k3_full(self) -> np.ndarray:
        return full_from_unique(self.k3_unique, self.m, 4)

    @classmethod
    def zeros(cls, m: int, method: str = "zero") -> "IdentifiedTensors":
        return cls(
            m=m,
            k2_unique=np.zeros(n_unique(m, 3)),
            k3_unique=np.zeros(n_unique(m, 4)),
            method=method,
        )


def plan_scales(basis: np.ndarray, assembly, target_thickness: float) -> np.ndarray:
    """Per-direction probe scales reaching `target_thickness` * t transversally."""
    if target_thickness <= 0.0:
        raise ValueError("probe target must be positive")
    t = assembly.spec.thickness
    w = np.abs(basis[assembly.transverse_mask])
    wmax = w.max(axis=0)
    if np.any(wmax == 0.0):
        raise ValueError("a basis column has no transverse content")
    return target_thickness * t / wmax


def _pair_scale(scales, idx) -> float:
    return float(np.min(scales[list(idx)]))


def build_eed_plan(m: int, scales) -> list[tuple]:
    """Probe labels/coordinates for tangent-based identification."""
    scales = np.asarray(scales, dtype=float)
    plan = []
    for i in range(m):
        for sign in (+1.0, -1.0):
            eta = np.zeros(m)
            eta[i] = sign * scales[i]
            plan.append((("single", i, sign), eta))
    for i, j in combinations(range(m), 2):
        s = _pair_scale(scales, (i, j))
        eta = np.zeros(m)
        eta[i] = s
        eta[j] = s
        plan.append((("pair", i, j), eta))
    return plan


def build_ed_plan(m: int, scales) -> list[tuple]:
    """Probe labels/coordinates for force-based identification."""
    scales = np.asarray(scales, dtype=float)
    plan = []
    for i in range(m):
        for sign in (+1.0, -1.0):
            eta = np.zeros(m)
            eta[i] = sign * scales[i]
            plan.append((("single", i, sign), eta))
    for i, j in combinations(range(m), 2):
        s = _pair_scale(scales, (i, j))
        for sign in (+1.0, -1.0):
            eta = np.zeros(m)
            eta[i] = s
            eta[j] = sign * s
            plan.append((("pair", i, j, sign), eta))
    for i, j, k in combinations(range(m), 3):
        s = _pair_scale(scales, (i, j, k))
        eta = np.zeros(m)
        eta[[i, j, k]] = s
        plan.append((("triple", i, j, k), eta))
    return plan


def identify_eed(tangent_fn, basis: np.ndarray, scales, k1_reduced) -> IdentifiedTensors:
    """Identify the nonlinear tensors from black-box tangent evaluations.

    `tangent_fn` maps a full-order displacement vector to the tangent
    stiffness matrix.  Exactly 2m + m(m-1)/2 evaluations are performed.
    """
    basis = np.asarray(basis, dtype=float)
    scales = np.asarray(scales, dtype=float)
    k1_reduced = np.asarray(k1_reduced, dtype=float)
    m = basis.shape[1]
    if scales.shape != (m,) or k1_reduced.shape != (m, m):
        raise ValueError("scales / reduced stiffness do not match the basis width")
    plan = build_eed_plan(m, scales)

    reduced = {}
    for label, eta in plan:
        kt = tangent_fn(basis @ eta)
        if not np.all(np.isfinite(kt)):
            raise ValueError(f"non-finite tangent evaluation at probe {label}")
        reduced[label] = basis.T @ kt @ basis

    k2_raw = np.zeros((m, m, m))
    k3_raw = np.zeros((m, m, m, m))
    for i in range(m):
        a_p = reduced[("single", i, +1.0)]
        a_m = reduced[("single", i, -1.0)]
        k2_raw[:, :, i] = (a_p - a_m) / (4.0 * scales[i])
        k3_raw[:, :, i, i] = (a_p + a_m - 2.0 * k1_reduced) / (6.0 * scales[i] ** 2)
    for i, j in combinations(range(m), 2):
        s = _pair_scale(scales, (i, j))
        b = reduced[("pair", i, j)]
        cross = (
            b
            - k1_reduced
            - 2.0 * s * (k2_raw[:, :, i] + k2_raw[:, :, j])
            - 3.0 * s**2 * (k3_raw[:, :, i, i] + k3_raw[:, :, j, j])
        ) / (6.0 * s**2)
        k3_raw[:, :, i, j] = cross
        k3_raw[:, :, j, i] = cross

    k2u, k3u, asym = symmetrize_and_check(k2_raw, k3_raw)
    return IdentifiedTensors(
        m=m,
        k2_unique=k2u,
        k3_unique=k3u,
        method="eed",
        scales=scales,
        asymmetry=asym,
        eval_count=len(plan),
    )


class _MultisetStore:
    """Sorted-index value store that tracks redundant (consistency) writes."""

    def __init__(self):
        self.values = {}
        self.deviations = []

    def put(self, key, value):
        key = tuple(sorted(key))
        if key in self.values:
            self.deviations.append(abs(self.values[key] - value))
        else:
            self.values[key] = value

    def get(self, key) -> float:
        return self.values[tuple(sorted(key))]

    def to_array(self, m: int, order: int) -> np.ndarray:
        idx = sorted_multi_indices(m, order)
        return np.array([self.values[tuple(row)] for row in idx])

    def max_deviation(self) -> float:
        if not self.deviations:
            return 0.0
        scale = max(abs(v) for v in self.values.values())
        return max(self.deviations) / scale if scale > 0 else max(self.deviations)


def identify_ed(force_fn, basis: np.ndarray, scales, k1_reduced) -> IdentifiedTensors:
    """Identify the nonlinear tensors from black-box internal-force evaluations.

    `force_fn` maps a full-order displacement vector to the internal force.
    Exactly 2m + 2*C(m,2) + C(m,3) evaluations are performed; the reduced
    pair probes rely on full index symmetry of the tensors.
    """
    basis = np.asarray(basis, dtype=float)
    scales = np.asarray(scales, dtype=float)
    k1_reduced = np.asarray(k1_reduced, dtype=float)
    m = basis.shape[1]
    if scales.shape != (m,) or k1_reduced.shape != (m, m):
        raise ValueError("scales / reduced stiffness do not match the basis width")
    plan = build_ed_plan(m, scales)

    probes = {}
    for label, eta in plan:
        f = force_fn(basis @ eta)
        if not np.all(np.isfinite(f)):
            raise ValueError(f"non-finite force evaluation at probe {label}")
        probes[label] = basis.T @ f

    k2 = _MultisetStore()
    k3 = _MultisetStore()

    # singles: diagonal-direction slices for every output component
    for i in range(m):
        even = 0.5 * (probes[("single", i, +1.0)] + probes[("single", i, -1.0)])
        odd = 0.5 * (probes[("single", i, +1.0)] - probes[("single", i, -1.0)])
        s = scales[i]
        for a in range(m):
            k2.put((a, i, i), even[a] / s**2)
            k3.put((a, i, i, i), (odd[a] - s * k1_reduced[a, i]) / s**3)

    # pairs: even part gives one-repeat cubic entries, odd part couples the
    # three-distinct quadratic entry with the remaining cubic entry
    combos = {}
    for i, j in combinations(range(m), 2):
        s = _pair_scale(scales, (i, j))
        p1 = probes[("pair", i, j, +1.0)]
        p2 = probes[("pair", i, j, -1.0)]
        even = 0.5 * (p1 + p2)
        odd = 0.5 * (p1 - p2)
        for a in range(m):
            val = (
                even[a]
                - s * k1_reduced[a, i]
                - s**2 * (k2.get((a, i, i)) + k2.get((a, j, j)))
                - s**3 * k3.get((a, i, i, i))
            ) / (3.0 * s**3)
            k3.put((a, i, j, j), val)
            combo = odd[a] - s * k1_reduced[a, j] - s**3 * k3.get((a, j, j, j))
            if a == i:
                k3.put((i, i, i, j), (combo - 2.0 * s**2 * k2.get((i, i, j))) / (3.0 * s**3))
            elif a == j:
                k3.put((i, i, j, j), (combo - 2.0 * s**2 * k2.get((i, j, j))) / (3.0 * s**3))
            else:
                combos[(a, i, j)] = (combo, s)

    # resolve all-distinct index triples using the shared-unknown structure
    for i, j, k in combinations(range(m), 3):
        combo_i, s_jk = combos[(i, j, k)]
        x = (combo_i - 3.0 * s_jk**3 * k3.get((i, j, j, k))) / (2.0 * s_jk**2)
        k2.put((i, j, k), x)
        combo_k, s_ij = combos[(k, i, j)]
        k3.put((i, i, j, k), (combo_k - 2.0 * s_ij**2 * x) / (3.0 * s_ij**3))
        combo_j, s_ik = combos[(j, i, k)]
        k3.put((i, i, j, k), (combo_j - 2.0 * s_ik**2 * x) / (3.0 * s_ik**3))

    # triples: four-distinct cubic entries (plus consistency for the rest)
    for i, j, k in combinations(range(m), 3):
        s = _pair_scale(scales, (i, j, k))
        t_probe = probes[("triple", i, j, k)]
        for a in range(m):
            known = s * (k1_reduced[a, i] + k1_reduced[a, j] + k1_reduced[a, k])
            known += s**2 * (
                k2.get((a, i, i))
                + k2.get((a, j, j))
                + k2.get((a, k, k))
                + 2.0 * (k2.get((a, i, j)) + k2.get((a, i, k)) + k2.get((a, j, k)))
            )
            known += s**3 * (
                k3.get((a, i, i, i))
                + k3.get((a, j, j, j))
                + k3.get((a, k, k, k))
                + 3.0
                * (
                    k3.get((a, i, i, j))
                    + k3.get((a, i, j, j))
                    + k3.get((a, i, i, k))
                    + k3.get((a, i, k, k))
                    + k3.get((a, j, j, k))
                    + k3.get((a, j, k, k))
                )
            )
            k3.put((a, i, j, k), (t_probe[a] - known) / (6.0 * s**3))

    asym = max(k2.max_deviation(), k3.max_deviation())
    return IdentifiedTensors(
        m=m,
        k2_unique=k2.to_array(m, 3),
        k3_unique=k3.to_array(m, 4),
        method="ed",
        scales=scales,
        asymmetry=asym,
        eval_count=len(plan),
    )


def symmetrize_and_check(k2_raw: np.ndarray, k3_raw: np.ndarray):
    """Average raw tensors over all index permutations.

    Returns unique-entry vectors plus the relative norm of the
    pre-symmetrization defect (the identification quality signal).
    """
    k2_sym, asym2 = symmetrize_full(np.asarray(k2_raw, dtype=float))
    k3_sym, asym3 = symmetrize_full(np.asarray(k3_raw, dtype=float))
    return unique_from_full(k2_sym), unique_from_full(k3_sym), max(asym2, asym3)
