import numpy as np
import pytest
import scipy.linalg as sla

from promforge.beam_fe import BeamSpec, CurvedBeamAssembly, GeometryParams
from promforge.direct_tensors import reduced_tensors_direct
from promforge.sym_tensor import (
    force_cubic,
    force_quadratic,
    full_from_unique,
    symmetrize_full,
    tangent_cubic,
    tangent_quadratic,
    unique_from_full,
)
from promforge.tensor_id import (
    IdentifiedTensors,
    build_ed_plan,
    build_eed_plan,
    identify_ed,
    identify_eed,
    plan_scales,
    symmetrize_and_check,
)

SPEC = BeamSpec()


@pytest.fixture(scope="module")
def beam_setup():
    asm = CurvedBeamAssembly(GeometryParams(1.0, 0.3), 32)
    M, K = asm.mass_matrix(), asm.linear_stiffness()
    _, phi = sla.eigh(K, M, subset_by_index=[0, 5])
    V = phi  # mass-normalized columns
    return asm, V, V.T @ K @ V


class SyntheticCubicModel:
    """Polynomial black box with known symmetric tensors (reduced space = full)."""

    def __init__(self, m, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((m, m))
        self.k1 = a @ a.T + m * np.eye(m)
        k2, _ = symmetrize_full(rng.standard_normal((m, m, m)))
        k3, _ = symmetrize_full(rng.standard_normal((m, m, m, m)))
        self.k2u, self.k3u = unique_from_full(k2), unique_from_full(k3)
        self.m = m

    def force(self, q):
        return self.k1 @ q + force_quadratic(self.k2u, q) + force_cubic(self.k3u, q)

    def tangent(self, q):
        return (
            self.k1
            + 2.0 * tangent_quadratic(self.k2u, q)
            + 3.0 * tangent_cubic(self.k3u, q)
        )


# ----------------------------------------------------------------------
# probe plans and counts
# ----------------------------------------------------------------------
def test_eed_plan_counts():
    for m, expected in ((23, 299), (10, 65), (4, 14)):
        plan = build_eed_plan(m, np.ones(m))
        assert len(plan) == expected == 2 * m + m * (m - 1) // 2


def test_ed_plan_counts():
    from math import comb

    for m in (1, 2, 4, 6):
        plan = build_ed_plan(m, np.ones(m))
        assert len(plan) == 2 * m + 2 * comb(m, 2) + comb(m, 3)


def test_eed_evaluation_count_audit():
    # actual black-box calls match the closed-form count
    for m in (10, 23):
        n = m + 5
        rng = np.random.default_rng(m)
        q, _ = np.linalg.qr(rng.standard_normal((n, m)))
        k_lin = np.eye(n)
        calls = {"n": 0}

        def tangent(_q):
            calls["n"] += 1
            return k_lin

        tensors = identify_eed(tangent, q, np.ones(m), q.T @ k_lin @ q)
        assert calls["n"] == 2 * m + m * (m - 1) // 2
        assert tensors.eval_count == calls["n"]


# ----------------------------------------------------------------------
# scales
# ----------------------------------------------------------------------
def test_plan_scales_reaches_target(beam_setup):
    asm, V, _ = beam_setup
    s = plan_scales(V, asm, 1.0)
    for i in range(V.shape[1]):
        w = (s[i] * V[:, i])[asm.transverse_mask]
        np.testing.assert_allclose(np.max(np.abs(w)), SPEC.thickness, rtol=1e-12)


def test_plan_scales_doubling(beam_setup):
    asm, V, _ = beam_setup
    np.testing.assert_allclose(plan_scales(V, asm, 2.0), 2.0 * plan_scales(V, asm, 1.0))


def test_plan_scales_rejects_zero_column(beam_setup):
    asm, V, _ = beam_setup
    bad = V.copy()
    bad[asm.transverse_mask, 0] = 0.0
    with pytest.raises(ValueError):
        plan_scales(bad, asm, 1.0)


# ----------------------------------------------------------------------
# identification on linear black boxes
# ----------------------------------------------------------------------
def test_linear_black_box_gives_zero_tensors():
    n, m = 20, 4
    rng = np.random.default_rng(2)
    a = rng.standard_normal((n, n))
    k_lin = a @ a.T + n * np.eye(n)
    v, _ = np.linalg.qr(rng.standard_normal((n, m)))
    k1r = v.T @ k_lin @ v
    scale = np.linalg.norm(k1r)

    eed = identify_eed(lambda q: k_lin, v, np.ones(m), k1r)
    assert np.max(np.abs(eed.k2_unique)) < 1e-12 * scale
    assert np.max(np.abs(eed.k3_unique)) < 1e-12 * scale

    ed = identify_ed(lambda q: k_lin @ q, v, np.ones(m), k1r)
    assert np.max(np.abs(ed.k2_unique)) < 1e-12 * scale
    assert np.max(np.abs(ed.k3_unique)) < 1e-12 * scale


# ----------------------------------------------------------------------
# identification on synthetic exact-cubic models
# ----------------------------------------------------------------------
@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_ed_recovers_synthetic_tensors(m):
    model = SyntheticCubicModel(m, seed=m)
    v = np.eye(m)
    ed = identify_ed(model.force, v, np.full(m, 0.7), model.k1)
    np.testing.assert_allclose(ed.k2_unique, model.k2u, rtol=1e-9, atol=1e-11)
    np.testing.assert_allclose(ed.k3_unique, model.k3u, rtol=1e-9, atol=1e-11)
    assert ed.asymmetry < 1e-9


@pytest.mark.parametrize("m", [1, 3, 5])
def test_eed_recovers_synthetic_tensors(m):
    model = SyntheticCubicModel(m, seed=10 + m)
    v = np.eye(m)
    eed = identify_eed(model.tangent, v, np.full(m, 0.9), model.k1)
    np.testing.assert_allclose(eed.k2_unique, model.k2u, rtol=1e-9, atol=1e-11)
    np.testing.assert_allclose(eed.k3_unique, model.k3u, rtol=1e-9, atol=1e-11)
    assert eed.asymmetry < 1e-8


# ----------------------------------------------------------------------
# identification on the beam vs the intrusive oracle
# ----------------------------------------------------------------------
def test_eed_matches_direct_projection(beam_setup):
    asm, V, k1r = beam_setup
    k2u, k3u, _ = reduced_tensors_direct(asm, V)
    s = plan_scales(V, asm, 1.0)
    eed = identify_eed(asm.tangent_stiffness, V, s, k1r)
    assert np.linalg.norm(eed.k2_unique - k2u) < 1e-8 * np.linalg.norm(k2u)
    assert np.linalg.norm(eed.k3_unique - k3u) < 1e-8 * np.linalg.norm(k3u)
    assert eed.asymmetry < 1e-8


def test_ed_matches_eed_on_beam(beam_setup):
    asm, V, k1r = beam_setup
    V4 = V[:, :4]
    k1r4 = k1r[:4, :4]
    s = plan_scales(V4, asm, 1.0)
    eed = identify_eed(asm.tangent_stiffness, V4, s, k1r4)
    ed = identify_ed(asm.internal_force, V4, s, k1r4)
    assert np.linalg.norm(ed.k2_unique - eed.k2_unique) < 1e-8 * np.linalg.norm(eed.k2_unique)
    assert np.linalg.norm(ed.k3_unique - eed.k3_unique) < 1e-8 * np.linalg.norm(eed.k3_unique)


def test_single_mode_ed_closed_form(beam_setup):
    asm, V, k1r = beam_setup
    v1 = V[:, :1]
    s = plan_scales(v1, asm, 1.0)
    ed = identify_ed(asm.internal_force, v1, s, k1r[:1, :1])
    assert ed.eval_count == 2
    k2u, k3u, _ = reduced_tensors_direct(asm, v1)
    np.testing.assert_allclose(ed.k2_unique, k2u, rtol=1e-8)
    np.testing.assert_allclose(ed.k3_unique, k3u, rtol=1e-8)


def test_probe_scale_invariance(beam_setup):
    asm, V, k1r = beam_setup
    V4, k1r4 = V[:, :4], k1r[:4, :4]
    ref = None
    for target in (0.5, 1.0, 2.0, 4.0):
        s = plan_scales(V4, asm, target)
        eed = identify_eed(asm.tangent_stiffness, V4, s, k1r4)
        if ref is None:
            ref = eed
        else:
            assert np.linalg.norm(eed.k2_unique - ref.k2_unique) < 1e-8 * np.linalg.norm(
                ref.k2_unique
            )
            assert np.linalg.norm(eed.k3_unique - ref.k3_unique) < 1e-8 * np.linalg.norm(
                ref.k3_unique
            )


def test_identified_tensors_reproduce_black_box_force(beam_setup):
    asm, V, k1r = beam_setup
    s = plan_scales(V, asm, 1.0)
    eed = identify_eed(asm.tangent_stiffness, V, s, k1r)
    rng = np.random.default_rng(7)
    for _ in range(20):
        eta = rng.standard_normal(V.shape[1]) * s
        f_model = k1r @ eta + force_quadratic(eed.k2_unique, eta) + force_cubic(
            eed.k3_unique, eta
        )
        f_black = V.T @ asm.internal_force(V @ eta)
        assert np.linalg.norm(f_model - f_black) < 1e-8 * np.linalg.norm(f_black)


# ----------------------------------------------------------------------
# symmetrization
# ----------------------------------------------------------------------
def test_symmetrize_and_check_clean_input():
    rng = np.random.default_rng(9)
    k2, _ = symmetrize_full(rng.standard_normal((3, 3, 3)))
    k3, _ = symmetrize_full(rng.standard_normal((3, 3, 3, 3)))
    k2u, k3u, asym = symmetrize_and_check(k2, k3)
    assert asym < 1e-14
    np.testing.assert_allclose(full_from_unique(k2u, 3, 3), k2, atol=1e-14)


def test_symmetrize_and_check_perturbation_scales():
    rng = np.random.default_rng(10)
    k2, _ = symmetrize_full(rng.standard_normal((3, 3, 3)))
    k3 = np.zeros((3, 3, 3, 3))
    bump = k2.copy()
    bump[0, 1, 2] += 1e-3
    _, _, asym_small = symmetrize_and_check(bump, k3)
    bump[0, 1, 2] += 1e-3
    _, _, asym_large = symmetrize_and_check(bump, k3)
    assert asym_large == pytest.approx(2.0 * asym_small, rel=1e-3)


def test_identified_tensors_validate_counts():
    with pytest.raises(ValueError):
        IdentifiedTensors(m=3, k2_unique=np.zeros(5), k3_unique=np.zeros(15), method="ed")
    z = IdentifiedTensors.zeros(4)
    assert z.k2_unique.size == 20
    assert z.k3_unique.size == 35
