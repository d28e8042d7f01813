"""End-to-end orchestration: database build, surrogate fit, benchmark, export.

The build walks the construction sequence sample by sample: LHS sampling,
per-sample modes and companions, two-level POD global basis, per-sample
mass orthogonalization, nearest-neighbour MAC reordering, non-intrusive
tensor identification and Rayleigh coefficients.  Everything downstream of
the FE kernel touches it only through black-box evaluations.
"""

from __future__ import annotations

import json
import time as _time
from pathlib import Path

import numpy as np

from .beam_fe import BeamSpec, CurvedBeamAssembly, GeometryParams, PulseLoad, uniform_transverse_pattern
from .config import RunConfig
from .database import MODEL_KINDS, BenchmarkReport, RomDatabase
from .errors import PromforgeError, StructureViolationError
from .global_basis import (
    LocalBasis,
    assemble_snapshots,
    build_global_rb,
    mass_orthogonalize,
    match_to_reference,
    reorder_local_bases,
)
from .modes import CompanionSet, compute_dual_modes, compute_smd, mpf, select_smds, select_vms, solve_vms
from .newmark import ImplicitModel, newmark_integrate
from .params import denormalize, lhs_sample
from .rbf import evaluate_prom, fit_prom_interpolants, operator_vectors, validate_eps
from .rom import RomOperators, linearize, rayleigh_params, rom_model
from .tensor_id import identify_ed, identify_eed, n_unique, plan_scales

__all__ = [
    "make_assembly",
    "build_database",
    "build_companion_database",
    "fit_prom",
    "run_benchmark",
    "export_histories",
    "resolve_monitors",
    "dominant_period",
]


def make_assembly(cfg: RunConfig, p_physical) -> CurvedBeamAssembly:
    fe = cfg.fe
    spec = BeamSpec(
        length=fe.length,
        width=fe.width,
        thickness=fe.thickness,
        youngs_modulus=fe.youngs_modulus,
        density=fe.density,
    )
    return CurvedBeamAssembly(
        GeometryParams(float(p_physical[0]), float(p_physical[1])), fe.n_elements, spec
    )


def _identify(cfg: RunConfig, assembly, basis, k1_reduced):
    scales = plan_scales(basis, assembly, cfg.identification.probe_target)
    if cfg.identification.method == "eed":
        return identify_eed(assembly.tangent_stiffness, basis, scales, k1_reduced)
    return identify_ed(assembly.internal_force, basis, scales, k1_reduced)


def _sample_ingredients(cfg: RunConfig, assembly, counters):
    """Modes and companion vectors for one sample."""
    mass = assembly.mass_matrix()
    stiffness = assembly.linear_stiffness()
    n_modes = min(cfg.basis.n_modes, assembly.n)
    all_modes = solve_vms(mass, stiffness, n_modes)
    pattern = uniform_transverse_pattern(assembly)
    participation = mpf(all_modes, pattern)
    selected = select_vms(all_modes, participation, cfg.basis.f_max, cfg.basis.mpf_tol)

    if cfg.basis.companion == "smd":
        selected_mpf = mpf(selected, pattern)
        max_pairs = selected.n_modes * (selected.n_modes + 1) // 2
        pairs = select_smds(selected_mpf, min(cfg.basis.k_pairs, max_pairs))
        thetas = np.column_stack(
            [
                compute_smd(assembly, selected.shapes[:, i], selected.shapes[:, j], cfg.basis.smd_step)
                for i, j in pairs
            ]
        )
        companions = CompanionSet(vectors=thetas, kind="smd", provenance=pairs)
        counters["smd_tangent_evaluations"] += 2 * len(pairs)
    else:
        companions = compute_dual_modes(
            assembly,
            selected,
            scale_thickness=cfg.basis.dual_scale,
            energy_threshold=cfg.basis.dual_pod_energy,
            include_pairs=cfg.basis.dual_pairs,
        )
        n_directions = selected.n_modes
        if cfg.basis.dual_pairs:
            n_directions += selected.n_modes * (selected.n_modes - 1) // 2
        counters["dual_static_solves"] += 2 * n_directions

    fe_omegas = all_modes.omegas[:2]
    return mass, stiffness, selected, companions, fe_omegas


def build_database(cfg: RunConfig, role: str = "train") -> RomDatabase:
    """Construct the ROM database for the given sample role."""
    seeds = {
        "train": cfg.sampling.seed_train,
        "validation": cfg.sampling.seed_validation,
        "test": cfg.sampling.seed_test,
    }
    counts = {
        "train": cfg.sampling.n_train,
        "validation": cfg.sampling.n_validation,
        "test": cfg.sampling.n_test,
    }
    if role not in seeds:
        raise ValueError(f"unknown sample role {role!r}")
    bounds = cfg.bounds()
    samples = lhs_sample(counts[role], bounds.n_params, seeds[role], role=role)

    counters = {
        "smd_tangent_evaluations": 0,
        "dual_static_solves": 0,
        "identification_evaluations": [],
        "k1_offdiag_leakage": [],
    }

    assemblies, masses, stiffnesses, mode_sets, companion_sets, fe_omega_pairs = (
        [], [], [], [], [], []
    )
    for i in range(len(samples)):
        p_phys = denormalize(samples.points[i], bounds)
        try:
            assembly = make_assembly(cfg, p_phys)
            mass, stiffness, selected, companions, fe_omegas = _sample_ingredients(
                cfg, assembly, counters
            )
        except PromforgeError as exc:
            raise type(exc)(f"sample {i} (p={p_phys}): {exc}") from exc
        assemblies.append(assembly)
        masses.append(mass)
        stiffnesses.append(stiffness)
        mode_sets.append(selected)
        companion_sets.append(companions)
        fe_omega_pairs.append(fe_omegas)

    snapshots = assemble_snapshots(mode_sets, companion_sets)
    global_rb = build_global_rb(snapshots, cfg.pod.energy_modes, cfg.pod.energy_companions)

    local_bases = [
        mass_orthogonalize(global_rb.vectors, masses[i], stiffnesses[i])
        for i in range(len(samples))
    ]
    ordered = reorder_local_bases(local_bases, samples.points, masses)
    start_index = next(i for i, lb in enumerate(ordered) if lb.reference == -1)

    roms = []
    for i, lb in enumerate(ordered):
        k1_red = lb.vectors.T @ stiffnesses[i] @ lb.vectors
        leakage = np.max(np.abs(k1_red - np.diag(np.diag(k1_red)))) / np.max(
            np.abs(np.diag(k1_red))
        )
        counters["k1_offdiag_leakage"].append(float(leakage))
        tensors = _identify(cfg, assemblies[i], lb.vectors, k1_red)
        counters["identification_evaluations"].append(tensors.eval_count)
        alpha, beta = rayleigh_params(
            fe_omega_pairs[i][0], fe_omega_pairs[i][1], cfg.damping.zeta
        )
        roms.append(
            RomOperators(
                basis=lb.vectors,
                k1_diag=lb.omegas**2,
                tensors=tensors,
                alpha=alpha,
                beta=beta,
                p_hat=samples.points[i].copy(),
            ).validate()
        )

    lineage = {
        "references": np.array([lb.reference for lb in ordered], dtype=np.int64),
        "permutations": np.stack([lb.permutation for lb in ordered]),
        "signs": np.stack([lb.signs for lb in ordered]),
        "macs": np.stack([lb.mac_values for lb in ordered]),
        "start_index": start_index,
    }
    global_info = {
        "m_modes": global_rb.m_modes,
        "m_companions": global_rb.m_companions,
        "energy_modes": global_rb.energy_modes,
        "energy_companions": global_rb.energy_companions,
        "sv_modes": global_rb.singular_values_modes,
        "sv_companions": global_rb.singular_values_companions,
    }
    return RomDatabase(
        role=role,
        config=cfg.to_dict(),
        points=samples.points,
        roms=roms,
        global_vectors=global_rb.vectors,
        global_info=global_info,
        lineage=lineage,
        counters=counters,
    )


def build_companion_database(
    train_db: RomDatabase, cfg: RunConfig, role: str = "validation"
) -> RomDatabase:
    """Build ROMs for fresh samples on the training global basis.

    Validation (and test) operators must live in the same reduced frame as
    the training database to be comparable entry by entry, so each new
    sample reuses the training global basis, is mass-orthogonalized with
    its own matrices, and is column-matched against the nearest training
    sample's basis.
    """
    seeds = {"validation": cfg.sampling.seed_validation, "test": cfg.sampling.seed_test}
    counts = {"validation": cfg.sampling.n_validation, "test": cfg.sampling.n_test}
    if role not in seeds:
        raise ValueError(f"companion role must be validation or test, not {role!r}")
    bounds = cfg.bounds()
    samples = lhs_sample(counts[role], bounds.n_params, seeds[role], role=role)

    counters = {
        "smd_tangent_evaluations": 0,
        "dual_static_solves": 0,
        "identification_evaluations": [],
        "k1_offdiag_leakage": [],
    }
    train_masses = {}

    roms = []
    references, permutations, signs_list, macs = [], [], [], []
    for i in range(len(samples)):
        p_phys = denormalize(samples.points[i], bounds)
        assembly = make_assembly(cfg, p_phys)
        mass = assembly.mass_matrix()
        stiffness = assembly.linear_stiffness()
        local = mass_orthogonalize(train_db.global_vectors, mass, stiffness)

        nearest = int(np.argmin(np.linalg.norm(train_db.points - samples.points[i], axis=1)))
        if nearest not in train_masses:
            train_phys = denormalize(train_db.points[nearest], bounds)
            train_masses[nearest] = make_assembly(cfg, train_phys).mass_matrix()
        ref_rom = train_db.roms[nearest]
        ref = LocalBasis(vectors=ref_rom.basis, omegas=ref_rom.omegas)
        matched = match_to_reference(
            ref, train_masses[nearest], local, candidate_index=i, ref_index=nearest
        )

        k1_red = matched.vectors.T @ stiffness @ matched.vectors
        leakage = np.max(np.abs(k1_red - np.diag(np.diag(k1_red)))) / np.max(
            np.abs(np.diag(k1_red))
        )
        counters["k1_offdiag_leakage"].append(float(leakage))
        tensors = _identify(cfg, assembly, matched.vectors, k1_red)
        counters["identification_evaluations"].append(tensors.eval_count)
        fe_modes = solve_vms(mass, stiffness, 2)
        alpha, beta = rayleigh_params(fe_modes.omegas[0], fe_modes.omegas[1], cfg.damping.zeta)
        roms.append(
            RomOperators(
                basis=matched.vectors,
                k1_diag=matched.omegas**2,
                tensors=tensors,
                alpha=alpha,
                beta=beta,
                p_hat=samples.points[i].copy(),
            ).validate()
        )
        references.append(nearest)
        permutations.append(matched.permutation)
        signs_list.append(matched.signs)
        macs.append(matched.mac_values)

    lineage = {
        "references": np.array(references, dtype=np.int64),
        "permutations": np.stack(permutations),
        "signs": np.stack(signs_list),
        "macs": np.stack(macs),
        "start_index": -1,  # companion sets are matched to training samples
    }
    return RomDatabase(
        role=role,
        config=cfg.to_dict(),
        points=samples.points,
        roms=roms,
        global_vectors=train_db.global_vectors,
        global_info=dict(train_db.global_info),
        lineage=lineage,
        counters=counters,
    )


def fit_prom(train_db: RomDatabase, val_db: RomDatabase, cfg: RunConfig) -> RomDatabase:
    """Select shape parameters on the validation set and attach the surrogate."""
    if train_db.n_samples < 2:
        raise ValueError("at least two training samples are required to fit a surrogate")
    n, m = train_db.n, train_db.m
    expected = {
        "k1": m,
        "k2": n_unique(m, 3),
        "k3": n_unique(m, 4),
        "v": n * m,
        "alpha": 1,
        "beta": 1,
    }
    for rom in train_db.roms + val_db.roms:
        vectors = operator_vectors(rom)
        for name, size in expected.items():
            if vectors[name].size != size:
                raise ValueError(f"operator {name} has {vectors[name].size} entries, expected {size}")

    report = validate_eps(
        train_db.roms,
        train_db.points,
        val_db.roms,
        val_db.points,
        kernel_kind=cfg.interpolation.kernel,
        eps_grid=cfg.eps_grid(),
        metric=cfg.interpolation.error_metric,
        condition_limit=cfg.interpolation.condition_limit,
    )
    prom = fit_prom_interpolants(
        train_db.roms, train_db.points, cfg.interpolation.kernel, report.selected
    )
    train_db.prom = prom
    train_db.validation = report
    return train_db


def resolve_monitors(assembly: CurvedBeamAssembly, monitors):
    """Map monitor names / raw indices to free-dof indices and labels."""
    L = assembly.spec.length
    named = {
        "midspan_w": (L / 2.0, 1),
        "quarter_w": (L / 4.0, 1),
        "quarter_u": (L / 4.0, 0),
    }
    indices, labels = [], []
    for mon in monitors:
        if isinstance(mon, (int, np.integer)):
            if not 0 <= int(mon) < assembly.n:
                raise ValueError(f"monitor index {mon} out of range")
            indices.append(int(mon))
            labels.append(f"dof{int(mon)}")
        elif mon in named:
            x_target, comp = named[mon]
            node = int(np.argmin(np.abs(assembly.nodes_x - x_target)))
            indices.append(assembly.free_index(node, comp))
            labels.append(mon)
        else:
            raise ValueError(f"unknown monitor {mon!r}")
    return np.array(indices, dtype=np.int64), labels


def dominant_period(time, trace, t_start) -> float:
    """Mean spacing of upward zero crossings after t_start (NaN if too few)."""
    mask = time >= t_start
    t, x = np.asarray(time)[mask], np.asarray(trace)[mask]
    if x.size < 4:
        return float("nan")
    x = x - np.mean(x)
    below = x < 0.0
    ups = np.nonzero(below[:-1] & ~below[1:])[0]
    if ups.size < 2:
        return float("nan")
    frac = x[ups] / (x[ups] - x[ups + 1])
    crossings = t[ups] + frac * (t[ups + 1] - t[ups])
    return float(np.mean(np.diff(crossings)))


def _relative_l2(time_model, traces_model, time_ref, traces_ref) -> float:
    """Relative L2 over monitored traces, reference interpolated in time."""
    ref_on_model = np.column_stack(
        [
            np.interp(time_model, time_ref, traces_ref[:, j])
            for j in range(traces_ref.shape[1])
        ]
    )
    return float(
        np.linalg.norm(traces_model - ref_on_model) / np.linalg.norm(ref_on_model)
    )


def run_benchmark(db: RomDatabase, cfg: RunConfig) -> BenchmarkReport:
    """Integrate the five model variants at every test point and compare."""
    if db.prom is None:
        raise ValueError("database carries no fitted surrogate; run the fit step first")
    bounds = cfg.bounds()
    test = lhs_sample(cfg.sampling.n_test, bounds.n_params, cfg.sampling.seed_test, role="test")
    physical = np.stack([denormalize(p, bounds) for p in test.points])

    histories, errors, periods, failures, timings, closest_ids = [], [], [], [], [], []
    for i in range(len(test)):
        p_hat = test.points[i]
        p_phys = physical[i]
        assembly = make_assembly(cfg, p_phys)
        mass = assembly.mass_matrix()
        stiffness = assembly.linear_stiffness()
        mon_idx, mon_labels = resolve_monitors(assembly, cfg.monitors)

        pattern = uniform_transverse_pattern(assembly)
        pulse = PulseLoad(pattern=pattern, amplitude=cfg.load.amplitude, t_pulse=cfg.load.t_pulse)

        fe_modes = solve_vms(mass, stiffness, 2)
        alpha_fe, beta_fe = rayleigh_params(
            fe_modes.omegas[0], fe_modes.omegas[1], cfg.damping.zeta
        )
        damping_full = alpha_fe * mass + beta_fe * stiffness

        surrogate_failure = None
        interp_ops = None
        try:
            interp_ops = evaluate_prom(
                db.prom, p_hat, structure_check=cfg.interpolation.structure_check
            )
        except PromforgeError as exc:
            surrogate_failure = f"{type(exc).__name__}: {exc}"
        closest = int(np.argmin(np.linalg.norm(db.points - p_hat[None, :], axis=1)))
        closest_ids.append(closest)

        dt_hfm = (2.0 * np.pi / fe_modes.omegas[0]) / cfg.integration.hfm_steps_per_period
        # one shared reduced-model step so stored and surrogate models land on
        # the same grid; fall back to the stored neighbour if evaluation failed
        dt_source = interp_ops if interp_ops is not None else db.roms[closest]
        dt_rom = (2.0 * np.pi / np.sqrt(np.min(dt_source.k1_diag))) / cfg.integration.rom_steps_per_period

        def hfm_runner():
            model = ImplicitModel(
                mass=mass,
                damping=damping_full,
                force=assembly.internal_force,
                tangent=assembly.tangent_stiffness,
                load=pulse.at,
            )
            hist = newmark_integrate(
                model, cfg.integration.t_span, dt_hfm,
                gamma=cfg.integration.gamma, beta=cfg.integration.beta, kind="hfm",
            )
            return hist.time, hist.displacement[:, mon_idx]

        def rom_runner(ops):
            def run():
                hist = newmark_integrate(
                    rom_model(ops, pulse.at), cfg.integration.t_span, dt_rom,
                    gamma=cfg.integration.gamma, beta=cfg.integration.beta, kind="rom",
                )
                return hist.time, hist.displacement @ ops.basis[mon_idx, :].T
            return run

        def recomputed_runner():
            local = mass_orthogonalize(db.global_vectors, mass, stiffness)
            k1_red = local.vectors.T @ stiffness @ local.vectors
            tensors = _identify(cfg, assembly, local.vectors, k1_red)
            ops = RomOperators(
                basis=local.vectors,
                k1_diag=local.omegas**2,
                tensors=tensors,
                alpha=alpha_fe,
                beta=beta_fe,
                p_hat=p_hat.copy(),
            )
            return rom_runner(ops)()

        def surrogate_runner(make_ops):
            def run():
                if interp_ops is None:
                    raise StructureViolationError(surrogate_failure)
                return rom_runner(make_ops(interp_ops))()
            return run

        runners = {
            "hfm": hfm_runner,
            "interpolated": surrogate_runner(lambda ops: ops),
            "closest": rom_runner(db.roms[closest]),
            "recomputed": recomputed_runner,
            "linear": surrogate_runner(linearize),
        }

        point_hist, point_err, point_period, point_fail, point_time = {}, {}, {}, {}, {}
        for kind in MODEL_KINDS:
            started = _time.perf_counter()
            try:
                t_axis, traces = runners[kind]()
            except (PromforgeError, np.linalg.LinAlgError, ValueError) as exc:
                point_fail[kind] = f"{type(exc).__name__}: {exc}"
                continue
            point_time[kind] = _time.perf_counter() - started
            point_hist[kind] = {"time": t_axis, "traces": traces}
            point_period[kind] = dominant_period(t_axis, traces[:, 0], cfg.load.t_pulse)
        if "hfm" in point_hist:
            ref = point_hist["hfm"]
            for kind in MODEL_KINDS[1:]:
                if kind in point_hist:
                    point_err[kind] = _relative_l2(
                        point_hist[kind]["time"],
                        point_hist[kind]["traces"],
                        ref["time"],
                        ref["traces"],
                    )

        histories.append(point_hist)
        errors.append(point_err)
        periods.append(point_period)
        failures.append(point_fail)
        timings.append(point_time)

    eps_table = dict(db.validation.selected) if db.validation is not None else {}
    eval_counts = {
        "identification_per_sample": list(db.counters.get("identification_evaluations", [])),
        "smd_tangent_evaluations": db.counters.get("smd_tangent_evaluations", 0),
        "dual_static_solves": db.counters.get("dual_static_solves", 0),
    }
    return BenchmarkReport(
        test_points=test.points,
        physical_points=physical,
        monitors=resolve_monitors(make_assembly(cfg, physical[0]), cfg.monitors)[1],
        histories=histories,
        errors=errors,
        periods=periods,
        failures=failures,
        closest_indices=closest_ids,
        eps_table=eps_table,
        eval_counts=eval_counts,
        timings=timings,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def export_histories(report: BenchmarkReport, out_dir) -> list:
    """Write per-(point, model) CSV traces and a deterministic JSON summary.

    Wall-clock timings, when present on the in-memory report, go to a
    separate timings.json so repeated runs stay byte-identical everywhere
    else.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    header = "time," + ",".join(report.monitors)
    for i, per_point in enumerate(report.histories):
        for kind in MODEL_KINDS:
            if kind not in per_point:
                continue
            hist = per_point[kind]
            path = out / f"point{i:02d}_{kind}.csv"
            lines = [header]
            for k in range(hist["time"].size):
                row = [_fmt(hist["time"][k])] + [_fmt(v) for v in hist["traces"][k]]
                lines.append(",".join(row))
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)

    summary = {
        "model_kinds": list(MODEL_KINDS),
        "monitors": list(report.monitors),
        "test_points": report.test_points.tolist(),
        "physical_points": report.physical_points.tolist(),
        "closest_training_indices": [int(i) for i in report.closest_indices],
        "relative_l2_errors": report.errors,
        "dominant_periods": report.periods,
        "failures": report.failures,
        "eps_table": report.eps_table,
        "evaluation_counts": report.eval_counts,
    }
    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    written.append(summary_path)

    if report.timings:
        timings_path = out / "timings.json"
        timings_path.write_text(
            json.dumps({"seconds": report.timings}, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        written.append(timings_path)
    return written
