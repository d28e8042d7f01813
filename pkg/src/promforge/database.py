"""Self-describing binary containers for databases, surrogates and reports.

One file = fixed magic, a little-endian uint64 manifest length, a canonical
JSON manifest (sorted keys), then the concatenated raw array payload
(little-endian float64/int64, C order).  The manifest carries the format
version, a SHA-256 of the payload, the array table and all scalar
metadata, so files are lossless, versioned and diffable up to the binary
block.  Nothing time-dependent is written: identical inputs give identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptFileError, FormatVersionError
from .rbf import OPERATOR_NAMES, PromModel, RbfInterpolant, RbfKernel, ValidationReport
from .rom import RomOperators
from .tensor_id import IdentifiedTensors

__all__ = [
    "write_container",
    "read_container",
    "RomDatabase",
    "save_database",
    "load_database",
    "BenchmarkReport",
    "save_report",
    "load_report",
]

_MAGIC = b"PROMFRG1"
_FORMAT_VERSION = 1

_DTYPES = {"float64": "<f8", "int64": "<i8"}


def write_container(path, kind: str, meta: dict, arrays: dict) -> None:
    """Write a deterministic container file."""
    table = []
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.kind == "f":
            arr = arr.astype("<f8", copy=False)
            dtype = "float64"
        elif arr.dtype.kind in "iu":
            arr = arr.astype("<i8", copy=False)
            dtype = "int64"
        else:
            raise ValueError(f"unsupported array dtype for {name!r}: {arr.dtype}")
        raw = arr.tobytes()
        table.append(
            {
                "name": name,
                "dtype": dtype,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)

    manifest = {
        "format_version": _FORMAT_VERSION,
        "kind": kind,
        "payload_sha256": hashlib.sha256(bytes(payload)).hexdigest(),
        "arrays": table,
        "meta": meta,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(bytes(payload))


def read_container(path):
    """Read and verify a container; returns (kind, meta, arrays)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(_MAGIC) + 8 or data[: len(_MAGIC)] != _MAGIC:
        raise CorruptFileError(f"{path}: not a promforge container (bad magic)")
    n = int.from_bytes(data[len(_MAGIC) : len(_MAGIC) + 8], "little")
    start = len(_MAGIC) + 8
    if start + n > len(data):
        raise CorruptFileError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(data[start : start + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFileError(f"{path}: unreadable manifest: {exc}") from exc
    if manifest.get("format_version") != _FORMAT_VERSION:
        raise FormatVersionError(
            f"{path}: format version {manifest.get('format_version')} "
            f"not supported (expected {_FORMAT_VERSION})"
        )
    payload = data[start + n :]
    if hashlib.sha256(payload).hexdigest() != manifest["payload_sha256"]:
        raise CorruptFileError(f"{path}: payload checksum mismatch")
    arrays = {}
    for entry in manifest["arrays"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        if hi > len(payload):
            raise CorruptFileError(f"{path}: truncated payload for {entry['name']!r}")
        arr = np.frombuffer(payload[lo:hi], dtype=_DTYPES[entry["dtype"]])
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return manifest["kind"], manifest["meta"], arrays


# ----------------------------------------------------------------------
# ROM database
# ----------------------------------------------------------------------
@dataclass
class RomDatabase:
    """Training (or validation) samples with their reduced models."""

    role: str
    config: dict
    points: np.ndarray  # (n_samples, n_params) normalized
    roms: list  # RomOperators per sample, aligned with points
    global_vectors: np.ndarray  # (n, m) global basis before mass orthogonalization
    global_info: dict  # POD bookkeeping: counts, energy curves, singular values
    lineage: dict  # reordering provenance per sample
    counters: dict  # per-stage black-box evaluation counts
    prom: PromModel | None = None
    validation: ValidationReport | None = None

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.roms[0].n

    @property
    def m(self) -> int:
        return self.roms[0].m


def save_database(db: RomDatabase, path) -> None:
    arrays = {
        "points": db.points,
        "global_vectors": db.global_vectors,
        "energy_modes": db.global_info["energy_modes"],
        "energy_companions": db.global_info["energy_companions"],
        "sv_modes": db.global_info["sv_modes"],
        "sv_companions": db.global_info["sv_companions"],
        "bases": np.stack([r.basis for r in db.roms]),
        "k1_diags": np.stack([r.k1_diag for r in db.roms]),
        "k2s": np.stack([r.tensors.k2_unique for r in db.roms]),
        "k3s": np.stack([r.tensors.k3_unique for r in db.roms]),
        "alphas": np.array([r.alpha for r in db.roms]),
        "betas": np.array([r.beta for r in db.roms]),
        "scales": np.stack(
            [
                r.tensors.scales if r.tensors.scales is not None else np.zeros(r.m)
                for r in db.roms
            ]
        ),
        "asymmetries": np.array([r.tensors.asymmetry for r in db.roms]),
        "eval_counts": np.array([r.tensors.eval_count for r in db.roms], dtype=np.int64),
        "references": np.asarray(db.lineage["references"], dtype=np.int64),
        "permutations": np.asarray(db.lineage["permutations"], dtype=np.int64),
        "signs": np.asarray(db.lineage["signs"], dtype=float),
        "macs": np.asarray(db.lineage["macs"], dtype=float),
    }
    meta = {
        "role": db.role,
        "config": db.config,
        "counters": db.counters,
        "tensor_method": db.roms[0].tensors.method,
        "m_modes": int(db.global_info["m_modes"]),
        "m_companions": int(db.global_info["m_companions"]),
        "start_index": int(db.lineage["start_index"]),
        "has_prom": db.prom is not None,
        "has_validation": db.validation is not None,
    }
    if db.prom is not None:
        arrays["prom_centers"] = db.prom.centers
        for name in OPERATOR_NAMES:
            arrays[f"prom_w_{name}"] = db.prom.interpolants[name].weights
            arrays[f"prom_o_{name}"] = db.prom.interpolants[name].offset
        meta["prom"] = {
            "kernel_kind": db.prom.interpolants["k1"].kernel.kind,
            "eps": {n: db.prom.interpolants[n].kernel.eps for n in OPERATOR_NAMES},
            "condition": {
                n: db.prom.interpolants[n].condition for n in OPERATOR_NAMES
            },
            "n": db.prom.n,
            "m": db.prom.m,
        }
    if db.validation is not None:
        arrays["val_eps_grid"] = db.validation.eps_grid
        for name in OPERATOR_NAMES:
            arrays[f"val_curve_{name}"] = db.validation.curves[name]
        meta["validation"] = {
            "selected": db.validation.selected,
            "kernel_kind": db.validation.kernel_kind,
            "metric": db.validation.metric,
        }
    write_container(path, "rom_database", meta, arrays)


def load_database(path) -> RomDatabase:
    kind, meta, arrays = read_container(path)
    if kind != "rom_database":
        raise CorruptFileError(f"{path}: expected a rom_database container, got {kind!r}")
    n_samples = arrays["points"].shape[0]
    roms = []
    for i in range(n_samples):
        m = arrays["k1_diags"].shape[1]
        tensors = IdentifiedTensors(
            m=m,
            k2_unique=arrays["k2s"][i],
            k3_unique=arrays["k3s"][i],
            method=meta["tensor_method"],
            scales=arrays["scales"][i],
            asymmetry=float(arrays["asymmetries"][i]),
            eval_count=int(arrays["eval_counts"][i]),
        )
        roms.append(
            RomOperators(
                basis=arrays["bases"][i],
                k1_diag=arrays["k1_diags"][i],
                tensors=tensors,
                alpha=float(arrays["alphas"][i]),
                beta=float(arrays["betas"][i]),
                p_hat=arrays["points"][i],
            )
        )
    global_info = {
        "m_modes": meta["m_modes"],
        "m_companions": meta["m_companions"],
        "energy_modes": arrays["energy_modes"],
        "energy_companions": arrays["energy_companions"],
        "sv_modes": arrays["sv_modes"],
        "sv_companions": arrays["sv_companions"],
    }
    lineage = {
        "references": arrays["references"],
        "permutations": arrays["permutations"],
        "signs": arrays["signs"],
        "macs": arrays["macs"],
        "start_index": meta["start_index"],
    }
    prom = None
    if meta.get("has_prom"):
        info = meta["prom"]
        interpolants = {
            name: RbfInterpolant(
                centers=arrays["prom_centers"],
                weights=arrays[f"prom_w_{name}"],
                kernel=RbfKernel(info["kernel_kind"], info["eps"][name]),
                offset=arrays[f"prom_o_{name}"],
                name=name,
                condition=info["condition"][name],
            )
            for name in OPERATOR_NAMES
        }
        prom = PromModel(
            centers=arrays["prom_centers"],
            interpolants=interpolants,
            n=info["n"],
            m=info["m"],
        )
    validation = None
    if meta.get("has_validation"):
        info = meta["validation"]
        validation = ValidationReport(
            eps_grid=arrays["val_eps_grid"],
            curves={name: arrays[f"val_curve_{name}"] for name in OPERATOR_NAMES},
            selected=info["selected"],
            kernel_kind=info["kernel_kind"],
            metric=info["metric"],
        )
    return RomDatabase(
        role=meta["role"],
        config=meta["config"],
        points=arrays["points"],
        roms=roms,
        global_vectors=arrays["global_vectors"],
        global_info=global_info,
        lineage=lineage,
        counters=meta["counters"],
        prom=prom,
        validation=validation,
    )


# ----------------------------------------------------------------------
# benchmark report
# ----------------------------------------------------------------------
MODEL_KINDS = ("hfm", "interpolated", "closest", "recomputed", "linear")


@dataclass
class BenchmarkReport:
    """Five-model comparison at every test point."""

    test_points: np.ndarray  # normalized
    physical_points: np.ndarray
    monitors: list  # monitored-dof labels
    histories: list  # per point: {kind: {"time": arr, "traces": (steps, n_mon)}}
    errors: list  # per point: {kind: float} relative L2 vs the full model
    periods: list  # per point: {kind: float} dominant period estimate
    failures: list  # per point: {kind: str} for models that failed
    closest_indices: list
    eps_table: dict = field(default_factory=dict)
    eval_counts: dict = field(default_factory=dict)
    timings: list = field(default_factory=list)  # per point: {kind: seconds}; not persisted

    @property
    def n_points(self) -> int:
        return self.test_points.shape[0]


def save_report(report: BenchmarkReport, path) -> None:
    """Persist everything except wall-clock timings (kept in a sidecar)."""
    arrays = {
        "test_points": report.test_points,
        "physical_points": report.physical_points,
    }
    for i, per_point in enumerate(report.histories):
        for kind, hist in per_point.items():
            arrays[f"tp{i:03d}_{kind}_time"] = hist["time"]
            arrays[f"tp{i:03d}_{kind}_traces"] = hist["traces"]
    meta = {
        "monitors": list(report.monitors),
        "errors": report.errors,
        "periods": report.periods,
        "failures": report.failures,
        "closest_indices": [int(k) for k in report.closest_indices],
        "eps_table": report.eps_table,
        "eval_counts": report.eval_counts,
        "n_points": int(report.n_points),
        "model_kinds": list(MODEL_KINDS),
    }
    write_container(path, "benchmark_report", meta, arrays)


def load_report(path) -> BenchmarkReport:
    kind, meta, arrays = read_container(path)
    if kind != "benchmark_report":
        raise CorruptFileError(f"{path}: expected a benchmark_report container, got {kind!r}")
    histories = []
    for i in range(meta["n_points"]):
        per_point = {}
        for model_kind in meta["model_kinds"]:
            key = f"tp{i:03d}_{model_kind}_time"
            if key in arrays:
                per_point[model_kind] = {
                    "time": arrays[key],
                    "traces": arrays[f"tp{i:03d}_{model_kind}_traces"],
                }
        histories.append(per_point)
    return BenchmarkReport(
        test_points=arrays["test_points"],
        physical_points=arrays["physical_points"],
        monitors=meta["monitors"],
        histories=histories,
        errors=meta["errors"],
        periods=meta["periods"],
        failures=meta["failures"],
        closest_indices=meta["closest_indices"],
        eps_table=meta["eps_table"],
        eval_counts=meta["eval_counts"],
    )
