"""Pipeline orchestration: composable subcommands over a shared work dir.

Stages read declared inputs and write declared outputs only; every JSON
artifact carries version, config_hash, and seed, and each stage persists its
fully-resolved config as <stage>.config.json (the stamp for CSV artifacts).
Reruns with identical config and inputs are byte-identical.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import copy
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .channels import CHANNELS, ELECTRODE_COORDS
from .classify import TASKS, CohortDataset, cross_validate
from .cpd import CpdOptions, cpd_als, cpd_gn
from .edf import read_edf_file, read_manifest, select_channels, write_edf
from .errors import (
    ArgumentError,
    ConfigError,
    IngestError,
    NumericalError,
    ParseError,
)
from .preprocess import (
    FREQ_GRID,
    EpochSpectrum,
    PibVector,
    bandpass,
    build_tensor,
    epoch_and_reject,
    pib,
    select_awake_epochs,
    welch,
)
from .projection import build_basis, project
from .rank import diffit
from .synth import SynthSpec, make_cohort, make_recording, make_tensor
from .tensor import load_factors, load_tensor, save_factors, save_tensor

DEFAULT_CONFIG = {
    "paths": {
        "manifest": "manifest.csv",
        "workdir": "work",
    },
    "preprocess": {
        "band_lo_hz": 0.5,
        "band_hi_hz": 45.0,
        "filter_order": 8,
        "epoch_seconds": 10.0,
        "min_epochs": 2,
        "max_epochs": 6,
        "rejection_sigma": 2.0,
    },
    "cpd": {
        "rank": 3,
        "max_iters": 500,
        "tol": 1e-8,
        "n_starts": 5,
        "seed": 0,
        "solver": "GN",
        "gn_damping_init": 1e-2,
    },
    "diffit": {
        "r_max": 6,
        "n_runs": 30,
    },
    "classify": {
        "k_folds": 15,
        "svm_c": 1.0,
        "svm_epochs": 200,
        "seed": 0,
    },
}


# ---------------------------------------------------------------------------
# config plumbing

def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from None
        if user is None:
            user = {}
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a mapping of sections")
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for section, fields in user.items():
            if not isinstance(fields, dict):
                raise ConfigError(f"config section {section!r} must be a mapping")
            bad = set(fields) - set(DEFAULT_CONFIG[section])
            if bad:
                raise ConfigError(f"unknown fields in section {section!r}: {sorted(bad)}")
        cfg = _deep_merge(cfg, user)
    return cfg


def validate_config(cfg: dict):
    pp = cfg["preprocess"]
    if not 0 < pp["band_lo_hz"] < pp["band_hi_hz"]:
        raise ConfigError("preprocess.band_lo_hz must be in (0, band_hi_hz)")
    if pp["epoch_seconds"] <= 0:
        raise ConfigError("preprocess.epoch_seconds must be positive")
    if pp["min_epochs"] < 2:
        raise ConfigError("preprocess.min_epochs must be >= 2")
    if pp["max_epochs"] < pp["min_epochs"]:
        raise ConfigError("preprocess.max_epochs must be >= min_epochs")
    if pp["rejection_sigma"] <= 0:
        raise ConfigError("preprocess.rejection_sigma must be positive")
    if pp["filter_order"] < 2:
        raise ConfigError("preprocess.filter_order must be >= 2")
    try:
        cpd_options(cfg)
    except ArgumentError as exc:
        raise ConfigError(f"cpd section invalid: {exc}") from None
    di = cfg["diffit"]
    if di["r_max"] < 3:
        raise ConfigError("diffit.r_max must be >= 3")
    if di["n_runs"] < 1:
        raise ConfigError("diffit.n_runs must be >= 1")
    cl = cfg["classify"]
    if cl["k_folds"] < 2:
        raise ConfigError("classify.k_folds must be >= 2")
    if cl["svm_c"] < 0:
        raise ConfigError("classify.svm_c must be nonnegative")
    if cl["svm_epochs"] < 1:
        raise ConfigError("classify.svm_epochs must be >= 1")


def cpd_options(cfg: dict, **overrides) -> CpdOptions:
    section = dict(cfg["cpd"])
    section.update(overrides)
    return CpdOptions(
        rank=int(section["rank"]),
        max_iters=int(section["max_iters"]),
        tol=float(section["tol"]),
        n_starts=int(section["n_starts"]),
        seed=int(section["seed"]),
        solver=str(section["solver"]),
        gn_damping_init=float(section["gn_damping_init"]),
    )


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# deterministic artifact writers

def _write_json(path: Path, doc: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(c) for c in row) + "\n")


def _stamp(cfg: dict, seed: int) -> dict:
    return {"version": __version__, "config_hash": config_hash(cfg), "seed": seed}


def _write_stage_config(workdir: Path, stage: str, cfg: dict, seed: int):
    doc = dict(_stamp(cfg, seed))
    doc["stage"] = stage
    doc["config"] = cfg
    _write_json(workdir / f"{stage}.config.json", doc)


@contextlib.contextmanager
def workdir_lock(workdir: Path):
    """Single-writer guard; concurrent invocations on one work dir refuse."""
    workdir.mkdir(parents=True, exist_ok=True)
    lock_path = workdir / ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"work dir {workdir} is locked by another invocation (remove {lock_path} if stale)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(lock_path)


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise IngestError(f"missing {path.name}; run `{producer}` first")
    return path


# ---------------------------------------------------------------------------
# provenance / label tables

def _write_provenance(path: Path, rows):
    _write_csv(
        path,
        ["epoch_row", "subject_id", "recording_id", "epoch_index"],
        [(r.epoch_row, r.subject_id, r.recording_id, r.epoch_index) for r in rows],
    )


def _read_provenance(path: Path) -> list[tuple[str, str, int]]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"epoch_row", "subject_id", "recording_id", "epoch_index"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise ParseError(f"provenance CSV needs columns {sorted(need)}", field="header")
        for row in reader:
            out.append((row["subject_id"], row["recording_id"], int(row["epoch_index"])))
    return out


def _read_labels(path: Path) -> dict[str, str]:
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"subject_id", "label"}.issubset(reader.fieldnames):
            raise ParseError("labels CSV needs columns subject_id,label", field="header")
        for row in reader:
            labels[row["subject_id"]] = row["label"]
    return labels


def _pib_header() -> list[str]:
    return ["subject_id", "recording_id", "epoch_index"] + PibVector.names()


def _write_pib(path: Path, spectra: list[EpochSpectrum]):
    rows = []
    for s in spectra:
        vec = pib(s)
        rows.append([s.subject_id, s.recording_id, s.index] + [float(v) for v in vec.values])
    _write_csv(path, _pib_header(), rows)


def _read_feature_csv(path: Path, id_cols: int = 3):
    """Rows of (subject_id, recording_id, epoch_index, feature vector)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:id_cols] != ["subject_id", "recording_id", "epoch_index"]:
            raise ParseError(
                f"{path.name} must start with subject_id,recording_id,epoch_index", field="header"
            )
        subjects, feats = [], []
        for row in reader:
            subjects.append(row[0])
            feats.append([float(v) for v in row[id_cols:]])
    if not feats:
        raise ParseError(f"{path.name} contains no feature rows", field="body")
    return subjects, np.asarray(feats)


# ---------------------------------------------------------------------------
# stages

def _preprocess_recording(entry, cfg):
    pp = cfg["preprocess"]
    rec = read_edf_file(entry.path)
    rec = select_channels(rec)
    rec = bandpass(rec, pp["band_lo_hz"], pp["band_hi_hz"], order=pp["filter_order"])
    # manifest identities override whatever the EDF header carried
    rec = type(rec)(
        samples=rec.samples,
        sample_rate=rec.sample_rate,
        channel_labels=rec.channel_labels,
        recording_id=entry.path.stem,
        subject_id=entry.subject_id,
    )
    epochs = epoch_and_reject(rec, pp["epoch_seconds"], pp["rejection_sigma"])
    epochs = select_awake_epochs(epochs, pp["min_epochs"], pp["max_epochs"])
    return [welch(e) for e in epochs]


def run_preprocess(cfg: dict, workdir: Path, manifest_path: Path) -> int:
    entries = read_manifest(manifest_path)
    spectra = []
    for entry in entries:
        try:
            spectra.extend(_preprocess_recording(entry, cfg))
        except (IngestError, ParseError) as exc:
            print(f"warning: skipping {entry.path.name}: {exc}", file=sys.stderr)
    if not spectra:
        raise IngestError("no recording in the manifest survived preprocessing")
    t, provenance = build_tensor(spectra)
    save_tensor(t, workdir / "tensor.bin")
    _write_provenance(workdir / "provenance.csv", provenance)
    _write_pib(workdir / "pib.csv", spectra)
    _write_stage_config(workdir, "preprocess", cfg, cfg["cpd"]["seed"])
    print(f"preprocess: {len(spectra)} epochs from {len(entries)} recordings -> tensor {t.dims}")
    return 0


def run_diffit(cfg: dict, workdir: Path) -> int:
    t = load_tensor(_require(workdir / "tensor.bin", "preprocess"))
    seed = cfg["cpd"]["seed"]
    opts = cpd_options(cfg, rank=1, solver="ALS")
    report = diffit(
        t, r_max=cfg["diffit"]["r_max"], n_runs=cfg["diffit"]["n_runs"], seed=seed, options=opts
    )
    doc = dict(_stamp(cfg, seed))
    doc.update(
        {
            "r_max": report.r_max,
            "n_runs": report.n_runs,
            "fits": [list(f) for f in report.fits],
            "chosen": list(report.chosen),
            "histogram": {str(k): v for k, v in report.histogram.items()},
            "modal_rank": report.modal_rank,
        }
    )
    _write_json(workdir / "rank_report.json", doc)
    _write_csv(
        workdir / "rank_histogram.csv",
        ["rank", "count"],
        [(r, report.histogram[r]) for r in sorted(report.histogram)],
    )
    _write_stage_config(workdir, "diffit", cfg, seed)
    print(f"diffit: modal rank {report.modal_rank} over {report.n_runs} runs")
    return 0


def _resolve_rank(cfg: dict, workdir: Path, flag_rank) -> int:
    if flag_rank is not None:
        return int(flag_rank)
    report_path = workdir / "rank_report.json"
    if report_path.exists():
        with open(report_path, encoding="utf-8") as fh:
            return int(json.load(fh)["modal_rank"])
    return int(cfg["cpd"]["rank"])


def run_decompose(cfg: dict, workdir: Path, flag_rank=None) -> int:
    t = load_tensor(_require(workdir / "tensor.bin", "preprocess"))
    rank = _resolve_rank(cfg, workdir, flag_rank)
    opts = cpd_options(cfg, rank=rank)
    solver = cpd_gn if opts.solver == "GN" else cpd_als
    result = solver(t, opts)
    if not result.converged and result.fit <= 0.0:
        raise NumericalError(
            f"{opts.solver} failed to converge to a usable iterate (fit={result.fit:.3g})"
        )
    save_factors(result.factors, workdir / "factors.json")
    meta = dict(_stamp(cfg, opts.seed))
    meta.update(
        {
            "solver": opts.solver,
            "rank": rank,
            "rel_error": result.rel_error,
            "fit": result.fit,
            "iterations": result.iterations,
            "converged": result.converged,
            "start_index": result.start_index,
            "trace": list(result.trace),
        }
    )
    _write_json(workdir / "decompose_meta.json", meta)
    fs = result.factors
    for i in range(rank):
        _write_csv(
            workdir / f"factor_{i + 1}_topomap.csv",
            ["channel", "value"],
            [(CHANNELS[s], float(fs.B[s, i])) for s in range(fs.B.shape[0])],
        )
        _write_csv(
            workdir / f"factor_{i + 1}_spectrum.csv",
            ["freq_hz", "value"],
            [(float(FREQ_GRID[f]), float(fs.C[f, i])) for f in range(fs.C.shape[0])],
        )
    _write_csv(
        workdir / "electrode_coords.csv",
        ["channel", "x", "y"],
        [(ch, ELECTRODE_COORDS[ch][0], ELECTRODE_COORDS[ch][1]) for ch in CHANNELS],
    )
    _write_stage_config(workdir, "decompose", cfg, opts.seed)
    print(
        f"decompose: rank {rank} {opts.solver} fit={result.fit:.6f} "
        f"rel_error={result.rel_error:.3e} ({result.iterations} iters)"
    )
    return 0


def run_project(cfg: dict, workdir: Path, manifest=None, tensor_path=None, provenance_path=None) -> int:
    factors = load_factors(_require(workdir / "factors.json", "decompose"))
    basis = build_basis(factors)
    spectra: list[EpochSpectrum] = []
    if tensor_path is not None:
        if provenance_path is None:
            raise ConfigError("--tensor requires --provenance")
        t = load_tensor(Path(tensor_path))
        rows = _read_provenance(Path(provenance_path))
        if t.dims[0] != len(rows):
            raise IngestError(
                f"provenance lists {len(rows)} epochs but tensor holds {t.dims[0]}"
            )
        if t.dims[1:] != basis.grid_shape:
            raise IngestError(
                f"tensor grid {t.dims[1:]} does not match basis grid {basis.grid_shape}"
            )
        for e, (subject, recording, index) in enumerate(rows):
            spectra.append(
                EpochSpectrum(psd=t.data[e], subject_id=subject, recording_id=recording, index=index)
            )
    elif manifest is not None:
        for entry in read_manifest(Path(manifest)):
            try:
                spectra.extend(_preprocess_recording(entry, cfg))
            except (IngestError, ParseError) as exc:
                print(f"warning: skipping {entry.path.name}: {exc}", file=sys.stderr)
    else:
        raise ConfigError("project needs --manifest or --tensor/--provenance")
    if not spectra:
        raise IngestError("no epochs available to project")
    weights = [project(basis, s) for s in spectra]
    rank = factors.rank
    _write_csv(
        workdir / "weights.csv",
        ["subject_id", "recording_id", "epoch_index"] + [f"w{i + 1}" for i in range(rank)],
        [
            [w.subject_id, w.recording_id, w.epoch_index] + [float(v) for v in w.w]
            for w in weights
        ],
    )
    _write_pib(workdir / "validation_pib.csv", spectra)
    _write_stage_config(workdir, "project", cfg, cfg["cpd"]["seed"])
    print(f"project: {len(weights)} epochs onto a rank-{rank} basis (rank_used={basis.rank_used})")
    return 0


def _classify_feature_set(name, path, labels, cfg, reports, summary_rows):
    subjects, feats = _read_feature_csv(path)
    missing = sorted({s for s in subjects if s not in labels})
    if missing:
        raise IngestError(f"no label for subjects: {', '.join(missing[:5])}")
    ds = CohortDataset(
        features=feats,
        subject_ids=tuple(subjects),
        labels=tuple(labels[s] for s in subjects),
    )
    cl = cfg["classify"]
    by_label: dict[str, set] = {}
    for s, l in ds.subject_labels().items():
        by_label.setdefault(l, set()).add(s)
    for task in sorted(TASKS):
        neg, pos = TASKS[task]
        if len(by_label.get(neg, ())) < 2 or len(by_label.get(pos, ())) < 2:
            continue
        for model in ("GNB", "SVM"):
            report = cross_validate(
                ds,
                task,
                model,
                k=cl["k_folds"],
                seed=cl["seed"],
                svm_c=cl["svm_c"],
                svm_epochs=cl["svm_epochs"],
            )
            reports.append((name, report))
            summary_rows.append(
                [name, model, task, float(report.mean_auc), float(report.std_auc)]
            )


def run_classify(cfg: dict, workdir: Path, labels_path=None) -> int:
    weights_path = workdir / "weights.csv"
    pib_path = workdir / "validation_pib.csv"
    if not weights_path.exists() and not pib_path.exists():
        raise IngestError("missing weights.csv; run `project` first")
    labels_file = Path(labels_path) if labels_path else workdir / "labels.csv"
    if not labels_file.exists():
        raise IngestError(f"missing labels CSV {labels_file.name}; provide --labels")
    labels = _read_labels(labels_file)
    reports: list = []
    summary_rows: list = []
    if weights_path.exists():
        _classify_feature_set("TD", weights_path, labels, cfg, reports, summary_rows)
    if pib_path.exists():
        _classify_feature_set("PIB", pib_path, labels, cfg, reports, summary_rows)
    if not summary_rows:
        raise IngestError("no task had two classes with >= 2 subjects each")
    doc = dict(_stamp(cfg, cfg["classify"]["seed"]))
    doc["reports"] = [dict(feature=f, **r.to_dict()) for f, r in reports]
    _write_json(workdir / "cv_report.json", doc)
    _write_csv(
        workdir / "summary.csv",
        ["feature", "classifier", "task", "mean_auc", "std_auc"],
        summary_rows,
    )
    _write_stage_config(workdir, "classify", cfg, cfg["classify"]["seed"])
    for row in summary_rows:
        print(f"classify: {row[0]}-{row[1]} {row[2]} AUC {row[3]:.3f} +/- {row[4]:.3f}")
    return 0


def run_synth(cfg: dict, workdir: Path, args) -> int:
    seed = args.seed if args.seed is not None else cfg["cpd"]["seed"]
    if args.mode == "edf":
        rows = []
        for i in range(args.n_recordings):
            rec = make_recording(
                seed=seed + i,
                duration=args.duration,
                subject_id=f"S{i:03d}",
                recording_id=f"S{i:03d}_r0",
            )
            name = f"rec_{i:03d}.edf"
            (workdir / name).write_bytes(write_edf(rec))
            rows.append((name, f"S{i:03d}", ""))
        _write_csv(workdir / "manifest.csv", ["path", "subject_id", "label"], rows)
        _write_stage_config(workdir, "synth", cfg, seed)
        print(f"synth: wrote {args.n_recordings} EDF recordings + manifest.csv")
        return 0

    dims = tuple(args.dims)
    spec = SynthSpec(
        dims=dims,
        rank=args.rank,
        snr_db=args.snr_db if args.snr_db is not None else math.inf,
        factor_style=args.style,
        class_weight_params=_default_class_params(args.rank) if args.mode == "cohort" else {},
        seed=seed,
    )
    t, truth = make_tensor(spec)
    save_tensor(t, workdir / "tensor.bin")
    save_factors(truth, workdir / "truth_factors.json")
    if args.mode == "cohort":
        per_class = _parse_subjects_per_class(args.subjects_per_class)
        cohort = make_cohort(spec, per_class, epochs_per_subject=args.epochs_per_subject)
        ct, cprov = build_tensor(cohort.spectra)
        save_tensor(ct, workdir / "cohort_tensor.bin")
        _write_provenance(workdir / "cohort_provenance.csv", cprov)
        _write_csv(
            workdir / "labels.csv",
            ["subject_id", "label"],
            sorted(cohort.labels.items()),
        )
        _write_csv(
            workdir / "truth_weights.csv",
            ["subject_id", "recording_id", "epoch_index"]
            + [f"w{i + 1}" for i in range(spec.rank)],
            [
                [s.subject_id, s.recording_id, s.index] + [float(v) for v in wrow]
                for s, wrow in zip(cohort.spectra, cohort.weights)
            ],
        )
        print(
            f"synth: population tensor {t.dims} + cohort of "
            f"{len(cohort.spectra)} epochs ({sum(per_class.values())} subjects)"
        )
    else:
        print(f"synth: population tensor {t.dims} (rank {spec.rank})")
    _write_stage_config(workdir, "synth", cfg, seed)
    return 0


def _default_class_params(rank: int) -> dict:
    """Class-conditional weight Gaussians echoing slowing-vs-alpha separation:
    the impaired classes load more on component 2 and less on component 3."""
    base = np.full(rank, 1.0)
    params = {}
    for label, c2, c3 in (("CN", 0.6, 1.8), ("MCI", 1.1, 1.1), ("AD", 1.8, 0.5)):
        mean = base.copy()
        if rank >= 2:
            mean[1] = c2
        if rank >= 3:
            mean[2] = c3
        params[label] = (mean.tolist(), (0.15 * np.ones(rank)).tolist())
    return params


def _parse_subjects_per_class(text: str) -> dict[str, int]:
    out = {}
    try:
        for part in text.split(","):
            label, count = part.split("=")
            out[label.strip()] = int(count)
    except ValueError:
        raise ConfigError(
            f"--subjects-per-class must look like CN=24,MCI=31,AD=50, got {text!r}"
        ) from None
    return out


def run_report(cfg: dict, workdir: Path) -> int:
    artifacts = {}
    for name in sorted(p.name for p in workdir.iterdir() if p.is_file()):
        if name in (".lock", "report.json"):
            continue
        digest = hashlib.sha256((workdir / name).read_bytes()).hexdigest()[:16]
        artifacts[name] = digest
    summary = dict(_stamp(cfg, cfg["cpd"]["seed"]))
    summary["artifacts"] = artifacts
    for source, keys in (
        ("rank_report.json", ("modal_rank",)),
        ("decompose_meta.json", ("rank", "fit", "rel_error", "converged")),
    ):
        path = workdir / source
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            for key in keys:
                summary[f"{source.split('.')[0]}_{key}"] = doc[key]
    cv_path = workdir / "cv_report.json"
    if cv_path.exists():
        with open(cv_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        summary["classification"] = [
            {
                "feature": r["feature"],
                "model": r["model"],
                "task": r["task"],
                "mean_auc": r["mean_auc"],
                "std_auc": r["std_auc"],
            }
            for r in doc["reports"]
        ]
    _write_json(workdir / "report.json", summary)
    print(f"report: {len(artifacts)} artifacts summarized")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="eegfactor", description=__doc__)
    parser.add_argument("--config", help="YAML config file (defaults merged underneath)")
    parser.add_argument("--workdir", help="work directory (overrides paths.workdir)")
    parser.add_argument("--seed", type=int, help="seed override for cpd and classify")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="manifest of EDFs -> tensor + provenance + PIB")
    p.add_argument("--manifest", help="cohort manifest CSV (overrides paths.manifest)")

    sub.add_parser("diffit", help="tensor -> DIFFIT rank report + histogram")

    p = sub.add_parser("decompose", help="tensor + rank -> factors + topomaps + spectra")
    p.add_argument("--rank", type=int, help="decomposition rank (default: rank report, then config)")

    p = sub.add_parser("project", help="factors + validation epochs -> weights CSV")
    p.add_argument("--manifest", help="validation manifest CSV of EDF recordings")
    p.add_argument("--tensor", help="validation spectra as a tensor binary")
    p.add_argument("--provenance", help="provenance CSV aligned with --tensor")

    p = sub.add_parser("classify", help="weights/PIB + labels -> CV report + summary")
    p.add_argument("--labels", help="labels CSV subject_id,label (default workdir/labels.csv)")

    p = sub.add_parser("synth", help="seeded synthetic fixtures")
    p.add_argument("--mode", choices=("tensor", "cohort", "edf"), default="tensor")
    p.add_argument("--dims", type=int, nargs=3, default=(200, 19, 89), metavar=("E", "S", "F"))
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--snr-db", type=float, default=None, help="default: noiseless")
    p.add_argument("--style", choices=("random", "physiological"), default="physiological")
    p.add_argument("--subjects-per-class", default="CN=24,MCI=31,AD=50")
    p.add_argument("--epochs-per-subject", type=int, default=4)
    p.add_argument("--n-recordings", type=int, default=5)
    p.add_argument("--duration", type=float, default=60.0)

    sub.add_parser("report", help="collect work dir artifacts into one JSON summary")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["cpd"]["seed"] = args.seed
            cfg["classify"]["seed"] = args.seed
        if args.workdir is not None:
            cfg["paths"]["workdir"] = args.workdir
        validate_config(cfg)
        workdir = Path(cfg["paths"]["workdir"])
        with workdir_lock(workdir):
            if args.command == "preprocess":
                manifest = Path(args.manifest or cfg["paths"]["manifest"])
                return run_preprocess(cfg, workdir, manifest)
            if args.command == "diffit":
                return run_diffit(cfg, workdir)
            if args.command == "decompose":
                return run_decompose(cfg, workdir, args.rank)
            if args.command == "project":
                return run_project(cfg, workdir, args.manifest, args.tensor, args.provenance)
            if args.command == "classify":
                return run_classify(cfg, workdir, args.labels)
            if args.command == "synth":
                return run_synth(cfg, workdir, args)
            if args.command == "report":
                return run_report(cfg, workdir)
            raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
