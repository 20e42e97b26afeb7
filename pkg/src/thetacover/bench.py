"""Experiment harness: sweeps, per-trial records, and CSV/JSON outputs.

Four experiment kinds: `comparison` (theta vs the three baselines over the
edge-probability grid), `ilp_gap` (exact cover number vs theta, with search
hardness), `phase_transition` (strong/weak recovery curves for n = k), and
`certify` (certificate pipeline vs solver classification).  Per-trial seeds
are derived by hashing (master seed, cell key, trial index), so records are
identical across runs and across parallelism degrees; records are sorted
before writing and floats are written with repr, making `trials.csv`
byte-identical modulo the runtime column.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import multiprocessing
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baselines import run_baseline, sweep_lambda
from .certificate import deterministic_recovery
from .graphs import generate_planted
from .oracle import clique_cover_number
from .theta import classify_recovery, solve_theta

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "SweepResult",
    "ConfigError",
    "load_config",
    "run_experiment",
    "run_comparison",
    "run_ilp_gap",
    "run_phase_transition",
    "run_certify",
    "trial_seed",
]

SCHEMA = "v1"

TRIAL_COLUMNS = [
    "schema",
    "experiment",
    "cell",
    "sizes",
    "p",
    "trial",
    "seed",
    "method",
    "verdict",
    "value",
    "value2",
    "success",
    "certified",
    "c_min",
    "threshold",
    "residual",
    "iterations",
    "converged",
    "nodes",
    "exact",
    "runtime",
    "detail",
]

SUMMARY_COLUMNS = ["schema", "experiment", "cell", "sizes", "p", "method", "metric", "value", "trials"]


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, wrong kind, bad value)."""


_KINDS = ("comparison", "ilp_gap", "phase_transition", "certify")

_DEFAULT_P = [round(0.05 * i, 2) for i in range(21)]


@dataclass
class ExperimentConfig:
    """Mirrors the config file; unknown keys are rejected.

    Per-kind defaults (filled when a field is omitted): trial counts 20 /
    10 / 10 / 25 and solver eps 1e-5 for sweeps, 1e-7 for certification;
    the certify kind defaults to a small-p grid where certification is
    informative.
    """

    kind: str
    sizes: Optional[list] = None  # block sizes (all kinds except phase_transition)
    nk_values: Optional[list] = None  # phase transition: n = k values
    p_values: Optional[list] = None
    trials: Optional[int] = None
    seed: int = 0
    eps: Optional[float] = None
    tol_value: Optional[float] = None  # None: 1e-3 * k
    tol_matrix: float = 1e-3
    lambda_grid: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)])
    max_nodes: Optional[int] = 5_000_000
    max_time: Optional[float] = None
    out_dir: str = "out"
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {_KINDS}")
        if self.p_values is None:
            self.p_values = (
                [0.0, 0.01, 0.02, 0.03, 0.04] if self.kind == "certify" else list(_DEFAULT_P)
            )
        if self.trials is None:
            self.trials = {"comparison": 20, "ilp_gap": 10, "phase_transition": 10, "certify": 25}[
                self.kind
            ]
        if self.eps is None:
            self.eps = 1e-7 if self.kind == "certify" else 1e-5
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if any(not 0.0 <= p <= 1.0 for p in self.p_values):
            raise ConfigError("p grid must lie within [0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.kind == "phase_transition":
            if not self.nk_values:
                self.nk_values = list(range(5, 16))
        else:
            if self.sizes is None:
                self.sizes = {
                    "comparison": [10] * 10,
                    "ilp_gap": [6] * 6,
                    "certify": [25] * 4,
                }[self.kind]
            if any(s < 1 for s in self.sizes):
                raise ConfigError("block sizes must be >= 1")

    def cells(self) -> list:
        """Cell keys in grid order: (cell string, parameters)."""
        if self.kind == "phase_transition":
            return [
                (f"n={n},p={p!r}", (n, p)) for n in self.nk_values for p in self.p_values
            ]
        return [(f"p={p!r}", (None, p)) for p in self.p_values]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def load_config(path) -> ExperimentConfig:
    """Read a JSON config file; unknown keys are an error."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "kind" not in doc:
        raise ConfigError("config needs a 'kind'")
    return ExperimentConfig(**doc)


def trial_seed(master: int, cell_key: str, trial: int) -> int:
    """Stable 63-bit per-trial seed from (master seed, cell, trial)."""
    digest = hashlib.blake2b(
        f"{master}|{cell_key}|{trial}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") >> 1


@dataclass
class TrialRecord:
    experiment: str
    cell: str
    sizes: str
    p: float
    trial: int
    seed: int
    method: str
    verdict: str = ""
    value: Optional[float] = None
    value2: Optional[float] = None
    success: Optional[bool] = None
    certified: Optional[bool] = None
    c_min: Optional[float] = None
    threshold: Optional[float] = None
    residual: Optional[float] = None
    iterations: Optional[int] = None
    converged: Optional[bool] = None
    nodes: Optional[int] = None
    exact: Optional[bool] = None
    runtime: Optional[float] = None
    detail: str = ""

    def row(self) -> list:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return repr(v)
            return str(v)

        return [
            SCHEMA,
            self.experiment,
            self.cell,
            self.sizes,
            fmt(self.p),
            str(self.trial),
            str(self.seed),
            self.method,
            self.verdict,
            fmt(self.value),
            fmt(self.value2),
            fmt(self.success),
            fmt(self.certified),
            fmt(self.c_min),
            fmt(self.threshold),
            fmt(self.residual),
            fmt(self.iterations),
            fmt(self.converged),
            fmt(self.nodes),
            fmt(self.exact),
            fmt(self.runtime),
            self.detail,
        ]


@dataclass
class SweepResult:
    records: list
    summary: list  # rows: dicts keyed by SUMMARY_COLUMNS
    out_dir: Optional[Path]

    def summary_value(self, cell: str, method: str, metric: str) -> Optional[float]:
        for row in self.summary:
            if row["cell"] == cell and row["method"] == method and row["metric"] == metric:
                return row["value"]
        return None


# ---------------------------------------------------------------------------
# per-trial work


def _sizes_str(sizes) -> str:
    return "x".join(str(s) for s in sizes)


def _theta_record(cfg: ExperimentConfig, inst, cell, trial, seed, eps) -> TrialRecord:
    t0 = time.perf_counter()
    sol = solve_theta(inst.graph, eps=eps)
    runtime = time.perf_counter() - t0
    if sol.converged:
        cls = classify_recovery(sol, inst.partition, cfg.tol_value, cfg.tol_matrix)
        verdict = cls.value
    else:
        verdict = "unconverged"
    return TrialRecord(
        experiment=cfg.kind,
        cell=cell,
        sizes=_sizes_str(inst.partition.sizes),
        p=inst.p,
        trial=trial,
        seed=seed,
        method="theta",
        verdict=verdict,
        value=sol.theta,
        value2=math.ceil(sol.value_lb - 1e-9),
        residual=sol.enclosure_width,
        iterations=sol.iterations,
        converged=sol.converged,
        runtime=runtime,
    )


def _comparison_trial(cfg: ExperimentConfig, cell_idx: int, trial: int) -> list:
    p = cfg.p_values[cell_idx]
    cell = f"p={p!r}"
    seed = trial_seed(cfg.seed, cell, trial)
    inst = generate_planted(cfg.sizes, p, seed)
    records = [_theta_record(cfg, inst, cell, trial, seed, cfg.eps)]

    t0 = time.perf_counter()
    sweep = sweep_lambda(inst.graph, inst.partition, cfg.lambda_grid, eps=cfg.eps)
    detail = json.dumps(
        [
            {
                "lambda": r.params["lambda"],
                "success": r.success,
                "iterations": r.iterations,
                "converged": r.converged,
            }
            for r in sweep.results
        ],
        separators=(",", ":"),
    )
    records.append(
        TrialRecord(
            experiment=cfg.kind,
            cell=cell,
            sizes=_sizes_str(cfg.sizes),
            p=p,
            trial=trial,
            seed=seed,
            method="deconvolution",
            verdict="success" if sweep.success else "fail",
            success=sweep.success,
            iterations=sum(r.iterations for r in sweep.results),
            converged=all(r.converged for r in sweep.results),
            runtime=time.perf_counter() - t0,
            detail=detail,
        )
    )

    for method in ("kdc", "schurhorn"):
        t0 = time.perf_counter()
        if method == "schurhorn" and len(set(cfg.sizes)) != 1:
            records.append(
                TrialRecord(
                    experiment=cfg.kind,
                    cell=cell,
                    sizes=_sizes_str(cfg.sizes),
                    p=p,
                    trial=trial,
                    seed=seed,
                    method=method,
                    verdict="inapplicable",
                    success=False,
                    runtime=0.0,
                )
            )
            continue
        res = run_baseline(inst.graph, inst.partition, method, eps=cfg.eps)
        dist_key = (
            "target_distance_normalized" if method == "kdc" else "target_distance_unnormalized"
        )
        records.append(
            TrialRecord(
                experiment=cfg.kind,
                cell=cell,
                sizes=_sizes_str(cfg.sizes),
                p=p,
                trial=trial,
                seed=seed,
                method=method,
                verdict="success" if res.success else "fail",
                success=res.success,
                residual=res.residuals[dist_key],
                value=res.residuals.get("objective"),
                iterations=res.iterations,
                converged=res.converged,
                runtime=time.perf_counter() - t0,
            )
        )
    return records


def _ilp_gap_trial(cfg: ExperimentConfig, cell_idx: int, trial: int) -> list:
    p = cfg.p_values[cell_idx]
    cell = f"p={p!r}"
    seed = trial_seed(cfg.seed, cell, trial)
    inst = generate_planted(cfg.sizes, p, seed)
    records = [_theta_record(cfg, inst, cell, trial, seed, cfg.eps)]
    t0 = time.perf_counter()
    cover = clique_cover_number(inst.graph, cfg.max_nodes, cfg.max_time)
    records.append(
        TrialRecord(
            experiment=cfg.kind,
            cell=cell,
            sizes=_sizes_str(cfg.sizes),
            p=p,
            trial=trial,
            seed=seed,
            method="cover_oracle",
            verdict="exact" if cover.exact else "budget",
            value=float(cover.value),
            nodes=cover.nodes_explored,
            exact=cover.exact,
            runtime=time.perf_counter() - t0,
        )
    )
    return records


def _phase_trial(cfg: ExperimentConfig, cell_idx: int, trial: int) -> list:
    cell, (n, p) = cfg.cells()[cell_idx]
    seed = trial_seed(cfg.seed, cell, trial)
    inst = generate_planted([n] * n, p, seed)
    return [_theta_record(cfg, inst, cell, trial, seed, cfg.eps)]


def _certify_trial(cfg: ExperimentConfig, cell_idx: int, trial: int) -> list:
    p = cfg.p_values[cell_idx]
    cell = f"p={p!r}"
    seed = trial_seed(cfg.seed, cell, trial)
    inst = generate_planted(cfg.sizes, p, seed)
    t0 = time.perf_counter()
    report = deterministic_recovery(inst.graph, inst.partition)
    cert_runtime = time.perf_counter() - t0
    records = [
        TrialRecord(
            experiment=cfg.kind,
            cell=cell,
            sizes=_sizes_str(cfg.sizes),
            p=p,
            trial=trial,
            seed=seed,
            method="certify",
            verdict=report.verdict,
            certified=report.certified,
            c_min=report.residuals["c_min"],
            threshold=report.residuals["threshold"],
            residual=report.residuals["projection_distance"],
            iterations=int(report.residuals["projection_iterations"]),
            runtime=cert_runtime,
        )
    ]
    records.append(_theta_record(cfg, inst, cell, trial, seed, cfg.eps))
    return records


_TRIAL_FUNCS = {
    "comparison": _comparison_trial,
    "ilp_gap": _ilp_gap_trial,
    "phase_transition": _phase_trial,
    "certify": _certify_trial,
}


def _run_work_item(args):
    cfg, cell_idx, trial = args
    return _TRIAL_FUNCS[cfg.kind](cfg, cell_idx, trial)


# ---------------------------------------------------------------------------
# aggregation


def _rate(records, predicate) -> float:
    hits = sum(1 for r in records if predicate(r))
    return hits / len(records) if records else float("nan")


def _interp_crossing(ps, rates, level) -> float:
    """First p where the piecewise-linear curve crosses below `level`."""
    if rates[0] <= level:
        return ps[0]
    for (p0, r0), (p1, r1) in zip(zip(ps, rates), zip(ps[1:], rates[1:])):
        if r0 > level >= r1:
            if r0 == r1:
                return p1
            return p0 + (p1 - p0) * (r0 - level) / (r0 - r1)
    return float("nan")


def _interp_value(ps, values, p) -> float:
    return float(np.interp(p, ps, values))


def _summarize(cfg: ExperimentConfig, records: list) -> list:
    rows = []

    def add(cell, sizes, p, method, metric, value, trials):
        rows.append(
            {
                "schema": SCHEMA,
                "experiment": cfg.kind,
                "cell": cell,
                "sizes": sizes,
                "p": p,
                "method": method,
                "metric": metric,
                "value": value,
                "trials": trials,
            }
        )

    by_cell: dict = {}
    for r in records:
        by_cell.setdefault(r.cell, {}).setdefault(r.method, []).append(r)

    if cfg.kind == "comparison":
        for cell, methods in by_cell.items():
            theta = methods.get("theta", [])
            p = theta[0].p if theta else None
            sizes = theta[0].sizes if theta else ""
            add(cell, sizes, p, "theta_strong", "success_rate",
                _rate(theta, lambda r: r.verdict == "strong"), len(theta))
            add(cell, sizes, p, "theta_weak_or_better", "success_rate",
                _rate(theta, lambda r: r.verdict in ("strong", "weak")), len(theta))
            for method in ("deconvolution", "kdc", "schurhorn"):
                recs = methods.get(method, [])
                add(cell, sizes, p, method, "success_rate",
                    _rate(recs, lambda r: bool(r.success)), len(recs))
    elif cfg.kind == "ilp_gap":
        for cell, methods in by_cell.items():
            theta = {r.trial: r for r in methods.get("theta", [])}
            oracle = methods.get("cover_oracle", [])
            p = oracle[0].p if oracle else None
            sizes = oracle[0].sizes if oracle else ""
            gaps = [
                r.value - theta[r.trial].value
                for r in oracle
                if r.exact and r.trial in theta and theta[r.trial].converged
            ]
            add(cell, sizes, p, "gap", "mean",
                float(np.mean(gaps)) if gaps else float("nan"), len(gaps))
            add(cell, sizes, p, "cover_oracle", "mean_nodes",
                float(np.mean([r.nodes for r in oracle])) if oracle else float("nan"),
                len(oracle))
            add(cell, sizes, p, "cover_oracle", "inexact_count",
                float(sum(1 for r in oracle if not r.exact)), len(oracle))
    elif cfg.kind == "phase_transition":
        curve: dict = {}
        for cell, methods in by_cell.items():
            theta = methods.get("theta", [])
            n = int(theta[0].sizes.split("x")[0])
            p = theta[0].p
            strong = _rate(theta, lambda r: r.verdict == "strong")
            weak = _rate(theta, lambda r: r.verdict in ("strong", "weak"))
            add(cell, theta[0].sizes, p, "theta_strong", "success_rate", strong, len(theta))
            add(cell, theta[0].sizes, p, "theta_weak_or_better", "success_rate", weak, len(theta))
            curve.setdefault(n, []).append((p, strong, weak, len(theta)))
        for n, pts in sorted(curve.items()):
            pts.sort()
            ps = [x[0] for x in pts]
            strong = [x[1] for x in pts]
            weak = [x[2] for x in pts]
            total = sum(x[3] for x in pts)
            p90 = _interp_crossing(ps, strong, 0.9)
            p10 = _interp_crossing(ps, strong, 0.1)
            width = p10 - p90 if not (math.isnan(p90) or math.isnan(p10)) else float("nan")
            p50 = _interp_crossing(ps, strong, 0.5)
            gap = (
                _interp_value(ps, weak, p50) - _interp_value(ps, strong, p50)
                if not math.isnan(p50)
                else float("nan")
            )
            cell = f"n={n}"
            add(cell, f"{n}x{n}", None, "theta", "transition_width_strong", width, total)
            add(cell, f"{n}x{n}", None, "theta", "weak_strong_gap_at_midpoint", gap, total)
    elif cfg.kind == "certify":
        for cell, methods in by_cell.items():
            cert = methods.get("certify", [])
            theta = {r.trial: r for r in methods.get("theta", [])}
            p = cert[0].p if cert else None
            sizes = cert[0].sizes if cert else ""
            add(cell, sizes, p, "certify", "certified_rate",
                _rate(cert, lambda r: bool(r.certified)), len(cert))
            add(cell, sizes, p, "certify", "below_threshold_rate",
                _rate(cert, lambda r: r.c_min is not None and r.c_min <= r.threshold),
                len(cert))
            add(cell, sizes, p, "theta", "strong_rate",
                _rate(list(theta.values()), lambda r: r.verdict == "strong"), len(theta))
            certified_not_strong = sum(
                1
                for r in cert
                if r.certified and theta.get(r.trial) is not None
                and theta[r.trial].verdict != "strong"
            )
            below_not_certified = sum(
                1
                for r in cert
                if r.c_min is not None and r.c_min <= r.threshold and not r.certified
            )
            add(cell, sizes, p, "certify", "certified_and_not_strong",
                float(certified_not_strong), len(cert))
            add(cell, sizes, p, "certify", "below_threshold_not_certified",
                float(below_not_certified), len(cert))
    return rows


# ---------------------------------------------------------------------------
# driver


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> SweepResult:
    """Run every (cell, trial) work item, aggregate, and write outputs.

    Records are generated with per-trial derived seeds and sorted by
    (cell index, trial, method), so results do not depend on scheduling.
    """
    cell_keys = [key for key, _ in cfg.cells()]
    items = [(cfg, ci, t) for ci in range(len(cell_keys)) for t in range(cfg.trials)]

    nested: list
    if cfg.jobs > 1:
        with multiprocessing.Pool(cfg.jobs) as pool:
            nested = pool.map(_run_work_item, items, chunksize=1)
    else:
        nested = [_run_work_item(item) for item in items]

    cell_order = {key: idx for idx, key in enumerate(cell_keys)}
    records = [r for batch in nested for r in batch]
    records.sort(key=lambda r: (cell_order.get(r.cell, 0), r.trial, r.method))

    summary = _summarize(cfg, records)
    out_dir: Optional[Path] = None
    if write:
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "trials.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRIAL_COLUMNS)
            for r in records:
                writer.writerow(r.row())
        with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_COLUMNS)
            for row in summary:
                writer.writerow(
                    [
                        row["schema"],
                        row["experiment"],
                        row["cell"],
                        row["sizes"],
                        "" if row["p"] is None else repr(row["p"]),
                        row["method"],
                        row["metric"],
                        repr(float(row["value"])),
                        str(row["trials"]),
                    ]
                )
        run_info = {
            "schema": SCHEMA,
            "config": cfg.to_dict(),
            "environment": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "platform": platform.platform(),
            },
            "package_version": __version__,
        }
        with open(out_dir / "run.json", "w", encoding="utf-8") as fh:
            json.dump(run_info, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return SweepResult(records=records, summary=summary, out_dir=out_dir)


def run_comparison(cfg: ExperimentConfig, write: bool = True) -> SweepResult:
    if cfg.kind != "comparison":
        raise ConfigError("config kind must be 'comparison'")
    return run_experiment(cfg, write)


def run_ilp_gap(cfg: ExperimentConfig, write: bool = True) -> SweepResult:
    if cfg.kind != "ilp_gap":
        raise ConfigError("config kind must be 'ilp_gap'")
    return run_experiment(cfg, write)


def run_phase_transition(cfg: ExperimentConfig, write: bool = True) -> SweepResult:
    if cfg.kind != "phase_transition":
        raise ConfigError("config kind must be 'phase_transition'")
    return run_experiment(cfg, write)


def run_certify(cfg: ExperimentConfig, write: bool = True) -> SweepResult:
    if cfg.kind != "certify":
        raise ConfigError("config kind must be 'certify'")
    return run_experiment(cfg, write)
