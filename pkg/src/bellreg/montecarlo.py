"""Simulation studies: sample frequencies, regularize, measure, aggregate.

The protocol is (i) pick an ideal behavior, (ii) simulate counts for each
setting pair, (iii) regularize the relative frequency and evaluate metrics,
(iv) repeat over a grid of trial counts.  Per-setting totals are held
constant at N_trials.

Randomness: counts come from a Philox counter-based generator; the stream
for one replication is derived as SeedSequence(master_seed, spawn_key=
(crc32(estimator_label), N_low, N_high, replication)), so records are
independent of execution order and can be produced by any number of
workers.  Multinomials are drawn by sequential binomial decomposition.
"""

from __future__ import annotations

import csv
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .canonical import CANONICAL_NAMES, canonical_distribution
from .core import Behavior, FrequencyTable
from .estimators import EstimatorSpec, estimate, restore_feasibility
from .functionals import evaluate_functional, named_functional
from .metrics import behavior_kl, lp_distance
from .npa.negativity import negativity_bound
from .conic.solver import SolverOptions

__all__ = [
    "StudyConfig",
    "StudyRecord",
    "SummaryRow",
    "sample_frequencies",
    "run_study",
    "summarize",
    "fit_slope",
    "write_records_csv",
    "read_records_csv",
    "write_summary_csv",
]

STUDY_SOLVER = SolverOptions(eps_abs=1e-9, eps_rel=1e-9, max_iters=40_000)
NEGATIVITY_SOLVER = SolverOptions(eps_abs=1e-7, eps_rel=1e-7, max_iters=60_000)
RESTORE_EPS = 1e-8


def sample_frequencies(P: Behavior, n_trials: int, seed) -> FrequencyTable:
    """Multinomial counts, N_trials draws per setting pair.

    ``seed`` may be anything accepted by numpy's SeedSequence, or a
    Generator used directly.
    """
    if not P.physical:
        raise ValueError("cannot sample from an unphysical behavior")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(seed))
    s = P.scenario
    k = s.outputs_a * s.outputs_b
    blocks = P.p.reshape(s.n_settings, k)
    counts = np.zeros((s.n_settings, k), dtype=np.int64)
    for i in range(s.n_settings):
        remaining = n_trials
        rest = 1.0
        for j in range(k - 1):
            if remaining == 0 or rest <= 0.0:
                break
            pj = min(max(blocks[i, j] / rest, 0.0), 1.0)
            c = int(rng.binomial(remaining, pj))
            counts[i, j] = c
            remaining -= c
            rest -= blocks[i, j]
        counts[i, k - 1] = remaining
    return FrequencyTable(s, counts.reshape(-1))


@dataclass(frozen=True)
class StudyConfig:
    source: str
    n_trials: tuple[int, ...]
    replications: int
    estimators: tuple[EstimatorSpec, ...]
    metrics: tuple[str, ...] = ("l1_to_truth",)
    seed: int = 0
    jobs: int = 1
    solver: SolverOptions = field(default=STUDY_SOLVER)

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(n < 1 for n in self.n_trials):
            raise ValueError("n_trials entries must be >= 1")
        object.__setattr__(self, "n_trials", tuple(int(n) for n in self.n_trials))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "metrics", tuple(self.metrics))

    def source_behavior(self) -> Behavior:
        if self.source in CANONICAL_NAMES:
            return canonical_distribution(self.source)
        with open(self.source) as fh:
            return Behavior.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "n_trials": list(self.n_trials),
            "replications": self.replications,
            "estimators": [{"method": e.method, "target": e.target} for e in self.estimators],
            "metrics": list(self.metrics),
            "seed": self.seed,
            "jobs": self.jobs,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StudyConfig":
        return cls(
            source=obj["source"],
            n_trials=tuple(obj["n_trials"]),
            replications=int(obj["replications"]),
            estimators=tuple(
                EstimatorSpec(e["method"], e.get("target", "q1")) for e in obj["estimators"]
            ),
            metrics=tuple(obj.get("metrics", ["l1_to_truth"])),
            seed=int(obj.get("seed", 0)),
            jobs=int(obj.get("jobs", 1)),
        )


@dataclass(frozen=True)
class StudyRecord:
    estimator: str
    n_trials: int
    rep: int
    metric: str
    value: float
    failed: bool = False


def replication_seed(master_seed: int, label: str, n_trials: int, rep: int) -> np.random.SeedSequence:
    key = zlib.crc32(label.encode())
    return np.random.SeedSequence(
        master_seed, spawn_key=(key, n_trials & 0xFFFFFFFF, n_trials >> 32, rep)
    )


def evaluate_metrics(
    p_reg: Behavior,
    truth: Behavior,
    metrics: tuple[str, ...],
) -> dict[str, float]:
    out: dict[str, float] = {}
    for metric in metrics:
        if metric == "l1_to_truth":
            out[metric] = lp_distance(p_reg, truth, 1)
        elif metric == "kl_to_truth":
            out[metric] = behavior_kl(p_reg, truth)
        elif metric.startswith("bell:"):
            out[metric] = evaluate_functional(named_functional(metric[5:]), p_reg)
        elif metric.startswith("negativity:"):
            level = int(metric.split(":")[1])
            if not p_reg.physical:
                out[metric] = float("nan")
                continue
            Q = restore_feasibility(p_reg, eps=RESTORE_EPS)
            out[metric] = negativity_bound(Q, level, NEGATIVITY_SOLVER).bound
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return out


def _run_batch(args) -> list[StudyRecord]:
    cfg, tasks = args
    truth = cfg.source_behavior()
    records: list[StudyRecord] = []
    for spec, n, rep in tasks:
        label = spec.label
        ss = replication_seed(cfg.seed, label, n, rep)
        f = sample_frequencies(truth, n, ss)
        try:
            res = estimate(f, replace(spec, solver=cfg.solver))
            vals = evaluate_metrics(res.p_reg, truth, cfg.metrics)
            for metric, value in vals.items():
                records.append(StudyRecord(label, n, rep, metric, value))
        except Exception:
            for metric in cfg.metrics:
                records.append(StudyRecord(label, n, rep, metric, float("nan"), failed=True))
    return records


def run_study(cfg: StudyConfig, out_dir: str | Path | None = None) -> list[StudyRecord]:
    """Execute the full grid; returns records sorted deterministically.

    With ``out_dir`` the records, a summary, and a completion manifest are
    written; an existing manifest for the same config resumes the study,
    recomputing only what is missing.
    """
    tasks = [
        (spec, n, rep)
        for spec in cfg.estimators
        for n in cfg.n_trials
        for rep in range(cfg.replications)
    ]
    done: set[tuple[str, int, int]] = set()
    records: list[StudyRecord] = []
    manifest_path = records_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest_path = out_dir / "manifest.json"
        records_path = out_dir / "records.csv"
        if manifest_path.exists() and records_path.exists():
            manifest = json.loads(manifest_path.read_text())
            if manifest.get("config") == cfg.to_json():
                records = read_records_csv(records_path)
                done = {(r.estimator, r.n_trials, r.rep) for r in records}
    todo = [t for t in tasks if (t[0].label, t[1], t[2]) not in done]

    if todo:
        if cfg.jobs > 1:
            chunks = [(cfg, todo[i :: cfg.jobs * 4]) for i in range(cfg.jobs * 4)]
            chunks = [c for c in chunks if c[1]]
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                for batch in pool.map(_run_batch, chunks):
                    records.extend(batch)
        else:
            records.extend(_run_batch((cfg, todo)))

    records.sort(key=lambda r: (r.estimator, r.n_trials, r.rep, r.metric))
    if out_dir is not None:
        write_records_csv(records_path, records)
        manifest_path.write_text(
            json.dumps({"config": cfg.to_json(), "n_records": len(records)}, indent=1)
        )
        truths = truth_values(cfg)
        write_summary_csv(out_dir / "summary.csv", summarize(records, truths))
    return records


def truth_values(cfg: StudyConfig) -> dict[str, float]:
    """Metric values on the ideal source behavior (targets for MSE)."""
    truth = cfg.source_behavior()
    vals: dict[str, float] = {}
    for metric in cfg.metrics:
        if metric in ("l1_to_truth", "kl_to_truth"):
            vals[metric] = 0.0
        elif metric.startswith("bell:"):
            vals[metric] = evaluate_functional(named_functional(metric[5:]), truth)
        elif metric.startswith("negativity:"):
            level = int(metric.split(":")[1])
            vals[metric] = negativity_bound(
                restore_feasibility(truth, eps=RESTORE_EPS), level, NEGATIVITY_SOLVER
            ).bound
    return vals


@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    n_trials: int
    metric: str
    mean: float
    p10: float
    p90: float
    mse: float
    sem: float


def _nearest_rank(sorted_vals: np.ndarray, q: float) -> float:
    n = sorted_vals.size
    idx = max(int(np.ceil(q * n)) - 1, 0)
    return float(sorted_vals[idx])


def summarize(records: list[StudyRecord], truths: dict[str, float] | None = None) -> list[SummaryRow]:
    """Percentiles by nearest rank; MSE against the supplied truth values."""
    if not records:
        raise ValueError("no records to summarize")
    groups: dict[tuple[str, int, str], list[float]] = {}
    for r in records:
        if not r.failed and np.isfinite(r.value):
            groups.setdefault((r.estimator, r.n_trials, r.metric), []).append(r.value)
    rows = []
    for (est, n, metric), vals in sorted(groups.items()):
        arr = np.sort(np.asarray(vals))
        truth = (truths or {}).get(metric, 0.0)
        mse = float(np.mean((arr - truth) ** 2))
        sem = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
        rows.append(
            SummaryRow(
                est,
                n,
                metric,
                float(arr.mean()),
                _nearest_rank(arr, 0.10),
                _nearest_rank(arr, 0.90),
                mse,
                sem,
            )
        )
    return rows


def fit_slope(summary: list[SummaryRow], metric: str, estimator: str, use_mse: bool = False) -> float:
    """Least-squares slope of log(mean metric) against log(N_trials)."""
    pts = [
        (row.n_trials, row.mse if use_mse else row.mean)
        for row in summary
        if row.metric == metric and row.estimator == estimator
    ]
    if len(pts) < 2:
        raise ValueError("slope fitting needs at least two grid points")
    pts.sort()
    n = np.log(np.asarray([p[0] for p in pts], dtype=float))
    v = np.log(np.asarray([p[1] for p in pts], dtype=float))
    return float(np.polyfit(n, v, 1)[0])


def write_records_csv(path: str | Path, records: list[StudyRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "n_trials", "rep", "metric", "value"])
        for r in records:
            w.writerow([r.estimator, r.n_trials, r.rep, r.metric, repr(r.value)])


def read_records_csv(path: str | Path) -> list[StudyRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            value = float(row["value"])
            out.append(
                StudyRecord(
                    row["estimator"],
                    int(row["n_trials"]),
                    int(row["rep"]),
                    row["metric"],
                    value,
                    failed=not np.isfinite(value),
                )
            )
    return out


def write_summary_csv(path: str | Path, rows: list[SummaryRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "n_trials", "metric", "mean", "p10", "p90", "mse", "sem"])
        for r in rows:
            w.writerow(
                [r.estimator, r.n_trials, r.metric]
                + [repr(v) for v in (r.mean, r.p10, r.p90, r.mse, r.sem)]
            )
