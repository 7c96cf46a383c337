"""Cross-validated grid-search and label-noise sweep harness.

For every dataset, noise rate and fold, the training fold is min-max
scaled, its labels are corrupted, and every grid point of every model
family is fitted and scored on the clean test fold. Rows are aggregated
per grid point; the best point per (dataset, model, rate) is flagged.

Every random consumer gets its own seed from :func:`derive_seed`:

* folds:     (master, dataset, "folds")
* noise:     (master, dataset, "noise", fold, rate)
* features:  (master, dataset, "features", fold, rate, feature_index)
* batches:   (master, dataset, "batches", fold, rate, feature_index)

``feature_index`` enumerates the (hidden_nodes, activation) sub-grid, so
all model families and loss settings at one feature point share one
random hidden layer and differ only in how the output weights are fit.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .data import Dataset, fit_minmax, flip_labels, kfold_split, load_csv, read_manifest
from .errors import ConfigError, HRVFLError
from .feature_map import FeatureMapConfig
from .loss import HLossParams
from .model import ModelConfig, fit_hrvfl_grid, fit_ridge, predict_signs
from .optimizer import NAGConfig
from .seeding import derive_seed

log = logging.getLogger(__name__)

MODEL_FAMILIES = ("hrvfl", "rvfl", "rvfl_wodl")
SWEEP_NOISE_RATES = (0.05, 0.10, 0.20, 0.30, 0.40)
THREADS_ENV = "HRVFL_THREADS"
RESULTS_FILE = "results.jsonl"
TABLE_FILE = "table.txt"
TIMINGS_FILE = "timings.jsonl"


@dataclass(frozen=True)
class Grid:
    C: tuple = tuple(10.0**k for k in range(-3, 4))
    lam: tuple = (0.5, 1.0, 2.0)
    a: tuple = (0.5, 1.0, 2.0)
    eps: tuple = (0.0, 0.1, 0.5)
    hidden: tuple = (50, 100, 200)
    activation: tuple = ("sigmoid",)

    def __post_init__(self):
        for name in ("C", "lam", "a", "eps", "hidden", "activation"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ConfigError(f"grid axis {name!r} is empty")
            object.__setattr__(self, name, vals)
        # validate every value once up front
        for c in self.C:
            ModelConfig(C=float(c))
        for lam, a, eps in itertools.product(self.lam, self.a, self.eps):
            HLossParams(float(lam), float(a), float(eps))
        for h, act in self.feature_points():
            FeatureMapConfig(h, act)

    def feature_points(self) -> list[tuple[int, str]]:
        return [(int(h), str(act)) for h, act in itertools.product(self.hidden, self.activation)]

    def loss_points(self) -> list[tuple[float, HLossParams]]:
        return [
            (float(c), HLossParams(float(lam), float(a), float(eps)))
            for c, lam, a, eps in itertools.product(self.C, self.lam, self.a, self.eps)
        ]

    def points(self, family: str) -> list[dict]:
        """Grid points of one family in grid-index order."""
        out = []
        for h, act in self.feature_points():
            if family == "hrvfl":
                for c, p in self.loss_points():
                    out.append({"C": c, "lam": p.lam, "a": p.a, "eps": p.eps, "hidden": h, "activation": act})
            else:
                for c in self.C:
                    out.append({"C": float(c), "hidden": h, "activation": act})
        return out


@dataclass(frozen=True)
class DatasetRef:
    name: str
    path: str
    label_column: Union[int, str] = -1
    header: bool = False
    delimiter: str = ","

    def load(self) -> Dataset:
        return load_csv(self.path, self.label_column, self.header, self.delimiter, name=self.name)


@dataclass(frozen=True)
class ExperimentSpec:
    datasets: tuple
    models: tuple = MODEL_FAMILIES
    grid: Grid = field(default_factory=Grid)
    folds: int = 5
    noise_rates: tuple = (0.0,)
    seed: int = 0
    output: Optional[str] = None
    nag: NAGConfig = field(default_factory=NAGConfig)
    weight_scale: float = 1.0
    warm_start: bool = False
    step_scaling: bool = False

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "noise_rates", tuple(float(r) for r in self.noise_rates))
        if not self.datasets:
            raise ConfigError("no datasets given")
        unknown = set(self.models) - set(MODEL_FAMILIES)
        if unknown or not self.models:
            raise ConfigError(f"unknown model families {sorted(unknown)}; choose from {MODEL_FAMILIES}")
        if not self.noise_rates or any(not 0.0 <= r < 1.0 for r in self.noise_rates):
            raise ConfigError(f"noise rates must lie in [0, 1): {self.noise_rates}")
        if int(self.folds) != self.folds or self.folds < 2:
            raise ConfigError(f"folds must be an integer >= 2, got {self.folds}")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be unique")


@dataclass
class ResultRow:
    """Cross-validated score of one grid point.

    ``std`` is the population standard deviation (``ddof=0``) of
    ``fold_accuracies``. Failed runs carry ``error`` and no accuracies.
    """

    dataset: str
    model: str
    grid_index: int
    params: dict
    noise_rate: float
    fold_accuracies: list
    mean: float = math.nan
    std: float = math.nan
    wall_time: float = 0.0
    error: Optional[str] = None
    best: bool = False

    def __post_init__(self):
        if self.fold_accuracies and self.error is None:
            acc = np.asarray(self.fold_accuracies, dtype=np.float64)
            self.mean = float(np.mean(acc))
            self.std = float(np.std(acc))

    @property
    def key(self) -> tuple:
        return (self.dataset, self.model, self.noise_rate, self.grid_index)

    def to_record(self) -> dict:
        d = asdict(self)
        d.pop("wall_time")
        for k in ("mean", "std"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d

    @classmethod
    def from_record(cls, d: dict) -> "ResultRow":
        d = dict(d)
        for k in ("mean", "std"):
            if d.get(k) is None:
                d[k] = math.nan
        return cls(**d)


# ---------------------------------------------------------------- fold worker


def _fold_task(args) -> dict:
    """Fit all grid points on one fold; returns {(model, grid_index): (acc, secs)}."""
    ds, spec, rate, fold, train_idx, test_idx = args
    name = ds.name
    stats = fit_minmax(ds.X[train_idx])
    Xtr, Xte = stats.transform(ds.X[train_idx]), stats.transform(ds.X[test_idx])
    ytr, _ = flip_labels(ds.y[train_idx], rate, derive_seed(spec.seed, name, "noise", fold, rate))
    yte = ds.y[test_idx]
    out: dict = {}
    n_loss = len(spec.grid.loss_points())
    n_c = len(spec.grid.C)

    for fi, (hidden, act) in enumerate(spec.grid.feature_points()):
        fcfg = FeatureMapConfig(
            hidden, act, spec.weight_scale, derive_seed(spec.seed, name, "features", fold, rate, fi)
        )
        if "hrvfl" in spec.models:
            nag = replace(spec.nag, seed=derive_seed(spec.seed, name, "batches", fold, rate, fi))
            base = ModelConfig(
                feature=fcfg, nag=nag, warm_start=spec.warm_start, step_scaling=spec.step_scaling
            )
            t0 = time.perf_counter()
            try:
                models = fit_hrvfl_grid(Xtr, ytr, base, spec.grid.loss_points())
                err = None
            except HRVFLError as exc:
                models, err = [], f"{type(exc).__name__}: {exc}"
            dt = (time.perf_counter() - t0) / n_loss
            for li in range(n_loss):
                gi = fi * n_loss + li
                if err is not None:
                    out[("hrvfl", gi)] = (err, dt)
                elif not models[li].converged:
                    out[("hrvfl", gi)] = ("DivergenceError: iterate became non-finite", dt)
                else:
                    out[("hrvfl", gi)] = (float(np.mean(predict_signs(models[li], Xte) == yte)), dt)
        for family, direct in (("rvfl", True), ("rvfl_wodl", False)):
            if family not in spec.models:
                continue
            for ci, c in enumerate(spec.grid.C):
                t0 = time.perf_counter()
                try:
                    m = fit_ridge(Xtr, ytr, ModelConfig(C=float(c), loss="squared", feature=fcfg, direct_links=direct))
                    res = float(np.mean(predict_signs(m, Xte) == yte))
                except HRVFLError as exc:
                    res = f"{type(exc).__name__}: {exc}"
                out[(family, fi * n_c + ci)] = (res, time.perf_counter() - t0)
    return out


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _error_rows(name: str, spec: ExperimentSpec, message: str) -> list[ResultRow]:
    return [
        ResultRow(name, family, -1, {}, rate, [], error=message)
        for family in spec.models
        for rate in spec.noise_rates
    ]


def run_experiment(spec: ExperimentSpec, threads: Optional[int] = None) -> list[ResultRow]:
    """Run the full protocol and return every row, best points flagged.

    Rows are sorted by ``(dataset, model, noise_rate, grid_index)``. When
    ``spec.output`` is set the rows, a rendered table and a timing sidecar
    are written there. Failures of a single dataset become error rows.
    """
    threads = _threads() if threads is None else threads
    rows: list[ResultRow] = []
    tasks, meta = [], []
    for ref in spec.datasets:
        try:
            ds = ref if isinstance(ref, Dataset) else ref.load()
            kf = kfold_split(ds.y, spec.folds, derive_seed(spec.seed, ds.name, "folds"))
        except HRVFLError as exc:
            log.warning("dataset %s failed: %s", ref.name, exc)
            rows.extend(_error_rows(ref.name, spec, f"{type(exc).__name__}: {exc}"))
            continue
        for rate in spec.noise_rates:
            for fold, (tr, te) in enumerate(kf):
                tasks.append((ds, spec, rate, fold, tr, te))
                meta.append((ds.name, rate, fold))

    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_fold_task, tasks))
    else:
        results = [_fold_task(t) for t in tasks]

    collected: dict = {}
    for (name, rate, fold), res in zip(meta, results):
        for (family, gi), (acc, dt) in res.items():
            collected.setdefault((name, family, rate, gi), {})[fold] = (acc, dt)

    points = {family: spec.grid.points(family) for family in spec.models}
    for (name, family, rate, gi), per_fold in collected.items():
        folds = [per_fold[f] for f in sorted(per_fold)]
        errors = [a for a, _ in folds if isinstance(a, str)]
        wall = float(sum(dt for _, dt in folds))
        if errors:
            row = ResultRow(name, family, gi, points[family][gi], rate, [], wall_time=wall, error=errors[0])
        else:
            row = ResultRow(name, family, gi, points[family][gi], rate, [a for a, _ in folds], wall_time=wall)
        rows.append(row)

    select_best(rows)
    rows.sort(key=lambda r: r.key)
    if spec.output:
        write_results(rows, spec.output)
    return rows


def select_best(rows: Sequence[ResultRow]) -> None:
    """Flag the highest-mean row per (dataset, model, rate).

    Ties go to the smaller C, then the smaller lambda, then the lower grid
    index.
    """
    groups: dict = {}
    for r in rows:
        r.best = False
        if r.error is None:
            groups.setdefault((r.dataset, r.model, r.noise_rate), []).append(r)
    for group in groups.values():
        winner = min(
            group,
            key=lambda r: (-r.mean, r.params.get("C", 0.0), r.params.get("lam", 0.0), r.grid_index),
        )
        winner.best = True


# ---------------------------------------------------------------- reporting


@dataclass(frozen=True)
class SummaryRow:
    model: str
    avg_acc: float
    avg_std: float
    avg_rank: float
    n: int


def _rank_desc(values: Sequence[float]) -> list[float]:
    """Rank 1 = largest; ties share the average rank."""
    order = sorted(range(len(values)), key=lambda i: -values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def summarize(rows: Sequence[ResultRow]) -> list[SummaryRow]:
    """Per-model average accuracy, average std and average rank.

    Only best-flagged rows are used when any row is flagged. Each
    (dataset, noise rate) pair is one unit: models are ranked inside it
    and the per-model averages are plain means over units.
    """
    rows = [r for r in rows if r.error is None]
    if any(r.best for r in rows):
        rows = [r for r in rows if r.best]
    if not rows:
        raise ConfigError("nothing to summarize")
    units: dict = {}
    for r in rows:
        units.setdefault((r.dataset, r.noise_rate), {})[r.model] = r
    accs: dict = {}
    stds: dict = {}
    ranks: dict = {}
    for unit in units.values():
        models = sorted(unit)
        rk = _rank_desc([unit[m].mean for m in models])
        for m, k in zip(models, rk):
            accs.setdefault(m, []).append(unit[m].mean)
            stds.setdefault(m, []).append(unit[m].std)
            ranks.setdefault(m, []).append(k)
    return [
        SummaryRow(m, float(np.mean(accs[m])), float(np.mean(stds[m])), float(np.mean(ranks[m])), len(accs[m]))
        for m in sorted(accs)
    ]


def _pct(mean: float, std: float) -> str:
    return f"{100 * mean:.2f}±{100 * std:.2f}"


def render_table(rows: Sequence[ResultRow]) -> str:
    """Plain-text table of the best rows per dataset and noise rate."""
    best = [r for r in rows if r.best]
    models = sorted({r.model for r in best}, key=lambda m: (MODEL_FAMILIES + (m,)).index(m))
    cells = {(r.dataset, r.noise_rate, r.model): r for r in best}
    header = ["Dataset", "Noise"] + [f"{m} Acc.±Std." for m in models]
    body = []
    for name in sorted({r.dataset for r in best}):
        for rate in sorted({r.noise_rate for r in best if r.dataset == name}):
            line = [name, f"{100 * rate:g}%"]
            for m in models:
                r = cells.get((name, rate, m))
                line.append(_pct(r.mean, r.std) if r else "-")
            body.append(line)
    if best:
        summary = summarize(best)
        by_model = {s.model: s for s in summary}
        body.append(["Avg. Acc.±Avg. Std.", ""] + [_pct(by_model[m].avg_acc, by_model[m].avg_std) for m in models])
        body.append(["Avg. Rank", ""] + [f"{by_model[m].avg_rank:.2f}" for m in models])
    errors = sorted({(r.dataset, r.error) for r in rows if r.error and r.grid_index < 0})
    widths = [max(len(str(x[i])) for x in [header] + body) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header] + body]
    lines += [f"error: {name}: {msg}" for name, msg in errors]
    return "\n".join(lines) + "\n"


def write_results(rows: Sequence[ResultRow], outdir) -> None:
    """Write ``results.jsonl`` and ``table.txt`` (byte-stable) plus timings."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(rows, key=lambda r: r.key)
    with open(out / RESULTS_FILE, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_record(), sort_keys=True) + "\n")
    (out / TABLE_FILE).write_text(render_table(rows), encoding="utf-8")
    with open(out / TIMINGS_FILE, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps({"key": list(r.key), "wall_time": r.wall_time}) + "\n")


def read_results(path) -> list[ResultRow]:
    with open(path, encoding="utf-8") as fh:
        return [ResultRow.from_record(json.loads(line)) for line in fh if line.strip()]


# ---------------------------------------------------------------- config files


def spec_from_dict(d: dict, base_dir: Union[str, Path] = ".") -> ExperimentSpec:
    """Build a spec from a parsed JSON config.

    ``datasets`` is a list of ``{name, path, label_column, header,
    delimiter}`` entries; alternatively ``manifest`` points at a manifest
    file. Relative paths resolve against ``base_dir``.
    """
    base_dir = Path(base_dir)
    refs = []
    if "manifest" in d:
        for rec in read_manifest(base_dir / d["manifest"]):
            refs.append(DatasetRef(rec["name"], rec["path"], rec.get("label_column", -1),
                                   rec.get("header", False), rec.get("delimiter", ",")))
    for entry in d.get("datasets", []):
        path = Path(entry["path"])
        if not path.is_absolute():
            path = base_dir / path
        refs.append(DatasetRef(entry.get("name", path.stem), str(path), entry.get("label_column", -1),
                               entry.get("header", False), entry.get("delimiter", ",")))
    grid = Grid(**{k: tuple(v) for k, v in d.get("grid", {}).items()})
    output = d.get("output")
    if output is not None and not Path(output).is_absolute():
        output = str(base_dir / output)
    known = {"datasets", "manifest", "grid", "output", "nag", "models", "folds", "noise_rates",
             "seed", "weight_scale", "warm_start", "step_scaling"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    return ExperimentSpec(
        datasets=tuple(refs),
        models=tuple(d.get("models", MODEL_FAMILIES)),
        grid=grid,
        folds=int(d.get("folds", 5)),
        noise_rates=tuple(d.get("noise_rates", (0.0,))),
        seed=int(d.get("seed", 0)),
        output=output,
        nag=NAGConfig(**d.get("nag", {})),
        weight_scale=float(d.get("weight_scale", 1.0)),
        warm_start=bool(d.get("warm_start", False)),
        step_scaling=bool(d.get("step_scaling", False)),
    )


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return spec_from_dict(d, path.parent)
