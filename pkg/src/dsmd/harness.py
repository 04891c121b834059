"""
Monte Carlo experiment runner.

An :class:`ExperimentConfig` fixes the problem family, network and algorithm.
:func:`run_experiment` draws one problem instance from ``master_seed``, runs
``realizations`` independent noisy runs (each with its own noise and
link-activation streams), and collects one metric row per
``(realization, checkpoint, node)``. Results are written as CSV (rows) and
JSON (summary).
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import yaml

from .algorithms import (
    run_dsmd,
    run_epoch_dsmd,
    theorem1_bound,
    theorem2_bound,
    theorem_constants,
)
from .geometry import ConstraintSet, GeometryKind, MirrorGeometry
from .network import MixingSchedule
from .problem import global_optimum, random_instance

log = logging.getLogger(__name__)

ALGORITHMS = ("dsmd", "epoch-dsmd", "dsps")
CONSTRAINTS = ("simplex", "box")
GEOMETRIES = ("auto", "euclidean", "entropy")
CSV_COLUMNS = ["realization", "t", "node", "avg_error_sq", "last_error_sq", "disagreement", "eta"]

# field name -> section of the config file
SECTIONS = {
    "algorithm": None,
    "geometry": None,
    "constraint": "problem",
    "d": "problem",
    "sigma": "problem",
    "lower": "problem",
    "upper": "problem",
    "m": "network",
    "topology": "network",
    "activation": "network",
    "B": "network",
    "T": "run",
    "realizations": "run",
    "master_seed": "run",
    "checkpoints": "run",
    "init": "run",
    "output": "run",
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def powers_of_two(T: int) -> list[int]:
    return [2**k for k in range(int(math.log2(T)) + 1)] if T >= 1 else []


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment.

    ``geometry="auto"`` picks negative entropy on the simplex and the
    Euclidean potential on a box (``dsps`` is always Euclidean).
    ``checkpoints=None`` records powers of two up to ``T``.
    """

    algorithm: str = "epoch-dsmd"
    constraint: str = "box"
    m: int = 40
    d: int = 10
    sigma: float = 0.25
    T: int = 4096
    realizations: int = 50
    activation: float = 0.5
    B: int = 2
    master_seed: int = 0
    checkpoints: Optional[list] = None
    output: Optional[str] = None
    geometry: str = "auto"
    lower: float = -1.0
    upper: float = 1.0
    topology: str = "ring"
    init: str = "phi_min"

    def errors(self) -> list[str]:
        errs = []
        if self.algorithm not in ALGORITHMS:
            errs.append(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.constraint not in CONSTRAINTS:
            errs.append(f"constraint must be one of {CONSTRAINTS}, got {self.constraint!r}")
        if self.geometry not in GEOMETRIES:
            errs.append(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        for name in ("m", "d", "T", "realizations", "B"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                errs.append(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            errs.append(f"master_seed must be a nonnegative integer, got {self.master_seed!r}")
        if not (isinstance(self.sigma, (int, float)) and self.sigma >= 0):
            errs.append(f"sigma must be a nonnegative number, got {self.sigma!r}")
        if not (isinstance(self.activation, (int, float)) and 0 < self.activation <= 1):
            errs.append(f"activation must lie in (0, 1], got {self.activation!r}")
        if self.constraint == "box" and not self.lower < self.upper:
            errs.append(f"box needs lower < upper, got {self.lower} and {self.upper}")
        if self.init not in ("phi_min", "random"):
            errs.append(f"init must be 'phi_min' or 'random', got {self.init!r}")
        if self.algorithm == "epoch-dsmd" and isinstance(self.T, int) and self.T < 4:
            errs.append(f"epoch-dsmd needs T >= 4 (first epoch length), got {self.T}")
        if self.checkpoints is not None and isinstance(self.T, int):
            bad = [c for c in self.checkpoints if not (isinstance(c, (int, np.integer)) and 1 <= c <= self.T)]
            if bad:
                errs.append(f"checkpoints must lie in [1, T={self.T}], offending: {bad}")
        if self.algorithm in ALGORITHMS and self.constraint in CONSTRAINTS and self.geometry in GEOMETRIES:
            if self.algorithm == "dsps" and self.geometry == "entropy":
                errs.append(
                    f"unsupported pairing: dsps is Euclidean only, got entropy geometry "
                    f"with {self.constraint} constraint"
                )
            elif self.mirror_geometry().is_entropy and self.constraint == "box":
                errs.append("unsupported pairing: entropy geometry with box constraint")
        return errs

    def validate(self) -> "ExperimentConfig":
        errs = self.errors()
        if errs:
            raise ConfigError(errs)
        return self

    def mirror_geometry(self) -> MirrorGeometry:
        kind = self.geometry
        if self.algorithm == "dsps":
            kind = "euclidean" if kind == "auto" else kind
        elif kind == "auto":
            kind = "entropy" if self.constraint == "simplex" else "euclidean"
        return MirrorGeometry(GeometryKind(kind))

    def constraint_set(self) -> ConstraintSet:
        if self.constraint == "simplex":
            return ConstraintSet.simplex(self.d)
        return ConstraintSet.box(self.lower, self.upper, self.d)

    def checkpoint_list(self) -> list[int]:
        if self.checkpoints is None:
            return powers_of_two(self.T)
        return sorted(set(int(c) for c in self.checkpoints))

    def schedule(self, seed: int) -> MixingSchedule:
        return MixingSchedule(self.m, self.topology, self.activation, self.B, seed)

    # file form: nested sections
    def to_dict(self) -> dict:
        flat = asdict(self)
        out: dict = {}
        for name, section in SECTIONS.items():
            value = flat[name]
            if section is None:
                out[name] = value
            else:
                out.setdefault(section, {})[name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        flat = {}
        known = {f.name for f in fields(cls)}
        unknown = []
        for key, value in data.items():
            if isinstance(value, dict):
                for k, v in value.items():
                    if k in known:
                        flat[k] = v
                    else:
                        unknown.append(f"{key}.{k}")
            elif key in known:
                flat[key] = value
            else:
                unknown.append(key)
        if unknown:
            raise ConfigError([f"unknown config keys: {unknown}"])
        return cls(**flat)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()) or {})


def derive_seeds(master_seed: int, realization: int) -> tuple[int, int]:
    """Noise and network seeds of one realization, hashed from the master seed."""
    noise, network = np.random.SeedSequence((int(master_seed), int(realization))).generate_state(2)
    return int(noise), int(network)


def data_seed(master_seed: int) -> int:
    return int(np.random.SeedSequence((int(master_seed), 2**31)).generate_state(1)[0])


def build_instance(config: ExperimentConfig):
    geom = config.mirror_geometry()
    cset = config.constraint_set()
    instance = random_instance(config.m, cset, geom, config.sigma, seed=data_seed(config.master_seed))
    return instance, geom


def run_realization(config: ExperimentConfig, instance, geom, realization: int) -> np.ndarray:
    """Metric rows of one realization, shape ``(len(checkpoints) * m, 7)``."""
    noise_seed, net_seed = derive_seeds(config.master_seed, realization)
    sched = config.schedule(net_seed)
    x_star = global_optimum(instance)
    cps = config.checkpoint_list()
    rows = []
    node = np.arange(config.m)

    def hook(s):
        rows.append(
            np.column_stack(
                [
                    np.full(config.m, realization),
                    np.full(config.m, s.t),
                    node,
                    np.sum((s.output - x_star) ** 2, axis=1),
                    np.sum((s.x - x_star) ** 2, axis=1),
                    s.disagreement,
                    np.full(config.m, s.eta),
                ]
            )
        )

    if config.algorithm == "epoch-dsmd":
        res = run_epoch_dsmd(instance, geom, sched, config.T, seed=noise_seed, hook=hook, checkpoints=cps)
        # rounds past the last complete epoch are never run; report its output
        done = res.rounds
        for t in (c for c in cps if c > done):
            rows.append(
                np.column_stack(
                    [
                        np.full(config.m, realization),
                        np.full(config.m, t),
                        node,
                        np.sum((res.x - x_star) ** 2, axis=1),
                        np.sum((res.x_last - x_star) ** 2, axis=1),
                        np.full(config.m, np.nan),
                        np.full(config.m, np.nan),
                    ]
                )
            )
    else:
        run_dsmd(instance, geom, sched, config.T, seed=noise_seed, x0=config.init,
                 hook=hook, checkpoints=cps)
    return np.concatenate(rows)


def _worker(args):
    config, instance, geom, r = args
    return run_realization(config, instance, geom, r)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: pd.DataFrame
    summary: dict
    instance: object = field(repr=False, default=None)
    constants: object = field(repr=False, default=None)


def to_frame(rows: np.ndarray) -> pd.DataFrame:
    df = pd.DataFrame(rows, columns=CSV_COLUMNS)
    for col in ("realization", "t", "node"):
        df[col] = df[col].astype(np.int64)
    return df.sort_values(["realization", "t", "node"], kind="stable").reset_index(drop=True)


def checkpoint_summary(metrics: pd.DataFrame, column: str = "avg_error_sq") -> pd.DataFrame:
    """Mean and standard error across realizations of the node-averaged error."""
    per_real = metrics.groupby(["t", "realization"])[column].mean()
    g = per_real.groupby(level="t")
    n = g.count()
    std = g.std(ddof=1).fillna(0.0)
    return pd.DataFrame({"mean": g.mean(), "stderr": std / np.sqrt(n), "n": n})


def run_experiment(config: ExperimentConfig, workers: int = 1, write: bool = True) -> ExperimentResult:
    """Run all realizations and aggregate.

    Writes ``<output>.csv`` and ``<output>.json`` when ``config.output`` is
    set and ``write`` is true.
    """
    config.validate()
    start = time.perf_counter()
    instance, geom = build_instance(config)
    jobs = [(config, instance, geom, r) for r in range(config.realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_worker, jobs))
    else:
        parts = [_worker(j) for j in jobs]
    metrics = to_frame(np.concatenate(parts))
    runtime = time.perf_counter() - start

    init = config.init if config.algorithm != "epoch-dsmd" else None
    consts = theorem_constants(instance, geom, config.schedule(0), x0=init)
    summ = checkpoint_summary(metrics)
    last = checkpoint_summary(metrics, "last_error_sq")
    bound_fn = theorem2_bound if config.algorithm == "epoch-dsmd" else theorem1_bound
    per_cp = []
    for t, row in summ.iterrows():
        per_cp.append(
            {
                "t": int(t),
                "mean": float(row["mean"]),
                "stderr": float(row["stderr"]),
                "last_iterate_mean": float(last.loc[t, "mean"]),
                "theorem_bound": float(bound_fn(consts, t)) if t >= 3 else None,
            }
        )
    fit = None
    model = "one_over_T" if config.algorithm == "epoch-dsmd" else "lnT_over_T"
    try:
        fit = asdict(rate_fit(metrics, model))
    except ValueError as exc:
        log.info("no rate fit: %s", exc)
    dis = None
    try:
        dis = asdict(disagreement_report(metrics, consts, geom.sigma_phi))
    except ValueError as exc:
        log.info("no disagreement report: %s", exc)
    summary = {
        "config": config.to_dict(),
        "constants": consts.as_dict(),
        "x_star": global_optimum(instance).tolist(),
        "checkpoints": per_cp,
        "fit": fit,
        "disagreement": dis,
        "runtime_seconds": runtime,
    }
    result = ExperimentResult(config, metrics, summary, instance, consts)
    if write and config.output:
        write_outputs(result, config.output)
    return result


def write_outputs(result: ExperimentResult, output) -> tuple[Path, Path]:
    base = Path(output)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    result.metrics.to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
    json_path.write_text(json.dumps(_jsonable(result.summary), indent=2) + "\n")
    return csv_path, json_path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def read_metrics(path) -> pd.DataFrame:
    return pd.read_csv(path)


@dataclass
class FitReport:
    """Least-squares fit of an error curve to a rate model.

    ``scaled`` is ``error * T`` at each checkpoint; ``scaled_growth`` is its
    maximum divided by its first value.
    """

    model: str
    coefficients: list
    r_squared: float
    checkpoints: list
    errors: list
    scaled: list
    max_scaled: float
    scaled_growth: float


def fit_rate(T, err, model: str = "one_over_T") -> FitReport:
    """Fit ``a / T`` or ``a ln(T) / T + b / T`` to ``err`` at horizons ``T``."""
    T = np.asarray(T, dtype=float)
    err = np.asarray(err, dtype=float)
    if T.shape != err.shape or T.ndim != 1:
        raise ValueError("T and err must be 1-d arrays of equal length")
    if len(T) < 4:
        raise ValueError(f"need at least 4 checkpoints, got {len(T)}")
    if T.min() <= 0 or T.max() / T.min() < 4:
        raise ValueError("checkpoints must span at least two octaves")
    if model == "one_over_T":
        X = (1.0 / T)[:, None]
    elif model == "lnT_over_T":
        X = np.column_stack([np.log(T) / T, 1.0 / T])
    else:
        raise ValueError(f"unknown model {model!r}")
    coef, *_ = np.linalg.lstsq(X, err, rcond=None)
    resid = err - X @ coef
    ss_tot = np.sum((err - err.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    scaled = err * T
    return FitReport(
        model=model,
        coefficients=coef.tolist(),
        r_squared=float(r2),
        checkpoints=T.astype(int).tolist(),
        errors=err.tolist(),
        scaled=scaled.tolist(),
        max_scaled=float(scaled.max()),
        scaled_growth=float(scaled.max() / scaled[0]),
    )


def rate_fit(metrics: pd.DataFrame, model: str = "one_over_T", column: str = "avg_error_sq",
             checkpoints=None) -> FitReport:
    """Fit the Monte Carlo mean of ``column`` over checkpoints to ``model``."""
    summ = checkpoint_summary(metrics.dropna(subset=[column]), column)
    if checkpoints is not None:
        summ = summ.loc[[t for t in checkpoints]]
    summ = summ[summ.index >= 2]
    return fit_rate(summ.index.to_numpy(), summ["mean"].to_numpy(), model)


@dataclass
class DisagreementReport:
    """Monte Carlo disagreement sums against their bound, per reference node.

    ``lhs[j]`` is the mean over realizations of
    ``sum_t sum_i ||x_{i,t} - x_{j,t}||``; ``ratio`` is ``max_j lhs[j] / rhs``.
    """

    rounds: int
    lhs: list
    rhs: float
    ratio: float


def disagreement_bound(constants, eta_sum: float, sigma_phi: float = 1.0) -> float:
    """``m (2ab/(1-b) + 1) sum_i ||x_{i,1}|| + 2ab m^2 G / ((1-b) sigma_phi) sum_t eta_t``."""
    a, b, m, G = constants.alpha, constants.beta, constants.m, constants.G
    mix = 2.0 * a * b / (1.0 - b)
    return m * (mix + 1.0) * constants.init_norm_sum + mix * m * m * G / sigma_phi * eta_sum


def disagreement_report(metrics: pd.DataFrame, constants, sigma_phi: float = 1.0) -> DisagreementReport:
    """Compare accumulated disagreement with its bound.

    Needs the metrics of every round ``1..T`` (checkpoints covering all
    rounds), since the bound concerns the sum over rounds.
    """
    df = metrics.dropna(subset=["disagreement"])
    ts = np.unique(df["t"].to_numpy())
    if len(ts) == 0 or ts[0] != 1 or len(ts) != ts[-1]:
        raise ValueError("disagreement report needs metrics for every round 1..T")
    eta_sum = float(df.groupby("t")["eta"].first().sum())
    per_node = df.groupby(["realization", "node"])["disagreement"].sum().groupby(level="node").mean()
    rhs = disagreement_bound(constants, eta_sum, sigma_phi)
    lhs = per_node.to_numpy()
    return DisagreementReport(rounds=int(ts[-1]), lhs=lhs.tolist(), rhs=float(rhs),
                              ratio=float(lhs.max() / rhs) if rhs > 0 else (0.0 if lhs.max() == 0 else math.inf))
