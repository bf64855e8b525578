"""Config-driven replication experiments with deterministic output.

A run sweeps (sample size x replication x pipeline x evaluator), scoring
every fitted policy against a shared fresh-sample oracle, and emits one
row per cell.  Identical configs (including the seed) produce
byte-identical CSV output regardless of the worker count.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import jsonschema
import numpy as np

from .baselines import bc_kfold_cv, bootstrap_debias, jackknife_debias, kfold_cv, loocv
from .core import Dataset, evaluate_empirical, oracle_true_performance
from .criteria import alo_estimate
from .errors import ConfigError, FitFailure
from .problems import build_problem, list_problems
from .seeding import child_seed, rng_stream  # noqa: F401  (rng_stream is public API here)

CSV_HEADER = "problem,pipeline,evaluator,n,d_xi,rep,a_hat,a_oracle,seconds,seed"

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["problem", "n", "replications", "evaluators", "seed"],
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "params": {"type": "object"},
            },
        },
        "n": {
            "oneOf": [
                {"type": "integer", "minimum": 2},
                {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 2},
                    "minItems": 1,
                },
            ]
        },
        "replications": {"type": "integer", "minimum": 1},
        "evaluators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": True,
                "properties": {"name": {"type": "string"}},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"m": {"type": "integer", "minimum": 1}},
        },
        "seed": {"type": "integer"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "format": {"type": "string", "enum": ["csv", "json"]},
            },
        },
        "jobs": {"type": "integer", "minimum": 1},
    },
}

EVALUATOR_NAMES = (
    "empirical",
    "oic",
    "kfold",
    "bc_kfold",
    "loocv",
    "alo",
    "bootstrap",
    "jackknife",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description."""

    problem_name: str
    problem_params: dict
    n_values: tuple
    replications: int
    evaluators: tuple
    oracle_m: int
    seed: int
    output_path: Optional[str] = None
    output_format: str = "csv"
    jobs: int = 1

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(exc.message, field=path) from exc
        name = raw["problem"]["name"]
        if name not in list_problems():
            raise ConfigError(
                f"unknown problem {name!r}; available: {', '.join(list_problems())}",
                field="problem.name",
            )
        for i, ev in enumerate(raw["evaluators"]):
            if ev["name"] not in EVALUATOR_NAMES:
                raise ConfigError(
                    f"unknown evaluator {ev['name']!r}; available: {', '.join(EVALUATOR_NAMES)}",
                    field=f"evaluators.{i}.name",
                )
        n_raw = raw["n"]
        n_values = tuple(n_raw) if isinstance(n_raw, list) else (n_raw,)
        output = raw.get("output", {})
        return ExperimentConfig(
            problem_name=name,
            problem_params=dict(raw["problem"].get("params", {})),
            n_values=n_values,
            replications=raw["replications"],
            evaluators=tuple(dict(ev) for ev in raw["evaluators"]),
            oracle_m=raw.get("oracle", {}).get("m", 100_000),
            seed=raw["seed"],
            output_path=output.get("path"),
            output_format=output.get("format", "csv"),
            jobs=raw.get("jobs", 1),
        )

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return ExperimentConfig.from_dict(json.load(fh))


@dataclass(frozen=True)
class ResultRow:
    """One evaluator score for one fitted pipeline in one replication."""

    problem: str
    pipeline: str
    evaluator: str
    n: int
    d_xi: int
    rep: int
    a_hat: float
    a_oracle: float
    seconds: float
    seed: int


def _evaluator_label(spec: dict) -> str:
    name = spec["name"]
    if name == "kfold":
        return f"{spec.get('k', 5)}-cv"
    if name == "bc_kfold":
        return f"bc-{spec.get('k', 5)}-cv"
    if name == "bootstrap":
        return f"bootstrap-{spec.get('b_t', 50)}"
    return name


def _score(spec: dict, pipeline, policy, data: Dataset, rep_seed: int) -> float:
    name = spec["name"]
    if name == "empirical":
        return evaluate_empirical(policy, pipeline.cost, data)
    if name == "oic":
        if pipeline.oic is None:
            raise ConfigError(f"pipeline {pipeline.label!r} has no oic evaluator wired")
        return pipeline.oic(policy, data).a_hat
    if name == "kfold":
        return kfold_cv(pipeline, data, spec.get("k", 5), seed=rep_seed)
    if name == "bc_kfold":
        return bc_kfold_cv(pipeline, data, spec.get("k", 5), seed=rep_seed)
    if name == "loocv":
        return loocv(pipeline, data)
    if name == "alo":
        if pipeline.influence is None:
            raise ConfigError(f"pipeline {pipeline.label!r} has no influence wired")
        return alo_estimate(policy, pipeline.cost, pipeline.influence(policy, data), data)
    if name == "bootstrap":
        return bootstrap_debias(pipeline, data, spec.get("b_t", 50), seed=rep_seed)
    if name == "jackknife":
        return jackknife_debias(pipeline, data)
    raise ConfigError(f"unknown evaluator {name!r}")


def _run_rep(args) -> list:
    (name, params, seed, n, rep, evaluators, oracle_m) = args
    problem = build_problem(name, **params)
    data = problem.dgp(child_seed(seed, "data", n, rep), n)
    fresh_seed = child_seed(seed, "oracle", n, rep)
    rows = []
    for label in sorted(problem.pipelines):
        pipeline = problem.pipelines[label]
        try:
            policy = pipeline.fit(data)
        except Exception as exc:
            raise FitFailure(f"{label} failed at rep {rep}: {exc}", index=rep) from exc
        a_oracle, _ = oracle_true_performance(
            policy, pipeline.cost, problem.dgp, oracle_m, fresh_seed
        )
        for spec in evaluators:
            rep_seed = child_seed(seed, "eval", n, rep, label, spec["name"])
            start = time.perf_counter()
            a_hat = _score(spec, pipeline, policy, data, rep_seed)
            elapsed = time.perf_counter() - start
            if not np.isfinite(a_hat):
                raise FitFailure(
                    f"evaluator {spec['name']} returned non-finite value at rep {rep}"
                )
            rows.append(
                ResultRow(
                    problem=name,
                    pipeline=label,
                    evaluator=_evaluator_label(spec),
                    n=n,
                    d_xi=data.d_xi,
                    rep=rep,
                    a_hat=float(a_hat),
                    a_oracle=float(a_oracle),
                    seconds=elapsed,
                    seed=seed,
                )
            )
    return rows


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple
    summary: dict = field(default_factory=dict)


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = None) -> ExperimentResult:
    """Run the configured replication study.

    Deterministic given the config (including seed): rows are sorted by
    (n, rep, pipeline, evaluator) so the worker count never changes the
    output.  The summary aggregates, per (pipeline, evaluator, n), the
    mean estimate, the mean bias estimate relative to the empirical
    value, and the oracle bias with standard errors.
    """
    jobs = jobs or config.jobs
    tasks = [
        (
            config.problem_name,
            config.problem_params,
            config.seed,
            n,
            rep,
            list(config.evaluators),
            config.oracle_m,
        )
        for n in config.n_values
        for rep in range(config.replications)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_rep, tasks))
    else:
        chunks = [_run_rep(task) for task in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.n, r.rep, r.pipeline, r.evaluator))
    return ExperimentResult(rows=tuple(rows), summary=summarize(rows))


def summarize(rows) -> dict:
    """Per (pipeline, evaluator, n) means, bias estimates, and timings."""
    groups: dict = {}
    empirical: dict = {}
    oracle: dict = {}
    for row in rows:
        groups.setdefault((row.pipeline, row.evaluator, row.n), []).append(row)
        if row.evaluator == "empirical":
            empirical[(row.pipeline, row.n, row.rep)] = row.a_hat
        oracle[(row.pipeline, row.n, row.rep)] = row.a_oracle
    out = {}
    for (pipeline, evaluator, n), group in sorted(groups.items()):
        values = np.array([r.a_hat for r in group])
        oracles = np.array([r.a_oracle for r in group])
        entry = {
            "mean": float(values.mean()),
            "stderr": float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0,
            "mean_oracle": float(oracles.mean()),
            "mean_seconds": float(np.mean([r.seconds for r in group])),
            "count": len(group),
        }
        emp = [
            empirical.get((pipeline, n, r.rep))
            for r in group
            if (pipeline, n, r.rep) in empirical
        ]
        if len(emp) == len(group) and emp:
            bias_est = values - np.array(emp)
            oracle_bias = oracles - np.array(emp)
            entry["mean_bias_estimate"] = float(bias_est.mean())
            entry["stderr_bias_estimate"] = (
                float(bias_est.std(ddof=1) / np.sqrt(len(bias_est))) if len(bias_est) > 1 else 0.0
            )
            entry["oracle_bias"] = float(oracle_bias.mean())
            entry["stderr_oracle_bias"] = (
                float(oracle_bias.std(ddof=1) / np.sqrt(len(oracle_bias)))
                if len(oracle_bias) > 1
                else 0.0
            )
        out[f"{pipeline}/{evaluator}/n={n}"] = entry
    return out


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def emit(rows, fmt: str, path) -> None:
    """Write rows as CSV (fixed header) or JSON (array of row objects).

    Both formats carry 12 significant digits, UTF-8, line-feed newlines.
    """
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown output format {fmt!r}", field="output.format")
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in rows:
            lines.append(
                ",".join(
                    [
                        r.problem,
                        r.pipeline,
                        r.evaluator,
                        str(r.n),
                        str(r.d_xi),
                        str(r.rep),
                        _fmt(r.a_hat),
                        _fmt(r.a_oracle),
                        _fmt(r.seconds),
                        str(r.seed),
                    ]
                )
            )
        payload = "\n".join(lines) + "\n"
    else:
        records = []
        for r in rows:
            rec = asdict(r)
            rec["a_hat"] = float(_fmt(r.a_hat))
            rec["a_oracle"] = float(_fmt(r.a_oracle))
            rec["seconds"] = float(_fmt(r.seconds))
            records.append(rec)
        payload = json.dumps(records, indent=2) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(payload)


def parse_csv(path) -> list:
    """Read back an emitted CSV into ResultRow objects."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header: {header}")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            rows.append(
                ResultRow(
                    problem=parts[0],
                    pipeline=parts[1],
                    evaluator=parts[2],
                    n=int(parts[3]),
                    d_xi=int(parts[4]),
                    rep=int(parts[5]),
                    a_hat=float(parts[6]),
                    a_oracle=float(parts[7]),
                    seconds=float(parts[8]),
                    seed=int(parts[9]),
                )
            )
    return rows
