"""Multi-seed sweep harness.

A sweep is the cartesian product of models, operations, range pairs,
task-shape parameters and seeds. Each combination becomes a trial with a
deterministic identity hash; results land in an append-only JSONL store,
so an interrupted sweep resumes by running exactly the missing trials.
Success thresholds are simulated once per task and cached on disk.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import ConfigError, DatasetSpec, Operation, RangeSpec
from .layers import ModelKind
from .metrics import DEFAULT_EPSILON, DEFAULT_N_SIM, SuccessThreshold, simulate_threshold
from .stats import MeanSummary, SummaryRow, summarize
from .training import AdamConfig, TrainConfig, run_trial

SCHEMA_VERSION = 1

_GROUP_FIELDS = ("model", "op", "d", "s", "o", "hidden", "interp", "extrap")


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _hash_hex(obj) -> str:
    return hashlib.sha256(_canonical(obj).encode("utf-8")).hexdigest()


def _hash_seed(obj) -> int:
    digest = hashlib.sha256(_canonical(obj).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdSettings:
    epsilon: float = DEFAULT_EPSILON
    n_sim: int = DEFAULT_N_SIM
    seed: int = 0

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "n_sim": self.n_sim, "seed": self.seed}


@dataclass(frozen=True)
class SweepConfig:
    models: tuple[ModelKind, ...]
    ops: tuple[Operation, ...]
    range_pairs: tuple[tuple[RangeSpec, RangeSpec], ...]
    input_sizes: tuple[int, ...] = (100,)
    subset_ratios: tuple[float, ...] = (0.25,)
    overlap_ratios: tuple[float, ...] = (0.5,)
    hidden_sizes: tuple[int, ...] = (2,)
    seeds: tuple[int, ...] = tuple(range(10))
    train: TrainConfig = field(default_factory=TrainConfig)
    threshold: ThresholdSettings = field(default_factory=ThresholdSettings)
    keep_traces: bool = False

    def __post_init__(self) -> None:
        for name in ("models", "ops", "range_pairs", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"sweep needs at least one entry in {name}")


def _strip_comment_keys(obj):
    """Drop every mapping key starting with '_' (comment convention)."""
    if isinstance(obj, dict):
        return {
            k: _strip_comment_keys(v) for k, v in obj.items() if not k.startswith("_")
        }
    if isinstance(obj, list):
        return [_strip_comment_keys(v) for v in obj]
    return obj


def sweep_config_from_json(data: dict) -> SweepConfig:
    data = _strip_comment_keys(data)
    models = tuple(ModelKind(m) for m in data["models"])
    ops = tuple(Operation(o) for o in data["ops"])
    pairs = tuple(
        (RangeSpec.parse(p["interp"]), RangeSpec.parse(p["extrap"]))
        for p in data["range_pairs"]
    )
    seeds = data.get("seeds", 10)
    if isinstance(seeds, int):
        seeds = tuple(range(seeds))
    else:
        seeds = tuple(int(s) for s in seeds)
    train_in = data.get("train", {})
    adam = AdamConfig(
        lr=float(train_in.get("lr", 0.001)),
        beta1=float(train_in.get("beta1", 0.9)),
        beta2=float(train_in.get("beta2", 0.999)),
        eps=float(train_in.get("adam_eps", 1e-8)),
    )
    train = TrainConfig(
        iterations=int(train_in.get("iterations", 5_000_000)),
        batch_size=int(train_in.get("batch_size", 128)),
        eval_every=int(train_in.get("eval_every", 1000)),
        eval_n=int(train_in.get("eval_n", 10_000)),
        adam=adam,
    )
    thr_in = data.get("threshold", {})
    threshold = ThresholdSettings(
        epsilon=float(thr_in.get("epsilon", DEFAULT_EPSILON)),
        n_sim=int(thr_in.get("n_sim", DEFAULT_N_SIM)),
        seed=int(thr_in.get("seed", 0)),
    )
    return SweepConfig(
        models=models,
        ops=ops,
        range_pairs=pairs,
        input_sizes=tuple(int(v) for v in data.get("input_sizes", [100])),
        subset_ratios=tuple(float(v) for v in data.get("subset_ratios", [0.25])),
        overlap_ratios=tuple(float(v) for v in data.get("overlap_ratios", [0.5])),
        hidden_sizes=tuple(int(v) for v in data.get("hidden_sizes", [2])),
        seeds=seeds,
        train=train,
        threshold=threshold,
        keep_traces=bool(data.get("keep_traces", False)),
    )


def load_sweep_config(path) -> SweepConfig:
    with open(path, encoding="utf-8") as fh:
        return sweep_config_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialDescriptor:
    model: ModelKind
    spec: DatasetSpec
    hidden_size: int
    seed_index: int
    trial_seed: int
    trial_id: str
    train: TrainConfig  # resolved: carries hidden_size and trial_seed


def _train_json(train: TrainConfig) -> dict:
    return {
        "iterations": train.iterations,
        "batch_size": train.batch_size,
        "eval_every": train.eval_every,
        "eval_n": train.eval_n,
        "lr": train.adam.lr,
        "beta1": train.adam.beta1,
        "beta2": train.adam.beta2,
        "adam_eps": train.adam.eps,
        "eps_layer": train.eps_layer,
    }


def _descriptor(
    config: SweepConfig,
    model: ModelKind,
    spec: DatasetSpec,
    hidden: int,
    seed_index: int,
) -> TrialDescriptor:
    identity = {
        "model": model.value,
        "task": spec.to_json(),
        "hidden": hidden,
        "seed_index": seed_index,
    }
    # The random streams depend only on the task identity, so the same
    # seed_index reproduces the same initialization under e.g. a longer
    # iteration budget. The store key also covers the training recipe.
    trial_seed = _hash_seed(identity)
    trial_id = _hash_hex(
        {
            **identity,
            "train": _train_json(config.train),
            "threshold": config.threshold.to_json(),
        }
    )[:16]
    train = replace(config.train, hidden_size=hidden, seed=trial_seed)
    return TrialDescriptor(
        model=model,
        spec=spec,
        hidden_size=hidden,
        seed_index=seed_index,
        trial_seed=trial_seed,
        trial_id=trial_id,
        train=train,
    )


def expand_sweep(
    config: SweepConfig,
) -> tuple[list[TrialDescriptor], list[tuple[dict, str]]]:
    """All trial descriptors, plus rejected combinations with reasons.

    A combination is rejected (not fatal) when its task geometry is
    impossible, e.g. subsets that cannot fit the input vector.
    """
    descriptors: list[TrialDescriptor] = []
    rejected: list[tuple[dict, str]] = []
    for model in config.models:
        for op in config.ops:
            for interp, extrap in config.range_pairs:
                for d in config.input_sizes:
                    for s in config.subset_ratios:
                        for o in config.overlap_ratios:
                            try:
                                spec = DatasetSpec(
                                    op=op,
                                    interp=interp,
                                    extrap=extrap,
                                    input_size=d,
                                    subset_ratio=s,
                                    overlap_ratio=o,
                                )
                            except ConfigError as exc:
                                combo = {
                                    "model": model.value,
                                    "op": op.value,
                                    "interp": interp.to_json(),
                                    "extrap": extrap.to_json(),
                                    "d": d,
                                    "s": s,
                                    "o": o,
                                }
                                rejected.append((combo, str(exc)))
                                continue
                            for hidden in config.hidden_sizes:
                                for seed_index in config.seeds:
                                    descriptors.append(
                                        _descriptor(config, model, spec, hidden, seed_index)
                                    )
    return descriptors, rejected


# ---------------------------------------------------------------------------
# Result store
# ---------------------------------------------------------------------------


class ResultStore:
    """Append-only JSONL persistence, one flushed line per trial.

    Rewriting nothing makes interrupted runs safe: a torn final line is
    skipped on load and the trial simply reruns.
    """

    def __init__(self, path) -> None:
        self.path = Path(path)

    def load(self) -> dict[str, dict]:
        rows: dict[str, dict] = {}
        if not self.path.exists():
            return rows
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail from an interrupted run
                rows[row["trial_id"]] = row
        return rows

    def append(self, row: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.flush()

    def records(self) -> list[dict]:
        return list(self.load().values())


# ---------------------------------------------------------------------------
# Threshold cache
# ---------------------------------------------------------------------------


def _threshold_key(spec: DatasetSpec, settings: ThresholdSettings) -> str:
    return _hash_hex({"task": spec.to_json(), **settings.to_json()})


def load_thresholds(
    specs: list[DatasetSpec], settings: ThresholdSettings, cache_path
) -> dict[str, SuccessThreshold]:
    """Simulated thresholds for each unique task, cached across runs."""
    cache_path = Path(cache_path)
    cache: dict[str, dict] = {}
    if cache_path.exists():
        with open(cache_path, encoding="utf-8") as fh:
            cache = json.load(fh)
    out: dict[str, SuccessThreshold] = {}
    dirty = False
    for spec in specs:
        key = _threshold_key(spec, settings)
        if key in out:
            continue
        if key in cache:
            value = float(cache[key]["value"])
        else:
            value = simulate_threshold(
                spec, settings.epsilon, settings.n_sim, settings.seed
            ).value
            cache[key] = {
                "value": value,
                "task": spec.to_json(),
                **settings.to_json(),
            }
            dirty = True
        out[key] = SuccessThreshold(
            value=value,
            spec=spec,
            epsilon=settings.epsilon,
            n_sim=settings.n_sim,
            sim_seed=settings.seed,
        )
    if dirty:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(cache, fh, sort_keys=True, indent=2)
        os.replace(tmp, cache_path)
    return out


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _base_row(desc: TrialDescriptor, threshold: SuccessThreshold) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "trial_id": desc.trial_id,
        "model": desc.model.value,
        "op": desc.spec.op.value,
        "interp": desc.spec.interp.to_json(),
        "extrap": desc.spec.extrap.to_json(),
        "d": desc.spec.input_size,
        "s": desc.spec.subset_ratio,
        "o": desc.spec.overlap_ratio,
        "hidden": desc.hidden_size,
        "seed_index": desc.seed_index,
        "trial_seed": desc.trial_seed,
        "threshold": threshold.value,
        "success": False,
        "solved_at": None,
        "sparsity": None,
        "final_interp_mse": None,
        "final_extrap_mse": None,
        "diverged": False,
        "error": None,
    }


def execute_trial(
    desc: TrialDescriptor, threshold: SuccessThreshold, keep_trace: bool = False
) -> dict:
    """Run one trial and normalize the outcome (or failure) into a row."""
    row = _base_row(desc, threshold)
    try:
        record = run_trial(
            desc.model, desc.spec, desc.train, threshold, keep_trace=keep_trace
        )
    except Exception as exc:  # one broken trial must not sink the sweep
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        success=record.success,
        solved_at=record.solved_at,
        sparsity=record.sparsity_error_at_selected,
        final_interp_mse=record.final_interp_mse,
        final_extrap_mse=record.final_extrap_mse,
        diverged=record.diverged,
    )
    if keep_trace:
        row["trace"] = [
            [p.iteration, p.interp_mse, p.extrap_mse, p.sparsity_error, p.gate_sparsity]
            for p in record.trace
        ]
    return row


def _execute_args(args) -> dict:
    return execute_trial(*args)


@dataclass
class RunStats:
    total: int
    rejected: int
    already_done: int
    executed: int
    errors: int


def _json_safe(row: dict) -> dict:
    out = {}
    for key, value in row.items():
        if isinstance(value, float) and value != value:  # NaN
            value = None
        elif isinstance(value, float) and value in (float("inf"), float("-inf")):
            value = repr(value)
        out[key] = value
    return out


def run_sweep(
    config: SweepConfig, out_dir, workers: int = 1, verbose: bool = True
) -> RunStats:
    """Execute every missing trial of the sweep and append the results.

    workers=1 runs in-process; higher counts fan trials out to a process
    pool. Either way the stored rows and the aggregated summary are
    identical, since each trial is deterministic in its descriptor.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = ResultStore(out_dir / "results.jsonl")
    descriptors, rejected = expand_sweep(config)
    if verbose:
        for combo, reason in rejected:
            print(f"rejected {_canonical(combo)}: {reason}", flush=True)
    done = store.load()
    todo = [d for d in descriptors if d.trial_id not in done]
    specs = [d.spec for d in todo]
    thresholds = load_thresholds(specs, config.threshold, out_dir / "thresholds.json")
    if verbose:
        print(
            f"sweep: {len(descriptors)} trials, {len(done)} already stored, "
            f"{len(todo)} to run, workers={workers}",
            flush=True,
        )
    errors = 0
    finished = 0

    def record(row: dict) -> None:
        nonlocal errors, finished
        store.append(_json_safe(row))
        finished += 1
        if row.get("error"):
            errors += 1
        if verbose:
            tag = "error" if row.get("error") else ("pass" if row["success"] else "fail")
            print(
                f"[{finished}/{len(todo)}] {row['model']}/{row['op']} "
                f"seed={row['seed_index']} {tag}",
                flush=True,
            )

    jobs = [
        (d, thresholds[_threshold_key(d.spec, config.threshold)], config.keep_traces)
        for d in todo
    ]
    if workers <= 1:
        for job in jobs:
            record(_execute_args(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pending = {pool.submit(_execute_args, job) for job in jobs}
            while pending:
                finished_set, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in finished_set:
                    record(fut.result())
    return RunStats(
        total=len(descriptors),
        rejected=len(rejected),
        already_done=len(done),
        executed=finished,
        errors=errors,
    )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _AggRecord:
    success: bool
    solved_at: int | None
    sparsity_error_at_selected: float | None
    diverged: bool


def _group_value(row: dict, fieldname: str):
    if fieldname in ("interp", "extrap"):
        return _canonical(row[fieldname])
    return row[fieldname]


def aggregate_rows(
    records: list[dict], group_by=("model", "op"), confidence: float = 0.95
) -> list[dict]:
    """Deterministic per-group summary rows, sorted by group key."""
    for fieldname in group_by:
        if fieldname not in _GROUP_FIELDS:
            raise ValueError(f"cannot group by {fieldname!r}; pick from {_GROUP_FIELDS}")
    groups: dict[tuple, list[dict]] = {}
    for row in records:
        key = tuple(_group_value(row, f) for f in group_by)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        rows = sorted(groups[key], key=lambda r: (r["seed_index"], r["trial_id"]))
        aggs = [
            _AggRecord(
                success=bool(r["success"]) and not r.get("error"),
                solved_at=r["solved_at"],
                sparsity_error_at_selected=r["sparsity"],
                diverged=bool(r.get("diverged")) or bool(r.get("error")),
            )
            for r in rows
        ]
        summary = summarize(aggs, confidence)
        out.append(_summary_to_dict(dict(zip(group_by, key)), summary))
    return out


def _mean_fields(prefix: str, m: MeanSummary | None) -> dict:
    if m is None:
        return {f"{prefix}_n": 0, f"{prefix}_mean": None, f"{prefix}_lo": None, f"{prefix}_hi": None}
    return {
        f"{prefix}_n": m.n,
        f"{prefix}_mean": m.mean,
        f"{prefix}_lo": m.ci_low,
        f"{prefix}_hi": m.ci_high,
    }


def _summary_to_dict(keys: dict, s: SummaryRow) -> dict:
    row = dict(keys)
    row.update(
        n=s.n,
        successes=s.successes,
        errors=s.errored,
        success_rate=s.success_rate.rate,
        success_lo=s.success_rate.ci_low,
        success_hi=s.success_rate.ci_high,
    )
    row.update(_mean_fields("solved_at", s.solved_at))
    row.update(_mean_fields("sparsity", s.sparsity))
    return row


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_tsv(rows: list[dict]) -> str:
    if not rows:
        return ""
    header = list(rows[0].keys())
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_fmt(row[h]) for h in header))
    return "\n".join(lines) + "\n"


def rows_to_json(rows: list[dict], group_by) -> str:
    return json.dumps(
        {"group_by": list(group_by), "rows": rows}, sort_keys=True, indent=2
    ) + "\n"


def plot_series(rows: list[dict], x_field: str, group_by) -> list[dict]:
    """Success-rate curves against one swept parameter.

    Each remaining group-key combination becomes one series with aligned
    x / rate / CI arrays, ready for any plotting front end.
    """
    if x_field not in group_by:
        raise ValueError(f"x field {x_field!r} must be one of the group fields")
    rest = [f for f in group_by if f != x_field]
    series: dict[tuple, dict] = {}
    for row in rows:
        key = tuple(row[f] for f in rest)
        entry = series.setdefault(
            key,
            {
                "label": " ".join(f"{f}={v}" for f, v in zip(rest, key)) or "all",
                "x": [],
                "rate": [],
                "lo": [],
                "hi": [],
            },
        )
        entry["x"].append(row[x_field])
        entry["rate"].append(row["success_rate"])
        entry["lo"].append(row["success_lo"])
        entry["hi"].append(row["success_hi"])
    return [series[k] for k in sorted(series, key=lambda k: tuple(str(v) for v in k))]
