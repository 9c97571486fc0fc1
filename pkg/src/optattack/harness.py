"""Batch attack experiments: example selection, per-example attacks, reports."""
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .boundary import Targeted, Untargeted
from .data import load_dataset
from .errors import ConfigError
from .oracle import load_model
from .rgf import AttackStatus, RgfConfig, rgf_attack

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RECORDS_FILE = "records.jsonl"
SUMMARY_FILE = "summary.json"
TIMINGS_FILE = "timings.jsonl"
REPORT_DIR_ENV = "OPTATTACK_REPORT_DIR"


def parse_mode(text):
    """``untargeted`` | ``targeted-next`` | ``targeted=T`` -> (kind, fixed target or None)."""
    if text == "untargeted":
        return ("untargeted", None)
    if text in ("targeted-next", "targeted-next-class"):
        return ("targeted-next", None)
    if text.startswith("targeted="):
        try:
            return ("targeted-fixed", int(text.split("=", 1)[1]))
        except ValueError:
            raise ConfigError(f"bad target in mode {text!r}") from None
    raise ConfigError(f"unknown mode {text!r}")


def assign_target(record, mode, n_classes):
    """Target label for an example, or None for untargeted attacks."""
    kind, fixed = parse_mode(mode) if isinstance(mode, str) else mode
    if kind == "untargeted":
        return None
    if n_classes < 2:
        raise ConfigError("targeted attacks need at least two classes")
    if kind == "targeted-next":
        return (record.label + 1) % n_classes
    if not 0 <= fixed < n_classes:
        raise ConfigError(f"target {fixed} outside [0, {n_classes})")
    if fixed == record.label:
        raise ConfigError(f"fixed target {fixed} equals the original label")
    return fixed


def select_examples(dataset, oracle, n, seed):
    """Sample ``n`` correctly classified examples without replacement, sorted by index."""
    if not dataset:
        raise ConfigError("dataset is empty")
    clf = oracle.uncounted()
    rng = np.random.default_rng(seed)
    chosen = []
    for i in rng.permutation(len(dataset)):
        rec = dataset[int(i)]
        if clf.classify(rec.x) == rec.label:
            chosen.append((int(i), rec))
            if len(chosen) == n:
                break
    if len(chosen) < n:
        raise ConfigError(
            f"only {len(chosen)} correctly classified examples available, {n} requested "
            f"(short by {n - len(chosen)})")
    return sorted(chosen, key=lambda pair: pair[0])


def derive_seed(master, index):
    """Per-example seed from (master seed, example index), independent of scheduling."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0])


def cap_trace(trace, cap):
    """Evenly subsample to at most ``cap`` entries, always keeping the first and last."""
    if cap is None or len(trace) <= cap:
        return list(trace)
    if cap < 2:
        return [trace[-1]]
    idx = sorted(set(np.linspace(0, len(trace) - 1, cap).round().astype(int).tolist()))
    return [trace[i] for i in idx]


@dataclass
class ExperimentConfig:
    model_path: str
    dataset_path: str
    mode: str = "untargeted"
    n_examples: int = 10
    rgf: RgfConfig = field(default_factory=RgfConfig)
    seed: int = 0
    out_dir: str | None = None
    workers: int = 1
    skip_header: bool = False
    trace_cap: int = 200
    resume: bool = False

    def validate(self):
        if self.n_examples < 1:
            raise ConfigError("n_examples must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for p in (self.model_path, self.dataset_path):
            if not Path(p).is_file():
                raise ConfigError(f"no such file: {p}")
        parse_mode(self.mode)

    def report_dir(self):
        return Path(self.out_dir or os.environ.get(REPORT_DIR_ENV) or "reports")

    def echo(self):
        """Config fields that determine results (no output path or worker count)."""
        rgf = asdict(self.rgf)
        rgf.pop("seed")
        return {
            "model": str(self.model_path),
            "dataset": str(self.dataset_path),
            "mode": self.mode,
            "n_examples": self.n_examples,
            "seed": self.seed,
            "rgf": rgf,
        }


@dataclass
class AttackRecord:
    index: int
    original_label: int
    target_label: int | None
    distortion: float | None
    total_queries: int
    iterations: int
    status: str
    success: bool
    x_star: list | None = None
    trace: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_json(self):
        d = asdict(self)
        d.pop("wall_time")
        return {"schema": SCHEMA_VERSION, **d}

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d.pop("schema", None)
        return cls(**d)


@dataclass
class SummaryReport:
    n_records: int
    n_success: int
    avg_l2: float | None
    avg_queries: float
    success_rate: float
    status_counts: dict
    config: dict = field(default_factory=dict)

    def to_json(self):
        return {"schema": SCHEMA_VERSION, **asdict(self)}


def summarize(records, config=None):
    """Mean distortion over successful attacks, mean queries over all, status tally."""
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    wins = [r.distortion for r in records if r.success]
    counts = {}
    for r in records:
        counts[r.status] = counts.get(r.status, 0) + 1
    return SummaryReport(
        n_records=len(records),
        n_success=len(wins),
        avg_l2=sum(wins) / len(wins) if wins else None,
        avg_queries=sum(r.total_queries for r in records) / len(records),
        success_rate=len(wins) / len(records),
        status_counts=dict(sorted(counts.items())),
        config=config or {},
    )


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def emit_report(report, records, out_dir, prefix=""):
    """Write ``records.jsonl`` (sorted by index) and ``summary.json``; returns both paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rec_path = out / f"{prefix}{RECORDS_FILE}"
        sum_path = out / f"{prefix}{SUMMARY_FILE}"
        with open(rec_path, "w") as fh:
            for r in sorted(records, key=lambda r: r.index):
                fh.write(_dumps(r.to_json()) + "\n")
        sum_path.write_text(json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return rec_path, sum_path


def load_records(path):
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                if d.get("schema") != SCHEMA_VERSION:
                    raise ValueError(f"unsupported record schema {d.get('schema')!r}")
                records.append(AttackRecord.from_json(d))
    return records


def build_predicate(y0, target):
    return Untargeted(y0) if target is None else Targeted(target, y0)


def nearest_candidates(dataset, x0, pred, skip_index, limit):
    """Dataset records usable as starting points, nearest to x0 first."""
    pool = [
        (float(np.linalg.norm(rec.x - x0)), i, rec)
        for i, rec in enumerate(dataset)
        if i != skip_index and pred.accepts_candidate(rec.label)
    ]
    pool.sort(key=lambda t: (t[0], t[1]))
    return [rec for dist, _, rec in pool[:limit] if dist > 0]


@lru_cache(maxsize=4)
def _cached_inputs(model_path, dataset_path, skip_header):
    oracle = load_model(model_path)
    dataset = load_dataset(dataset_path, oracle.n_classes, oracle.dim, skip_header)
    return oracle, dataset


def attack_example(task):
    """Run one attack; ``task`` is a plain dict so it can cross process boundaries."""
    base, dataset = _cached_inputs(task["model"], task["dataset"], task["skip_header"])
    oracle = base.uncounted()
    index = task["index"]
    rec = dataset[index]
    target = task["target"]
    pred = build_predicate(rec.label, target)
    cfg = task["rgf"]
    cands = nearest_candidates(dataset, rec.x, pred, index, cfg.n_init_tries)
    t0 = time.perf_counter()
    result = rgf_attack(oracle, rec.x, pred, cands, cfg)
    elapsed = time.perf_counter() - t0
    ok = bool(result.adversarial)
    return AttackRecord(
        index=index,
        original_label=rec.label,
        target_label=target,
        distortion=float(result.distortion) if result.x_star is not None else None,
        total_queries=int(result.total_queries),
        iterations=int(result.iterations),
        status=result.status.value,
        success=ok,
        x_star=result.x_star.tolist() if result.x_star is not None else None,
        trace=[[int(q), float(g)] for q, g in cap_trace(result.trace, task["trace_cap"])],
        wall_time=elapsed,
    )


class _OrderedWriter:
    """Streams records to disk in index order as soon as all earlier ones are done."""

    def __init__(self, path, order, done):
        self.fh = open(path, "a")
        self.pending = {}
        self.order = [i for i in order if i not in done]
        self.pos = 0

    def add(self, record):
        self.pending[record.index] = record
        while self.pos < len(self.order) and self.order[self.pos] in self.pending:
            r = self.pending.pop(self.order[self.pos])
            self.fh.write(_dumps(r.to_json()) + "\n")
            self.fh.flush()
            self.pos += 1

    def close(self):
        self.fh.close()


def run_experiment(config):
    """Attack every selected example and write per-record and summary reports.

    Individual failures become record statuses; only configuration and I/O
    problems raise. Results depend on the config and seed alone, not on the
    number of workers.
    """
    config.validate()
    oracle, dataset = _cached_inputs(str(config.model_path), str(config.dataset_path), config.skip_header)
    chosen = select_examples(dataset, oracle, config.n_examples, config.seed)
    out = config.report_dir()
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    rec_path = out / RECORDS_FILE

    done = {}
    if config.resume and rec_path.exists():
        for r in load_records(rec_path):
            done[r.index] = r
        log.info("resuming: %d records already complete", len(done))
    elif rec_path.exists():
        rec_path.unlink()

    tasks = []
    for index, rec in chosen:
        if index in done:
            continue
        target = assign_target(rec, config.mode, oracle.n_classes)
        tasks.append({
            "model": str(config.model_path),
            "dataset": str(config.dataset_path),
            "skip_header": config.skip_header,
            "index": index,
            "target": target,
            "rgf": config.rgf.replace(seed=derive_seed(config.seed, index)),
            "trace_cap": config.trace_cap,
        })

    writer = _OrderedWriter(rec_path, [i for i, _ in chosen], done)
    records = dict(done)
    try:
        if config.workers == 1 or len(tasks) <= 1:
            for task in tasks:
                r = attack_example(task)
                records[r.index] = r
                writer.add(r)
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(attack_example, t) for t in tasks]
                for fut in as_completed(futures):
                    r = fut.result()
                    records[r.index] = r
                    writer.add(r)
    finally:
        writer.close()

    ordered = [records[i] for i, _ in chosen]
    with open(out / TIMINGS_FILE, "w") as fh:
        for r in ordered:
            fh.write(json.dumps({"index": r.index, "wall_time": r.wall_time}) + "\n")
    report = summarize(ordered, config.echo())
    emit_report(report, ordered, out)
    return report


def status_exit_code(report):
    """0 when every attack produced an adversarial example, 2 otherwise."""
    return 0 if report.n_success == report.n_records else 2
