"""Architecture comparison and layer-by-layer size refinement.

Candidates are ranked lexicographically by (error, steps, parameter
count).  Every training run is seeded from ``stable_hash(base_seed,
hidden_sizes, restart)``, so an architecture gets the same seeds wherever
it is evaluated and any reported row can be replayed with ``train``.
"""

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .errors import SizeError, TrainingDivergedError, ValidationError
from .ingest import Violation
from .nn import NetConfig, parameter_count, train

DEFAULT_ANCHOR = (10, 5)
DEFAULT_GRID = tuple(range(1, 17))
DEFAULT_RESTARTS = 10


@dataclass(frozen=True)
class TrainParams:
    threshold: float = 0.01
    step_max: int = 100000
    algorithm: str = "rprop+"
    learning_rate: float = 0.01
    output_linear: bool = True

    def config(self, n_inputs, hidden_sizes, seed):
        return NetConfig(
            n_inputs=n_inputs,
            hidden_sizes=tuple(hidden_sizes),
            n_outputs=1,
            output_linear=self.output_linear,
            threshold=self.threshold,
            step_max=self.step_max,
            seed=seed,
            algorithm=self.algorithm,
            learning_rate=self.learning_rate,
        )


@dataclass(frozen=True)
class ComparisonRow:
    hidden_sizes: tuple
    error: float
    steps: int
    seed_used: int
    converged: bool
    n_params: int
    failed: bool = False

    def key(self):
        return (self.error, self.steps, self.n_params, self.hidden_sizes)

    def to_dict(self):
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        if not math.isfinite(self.error):
            d["error"] = None
        return d

    @classmethod
    def from_dict(cls, obj):
        obj = dict(obj)
        obj["hidden_sizes"] = tuple(obj["hidden_sizes"])
        if obj["error"] is None:
            obj["error"] = math.inf
        return cls(**obj)


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple
    dataset_fingerprint: str
    n_inputs: int = 4
    restarts: int = 1
    base_seed: int = 0
    params: TrainParams = field(default_factory=TrainParams)

    def to_dict(self):
        return {
            "dataset_fingerprint": self.dataset_fingerprint,
            "n_inputs": self.n_inputs,
            "restarts": self.restarts,
            "base_seed": self.base_seed,
            "train_params": asdict(self.params),
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            tuple(ComparisonRow.from_dict(r) for r in obj["rows"]),
            obj["dataset_fingerprint"],
            obj.get("n_inputs", 4),
            obj.get("restarts", 1),
            obj.get("base_seed", 0),
            TrainParams(**obj.get("train_params", {})),
        )

    def to_text(self):
        header = ("Model", "Hidden layers", "Neurons per layer", "Error", "Steps")
        body = []
        for i, r in enumerate(self.rows, 1):
            err = "failed" if r.failed else f"{r.error:.4f}"
            body.append((f"NN_{i}", str(len(r.hidden_sizes)), ", ".join(map(str, r.hidden_sizes)), err, str(r.steps)))
        widths = [max(len(x[j]) for x in [header, *body]) for j in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header, *body]]
        return "\n".join(lines) + "\n"


def stable_hash(base_seed, hidden_sizes, restart_index):
    """Seed in [0, 2**31) that does not depend on Python's hash salt."""
    text = f"{int(base_seed)}|{','.join(str(int(h)) for h in hidden_sizes)}|{int(restart_index)}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big") >> 1


def _run(job):
    config, data = job
    try:
        r = train(config, data)
    except TrainingDivergedError:
        return None
    return (r.error, r.steps, r.converged)


def _best_row(sizes, n_inputs, seeds, outcomes):
    finite = [
        (err, steps, seed, conv)
        for seed, out in zip(seeds, outcomes)
        if out is not None and math.isfinite(out[0])
        for err, steps, conv in [out]
    ]
    n_params = parameter_count(n_inputs, sizes)
    if not finite:
        return ComparisonRow(sizes, math.inf, 0, seeds[0], False, n_params, failed=True)
    err, steps, seed, conv = min(finite, key=lambda t: (t[0], t[1]))
    return ComparisonRow(sizes, err, steps, seed, conv, n_params)


def compare_architectures(
    data,
    candidates,
    restarts=DEFAULT_RESTARTS,
    base_seed=42,
    params=TrainParams(),
    jobs=1,
    cache=None,
):
    """Train every candidate ``restarts`` times; keep each one's best run."""
    candidates = [tuple(int(h) for h in c) for c in candidates]
    if not candidates:
        raise SizeError("need at least one candidate architecture")
    if restarts < 1:
        raise SizeError("restarts must be >= 1")
    cache = {} if cache is None else cache

    todo = [c for c in dict.fromkeys(candidates) if c not in cache]
    seeds = {c: [stable_hash(base_seed, c, r) for r in range(restarts)] for c in todo}
    jobs_list = [(params.config(data.p, c, s), data) for c in todo for s in seeds[c]]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run, jobs_list))
    else:
        outcomes = [_run(j) for j in jobs_list]
    for i, c in enumerate(todo):
        cache[c] = _best_row(c, data.p, seeds[c], outcomes[i * restarts : (i + 1) * restarts])

    return ComparisonTable(
        tuple(cache[c] for c in candidates),
        data.fingerprint(),
        data.p,
        restarts,
        base_seed,
        params,
    )


def select_best(table):
    rows = table.rows if isinstance(table, ComparisonTable) else tuple(table)
    if not rows:
        raise SizeError("cannot select from an empty table")
    return min(rows, key=ComparisonRow.key)


def _snap(value, grid):
    return min(grid, key=lambda g: (abs(g - value), g))


def stepwise_refine(
    data,
    depth,
    size_grid=DEFAULT_GRID,
    base_seed=42,
    params=TrainParams(),
    restarts=DEFAULT_RESTARTS,
    anchor=DEFAULT_ANCHOR,
    jobs=1,
):
    """Coordinate descent over per-layer sizes, one layer at a time.

    The anchor is padded with its last size (or truncated) to ``depth`` and
    snapped to the nearest grid value, so every incumbent lies on the grid
    and each stage re-evaluates it.  Returns ``(best_sizes, trace)`` with one
    comparison table per layer.
    """
    if depth < 1:
        raise SizeError("depth must be >= 1")
    grid = list(dict.fromkeys(int(g) for g in size_grid))
    if not grid:
        raise SizeError("size grid is empty")
    if any(g < 1 for g in grid):
        raise ValidationError([Violation(None, "grid", "layer sizes must be >= 1")])

    anchor = list(anchor)[:depth]
    anchor += [anchor[-1]] * (depth - len(anchor))
    current = [_snap(a, grid) for a in anchor]

    cache = {}
    trace = []
    for layer in range(depth):
        candidates = [tuple(current[:layer] + [g] + current[layer + 1 :]) for g in grid]
        table = compare_architectures(data, candidates, restarts, base_seed, params, jobs, cache)
        current = list(select_best(table).hidden_sizes)
        trace.append(table)
    return current, trace
