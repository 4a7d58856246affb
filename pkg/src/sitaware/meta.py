"""Inverse-variance pooling of per-source estimates.

Common-effect and DerSimonian-Laird random-effects summaries, Cochran's Q,
I^2, normal-approximation tests, and the data behind forest, funnel and
standardized-residual plots.
"""

import csv
import io
import math
from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np

from .errors import DomainError, SchemaError, SizeError, ShapeError


@dataclass(frozen=True)
class EffectEstimate:
    study_id: str
    effect: float
    variance: float

    def __post_init__(self):
        if not math.isfinite(self.effect):
            raise DomainError(f"{self.study_id}: effect must be finite")
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise DomainError(f"{self.study_id}: variance must be positive and finite")


@dataclass(frozen=True)
class PoolingResult:
    pooled_common: float
    se_common: float
    pooled_random: float
    se_random: float
    weights_common: list
    weights_random: list
    Q: float
    df: int
    I2: float
    tau2: float
    z_common: float
    p_common: float
    z_random: float
    p_random: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ForestRow:
    study_id: str
    effect: float
    ci_low: float
    ci_high: float
    weight_common: float
    weight_random: float


@dataclass(frozen=True)
class PlotData:
    forest_rows: list
    funnel_points: list
    residuals: list

    def to_dict(self):
        return {
            "forest_rows": [asdict(r) for r in self.forest_rows],
            "funnel_points": [list(p) for p in self.funnel_points],
            "residuals": list(self.residuals),
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            [ForestRow(**r) for r in obj["forest_rows"]],
            [tuple(p) for p in obj["funnel_points"]],
            list(obj["residuals"]),
        )


def effect_from_two_arm(arm_a, arm_b, study_id=""):
    """Log count ratio ln(a/b) with Poisson variance 1/a + 1/b."""
    if not (arm_a > 0 and arm_b > 0):
        raise DomainError(f"arm counts must be positive, got ({arm_a}, {arm_b})")
    return EffectEstimate(study_id, math.log(arm_a / arm_b), 1.0 / arm_a + 1.0 / arm_b)


def effect_from_single_source(value, bias_rate, n_reports, study_id=""):
    """Raw count with se = bias_rate * value / sqrt(n_reports)."""
    if not (value > 0 and bias_rate > 0 and n_reports >= 1):
        raise DomainError(
            f"need value > 0, bias_rate > 0, n_reports >= 1; got ({value}, {bias_rate}, {n_reports})"
        )
    se = bias_rate * value / math.sqrt(n_reports)
    return EffectEstimate(study_id, float(value), se * se)


def _two_sided_p(z):
    return math.erfc(abs(z) / math.sqrt(2.0))


def _arrays(estimates):
    theta = np.array([e.effect for e in estimates], dtype=float)
    v = np.array([e.variance for e in estimates], dtype=float)
    return theta, v


def pool(estimates):
    estimates = list(estimates)
    k = len(estimates)
    if k < 2:
        raise SizeError(f"pooling needs k >= 2 estimates, got {k}")
    theta, v = _arrays(estimates)
    if np.any(~(v > 0)):
        raise DomainError("all variances must be positive")

    w = 1.0 / v
    sw = w.sum()
    mu_c = float(np.dot(w, theta) / sw)
    se_c = float(sw ** -0.5)
    q = float(np.dot(w, (theta - mu_c) ** 2))
    df = k - 1
    i2 = max(0.0, (q - df) / q) if q > 0 else 0.0
    tau2 = max(0.0, (q - df) / (sw - np.dot(w, w) / sw))

    if tau2 > 0:
        w_r = 1.0 / (v + tau2)
        sw_r = w_r.sum()
        mu_r = float(np.dot(w_r, theta) / sw_r)
        se_r = float(sw_r ** -0.5)
    else:
        w_r, sw_r, mu_r, se_r = w, sw, mu_c, se_c

    z_c = mu_c / se_c
    z_r = mu_r / se_r
    return PoolingResult(
        pooled_common=mu_c,
        se_common=se_c,
        pooled_random=mu_r,
        se_random=se_r,
        weights_common=(w / sw).tolist(),
        weights_random=(w_r / sw_r).tolist(),
        Q=q,
        df=df,
        I2=float(i2),
        tau2=float(tau2),
        z_common=z_c,
        p_common=_two_sided_p(z_c),
        z_random=z_r,
        p_random=_two_sided_p(z_r),
    )


def standardized_residuals(estimates, result):
    estimates = list(estimates)
    if len(estimates) != len(result.weights_common):
        raise ShapeError(
            f"{len(estimates)} estimates but result pooled {len(result.weights_common)} studies"
        )
    theta, v = _arrays(estimates)
    return ((theta - result.pooled_common) / np.sqrt(v)).tolist()


def plot_data(estimates, result, ci_level=0.95):
    if not 0 < ci_level < 1:
        raise DomainError(f"ci_level must lie in (0, 1), got {ci_level}")
    estimates = list(estimates)
    residuals = standardized_residuals(estimates, result)
    zq = NormalDist().inv_cdf((1 + ci_level) / 2)

    rows = []
    funnel = []
    for e, wc, wr in zip(estimates, result.weights_common, result.weights_random):
        se = math.sqrt(e.variance)
        rows.append(ForestRow(e.study_id, e.effect, e.effect - zq * se, e.effect + zq * se, wc, wr))
        funnel.append((e.effect, se))
    for label, mu, se, wc, wr in (
        ("Common effect", result.pooled_common, result.se_common, 1.0, 0.0),
        ("Random effects", result.pooled_random, result.se_random, 0.0, 1.0),
    ):
        rows.append(ForestRow(label, mu, mu - zq * se, mu + zq * se, wc, wr))
    return PlotData(rows, funnel, residuals)


def fuse_predictions(predictions, variances):
    """Minimum-variance linear fusion of independent unbiased predictions."""
    preds = np.asarray(predictions, dtype=float)
    var = np.asarray(variances, dtype=float)
    if preds.size == 0:
        raise SizeError("need at least one prediction")
    if preds.shape != var.shape:
        raise ShapeError("predictions and variances differ in length")
    if np.any(~(var > 0)) or not np.all(np.isfinite(var)):
        raise DomainError("variances must be positive and finite")
    w = 1.0 / var
    w = w / w.sum()
    return float(np.dot(w, preds)), w.tolist()


def two_arm_estimates(table, arm_a, arm_b):
    labels = table.labels()
    a = table.column(arm_a)
    b = table.column(arm_b)
    return [effect_from_two_arm(x, y, lbl) for lbl, x, y in zip(labels, a, b)]


def parse_bias_rates(text):
    """Read ``source,bias_rate,n_reports`` CSV into ``{source: (rate, n)}``."""
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
        "source",
        "bias_rate",
        "n_reports",
    ]:
        raise SchemaError("bias-rate file header must be 'source,bias_rate,n_reports'")
    out = {}
    for rec in reader:
        try:
            out[rec["source"]] = (float(rec["bias_rate"]), int(rec["n_reports"]))
        except (TypeError, ValueError):
            raise SchemaError(f"bad bias-rate record at line {reader.line_num}") from None
    return out


def single_source_estimates(table, column, bias_rates):
    values = table.column(column)
    out = []
    for row, label, value in zip(table.rows, table.labels(), values):
        if row.source_id not in bias_rates:
            raise SchemaError(f"no bias rate for source {row.source_id!r}")
        rate, n = bias_rates[row.source_id]
        out.append(effect_from_single_source(value, rate, n, label))
    return out
