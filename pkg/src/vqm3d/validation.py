"""Objective-vs-subjective agreement: RMSE, CC, ROCC, MAE, OR and sigma_DMOS."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import rankdata

REPORT_COLUMNS = ("metric", "rmse", "cc", "rocc", "mae", "outlier_ratio", "sigma_dmos", "n", "mapping_used", "note")
MIN_POINTS = 3
LOGISTIC_MIN_POINTS = 4
LOGISTIC_MAX_ITER = 500
LOGISTIC_TOL = 1e-9


class ValidationDataError(ValueError):
    """Malformed or insufficient subjective data."""


@dataclass(frozen=True)
class SubjectiveRecord:
    sequence_id: str
    dmos: float
    objective_scores: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.dmos):
            raise ValidationDataError(f"{self.sequence_id}: dmos must be finite")


@dataclass(frozen=True)
class ValidationReport:
    metric: str
    rmse: float
    cc: float
    rocc: float
    mae: float
    outlier_ratio: float
    sigma_dmos: float
    n: int
    mapping_used: bool = False
    note: str = ""

    @property
    def degenerate(self) -> bool:
        return math.isnan(self.cc) or math.isnan(self.rocc)

    def as_row(self) -> Dict[str, object]:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


@dataclass(frozen=True)
class LogisticFit:
    beta: Tuple[float, float, float, float]
    converged: bool
    message: str = ""

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if not self.converged:
            return x.copy()
        return logistic(x, *self.beta)


def load_dmos_csv(path) -> List[SubjectiveRecord]:
    """Read ``sequence_id,dmos,<metric>...``; blank metric cells are treated as missing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationDataError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        missing = [c for c in ("sequence_id", "dmos") if c not in header]
        if missing:
            raise ValidationDataError(f"{path}: header lacks column(s) {', '.join(missing)}")
        i_id, i_dmos = header.index("sequence_id"), header.index("dmos")
        metrics = [(i, h) for i, h in enumerate(header) if i not in (i_id, i_dmos)]
        records = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValidationDataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                dmos = float(row[i_dmos])
            except ValueError:
                raise ValidationDataError(f"{path}:{line}: dmos {row[i_dmos]!r} is not a number") from None
            if not math.isfinite(dmos):
                raise ValidationDataError(f"{path}:{line}: dmos must be finite")
            scores = {}
            for i, name in metrics:
                cell = row[i].strip()
                if not cell:
                    continue
                try:
                    scores[name] = float(cell)
                except ValueError:
                    raise ValidationDataError(f"{path}:{line}: {name} value {cell!r} is not a number") from None
            records.append(SubjectiveRecord(row[i_id].strip(), dmos, scores))
    return records


def logistic(x, b1, b2, b3, b4):
    z = np.clip(-b3 * (np.asarray(x, dtype=np.float64) - b4), -700.0, 700.0)
    return b1 + b2 / (1.0 + np.exp(z))


def logistic_fit(objective: Sequence[float], dmos: Sequence[float]) -> LogisticFit:
    """Least-squares fit of dmos ~ b1 + b2 / (1 + exp(-b3 (x - b4))).

    Starts from the data range, so the result is deterministic. On failure
    (or a constant target) the returned mapping is the identity and
    ``converged`` is False.
    """
    x = np.asarray(objective, dtype=np.float64)
    y = np.asarray(dmos, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationDataError("objective and dmos must be equal-length vectors")
    if len(x) < LOGISTIC_MIN_POINTS:
        raise ValidationDataError(f"logistic fit needs at least {LOGISTIC_MIN_POINTS} points")
    identity = (0.0, 1.0, 0.0, 0.0)
    if np.ptp(y) == 0:
        return LogisticFit(identity, False, "constant dmos; identity mapping used")
    if np.ptp(x) == 0:
        return LogisticFit(identity, False, "constant objective scores; identity mapping used")

    best, failure = None, ""
    for x0 in _logistic_starts(x, y):
        try:
            res = least_squares(lambda b: logistic(x, *b) - y, x0, method="lm",
                                max_nfev=LOGISTIC_MAX_ITER, xtol=LOGISTIC_TOL, ftol=LOGISTIC_TOL,
                                gtol=LOGISTIC_TOL)
        except (ValueError, FloatingPointError) as exc:
            failure = f"fit failed: {exc}"
            continue
        if not res.success or not np.all(np.isfinite(res.x)):
            failure = f"no convergence: {res.message}"
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        return LogisticFit(identity, False, f"{failure}; identity mapping used")
    return LogisticFit(tuple(float(b) for b in best.x), True, str(best.message))


def _logistic_starts(x: np.ndarray, y: np.ndarray):
    """Two deterministic starting points: a sigmoid spanning the data, and
    the nearly straight central part of a very wide sigmoid laid along the
    least-squares line (the logistic contains a line only as a limit)."""
    sign = 1.0 if _pearson(x, y) >= 0 else -1.0
    yield np.array([y.min(), np.ptp(y), sign * 4.0 / np.ptp(x), np.median(x)])

    slope, intercept = np.polyfit(x, y, 1)
    if slope == 0:
        return
    center = 0.5 * (x.min() + x.max())
    half = 0.5 * np.ptp(x)
    # cubic deviation from the tangent line is about |slope| * half * eps^2 / 12
    b3 = np.sign(slope) * 1e-4 / half
    b2 = 4.0 * slope / b3
    yield np.array([slope * center + intercept - 0.5 * b2, b2, b3, center])


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    # sqrt(fl(s*s)) == s, so identical or negated inputs give exactly +/-1
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def pearson(x, y) -> float:
    return _pearson(np.asarray(x, np.float64), np.asarray(y, np.float64))


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    return _pearson(rankdata(x), rankdata(y))


def validate(records: Sequence[SubjectiveRecord], metric_name: str,
             use_logistic_mapping: bool = False) -> ValidationReport:
    """Agreement statistics between one objective metric and DMOS.

    A point is an outlier when |dmos - prediction| > 2 * sigma_DMOS,
    sigma_DMOS being the population standard deviation of the DMOS column.
    ROCC is always computed on the raw objective scores.
    """
    missing = [r.sequence_id for r in records if metric_name not in r.objective_scores]
    if missing:
        raise ValidationDataError(f"no {metric_name!r} score for: {', '.join(missing)}")
    if len(records) < MIN_POINTS:
        raise ValidationDataError(f"validation needs at least {MIN_POINTS} records, got {len(records)}")
    x = np.array([r.objective_scores[metric_name] for r in records], dtype=np.float64)
    y = np.array([r.dmos for r in records], dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationDataError(f"non-finite {metric_name!r} scores")

    notes = []
    mapping_used = False
    pred = x
    if use_logistic_mapping:
        fit = logistic_fit(x, y)
        mapping_used = fit.converged
        pred = fit(x)
        if not fit.converged:
            notes.append(fit.message)

    resid = y - pred
    sigma = float(np.std(y))
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    mae = float(np.mean(np.abs(resid)))
    outliers = float(np.mean(np.abs(resid) > 2.0 * sigma))
    cc = _pearson(pred, y)
    rocc = spearman(x, y)
    if np.ptp(x) == 0:
        notes.append("constant objective scores: cc and rocc undefined")
    elif np.ptp(y) == 0:
        notes.append("constant dmos: cc and rocc undefined")
    return ValidationReport(metric_name, rmse, cc, rocc, mae, outliers, sigma, len(records),
                            mapping_used, "; ".join(notes))
