"""Finite multivariate random variables with exact moments and quantiles.

Everything downstream (oracles, estimators, hardness generators) manipulates
one concrete object: a finite probability space with a vector observation
attached to each outcome.  All operations here are pure and exact up to
float64 arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

_PROB_SUM_TOL = 1e-12
_PARSE_SUM_TOL = 1e-9

__all__ = [
    "RandomVariable",
    "MomentSummary",
    "mean",
    "moments",
    "clamp_vec",
    "clamp_scalar",
    "exact_quantile",
    "truncate_normalized",
    "norm_rv",
    "shift",
    "from_commuting_observables",
    "parse_distribution_spec",
    "serialize_distribution_spec",
]


@dataclass(frozen=True)
class RandomVariable:
    """A finite probability space with a d-dimensional observation per outcome.

    Attributes:
        prob: length-K probability vector, nonnegative, summing to 1.
        values: K x d matrix; row k is the observation on outcome k.
        labels: K distinct outcome identifiers (defaults to "0", "1", ...).
    """

    prob: np.ndarray
    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        prob = np.asarray(self.prob, dtype=float).copy()
        values = np.asarray(self.values, dtype=float).copy()
        if prob.ndim != 1:
            raise ValueError(f"prob must be 1-d, got shape {prob.shape}")
        if values.ndim != 2:
            raise ValueError(f"values must be K x d, got shape {values.shape}")
        if values.shape[0] != prob.shape[0]:
            raise ValueError(
                f"values has {values.shape[0]} rows but prob has length {prob.shape[0]}"
            )
        if values.shape[1] < 1:
            raise ValueError("dimension d must be at least 1")
        if np.any(prob < 0.0):
            raise ValueError("prob must be nonnegative")
        total = float(prob.sum())
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"prob must sum to 1 within {_PROB_SUM_TOL}, got {total!r}")
        labels = self.labels
        if not labels:
            labels = tuple(str(k) for k in range(prob.shape[0]))
        if len(labels) != prob.shape[0]:
            raise ValueError(
                f"labels has length {len(labels)} but there are {prob.shape[0]} outcomes"
            )
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be pairwise distinct")
        prob.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def size(self) -> int:
        return self.prob.shape[0]


@dataclass(frozen=True)
class MomentSummary:
    """Exact moments of a finite random variable.

    ``cov_trace`` is Tr of the covariance matrix, ``spectral_norm`` its largest
    eigenvalue, ``exp_norm2``/``exp_norm2_sq`` the first two moments of the
    Euclidean norm.
    """

    mean: np.ndarray
    cov_trace: float
    spectral_norm: float
    exp_norm2: float
    exp_norm2_sq: float


def mean(rv: RandomVariable) -> np.ndarray:
    """Exact mean vector: the probability-weighted sum of the value rows."""
    return rv.prob @ rv.values


def _spectral_norm(sigma: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic all-ones start; 1e-9 relative tolerance, 10,000-iteration
    cap.  The all-ones vector can be exactly orthogonal to the top eigenspace
    (e.g. covariance of symmetric +-1 pairs), so a zero iterate falls back to
    the basis vector of the largest diagonal entry.
    """
    d = sigma.shape[0]
    v = np.ones(d) / math.sqrt(d)
    lam = 0.0
    for _ in range(10_000):
        w = sigma @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            if float(np.abs(sigma).max(initial=0.0)) == 0.0:
                return 0.0
            v = np.zeros(d)
            v[int(np.argmax(np.diag(sigma)))] = 1.0
            lam = 0.0
            continue
        v = w / norm
        new_lam = float(v @ (sigma @ v))
        if abs(new_lam - lam) <= 1e-9 * max(abs(new_lam), 1e-30):
            return new_lam
        lam = new_lam
    return lam


def moments(rv: RandomVariable) -> MomentSummary:
    """All five moment fields computed exactly from the finite support."""
    mu = mean(rv)
    sq_norms = np.einsum("kd,kd->k", rv.values, rv.values)
    exp_norm2_sq = float(rv.prob @ sq_norms)
    exp_norm2 = float(rv.prob @ np.sqrt(sq_norms))
    cov_trace = max(exp_norm2_sq - float(mu @ mu), 0.0)
    centered = rv.values - mu
    sigma = (centered * rv.prob[:, None]).T @ centered
    spectral = min(max(_spectral_norm(sigma), 0.0), cov_trace) if cov_trace > 0 else 0.0
    return MomentSummary(
        mean=mu,
        cov_trace=cov_trace,
        spectral_norm=spectral,
        exp_norm2=exp_norm2,
        exp_norm2_sq=exp_norm2_sq,
    )


def _check_clamp_bounds(a: float, b: float) -> None:
    if not (0 <= a < b):
        raise ValueError(f"clamp bounds need 0 <= a < b, got a={a!r}, b={b!r}")


def clamp_vec(x: np.ndarray, a: float, b: float) -> np.ndarray:
    """x if a < ||x||_2 <= b else the zero vector.

    Strict lower comparison, inclusive upper; b may be +inf.  The zero vector
    always clamps to zero when a = 0 (0 < 0 is false) — downstream shell
    decompositions rely on that.
    """
    _check_clamp_bounds(a, b)
    x = np.asarray(x, dtype=float)
    n = float(np.linalg.norm(x))
    if a < n <= b:
        return x.copy()
    return np.zeros_like(x)


def clamp_scalar(y: float, a: float, b: float) -> float:
    """y if a < |y| <= b else 0; the sign of y is preserved."""
    _check_clamp_bounds(a, b)
    return float(y) if a < abs(y) <= b else 0.0


def exact_quantile(rv_scalar: RandomVariable, p: float) -> float:
    """sup{x in support : Pr[X >= x] >= p} by descending CCDF enumeration.

    Requires a univariate rv and p in [0, 1].  p = 0 returns the maximum of
    the finite support (the CCDF is always >= 0 there).
    """
    if rv_scalar.d != 1:
        raise ValueError(f"exact_quantile needs a univariate rv, got d={rv_scalar.d}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    support, inverse = np.unique(rv_scalar.values[:, 0], return_inverse=True)
    weight = np.zeros(support.shape[0])
    np.add.at(weight, inverse, rv_scalar.prob)
    acc = 0.0
    for i in range(support.shape[0] - 1, -1, -1):
        acc += weight[i]
        if acc >= p - 1e-12:  # roundoff guard for accumulated probabilities
            return float(support[i])
    return float(support[0])


def truncate_normalized(rv: RandomVariable, a_lo: float, a_hi: float) -> RandomVariable:
    """Clamp every outcome to the (a_lo, a_hi] norm shell and rescale by 1/a_hi.

    The result is supported in the unit ball: rows keep their direction, rows
    outside the shell become zero.
    """
    _check_clamp_bounds(a_lo, a_hi)
    if not math.isfinite(a_hi):
        raise ValueError("a_hi must be finite (the shell is rescaled by 1/a_hi)")
    norms = np.linalg.norm(rv.values, axis=1)
    keep = (a_lo < norms) & (norms <= a_hi)
    new_values = np.where(keep[:, None], rv.values / a_hi, 0.0)
    return RandomVariable(prob=rv.prob, values=new_values, labels=rv.labels)


def norm_rv(rv: RandomVariable) -> RandomVariable:
    """The univariate random variable of Euclidean norms on the same space."""
    norms = np.linalg.norm(rv.values, axis=1)
    return RandomVariable(prob=rv.prob, values=norms[:, None], labels=rv.labels)


def shift(rv: RandomVariable, eta: np.ndarray) -> RandomVariable:
    """Subtract the vector eta from every outcome value."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (rv.d,):
        raise ValueError(f"eta has shape {eta.shape}, expected ({rv.d},)")
    return RandomVariable(prob=rv.prob, values=rv.values - eta, labels=rv.labels)


def from_commuting_observables(
    amplitudes: np.ndarray, eigenvalues: np.ndarray
) -> RandomVariable:
    """Random variable induced by measuring commuting observables on a state.

    Outcome j carries probability |amplitudes[j]|^2 and value column j of
    ``eigenvalues`` (one row per observable).  Amplitude phases never affect
    the result.
    """
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if amplitudes.ndim != 1:
        raise ValueError("amplitudes must be a vector")
    nrm = float(np.linalg.norm(amplitudes))
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"amplitudes must be normalized within 1e-9, got norm {nrm!r}")
    eigenvalues = np.atleast_2d(np.asarray(eigenvalues, dtype=float))
    if eigenvalues.shape[1] != amplitudes.shape[0]:
        raise ValueError(
            f"eigenvalues has {eigenvalues.shape[1]} columns, expected {amplitudes.shape[0]}"
        )
    prob = np.abs(amplitudes) ** 2
    prob = prob / prob.sum()  # squeeze the 1e-9 normalization slack to an exact 1
    return RandomVariable(prob=prob, values=eigenvalues.T)


def parse_distribution_spec(text: str) -> RandomVariable:
    """Parse the JSON distribution document into a validated RandomVariable.

    Schema: {"d": int, "omega": [str...] (optional), "prob": [num...],
    "values": [[num...]...]}.  Probabilities are renormalized only when their
    sum is within 1e-9 of 1, otherwise the document is rejected.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not a valid JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("document root must be a JSON object")
    for field in ("d", "prob", "values"):
        if field not in doc:
            raise ValueError(f"missing required field {field!r}")
    d = doc["d"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ValueError(f"field 'd' must be a positive integer, got {d!r}")
    prob_raw = doc["prob"]
    values_raw = doc["values"]
    if not isinstance(prob_raw, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in prob_raw
    ):
        raise ValueError("field 'prob' must be a list of numbers")
    if not isinstance(values_raw, list) or len(values_raw) != len(prob_raw):
        raise ValueError(
            f"field 'values' must list one row per outcome ({len(prob_raw)} expected)"
        )
    for k, row in enumerate(values_raw):
        if not isinstance(row, list) or len(row) != d:
            raise ValueError(f"values row {k} must have length d={d}")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row):
            raise ValueError(f"values row {k} must contain numbers only")
    prob = np.asarray(prob_raw, dtype=float)
    if np.any(prob < 0.0):
        raise ValueError("field 'prob' must be nonnegative")
    total = float(prob.sum())
    if abs(total - 1.0) > _PARSE_SUM_TOL:
        raise ValueError(f"field 'prob' must sum to 1 within {_PARSE_SUM_TOL}, got {total!r}")
    prob = prob / total
    labels: tuple[str, ...] = ()
    if "omega" in doc:
        omega = doc["omega"]
        if (
            not isinstance(omega, list)
            or len(omega) != len(prob_raw)
            or not all(isinstance(x, str) for x in omega)
        ):
            raise ValueError("field 'omega' must be a list of strings, one per outcome")
        labels = tuple(omega)
    return RandomVariable(prob=prob, values=np.asarray(values_raw, dtype=float), labels=labels)


def serialize_distribution_spec(rv: RandomVariable) -> str:
    """Serialize to the JSON document schema; numeric fields round-trip exactly.

    json emits shortest-roundtrip float literals, so parse(serialize(rv))
    reproduces prob and values bit for bit.
    """
    doc = {
        "d": rv.d,
        "omega": list(rv.labels),
        "prob": [float(p) for p in rv.prob],
        "values": [[float(x) for x in row] for row in rv.values],
    }
    return json.dumps(doc, indent=2) + "\n"
