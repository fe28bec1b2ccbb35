"""Quantum mean estimators built on the grid-register simulator.

Four estimators share the same skeleton: prepare a uniform grid superposition,
imprint a directional-mean phase through a simulated oracle, apply the inverse
grid Fourier transform, measure, rescale, and median-combine repetitions.
They differ in which oracle supplies the phase and how budgets are split.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qmeanlab.classical import coordinate_median, subgaussian_estimate
from qmeanlab.gridqft import (
    GridSpec,
    GridState,
    apply_phase_function,
    grid_axis_points,
    inverse_qft,
    lattice_cap,
    measurement_distribution,
    uniform_superposition,
)
from qmeanlab.oracles import (
    DEFAULT_COSTS,
    CostLedger,
    CostModel,
    NoiseModel,
    binary_phase_is_linear,
    directional_phases_binary,
    directional_phases_phase_model,
    linear_phase_function,
    perturb,
    quantile_oracle,
)
from qmeanlab.probspace import (
    RandomVariable,
    mean,
    moments,
    norm_rv,
    shift,
    truncate_normalized,
)

logger = logging.getLogger(__name__)

__all__ = [
    "BINARY_ORACLE_EPS",
    "PHASE_ORACLE_EPS",
    "PHASE_ORACLE_ETA",
    "QUANTILE_C",
    "EstimateReport",
    "bounded_estimator",
    "near_optimal_estimator",
    "euclidean_estimator",
    "qphase_estimator",
    "qlowprec_estimator",
    "phase_model_dispatch",
    "empirical_rv",
]

# Phase-synthesis accuracy of the binary-oracle construction.
BINARY_ORACLE_EPS = 1.0 / 25.0
# Accuracy / bad-fraction budget of the phase-oracle construction; together
# they satisfy eps^2 + eta <= 1/144, the state-distance budget the repetition
# count is calibrated for.
PHASE_ORACLE_EPS = 1.0 / (12.0 * math.sqrt(2.0))
PHASE_ORACLE_ETA = 1.0 / 288.0
# Quantile-oracle approximation constant: the result lands in [Q(p), Q(c*p)].
QUANTILE_C = 0.25


@dataclass(frozen=True)
class EstimateReport:
    """One estimator run: the estimate, the exact truth, errors, and costs."""

    estimate: np.ndarray
    truth: np.ndarray
    err_inf: float
    err_l2: float
    ledger: CostLedger
    estimator_id: str
    params: dict[str, Any]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        est = np.asarray(self.estimate, dtype=float).copy()
        tru = np.asarray(self.truth, dtype=float).copy()
        est.flags.writeable = False
        tru.flags.writeable = False
        object.__setattr__(self, "estimate", est)
        object.__setattr__(self, "truth", tru)
        diff = est - tru
        if abs(float(np.max(np.abs(diff), initial=0.0)) - self.err_inf) > 1e-12:
            raise ValueError("err_inf does not match estimate/truth")
        if abs(float(np.linalg.norm(diff)) - self.err_l2) > 1e-12:
            raise ValueError("err_l2 does not match estimate/truth")


def _report(
    estimate: np.ndarray,
    truth: np.ndarray,
    ledger: CostLedger,
    estimator_id: str,
    params: dict[str, Any],
    diagnostics: dict[str, Any],
) -> EstimateReport:
    diff = np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float)
    return EstimateReport(
        estimate=estimate,
        truth=truth,
        err_inf=float(np.max(np.abs(diff), initial=0.0)),
        err_l2=float(np.linalg.norm(diff)),
        ledger=ledger,
        estimator_id=estimator_id,
        params=params,
        diagnostics=diagnostics,
    )


def _noise_echo(noise: NoiseModel) -> dict[str, Any]:
    return {"mode": noise.mode, "eps": noise.eps, "eta": noise.eta, "seed": noise.seed}


def _measure_reps(state: GridState, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``reps`` measurement outcomes from one fixed state.

    The Born distribution is computed once and inverted by searchsorted; the
    phase function is deterministic within a run, so re-deriving the state per
    repetition would only repeat identical work.
    """
    spec = state.spec
    axis = grid_axis_points(spec.m)
    dist = measurement_distribution(state)
    out = np.empty((reps, spec.d))
    if state.is_product:
        for j, marginal in enumerate(dist):
            cdf = np.cumsum(marginal / marginal.sum())
            idx = np.searchsorted(cdf, rng.random(reps), side="right")
            out[:, j] = axis[np.minimum(idx, spec.m - 1)]
    else:
        p = dist / dist.sum()
        cdf = np.cumsum(p)
        flat = np.searchsorted(cdf, rng.random(reps), side="right")
        multi = np.unravel_index(np.minimum(flat, p.shape[0] - 1), (spec.m,) * spec.d)
        for j in range(spec.d):
            out[:, j] = axis[multi[j]]
    return out


def _run_phase_reps(
    spec: GridSpec,
    phase,
    reps: int,
    scale: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """uniform -> phase -> inverse QFT -> ``reps`` measurements, scaled."""
    state = inverse_qft(apply_phase_function(uniform_superposition(spec), phase))
    return scale * _measure_reps(state, reps, rng)


def bounded_estimator(
    rv: RandomVariable,
    L2: float,
    n: float,
    delta: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    costs: CostModel = DEFAULT_COSTS,
) -> EstimateReport:
    """Mean estimator for unit-ball random variables with E||X||_2 <= L2.

    Early-exits to 0 when the budget cannot beat the trivial estimate;
    otherwise runs ceil(18*log2(d/delta)) repetitions of the binary-oracle
    phase-estimation round at grid resolution m chosen from (n, L2, delta),
    rescales each measured point by 2*pi/alpha, and takes the coordinate-wise
    lower median.
    """
    if not (0 < L2 <= 1):
        raise ValueError(f"L2 must lie in (0, 1], got {L2!r}")
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n!r}")
    norms = np.linalg.norm(rv.values, axis=1)
    if norms.max(initial=0.0) > 1.0 + 1e-12:
        worst = int(np.argmax(norms))
        raise ValueError(f"outcome {worst} has norm {norms[worst]!r} > 1")
    exp_norm = moments(rv).exp_norm2
    if exp_norm > L2 + 1e-12:
        raise ValueError(f"L2={L2!r} is below the true E||X||_2 = {exp_norm!r}")

    d = rv.d
    truth = mean(rv)
    ledger = CostLedger()
    params: dict[str, Any] = {"n": float(n), "L2": float(L2), "delta": float(delta), "noise": _noise_echo(noise)}

    if n <= math.log2(d / delta) / math.sqrt(L2):
        return _report(
            np.zeros(d), truth, ledger, "bounded", params, {"early_exit": True}
        )

    alpha = 1.0 / math.sqrt(math.log2(400.0 * math.pi * n * math.sqrt(d)))
    m = 2 ** math.ceil(math.log2(8.0 * math.pi / alpha * n / (math.sqrt(L2) * math.log2(d / delta))))
    reps = math.ceil(18.0 * math.log2(d / delta))

    fast = noise.mode == "ideal" and binary_phase_is_linear(rv, alpha, m)
    if not fast and m**d > lattice_cap():
        raise ValueError(
            f"lattice cap exceeded: m^d = {m}^{d} = {m**d} > {lattice_cap()} amplitudes "
            "(the clamped phase is non-separable and needs the full state)"
        )

    phase = None
    for _ in range(reps):
        # one oracle construction per repetition; the ledger sees every one
        phase = directional_phases_binary(rv, L2, m, alpha, BINARY_ORACLE_EPS, ledger, costs)
    if fast:
        # the clamp provably never fires, so the phase is exactly linear and
        # the register can stay in product form at any m
        compute_phase = linear_phase_function(m * alpha * truth, description="binary-linear")
    else:
        compute_phase = perturb(phase, noise, GridSpec(m=m, d=d))

    per_rep = _run_phase_reps(GridSpec(m=m, d=d), compute_phase, reps, 2.0 * math.pi / alpha, rng)
    estimate = coordinate_median(per_rep)
    return _report(
        estimate,
        truth,
        ledger,
        "bounded",
        params,
        {"early_exit": False, "alpha": alpha, "m": m, "reps": reps, "fast_path": fast},
    )


def near_optimal_estimator(
    rv: RandomVariable,
    n: float,
    delta: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    c: float = QUANTILE_C,
    exact_quantiles: bool = False,
    costs: CostModel = DEFAULT_COSTS,
) -> EstimateReport:
    """General-purpose estimator: center, slice into norm shells, estimate each.

    A cheap classical median-of-means supplies the center eta; quantiles of
    ||X - eta||_2 at p = 2^-j define nested shells; each normalized shell goes
    through :func:`bounded_estimator` with budget n' and the results recombine
    as eta + sum_j a_j * mu_j.  ``exact_quantiles`` replaces the seeded
    quantile oracle with exact quantiles (same ledger charges) and additionally
    records the structural inequalities the shell construction guarantees.
    """
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    d = rv.d
    log_term = math.log2(d / delta)
    if n < log_term:
        raise ValueError(f"n={n!r} is below log2(d/delta) = {log_term!r}")
    if not (0 < c < 1):
        raise ValueError(f"c must lie in (0, 1), got {c!r}")

    k = math.ceil(2.0 * math.log2(2.0 * math.sqrt(2.0) * n / log_term))
    nprime = n * (k + 1) * 4.0 * math.log2(5.0 * k * d / delta) / (math.sqrt(c) * log_term)
    shell_delta = delta / (5.0 * k)

    ledger = CostLedger()
    truth = mean(rv)
    params: dict[str, Any] = {
        "n": float(n),
        "delta": float(delta),
        "c": float(c),
        "exact_quantiles": bool(exact_quantiles),
        "noise": _noise_echo(noise),
    }

    n0 = 64 * math.ceil(math.log2(2.0 / delta))
    center, _ = subgaussian_estimate(rv, n0, delta, rng, ledger)

    Y = shift(rv, center)
    normY = norm_rv(Y)
    y_norms = np.linalg.norm(Y.values, axis=1)

    a_prev = 0.0
    estimate = center.astype(float).copy()
    shells: list[dict[str, Any]] = []
    clamp_events = 0
    shell_means_sum = np.zeros(d)  # sum_j a_j * mean(Y_j), rebuilt exactly
    for j in range(k + 1):
        p = 2.0 ** (-j)
        a_j = quantile_oracle(normY, p, shell_delta, c, rng, ledger, costs, exact=exact_quantiles)
        if a_j < a_prev:
            logger.warning(
                "quantile sequence non-monotone at shell %d: %.6g < %.6g; clamped", j, a_j, a_prev
            )
            a_j = a_prev
            clamp_events += 1
        entry: dict[str, Any] = {"j": j, "a": a_j}
        if a_j == a_prev:
            entry["skipped"] = True
        else:
            entry["skipped"] = False
            Yj = truncate_normalized(Y, a_prev, a_j)
            L2_j = min(2.0 ** (-(j - 1)), 1.0)
            sub = bounded_estimator(Yj, L2_j, nprime, shell_delta, noise, rng, costs)
            ledger.merge(sub.ledger)
            estimate = estimate + a_j * sub.estimate
            entry["early_exit"] = sub.diagnostics.get("early_exit")
            entry["m"] = sub.diagnostics.get("m")
            mask = (a_prev < y_norms) & (y_norms <= a_j)
            shell_means_sum = shell_means_sum + Y.prob @ np.where(mask[:, None], Y.values, 0.0)
        shells.append(entry)
        a_prev = a_j

    diagnostics: dict[str, Any] = {
        "k": k,
        "nprime": nprime,
        "n0": n0,
        "center": center,
        "shells": shells,
        "clamp_events": clamp_events,
    }
    if exact_quantiles:
        diagnostics["structural"] = _structural_checks(
            Y, y_norms, [s["a"] for s in shells], k, c, center, truth, shell_means_sum
        )
    return _report(estimate, truth, ledger, "near_optimal", params, diagnostics)


def _structural_checks(
    Y: RandomVariable,
    y_norms: np.ndarray,
    a_seq: list[float],
    k: int,
    c: float,
    center: np.ndarray,
    truth: np.ndarray,
    shell_means_sum: np.ndarray,
) -> dict[str, float]:
    """Inequalities the exact-quantile shell construction guarantees.

    quantile_margin: min_j of c^{-1/2} 2^{j/2} sqrt(E||Y||^2) - a_j.
    slice_margin:    min over run shells of 2^{-(j-1)} - E||Y_j||_2.
    tail_margin:     sqrt(E||Y||^2)/2^{k/2} - ||mean of the >a_k tail||_inf.
    decomposition_residual: || center + sum_j a_j mean(Y_j) + tail mean - mu ||_inf.
    """
    exp_sq = moments(Y).exp_norm2_sq
    root = math.sqrt(max(exp_sq, 0.0))
    quantile_margin = math.inf
    slice_margin = math.inf
    a_prev = 0.0
    for j, a_j in enumerate(a_seq):
        quantile_margin = min(quantile_margin, 2.0 ** (j / 2.0) / math.sqrt(c) * root - a_j)
        if a_j != a_prev:
            mask = (a_prev < y_norms) & (y_norms <= a_j)
            slice_exp = float(Y.prob @ (y_norms * mask)) / a_j
            slice_margin = min(slice_margin, min(2.0 ** (-(j - 1)), 1.0) - slice_exp)
        a_prev = a_j
    tail_mask = y_norms > a_seq[-1]
    tail_mean = Y.prob @ np.where(tail_mask[:, None], Y.values, 0.0)
    tail_margin = root / 2.0 ** (k / 2.0) - float(np.max(np.abs(tail_mean), initial=0.0))
    residual = float(
        np.max(np.abs(center + shell_means_sum + tail_mean - truth), initial=0.0)
    )
    return {
        "quantile_margin": quantile_margin,
        "slice_margin": slice_margin,
        "tail_margin": tail_margin,
        "decomposition_residual": residual,
    }


def euclidean_estimator(
    rv: RandomVariable,
    n: float,
    delta: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    costs: CostModel = DEFAULT_COSTS,
) -> EstimateReport:
    """l2-oriented front end: classical baseline when n <= d, quantum above."""
    d = rv.d
    log_term = math.log2(d / delta)
    if n < log_term:
        raise ValueError(f"n={n!r} is below log2(d/delta) = {log_term!r}")
    truth = mean(rv)
    params: dict[str, Any] = {"n": float(n), "delta": float(delta), "noise": _noise_echo(noise)}
    if n <= d:
        ledger = CostLedger()
        estimate, _ = subgaussian_estimate(rv, int(n), delta, rng, ledger)
        return _report(
            estimate, truth, ledger, "euclidean", params, {"branch": "classical"}
        )
    sub = near_optimal_estimator(rv, n, delta, noise, rng, costs=costs)
    return _report(
        sub.estimate,
        truth,
        sub.ledger,
        "euclidean",
        params,
        {"branch": "quantum", "inner": sub.diagnostics},
    )


def qphase_estimator(
    rv: RandomVariable,
    n: float,
    nprime: float,
    delta: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    costs: CostModel = DEFAULT_COSTS,
) -> EstimateReport:
    """High-precision estimator from phase oracles, values in [-1/4, 1/4]^d.

    Resolution follows k = floor(min(n, n'/sqrt(d))); the imprinted phase is
    exactly linear, so IDEAL noise keeps the register in product form.
    """
    d = rv.d
    _check_phase_range(rv)
    log_term = math.log2(d / delta)
    if n < log_term:
        raise ValueError(f"n={n!r} is below log2(d/delta) = {log_term!r}")
    if nprime < math.sqrt(d) * log_term:
        raise ValueError(
            f"nprime={nprime!r} is below sqrt(d)*log2(d/delta) = {math.sqrt(d) * log_term!r}"
        )
    k = math.floor(min(n, nprime / math.sqrt(d)))
    m = 2 ** max(0, math.ceil(math.log2(8.0 * math.pi * k / (math.sqrt(d) * log_term))))
    reps = math.ceil(18.0 * log_term)

    ledger = CostLedger()
    phase = None
    for _ in range(reps):
        phase = directional_phases_phase_model(
            rv, m, PHASE_ORACLE_EPS, PHASE_ORACLE_ETA, ledger, costs
        )
    compute_phase = perturb(phase, noise, GridSpec(m=m, d=d))

    per_rep = _run_phase_reps(GridSpec(m=m, d=d), compute_phase, reps, 2.0 * math.pi, rng)
    estimate = coordinate_median(per_rep)
    params: dict[str, Any] = {
        "n": float(n),
        "nprime": float(nprime),
        "delta": float(delta),
        "noise": _noise_echo(noise),
    }
    return _report(
        estimate,
        mean(rv),
        ledger,
        "qphase",
        params,
        {"k": k, "m": m, "reps": reps, "eps": PHASE_ORACLE_EPS, "eta": PHASE_ORACLE_ETA},
    )


def empirical_rv(rv: RandomVariable, count: int, rng: np.random.Generator) -> RandomVariable:
    """Empirical distribution of ``count`` draws, as a RandomVariable."""
    idx = rng.choice(rv.size, size=count, p=rv.prob)
    uniq, counts = np.unique(idx, return_counts=True)
    return RandomVariable(prob=counts / count, values=rv.values[uniq])


def qlowprec_estimator(
    rv: RandomVariable,
    n: float,
    nprime: float,
    delta: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    costs: CostModel = DEFAULT_COSTS,
) -> EstimateReport:
    """Low-precision analog estimator: phase-estimate empirical resamples.

    Each of ceil(32*log2(d/delta)) outer repetitions draws k' classical
    samples, builds their empirical distribution P-bar, and runs one
    phase-oracle round against P-bar at resolution derived from k = 2n'/sqrt(d).
    The k' draws are physical experiments (charged as such); the inner round's
    state preparations act on the empirical surrogate, so only its phase
    queries carry over to the run ledger.
    """
    d = rv.d
    _check_phase_range(rv)
    log_term = math.log2(d / delta)
    if n < log_term:
        raise ValueError(f"n={n!r} is below log2(d/delta) = {log_term!r}")
    if nprime < math.sqrt(d) * log_term:
        raise ValueError(
            f"nprime={nprime!r} is below sqrt(d)*log2(d/delta) = {math.sqrt(d) * log_term!r}"
        )
    k_prime = math.floor(2.0 * n / log_term)
    outer = math.ceil(32.0 * log_term)
    inner_k = 2.0 * nprime / math.sqrt(d)
    m = 2 ** max(0, math.ceil(math.log2(8.0 * math.pi * inner_k / (math.sqrt(d) * log_term))))
    spec = GridSpec(m=m, d=d)

    ledger = CostLedger()
    per_rep = np.empty((outer, d))
    for r in range(outer):
        pbar = empirical_rv(rv, k_prime, rng)
        ledger.charge(classical_samples=float(k_prime), experiments=float(k_prime))
        inner = CostLedger()
        phase = directional_phases_phase_model(
            pbar, m, PHASE_ORACLE_EPS, PHASE_ORACLE_ETA, inner, costs
        )
        ledger.charge(phase_queries=inner.phase_queries)
        compute_phase = perturb(phase, noise, spec)
        per_rep[r] = _run_phase_reps(spec, compute_phase, 1, 2.0 * math.pi, rng)[0]
    estimate = coordinate_median(per_rep)
    params: dict[str, Any] = {
        "n": float(n),
        "nprime": float(nprime),
        "delta": float(delta),
        "noise": _noise_echo(noise),
    }
    return _report(
        estimate,
        mean(rv),
        ledger,
        "qlowprec",
        params,
        {"k_prime": k_prime, "outer": outer, "inner_k": inner_k, "m": m},
    )


def _check_phase_range(rv: RandomVariable) -> None:
    bad = np.nonzero(np.abs(rv.values).max(axis=1) > 0.25 + 1e-12)[0]
    if bad.size:
        raise ValueError(
            f"outcome {int(bad[0])} leaves [-1/4, 1/4]^d "
            f"(max coordinate {np.abs(rv.values[bad[0]]).max()!r})"
        )


def phase_model_dispatch(
    rv: RandomVariable,
    n: float,
    nprime: float,
    delta: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    costs: CostModel = DEFAULT_COSTS,
) -> EstimateReport:
    """Budget-driven three-way dispatch for phase-oracle estimation.

    Starved budgets (n' < d or n < log2(d/delta)) return the trivial zero
    estimate at zero cost; modest experiment budgets (n < d) go low-precision;
    ample budgets go high-precision.
    """
    d = rv.d
    _check_phase_range(rv)
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    params: dict[str, Any] = {
        "n": float(n),
        "nprime": float(nprime),
        "delta": float(delta),
        "noise": _noise_echo(noise),
    }
    if nprime < d or n < math.log2(d / delta):
        return _report(
            np.zeros(d), mean(rv), CostLedger(), "phase_dispatch", params, {"branch": "trivial"}
        )
    if n < d:
        sub = qlowprec_estimator(rv, n, nprime, delta, noise, rng, costs)
        branch = "low_precision"
    else:
        sub = qphase_estimator(rv, n, nprime, delta, noise, rng, costs)
        branch = "high_precision"
    return _report(
        sub.estimate,
        sub.truth,
        sub.ledger,
        "phase_dispatch",
        params,
        {"branch": branch, "inner": sub.diagnostics},
    )
