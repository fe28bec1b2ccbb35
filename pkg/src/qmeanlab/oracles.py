"""Semantic oracle layer: exact phase functions, noise, quantiles, costs.

Instead of compiling oracle circuits gate by gate, this module evaluates the
exact phase function each oracle construction approximates and charges its
cost through explicit formulas ("model units", leading constants configurable
and defaulting to 1).  Controlled imperfection is re-introduced by a seeded
noise model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from qmeanlab.gridqft import GridSpec, PhaseFunction, grid_axis_points, lattice_cap
from qmeanlab.probspace import RandomVariable, exact_quantile, mean, moments

__all__ = [
    "CostModel",
    "DEFAULT_COSTS",
    "CostLedger",
    "NoiseModel",
    "linear_phase_function",
    "binary_phase_is_linear",
    "directional_phases_binary",
    "directional_phases_phase_model",
    "perturb",
    "quantile_oracle",
    "conversion_costs",
]


@dataclass(frozen=True)
class CostModel:
    """Leading constants of every cost-charging formula (model units)."""

    binary_oracle: float = 1.0
    phase_experiments: float = 1.0
    phase_queries: float = 1.0
    quantile: float = 1.0
    amplitude_amplification: float = 1.0
    amp_to_phase: float = 1.0
    phase_to_amp: float = 1.0


DEFAULT_COSTS = CostModel()


@dataclass
class CostLedger:
    """Running totals of oracle uses, in model units.

    experiments counts state preparations, binary_queries/phase_queries count
    the two oracle flavors, classical_samples counts raw draws and
    quantile_calls counts quantile-oracle invocations.  Counters only ever
    increase; merging adds componentwise.
    """

    experiments: float = 0.0
    binary_queries: float = 0.0
    phase_queries: float = 0.0
    classical_samples: float = 0.0
    quantile_calls: float = 0.0

    def charge(self, **deltas: float) -> None:
        for name, delta in deltas.items():
            if not hasattr(self, name):
                raise ValueError(f"unknown ledger counter {name!r}")
            if delta < 0:
                raise ValueError(f"ledger charge must be nonnegative, got {name}={delta!r}")
            setattr(self, name, getattr(self, name) + float(delta))

    def merge(self, other: CostLedger) -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def as_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class NoiseModel:
    """IDEAL leaves phases alone; PERTURBED injects seeded deviations.

    Under PERTURBED, at most ceil(eta/2 * |G|) grid points are "bad" (their
    phase deviation is arbitrary in (-pi, pi]); every other point gets a
    deviation delta with |2 sin(delta/2)| <= eps.
    """

    mode: str = "ideal"
    eps: float = 0.0
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("ideal", "perturbed"):
            raise ValueError(f"mode must be 'ideal' or 'perturbed', got {self.mode!r}")
        if self.mode == "perturbed" and not (0 < self.eps < 1 and 0 < self.eta < 1):
            raise ValueError(f"perturbed noise needs eps, eta in (0,1), got {self.eps}, {self.eta}")

    @classmethod
    def ideal(cls) -> NoiseModel:
        return cls()

    @classmethod
    def perturbed(cls, eps: float, eta: float, seed: int) -> NoiseModel:
        return cls(mode="perturbed", eps=eps, eta=eta, seed=seed)


def linear_phase_function(coeffs: np.ndarray, description: str = "linear") -> PhaseFunction:
    """The separable phase theta_u = <coeffs, u>."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    comps = tuple((lambda pts, s=float(s): s * pts) for s in coeffs)
    return PhaseFunction(
        evaluate=lambda pts: pts @ coeffs,
        separable=True,
        axis_components=comps,
        description=description,
    )


def binary_phase_is_linear(rv: RandomVariable, alpha: float, m: int) -> bool:
    """Certificate that the clamp in the binary-model phase never fires.

    |alpha <u, x>| <= alpha * max_j|u_j| * ||x||_1 and the grid's largest
    axis coordinate is 1/2 - 1/(2m); if that product stays <= 1 for the
    worst outcome, the clamped phase equals the linear phase everywhere.
    """
    max_l1 = float(np.abs(rv.values).sum(axis=1).max(initial=0.0))
    return alpha * (0.5 - 0.5 / m) * max_l1 <= 1.0


def directional_phases_binary(
    rv: RandomVariable,
    L2: float,
    m: int,
    alpha: float,
    eps: float,
    ledger: CostLedger,
    costs: CostModel = DEFAULT_COSTS,
) -> PhaseFunction:
    """Clamped directional-mean phase built from binary oracle queries.

    theta_u = m * sum_omega P(omega) * clamp_scalar(alpha*<u, X(omega)>, 0, 1).
    Charges C*m*sqrt(L2)*ceil(log2(1/eps))^2 model units to experiments and
    binary queries.  The clamp makes the phase non-separable in general; see
    :func:`binary_phase_is_linear` for the exact linear special case.
    """
    if not (0 < L2 <= 1):
        raise ValueError(f"L2 must lie in (0, 1], got {L2!r}")
    if not (0 < alpha < 1):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    norms = np.linalg.norm(rv.values, axis=1)
    if norms.max(initial=0.0) > 1.0 + 1e-12:
        worst = int(np.argmax(norms))
        raise ValueError(
            f"outcome {worst} has norm {norms[worst]!r} > 1; the binary model needs ||X|| <= 1"
        )
    exp_norm = moments(rv).exp_norm2
    if exp_norm > L2 + 1e-12:
        raise ValueError(f"L2={L2!r} is below the true E||X||_2 = {exp_norm!r}")
    if m < 1.0 / L2:
        raise ValueError(f"m={m} is below 1/L2 = {1.0 / L2!r}")
    values, prob = rv.values, rv.prob

    def evaluate(pts: np.ndarray) -> np.ndarray:
        z = alpha * (pts @ values.T)
        np.multiply(z, np.abs(z) <= 1.0, out=z)
        return m * (z @ prob)

    ledger.charge(
        experiments=costs.binary_oracle * m * math.sqrt(L2) * math.ceil(math.log2(1 / eps)) ** 2,
        binary_queries=costs.binary_oracle * m * math.sqrt(L2) * math.ceil(math.log2(1 / eps)) ** 2,
    )
    return PhaseFunction(evaluate=evaluate, separable=False, description="binary-clamped")


def directional_phases_phase_model(
    rv: RandomVariable,
    m: int,
    eps: float,
    eta: float,
    ledger: CostLedger,
    costs: CostModel = DEFAULT_COSTS,
) -> PhaseFunction:
    """Ideal directional-mean phase built from phase oracle queries.

    theta_u = m * <u, mean(rv)>, separable.  Requires every outcome in
    [-1/4, 1/4]^d.  Charges C*sqrt(d)*m*ceil(log2(1/(eps*eta)))^2 experiments
    and C*d*m*ceil(log2(1/(eps*eta)))^4 phase queries.
    """
    bad = np.nonzero(np.abs(rv.values).max(axis=1) > 0.25 + 1e-12)[0]
    if bad.size:
        raise ValueError(
            f"outcome {int(bad[0])} leaves [-1/4, 1/4]^d "
            f"(max coordinate {np.abs(rv.values[bad[0]]).max()!r})"
        )
    d = rv.d
    if m < eps / (6 * math.sqrt(d)):
        raise ValueError(f"m={m} is below eps/(6*sqrt(d)) = {eps / (6 * math.sqrt(d))!r}")
    log_factor = math.ceil(math.log2(1 / (eps * eta)))
    ledger.charge(
        experiments=costs.phase_experiments * math.sqrt(d) * m * log_factor**2,
        phase_queries=costs.phase_queries * d * m * log_factor**4,
    )
    return linear_phase_function(m * mean(rv), description="phase-model-linear")


def _flat_grid_indices(pts: np.ndarray, m: int) -> np.ndarray:
    # invert u = (2a+1-m)/(2m) per axis, then ravel row-major
    a = np.rint(m * pts + (m - 1) / 2.0).astype(np.int64)
    if np.any((a < 0) | (a >= m)):
        raise ValueError("point off the grid")
    flat = a[:, 0]
    for j in range(1, pts.shape[1]):
        flat = flat * m + a[:, j]
    return flat


def perturb(phase: PhaseFunction, noise: NoiseModel, spec: GridSpec) -> PhaseFunction:
    """Overlay the noise model's seeded phase deviations onto a phase function.

    IDEAL returns the phase unchanged.  PERTURBED draws one deviation per grid
    point (deterministic in the seed): uniform within the |2 sin(delta/2)| <=
    eps band on good points, uniform in (-pi, pi] on the <= ceil(eta/2*|G|)
    bad points selected by seeded ranking.  The result is non-separable, so it
    forces full-state simulation and is subject to the lattice cap.
    """
    if noise.mode == "ideal":
        return phase
    n_points = spec.points
    if n_points > lattice_cap():
        raise ValueError(
            f"lattice cap exceeded: perturbation table needs {n_points} > {lattice_cap()} entries"
        )
    rng = np.random.default_rng(noise.seed)
    scores = rng.random(n_points)
    n_bad = math.ceil(noise.eta / 2.0 * n_points)
    band = 2.0 * math.asin(noise.eps / 2.0)
    deviations = rng.uniform(-band, band, n_points)
    if n_bad > 0:
        bad = np.argpartition(scores, n_bad - 1)[:n_bad]
        deviations[bad] = rng.uniform(-np.pi, np.pi, n_bad)
    base = phase.evaluate

    def evaluate(pts: np.ndarray) -> np.ndarray:
        return np.asarray(base(pts), dtype=float) + deviations[_flat_grid_indices(pts, spec.m)]

    return PhaseFunction(
        evaluate=evaluate,
        separable=False,
        description=f"{phase.description}+perturbed(eps={noise.eps},eta={noise.eta},seed={noise.seed})",
    )


def quantile_oracle(
    rv_scalar: RandomVariable,
    p: float,
    delta: float,
    c: float,
    rng: np.random.Generator,
    ledger: CostLedger,
    costs: CostModel = DEFAULT_COSTS,
    exact: bool = False,
) -> float:
    """Approximate quantile with the guarantee Q(p) <= result <= Q(c*p).

    Success path: a seeded uniform draw over the support values inside
    [Q(p), Q(c*p)].  With probability delta (independent, seeded) the call
    fails and returns an arbitrary support value instead.  Charges
    C*ceil(log2(1/delta))/sqrt(p) to experiments and binary queries.

    ``exact`` short-circuits to the exact quantile Q(p): no failures and no
    rng consumption, but the same ledger charges, so cost accounting stays
    comparable between the two modes.
    """
    if not (0 < p <= 1) or not (0 < delta < 1) or not (0 < c < 1):
        raise ValueError(f"need p in (0, 1], delta and c in (0, 1); got {p!r}, {delta!r}, {c!r}")
    if exact:
        out = exact_quantile(rv_scalar, p)
    else:
        support = np.unique(rv_scalar.values[:, 0])
        failed = rng.random() < delta
        if failed:
            out = float(support[rng.integers(support.shape[0])])
        else:
            lo = exact_quantile(rv_scalar, p)
            hi = exact_quantile(rv_scalar, c * p)
            window = support[(support >= lo) & (support <= hi)]
            out = float(window[rng.integers(window.shape[0])])
    ledger.charge(
        experiments=costs.quantile * math.ceil(math.log2(1 / delta)) / math.sqrt(p),
        binary_queries=costs.quantile * math.ceil(math.log2(1 / delta)) / math.sqrt(p),
        quantile_calls=1.0,
    )
    return out


def conversion_costs(
    kind: str,
    *,
    t: float | None = None,
    eps: float | None = None,
    delta: float | None = None,
    costs: CostModel = DEFAULT_COSTS,
) -> float:
    """Model-unit costs of the amplitude/phase conversion subroutines."""
    if kind == "amplitude_amplification":
        if t is None or eps is None:
            raise ValueError("amplitude_amplification needs t and eps")
        return costs.amplitude_amplification * t * math.log2(1 / eps)
    if kind == "amp_to_phase":
        if t is None or eps is None:
            raise ValueError("amp_to_phase needs t and eps")
        return costs.amp_to_phase * (t + math.log2(1 / eps))
    if kind == "phase_to_amp":
        if eps is None or delta is None:
            raise ValueError("phase_to_amp needs eps and delta")
        return costs.phase_to_amp * math.log2(1 / eps) / delta
    raise ValueError(f"unknown conversion kind {kind!r}")
