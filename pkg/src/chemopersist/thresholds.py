"""Persistence threshold chi*(mu, chi1, chi2) and the negative-moment exponent q.

The auxiliary function is evaluated in the form

    f = mu (B + beta) (1 + [B (|chi2 - B| - beta)^2 + (chi1 - chi2)^2 beta] / (4 B beta)),

which is the form satisfying ``f = mu (B + beta)(1 + 1/q)`` with
``q = 4 B beta / (B (|chi2 - B| - beta)^2 + (chi1 - chi2)^2 beta)`` and which
reproduces the closed forms for chi1 == chi2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .elliptic import ModelParams


class DegenerateExponent(ValueError):
    """q is infinite: beta == |chi2 - B| and chi1 == chi2."""


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not (value > 0 and math.isfinite(value)):
            raise ValueError(f"{name} must be a positive finite number, got {value}")


def eval_f(mu, chi1, chi2, beta, B):
    """Vectorized over ``beta`` and ``B``; scalar inputs return a float."""
    if np.isscalar(beta) and np.isscalar(B):
        _check_positive(mu=mu, chi1=chi1, chi2=chi2, beta=beta, B=B)
    else:
        _check_positive(mu=mu, chi1=chi1, chi2=chi2)
        if np.any(np.asarray(beta) <= 0) or np.any(np.asarray(B) <= 0):
            raise ValueError("beta and B must be positive")
    num = B * (np.abs(chi2 - B) - beta) ** 2 + (chi1 - chi2) ** 2 * beta
    value = mu * (B + beta) * (1.0 + num / (4.0 * B * beta))
    return float(value) if np.ndim(value) == 0 else value


def q_exponent(chi1: float, chi2: float, beta: float, B: float) -> float:
    _check_positive(chi1=chi1, chi2=chi2, beta=beta, B=B)
    den = B * (abs(chi2 - B) - beta) ** 2 + (chi1 - chi2) ** 2 * beta
    if den == 0.0:
        raise DegenerateExponent(
            f"q is infinite at beta={beta}, B={B} (beta = |chi2 - B| with chi1 = chi2)"
        )
    return 4.0 * B * beta / den


def chi_star_equal(mu: float, chi: float) -> float:
    """Closed form of chi* when chi1 == chi2 == chi."""
    _check_positive(mu=mu, chi=chi)
    return mu * chi**2 / 4.0 if chi < 2.0 else mu * (chi - 1.0)


def chi_star_upper_bound(mu: float, chi1: float, chi2: float) -> float:
    """Candidate upper bound min{mu chi2 + mu (chi1-chi2)^2/(4 chi2), mu chi1 + ...}.

    This expression is not implied by the definition of chi* whenever the
    larger chemotaxis constant exceeds 1; see :func:`chi_star_limit_bound`.
    """
    _check_positive(mu=mu, chi1=chi1, chi2=chi2)
    d2 = (chi1 - chi2) ** 2
    return min(mu * chi2 + mu * d2 / (4.0 * chi2), mu * chi1 + mu * d2 / (4.0 * chi1))


def chi_star_limit_bound(mu: float, chi1: float, chi2: float) -> float:
    """``inf_beta f(mu, chi1, chi2, beta, chi2)`` and its swapped twin, i.e. the
    bound obtained by fixing B at the other species' chemotaxis constant."""
    _check_positive(mu=mu, chi1=chi1, chi2=chi2)
    d2 = (chi1 - chi2) ** 2
    return min(mu * chi2 + mu * d2 / 4.0, mu * chi1 + mu * d2 / 4.0)


@dataclass(frozen=True)
class ThresholdQuery:
    mu: float
    chi1: float
    chi2: float
    B_min: float = 1e-9
    B_max: float | None = None
    beta_min: float = 1e-7
    beta_max: float | None = None
    resolution: int = 64
    iterations: int = 200

    def __post_init__(self) -> None:
        _check_positive(mu=self.mu, chi1=self.chi1, chi2=self.chi2)
        cap = 10.0 * (self.chi1 + self.chi2 + self.mu + 1.0)
        if self.B_max is None:
            object.__setattr__(self, "B_max", cap)
        if self.beta_max is None:
            object.__setattr__(self, "beta_max", cap)
        if not 0 < self.B_min < self.B_max:
            raise ValueError("need 0 < B_min < B_max")
        if not 0 < self.beta_min < self.beta_max:
            raise ValueError("need 0 < beta_min < beta_max")
        if self.resolution < 16:
            raise ValueError("resolution must be at least 16")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")

    def swapped(self) -> "ThresholdQuery":
        return replace(self, chi1=self.chi2, chi2=self.chi1)


@dataclass(frozen=True)
class ThresholdResult:
    chi_star: float
    branch: int  # 1 or 2: which of the two infima attained the minimum
    beta: float
    B: float
    q: float
    f_value: float
    margin: float | None = None  # a_min - chi_star when parameters were supplied

    def as_dict(self) -> dict:
        return asdict(self)


def _scan(query: ThresholdQuery) -> tuple[float, float, float]:
    Bs = np.geomspace(query.B_min, query.B_max, query.resolution)
    betas = np.geomspace(query.beta_min, query.beta_max, query.resolution)
    BB, bb = np.meshgrid(Bs, betas, indexing="ij")
    F = eval_f(query.mu, query.chi1, query.chi2, bb, BB)
    # deterministic argmin: lexicographic on (f, B, beta) thanks to ij ordering
    i, j = np.unravel_index(int(np.argmin(F)), F.shape)
    return float(F[i, j]), float(Bs[i]), float(betas[j])


def chi1_star(query: ThresholdQuery) -> tuple[float, float, float]:
    """Approximate ``inf f(mu, chi1, chi2, beta, B)``; returns (value, beta, B).

    A log-spaced grid scan over the search box seeds a Nelder-Mead refinement
    in (log B, log beta), with iterates clamped to the box.  The returned value
    is the smallest f actually evaluated, so it is attained at (beta, B).
    """
    best_f, best_B, best_beta = _scan(query)
    if query.iterations == 0:
        return best_f, best_beta, best_B
    lo = np.log([query.B_min, query.beta_min])
    hi = np.log([query.B_max, query.beta_max])
    best = [best_f, best_B, best_beta]

    def objective(x: np.ndarray) -> float:
        B, beta = np.exp(np.clip(x, lo, hi))
        value = eval_f(query.mu, query.chi1, query.chi2, beta, B)
        if value < best[0]:
            best[:] = [value, float(B), float(beta)]
        return value

    x0 = np.log([best_B, best_beta])
    minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"maxiter": query.iterations, "xatol": 1e-12, "fatol": 1e-15,
                 "initial_simplex": np.array([x0, x0 + [0.25, 0.0], x0 + [0.0, 0.25]])},
    )
    return best[0], best[2], best[1]


def chi_star(query: ThresholdQuery, params: ModelParams | None = None) -> ThresholdResult:
    v1, beta1, B1 = chi1_star(query)
    v2, beta2, B2 = chi1_star(query.swapped())
    if v1 <= v2:
        value, branch, beta, B = v1, 1, beta1, B1
        chi_a, chi_b = query.chi1, query.chi2
    else:
        value, branch, beta, B = v2, 2, beta2, B2
        chi_a, chi_b = query.chi2, query.chi1
    try:
        q = q_exponent(chi_a, chi_b, beta, B)
    except DegenerateExponent:
        q = math.inf
    margin = None if params is None else params.a_min - value
    return ThresholdResult(value, branch, beta, B, q, eval_f(query.mu, chi_a, chi_b, beta, B), margin)


def query_for(params: ModelParams, **search) -> ThresholdQuery:
    return ThresholdQuery(params.mu, params.chi1, params.chi2, **search)


def persistence_margin(params: ModelParams, query: ThresholdQuery | None = None) -> float:
    """``a_min - chi*``; positive exactly when the boundedness and persistence estimates apply."""
    query = query_for(params) if query is None else query
    return params.a_min - chi_star(query).chi_star


def branch_chis(result: ThresholdResult, chi1: float, chi2: float) -> tuple[float, float]:
    """Argument order of f and q for the branch that attained chi*."""
    return (chi1, chi2) if result.branch == 1 else (chi2, chi1)


def decay_witness(params: ModelParams, query: ThresholdQuery | None = None,
                  result: ThresholdResult | None = None) -> tuple[float, float, float, int] | None:
    """Find (beta, B) with q < 1 and ``a_min - f > 3 eps0 / 4`` on the scan lattice.

    Among admissible points (in either branch) the largest q is returned, as
    ``(beta, B, q, branch)``; ``None`` if eps0 <= 0 or no lattice point qualifies.
    """
    query = query_for(params) if query is None else query
    result = chi_star(query) if result is None else result
    eps0 = params.a_min - result.chi_star
    if eps0 <= 0:
        return None
    cutoff = params.a_min - 0.75 * eps0
    Bs = np.geomspace(query.B_min, query.B_max, 4 * query.resolution)
    betas = np.geomspace(query.beta_min, query.beta_max, 4 * query.resolution)
    BB, bb = np.meshgrid(Bs, betas, indexing="ij")
    best = None
    for branch, (ca, cb) in ((1, (params.chi1, params.chi2)), (2, (params.chi2, params.chi1))):
        F = eval_f(params.mu, ca, cb, bb, BB)
        den = BB * (np.abs(cb - BB) - bb) ** 2 + (ca - cb) ** 2 * bb
        with np.errstate(divide="ignore"):
            Q = np.where(den > 0, 4.0 * BB * bb / np.where(den > 0, den, 1.0), np.inf)
        ok = (F < cutoff) & (Q < 1.0)
        if not np.any(ok):
            continue
        k = int(np.argmax(np.where(ok, Q, -np.inf)))
        i, j = np.unravel_index(k, Q.shape)
        cand = (float(Q[i, j]), float(bb[i, j]), float(BB[i, j]), branch)
        if best is None or cand[0] > best[0]:
            best = cand
    if best is None:
        return None
    q, beta, B, branch = best
    return beta, B, q, branch
