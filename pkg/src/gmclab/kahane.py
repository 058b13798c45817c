"""Randomized property testing of the covariance-domination convexity
inequality on finite Gaussian vectors.

Pairs (C1, C2) with C1 <= C2 entrywise are generated by construction
(C2 = C1 + b b^T with b >= 0); for convex f the weighted exponential sums
must satisfy E f(M1) <= E f(M2), reversed for concave f.  The second
moment has a closed form used as the exact oracle everywhere in the suite.
"""

from dataclasses import dataclass

import numpy as np

from .errors import UnknownConvexityTag
from .gmc import _check_gamma
from .numerics import replica_seed, rng_for, substream_seed

CONVEX = "convex"
CONCAVE = "concave"

EXP_CAP = 40.0  # argument cap for the exp test function (variance guard)


@dataclass(frozen=True, eq=False)
class CovariancePair:
    c1: np.ndarray
    c2: np.ndarray
    weights: np.ndarray
    seed: int

    def __post_init__(self):
        if np.min(self.c2 - self.c1) < -1e-12:
            raise ValueError("entrywise domination violated")


@dataclass
class TrialResult:
    tag: str
    kind: str
    e_f1: float
    e_f2: float
    se_diff: float
    consistent: bool
    n_replicas: int


def battery(cap: float = EXP_CAP):
    """Built-in convex/concave test functions on R+."""
    return {
        "square": (lambda x: x * x, CONVEX),
        "hinge": (None, CONVEX),  # (x - t)+ with t filled per pair
        "exp_capped": (lambda x: np.exp(np.minimum(x, cap)), CONVEX),
        "sqrt": (np.sqrt, CONCAVE),
        "log1p": (np.log1p, CONCAVE),
    }


def generate_dominating_pair(n: int, seed: int, n_bumps: int = 1,
                             scale: float = 0.6) -> CovariancePair:
    """Random PSD pair with exact entrywise domination.

    c1 = B B^T for a random B; c2 adds nonnegative rank-one bumps b b^T
    with b >= 0 entrywise, which preserves PSD and guarantees c1 <= c2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_for(seed)
    b_mat = rng.normal(size=(n, n)) / np.sqrt(n)
    c1 = b_mat @ b_mat.T
    c2 = c1.copy()
    for _ in range(n_bumps):
        bump = np.abs(rng.normal(size=n)) * scale
        c2 = c2 + np.outer(bump, bump)
    weights = rng.uniform(0.5, 1.5, size=n) / n
    return CovariancePair(c1=c1, c2=c2, weights=weights, seed=seed)


def exact_second_moment(weights, cov, gamma: float) -> float:
    """Sum_ij a_i a_j exp(gamma^2 cov_ij): the discrete second moment of the
    weighted exponential sum, exact."""
    a = np.asarray(weights, dtype=float)
    cov = np.asarray(cov, dtype=float)
    return float(a @ np.exp(gamma * gamma * cov) @ a)


def _masses(pair_cov, weights, gamma, xi):
    chol = np.linalg.cholesky(pair_cov + 1e-12 * np.eye(pair_cov.shape[0]))
    x = chol @ xi
    w = weights[:, None] * np.exp(gamma * x - 0.5 * gamma**2
                                  * pair_cov.diagonal()[:, None])
    return w.sum(axis=0)


def convexity_trial(pair: CovariancePair, gamma: float, tag: str,
                    n_replicas: int = 10_000, seed: int = 0,
                    cap: float = EXP_CAP, slack_se: float = 2.0) -> TrialResult:
    """One Monte Carlo comparison of E f(M1) vs E f(M2).

    The same standard normals drive both fields through their own
    factorizations (a coupling; both marginals stay exact and the
    difference SE is computed from the per-replica differences).
    """
    _check_gamma(gamma)
    funcs = battery(cap)
    if tag not in funcs:
        raise UnknownConvexityTag(f"unknown test function {tag!r}")
    fn, kind = funcs[tag]
    if tag == "hinge":
        t = float(pair.weights.sum())
        fn = lambda x: np.maximum(x - t, 0.0)  # noqa: E731

    n = pair.weights.size
    rng = rng_for(substream_seed(replica_seed(seed, 0), 0xF00D))
    xi = rng.standard_normal((n, n_replicas))
    f1 = fn(_masses(pair.c1, pair.weights, gamma, xi))
    f2 = fn(_masses(pair.c2, pair.weights, gamma, xi))
    diff = f2 - f1
    se = float(diff.std(ddof=1) / np.sqrt(n_replicas))
    mean_diff = float(diff.mean())
    if kind == CONVEX:
        consistent = mean_diff >= -slack_se * se
    else:
        consistent = mean_diff <= slack_se * se
    return TrialResult(tag=tag, kind=kind,
                       e_f1=float(f1.mean()), e_f2=float(f2.mean()),
                       se_diff=se, consistent=consistent,
                       n_replicas=n_replicas)


def run_battery(n_pairs: int, gammas, n_points: int = 12,
                n_replicas: int = 10_000, master_seed: int = 0,
                cap: float = EXP_CAP):
    """The full randomized campaign; returns the trial ledger (list of
    dicts, one per (pair, gamma, f)) and the consistency fraction."""
    ledger = []
    n_ok = 0
    n_tot = 0
    for i in range(n_pairs):
        pair_seed = replica_seed(master_seed, i)
        pair = generate_dominating_pair(n_points, pair_seed)
        for gamma in gammas:
            for tag in battery(cap):
                trial = convexity_trial(pair, gamma, tag, n_replicas,
                                        seed=pair_seed, cap=cap)
                n_tot += 1
                n_ok += trial.consistent
                ledger.append({
                    "pair_seed": pair_seed, "n": n_points, "gamma": gamma,
                    "f": tag, "kind": trial.kind,
                    "e_f1": trial.e_f1, "e_f2": trial.e_f2,
                    "se_diff": trial.se_diff,
                    "verdict": "consistent" if trial.consistent else "violated",
                    "exp_cap": cap,
                })
    return ledger, n_ok / n_tot
