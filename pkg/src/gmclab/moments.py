"""Quantitative scaling estimators: ball-mass moments and their exponent,
lower tails and negative moments, a box-counting support dimension proxy,
and the two-scale Cauchy diagnostic.

Fit windows and ladders are configuration knobs: the scaling laws hold up
to unquantified constants, so tolerances here are calibration choices
recorded with each result.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .domain import KernelEval
from .errors import (
    AllCensored,
    BallLeavesDomain,
    BallTooSmallForGrid,
    DegenerateMeasure,
    MismatchedGrids,
    OutOfL2Regime,
)
from .gff import SamplerConfig, get_restricted_sampler, get_sampler
from .gmc import GmcMeasure, _check_gamma, mass_vector
from .parallel import map_chunks
from .stats import batch_means_se, least_squares_fit, median_of_means, wilson_interval

MIN_BALL_SPACINGS = 4


def zeta(q: float, gamma: float) -> float:
    """Ball-mass moment exponent (2 + gamma^2/2) q - gamma^2 q^2 / 2."""
    return (2.0 + gamma * gamma / 2.0) * q - gamma * gamma * q * q / 2.0


@dataclass
class MomentCurve:
    gamma: float
    q: float
    radii: list
    estimates: list
    ses: list
    mom_estimates: list           # medians-of-means, reported alongside
    fitted_slope: float
    slope_se: float
    n_replicas: int
    warned_moment_boundary: bool = False


@dataclass
class TailCurve:
    gamma: float
    nu_grid: list
    log_prob: list
    wilson_low: list
    wilson_high: list
    censored: list
    slope_vs_nu2: float
    slope_se: float
    neg_moments: dict = field(default_factory=dict)


def ball_mass_moments(config: SamplerConfig, gamma: float, q: float, radii,
                      center: complex = 0j, n_replicas: int = 1000,
                      workers: int = 1, n_batches: int = 100) -> MomentCurve:
    """Monte Carlo E[M(B_r(center))^q] over a radius ladder plus the fitted
    log-log slope.

    Only the Gaussian marginal on the cells inside the largest ball is
    sampled (exact marginalization), which keeps the factorization small
    at fine grids.
    """
    _check_gamma(gamma)
    radii = sorted((float(r) for r in radii), reverse=True)
    dom = config.domain
    warned = False
    if gamma != 0 and q >= 4.0 / gamma**2:
        warnings.warn(f"q={q} >= 4/gamma^2={4/gamma**2:.4g}: moment is infinite "
                      "in the limit; estimates are approximation-dependent")
        warned = True
    if radii[-1] < MIN_BALL_SPACINGS * dom.h:
        raise BallTooSmallForGrid(
            f"smallest radius {radii[-1]} < {MIN_BALL_SPACINGS} grid spacings")
    if radii[-1] < config.eps:
        raise BallTooSmallForGrid("smallest radius below the scheme eps")
    if dom.boundary_distance(np.asarray(complex(center))) < radii[0] + dom.boundary_margin:
        raise BallLeavesDomain("largest ball leaves the margin-reduced domain")

    sampler = get_restricted_sampler(config, complex(center), radii[0] + 1e-12)
    dist = np.abs(sampler.points - complex(center))
    indicator = np.stack([(dist <= r).astype(float) for r in radii])

    def chunk(lo, hi):
        vals = sampler.sample_block(lo, hi)
        masses = mass_vector(vals, sampler.variances[:, None], gamma, dom.cell_area)
        return (indicator @ masses) ** q  # (radii, reps)

    blocks = map_chunks(chunk, n_replicas, workers)
    powers = np.hstack(blocks)
    estimates = powers.mean(axis=1)
    ses = np.array([batch_means_se(powers[i], n_batches) for i in range(len(radii))])
    moms = np.array([median_of_means(powers[i], n_batches) for i in range(len(radii))])
    sigma_log = ses / estimates
    slope, _, slope_se = least_squares_fit(np.log(radii), np.log(estimates), sigma_log)
    return MomentCurve(
        gamma=gamma, q=q, radii=radii,
        estimates=estimates.tolist(), ses=ses.tolist(),
        mom_estimates=moms.tolist(),
        fitted_slope=slope, slope_se=slope_se,
        n_replicas=n_replicas, warned_moment_boundary=warned,
    )


def total_mass_samples(config: SamplerConfig, gamma: float, n_replicas: int,
                       workers: int = 1):
    """Replica stream of the total retained-grid mass."""
    _check_gamma(gamma)
    sampler = get_sampler(config)
    area = config.domain.cell_area

    def chunk(lo, hi):
        vals = sampler.sample_block(lo, hi)
        return mass_vector(vals, sampler.variances[:, None], gamma, area).sum(axis=0)

    return np.concatenate(map_chunks(chunk, n_replicas, workers))


def lower_tail(config: SamplerConfig, gamma: float, nu_grid, n_replicas: int,
               workers: int = 1, min_hits: int = 10) -> TailCurve:
    """Empirical lower tail of log M(D) with Wilson intervals, the
    regression slope of log-probability against nu^2, and plug-in negative
    moments E[M^-1], E[M^-2]."""
    nu_grid = sorted(float(v) for v in nu_grid)
    masses = total_mass_samples(config, gamma, n_replicas, workers)
    logm = np.log(masses)
    hits = np.array([(logm <= -nu).sum() for nu in nu_grid])
    if hits[-1] == 0:
        raise AllCensored(f"no replica reached log M <= -{nu_grid[-1]}")
    p = hits / n_replicas
    lo, hi = zip(*[wilson_interval(int(k), n_replicas) for k in hits])
    censored = [int(k) < min_hits for k in hits]
    usable = hits >= max(min_hits, 1)
    sig = np.sqrt((1 - p[usable]) / np.maximum(hits[usable], 1))  # se of log p
    slope, _, slope_se = least_squares_fit(
        np.array(nu_grid)[usable] ** 2, np.log(p[usable]), sig)
    neg = {}
    for m in (1, 2):
        s = masses**-float(m)
        neg[m] = {"estimate": float(s.mean()), "se": float(batch_means_se(s))}
    return TailCurve(
        gamma=gamma, nu_grid=nu_grid,
        log_prob=np.log(np.maximum(p, 1e-300)).tolist(),
        wilson_low=list(map(float, lo)), wilson_high=list(map(float, hi)),
        censored=censored, slope_vs_nu2=slope, slope_se=slope_se,
        neg_moments=neg,
    )


def support_box_dimension(measure: GmcMeasure, mass_fraction: float,
                          k_ladder=None):
    """Box-counting proxy for the support dimension: smallest number of
    dyadic boxes (side 2^-k of the domain side) carrying `mass_fraction`
    of the total mass, fitted against k log 2.

    A proxy, not the theorem: mass-carrying boxes stand in for the
    Hausdorff dimension of the support.
    """
    total = measure.total_mass
    if measure.cell_mass.max() >= mass_fraction * total:
        raise DegenerateMeasure("a single cell carries the requested fraction")
    pts = measure.points
    dom_kind = measure.provenance.get("domain", "disk")
    side = 2.0 if dom_kind == "disk" else 1.0
    ox = -1.0 if dom_kind == "disk" else 0.0
    h = np.sqrt(measure.cell_area)
    if k_ladder is None:
        kmax = int(np.floor(np.log2(side / (4 * h))))
        k_ladder = list(range(1, max(kmax, 3) + 1))
    counts = []
    for k in k_ladder:
        nb = 2**k
        box = side / nb
        ix = np.clip(((pts.real - ox) / box).astype(int), 0, nb - 1)
        iy = np.clip(((pts.imag - ox) / box).astype(int), 0, nb - 1)
        sums = np.bincount(iy * nb + ix, weights=measure.cell_mass, minlength=nb * nb)
        order = np.sort(sums)[::-1]
        csum = np.cumsum(order)
        counts.append(int(np.searchsorted(csum, mass_fraction * total) + 1))
    x = np.array(k_ladder, dtype=float) * np.log(2.0)
    slope, _, se = least_squares_fit(x, np.log(counts))
    return slope, se, {"k_ladder": list(k_ladder), "counts": counts}


# --- two-scale Cauchy diagnostic ----------------------------------------------

class CoupledPairSampler:
    """Joint Gaussian of the circle-average fields at two radii on the same
    grid, coupled through one factorization of the stacked covariance."""

    def __init__(self, config: SamplerConfig, eps_fine: float, eps_coarse: float):
        self.config = config
        kernel = KernelEval(config.domain)
        pts = config.domain.points
        self.n = pts.size
        stacked = np.concatenate([pts, pts])
        radii = np.concatenate([np.full(self.n, eps_fine), np.full(self.n, eps_coarse)])
        self.cov = kernel.cov_matrix(stacked, radii)
        from .gff import _factorize
        self.chol = _factorize(self.cov)
        self.var_fine = self.cov.diagonal()[:self.n].copy()
        self.var_coarse = self.cov.diagonal()[self.n:].copy()
        self.points = pts

    def sample_block(self, lo, hi):
        from .numerics import replica_seed, rng_for
        xi = np.empty((2 * self.n, hi - lo))
        for j, rep in enumerate(range(lo, hi)):
            xi[:, j] = rng_for(replica_seed(self.config.master_seed, rep)
                               ).standard_normal(2 * self.n)
        both = self.chol @ xi
        return both[:self.n], both[self.n:]


_PAIR_CACHE: dict = {}


def cauchy_diagnostic(config_fine: SamplerConfig, config_coarse: SamplerConfig,
                      gamma: float, f=None, n_replicas: int = 1000,
                      workers: int = 1):
    """E[(M_fine(f) - M_coarse(f))^2] with SE, the two approximations being
    coupled through one joint Gaussian (cross-covariance at mixed radii)."""
    if abs(gamma) >= np.sqrt(2.0):
        raise OutOfL2Regime("Cauchy diagnostic lives in |gamma| < sqrt(2)")
    if (config_fine.domain, config_fine.scheme) != (config_coarse.domain, config_coarse.scheme):
        raise MismatchedGrids("the two configs must share domain and scheme")
    key = (config_fine.domain, config_fine.eps, config_coarse.eps)
    if key not in _PAIR_CACHE:
        _PAIR_CACHE[key] = CoupledPairSampler(config_fine, config_fine.eps,
                                              config_coarse.eps)
    sampler = _PAIR_CACHE[key]
    sampler = _reseeded(sampler, config_fine)
    pts = sampler.points
    f_vals = np.ones(pts.size) if f is None else (
        f(pts) if callable(f) else np.asarray(f, dtype=float))
    area = config_fine.domain.cell_area

    def chunk(lo, hi):
        v_fine, v_coarse = sampler.sample_block(lo, hi)
        m_fine = f_vals @ mass_vector(v_fine, sampler.var_fine[:, None], gamma, area)
        m_coarse = f_vals @ mass_vector(v_coarse, sampler.var_coarse[:, None], gamma, area)
        return (m_fine - m_coarse) ** 2

    gaps = np.concatenate(map_chunks(chunk, n_replicas, workers))
    return float(gaps.mean()), float(batch_means_se(gaps))


def _reseeded(sampler, config):
    if sampler.config.master_seed == config.master_seed:
        return sampler
    import copy
    clone = copy.copy(sampler)
    clone.config = config
    return clone
