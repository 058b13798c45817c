"""Field recovery from ball masses of the measure.

m_eps(z) = (1/gamma) log M(B_eps(z)) tracks the eps-circle average of the
underlying field up to a deterministic centering.  The centering constant
is unspecified, so it is estimated empirically: the cross-replica mean of
(m_eps - field) per point.  The residual field should have bounded
pointwise variance and vanishing smooth pairings as eps decreases.
"""

from dataclasses import dataclass

import numpy as np

from .domain import KernelEval
from .errors import EmptyBall
from .gff import SamplerConfig, _factorize
from .gmc import GmcMeasure, _check_gamma, mass_vector
from .numerics import replica_seed, rng_for
from .parallel import map_chunks

MIN_BALL_SPACINGS = 4


@dataclass(frozen=True, eq=False)
class RecoveredField:
    """Log-ball-mass field at the evaluation points; `centered` is filled
    once a cross-replica mean is available (None for a single measure)."""

    m_eps: np.ndarray
    eval_points: np.ndarray
    eps: float
    gamma: float
    centered: np.ndarray | None = None


def log_mass_field(measure: GmcMeasure, eps: float, eval_points=None,
                   mean_m=None) -> RecoveredField:
    """(1/gamma) log of the eps-ball masses of the measure.

    `eval_points` defaults to the measure's own points whose eps-ball stays
    within the covered region.  Pass `mean_m` (per-point cross-replica
    mean) to fill the centered field.
    """
    gamma = measure.gamma
    if gamma == 0:
        raise ValueError("gamma = 0: log-mass recovery is undefined")
    h = np.sqrt(measure.cell_area)
    if eps < MIN_BALL_SPACINGS * h:
        raise EmptyBall(f"eps={eps} below {MIN_BALL_SPACINGS} grid spacings")
    pts = measure.points
    if eval_points is None:
        # keep only points whose ball lies inside the convex hull proxy:
        # distance to the farthest covered direction >= eps
        center = pts.mean()
        reach = np.abs(pts - center).max()
        eval_points = pts[np.abs(pts - center) <= reach - eps]
    eval_points = np.asarray(eval_points, dtype=complex)
    mask = (np.abs(eval_points[:, None] - pts[None, :]) <= eps)
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise EmptyBall("some evaluation ball contains no grid cell")
    m = np.log(mask @ measure.cell_mass) / gamma
    centered = None if mean_m is None else m - np.asarray(mean_m, dtype=float)
    return RecoveredField(m_eps=m, eval_points=eval_points, eps=float(eps),
                          gamma=gamma, centered=centered)


class RecoverySampler:
    """Joint exact Gaussian of (cell circle averages at the scheme radius,
    field circle averages at the ladder radii on the eval points)."""

    def __init__(self, config: SamplerConfig, region_center: complex,
                 region_radius: float, eps_ladder, eval_stride: int = 4):
        self.config = config
        dom = config.domain
        kernel = KernelEval(dom)
        self.eps_ladder = [float(e) for e in sorted(eps_ladder, reverse=True)]
        pts = dom.points
        c = complex(region_center)
        self.cells = pts[np.abs(pts - c) <= region_radius]
        h = dom.h
        eval_reach = region_radius - max(self.eps_ladder) - h
        coarse = pts[np.abs(pts - c) <= eval_reach]
        ix = np.round((coarse.real - dom.origin.real) / h - 0.5).astype(int)
        iy = np.round((coarse.imag - dom.origin.imag) / h - 0.5).astype(int)
        keep = (ix % eval_stride == 0) & (iy % eval_stride == 0)
        self.eval_points = coarse[keep]
        n_c, n_e = self.cells.size, self.eval_points.size
        stacked = np.concatenate([self.cells]
                                 + [self.eval_points] * len(self.eps_ladder))
        radii = np.concatenate(
            [np.full(n_c, config.eps)]
            + [np.full(n_e, e) for e in self.eps_ladder])
        cov = kernel.cov_matrix(stacked, radii)
        self.variances = cov.diagonal().copy()
        self.chol = _factorize(cov)
        del cov
        self.n_cells = n_c
        self.n_eval = n_e
        # ball membership masks, one per ladder radius
        dmat = np.abs(self.eval_points[:, None] - self.cells[None, :])
        self.ball_masks = [(dmat <= e).astype(float) for e in self.eps_ladder]

    def sample_block(self, lo, hi):
        n = self.variances.size
        xi = np.empty((n, hi - lo))
        for j, rep in enumerate(range(lo, hi)):
            xi[:, j] = rng_for(replica_seed(self.config.master_seed, rep)
                               ).standard_normal(n)
        return self.chol @ xi


def default_bumps(points):
    """Three radial bumps at distinct centers and scales, as vectors."""
    c = points.mean()
    spread = np.abs(points - c).max()
    specs = [(c, 0.5 * spread), (c + 0.45 * spread, 0.3 * spread),
             (c - 0.45j * spread, 0.2 * spread)]
    return {f"bump{i}": np.exp(-np.abs(points - z0) ** 2 / (2 * s * s))
            for i, (z0, s) in enumerate(specs)}


def recovery_residual(config: SamplerConfig, gamma: float, eps_ladder,
                      n_replicas: int, region_center: complex = 0j,
                      region_radius: float = 0.32, eval_stride: int = 4,
                      bumps=None, workers: int = 1):
    """Residual statistics of field recovery over an eps ladder.

    Per replica the same joint Gaussian supplies both the measure (cells at
    the scheme radius) and the field averages at the ladder radii (paired
    sampling).  Returns per-eps pointwise residual variance summaries and
    per-(eps, bump) second moments of the residual pairings, with SEs.
    """
    _check_gamma(gamma)
    if gamma == 0:
        raise ValueError("gamma = 0: log-mass recovery is undefined")
    sampler = RecoverySampler(config, region_center, region_radius, eps_ladder)
    ladder = sampler.eps_ladder
    n_c, n_e = sampler.n_cells, sampler.n_eval
    area = config.domain.cell_area
    bump_vals = bumps or default_bumps(sampler.eval_points)
    # each eval-lattice point represents a (stride * h)^2 patch in pairings
    eval_weight = (eval_stride * config.domain.h) ** 2

    cell_vars = sampler.variances[:n_c]

    def chunk(lo, hi):
        vals = sampler.sample_block(lo, hi)
        masses = mass_vector(vals[:n_c], cell_vars[:, None], gamma, area)
        out_m = np.empty((len(ladder), n_e, hi - lo))
        out_g = np.empty_like(out_m)
        for i, e in enumerate(ladder):
            seg = slice(n_c + i * n_e, n_c + (i + 1) * n_e)
            out_g[i] = vals[seg]
            out_m[i] = np.log(sampler.ball_masks[i] @ masses) / gamma
        return out_g, out_m

    g_blocks, m_blocks = [], []
    for g, m in map_chunks(chunk, n_replicas, workers):
        g_blocks.append(g)
        m_blocks.append(m)
    g_all = np.concatenate(g_blocks, axis=2)   # (ladder, eval, reps)
    m_all = np.concatenate(m_blocks, axis=2)

    report = {"eps_ladder": ladder, "n_replicas": n_replicas,
              "n_eval_points": n_e, "per_eps": []}
    for i, e in enumerate(ladder):
        diff = g_all[i] - m_all[i]              # field minus log-mass, uncentered
        resid = diff - diff.mean(axis=1, keepdims=True)
        pvar = resid.var(axis=1, ddof=1)
        corr = _mean_corr(g_all[i], m_all[i])
        pairings = {}
        for name, f in bump_vals.items():
            pair = eval_weight * (f @ resid)    # <R, f> per replica
            sq = pair**2
            pairings[name] = {
                "second_moment": float(sq.mean()),
                "se": float(sq.std(ddof=1) / np.sqrt(sq.size)),
            }
        report["per_eps"].append({
            "eps": e,
            "mean_pointwise_var": float(pvar.mean()),
            "max_pointwise_var": float(pvar.max()),
            "mean_recovery_corr": corr,
            "mean_m": m_all[i].mean(axis=1),
            "pairings": pairings,
        })
    return report


def _mean_corr(g, m):
    """Average over points of corr(field avg, recovered field) across replicas."""
    gc = g - g.mean(axis=1, keepdims=True)
    mc = m - m.mean(axis=1, keepdims=True)
    num = (gc * mc).mean(axis=1)
    den = gc.std(axis=1) * mc.std(axis=1)
    ok = den > 0
    return float((num[ok] / den[ok]).mean())
