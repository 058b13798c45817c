"""Quantum balls and scaling dimensions for deterministic fractals.

The Euclidean side measures the area of r-neighborhoods of the fractal;
the measure side replaces Euclidean balls by quantum balls (balls of fixed
mass), computed per realization on the grid.  The two exponents are linked
by the quadratic relation checked in `kpz_residual`.
"""

from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec
from .errors import MassUnreachable, WindowTooNarrow
from .gff import SamplerConfig, get_restricted_sampler, get_sampler
from .gmc import GmcMeasure, _check_gamma, mass_vector
from .parallel import map_chunks
from .stats import batch_means_se, least_squares_fit

MIN_RADIUS_SPACINGS = 4


def theta(q: float, gamma: float) -> float:
    """Radius-moment exponent (2 - gamma^2/2) q + gamma^2 q^2 / 2."""
    return (2.0 - gamma * gamma / 2.0) * q + gamma * gamma * q * q / 2.0


def kpz_quadratic(qs: float, gamma: float) -> float:
    """The Euclidean dimension predicted from the measure-side dimension."""
    return theta(qs, gamma)


def solve_kpz_for_qs(ds: float, gamma: float) -> float:
    """Positive root of the quadratic for a given Euclidean dimension."""
    if gamma == 0:
        return ds / 2.0
    g2 = gamma * gamma / 2.0
    b = 2.0 - g2
    return (-b + np.sqrt(b * b + 4.0 * g2 * ds)) / (2.0 * g2)


def kpz_residual(ds_est: float, qs_est: float, gamma: float):
    """ds - [(2 - gamma^2/2) qs + gamma^2 qs^2 / 2], plus theta(qs)."""
    t = theta(qs_est, gamma)
    return float(ds_est - t), float(t)


@dataclass
class KpzResult:
    gamma: float
    fractal: str
    ds_est: float
    ds_se: float
    qs_est: float
    qs_se: float
    quadratic_residual: float
    theta_at_qs: float


# --- fractals -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FractalSpec:
    """A deterministic compact set with a pointwise distance evaluator."""

    kind: str
    analytic_ds: float
    params: tuple

    def distances(self, points):
        points = np.asarray(points, dtype=complex)
        if self.kind == "point":
            (loc,) = self.params
            return np.abs(points - loc)
        if self.kind == "segment":
            a, b = self.params
            ab = b - a
            t = np.clip(((points - a) * np.conj(ab)).real / abs(ab) ** 2, 0.0, 1.0)
            return np.abs(points - (a + t * ab))
        if self.kind == "cantor":
            corner, size, depth = self.params
            dx = _cantor_dist1d((points.real - corner.real) / size, depth)
            dy = _cantor_dist1d((points.imag - corner.imag) / size, depth)
            return size * np.hypot(dx, dy)
        if self.kind == "domain":
            return np.zeros(points.shape)
        raise ValueError(f"unknown fractal kind {self.kind!r}")


def _cantor_starts(depth: int):
    starts = np.array([0.0])
    for level in range(1, depth + 1):
        starts = np.concatenate([starts, starts + 2.0 / 3**level])
    return np.sort(starts)


def _cantor_dist1d(x, depth: int):
    starts = _cantor_starts(depth)
    length = 3.0**-depth
    x = np.asarray(x, dtype=float)
    left = starts[None, :] - x.ravel()[:, None]
    right = x.ravel()[:, None] - (starts[None, :] + length)
    d = np.maximum(np.maximum(left, right), 0.0).min(axis=1)
    return d.reshape(x.shape)


def point_fractal(loc: complex = 0j) -> FractalSpec:
    return FractalSpec("point", 2.0, (complex(loc),))


def segment_fractal(a: complex, b: complex) -> FractalSpec:
    return FractalSpec("segment", 1.0, (complex(a), complex(b)))


def cantor_dust(corner: complex, size: float, depth: int = 5) -> FractalSpec:
    # co-dimension of the middle-thirds product set
    ds = 2.0 - 2.0 * np.log(2.0) / np.log(3.0)
    return FractalSpec("cantor", ds, (complex(corner), float(size), int(depth)))


def whole_domain_fractal() -> FractalSpec:
    return FractalSpec("domain", 2.0, ())


# --- estimators ------------------------------------------------------------------

def quantum_radius(measure: GmcMeasure, z: complex, r_mass: float) -> float:
    """Smallest grid-realizable radius whose ball around z carries mass
    >= r_mass (distance of the cell where the sorted prefix sum crosses)."""
    dist = np.abs(measure.points - complex(z))
    order = np.argsort(dist)
    csum = np.cumsum(measure.cell_mass[order])
    if csum[-1] < r_mass:
        raise MassUnreachable(f"requested mass {r_mass} > reachable {csum[-1]:.4g}")
    idx = int(np.searchsorted(csum, r_mass))
    return float(dist[order][idx])


def euclidean_scaling_dim(fractal: FractalSpec, radii, grid: DomainSpec):
    """Fitted slope of log Leb(r-neighborhood of the fractal) vs log r on a
    geometry grid (no field involved)."""
    radii = sorted(float(r) for r in radii)
    if len(radii) < 2:
        raise WindowTooNarrow("need at least two radii")
    if radii[0] < MIN_RADIUS_SPACINGS * grid.h:
        raise WindowTooNarrow(
            f"smallest radius {radii[0]} below {MIN_RADIUS_SPACINGS} grid spacings")
    pts = grid.full_grid
    dist = fractal.distances(pts)
    inside = grid.boundary_distance(pts) > 0
    areas = []
    for r in radii:
        hit = dist <= r
        if np.any(hit & ~inside):
            raise WindowTooNarrow(f"neighborhood at r={r} leaves the domain")
        areas.append(hit.sum() * grid.cell_area)
    slope, _, se = least_squares_fit(np.log(radii), np.log(areas))
    return slope, se, {"radii": radii, "areas": areas}


def gmc_scaling_dim(config: SamplerConfig, gamma: float, fractal: FractalSpec,
                    r_ladder, n_replicas: int, workers: int = 1):
    """Fitted slope of log E[mass of quantum-ball-hitting points] vs log r.

    A cell z contributes to the r-estimate iff its quantum ball reaches the
    fractal, i.e. iff the mass strictly inside B_{dist(z,X)}(z) is < r.
    The geometric mask (pairwise distance < per-cell target distance) is
    replica-independent and precomputed once.
    """
    _check_gamma(gamma)
    r_ladder = sorted(float(r) for r in r_ladder)
    sampler = get_sampler(config)
    pts = sampler.points
    dist_x = fractal.distances(pts)
    mask = (np.abs(pts[:, None] - pts[None, :]) < dist_x[:, None]).astype(float)
    area = config.domain.cell_area

    def chunk(lo, hi):
        vals = sampler.sample_block(lo, hi)
        masses = mass_vector(vals, sampler.variances[:, None], gamma, area)
        mu = mask @ masses                      # mass strictly inside the target ball
        out = np.empty((len(r_ladder), hi - lo))
        for i, r in enumerate(r_ladder):
            out[i] = (masses * (mu < r)).sum(axis=0)
        return out

    blocks = np.hstack(map_chunks(chunk, n_replicas, workers))
    est = blocks.mean(axis=1)
    ses = np.array([batch_means_se(blocks[i]) for i in range(len(r_ladder))])
    slope, _, slope_se = least_squares_fit(np.log(r_ladder), np.log(est), ses / est)
    return slope, slope_se, {"r_ladder": r_ladder, "estimates": est.tolist(),
                             "ses": ses.tolist()}


def rooted_radius_moments(config: SamplerConfig, gamma: float, q: float,
                          r_ladder, n_replicas: int, center: complex = 0j,
                          region_radius: float = 0.5, workers: int = 1):
    """Moments E[Rad^theta(q)] of quantum-ball radii around the domain
    center under the shift-route rooted field, fitted against log r.

    The slope targets q.  Samples only the Gaussian marginal near the
    center; the shift is gamma times the sampler covariance column."""
    _check_gamma(gamma)
    r_ladder = sorted(float(r) for r in r_ladder)
    sampler = get_restricted_sampler(config, complex(center), region_radius)
    pts = sampler.points
    idx0 = int(np.argmin(np.abs(pts - complex(center))))
    shift = gamma * sampler.cov[:, idx0]
    order = np.argsort(np.abs(pts - pts[idx0]))
    dist_sorted = np.abs(pts - pts[idx0])[order]
    p = theta(q, gamma)
    area = config.domain.cell_area

    def chunk(lo, hi):
        vals = sampler.sample_block(lo, hi) + shift[:, None]
        masses = mass_vector(vals, sampler.variances[:, None], gamma, area)
        csum = np.cumsum(masses[order], axis=0)
        out = np.empty((len(r_ladder), hi - lo))
        for i, r in enumerate(r_ladder):
            if np.any(csum[-1] < r):
                raise MassUnreachable(
                    f"mass {r} unreachable within region radius {region_radius}")
            pos = np.array([np.searchsorted(csum[:, j], r)
                            for j in range(csum.shape[1])])
            out[i] = dist_sorted[pos] ** p
        return out

    blocks = np.hstack(map_chunks(chunk, n_replicas, workers))
    est = blocks.mean(axis=1)
    ses = np.array([batch_means_se(blocks[i]) for i in range(len(r_ladder))])
    slope, _, slope_se = least_squares_fit(np.log(r_ladder), np.log(est), ses / est)
    return slope, slope_se, {"r_ladder": r_ladder, "moments": est.tolist(),
                             "ses": ses.tolist(), "theta": p}
