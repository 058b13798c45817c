"""Exact samplers of approximate free fields.

Two schemes:

* ``cholesky`` — circle-average field on the grid, sampled as L @ xi where
  L L^T is the exact circle-average covariance matrix.  Factorized once,
  reused across replicas.
* ``eigen`` — truncated sine eigenbasis on the unit square with Bessel-J0
  circle-average damping; gives exact circle averages at any radius via the
  mode coefficients.

Replica seeds derive from SplitMix64(master XOR replica * golden), so the
same (config, replica) is bit-identical on any worker layout.
"""

import json
import threading
from dataclasses import dataclass, replace

import numpy as np

from .domain import DISK, SQUARE, DomainSpec, KernelEval
from .errors import (
    CircleLeavesDomain,
    FactorizationFailed,
    NonFiniteShift,
    UnsupportedRadius,
    UnsupportedScheme,
)
from .numerics import TAG_FIELD, bessel_j0, replica_seed, rng_for, substream_seed

CHOLESKY = "cholesky"
EIGEN = "eigen"

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


@dataclass(frozen=True)
class SamplerConfig:
    """Scheme + domain + master seed; hashable so samplers can be cached."""

    domain: DomainSpec
    scheme: str
    eps: float
    n_modes: int = 0
    master_seed: int = 0

    def __post_init__(self):
        if self.scheme == CHOLESKY:
            if self.eps <= 0:
                raise ValueError("cholesky scheme needs eps > 0")
            if self.eps > self.domain.boundary_margin + 1e-12:
                raise ValueError("eps must be <= boundary_margin so circles fit")
        elif self.scheme == EIGEN:
            if self.domain.kind != SQUARE:
                raise ValueError("eigen scheme is defined on the square")
            if self.n_modes < 1:
                raise ValueError("eigen scheme needs n_modes >= 1")
            if self.eps < 0:
                raise ValueError("eps must be >= 0")
        else:
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realized approximate field on the retained grid points.

    `modes` is the undamped mode-coefficient matrix for the eigen scheme
    (None for cholesky); it makes circle averages at arbitrary radii exact.
    """

    values: np.ndarray
    variances: np.ndarray
    points: np.ndarray
    cell_area: float
    scheme: str
    eps: float
    replica_index: int
    seed_used: int
    config: SamplerConfig
    modes: np.ndarray | None = None


class CholeskySampler:
    """Dense factorization of the circle-average covariance on `points`.

    Immutable after construction; `sample_block` is pure given the replica
    range, so replicas can be generated concurrently in any chunking.
    """

    def __init__(self, config: SamplerConfig, points=None):
        if config.scheme != CHOLESKY:
            raise UnsupportedScheme("CholeskySampler needs a cholesky config")
        self.config = config
        self.kernel = KernelEval(config.domain)
        self.points = config.domain.points if points is None else np.asarray(points)
        self.cov = self.kernel.cov_matrix(self.points, config.eps)
        self.variances = -np.log(config.eps) + np.log(self.kernel._cr(self.points))
        self.chol = _factorize(self.cov)

    @property
    def n(self):
        return self.points.size

    def sample_block(self, lo: int, hi: int):
        """Standard-normal driven values for replicas lo..hi-1, column-wise."""
        xi = np.empty((self.n, hi - lo))
        for j, rep in enumerate(range(lo, hi)):
            xi[:, j] = rng_for(replica_seed(self.config.master_seed, rep)).standard_normal(self.n)
        return self.chol @ xi

    def sample(self, rep: int) -> FieldSample:
        values = self.sample_block(rep, rep + 1)[:, 0]
        return FieldSample(
            values=values,
            variances=self.variances,
            points=self.points,
            cell_area=self.config.domain.cell_area,
            scheme=CHOLESKY,
            eps=self.config.eps,
            replica_index=rep,
            seed_used=replica_seed(self.config.master_seed, rep),
            config=self.config,
        )

    def field_from_values(self, values, rep: int, seed: int) -> FieldSample:
        return FieldSample(
            values=values, variances=self.variances, points=self.points,
            cell_area=self.config.domain.cell_area, scheme=CHOLESKY,
            eps=self.config.eps, replica_index=rep, seed_used=seed,
            config=self.config,
        )


def _factorize(cov):
    n = cov.shape[0]
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(n) if jitter else cov)
        except np.linalg.LinAlgError:
            continue
    raise FactorizationFailed(
        f"covariance of size {n} not PSD within jitter ladder {JITTER_LADDER}")


class EigenSampler:
    """Truncated sine expansion with mode weights c = sqrt(2*pi/lambda) and
    circle-average damping J0(sqrt(lambda) * eps)."""

    def __init__(self, config: SamplerConfig):
        if config.scheme != EIGEN:
            raise UnsupportedScheme("EigenSampler needs an eigen config")
        self.config = config
        dom = config.domain
        n = config.n_modes
        j = np.arange(1, n + 1, dtype=float)
        self.lam = np.pi**2 * (j[:, None] ** 2 + j[None, :] ** 2)
        self.c = np.sqrt(2.0 * np.pi / self.lam)
        self.damp = bessel_j0(np.sqrt(self.lam) * config.eps)
        res = dom.grid_resolution
        ax = dom.origin.real + (np.arange(res) + 0.5) * dom.h
        self.sin_x = np.sin(np.pi * np.outer(j, ax))  # (modes, res)
        self.sin_y = self.sin_x                       # square grid is shared
        self.mask = dom.retained_mask
        self.points = dom.points
        cd2 = (self.c * self.damp) ** 2
        var_grid = 4.0 * (self.sin_y**2).T @ cd2.T @ (self.sin_x**2)
        self.variances = var_grid.ravel()[self.mask]

    @property
    def n(self):
        return self.points.size

    def mode_matrix(self, rep: int):
        """Undamped coefficients A = X * c for one replica."""
        rng = rng_for(replica_seed(self.config.master_seed, rep))
        return rng.standard_normal(self.c.shape) * self.c

    def values_from_modes(self, modes, extra_damp=None):
        a = modes * self.damp
        if extra_damp is not None:
            a = a * extra_damp
        grid = 2.0 * self.sin_y.T @ a.T @ self.sin_x
        return grid.ravel()[self.mask]

    def sample(self, rep: int) -> FieldSample:
        modes = self.mode_matrix(rep)
        return FieldSample(
            values=self.values_from_modes(modes),
            variances=self.variances,
            points=self.points,
            cell_area=self.config.domain.cell_area,
            scheme=EIGEN,
            eps=self.config.eps,
            replica_index=rep,
            seed_used=replica_seed(self.config.master_seed, rep),
            config=self.config,
            modes=modes,
        )

    def circle_average_at(self, modes, z: complex, radius: float):
        """Exact circle average of the (scheme-damped) field at one point."""
        extra = bessel_j0(np.sqrt(self.lam) * radius) if radius > 0 else 1.0
        j = np.arange(1, self.config.n_modes + 1, dtype=float)
        sx = np.sin(j * np.pi * z.real)
        sy = np.sin(j * np.pi * z.imag)
        return float(2.0 * sx @ (modes * self.damp * extra) @ sy)

    def grid_circle_average(self, modes, radius: float):
        """Circle averages at every retained point, as a vector."""
        extra = bessel_j0(np.sqrt(self.lam) * radius) if radius > 0 else None
        return self.values_from_modes(modes, extra)

    def covariance_modes(self, z: complex):
        """Mode coefficients whose rendered values equal C(z, .), the
        covariance of the sampled field against its value at z.

        Rendering multiplies by one more damping factor, so the total is
        (c * damp)^2 e(z) e(.) as required for the rooted shift.
        """
        j = np.arange(1, self.config.n_modes + 1, dtype=float)
        sx = np.sin(j * np.pi * z.real)
        sy = np.sin(j * np.pi * z.imag)
        e_z = 2.0 * np.outer(sx, sy)
        return self.c**2 * self.damp * e_z


_SAMPLER_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def _cache_key(config: SamplerConfig, extra=None):
    return (config.domain, config.scheme, config.eps, config.n_modes, extra)


def get_sampler(config: SamplerConfig):
    """Factorizations are expensive; share them across replicas and seeds."""
    key = _cache_key(config)
    with _CACHE_LOCK:
        if key not in _SAMPLER_CACHE:
            if config.scheme == CHOLESKY:
                _SAMPLER_CACHE[key] = CholeskySampler(config)
            else:
                _SAMPLER_CACHE[key] = EigenSampler(config)
        sampler = _SAMPLER_CACHE[key]
    if sampler.config.master_seed != config.master_seed:
        sampler = _with_seed(sampler, config)
    return sampler


def get_restricted_sampler(config: SamplerConfig, center: complex, radius: float):
    """Cholesky sampler on the exact Gaussian marginal of the grid points
    within `radius` of `center` (keeps dense factorizations tractable)."""
    key = _cache_key(config, (complex(center), float(radius)))
    with _CACHE_LOCK:
        if key not in _SAMPLER_CACHE:
            pts = config.domain.points
            sel = np.abs(pts - center) <= radius
            _SAMPLER_CACHE[key] = CholeskySampler(config, points=pts[sel])
        sampler = _SAMPLER_CACHE[key]
    if sampler.config.master_seed != config.master_seed:
        sampler = _with_seed(sampler, config)
    return sampler


def _with_seed(sampler, config):
    clone = object.__new__(type(sampler))
    clone.__dict__.update(sampler.__dict__)
    clone.config = config
    return clone


def clear_sampler_cache():
    with _CACHE_LOCK:
        _SAMPLER_CACHE.clear()


def sample_field(config: SamplerConfig, rep: int) -> FieldSample:
    """One replica of the approximate field (bit-identical per (config, rep))."""
    return get_sampler(config).sample(rep)


def circle_average_eval(field: FieldSample, z: complex, eps: float) -> float:
    """Circle average of the realized field at z with radius eps.

    Eigen scheme: exact at any radius via mode damping.  Cholesky scheme:
    only the scheme radius is available, and the value is read at the
    nearest grid point (O(h) localization error, documented).
    """
    z = complex(z)
    if field.config.domain.boundary_distance(np.asarray(z)) < eps - 1e-15:
        raise CircleLeavesDomain("averaging circle leaves the domain")
    if field.scheme == EIGEN:
        if field.modes is None:
            raise UnsupportedScheme("field lost its mode representation")
        sampler = get_sampler(field.config)
        return sampler.circle_average_at(field.modes, z, eps)
    if abs(eps - field.eps) > 1e-15:
        raise UnsupportedRadius(
            f"cholesky scheme stores only eps={field.eps}, requested {eps}")
    idx = int(np.argmin(np.abs(field.points - z)))
    return float(field.values[idx])


def cameron_martin_shift(field: FieldSample, shift) -> FieldSample:
    """Deterministic shift of a realized field; variances are unchanged.

    `shift` is a callable on complex points or a per-point array.  The mode
    representation is dropped for generic shifts (rooted sampling keeps it
    through its own covariance-shift path).
    """
    vals = shift(field.points) if callable(shift) else np.asarray(shift, dtype=float)
    vals = np.broadcast_to(vals, field.values.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteShift("shift is not finite on the grid")
    return replace(field, values=field.values + vals, modes=None)


# --- binary dump ------------------------------------------------------------

def dump_field(field: FieldSample, path, endian_check: bool = True):
    """JSON header line, then the full row-major grid as little-endian
    float64 with NaN at margin-excluded cells."""
    dom = field.config.domain
    res = dom.grid_resolution
    grid = np.full(res * res, np.nan)
    grid[dom.retained_mask] = field.values
    header = {
        "scheme": field.scheme,
        "eps": field.eps,
        "n_modes": field.config.n_modes,
        "seed": field.seed_used,
        "replica": field.replica_index,
        "grid_resolution": res,
        "domain": dom.kind,
        "boundary_margin": dom.boundary_margin,
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(grid.astype("<f8").tobytes())


def load_field_dump(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        res = header["grid_resolution"]
        grid = np.frombuffer(fh.read(), dtype="<f8").reshape(res, res)
    return header, grid
