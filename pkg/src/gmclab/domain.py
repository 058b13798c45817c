"""Domain geometry and covariance kernels.

Two domains are supported: the unit disk {|z| < 1} gridded on [-1, 1]^2 and
the unit square (0, 1)^2.  Points are complex numbers x + iy.  The kernel
with unit log coefficient is

    green(z, w) = -log|z - w| + harmonic_part(z, w),

zero on the boundary.  On the disk the closed form log|1 - z*conj(w)| is
used for the harmonic part; on the square a sine eigen-sum with one index
summed in closed form (geometric tail, declared tolerance) is used.  All
evaluators are pure and immutable after construction.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    CircleLeavesDomain,
    CoincidentPoints,
    NotNested,
    NotPSD,
    OutOfDomain,
)
from .numerics import gauss_legendre

DISK = "disk"
SQUARE = "square"

# green() is singular on the diagonal; callers needing the diagonal must go
# through circle_avg_cov.
COINCIDENT_FLOOR = 1e-12

QUAD_NODES = 256


@dataclass(frozen=True)
class DomainSpec:
    """Gridded domain: cell centers of a res x res lattice, margin-excluded.

    `boundary_margin` excludes every grid point closer than that to the
    boundary; the convention is margin = 2 * (largest circle radius used),
    so that all averaging circles stay well inside the domain.
    """

    kind: str
    grid_resolution: int
    boundary_margin: float = 0.0

    def __post_init__(self):
        if self.kind not in (DISK, SQUARE):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.grid_resolution < 1:
            raise ValueError("grid_resolution must be >= 1")
        if self.boundary_margin < 0:
            raise ValueError("boundary_margin must be >= 0")

    @property
    def side(self) -> float:
        return 2.0 if self.kind == DISK else 1.0

    @property
    def origin(self) -> complex:
        return -1.0 - 1.0j if self.kind == DISK else 0.0 + 0.0j

    @property
    def h(self) -> float:
        return self.side / self.grid_resolution

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def boundary_distance(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == DISK:
            return 1.0 - np.abs(z)
        x, y = z.real, z.imag
        return np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))

    def contains(self, z):
        return self.boundary_distance(z) > 0

    @cached_property
    def full_grid(self):
        """All cell centers, row-major (y outer, x inner)."""
        res = self.grid_resolution
        ax = self.origin.real + (np.arange(res) + 0.5) * self.h
        ay = self.origin.imag + (np.arange(res) + 0.5) * self.h
        xx, yy = np.meshgrid(ax, ay)
        return (xx + 1j * yy).ravel()

    @cached_property
    def retained_mask(self):
        return self.boundary_distance(self.full_grid) >= max(self.boundary_margin, 1e-12)

    @cached_property
    def points(self):
        """Retained cell centers (the evaluation grid)."""
        return self.full_grid[self.retained_mask]

    @property
    def retained_area(self) -> float:
        return self.points.size * self.cell_area


def _as_points(z):
    z = np.asarray(z, dtype=complex)
    return z, z.ndim == 0


class KernelEval:
    """Green kernel, harmonic part, conformal radius and circle-average
    covariance evaluators for one domain.

    `square_cutoff` bounds the number of retained modes in the partially
    summed sine series for the square; the tail is geometric with rate
    pi * separation, and the default is chosen so the worst retained-grid
    pair is resolved below `square_tol`.
    """

    def __init__(self, domain: DomainSpec, square_cutoff: int = 400_000,
                 square_tol: float = 1e-9):
        self.domain = domain
        self.square_cutoff = square_cutoff
        self.square_tol = square_tol

    # -- validation --------------------------------------------------------

    def _check_interior(self, z):
        d = self.domain.boundary_distance(z)
        if np.any(d < max(self.domain.boundary_margin, 0.0)) or np.any(d <= 0):
            raise OutOfDomain("point outside domain or inside boundary margin")

    def _check_circle(self, z, eps):
        if np.any(self.domain.boundary_distance(z) < np.asarray(eps) - 1e-15):
            raise CircleLeavesDomain("averaging circle leaves the domain")

    # -- harmonic part and conformal radius ---------------------------------

    def harmonic_part(self, z, w):
        z, scalar = _as_points(z)
        w, _ = _as_points(w)
        z, w = np.broadcast_arrays(np.atleast_1d(z), np.atleast_1d(w))
        if self.domain.kind == DISK:
            out = np.log(np.abs(1.0 - z * np.conj(w)))
        else:
            out = self._square_harmonic(z, w)
        return float(out[0]) if scalar else out

    def conformal_radius(self, z):
        z, scalar = _as_points(z)
        self._check_interior(z)
        out = self._cr(np.atleast_1d(z))
        return float(out[0]) if scalar else out

    def _cr(self, z):
        if self.domain.kind == DISK:
            return 1.0 - np.abs(z) ** 2
        return np.exp(self._square_diag(z))

    def green(self, z, w):
        """Zero-boundary kernel; raises CoincidentPoints on the diagonal."""
        z, scalar = _as_points(z)
        w, _ = _as_points(w)
        self._check_interior(z)
        self._check_interior(w)
        z, w = np.broadcast_arrays(np.atleast_1d(z), np.atleast_1d(w))
        d = np.abs(z - w)
        if np.any(d < COINCIDENT_FLOOR):
            raise CoincidentPoints("green() is singular on the diagonal")
        out = -np.log(d) + self.harmonic_part(z, w)
        return float(out[0]) if scalar else out

    # -- square series -------------------------------------------------------

    def _square_terms(self, sep):
        """Mode count needed so the geometric tail is below square_tol."""
        rate = np.pi * max(float(sep), 1e-6)
        k = int(np.ceil(-np.log(self.square_tol * rate) / rate)) + 8
        return min(max(k, 32), self.square_cutoff)

    def _square_harmonic(self, z, w):
        out = np.empty(z.shape)
        d = np.abs(z - w)
        diag = d < COINCIDENT_FLOOR
        if np.any(diag):
            out[diag] = self._square_diag(z[diag])
        if np.any(~diag):
            zz, ww, dd = z[~diag], w[~diag], d[~diag]
            out[~diag] = self._square_green_offdiag(zz, ww) + np.log(dd)
        return out

    def _square_green_offdiag(self, z, w):
        # Orient so the larger coordinate separation sits in the geometric
        # factor; sine modes run along the other axis.
        x1, y1, x2, y2 = z.real, z.imag, w.real, w.imag
        swap = np.abs(y1 - y2) > np.abs(x1 - x2)
        x1s = np.where(swap, y1, x1)
        x2s = np.where(swap, y2, x2)
        y1s = np.where(swap, x1, y1)
        y2s = np.where(swap, x2, y2)
        dx = np.abs(x1s - x2s)
        sx = x1s + x2s
        sep = np.min(np.concatenate([
            np.maximum(dx, 1e-9), sx, 2.0 - sx,
        ]))
        kmax = self._square_terms(sep)
        out = np.zeros(z.shape)
        block = max(1, 2_000_000 // max(z.size, 1))
        k_all = np.arange(1, kmax + 1, dtype=float)
        for lo in range(0, kmax, block):
            k = k_all[lo:lo + block][:, None]
            denom = -np.expm1(-2.0 * np.pi * k)
            e_dx = (np.exp(-k * np.pi * dx) + np.exp(-k * np.pi * (2.0 - dx))) / denom
            e_sx = (np.exp(-k * np.pi * sx) + np.exp(-k * np.pi * (2.0 - sx))) / denom
            term = (np.sin(k * np.pi * y1s) * np.sin(k * np.pi * y2s)
                    * (e_dx - e_sx) / k)
            out += 2.0 * term.sum(axis=0)
        return out

    def _square_diag(self, z):
        # g(z, z) = log(2 sin(pi y)/pi) + geometric correction series; the
        # roles of x and y are chosen per point for the fastest tail.
        x, y = z.real, z.imag
        swap = np.minimum(y, 1.0 - y) > np.minimum(x, 1.0 - x)
        xs = np.where(swap, y, x)
        ys = np.where(swap, x, y)
        sep = float(np.min(2.0 * np.minimum(xs, 1.0 - xs)))
        kmax = self._square_terms(sep)
        k = np.arange(1, kmax + 1, dtype=float)[:, None]
        denom = -np.expm1(-2.0 * np.pi * k)
        rho = 2.0 * np.exp(-2.0 * np.pi * k) / denom
        e2x = (np.exp(-2.0 * k * np.pi * xs) + np.exp(-k * np.pi * (2.0 - 2.0 * xs))) / denom
        corr = 2.0 * (np.sin(k * np.pi * ys) ** 2 * (rho - e2x) / k).sum(axis=0)
        return np.log(2.0 * np.sin(np.pi * ys) / np.pi) + corr

    # -- circle averages -----------------------------------------------------

    def circle_avg_cov(self, z, w, eps1: float, eps2: float) -> float:
        """Covariance of circle averages at (z, eps1) and (w, eps2).

        Exact up to quadrature on the one genuinely overlapping-arc case:
        the average of -log|.| over one circle collapses to
        -log max(dist, radius), and the harmonic part averages to its
        center value by the mean value property.
        """
        z = complex(z)
        w = complex(w)
        self._check_circle(np.asarray([z]), eps1)
        self._check_circle(np.asarray([w]), eps2)
        d = abs(z - w)
        eb, ea = max(eps1, eps2), min(eps1, eps2)
        if d < COINCIDENT_FLOOR and abs(eps1 - eps2) < 1e-15:
            return float(-np.log(eps1) + np.log(self._cr(np.asarray([z]))[0]))
        log_avg = _log_distance_avg(np.array([d]), np.array([eb]), np.array([ea]))[0]
        return float(-log_avg + self.harmonic_part(z, w))

    def cov_matrix(self, points, radii, block: int = 1024):
        """Full covariance matrix of circle averages at `points`.

        `radii` is a scalar or per-point array.  Symmetric by construction;
        exact up to the overlapping-arc quadrature.  Assembled in row
        blocks so only O(block * n) scratch is alive at once.
        """
        points = np.asarray(points, dtype=complex)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), points.shape).copy()
        self._check_circle(points, radii)
        n = points.size
        cov = np.empty((n, n))
        for lo in range(0, n, block):
            hi = min(lo + block, n)
            p = points[lo:hi, None]
            d = np.abs(p - points[None, :])
            eb = np.maximum(radii[lo:hi, None], radii[None, :])
            ea = np.minimum(radii[lo:hi, None], radii[None, :])
            # closed form -log max(d, eb) wherever no circle-boundary crossing
            blk = -np.log(np.maximum(d, eb))
            cross = np.abs(d - eb) < ea
            if np.any(cross):
                vals = _log_distance_avg(d[cross], eb[cross], ea[cross])
                blk[cross] = -vals
            # harmonic part: the mean value property makes center values exact
            if self.domain.kind == DISK:
                blk += np.log(np.abs(1.0 - p * np.conj(points[None, :])))
            else:
                blk += self._square_harmonic(
                    np.broadcast_to(p, d.shape).ravel(),
                    np.broadcast_to(points[None, :], d.shape).ravel(),
                ).reshape(d.shape)
            cov[lo:hi] = blk
        idx = np.arange(n)
        cov[idx, idx] = -np.log(radii) + np.log(self._cr(points))
        # enforce exact symmetry against quadrature roundoff
        cov = 0.5 * (cov + cov.T)
        return cov

    # -- Markov decomposition -------------------------------------------------

    def markov_split_cov(self, ball_center, ball_radius: float, pts, tol: float = 1e-8):
        """Split point covariances over a sub-ball B into (inner, harmonic).

        inner is the zero-boundary kernel of B (Mobius rescaling of the
        disk kernel); harmonic = green - inner must be symmetric PSD, else
        the kernel is buggy and NotPSD is raised.
        """
        c = complex(ball_center)
        rho = float(ball_radius)
        if self.domain.boundary_distance(np.asarray(c)) < rho - 1e-12:
            raise NotNested("ball not contained in the domain")
        pts = np.asarray(pts, dtype=complex)
        n = pts.size
        if np.any(np.abs(pts - c) >= rho):
            raise OutOfDomain("points must lie inside the ball")
        u = (pts - c) / rho
        du = np.abs(u[:, None] - u[None, :])
        if np.any((du < COINCIDENT_FLOOR) & ~np.eye(n, dtype=bool)):
            raise CoincidentPoints("duplicate points in markov_split_cov")
        cr_ball = rho * (1.0 - np.abs(u) ** 2)
        # conformal invariance: kernel of B is the disk kernel in the
        # rescaled coordinate; diagonal regularized to log CR as usual
        with np.errstate(divide="ignore"):
            inner = np.log(np.abs(1.0 - u[:, None] * np.conj(u[None, :]))) - np.log(du)
        np.fill_diagonal(inner, np.log(cr_ball))
        harm = -inner
        if n > 1:
            iu, ju = np.triu_indices(n, k=1)
            vals = self.green(pts[iu], pts[ju])
            harm[iu, ju] += vals
            harm[ju, iu] += vals
        np.fill_diagonal(harm, np.log(self._cr(pts)) - np.log(cr_ball))
        harm = 0.5 * (harm + harm.T)
        if n:
            lo = np.linalg.eigvalsh(harm)[0]
            if lo < -tol:
                raise NotPSD(f"harmonic covariance has eigenvalue {lo:.3e}")
        return inner, harm


def _log_distance_avg(d, eb, ea):
    """Average over the eb-circle of log max(distance to a point at d, ea).

    Splits at the crossing angles so every piece is either constant or an
    analytic integrand handled by Gauss-Legendre nodes at machine accuracy.
    """
    d = np.asarray(d, dtype=float)
    eb = np.asarray(eb, dtype=float)
    ea = np.asarray(ea, dtype=float)
    out = np.empty(d.shape)

    degenerate = d * eb < 1e-300
    if np.any(degenerate):
        out[degenerate] = np.log(np.maximum(eb[degenerate], ea[degenerate]))

    rest = ~degenerate
    if np.any(rest):
        dd, bb, aa = d[rest], eb[rest], ea[rest]
        t = (dd * dd + bb * bb - aa * aa) / (2.0 * dd * bb)
        val = np.empty(dd.shape)
        outside = t >= 1.0
        inside = t <= -1.0
        val[outside] = np.log(np.maximum(dd, bb))[outside]
        val[inside] = np.log(aa[inside])
        mid = ~(outside | inside)
        if np.any(mid):
            ustar = np.arccos(t[mid])
            nodes, weights = gauss_legendre(QUAD_NODES)
            # map [-1,1] -> [ustar, pi]
            half = 0.5 * (np.pi - ustar)
            u = ustar[:, None] + half[:, None] * (nodes[None, :] + 1.0)
            r2 = (dd[mid, None] ** 2 + bb[mid, None] ** 2
                  - 2.0 * dd[mid, None] * bb[mid, None] * np.cos(u))
            smooth = (half / np.pi) * 0.5 * (weights[None, :] * np.log(r2)).sum(axis=1)
            val[mid] = (ustar / np.pi) * np.log(aa[mid]) + smooth
        out[rest] = val
    return out


def poisson_harmonic_part(z, w, n_nodes: int = 8192):
    """Definitional disk oracle: harmonic extension of log|z - .| at w
    via the Poisson integral on the unit circle.  Slow; for validation."""
    z = complex(z)
    w = complex(w)
    theta = (np.arange(n_nodes) + 0.5) * (2.0 * np.pi / n_nodes)
    zeta = np.exp(1j * theta)
    pk = (1.0 - abs(w) ** 2) / np.abs(zeta - w) ** 2
    return float(np.mean(pk * np.log(np.abs(z - zeta))))
