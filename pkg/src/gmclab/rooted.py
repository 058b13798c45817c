"""Rooted sampling: joint draws of (field, point) targeting the law of a
point picked from the chaos measure.

Two routes realize the same law:

* ``shift`` — uniform root, field shifted by gamma * C(root, .) with C the
  exact covariance of the sampler (weight 1);
* ``size_biased`` — field as-is, root drawn from the normalized cell
  masses, importance weight total_mass / E[total_mass].

Their agreement on a battery of functionals is the testable form of the
rooted-measure identity.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import SupercriticalGamma, UnsupportedScheme
from .gff import CHOLESKY, EIGEN, FieldSample, SamplerConfig, get_sampler
from .gmc import _check_gamma, mass_vector
from .numerics import TAG_ROOT, rng_for, substream_seed
from .parallel import map_chunks
from .stats import RunningMoments

SHIFT = "shift"
SIZE_BIASED = "size_biased"

CLIP_BOUND = 1e6


@dataclass(frozen=True, eq=False)
class RootedSample:
    field: FieldSample
    root: complex
    root_index: int
    route: str
    importance_weight: float


def _shifted_field(sampler, field: FieldSample, gamma: float, idx: int) -> FieldSample:
    if field.scheme == CHOLESKY:
        return replace(field, values=field.values + gamma * sampler.cov[:, idx])
    modes = field.modes + gamma * sampler.covariance_modes(field.points[idx])
    return replace(field, values=sampler.values_from_modes(modes), modes=modes)


def sample_rooted(config: SamplerConfig, gamma: float, route: str, rep: int,
                  root_override=None) -> RootedSample:
    """One rooted draw.  `root_override` forces the root to the retained
    point nearest the given location (used by deterministic checks)."""
    _check_gamma(gamma)
    sampler = get_sampler(config)
    field = sampler.sample(rep)
    rng = rng_for(substream_seed(field.seed_used, TAG_ROOT))
    n = field.points.size
    if route == SHIFT:
        if root_override is not None:
            idx = int(np.argmin(np.abs(field.points - complex(root_override))))
        else:
            idx = int(rng.integers(n))
        shifted = _shifted_field(sampler, field, gamma, idx)
        return RootedSample(shifted, complex(field.points[idx]), idx, SHIFT, 1.0)
    if route == SIZE_BIASED:
        mass = mass_vector(field.values, field.variances, gamma, field.cell_area)
        total = mass.sum()
        if root_override is not None:
            idx = int(np.argmin(np.abs(field.points - complex(root_override))))
        else:
            idx = int(rng.choice(n, p=mass / total))
        weight = total / (n * field.cell_area)
        return RootedSample(field, complex(field.points[idx]), idx, SIZE_BIASED, weight)
    raise ValueError(f"unknown route {route!r}")


# --- functional battery -------------------------------------------------------

def default_battery(points, cell_area):
    """The five bounded functionals used by the characterization check.

    Each entry maps field values to a per-point vector F(field, z); entries
    that do not depend on z return a constant vector.
    """
    z0 = points[np.argmin(np.abs(points - _center_of(points)))]
    i0 = int(np.argmin(np.abs(points - z0)))
    bump = np.exp(-np.abs(points - _center_of(points)) ** 2 / 0.08)

    def f1(values):
        return values

    def f2(values):
        return np.tanh(values)

    geom = np.exp(-np.abs(points) ** 2)

    def f3(values):
        return geom

    def f4(values):
        return np.full(points.size, values[i0])

    def f5(values):
        return np.full(points.size, np.tanh(cell_area * float(values @ bump)))

    return {"field_at_z": f1, "tanh_field": f2, "geometry_only": f3,
            "field_at_fixed_point": f4, "tanh_smooth_pairing": f5}


def _center_of(points):
    return complex(np.mean(points.real), np.mean(points.imag))


def characterization_gap(config: SamplerConfig, gamma: float, n_replicas: int,
                         functionals=None, clip: float = CLIP_BOUND,
                         workers: int = 1):
    """Both sides of the rooted characterization per functional.

    LHS: E of the mass-weighted sum of F over the grid (size-biased
    summation).  RHS: E of area * F at a uniform root of the shifted field.
    Disjoint replica streams keep the two sides independent so the pooled
    standard error of the difference is honest.
    """
    _check_gamma(gamma)
    sampler = get_sampler(config)
    pts = sampler.points
    area = pts.size * config.domain.cell_area
    funcs = functionals or default_battery(pts, config.domain.cell_area)
    names = list(funcs)
    n_clipped = {k: 0 for k in names}

    def lhs_chunk(lo, hi):
        acc = np.empty((hi - lo, len(names)))
        for r, rep in enumerate(range(lo, hi)):
            field = sampler.sample(rep)
            mass = mass_vector(field.values, field.variances, gamma, field.cell_area)
            for c, name in enumerate(names):
                vals = np.clip(funcs[name](field.values), -clip, clip)
                acc[r, c] = float(vals @ mass)
        return acc

    def rhs_chunk(lo, hi):
        acc = np.empty((hi - lo, len(names)))
        for r, rep in enumerate(range(lo, hi)):
            field = sampler.sample(rep)
            rng = rng_for(substream_seed(field.seed_used, TAG_ROOT))
            idx = int(rng.integers(pts.size))
            shifted = _shifted_field(sampler, field, gamma, idx)
            for c, name in enumerate(names):
                val = funcs[name](shifted.values)[idx]
                if abs(val) > clip:
                    n_clipped[name] += 1
                    val = np.clip(val, -clip, clip)
                acc[r, c] = area * val
        return acc

    lhs = RunningMoments(len(names))
    for block in map_chunks(lhs_chunk, n_replicas, workers):
        lhs.add_block(block)
    rhs = RunningMoments(len(names))
    # disjoint replica stream for the shift route
    def rhs_shifted(lo, hi):
        return rhs_chunk(lo + n_replicas, hi + n_replicas)
    for block in map_chunks(rhs_shifted, n_replicas, workers):
        rhs.add_block(block)

    out = {}
    for c, name in enumerate(names):
        pooled = float(np.hypot(lhs.se[c], rhs.se[c]))
        out[name] = {
            "lhs": float(lhs.mean[c]),
            "rhs": float(rhs.mean[c]),
            "se_lhs": float(lhs.se[c]),
            "se_rhs": float(rhs.se[c]),
            "pooled_se": pooled,
            "z": float((lhs.mean[c] - rhs.mean[c]) / pooled) if pooled else 0.0,
            "clipped": n_clipped[name],
        }
    return out


# --- thickness ----------------------------------------------------------------

def thickness_trajectory(rooted: RootedSample, ladder):
    """(nu, circle average at the root / (-log nu)) down the ladder."""
    field = rooted.field
    if field.scheme != EIGEN or field.modes is None:
        raise UnsupportedScheme("thickness trajectories need the eigen scheme")
    sampler = get_sampler(field.config)
    out = []
    for nu in ladder:
        avg = sampler.circle_average_at(field.modes, rooted.root, float(nu))
        out.append((float(nu), avg / (-np.log(nu))))
    return out


def thickness_mean(config: SamplerConfig, gamma: float, ladder, n_replicas: int,
                   route: str = SHIFT, workers: int = 1, root_override=None):
    """Mean normalized thickness per ladder radius, with standard errors.

    Size-biased trajectories are importance-weighted so both routes target
    the same rooted law.
    """
    ladder = [float(nu) for nu in ladder]
    sampler = get_sampler(config)

    def chunk(lo, hi):
        traj = np.empty((hi - lo, len(ladder)))
        wts = np.empty(hi - lo)
        for r, rep in enumerate(range(lo, hi)):
            rooted = sample_rooted(config, gamma, route, rep, root_override)
            wts[r] = rooted.importance_weight
            for c, nu in enumerate(ladder):
                avg = sampler.circle_average_at(rooted.field.modes, rooted.root, nu)
                traj[r, c] = avg / (-np.log(nu))
        return traj, wts

    num = RunningMoments(len(ladder))
    den = RunningMoments(1)
    for traj, wts in map_chunks(chunk, n_replicas, workers):
        num.add_block(traj * wts[:, None])
        den.add_block(wts[:, None])
    mean = num.mean / den.mean[0]
    se = num.se / den.mean[0]  # weight fluctuations enter at higher order
    return {"ladder": ladder, "mean": mean.tolist(), "se": se.tolist()}
