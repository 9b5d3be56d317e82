"""Monte-Carlo reference: Poisson BSs, one uplink UE per Voronoi cell.

A realization is a BS pattern in a disk with one BS pinned at the origin and
one UE drawn uniformly in every cell. UE positions do not depend on the power
control, so one realization serves every compensation factor.

Besides the origin link, every BS within ``typical_radius`` of the origin
whose Voronoi cell is bounded and lies inside the window is used as a typical
receiver, evaluated in the same pattern *without* the pinned BS (a stationary
PPP, with its own UEs). By the Mecke formula these links estimate the same
Palm quantities as the origin link, with many more links per realization;
evaluating them in the pinned network instead would bias them toward short
links near the origin.

Link weighting. ``per-bs`` gives every typical BS the same weight, i.e. a UE
drawn uniformly in a typical cell; its link length is close to Rayleigh with
density ``9 lambda / 7``, not ``lambda``. ``cell-area`` (default) weights each
link by its cell area, which is the same as taking the typical UE of a Poisson
UE population (a UE at a uniformly random location): the link length is then
exactly Rayleigh with density ``lambda``, the law the analysis is built on.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, Voronoi, cKDTree
from statsmodels.stats.proportion import proportion_confint

from .model import SystemParams, transmit_power
from .numerics import random_stream

log = logging.getLogger(__name__)

ESTIMATORS = ("analytic-conditional", "fading-draws")
WEIGHTINGS = ("cell-area", "per-bs")


@dataclass(frozen=True)
class SimConfig:
    """Simulation knobs.

    ``window_radius=None`` resolves to ``max(guard_margin + 10 r_cell, 15 r_cell)``
    with ``r_cell = 1 / sqrt(pi lambda)``, the smallest default that keeps the
    window invariant (10 mean cell radii plus the guard margin).
    ``typical_radius=None`` resolves to a third of the window; ``0`` keeps
    only the BS at the origin.
    """

    n_realizations: int = 500
    window_radius: float | None = None
    seed: int = 1
    estimator: str = "analytic-conditional"
    fading_draws: int = 10_000
    guard_margin: float = 0.0
    typical_radius: float | None = None
    max_rejection_rounds: int = 400
    workers: int = 1
    link_weighting: str = "cell-area"

    def __post_init__(self):
        if self.n_realizations <= 0:
            raise ValueError("n_realizations must be > 0")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.link_weighting not in WEIGHTINGS:
            raise ValueError(f"link_weighting must be one of {WEIGHTINGS}, got {self.link_weighting!r}")
        if self.fading_draws <= 0:
            raise ValueError("fading_draws must be > 0")
        if self.guard_margin < 0:
            raise ValueError("guard_margin must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def resolved(self, params: SystemParams) -> "SimConfig":
        cell = params.mean_cell_radius
        radius = self.window_radius
        if radius is None:
            radius = max(self.guard_margin + 10.0 * cell, 15.0 * cell)
        if radius < 10.0 * cell + self.guard_margin:
            raise ValueError(
                f"window_radius {radius:.1f} m must cover 10 mean cell radii "
                f"({10 * cell:.1f} m) plus guard_margin ({self.guard_margin:.1f} m)")
        typ = radius / 3.0 if self.typical_radius is None else self.typical_radius
        if not 0 <= typ < radius:
            raise ValueError("typical_radius must lie in [0, window_radius)")
        return replace(self, window_radius=float(radius), typical_radius=float(typ))


@dataclass(frozen=True)
class Realization:
    """Pinned-origin network, plus the same BS pattern without the pinned BS.

    ``bs_points`` / ``ue_points`` form the Palm network (row 0 is the BS at
    the origin). ``stationary_ue_points`` serve ``bs_points[1:]`` on their own;
    ``typical_indices`` index into that stationary network. ``cell_areas`` holds
    the origin cell first, then the cells of ``typical_indices``.
    """

    bs_points: np.ndarray       # (n, 2) meters
    ue_points: np.ndarray       # (n, 2), ue_points[i] is served by bs_points[i]
    typical_bs_index: int
    window_radius: float
    stationary_ue_points: np.ndarray | None = None   # (n - 1, 2)
    typical_indices: tuple[int, ...] = field(default=())
    cell_areas: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.bs_points.shape != self.ue_points.shape:
            raise ValueError("bs_points and ue_points must be index-aligned")
        if self.stationary_ue_points is not None and \
                self.stationary_ue_points.shape != self.bs_points[1:].shape:
            raise ValueError("stationary_ue_points must align with bs_points[1:]")

    @property
    def link_lengths(self) -> np.ndarray:
        return np.hypot(*(self.ue_points - self.bs_points).T)

    @property
    def typical_link_lengths(self) -> np.ndarray:
        """Origin link first, then the stationary links, aligned with ``cell_areas``."""
        out = [self.link_lengths[self.typical_bs_index]]
        if self.typical_indices:
            idx = list(self.typical_indices)
            out.extend(np.hypot(*(self.stationary_ue_points[idx] - self.bs_points[1:][idx]).T))
        return np.asarray(out)


# ---------------------------------------------------------------------------
# network sampling


def _uniform_disk(n, radius, stream):
    r = radius * np.sqrt(stream.random(n))
    phi = 2.0 * math.pi * stream.random(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _place_users(bs, radius, stream, max_rounds, ue=None, reach=None):
    """Fill the NaN rows of ``ue`` with a uniform point of the matching cell.

    Proposals are uniform in the disk of radius ``reach`` (default: the
    window), which must cover every cell still to be filled.
    """
    tree = cKDTree(bs)
    n = len(bs)
    ue = np.full((n, 2), np.nan) if ue is None else ue.copy()
    reach = radius if reach is None else min(reach, radius)
    todo = int(np.isnan(ue[:, 0]).sum())
    batch = max(1024, 8 * todo)
    for _ in range(max_rounds):
        if todo == 0:
            return ue
        pts = _uniform_disk(batch, reach, stream)
        _, owner = tree.query(pts)
        # first hit of each still-empty cell, in draw order
        cells, first = np.unique(owner, return_index=True)
        empty = np.isnan(ue[cells, 0])
        ue[cells[empty]] = pts[first[empty]]
        todo = int(np.isnan(ue[:, 0]).sum())
    return ue if todo == 0 else None


def _cell_area(vor, i, radius):
    """Area of cell ``i`` if it is bounded and inside the window, else None."""
    region = vor.regions[vor.point_region[i]]
    if not region or -1 in region:
        return None
    verts = vor.vertices[region]
    if np.any(np.hypot(verts[:, 0], verts[:, 1]) >= radius):
        return None
    return float(ConvexHull(verts).volume)


def _interior_cells(phi, radius, typical_radius):
    """Points of ``phi`` within ``typical_radius`` whose cell is bounded and
    inside the window, with their cell areas."""
    keep, areas = [], []
    near = np.nonzero(np.hypot(phi[:, 0], phi[:, 1]) <= typical_radius)[0]
    if len(near) and len(phi) >= 4:
        vor = Voronoi(phi)
        for i in near:
            a = _cell_area(vor, i, radius)
            if a is not None:
                keep.append(int(i))
                areas.append(a)
    return tuple(keep), tuple(areas)


def _pin_origin(bs, ue_phi, vor, radius, stream, max_rounds):
    """UEs of the network with the pinned BS, derived from those without it.

    Only the origin cell and its neighbours change. A neighbour keeps its UE
    when that UE still lies in the shrunk cell (a uniform point conditioned on
    a subset is uniform on it); otherwise, and for the origin, a new one is drawn.
    """
    ue = np.vstack([np.full((1, 2), np.nan), ue_phi])
    _, owner = cKDTree(bs).query(ue[1:])
    moved = np.nonzero(owner != np.arange(1, len(bs)))[0] + 1
    ue[moved] = np.nan
    reach = 0.0
    for i in np.concatenate([[0], moved]):
        region = vor.regions[vor.point_region[i]]
        if not region or -1 in region:
            reach = radius
            break
        verts = vor.vertices[region]
        reach = max(reach, float(np.max(np.hypot(verts[:, 0], verts[:, 1]))))
    return _place_users(bs, radius, stream, max_rounds, ue, reach * (1 + 1e-9))


def sample_network(params: SystemParams, cfg: SimConfig, stream: np.random.Generator) -> Realization:
    """One Palm realization: PPP in the window plus a BS at the origin, one UE per cell.

    With ``typical_radius > 0`` the realization also carries the UEs of the
    same pattern without the pinned BS, whose interior cells near the origin
    give the extra typical links. The extra BS would otherwise bias them: it
    shrinks its neighbours' cells and adds an interferer.
    """
    cfg = cfg.resolved(params)
    radius = cfg.window_radius
    for attempt in range(100):
        n = stream.poisson(params.bs_density * math.pi * radius**2)
        phi = _uniform_disk(n, radius, stream)
        bs = np.vstack([np.zeros((1, 2)), phi])
        vor = Voronoi(bs) if len(bs) >= 4 else None
        origin_area = None if vor is None else _cell_area(vor, 0, radius)
        if origin_area is None:
            log.warning("origin cell not inside the window (attempt %d); resampling the network", attempt)
            continue
        if cfg.typical_radius > 0:
            ue_phi = _place_users(phi, radius, stream, cfg.max_rejection_rounds)
            ue = None if ue_phi is None else _pin_origin(bs, ue_phi, vor, radius, stream,
                                                         cfg.max_rejection_rounds)
            keep, areas = _interior_cells(phi, radius, cfg.typical_radius)
        else:
            ue_phi, keep, areas = None, (), ()
            ue = _place_users(bs, radius, stream, cfg.max_rejection_rounds)
        if ue is not None:
            return Realization(bs, ue, 0, radius, ue_phi, keep, (origin_area,) + areas)
        log.warning("UE rejection sampling hit its bound (attempt %d); resampling the network", attempt)
    raise RuntimeError("could not place one UE in every Voronoi cell")


# ---------------------------------------------------------------------------
# conditional success probability


def _link_terms(bs, ue, params: SystemParams, indices):
    """Received strength of each link in ``indices`` and the interferer loads relative to it."""
    idx = np.asarray(indices, dtype=int)
    lengths = np.hypot(*(ue - bs).T)
    power = transmit_power(lengths, params)
    x = power[idx] * lengths[idx] ** (-params.path_loss)
    d = np.hypot(ue[None, :, 0] - bs[idx, None, 0], ue[None, :, 1] - bs[idx, None, 1])
    d[np.arange(len(idx)), idx] = np.inf     # the own UE is not an interferer
    ratio = power[None, :] * d ** (-params.path_loss) / x[:, None]
    return x, ratio


def conditional_success(real: Realization, theta, params: SystemParams, bs_index: int | None = None,
                        estimator: str = "analytic-conditional", fading_draws: int = 10_000,
                        stream: np.random.Generator | None = None):
    """``P(SINR > theta | network)`` for the link of ``bs_index`` (default: the typical BS).

    The analytic estimator averages the Rayleigh fading in closed form; the
    ``fading-draws`` estimator counts successes over independent fading vectors.
    """
    idx = real.typical_bs_index if bs_index is None else bs_index
    out = link_success(real, theta, params, (idx,), estimator, fading_draws, stream)[0]
    return float(out) if np.ndim(out) == 0 else out


def link_success(real: Realization, theta, params: SystemParams, indices=None,
                 estimator: str = "analytic-conditional", fading_draws: int = 10_000,
                 stream: np.random.Generator | None = None) -> np.ndarray:
    """Conditional success probabilities, shape ``(n_links,) + shape(theta)``.

    ``indices`` selects links of the pinned-origin network; the default is
    every typical link (origin first, then the stationary links, matching
    ``real.cell_areas``).
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}")
    if estimator == "fading-draws" and stream is None:
        raise ValueError("fading-draws needs a random stream")
    theta = np.asarray(theta, dtype=float)
    th = theta.reshape(-1)
    if indices is None:
        parts = [_success(real.bs_points, real.ue_points, th, params, (real.typical_bs_index,),
                          estimator, fading_draws, stream)]
        if real.typical_indices:
            parts.append(_success(real.bs_points[1:], real.stationary_ue_points, th, params,
                                  real.typical_indices, estimator, fading_draws, stream))
        out = np.concatenate(parts, axis=0)
    else:
        out = _success(real.bs_points, real.ue_points, th, params, indices, estimator, fading_draws, stream)
    return out.reshape((len(out),) + theta.shape)


def _success(bs, ue, th, params, indices, estimator, fading_draws, stream):
    x, ratio = _link_terms(bs, ue, params, indices)
    if estimator == "analytic-conditional":
        load = th[None, :, None] * ratio[:, None, :]
        logp = -th[None, :] * params.noise / x[:, None] - np.sum(np.log1p(load), axis=2)
        return np.exp(logp)
    out = np.empty((len(x), th.size))
    for k in range(len(x)):
        hits = np.zeros(th.size)
        done = 0
        chunk = max(1, 2_000_000 // max(1, ratio.shape[1]))
        while done < fading_draws:
            m = min(chunk, fading_draws - done)
            h0 = stream.exponential(size=m)
            hi = stream.exponential(size=(m, ratio.shape[1]))
            interf = hi @ np.where(np.isfinite(ratio[k]), ratio[k], 0.0)
            sinr = h0[:, None] / (params.noise / x[k] + interf[:, None])
            hits += np.sum(sinr > th[None, :], axis=0)
            done += m
        out[k] = hits / fading_draws
    return out


# ---------------------------------------------------------------------------
# batch runs


@dataclass(frozen=True)
class LinkSamples:
    """Conditional success probabilities of all typical links.

    ``values[e]`` has shape ``(n_links, n_theta)`` for ``epsilons[e]``;
    ``realization`` maps each link to the realization it came from and
    ``weights`` holds the link weights (cell areas, or ones for ``per-bs``).
    """

    epsilons: tuple[float, ...]
    theta: np.ndarray
    values: tuple[np.ndarray, ...]
    realization: np.ndarray
    weights: np.ndarray

    def for_epsilon(self, eps: float) -> np.ndarray:
        for k, e in enumerate(self.epsilons):
            if math.isclose(e, eps, rel_tol=1e-12, abs_tol=1e-15):
                return self.values[k]
        raise KeyError(f"epsilon {eps} was not simulated")


def _one_job(args):
    idx, params_list, cfg, theta = args
    stream = random_stream(cfg.seed, idx)
    real = sample_network(params_list[0], cfg, stream)
    fade = random_stream(cfg.seed, idx, 1)
    out = [link_success(real, theta, p, None, cfg.estimator, cfg.fading_draws, fade) for p in params_list]
    if cfg.link_weighting == "cell-area":
        w = np.asarray(real.cell_areas)
    else:
        w = np.ones(len(real.cell_areas))
    return out, w


def simulate_links(params: SystemParams, cfg: SimConfig, theta, epsilons: Sequence[float] | None = None) -> LinkSamples:
    """Run ``cfg.n_realizations`` independent realizations and collect every typical link.

    Realization ``i`` draws from the stream ``(cfg.seed, i)`` only, so results
    do not depend on ``cfg.workers`` or on scheduling order.
    """
    cfg = cfg.resolved(params)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    eps = tuple(float(e) for e in (epsilons if epsilons is not None else (params.compensation,)))
    plist = [params.replace(compensation=e) for e in eps]
    jobs = [(i, plist, cfg, theta) for i in range(cfg.n_realizations)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_one_job, jobs, chunksize=8))
    else:
        results = [_one_job(j) for j in jobs]
    values = tuple(np.concatenate([r[0][e] for r in results], axis=0) for e in range(len(eps)))
    weights = np.concatenate([r[1] for r in results])
    owner = np.concatenate([np.full(len(r[1]), i) for i, r in enumerate(results)])
    return LinkSamples(eps, theta, values, owner, weights)


@dataclass(frozen=True)
class MetaEstimate:
    theta: np.ndarray
    gamma: np.ndarray
    value: np.ndarray         # (n_theta, n_gamma)
    ci: np.ndarray            # Wilson 95% half-widths
    n_links: int


def meta_from_samples(ps: np.ndarray, theta, gamma, weights=None, alpha: float = 0.05) -> MetaEstimate:
    """Weighted fraction of links with ``P_s > gamma`` per ``theta``.

    Wilson half-widths use the Kish effective sample size of the weights.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = ps.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    frac = np.einsum("k,kij->ij", w, (ps[:, :, None] > gamma[None, None, :]).astype(float)) / w.sum()
    # P_s is a product of positive factors; far links may underflow to 0.0
    frac[:, gamma <= 0] = 1.0
    n_eff = w.sum() ** 2 / np.sum(w * w)
    lo, hi = proportion_confint(frac * n_eff, n_eff, alpha=alpha, method="wilson")
    return MetaEstimate(np.asarray(theta, dtype=float), gamma, frac, (hi - lo) / 2.0, n)


def empirical_meta(params: SystemParams, cfg: SimConfig, theta_grid, gamma_grid,
                   samples: LinkSamples | None = None) -> MetaEstimate:
    """Empirical meta distribution ``P(P_s(theta) > gamma)`` over typical links."""
    theta_grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    gamma_grid = np.atleast_1d(np.asarray(gamma_grid, dtype=float))
    if theta_grid.size == 0 or gamma_grid.size == 0:
        raise ValueError("grids must be nonempty")
    if samples is None:
        samples = simulate_links(params, cfg, theta_grid)
    ps = samples.for_epsilon(params.compensation)
    cols = [int(np.argmin(np.abs(samples.theta - t))) for t in theta_grid]
    if not np.allclose(samples.theta[cols], theta_grid, rtol=1e-12):
        raise ValueError("theta grid was not simulated")
    return meta_from_samples(ps[:, cols], theta_grid, gamma_grid, samples.weights)


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    std_error: float
    n_links: int


def moment_from_samples(ps: np.ndarray, owner: np.ndarray, b: float, weights=None) -> MomentEstimate:
    """Weighted mean of ``P_s^b`` with a standard error clustered by realization
    (ratio-estimator linearisation)."""
    if b < 0:
        raise ValueError("b must be >= 0")
    w = np.ones(len(ps)) if weights is None else np.asarray(weights, dtype=float)
    y = ps**b
    est = float(np.sum(w * y) / np.sum(w))
    sums = np.bincount(owner, weights=w * y)
    wsum = np.bincount(owner, weights=w)
    keep = wsum > 0
    resid = sums[keep] - est * wsum[keep]
    k = int(keep.sum())
    se = math.sqrt(np.sum(resid**2) * k / max(k - 1, 1)) / wsum.sum()
    return MomentEstimate(est, se, len(y))


def empirical_moment(params: SystemParams, cfg: SimConfig, theta: float, b: float,
                     samples: LinkSamples | None = None) -> MomentEstimate:
    """Sample mean of ``P_s(theta)^b`` over typical links."""
    if b < 0:
        raise ValueError("b must be >= 0")
    if samples is None:
        samples = simulate_links(params, cfg, [theta])
    col = int(np.argmin(np.abs(samples.theta - theta)))
    if not math.isclose(samples.theta[col], theta, rel_tol=1e-12):
        raise ValueError(f"theta {theta} was not simulated")
    ps = samples.for_epsilon(params.compensation)[:, col]
    return moment_from_samples(ps, samples.realization, b, samples.weights)


def dump_realization(real: Realization, path: str | Path) -> None:
    """Write BS and UE coordinates as CSV (``kind,x_m,y_m``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "x_m", "y_m"])
        for x, y in real.bs_points:
            w.writerow(["bs", repr(float(x)), repr(float(y))])
        for x, y in real.ue_points:
            w.writerow(["ue", repr(float(x)), repr(float(y))])


# ---------------------------------------------------------------------------
# interference under the analysis model


def _interference_radius(params: SystemParams, radius: float | None) -> float:
    return 40.0 * params.mean_cell_radius if radius is None else radius


def thinning_mask(d, params: SystemParams, stream: np.random.Generator) -> np.ndarray:
    """Keep a homogeneous-PPP point at distance ``d`` with probability ``1 - exp(-pi lambda d^2)``."""
    d = np.asarray(d, dtype=float)
    return stream.random(d.shape) < -np.expm1(-math.pi * params.bs_density * d * d)


def _truncated_rayleigh(d, params, stream):
    # inverse CDF of the Rayleigh law restricted to [0, d]
    lam = math.pi * params.bs_density
    mass = -np.expm1(-lam * d * d)
    u = stream.random(d.shape)
    return np.sqrt(-np.log1p(-u * mass) / lam)


def sample_interference(params: SystemParams, n: int, stream: np.random.Generator,
                        d1: float | None = None, radius: float | None = None) -> np.ndarray:
    """``n`` independent draws of the aggregate interference at the typical BS.

    Interferers form a PPP of intensity ``lambda (1 - exp(-pi lambda d^2))``
    obtained by thinning, each with a truncated-Rayleigh link length, power
    control and unit-mean exponential fading. With ``d1`` given, the draws are
    conditioned on the nearest interferer sitting at ``d1`` and return the
    interference of all the others (the points beyond ``d1``).
    """
    rmax = _interference_radius(params, radius)
    rmin = 0.0 if d1 is None else float(d1)
    if not 0 <= rmin < rmax:
        raise ValueError("d1 must lie inside the sampling disk")
    lam = params.bs_density
    mean = lam * math.pi * (rmax**2 - rmin**2)
    counts = stream.poisson(mean, size=n)
    total = int(counts.sum())
    d = np.sqrt(rmin**2 + (rmax**2 - rmin**2) * stream.random(total))
    keep = thinning_mask(d, params, stream)
    link = _truncated_rayleigh(d, params, stream)
    fade = stream.exponential(size=total)
    contrib = np.where(keep, fade * transmit_power(link, params) * d ** (-params.path_loss), 0.0)
    owner = np.repeat(np.arange(n), counts)
    return np.bincount(owner, weights=contrib, minlength=n)


def sample_nonhomogeneous_interference(params: SystemParams, d1_condition: float | None = None,
                                       stream: np.random.Generator | None = None,
                                       radius: float | None = None) -> float:
    """One draw of the interference (watts); see :func:`sample_interference`."""
    if stream is None:
        stream = np.random.default_rng()
    return float(sample_interference(params, 1, stream, d1_condition, radius)[0])
