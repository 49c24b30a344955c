"""Projector Monte Carlo estimation of extremal commutator eigenvalues.

Walkers stochastically apply the propagator P = 1 - dtau*(A - S) to a
sparse coefficient vector.  In sign-free mode A = -abs(M) for the target
commutator matrix M, so every off-diagonal propagator element is
non-negative and coefficients never change sign; the converged shift and
mixed estimators then approach -||abs(M)||.  In signed mode A = -M and
annihilation between opposite-sign walkers is what (eventually) projects
onto the true extremal eigenvector.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import _kernels, stats
from .commutators import VtvEngine, VttEngine
from .determinants import enumerate_sector, sector_dimension
from .errors import ExtinctionError, FitError, PopulationOverflowError
from .exact_oracle import sector_basis

# Sectors up to this dimension are enumerated to find the starting
# determinant; larger sectors fall back to a greedy diagonal descent.
_SCAN_LIMIT = 1 << 20
_DEFAULT_POPULATION_CAP = 1e8
_DEFAULT_INITIAL_WEIGHT = 10.0


@dataclass
class RunConfig:
    """Parameters of one projector Monte Carlo run."""

    iterations: int
    vary_threshold: float
    seed: int
    dt: float = 0.0  # 0 -> auto from the estimated spectral range
    xi: float = 0.05
    mode: str = "sign_free"  # sign_free | signed
    update_period: int = 1
    initial_state: int | None = None  # determinant override
    initial_weight: float = _DEFAULT_INITIAL_WEIGHT
    initial_seeds: int = 16  # extra random sector states seeded at start
    stats_start: int | None = None  # iteration where averaging begins
    population_cap: float = _DEFAULT_POPULATION_CAP
    series_path: str | None = None

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if self.dt < 0.0:
            raise ValueError("dt must be non-negative")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError("xi must lie in (0, 1]")
        if self.mode not in ("sign_free", "signed"):
            raise ValueError("mode must be sign_free or signed")
        if self.update_period < 1:
            raise ValueError("update_period must be >= 1")


class WalkerStore:
    """Sparse signed coefficient vector keyed by determinant."""

    def __init__(self, dets=None, coeffs=None):
        if dets is None:
            dets = np.empty(0, dtype=np.uint64)
            coeffs = np.empty(0)
        order = np.argsort(dets, kind="stable")
        self.dets = np.asarray(dets, dtype=np.uint64)[order]
        self.coeffs = np.asarray(coeffs, dtype=float)[order]

    @property
    def population(self):
        return float(np.abs(self.coeffs).sum())

    @property
    def n_occupied(self):
        return len(self.dets)

    def signed_sum(self):
        return float(self.coeffs.sum())

    def as_dict(self):
        return {int(d): float(c) for d, c in zip(self.dets, self.coeffs)}


@dataclass
class ShiftController:
    shift: float
    xi: float
    dt: float
    vary_threshold: float
    update_period: int = 1
    varying: bool = False
    _last_population: float = 0.0

    def maybe_start_varying(self, population):
        if not self.varying and population >= self.vary_threshold:
            self.varying = True
            self._last_population = population

    def update(self, population):
        """S <- S - (xi/dt) ln(N_new/N_old); no-op until varying."""
        if not self.varying:
            return self.shift
        if population <= 0.0 or self._last_population <= 0.0:
            raise ExtinctionError("walker population vanished")
        self.shift -= (self.xi / (self.dt * self.update_period)) * np.log(
            population / self._last_population
        )
        self._last_population = population
        return self.shift


class EstimatorAccumulator:
    """Per-iteration traces of shift, population and mixed-estimator parts."""

    def __init__(self):
        self.iterations = []
        self.shift = []
        self.population = []
        self.n_occupied = []
        self.mixed_num = []
        self.mixed_den = []
        self.n_annihilated = []

    def record(self, it, shift, pop, n_occ, num, den, annihilated):
        self.iterations.append(it)
        self.shift.append(shift)
        self.population.append(pop)
        self.n_occupied.append(n_occ)
        self.mixed_num.append(num)
        self.mixed_den.append(den)
        self.n_annihilated.append(annihilated)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["iter", "shift", "n_walkers", "n_occupied",
                 "mixed_num", "mixed_den", "n_annihilated"]
            )
            for row in zip(
                self.iterations, self.shift, self.population, self.n_occupied,
                self.mixed_num, self.mixed_den, self.n_annihilated,
            ):
                w.writerow([row[0]] + [repr(v) for v in row[1:]])


@dataclass
class RunReport:
    shift_estimate: float
    shift_stderr: float
    mixed_estimate: float
    mixed_stderr: float
    norm_estimate: float
    norm_stderr: float
    iterations: int
    vary_iteration: int | None
    stats_start: int
    final_population: float
    mean_population: float
    plateau_iteration: int | None
    config: dict
    series_path: str | None = None

    def to_json_dict(self):
        return asdict(self)

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def _diagonals(engine, dets, sign_free):
    """Propagated-operator diagonal A_ii for every determinant in ``dets``."""
    if isinstance(engine, VtvEngine):
        return np.zeros(len(dets))
    diag = _kernels.vtt_diag_all(
        dets, engine.scalar, engine.h1, engine.antisym, engine.n_so
    )
    return -np.abs(diag) if sign_free else -diag


def estimate_dt(engine, reference_det, n_probe=20):
    """dt = 0.1 / (spectral-range bound from sampled row sums).

    Row 1-norms upper bound the spectral radius; a short deterministic
    excursion from the reference determinant samples representative rows.
    """
    dets = [reference_det]
    seen = {reference_det}
    frontier = reference_det
    best = 0.0
    for _ in range(n_probe):
        targets, vals = engine.row(frontier)
        row_sum = float(np.abs(vals).sum()) + abs(engine.diagonal(frontier))
        best = max(best, row_sum)
        if len(targets) == 0:
            break
        nxt = int(targets[int(np.argmax(np.abs(vals)))])
        if nxt in seen:
            # move to the largest unvisited coupling instead
            order = np.argsort(-np.abs(vals))
            nxt = None
            for idx in order:
                cand = int(targets[idx])
                if cand not in seen:
                    nxt = cand
                    break
            if nxt is None:
                break
        seen.add(nxt)
        dets.append(nxt)
        frontier = nxt
    if best == 0.0:
        raise ValueError("operator has empty rows around the reference state")
    return 0.1 / best


def select_initial_state(engine, sector, sign_free=True):
    """Sector determinant with the lowest propagated-operator diagonal.

    Small sectors are scanned exhaustively; large ones use a greedy
    descent over single excitations from an arbitrary sector state.
    """
    n_spatial = engine.hamiltonian.n_spatial
    if sector_dimension(n_spatial, sector) <= _SCAN_LIMIT:
        basis = sector_basis(engine, sector)
        diag = _diagonals(engine, basis, sign_free)
        return int(basis[int(np.argmin(diag))])
    # lowest-bitmask sector member: lowest n_up up and n_dn down orbitals
    d = 0
    for a in range(sector.n_up):
        d |= 1 << (2 * a)
    for a in range(sector.n_down):
        d |= 1 << (2 * a + 1)
    current = _diagonals(engine, np.array([d], dtype=np.uint64), sign_free)[0]
    while True:
        targets, _ = engine.row(d)
        if len(targets) == 0:
            return d
        diags = _diagonals(engine, targets, sign_free)
        best = int(np.argmin(diags))
        if diags[best] >= current:
            return d
        d = int(targets[best])
        current = diags[best]


def step(store, engine, controller, rng, sign_free=True, population_cap=None):
    """One full iteration: spawn, death, merge/annihilate, round.

    Returns the new store and a stats dict (mixed-estimator parts and the
    amount of walker weight annihilated in the merge).
    """
    dets = store.dets
    coeffs = store.coeffs
    if len(dets) == 0:
        raise ExtinctionError("walker population vanished")
    dt = controller.dt
    shift = controller.shift

    n_spawn = np.maximum(1, np.rint(np.abs(coeffs))).astype(np.int64)
    attempts = int(n_spawn.sum())
    out_dets = np.empty(attempts, dtype=np.uint64)
    out_amps = np.empty(attempts)
    if isinstance(engine, VtvEngine):
        u = rng.random(2 * attempts)
        n_out = _kernels.vtv_spawn(
            dets, coeffs, n_spawn, engine.hopping, engine.coulomb,
            engine.n_so, dt, sign_free, u, out_dets, out_amps,
        )
    else:
        u = rng.random(4 * attempts)
        n_out = _kernels.vtt_spawn(
            dets, coeffs, n_spawn, engine.h1, engine.antisym, engine.n_so,
            dt, sign_free, engine.p_single, u, out_dets, out_amps,
        )
    spawn_dets = out_dets[:n_out]
    spawn_amps = out_amps[:n_out]

    diag = _diagonals(engine, dets, sign_free)
    mixed_num = float(diag @ coeffs) - float(spawn_amps.sum()) / dt
    mixed_den = float(coeffs.sum())

    # death/cloning on the diagonal
    survivors = coeffs - dt * (diag - shift) * coeffs

    all_dets = np.concatenate([dets, spawn_dets])
    all_amps = np.concatenate([survivors, spawn_amps])
    uniq, inverse = np.unique(all_dets, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inverse, all_amps)
    gross = np.zeros(len(uniq))
    np.add.at(gross, inverse, np.abs(all_amps))
    annihilated = float((gross - np.abs(merged)).sum())

    # stochastic rounding of sub-unit coefficients
    small = (np.abs(merged) < 1.0) & (merged != 0.0)
    if small.any():
        u2 = rng.random(int(small.sum()))
        vals = merged[small]
        merged[small] = np.where(u2 < np.abs(vals), np.sign(vals), 0.0)
    keep = merged != 0.0
    new_store = WalkerStore(uniq[keep], merged[keep])

    pop = new_store.population
    if pop == 0.0:
        raise ExtinctionError("walker population vanished")
    if population_cap is not None and pop > population_cap:
        raise PopulationOverflowError(
            f"population {pop:.3g} exceeds cap {population_cap:.3g}"
        )
    return new_store, {
        "mixed_num": mixed_num,
        "mixed_den": mixed_den,
        "annihilated": annihilated,
    }


def mixed_estimate(acc, start=0, stop=None):
    """Ratio-of-means mixed estimator with reblocked error over a window."""
    num = acc.mixed_num[start:stop]
    den = acc.mixed_den[start:stop]
    if not num:
        raise ValueError("empty estimator window")
    value, stderr, _ = stats.reblock_ratio(num, den)
    return value, stderr


def _detect_plateau(population, window=500, threshold=0.1):
    """Iteration where population growth stalls, or None.

    Compares the sliding-window log-growth rate with the rate over the
    first window; used to diagnose annihilation plateaus in signed runs.
    """
    pop = np.asarray(population)
    if len(pop) < 2 * window or np.any(pop <= 0):
        return None
    log_pop = np.log(pop)
    initial_rate = (log_pop[window] - log_pop[0]) / window
    if initial_rate <= 0:
        return None
    for a in range(window, len(pop) - window):
        rate = (log_pop[a + window] - log_pop[a]) / window
        if rate < threshold * initial_rate:
            return a
    return None


def run(config, engine, sector):
    """Full projector run: grow, stabilize, average, report."""
    sign_free = config.mode == "sign_free"
    if config.initial_state is not None:
        d0 = int(config.initial_state)
    else:
        d0 = select_initial_state(engine, sector, sign_free)
    dt = config.dt if config.dt > 0 else estimate_dt(engine, d0)
    s0 = float(_diagonals(engine, np.array([d0], dtype=np.uint64), sign_free)[0])
    controller = ShiftController(
        shift=s0, xi=config.xi, dt=dt,
        vary_threshold=config.vary_threshold,
        update_period=config.update_period,
    )
    rng = np.random.Generator(np.random.Philox(config.seed))
    # Seed extra random sector states so every irreducible block of the
    # operator starts populated; blocks with smaller extremal eigenvalues
    # decay away relative to the dominant one.
    seeds = {d0}
    n_up_orbs = list(range(0, 2 * engine.hamiltonian.n_spatial, 2))
    n_dn_orbs = list(range(1, 2 * engine.hamiltonian.n_spatial, 2))
    if config.initial_state is None:
        while len(seeds) < config.initial_seeds + 1:
            d = 0
            for p in rng.permutation(n_up_orbs)[: sector.n_up]:
                d |= 1 << int(p)
            for p in rng.permutation(n_dn_orbs)[: sector.n_down]:
                d |= 1 << int(p)
            seeds.add(d)
    seed_dets = np.array(sorted(seeds), dtype=np.uint64)
    store = WalkerStore(
        seed_dets, np.full(len(seed_dets), config.initial_weight)
    )
    acc = EstimatorAccumulator()
    vary_iteration = None
    for it in range(config.iterations):
        store, info = step(
            store, engine, controller, rng,
            sign_free=sign_free, population_cap=config.population_cap,
        )
        pop = store.population
        controller.maybe_start_varying(pop)
        if vary_iteration is None and controller.varying:
            vary_iteration = it
        if controller.varying and (it + 1) % config.update_period == 0:
            controller.update(pop)
        acc.record(
            it, controller.shift, pop, store.n_occupied,
            info["mixed_num"], info["mixed_den"], info["annihilated"],
        )
    if config.series_path:
        acc.write_csv(config.series_path)

    if config.stats_start is not None:
        start = config.stats_start
    elif vary_iteration is not None:
        start = vary_iteration + (config.iterations - vary_iteration) // 5
    else:
        start = config.iterations // 2
    start = min(start, config.iterations - 2)

    shift_res = stats.reblock(acc.shift[start:])
    mixed_val, mixed_err = mixed_estimate(acc, start)
    cfg = asdict(config)
    cfg["dt"] = dt
    cfg["initial_state"] = d0
    cfg["operator"] = engine.operator_name
    return RunReport(
        shift_estimate=shift_res.mean,
        shift_stderr=shift_res.stderr,
        mixed_estimate=mixed_val,
        mixed_stderr=mixed_err,
        norm_estimate=-mixed_val,
        norm_stderr=mixed_err,
        iterations=config.iterations,
        vary_iteration=vary_iteration,
        stats_start=start,
        final_population=store.population,
        mean_population=float(np.mean(acc.population[start:])),
        plateau_iteration=_detect_plateau(acc.population),
        config=cfg,
        series_path=config.series_path,
    )


def extrapolate_population_bias(points, c_grid=None):
    """Fit y = a + b*x^c with x = 1/N_w; returns (a, b, c, a_stderr).

    ``points`` holds (population, estimate, stderr) triples.  The
    nonlinear exponent is scanned over a log-spaced grid with a
    closed-form weighted linear solve for (a, b) at each candidate.
    """
    pts = [(float(n), float(y), float(s)) for n, y, s in points]
    if len(pts) < 4:
        raise FitError("need at least 4 points")
    populations = np.array([p[0] for p in pts])
    if len(np.unique(populations)) < 4:
        raise FitError("need at least 4 distinct populations")
    if np.any(populations <= 0):
        raise FitError("populations must be positive")
    x = 1.0 / populations
    y = np.array([p[1] for p in pts])
    sig = np.array([p[2] for p in pts])
    sig = np.where(sig > 0, sig, max(1e-12, float(np.abs(y).max()) * 1e-9))
    w = 1.0 / sig**2

    if np.ptp(y) == 0.0:
        return float(y[0]), 0.0, 1.0, 0.0

    if c_grid is None:
        c_grid = np.exp(np.linspace(np.log(0.05), np.log(3.0), 241))
    best = None
    for c in c_grid:
        g = x**c
        # weighted normal equations for y = a + b*g
        sw, swg = w.sum(), (w * g).sum()
        swgg, swy, swgy = (w * g * g).sum(), (w * y).sum(), (w * g * y).sum()
        det = sw * swgg - swg**2
        if det <= 0:
            continue
        a = (swgg * swy - swg * swgy) / det
        b = (sw * swgy - swg * swy) / det
        sse = float((w * (y - a - b * g) ** 2).sum())
        var_a = swgg / det
        if best is None or sse < best[0]:
            best = (sse, float(a), float(b), float(c), float(np.sqrt(var_a)))
    if best is None:
        raise FitError("degenerate design matrix")
    sse, a, b, c, a_stderr = best
    # inflate by sqrt(reduced chi^2) when the fit is worse than the errors
    dof = max(1, len(pts) - 3)
    a_stderr *= max(1.0, np.sqrt(sse / dof))
    return a, b, c, a_stderr
