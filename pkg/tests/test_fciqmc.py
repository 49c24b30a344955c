import numpy as np
import pytest

from conftest import dense_commutator
from trotterbound import fciqmc
from trotterbound.commutators import make_engine
from trotterbound.determinants import SectorSpec, enumerate_sector
from trotterbound.errors import (
    ExtinctionError,
    FitError,
    PopulationOverflowError,
)


def test_run_config_validation():
    with pytest.raises(ValueError):
        fciqmc.RunConfig(iterations=0, vary_threshold=10, seed=1)
    with pytest.raises(ValueError):
        fciqmc.RunConfig(iterations=10, vary_threshold=10, seed=1, xi=0.0)
    with pytest.raises(ValueError):
        fciqmc.RunConfig(iterations=10, vary_threshold=10, seed=1, dt=-1.0)
    with pytest.raises(ValueError):
        fciqmc.RunConfig(iterations=10, vary_threshold=10, seed=1, mode="x")


def test_shift_controller_updates():
    c = fciqmc.ShiftController(
        shift=-5.0, xi=1.0, dt=0.01, vary_threshold=100.0
    )
    # frozen until the threshold is reached
    assert c.update(50.0) == -5.0
    c.maybe_start_varying(120.0)
    assert c.varying
    # equal populations leave the shift unchanged
    assert c.update(120.0) == -5.0
    # growth by factor e with xi = 1 lowers the shift by 1/dt
    assert c.update(120.0 * np.e) == pytest.approx(-5.0 - 100.0)


def test_walker_store_population():
    store = fciqmc.WalkerStore(
        np.array([5, 3], dtype=np.uint64), np.array([2.0, -1.5])
    )
    assert store.population == 3.5
    assert store.n_occupied == 2
    assert list(store.dets) == [3, 5]  # kept sorted
    assert store.signed_sum() == 0.5
    assert fciqmc.WalkerStore().population == 0.0


def _dense_sign_free_matrix(h, dets, op):
    return -np.abs(dense_commutator(h, dets, op))


def test_one_step_unbiased(hubbard4):
    """Averaged stochastic step reproduces (1 - dt*(A - S))*C within 3 sigma."""
    sector = SectorSpec(2, 2)
    dets = enumerate_sector(4, sector)
    engine = make_engine("vtv", hubbard4)
    a_mat = _dense_sign_free_matrix(hubbard4, dets, "vtv")
    index = {d: a for a, d in enumerate(dets)}

    start_dets = np.array([dets[0], dets[7], dets[20]], dtype=np.uint64)
    start_coeffs = np.array([2.3, 1.0, 4.7])
    shift = -1.0
    dt = 1e-3
    controller = fciqmc.ShiftController(
        shift=shift, xi=0.05, dt=dt, vary_threshold=1e9
    )
    c0 = np.zeros(len(dets))
    for d, c in zip(start_dets, start_coeffs):
        c0[index[int(d)]] = c
    expected = c0 - dt * (a_mat - shift * np.eye(len(dets))) @ c0

    rng = np.random.Generator(np.random.Philox(42))
    n_rep = 20000
    acc = np.zeros(len(dets))
    acc2 = np.zeros(len(dets))
    for _ in range(n_rep):
        store = fciqmc.WalkerStore(start_dets.copy(), start_coeffs.copy())
        out, _ = fciqmc.step(store, engine, controller, rng)
        vec = np.zeros(len(dets))
        for d, c in zip(out.dets, out.coeffs):
            vec[index[int(d)]] = c
        acc += vec
        acc2 += vec * vec
    mean = acc / n_rep
    var = acc2 / n_rep - mean**2
    sigma = np.sqrt(np.maximum(var, 0.0) / n_rep)
    dev = np.abs(mean - expected)
    # 4 sigma per component (36 simultaneous comparisons), plus a global
    # chi-square check that keeps power against small systematic bias; the
    # 1e-9 slack absorbs float accumulation on deterministic components
    assert np.all(dev <= 4.0 * sigma + 1e-9)
    noisy = sigma > 0
    chi2 = np.sum((dev[noisy] / sigma[noisy]) ** 2)
    k = int(noisy.sum())
    assert chi2 <= k + 5.0 * np.sqrt(2.0 * k)
    assert np.all(dev[~noisy] <= 1e-9)


def test_sign_free_keeps_one_sign(hubbard4):
    sector = SectorSpec(2, 2)
    engine = make_engine("vtv", hubbard4)
    cfg = fciqmc.RunConfig(iterations=300, vary_threshold=500, seed=3)
    d0 = fciqmc.select_initial_state(engine, sector)
    controller = fciqmc.ShiftController(
        shift=0.0, xi=0.05, dt=fciqmc.estimate_dt(engine, d0),
        vary_threshold=500.0,
    )
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    store = fciqmc.WalkerStore(
        np.array([d0], dtype=np.uint64), np.array([10.0])
    )
    annihilated_total = 0.0
    for _ in range(200):
        store, info = fciqmc.step(store, engine, controller, rng)
        controller.maybe_start_varying(store.population)
        controller.update(store.population)
        annihilated_total += info["annihilated"]
        assert np.all(store.coeffs > 0)
    # no annihilation ever occurs in sign-free propagation
    assert annihilated_total == 0.0


def test_extinction_and_overflow(hubbard4):
    engine = make_engine("vtv", hubbard4)
    controller = fciqmc.ShiftController(
        shift=0.0, xi=0.05, dt=1e-3, vary_threshold=1e9
    )
    rng = np.random.Generator(np.random.Philox(0))
    with pytest.raises(ExtinctionError):
        fciqmc.step(fciqmc.WalkerStore(), engine, controller, rng)
    d0 = fciqmc.select_initial_state(engine, SectorSpec(2, 2))
    store = fciqmc.WalkerStore(np.array([d0], dtype=np.uint64), np.array([50.0]))
    with pytest.raises(PopulationOverflowError):
        fciqmc.step(store, engine, controller, rng, population_cap=10.0)


def test_mixed_estimate_constant_series():
    acc = fciqmc.EstimatorAccumulator()
    for it in range(100):
        acc.record(it, -1.0, 100.0, 10, 2.5 * (100.0 + it), 100.0 + it, 0.0)
    value, stderr = fciqmc.mixed_estimate(acc)
    assert value == pytest.approx(2.5, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        fciqmc.mixed_estimate(fciqmc.EstimatorAccumulator())


def test_run_deterministic_series(tmp_path, hubbard4):
    sector = SectorSpec(2, 2)
    engine = make_engine("vtv", hubbard4)
    paths = []
    for tag in ("a", "b"):
        path = tmp_path / f"series_{tag}.csv"
        cfg = fciqmc.RunConfig(
            iterations=300, vary_threshold=400, seed=12,
            series_path=str(path),
        )
        fciqmc.run(cfg, engine, sector)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_run_converges_small(hubbard4):
    """Shift and mixed estimates approach the sector abs-norm on 4 sites."""
    from trotterbound.exact_oracle import engine_norm

    sector = SectorSpec(2, 2)
    engine = make_engine("vtv", hubbard4)
    exact = engine_norm(engine, sector, absolute=True)
    cfg = fciqmc.RunConfig(iterations=3000, vary_threshold=2000, seed=5)
    rep = fciqmc.run(cfg, engine, sector)
    assert -rep.mixed_estimate == pytest.approx(
        exact, abs=3 * max(rep.mixed_stderr, 0.02 * exact)
    )
    assert -rep.shift_estimate == pytest.approx(
        exact, abs=3 * max(rep.shift_stderr, 0.02 * exact)
    )
    assert rep.vary_iteration is not None
    assert rep.config["dt"] > 0


def test_select_initial_state_scans_diagonal(benzene):
    """On a scannable sector the start state minimizes the propagated diagonal."""
    from trotterbound.exact_oracle import sector_basis

    engine = make_engine("vtt", benzene)
    sector = SectorSpec(3, 3)
    d0 = fciqmc.select_initial_state(engine, sector, sign_free=True)
    basis = sector_basis(engine, sector)
    diags = fciqmc._diagonals(engine, basis, True)
    assert diags[int(np.searchsorted(basis, np.uint64(d0)))] == diags.min()


def test_estimate_dt_positive(hubbard4):
    engine = make_engine("vtv", hubbard4)
    d0 = fciqmc.select_initial_state(engine, SectorSpec(2, 2))
    dt = fciqmc.estimate_dt(engine, d0)
    assert 0.0 < dt < 1.0


def test_extrapolation_synthetic_recovery():
    rng = np.random.default_rng(7)
    pops = np.array([500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0])
    x = 1.0 / pops
    sig = np.full_like(x, 0.002)
    y = 5.0 + 2.0 * x**0.7 + rng.normal(0, sig)
    a, b, c, a_err = fciqmc.extrapolate_population_bias(
        list(zip(pops, y, sig))
    )
    assert a == pytest.approx(5.0, abs=3 * a_err)
    assert b > 0 and 0.05 <= c <= 3.0


def test_extrapolation_constant_data():
    pts = [(100.0 * 2**k, 7.5, 0.1) for k in range(5)]
    a, b, c, a_err = fciqmc.extrapolate_population_bias(pts)
    assert a == 7.5 and b == 0.0


def test_extrapolation_degenerate():
    with pytest.raises(FitError):
        fciqmc.extrapolate_population_bias([(100.0, 1.0, 0.1)] * 3)
    with pytest.raises(FitError):
        fciqmc.extrapolate_population_bias(
            [(100.0, 1.0, 0.1), (100.0, 1.1, 0.1),
             (100.0, 0.9, 0.1), (100.0, 1.0, 0.1)]
        )


def test_plateau_detection():
    # exponential growth that stalls at iteration 2000
    pop = np.concatenate([
        10 * np.exp(0.002 * np.arange(2000)),
        np.full(2000, 10 * np.exp(4.0)),
    ])
    found = fciqmc._detect_plateau(pop)
    assert found is not None and 1400 <= found <= 2100
    assert fciqmc._detect_plateau(np.full(5000, 100.0)) is None
    assert fciqmc._detect_plateau(np.ones(100)) is None
