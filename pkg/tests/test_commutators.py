import numpy as np
import pytest

from conftest import dense_commutator
from trotterbound import hamiltonians as hm
from trotterbound.commutators import VtvEngine, VttEngine, make_engine
from trotterbound.determinants import (
    SectorSpec,
    enumerate_sector,
    half_filling_sector,
    occupied_list,
    spin_of,
)
from trotterbound.errors import CapacityError, ExcitationError, SectorError
from trotterbound.exact_oracle import build_sector_matrix


def engine_dense(engine, dets):
    index = {d: a for a, d in enumerate(dets)}
    mat = np.zeros((len(dets), len(dets)))
    for col, d in enumerate(dets):
        mat[col, col] = engine.diagonal(d)
        targets, vals = engine.row(d)
        for t, v in zip(targets, vals):
            mat[index[int(t)], col] += v
    return mat


SMALL_SYSTEMS = [
    ("hubbard_1d_4", hm.build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, True)),
    ("hubbard_1d_6", hm.build_extended_hubbard_1d(6, 1.0, 4.0, 2.0, True)),
    ("hexagonal_1x2", hm.build_extended_hubbard_hexagonal(1, 2, 1.0, 4.0, 2.0)),
    ("hexagonal_1x3", hm.build_extended_hubbard_hexagonal(1, 3, 1.0, 4.0, 2.0)),
    ("cuprate_2x2", hm.build_cuprate_square(2, 2, 1.0, 0.3, 0.2, 8.0)),
    ("cuprate_2x3", hm.build_cuprate_square(2, 3, 1.0, 0.3, 0.2, 8.0)),
    ("ppp_benzene", hm.build_ppp_acene(1)),
    ("ueg_2x2", hm.build_ueg_dual_plane_wave(2, 2, 10.0, 4)),
]


@pytest.mark.parametrize("label,h", SMALL_SYSTEMS, ids=[s[0] for s in SMALL_SYSTEMS])
@pytest.mark.parametrize("op", ["vtv", "vtt"])
def test_engine_matches_dense_commutator(label, h, op):
    """Engine rows reproduce the dense nested commutator on every family."""
    n = h.n_spatial
    sector = half_filling_sector(n) if n % 2 == 0 else SectorSpec(n // 2 + 1, n // 2)
    dets = enumerate_sector(n, sector)
    engine = make_engine(op, h)
    ref = dense_commutator(h, dets, op)
    got = engine_dense(engine, dets)
    assert np.abs(got - ref).max() < 1e-9


def test_vtv_diagonal_is_zero(hubbard4):
    engine = VtvEngine(hubbard4)
    for d in enumerate_sector(4, SectorSpec(2, 2))[:10]:
        assert engine.diagonal(d) == 0.0


def test_vtv_element_precondition(hubbard4):
    engine = VtvEngine(hubbard4)
    d = enumerate_sector(4, SectorSpec(2, 2))[0]
    occ = occupied_list(d)
    vac = [p for p in range(8) if p not in occ]
    with pytest.raises(ExcitationError):
        engine.element(d, vac[0], vac[1])
    with pytest.raises(ExcitationError):
        engine.element(d, occ[0], occ[1])


def test_vtt_sector_check(hubbard4):
    engine = VttEngine(hubbard4)
    d = enumerate_sector(4, SectorSpec(2, 2))[0]
    with pytest.raises(SectorError):
        engine.element(d, d | (1 << 7))
    # same electron count, different s_z
    d_other = enumerate_sector(4, SectorSpec(3, 1))[0]
    with pytest.raises(SectorError):
        engine.element(d, d_other)


def test_vtt_element_symmetry(hubbard6):
    engine = VttEngine(hubbard6)
    dets = enumerate_sector(6, SectorSpec(3, 3))
    rng = np.random.default_rng(4)
    for _ in range(100):
        a, b = rng.integers(0, len(dets), 2)
        assert engine.element(dets[a], dets[b]) == pytest.approx(
            engine.element(dets[b], dets[a]), abs=1e-12
        )


def test_element_abs(hubbard4):
    engine = VtvEngine(hubbard4)
    d = enumerate_sector(4, SectorSpec(2, 2))[5]
    occ = occupied_list(d)
    i = occ[0]
    vac = [p for p in range(8) if p not in occ and spin_of(p) == spin_of(i)]
    assert engine.element_abs(d, i, vac[0]) == abs(engine.element(d, i, vac[0]))


def test_row_capacity_bound(hubbard6, benzene):
    for h, op in [(hubbard6, "vtv"), (benzene, "vtt")]:
        engine = make_engine(op, h)
        for d in enumerate_sector(h.n_spatial, half_filling_sector(h.n_spatial))[:5]:
            targets, _ = engine.row(d)
            assert len(targets) <= engine.max_row_entries(d)


def test_capacity_error():
    h = hm.build_extended_hubbard_1d(33, 1.0, 4.0, 2.0)  # 66 spin orbitals
    with pytest.raises(CapacityError):
        VtvEngine(h)


def enumerate_vtv_pgen(engine, d):
    """All structurally possible sampler draws with their probabilities."""
    occ = occupied_list(d)
    total = 0.0
    for i in occ:
        vac = [
            p for p in range(spin_of(i), engine.n_so, 2) if not (d >> p) & 1
        ]
        for _ in vac:
            total += 1.0 / (len(occ) * len(vac))
    return total


def enumerate_vtt_pgen(engine, d):
    occ = occupied_list(d)
    n_occ = len(occ)
    vac_up = [p for p in range(0, engine.n_so, 2) if not (d >> p) & 1]
    vac_dn = [p for p in range(1, engine.n_so, 2) if not (d >> p) & 1]
    total = 0.0
    for i in occ:
        vac = vac_up if spin_of(i) == 0 else vac_dn
        for _ in vac:
            total += engine.p_single / (n_occ * len(vac))
    n_pairs = n_occ * (n_occ - 1) // 2
    for a in range(n_occ):
        for b in range(a + 1, n_occ):
            i, k = occ[a], occ[b]
            if spin_of(i) == spin_of(k):
                vac = vac_up if spin_of(i) == 0 else vac_dn
                n_tgt = len(vac) * (len(vac) - 1) // 2
                p2 = 1.0 / n_tgt if n_tgt else 0.0
            else:
                n_tgt = len(vac_up) * len(vac_dn)
                p2 = 1.0 / n_tgt if n_tgt else 0.0
            total += n_tgt * (1.0 - engine.p_single) * p2 / n_pairs
    return total


@pytest.mark.parametrize("op", ["vtv", "vtt"])
def test_sampler_normalization(hubbard6, op):
    """Generation probabilities sum to one over all draws (6-site system)."""
    engine = make_engine(op, hubbard6)
    dets = enumerate_sector(6, SectorSpec(3, 3))
    enum = enumerate_vtv_pgen if op == "vtv" else enumerate_vtt_pgen
    for d in dets[:: len(dets) // 7]:
        assert enum(engine, d) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("op", ["vtv", "vtt"])
def test_sampler_pgen_matches_element(hubbard6, op):
    """Every drawn sample reports a target reachable with the stated element."""
    engine = make_engine(op, hubbard6)
    d = enumerate_sector(6, SectorSpec(3, 3))[100]
    rng = np.random.default_rng(9)
    seen = 0
    for _ in range(300):
        s = engine.sample(d, rng)
        if s is None:
            continue
        seen += 1
        if op == "vtv":
            diff = d ^ s.target
            i = (diff & d).bit_length() - 1
            j = (diff & s.target).bit_length() - 1
            assert s.element == engine.element(d, i, j)
        else:
            assert s.element == engine.element(d, s.target)
        assert s.element_abs == abs(s.element)
        assert 0.0 < s.p_gen <= 1.0
    assert seen > 0


@pytest.mark.parametrize("op", ["vtv", "vtt"])
def test_build_sector_matrix_symmetric_and_matches(hubbard6, op):
    sector = SectorSpec(3, 3)
    dets = enumerate_sector(6, sector)
    engine = make_engine(op, hubbard6)
    sm = build_sector_matrix(engine, sector)
    assert np.abs((sm.matrix - sm.matrix.T)).max() < 1e-12
    ref = dense_commutator(hubbard6, dets, op)
    assert np.abs(sm.to_dense() - ref).max() < 1e-9
    sm_abs = build_sector_matrix(engine, sector, absolute=True)
    assert np.abs(sm_abs.to_dense() - np.abs(ref)).max() < 1e-9
