import numpy as np
import pytest

from trotterbound import hamiltonians as hm


@pytest.fixture(scope="session")
def hubbard4():
    return hm.build_extended_hubbard_1d(4, 1.0, 4.0, 2.0, periodic=True)


@pytest.fixture(scope="session")
def hubbard6():
    return hm.build_extended_hubbard_1d(6, 1.0, 4.0, 2.0, periodic=True)


@pytest.fixture(scope="session")
def benzene():
    return hm.build_ppp_acene(1)


@pytest.fixture(scope="session")
def ueg2x2():
    return hm.build_ueg_dual_plane_wave(2, 2, 10.0, 4)


def dense_sector_operators(h, dets):
    """Dense kinetic matrix and interaction diagonal over a determinant list.

    Independent reference implementation used as the oracle for engine
    and commutator checks: T is applied excitation-by-excitation with
    explicit parity counting, V is summed pairwise over occupations.
    """
    n_so = h.n_spin_orbitals
    index = {d: a for a, d in enumerate(dets)}
    t_mat = np.zeros((len(dets), len(dets)))
    v_diag = np.zeros(len(dets))
    for col, d in enumerate(dets):
        occ = [p for p in range(n_so) if (d >> p) & 1]
        t_mat[col, col] = sum(h.hopping[p, p] for p in occ)
        v_diag[col] = sum(
            h.coulomb[p, q] for a, p in enumerate(occ) for q in occ[a + 1:]
        )
        for i in occ:
            for j in range(n_so):
                if j == i or (d >> j) & 1 or h.hopping[i, j] == 0.0:
                    continue
                lo, hi = min(i, j), max(i, j)
                mask = ((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1)
                sign = -1.0 if bin(d & mask).count("1") % 2 else 1.0
                row = index[d ^ (1 << i) | (1 << j)]
                t_mat[row, col] += sign * h.hopping[i, j]
    return t_mat, v_diag


def dense_commutator(h, dets, which):
    """Dense [[V,T],T] or [[V,T],V] over a determinant list."""
    t_mat, v_diag = dense_sector_operators(h, dets)
    v_mat = np.diag(v_diag)
    c1 = v_mat @ t_mat - t_mat @ v_mat
    outer = t_mat if which == "vtt" else v_mat
    return c1 @ outer - outer @ c1
