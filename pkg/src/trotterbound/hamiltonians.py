"""Builders for diagonal-Coulomb Hamiltonians.

All builders produce spin-orbital matrices with interleaved ordering:
spin orbital ``2*i`` is site ``i`` spin-up, ``2*i + 1`` is site ``i``
spin-down.  The kinetic matrix couples equal spins only; the Coulomb
matrix is symmetric with zero diagonal and holds the coefficient of
``n_p n_q`` on its ``(p, q)`` and ``(q, p)`` entries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGridError, InvalidLatticeError

PPP_HOPPING_EV = 2.4
PPP_ONSITE_EV = 11.13
PPP_ALPHA_INV_ANGSTROM2 = 0.612
PPP_BOND_ANGSTROM = 1.4


@dataclass
class DiagonalCoulombHamiltonian:
    """H = sum_ij T_ij a+_i a_j + sum_{i<j} V_ij n_i n_j over spin orbitals."""

    n_spatial: int
    hopping: np.ndarray
    coulomb: np.ndarray
    units_label: str = "dimensionless"

    def __post_init__(self):
        self.hopping = np.asarray(self.hopping, dtype=float)
        self.coulomb = np.asarray(self.coulomb, dtype=float)
        n_so = 2 * self.n_spatial
        if self.hopping.shape != (n_so, n_so) or self.coulomb.shape != (n_so, n_so):
            raise ValueError("hopping/coulomb must be 2N x 2N over spin orbitals")
        if not np.allclose(self.hopping, self.hopping.T, atol=1e-12):
            raise ValueError("hopping matrix must be symmetric")
        if not np.allclose(self.coulomb, self.coulomb.T, atol=1e-12):
            raise ValueError("coulomb matrix must be symmetric")
        if np.any(np.abs(np.diag(self.coulomb)) > 1e-12):
            raise ValueError("coulomb matrix must have zero diagonal")
        spin = np.arange(n_so) % 2
        cross = spin[:, None] != spin[None, :]
        if np.any(np.abs(self.hopping[cross]) > 1e-12):
            raise ValueError("hopping must not couple opposite spins")

    @property
    def n_spin_orbitals(self):
        return 2 * self.n_spatial

    def to_json_dict(self):
        return {
            "n_spatial": self.n_spatial,
            "units": self.units_label,
            "hopping": self.hopping.ravel().tolist(),
            "coulomb": self.coulomb.ravel().tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc):
        n = int(doc["n_spatial"])
        n_so = 2 * n
        return cls(
            n_spatial=n,
            hopping=np.array(doc["hopping"], dtype=float).reshape(n_so, n_so),
            coulomb=np.array(doc["coulomb"], dtype=float).reshape(n_so, n_so),
            units_label=doc.get("units", "dimensionless"),
        )


def _empty(n_sites):
    n_so = 2 * n_sites
    return np.zeros((n_so, n_so)), np.zeros((n_so, n_so))


def _add_hop(T, i, j, t):
    for s in (0, 1):
        T[2 * i + s, 2 * j + s] += t
        T[2 * j + s, 2 * i + s] += t


def _add_onsite(V, i, u):
    V[2 * i, 2 * i + 1] += u
    V[2 * i + 1, 2 * i] += u


def _add_intersite(V, i, j, v):
    # density-density between all four spin pairs of two distinct sites
    for s in (0, 1):
        for sp in (0, 1):
            V[2 * i + s, 2 * j + sp] += v
            V[2 * j + sp, 2 * i + s] += v


def build_extended_hubbard_1d(n_sites, tau, u, v, periodic=False):
    """Extended Hubbard chain: NN hopping, on-site U, NN density-density V."""
    if n_sites < 2:
        raise InvalidLatticeError("extended Hubbard chain needs at least 2 sites")
    T, V = _empty(n_sites)
    bonds = [(i, i + 1) for i in range(n_sites - 1)]
    if periodic and n_sites > 2:
        bonds.append((n_sites - 1, 0))
    for i, j in bonds:
        _add_hop(T, i, j, -tau)
        _add_intersite(V, i, j, v)
    for i in range(n_sites):
        _add_onsite(V, i, u)
    return DiagonalCoulombHamiltonian(n_sites, T, V)


def honeycomb_bonds(cells_x, cells_y):
    """Edges of a periodic honeycomb lattice with 2-site unit cells.

    Site index is ``2*(x*cells_y + y) + s`` with sublattice ``s`` in {0, 1}.
    Each sublattice-0 site bonds to three sublattice-1 sites; on very small
    clusters periodic wrapping can produce repeated pairs, which are
    returned with multiplicity.
    """
    bonds = []
    for x in range(cells_x):
        for y in range(cells_y):
            a = 2 * (x * cells_y + y)
            for dx, dy in ((0, 0), (-1, 0), (0, -1)):
                bx, by = (x + dx) % cells_x, (y + dy) % cells_y
                bonds.append((a, 2 * (bx * cells_y + by) + 1))
    return bonds


def build_extended_hubbard_hexagonal(cells_x, cells_y, tau, u, v):
    """Extended Hubbard model on a periodic honeycomb lattice."""
    if cells_x < 1 or cells_y < 1:
        raise InvalidLatticeError("honeycomb lattice needs at least one unit cell")
    n_sites = 2 * cells_x * cells_y
    T, V = _empty(n_sites)
    for i, j in honeycomb_bonds(cells_x, cells_y):
        _add_hop(T, i, j, -tau)
        _add_intersite(V, i, j, v)
    for i in range(n_sites):
        _add_onsite(V, i, u)
    return DiagonalCoulombHamiltonian(n_sites, T, V)


def build_cuprate_square(len_x, len_y, tau, tau_p, tau_pp, u, periodic=False):
    """Square-lattice model with 1st/2nd/3rd neighbor hopping and on-site U."""
    if len_x < 2 or len_y < 2:
        raise InvalidLatticeError("square lattice needs at least 2x2 sites")
    n_sites = len_x * len_y
    T, V = _empty(n_sites)
    shells = [
        (-tau, [(1, 0), (0, 1)]),
        (-tau_p, [(1, 1), (1, -1)]),
        (-tau_pp, [(2, 0), (0, 2)]),
    ]
    for x in range(len_x):
        for y in range(len_y):
            i = x * len_y + y
            for t, deltas in shells:
                if t == 0:
                    continue
                for dx, dy in deltas:
                    nx, ny = x + dx, y + dy
                    if periodic:
                        nx, ny = nx % len_x, ny % len_y
                    elif not (0 <= nx < len_x and 0 <= ny < len_y):
                        continue
                    j = nx * len_y + ny
                    if j == i:
                        # periodic wrap onto the same site: diagonal hopping
                        for s in (0, 1):
                            T[2 * i + s, 2 * i + s] += 2 * t
                        continue
                    _add_hop(T, i, j, t)
    for i in range(n_sites):
        _add_onsite(V, i, u)
    return DiagonalCoulombHamiltonian(n_sites, T, V)


def acene_coordinates(n_rings):
    """Carbon positions of a linear acene built from fused regular hexagons."""
    d = PPP_BOND_ANGSTROM
    pts = []
    for k in range(n_rings + 1):
        x = np.sqrt(3.0) * d * k
        pts.append((x, d / 2))
        pts.append((x, -d / 2))
    for k in range(n_rings):
        x = np.sqrt(3.0) * d * (k + 0.5)
        pts.append((x, d))
        pts.append((x, -d))
    return np.array(pts)


def build_ppp_acene(n_rings):
    """PPP model for a linear acene with N = 4*n_rings + 2 carbons."""
    if n_rings < 1:
        raise InvalidLatticeError("acene needs at least one ring")
    pts = acene_coordinates(n_rings)
    n_sites = len(pts)
    d = PPP_BOND_ANGSTROM
    T, V = _empty(n_sites)
    for i in range(n_sites):
        _add_onsite(V, i, PPP_ONSITE_EV)
        for j in range(i + 1, n_sites):
            r = float(np.linalg.norm(pts[i] - pts[j]))
            if abs(r - d) < 1e-8:
                _add_hop(T, i, j, -PPP_HOPPING_EV)
            vij = PPP_ONSITE_EV / np.sqrt(1.0 + PPP_ALPHA_INV_ANGSTROM2 * r * r)
            _add_intersite(V, i, j, vij)
    return DiagonalCoulombHamiltonian(n_sites, T, V, units_label="eV")


def ueg_spatial_matrices(dim, grid_side, r_s, n_electrons):
    """Spatial-orbital kinetic and Coulomb matrices of the dual plane wave UEG.

    The cell size follows the Wigner-Seitz relation: area pi*r_s^2 per
    electron in 2D, volume (4/3)*pi*r_s^3 per electron in 3D.  Matrix
    elements depend only on the coordinate difference, so they are
    computed once per grid offset.  Hartree units.
    """
    if grid_side < 2 or grid_side % 2 != 0:
        raise InvalidGridError("grid side must be even and >= 2")
    if r_s <= 0 or n_electrons < 1:
        raise InvalidGridError("need r_s > 0 and at least one electron")
    n = grid_side**dim
    if dim == 2:
        omega = n_electrons * np.pi * r_s**2
    elif dim == 3:
        omega = n_electrons * (4.0 / 3.0) * np.pi * r_s**3
    else:
        raise InvalidGridError("dim must be 2 or 3")
    length = omega ** (1.0 / dim)

    coords = np.array(list(itertools.product(range(grid_side), repeat=dim)))
    nus = np.array(
        list(itertools.product(range(-grid_side // 2, grid_side // 2), repeat=dim))
    )
    kvecs = (2.0 * np.pi / length) * nus
    k2 = np.einsum("nd,nd->n", kvecs, kvecs)
    nonzero = k2 > 0

    # one value per coordinate offset (periodic in the grid index)
    offsets = np.array(list(itertools.product(range(grid_side), repeat=dim)))
    dr = (length / grid_side) * offsets
    phase = dr @ kvecs.T
    cos = np.cos(phase)
    t_of_offset = cos @ k2 / (2.0 * n)
    v_of_offset = cos[:, nonzero] @ (4.0 * np.pi / (omega * k2[nonzero]))

    # map pairwise coordinate differences to offset indices
    diff = coords[:, None, :] - coords[None, :, :]
    diff %= grid_side
    strides = grid_side ** np.arange(dim - 1, -1, -1)
    offset_index = diff @ strides
    return t_of_offset[offset_index], v_of_offset[offset_index], omega


def build_ueg_dual_plane_wave(dim, grid_side, r_s, n_electrons):
    """Uniform electron gas on a dual plane wave grid (2D or 3D), Hartree units."""
    t_spatial, v_spatial, _ = ueg_spatial_matrices(dim, grid_side, r_s, n_electrons)
    n = grid_side**dim
    n_so = 2 * n
    T = np.zeros((n_so, n_so))
    V = np.zeros((n_so, n_so))
    for s in (0, 1):
        T[s::2, s::2] = t_spatial
        for sp in (0, 1):
            V[s::2, sp::2] = v_spatial
    np.fill_diagonal(V, 0.0)
    return DiagonalCoulombHamiltonian(n, T, V, units_label="Ha")


BUILDERS = {
    "extended_hubbard_1d": build_extended_hubbard_1d,
    "extended_hubbard_hexagonal": build_extended_hubbard_hexagonal,
    "cuprate_square": build_cuprate_square,
    "ppp_acene": build_ppp_acene,
    "ueg_dual_plane_wave": build_ueg_dual_plane_wave,
}
