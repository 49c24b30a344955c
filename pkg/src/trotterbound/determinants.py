"""Bit-encoded Slater determinants and fermionic parity bookkeeping.

A determinant is a plain Python ``int`` used as a bitmask over 2N spin
orbitals, bit ``p`` set meaning spin orbital ``p`` is occupied.  Spin
orbitals are interleaved: spin orbital ``2*i`` is site ``i`` spin-up and
``2*i + 1`` is site ``i`` spin-down.  Python integers are arbitrary
precision, so systems beyond 64 spin orbitals are representable with the
same code path.

The fixed ordering convention is that a determinant with occupied
orbitals ``p1 < p2 < ... < pk`` represents ``a+_{p1} a+_{p2} ... a+_{pk}
|vac>``, from which all parity factors below follow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import CapacityError, ExcitationError

# Sector dimensions beyond this are refused by enumerate_sector; they would
# not fit in memory as an explicit list anyway.
MAX_SECTOR_DIM = 2**31 - 1


@dataclass(frozen=True)
class SectorSpec:
    """Electron counts per spin for a sector-restricted calculation."""

    n_up: int
    n_down: int

    def validate(self, n_spatial):
        if not (0 <= self.n_up <= n_spatial and 0 <= self.n_down <= n_spatial):
            raise ValueError(
                f"sector ({self.n_up},{self.n_down}) out of range for "
                f"{n_spatial} spatial orbitals"
            )

    @property
    def n_electrons(self):
        return self.n_up + self.n_down


def half_filling_sector(n_spatial):
    """Sector with N electrons on N spatial orbitals and s_z = 0."""
    if n_spatial % 2 != 0:
        raise ValueError("half-filling with s_z = 0 requires even N")
    return SectorSpec(n_spatial // 2, n_spatial // 2)


def sector_dimension(n_spatial, sector):
    return math.comb(n_spatial, sector.n_up) * math.comb(n_spatial, sector.n_down)


def enumerate_sector(n_spatial, sector):
    """All determinants of the sector, ascending by bitmask value."""
    sector.validate(n_spatial)
    dim = sector_dimension(n_spatial, sector)
    if dim > MAX_SECTOR_DIM:
        raise CapacityError(f"sector dimension {dim} exceeds {MAX_SECTOR_DIM}")
    up_masks = [
        sum(1 << (2 * i) for i in occ)
        for occ in itertools.combinations(range(n_spatial), sector.n_up)
    ]
    down_masks = [
        sum(1 << (2 * i + 1) for i in occ)
        for occ in itertools.combinations(range(n_spatial), sector.n_down)
    ]
    dets = [u | d for u in up_masks for d in down_masks]
    dets.sort()
    return dets


def occupied_list(d):
    """Ascending indices of set bits."""
    occ = []
    p = 0
    while d:
        if d & 1:
            occ.append(p)
        d >>= 1
        p += 1
    return occ


def popcount(d):
    return d.bit_count()


def parity_between(d, i, j):
    """(-1)**(number of occupied orbitals strictly between i and j)."""
    lo, hi = (i, j) if i < j else (j, i)
    between = d & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    return -1 if between.bit_count() & 1 else 1


def single_excite(d, orb_from, orb_to):
    """Apply a+_{to} a_{from}; return (new determinant, sign)."""
    if orb_from == orb_to:
        raise ExcitationError("from and to orbitals must differ")
    if not (d >> orb_from) & 1:
        raise ExcitationError(f"orbital {orb_from} is not occupied")
    if (d >> orb_to) & 1:
        raise ExcitationError(f"orbital {orb_to} is already occupied")
    return d ^ (1 << orb_from) | (1 << orb_to), parity_between(d, orb_from, orb_to)


def apply_operator_string(d, ops):
    """Apply a string of creation/annihilation operators to a determinant.

    ``ops`` is a sequence of ``(orbital, is_creation)`` pairs, applied
    right to left (rightmost operator acts first).  Returns ``(det, sign)``
    or ``(None, 0)`` if the string annihilates the state.
    """
    sign = 1
    for orb, creation in reversed(ops):
        bit = 1 << orb
        occupied = bool(d & bit)
        if creation == occupied:
            return None, 0
        if (d & (bit - 1)).bit_count() & 1:
            sign = -sign
        d ^= bit
    return d, sign


def spin_of(orbital):
    """0 for up, 1 for down (interleaved convention)."""
    return orbital & 1


def to_bitstring(d, n_spin_orbitals):
    """Render as a 0/1 string with orbital 0 leftmost."""
    return "".join("1" if (d >> p) & 1 else "0" for p in range(n_spin_orbitals))
