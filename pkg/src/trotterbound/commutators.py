"""Matrix-element engines and excitation samplers for the two commutators.

``VtvEngine`` evaluates [[V,T],V] through its closed form, which couples
determinants one single excitation apart and has an identically zero
diagonal.  ``VttEngine`` evaluates [[V,T],T], which is at most two-body,
through Slater-Condon rules on tensors extracted from the symbolic
normal-ordered commutator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, fermion_ops
from .determinants import apply_operator_string, occupied_list, popcount, spin_of
from .errors import CapacityError, ExcitationError, SectorError

# Default bias of the VTT sampler toward single excitations, clamped so
# neither excitation class can starve.
P_SINGLE_MIN = 0.05
P_SINGLE_MAX = 0.95


@dataclass(frozen=True)
class ExcitationSample:
    """One drawn spawn candidate with its exact generation probability."""

    target: int
    element: float
    element_abs: float
    p_gen: float


def _check_kernel_capacity(n_so):
    if n_so > 64:
        raise CapacityError(
            f"{n_so} spin orbitals exceed the 64-bit determinant fast path"
        )


def _check_single(d, orb_from, orb_to):
    if not (d >> orb_from) & 1:
        raise ExcitationError(f"orbital {orb_from} is not occupied")
    if (d >> orb_to) & 1:
        raise ExcitationError(f"orbital {orb_to} is already occupied")


class VtvEngine:
    """Closed-form engine for [[V,T],V]."""

    operator_name = "vtv"

    def __init__(self, hamiltonian):
        _check_kernel_capacity(hamiltonian.n_spin_orbitals)
        self.hamiltonian = hamiltonian
        self.n_so = hamiltonian.n_spin_orbitals
        self.hopping = np.ascontiguousarray(hamiltonian.hopping)
        self.coulomb = np.ascontiguousarray(hamiltonian.coulomb)
        # hopping pairs grouped by spin, for reporting and sampling checks
        self.hopping_pairs = [
            (i, j)
            for i in range(self.n_so)
            for j in range(i + 1, self.n_so)
            if self.hopping[i, j] != 0.0 and spin_of(i) == spin_of(j)
        ]

    def element(self, d, orb_from, orb_to):
        """Signed <D_from^to|[[V,T],V]|D>; zero when T_from,to vanishes."""
        _check_single(d, orb_from, orb_to)
        occ = np.array(occupied_list(d), dtype=np.int64)
        return _kernels.vtv_element(
            np.uint64(d), orb_from, orb_to, self.hopping, self.coulomb,
            occ, len(occ),
        )

    def element_abs(self, d, orb_from, orb_to):
        return abs(self.element(d, orb_from, orb_to))

    def diagonal(self, d):
        return 0.0

    def row(self, d):
        """Off-diagonal row as (targets, signed values)."""
        occ = occupied_list(d)
        cap = max(1, len(occ) * self.n_so)
        out_d = np.empty(cap, dtype=np.uint64)
        out_v = np.empty(cap)
        n = _kernels.vtv_row(
            np.uint64(d), self.hopping, self.coulomb, self.n_so, out_d, out_v
        )
        return out_d[:n].copy(), out_v[:n].copy()

    def max_row_entries(self, d):
        occ = occupied_list(d)
        n_vac_up = self.n_so // 2 - sum(1 for p in occ if spin_of(p) == 0)
        n_vac_dn = self.n_so // 2 - sum(1 for p in occ if spin_of(p) == 1)
        n_up = sum(1 for p in occ if spin_of(p) == 0)
        return max(1, n_up * n_vac_up + (len(occ) - n_up) * n_vac_dn)

    def sample(self, d, rng):
        """Uniform occupied -> uniform same-spin vacant; None on a null draw."""
        occ = occupied_list(d)
        i = occ[min(int(rng.random() * len(occ)), len(occ) - 1)]
        spin = spin_of(i)
        vac = [p for p in range(spin, self.n_so, 2) if not (d >> p) & 1]
        if not vac:
            return None
        j = vac[min(int(rng.random() * len(vac)), len(vac) - 1)]
        el = self.element(d, i, j)
        if el == 0.0:
            return None
        return ExcitationSample(
            target=d ^ (1 << i) | (1 << j),
            element=el,
            element_abs=abs(el),
            p_gen=1.0 / (len(occ) * len(vac)),
        )


class VttEngine:
    """Slater-Condon engine for the two-body commutator [[V,T],T]."""

    operator_name = "vtt"

    def __init__(self, hamiltonian, operator=None, self_check=True):
        _check_kernel_capacity(hamiltonian.n_spin_orbitals)
        self.hamiltonian = hamiltonian
        self.n_so = hamiltonian.n_spin_orbitals
        if operator is None:
            t_op, v_op = fermion_ops.from_hamiltonian(hamiltonian)
            operator = fermion_ops.commutator(
                fermion_ops.commutator(v_op, t_op), t_op
            )
        self.operator = operator
        self.scalar, self.h1, h2 = fermion_ops.to_one_two_body_tensors(
            operator, self.n_so
        )
        self.h2 = h2
        self.antisym = fermion_ops.antisymmetrized_two_body(h2)
        self.p_single = self._default_p_single()
        if self_check:
            self._verify_tensors()

    def _default_p_single(self):
        one_body = float(np.abs(self.h1).sum())
        two_body = float(np.abs(self.h2).sum())
        total = one_body + two_body
        if total == 0.0:
            return 0.5
        return min(P_SINGLE_MAX, max(P_SINGLE_MIN, one_body / total))

    def _verify_tensors(self, n_samples=8, seed=901):
        """Compare kernel rows against direct symbolic application."""
        rng = np.random.default_rng(seed)
        n_elec = max(2, self.n_so // 2)
        for _ in range(n_samples):
            occ = rng.choice(self.n_so, size=n_elec, replace=False)
            d = int(sum(1 << int(p) for p in occ))
            ref = {}
            for mono, coeff in self.operator.terms.items():
                d2, sign = apply_operator_string(d, mono)
                if d2 is not None:
                    ref[d2] = ref.get(d2, 0.0) + sign * coeff
            targets, vals = self.row(d)
            got = {int(t): v for t, v in zip(targets, vals)}
            got[d] = got.get(d, 0.0) + self.diagonal(d)
            keys = set(ref) | set(got)
            for key in keys:
                if abs(ref.get(key, 0.0) - got.get(key, 0.0)) > 1e-9:
                    raise AssertionError(
                        "tensor representation disagrees with symbolic operator"
                    )

    def _require_same_sector(self, d, d2):
        if popcount(d) != popcount(d2):
            raise SectorError("determinants differ in electron count")
        up = 0x5555555555555555555555555555555555555555
        if popcount(d & up) != popcount(d2 & up):
            raise SectorError("determinants differ in spin projection")

    def element(self, d, d2):
        """Signed <d2|[[V,T],T]|d>; zero beyond double excitations."""
        self._require_same_sector(d, d2)
        diff = d ^ d2
        rank = popcount(diff) // 2
        occ = np.array(occupied_list(d), dtype=np.int64)
        if rank == 0:
            return _kernels.vtt_diag(
                np.uint64(d), self.scalar, self.h1, self.antisym, occ, len(occ)
            )
        if rank == 1:
            removed = occupied_list(diff & d)
            added = occupied_list(diff & d2)
            return _kernels.vtt_single(
                np.uint64(d), removed[0], added[0], self.h1, self.antisym,
                occ, len(occ),
            )
        if rank == 2:
            (i, k) = occupied_list(diff & d)
            (j, l) = occupied_list(diff & d2)
            if spin_of(j) != spin_of(i):
                j, l = l, j
            return _kernels.vtt_double(np.uint64(d), i, k, j, l, self.antisym)
        return 0.0

    def element_abs(self, d, d2):
        return abs(self.element(d, d2))

    def diagonal(self, d):
        occ = np.array(occupied_list(d), dtype=np.int64)
        return _kernels.vtt_diag(
            np.uint64(d), self.scalar, self.h1, self.antisym, occ, len(occ)
        )

    def max_row_entries(self, d):
        occ = occupied_list(d)
        n_up = sum(1 for p in occ if spin_of(p) == 0)
        n_dn = len(occ) - n_up
        v_up = self.n_so // 2 - n_up
        v_dn = self.n_so // 2 - n_dn
        singles = n_up * v_up + n_dn * v_dn
        same = n_up * (n_up - 1) // 2 * (v_up * (v_up - 1) // 2)
        same += n_dn * (n_dn - 1) // 2 * (v_dn * (v_dn - 1) // 2)
        cross = n_up * n_dn * v_up * v_dn
        return max(1, 1 + singles + same + cross)

    def row(self, d):
        """Off-diagonal row as (targets, signed values)."""
        cap = self.max_row_entries(d)
        out_d = np.empty(cap, dtype=np.uint64)
        out_v = np.empty(cap)
        n = _kernels.vtt_row(
            np.uint64(d), self.h1, self.antisym, self.n_so, out_d, out_v
        )
        return out_d[:n].copy(), out_v[:n].copy()

    def sample(self, d, rng):
        """Single/double split sampler mirroring the spawning kernel."""
        occ = occupied_list(d)
        n_occ = len(occ)
        vac_up = [p for p in range(0, self.n_so, 2) if not (d >> p) & 1]
        vac_dn = [p for p in range(1, self.n_so, 2) if not (d >> p) & 1]
        if rng.random() < self.p_single:
            i = occ[min(int(rng.random() * n_occ), n_occ - 1)]
            vac = vac_up if spin_of(i) == 0 else vac_dn
            if not vac:
                return None
            j = vac[min(int(rng.random() * len(vac)), len(vac) - 1)]
            target = d ^ (1 << i) | (1 << j)
            p_gen = self.p_single / (n_occ * len(vac))
        else:
            n_pairs = n_occ * (n_occ - 1) // 2
            if n_pairs == 0:
                return None
            pick = min(int(rng.random() * n_pairs), n_pairs - 1)
            a_idx = 0
            span = n_occ - 1
            while pick >= span:
                pick -= span
                a_idx += 1
                span -= 1
            i, k = occ[a_idx], occ[a_idx + 1 + pick]
            if spin_of(i) == spin_of(k):
                vac = vac_up if spin_of(i) == 0 else vac_dn
                nvp = len(vac) * (len(vac) - 1) // 2
                if nvp == 0:
                    return None
                vp = min(int(rng.random() * nvp), nvp - 1)
                c_idx = 0
                span = len(vac) - 1
                while vp >= span:
                    vp -= span
                    c_idx += 1
                    span -= 1
                j, l = vac[c_idx], vac[c_idx + 1 + vp]
                p2 = 1.0 / nvp
            else:
                if not vac_up or not vac_dn:
                    return None
                j = vac_up[min(int(rng.random() * len(vac_up)), len(vac_up) - 1)]
                l = vac_dn[min(int(rng.random() * len(vac_dn)), len(vac_dn) - 1)]
                if spin_of(i) != 0:
                    i, k = k, i
                p2 = 1.0 / (len(vac_up) * len(vac_dn))
            target = d ^ (1 << i) ^ (1 << k) | (1 << j) | (1 << l)
            p_gen = (1.0 - self.p_single) * p2 / n_pairs
        el = self.element(d, target)
        if el == 0.0:
            return None
        return ExcitationSample(
            target=target, element=el, element_abs=abs(el), p_gen=p_gen
        )


def make_engine(operator, hamiltonian):
    if operator == "vtv":
        return VtvEngine(hamiltonian)
    if operator == "vtt":
        return VttEngine(hamiltonian)
    raise ValueError(f"unknown operator {operator!r}")
