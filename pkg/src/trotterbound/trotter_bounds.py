"""Assembly of Trotter-error bounds and step-count estimates.

Combines commutator norms (exact, Monte Carlo, or L1-based) into the
second-order error prefactor W, converts W into Trotter step counts, and
provides the cheaper triangle-inequality alternatives used for
comparison: the fermionic L1 bound, the per-site tighter triangle bound
for on-site-interaction lattice models, and induced 1-norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import fermion_ops
from .errors import ApplicabilityError, CapacityError

# Full-Fock-space cluster norms become impractical beyond this support.
TRIANGLE_SUPPORT_LIMIT = 16


@dataclass(frozen=True)
class NormInputs:
    """Commutator norms feeding the error prefactor, with provenance.

    Provenance is one of "exact", "mc_abs" (with stderr), or "l1".
    """

    norm_vtt: float
    norm_vtv: float
    vtt_source: str = "exact"
    vtv_source: str = "exact"
    vtt_stderr: float = 0.0
    vtv_stderr: float = 0.0

    def __post_init__(self):
        if self.norm_vtt < 0 or self.norm_vtv < 0:
            raise ValueError("norms must be non-negative")


def trotter_error_norm(inputs, ordering="VTV"):
    """Second-order error prefactor W for the chosen operator splitting.

    The splitting with V on the outside weighs [[V,T],T] by 1/12 and
    [[V,T],V] by 1/24; putting T outside swaps the two coefficients.
    """
    ordering = ordering.upper()
    if ordering == "VTV":
        return inputs.norm_vtt / 12.0 + inputs.norm_vtv / 24.0
    if ordering == "TVT":
        return inputs.norm_vtt / 24.0 + inputs.norm_vtv / 12.0
    raise ValueError("ordering must be VTV or TVT")


def trotter_steps(w, t, epsilon):
    """Steps r with r * W * (t/r)^3 <= epsilon, i.e. r = ceil(sqrt(W t^3/eps))."""
    if w < 0 or t <= 0 or epsilon <= 0:
        raise ValueError("need w >= 0, t > 0, epsilon > 0")
    return max(1, math.ceil(math.sqrt(w * t**3 / epsilon)))


def l1_bound(commutator_op):
    """Sum of absolute coefficients in the fermionic monomial expansion."""
    return commutator_op.l1_norm()


def _support_fock_norm(op):
    """Spectral norm of an operator over the full Fock space of its support.

    Particle number is conserved per spin species, so the Fock matrix is
    block diagonal over (occupied-up, occupied-down) subsets of the
    support orbitals; each block is diagonalized densely.
    """
    support = op.support()
    if len(support) > TRIANGLE_SUPPORT_LIMIT:
        raise CapacityError(
            f"cluster support of {len(support)} spin orbitals exceeds "
            f"{TRIANGLE_SUPPORT_LIMIT}"
        )
    up = [p for p in support if p % 2 == 0]
    dn = [p for p in support if p % 2 == 1]
    best = 0.0
    for n_up in range(len(up) + 1):
        for n_dn in range(len(dn) + 1):
            dets = []
            for occ_up in combinations(up, n_up):
                base = sum(1 << p for p in occ_up)
                for occ_dn in combinations(dn, n_dn):
                    dets.append(base + sum(1 << p for p in occ_dn))
            mat = op.sector_matrix(dets)
            if mat.size:
                w = np.linalg.eigvalsh(mat)
                best = max(best, abs(w[0]), abs(w[-1]))
    return best


def _onsite_u(h):
    """Common on-site interaction strength; error if V has off-site terms."""
    n = h.n_spatial
    mask = np.ones_like(h.coulomb, dtype=bool)
    u_vals = []
    for i in range(n):
        u_vals.append(h.coulomb[2 * i, 2 * i + 1])
        mask[2 * i, 2 * i + 1] = mask[2 * i + 1, 2 * i] = False
    if np.any(np.abs(h.coulomb[mask]) > 1e-12):
        raise ApplicabilityError(
            "triangle bound requires on-site interactions only"
        )
    return u_vals


def tighter_triangle_bound(h, which="VTT"):
    """Per-site triangle bound |U| * sum_i ||[[n_i_up n_i_dn, T], X]||.

    Applicable to models whose interaction is purely on-site; X is the
    full kinetic operator for the VTT commutator or the full interaction
    operator for VTV.  Each local commutator acts on a bounded cluster of
    orbitals and is diagonalized exactly on that cluster's Fock space.
    """
    which = which.upper()
    if which not in ("VTT", "VTV"):
        raise ValueError("which must be VTT or VTV")
    u_vals = _onsite_u(h)
    t_op, v_op = fermion_ops.from_hamiltonian(h)
    outer = t_op if which == "VTT" else v_op
    total = 0.0
    for i in range(h.n_spatial):
        pair = fermion_ops.number_pair_operator(2 * i, 2 * i + 1)
        local = fermion_ops.commutator(
            fermion_ops.commutator(pair, t_op), outer
        )
        if local.terms:
            total += abs(u_vals[i]) * _support_fock_norm(local)
    return total


def induced_one_norm(m):
    """max_i sum_j |m_ij|."""
    m = np.asarray(m, dtype=float)
    return float(np.abs(m).sum(axis=1).max())


def restricted_induced_one_norm(m, eta):
    """max_i (sum of the eta largest |m_ij| in row i)."""
    m = np.asarray(m, dtype=float)
    if not 0 <= eta <= m.shape[1]:
        raise ValueError("eta must lie in [0, dimension]")
    if eta == 0:
        return 0.0
    rows = np.sort(np.abs(m), axis=1)[:, -eta:]
    return float(rows.sum(axis=1).max())


def loglog_slope(sizes, values):
    """OLS slope +/- stderr of log(values) against log(sizes)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    A = np.vstack([np.ones_like(x), x]).T
    coef, residual, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = len(x) - 2
    s2 = float(residual[0]) / dof if residual.size else 0.0
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[1]), float(np.sqrt(cov[1, 1]))
