"""Normal-ordered fermionic operator algebra.

Monomials are stored in a canonical normal-ordered form: all creation
operators to the left of all annihilation operators, creations in
ascending orbital order and annihilations in descending orbital order.
With this convention the canonical family is closed under Hermitian
conjugation.  A monomial is a tuple of ``(orbital, is_creation)`` pairs;
the empty tuple is the identity.

This module is deliberately simple and serves as the brute-force oracle
against which the fast matrix-element engines are verified.
"""

from __future__ import annotations

import numpy as np

from .determinants import apply_operator_string
from .errors import RankError

# Cancellations in nested commutators leave numerical dust far below any
# physical coefficient of the target models.
DROP_TOLERANCE = 1e-12


def _normal_order_term(ops, coeff, out):
    """Normal order one operator string, accumulating results into ``out``."""
    stack = [(list(ops), coeff)]
    while stack:
        term, c = stack.pop()
        i = 0
        dead = False
        while i < len(term) - 1:
            (p, dp), (q, dq) = term[i], term[i + 1]
            if not dp and dq:
                # a_p a+_q = delta_pq - a+_q a_p
                if p == q:
                    stack.append((term[:i] + term[i + 2 :], c))
                term[i], term[i + 1] = term[i + 1], term[i]
                c = -c
                i = max(i - 1, 0)
            elif dp and dq and p > q:
                term[i], term[i + 1] = term[i + 1], term[i]
                c = -c
                i = max(i - 1, 0)
            elif not dp and not dq and p < q:
                term[i], term[i + 1] = term[i + 1], term[i]
                c = -c
                i = max(i - 1, 0)
            elif dp == dq and p == q:
                dead = True
                break
            else:
                i += 1
        if not dead:
            key = tuple(term)
            out[key] = out.get(key, 0.0) + c


class FermionOperator:
    """Sum of canonical normal-ordered fermionic monomials with real coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = dict(terms) if terms else {}

    @classmethod
    def from_term(cls, ops, coeff=1.0):
        out = {}
        _normal_order_term(tuple(ops), coeff, out)
        op = cls(out)
        op.compress()
        return op

    @classmethod
    def identity(cls, coeff=1.0):
        return cls({(): coeff})

    def compress(self, tol=DROP_TOLERANCE):
        self.terms = {k: c for k, c in self.terms.items() if abs(c) > tol}
        return self

    def copy(self):
        return FermionOperator(self.terms)

    def __add__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return FermionOperator(out).compress()

    def __sub__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) - c
        return FermionOperator(out).compress()

    def __neg__(self):
        return FermionOperator({k: -c for k, c in self.terms.items()})

    def scaled(self, factor):
        return FermionOperator({k: factor * c for k, c in self.terms.items()}).compress()

    def __mul__(self, other):
        out = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                _normal_order_term(ka + kb, ca * cb, out)
        return FermionOperator(out).compress()

    def dagger(self):
        out = {}
        for k, c in self.terms.items():
            conj = tuple((orb, 1 - dag) for orb, dag in reversed(k))
            _normal_order_term(conj, c, out)
        return FermionOperator(out).compress()

    def is_hermitian(self, tol=1e-9):
        diff = self - self.dagger()
        return all(abs(c) <= tol for c in diff.terms.values())

    def l1_norm(self):
        """Sum of absolute monomial coefficients (fermionic representation)."""
        return sum(abs(c) for c in self.terms.values())

    def max_rank(self):
        return max((len(k) // 2 for k in self.terms), default=0)

    def support(self):
        """Sorted list of spin orbitals any monomial acts on."""
        orbs = set()
        for k in self.terms:
            orbs.update(orb for orb, _ in k)
        return sorted(orbs)

    def relabeled(self, mapping):
        """Apply an orbital relabeling (dict old -> new)."""
        out = {}
        for k, c in self.terms.items():
            _normal_order_term(tuple((mapping[o], d) for o, d in k), c, out)
        return FermionOperator(out).compress()

    def to_json_list(self):
        return [
            {"monomial": [[orb, dag] for orb, dag in k], "coeff": c}
            for k, c in sorted(self.terms.items())
        ]

    def sector_matrix(self, dets):
        """Dense matrix over an ordered determinant list, by direct application."""
        index = {d: a for a, d in enumerate(dets)}
        mat = np.zeros((len(dets), len(dets)))
        for k, c in self.terms.items():
            for col, d in enumerate(dets):
                d2, sign = apply_operator_string(d, k)
                if d2 is None:
                    continue
                row = index.get(d2)
                if row is not None:
                    mat[row, col] += sign * c
        return mat


def commutator(a, b):
    """Normal-ordered a*b - b*a."""
    return a * b - b * a


def from_hamiltonian(h):
    """Kinetic and potential operators of a diagonal-Coulomb Hamiltonian."""
    t_terms = {}
    n_so = h.n_spin_orbitals
    for i in range(n_so):
        for j in range(n_so):
            c = h.hopping[i, j]
            if c != 0.0:
                _normal_order_term(((i, 1), (j, 0)), c, t_terms)
    v_terms = {}
    for i in range(n_so):
        for j in range(i + 1, n_so):
            c = h.coulomb[i, j]
            if c != 0.0:
                _normal_order_term(((i, 1), (i, 0), (j, 1), (j, 0)), c, v_terms)
    return (
        FermionOperator(t_terms).compress(),
        FermionOperator(v_terms).compress(),
    )


def number_pair_operator(p, q):
    """n_p n_q as a FermionOperator."""
    return FermionOperator.from_term(((p, 1), (p, 0), (q, 1), (q, 0)))


def to_one_two_body_tensors(op, n_spin_orbitals):
    """Exact (scalar, h1, h2) representation of a rank <= 2 operator.

    ``h2[p, q, r, s]`` is the coefficient of the canonical monomial
    ``a+_p a+_q a_r a_s`` with p < q and r > s; other slots stay zero.
    """
    n = n_spin_orbitals
    scalar = 0.0
    h1 = np.zeros((n, n))
    h2 = np.zeros((n, n, n, n))
    for k, c in op.terms.items():
        if len(k) == 0:
            scalar += c
        elif len(k) == 2:
            h1[k[0][0], k[1][0]] += c
        elif len(k) == 4:
            h2[k[0][0], k[1][0], k[2][0], k[3][0]] += c
        else:
            raise RankError(f"monomial of rank {len(k) // 2} present")
    return scalar, h1, h2


def from_one_two_body_tensors(scalar, h1, h2):
    """Inverse of :func:`to_one_two_body_tensors`."""
    terms = {}
    if scalar != 0.0:
        terms[()] = scalar
    for (p, q), c in np.ndenumerate(h1):
        if c != 0.0:
            _normal_order_term(((p, 1), (q, 0)), c, terms)
    for (p, q, r, s), c in np.ndenumerate(h2):
        if c != 0.0:
            _normal_order_term(((p, 1), (q, 1), (r, 0), (s, 0)), c, terms)
    return FermionOperator(terms).compress()


def antisymmetrized_two_body(h2):
    """Antisymmetrized tensor A with Op2 = (1/4) sum A[p,q,r,s] a+_p a+_q a_r a_s."""
    a = np.zeros_like(h2)
    for (p, q, r, s), c in np.ndenumerate(h2):
        if c == 0.0:
            continue
        a[p, q, r, s] += c
        a[q, p, r, s] -= c
        a[p, q, s, r] -= c
        a[q, p, s, r] += c
    return a
