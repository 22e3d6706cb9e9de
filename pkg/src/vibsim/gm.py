"""
Generalized Gell-Mann basis and the encoded (qubit/qudit) Hamiltonian.

Basis layout for site dimension d (frozen, see tests/data/gellmann_layout.json):

* index 0: ``sqrt(2/d) * I``
* then the symmetric matrices ``E_jk + E_kj`` for j < k (row-major pairs)
* then the antisymmetric ``-i (E_jk - E_kj)`` for j < k
* then the diagonal matrices ``sqrt(2/(l(l+1))) diag(1,..,1,-l,0,..)``,
  l = 1..d-1

Every element satisfies ``tr(lam_j lam_k) = 2 delta_jk``; for d = 2 the
layout is (I, X, Y, Z).
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .encoding import Encoding, EncodingScheme, embed_mode_operator, encoded_indices
from .model import (Convention, VibrationalModel, check_dim, ho_operator_matrix,
                    mode_factors)

__all__ = [
    "PRUNE_TOL", "GellMannBasis", "gell_mann_basis", "EncodedTerm", "TermList",
    "decompose_single_mode", "build_encoded_hamiltonian", "two_site_gate_count",
    "string_matrix", "string_product", "commutator", "string_norm",
]

PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class GellMannBasis:
    d: int
    matrices: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.matrices)

    def __getitem__(self, j):
        return self.matrices[j]


@lru_cache(maxsize=None)
def gell_mann_basis(d: int) -> GellMannBasis:
    if d < 2:
        raise ValueError(f"site dimension must be >= 2, got {d}")
    mats = [np.sqrt(2.0 / d) * np.eye(d, dtype=complex)]
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1.0
        mats.append(m)
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k], m[k, j] = -1j, 1j
        mats.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag * np.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    arr = np.array(mats)
    arr.setflags(write=False)
    return GellMannBasis(d, arr)


def string_matrix(indices: Sequence[int], d: int) -> np.ndarray:
    """Dense Kronecker product lam_{i0} x lam_{i1} x ... (site 0 leftmost)."""
    basis = gell_mann_basis(d)
    return reduce(np.kron, [basis[i] for i in indices], np.ones((1, 1), dtype=complex))


@dataclass(frozen=True)
class EncodedTerm:
    coeff: float
    gm_indices: tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(1 for i in self.gm_indices if i)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(s for s, i in enumerate(self.gm_indices) if i)


@dataclass(frozen=True)
class TermList:
    """Encoded Hamiltonian ``sum_n h_n Gamma_n + constant_offset * I``.

    Only strings acting non-trivially somewhere are stored; the pure
    identity part is the scalar ``constant_offset`` (cm^-1, coefficient
    of the true identity matrix).
    """

    scheme: EncodingScheme
    terms: tuple[EncodedTerm, ...]
    constant_offset: float = 0.0

    def __len__(self):
        return len(self.terms)

    @property
    def n_hq(self) -> int:
        """Term count including the identity term when it is nonzero."""
        return len(self.terms) + (abs(self.constant_offset) >= PRUNE_TOL)

    def histogram(self) -> dict[int, int]:
        """N_Hq by operator order; order 0 is the identity term."""
        counts = Counter(t.order for t in self.terms)
        if abs(self.constant_offset) >= PRUNE_TOL:
            counts[0] += 1
        return {o: counts.get(o, 0) for o in range(0, max(counts, default=0) + 1)}

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([t.coeff for t in self.terms])

    def matrix(self, cap: int | None = None) -> np.ndarray:
        """Dense reconstruction on the full site space."""
        check_dim(self.scheme.dim, cap, "encoded space")
        d = self.scheme.site_dim
        h = self.constant_offset * np.eye(self.scheme.dim, dtype=complex)
        for t in self.terms:
            h += t.coeff * string_matrix(t.gm_indices, d)
        return h

    def encoded_block(self, cap: int | None = None) -> np.ndarray:
        """Restriction to the encoded subspace, in product-basis order."""
        idx = encoded_indices(self.scheme)
        return self.matrix(cap)[np.ix_(idx, idx)]

    def to_dict(self) -> dict:
        return {
            "encoding": self.scheme.kind.value,
            "vmax": self.scheme.vmax,
            "n_modes": self.scheme.n_modes,
            "d": self.scheme.site_dim,
            "n_sites": self.scheme.n_sites,
            "n_hq": self.n_hq,
            "constant_offset_cm1": self.constant_offset,
            "terms": [{"coeff_cm1": t.coeff, "gm_indices": list(t.gm_indices)} for t in self.terms],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TermList":
        scheme = EncodingScheme(data["encoding"], int(data["vmax"]), int(data["n_modes"]))
        terms = tuple(EncodedTerm(float(t["coeff_cm1"]), tuple(int(i) for i in t["gm_indices"]))
                      for t in data["terms"])
        for t in terms:
            if len(t.gm_indices) != scheme.n_sites:
                raise ValueError(f"term {t} does not span {scheme.n_sites} sites")
        return cls(scheme, terms, float(data.get("constant_offset_cm1", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["coeff_cm1", "order"] + [f"site{s}" for s in range(self.scheme.n_sites)])
        for t in self.terms:
            w.writerow([f"{t.coeff:.17g}", t.order, *t.gm_indices])
        return buf.getvalue()


def _site_coefficients(op: np.ndarray, d: int, n_sites: int) -> np.ndarray:
    """Tensor c[a0..a_{b-1}] = tr(op Gamma_a) / 2^b, contracted site by site."""
    basis = gell_mann_basis(d).matrices
    t = np.asarray(op, dtype=complex).reshape((d,) * (2 * n_sites))
    # axes: rows r.., cols c.., then the indices a.. produced so far;
    # tr(op G) = sum op[r,c] G[c,r]
    for s in range(n_sites):
        left = n_sites - s
        t = np.tensordot(t, basis, axes=([0, left], [2, 1]))
    return t / 2.0 ** n_sites


def decompose_single_mode(op: np.ndarray, scheme: EncodingScheme,
                          tol: float = PRUNE_TOL) -> dict[tuple[int, ...], float]:
    """Expand a single-mode operator in Gell-Mann strings over its sites.

    ``op`` is given in the (vmax+1)-level oscillator basis and is embedded
    into the mode's site space first. Returns ``{indices: coeff}`` with
    coefficients below ``tol`` dropped.
    """
    op = np.asarray(op)
    if not np.allclose(op, op.conj().T, atol=1e-12 * max(1.0, np.max(np.abs(op)))):
        raise ValueError("operator is not Hermitian")
    emb = embed_mode_operator(op, scheme)
    b = scheme.sites_per_mode
    coeffs = _site_coefficients(emb, scheme.site_dim, b)
    if np.max(np.abs(coeffs.imag), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(coeffs))):
        raise ValueError("complex expansion coefficient for a Hermitian operator")
    out = {}
    for idx in zip(*np.nonzero(np.abs(coeffs.real) >= tol)):
        out[tuple(int(i) for i in idx)] = float(coeffs.real[idx])
    return out


def _identity_expansion(scheme: EncodingScheme) -> dict[tuple[int, ...], float]:
    # I = sqrt(d/2) lam_0 on every site of the block
    b = scheme.sites_per_mode
    return {(0,) * b: float(np.sqrt(scheme.site_dim / 2.0)) ** b}


def build_encoded_hamiltonian(model: VibrationalModel, vmax: int, scheme: EncodingScheme | str,
                              convention: Convention = Convention.EXACT,
                              tol: float = PRUNE_TOL, cap: int | None = None) -> TermList:
    """Gell-Mann expansion of the full vibrational Hamiltonian.

    Single-mode expansions of the harmonic parts and of q, q^2, q^3 are
    multiplied across modes, like strings are merged, the identity string
    goes to ``constant_offset`` and the rest is sorted lexicographically.
    """
    if isinstance(scheme, (str, Encoding)):
        scheme = EncodingScheme(scheme, vmax, model.n_modes)
    if scheme.vmax != vmax or scheme.n_modes != model.n_modes:
        raise ValueError("encoding scheme does not match model / vmax")
    # only single-mode blocks are ever materialized
    check_dim(scheme.block_dim, cap, "mode block")

    ident = _identity_expansion(scheme)
    cache: dict[tuple, dict] = {}

    def single(kind: str, omega: float | None = None):
        key = (kind, omega)
        if key not in cache:
            cache[key] = decompose_single_mode(
                ho_operator_matrix(vmax, kind, convention, omega=omega), scheme, tol=tol)
        return cache[key]

    acc: dict[tuple[int, ...], float] = {}

    def add_product(factors: list[dict], scale: float):
        for combo in itertools.product(*(f.items() for f in factors)):
            key = sum((k for k, _ in combo), ())
            c = scale
            for _, v in combo:
                c *= v
            acc[key] = acc.get(key, 0.0) + c

    for k, w in enumerate(model.omega):
        factors = [ident] * model.n_modes
        factors[k] = single("h0", w)
        add_product(factors, 1.0)
    for key, f in model.cubic.items():
        factors = [ident] * model.n_modes
        for mode, power in mode_factors(model, key).items():
            factors[mode] = single(f"q{power}")
        add_product(factors, f)

    zero = (0,) * scheme.n_sites
    offset = acc.pop(zero, 0.0) * (2.0 / scheme.site_dim) ** (scheme.n_sites / 2.0)
    terms = tuple(EncodedTerm(c, k) for k, c in sorted(acc.items()) if abs(c) >= tol)
    return TermList(scheme, terms, offset if abs(offset) >= tol else 0.0)


def two_site_gate_count(terms: TermList | Iterable[EncodedTerm]) -> int:
    """Two-site gates per Trotter step: 2*order - 3 for every multi-site term."""
    seq = terms.terms if isinstance(terms, TermList) else terms
    return sum(2 * t.order - 3 for t in seq if t.order >= 2)


# --- sparse string algebra -------------------------------------------------

@lru_cache(maxsize=None)
def _product_table(d: int) -> tuple[tuple[tuple[tuple[int, complex], ...], ...], ...]:
    """table[a][b] lists (c, z) with lam_a lam_b = sum z lam_c."""
    lam = gell_mann_basis(d).matrices
    coef = np.einsum("aij,bjk,cki->abc", lam, lam, lam) / 2.0
    n = len(lam)
    return tuple(
        tuple(tuple((int(c), complex(coef[a, b, c])) for c in np.nonzero(np.abs(coef[a, b]) > 1e-13)[0])
              for b in range(n))
        for a in range(n)
    )


def string_product(a: Sequence[int], b: Sequence[int], d: int) -> dict[tuple[int, ...], complex]:
    """Gamma_a Gamma_b as a sparse combination of strings."""
    table = _product_table(d)
    out: dict[tuple[int, ...], complex] = {(): 1.0 + 0j}
    for x, y in zip(a, b):
        entries = table[x][y]
        if len(entries) == 1:
            c, z = entries[0]
            out = {k + (c,): v * z for k, v in out.items()}
        else:
            out = {k + (c,): v * z for k, v in out.items() for c, z in entries}
    return out


def commutator(a: Sequence[int], b: Sequence[int], d: int,
               tol: float = 1e-13) -> dict[tuple[int, ...], complex]:
    """[Gamma_a, Gamma_b] as a sparse string combination; empty if they commute."""
    if not any(x and y for x, y in zip(a, b)):
        return {}
    ab = string_product(a, b, d)
    for k, v in string_product(b, a, d).items():
        ab[k] = ab.get(k, 0.0) - v
    return {k: v for k, v in ab.items() if abs(v) > tol}


def string_norm(combo: Mapping[tuple[int, ...], complex], n_sites: int) -> float:
    """Frobenius norm of a string combination on the full d^n space."""
    sq = sum(abs(v) ** 2 for v in combo.values())
    return float(np.sqrt(sq * 2.0 ** n_sites))
