"""
First-order Trotter evolution of an encoded Hamiltonian with global
depolarizing noise, plus the commutator-based term ordering.

Each term h*Gamma becomes the gate exp(-i 2 pi c dt h Gamma) (h in cm^-1,
dt in ps). After a gate acting on O >= 2 sites the state is mixed with
the maximally mixed state with probability (2*O - 3)*eps2q.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .encoding import EncodingScheme, encode_state
from .gm import TermList, commutator, gell_mann_basis, string_norm, two_site_gate_count
from .model import C_CM_PER_PS, check_dim

__all__ = [
    "Engine", "NoiseSpec", "OrderedTermList", "EvolutionResult",
    "commutator_scores", "st_error", "optimize_ordering", "evolve",
    "predicted_decay_time", "equal_decay_error",
]

log = logging.getLogger(__name__)

DENSITY_MATRIX_CAP = 256
# below this dimension the statevector engine multiplies by a cached step unitary
STEP_UNITARY_CAP = 1024


class Engine(str, Enum):
    DENSITY_MATRIX = "density"
    STATEVECTOR = "statevector"


@dataclass(frozen=True)
class NoiseSpec:
    eps2q: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eps2q <= 1.0:
            raise ValueError(f"eps2q must lie in [0, 1], got {self.eps2q}")

    def gate_error(self, order: int) -> float:
        if order <= 1:
            return 0.0
        return min(1.0, (2 * order - 3) * self.eps2q)


class _Commutators:
    """Lazily computed [Gamma_n, Gamma_m] for n < m, with Frobenius norms."""

    def __init__(self, terms: TermList):
        self.terms = terms.terms
        self.d = terms.scheme.site_dim
        self.n_sites = terms.scheme.n_sites
        self._cache: dict[tuple[int, int], tuple[dict, float]] = {}

    def _commute_fast(self, a, b) -> bool | None:
        overlap = [(x, y) for x, y in zip(a, b) if x and y]
        if not overlap:
            return True
        if self.d == 2:
            # Pauli strings commute iff they differ on an even number of shared sites
            return sum(x != y for x, y in overlap) % 2 == 0
        return None

    def get(self, n: int, m: int) -> tuple[dict, float]:
        """Commutator [Gamma_n, Gamma_m] (n first) and its norm."""
        if n > m:
            c, norm = self.get(m, n)
            return {k: -v for k, v in c.items()}, norm
        key = (n, m)
        if key not in self._cache:
            a, b = self.terms[n].gm_indices, self.terms[m].gm_indices
            if self._commute_fast(a, b):
                c = {}
            else:
                c = commutator(a, b, self.d)
            self._cache[key] = (c, string_norm(c, self.n_sites) if c else 0.0)
        return self._cache[key]


def commutator_scores(terms: TermList, cap: int | None = None) -> np.ndarray:
    """s_n = sum_m |h_n h_m| ||[Gamma_n, Gamma_m]||_F on the full site space."""
    check_dim(terms.scheme.dim, cap, "encoded space")
    comm = _Commutators(terms)
    h = terms.coeffs
    s = np.zeros(len(h))
    for n in range(len(h)):
        for m in range(n + 1, len(h)):
            norm = comm.get(n, m)[1]
            if norm:
                w = abs(h[n] * h[m]) * norm
                s[n] += w
                s[m] += w
    return s


def _st_prefactor(dt: float) -> float:
    return 0.5 * (2.0 * math.pi * C_CM_PER_PS * dt) ** 2


def _pair_sum(terms: TermList, order: Sequence[int], comm: _Commutators) -> dict:
    h = terms.coeffs
    acc: dict = {}
    for i, n in enumerate(order):
        for m in order[i + 1:]:
            c, norm = comm.get(n, m)
            if not norm:
                continue
            w = h[n] * h[m]
            for k, v in c.items():
                acc[k] = acc.get(k, 0.0) + w * v
    return acc


def st_error(terms: TermList, order: Sequence[int], dt: float, cap: int | None = None) -> float:
    """First-order Trotter error (dt^2/2hbar^2) ||sum_{n<m} h_n h_m [G_n, G_m]||_F."""
    check_dim(terms.scheme.dim, cap, "encoded space")
    acc = _pair_sum(terms, list(order), _Commutators(terms))
    return _st_prefactor(dt) * string_norm(acc, terms.scheme.n_sites)


@dataclass(frozen=True)
class OrderedTermList:
    base: TermList
    order: tuple[int, ...]
    scores: np.ndarray = field(repr=False)
    st_error: float
    dt: float
    sweeps: int = 0

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.base.terms))):
            raise ValueError("order is not a permutation of the term indices")

    @property
    def terms(self):
        return [self.base.terms[i] for i in self.order]

    def to_dict(self) -> dict:
        return {
            "dt_ps": self.dt,
            "st_error": self.st_error,
            "sweeps": self.sweeps,
            "order": [
                {"term": int(i), "score": float(self.scores[i]),
                 "coeff_cm1": self.base.terms[i].coeff,
                 "gm_indices": list(self.base.terms[i].gm_indices)}
                for i in self.order
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def optimize_ordering(terms: TermList, dt: float, max_sweeps: int = 1000,
                      cap: int | None = None) -> OrderedTermList:
    """Sort by descending commutator score, then accept adjacent swaps that lower the error.

    A sweep visits positions 0..N-2 in turn; after a swap the moved term is
    compared again with its new right neighbour. Sweeps repeat until one
    makes no swap. Swapping neighbours a, b only flips the sign of the
    pair contribution h_a h_b [G_a, G_b], so the pair sum is updated in place.
    """
    check_dim(terms.scheme.dim, cap, "encoded space")
    comm = _Commutators(terms)
    scores = commutator_scores(terms, cap)
    order = [int(i) for i in np.argsort(-scores, kind="stable")]
    h = terms.coeffs
    acc = _pair_sum(terms, order, comm)
    norm_sq = sum(abs(v) ** 2 for v in acc.values())

    sweeps = 0
    swapped = True
    while swapped:
        if sweeps >= max_sweeps:
            log.warning("ordering stopped after %d sweeps without converging", max_sweeps)
            break
        swapped = False
        sweeps += 1
        for i in range(len(order) - 1):
            a, b = order[i], order[i + 1]
            c, norm = comm.get(a, b)
            if not norm:
                continue
            w = 2.0 * h[a] * h[b]
            overlap = sum((acc.get(k, 0.0).conjugate() * v).real for k, v in c.items())
            new_sq = norm_sq - 2.0 * w * overlap + w * w * sum(abs(v) ** 2 for v in c.values())
            if new_sq < norm_sq * (1.0 - 1e-12):
                for k, v in c.items():
                    acc[k] = acc.get(k, 0.0) - w * v
                norm_sq = sum(abs(v) ** 2 for v in acc.values())
                order[i], order[i + 1] = b, a
                swapped = True
    err = _st_prefactor(dt) * math.sqrt(norm_sq * 2.0 ** terms.scheme.n_sites)
    return OrderedTermList(terms, tuple(order), scores, err, dt, sweeps)


def _identity_order(terms: TermList, dt: float) -> OrderedTermList:
    order = tuple(range(len(terms.terms)))
    return OrderedTermList(terms, order, np.zeros(len(order)), st_error(terms, order, dt), dt)


@dataclass(frozen=True)
class _Gate:
    support: tuple[int, ...]
    unitary: np.ndarray
    error: float


def _gates(ordered: OrderedTermList, dt: float, noise: NoiseSpec) -> list[_Gate]:
    scheme = ordered.base.scheme
    d, n = scheme.site_dim, scheme.n_sites
    lam = gell_mann_basis(d).matrices
    idle = math.sqrt(2.0 / d)
    theta = 2.0 * math.pi * C_CM_PER_PS * dt
    gates = []
    for term in ordered.terms:
        support = term.support
        local = np.ones((1, 1), dtype=complex)
        for s in support:
            local = np.kron(local, lam[term.gm_indices[s]])
        # lam_0 = sqrt(2/d) I on idle sites rescales the local generator
        local *= idle ** (n - len(support))
        evals, evecs = np.linalg.eigh(local)
        u = (evecs * np.exp(-1j * theta * term.coeff * evals)) @ evecs.conj().T
        gates.append(_Gate(support, u, noise.gate_error(term.order)))
    return gates


def _apply(tensor: np.ndarray, u: np.ndarray, axes: Sequence[int], d: int) -> np.ndarray:
    k = len(axes)
    ut = u.reshape((d,) * (2 * k))
    out = np.tensordot(ut, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


@dataclass(frozen=True)
class EvolutionResult:
    """Populations on the grid t_j = j*dt, j = 0..n_steps.

    ``ideal`` holds the noise-free Trotter populations when the engine
    produces them (statevector engine); ``fidelity`` is the accumulated
    survival factor F(t) of the global depolarizing channel.
    ``final_state`` is the last psi (statevector) or rho (density).
    """

    times: np.ndarray
    populations: dict
    fidelity: np.ndarray
    dim: int
    meta: dict
    ideal: dict | None = None
    final_state: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self, extra: dict | None = None) -> str:
        cols = {"t_ps": self.times, "fidelity": self.fidelity}
        for v, p in self.populations.items():
            cols[f"p_{state_label(v)}"] = p
        for name, values in (extra or {}).items():
            cols[name] = values
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([f"{float(x):.17g}" for x in row])
        return buf.getvalue()


def state_label(v: Sequence[int]) -> str:
    sep = "" if all(x < 10 for x in v) else "_"
    return sep.join(str(int(x)) for x in v)


def evolve(ordered: OrderedTermList | TermList, v0: Sequence[int], dt: float, n_steps: int,
           noise: NoiseSpec | float = 0.0, tracked: Sequence[Sequence[int]] | None = None,
           engine: Engine | str = Engine.STATEVECTOR, cap: int | None = None) -> EvolutionResult:
    """Trotterized evolution from the product state ``v0``.

    Parameters
    ----------
    ordered : OrderedTermList or TermList
        Term sequence of one Trotter step (a bare TermList keeps build order).
    dt : float
        Trotter step in ps.
    noise : NoiseSpec or float
        Two-site gate error.
    engine : {'statevector', 'density'}
        ``density`` applies every gate and channel to rho; ``statevector``
        evolves |psi> and the scalar survival factor, which is exact because
        the global depolarizing channel commutes with unitaries.
    """
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec(float(noise))
    engine = Engine(engine)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    scheme: EncodingScheme = (ordered if isinstance(ordered, TermList) else ordered.base).scheme
    d, n, dim = scheme.site_dim, scheme.n_sites, scheme.dim
    if engine is Engine.DENSITY_MATRIX:
        check_dim(dim, min(DENSITY_MATRIX_CAP, cap or DENSITY_MATRIX_CAP), "density-matrix")
    else:
        check_dim(dim, cap, "statevector")
    if isinstance(ordered, TermList):
        ordered = _identity_order(ordered, dt)
    tracked = [tuple(int(x) for x in v0)] if tracked is None else [tuple(int(x) for x in v) for v in tracked]
    idx = [encode_state(v, scheme) for v in tracked]
    start = encode_state(v0, scheme)
    gates = _gates(ordered, dt, noise)
    step_survival = float(np.prod([1.0 - g.error for g in gates]))

    times = np.arange(n_steps + 1) * dt
    fidelity = np.empty(n_steps + 1)
    pops = np.empty((len(idx), n_steps + 1))
    ideal = None

    if engine is Engine.STATEVECTOR:
        psi = np.zeros(dim, dtype=complex)
        psi[start] = 1.0
        ideal = np.empty_like(pops)
        step = None
        if dim <= STEP_UNITARY_CAP:
            step = np.eye(dim, dtype=complex).reshape((d,) * n + (dim,))
            for g in gates:
                step = _apply(step, g.unitary, g.support, d)
            step = step.reshape(dim, dim)
        f = 1.0
        for j in range(n_steps + 1):
            if j:
                if step is not None:
                    psi = step @ psi
                else:
                    t = psi.reshape((d,) * n)
                    for g in gates:
                        t = _apply(t, g.unitary, g.support, d)
                    psi = t.reshape(dim)
                f *= step_survival
            p = np.abs(psi[idx]) ** 2
            ideal[:, j] = p
            fidelity[j] = f
            pops[:, j] = (1.0 - f) / dim + f * p
    else:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[start, start] = 1.0
        rho = rho.reshape((d,) * (2 * n))
        eye = np.eye(dim).reshape((d,) * (2 * n)) / dim
        f = 1.0
        for j in range(n_steps + 1):
            if j:
                for g in gates:
                    rho = _apply(rho, g.unitary, g.support, d)
                    rho = _apply(rho, g.unitary.conj(), [n + s for s in g.support], d)
                    if g.error:
                        rho = g.error * eye + (1.0 - g.error) * rho
                f *= step_survival
            flat = rho.reshape(dim, dim)
            pops[:, j] = flat[idx, idx].real
            fidelity[j] = f

    meta = {
        "encoding": scheme.kind.value,
        "vmax": scheme.vmax,
        "dt_ps": dt,
        "n_steps": n_steps,
        "eps2q": noise.eps2q,
        "engine": engine.value,
        "dim": dim,
        "n2q": two_site_gate_count(ordered.base),
    }
    return EvolutionResult(
        times,
        {v: np.clip(pops[i], 0.0, 1.0) for i, v in enumerate(tracked)},
        fidelity,
        dim,
        meta,
        None if ideal is None else {v: np.clip(ideal[i], 0.0, 1.0) for i, v in enumerate(tracked)},
        psi if engine is Engine.STATEVECTOR else rho.reshape(dim, dim),
    )


def predicted_decay_time(terms: TermList, dt: float, eps2q: float) -> float:
    """tau = dt / (N2q * eps2q); ``math.inf`` when nothing decays."""
    if eps2q < 0:
        raise ValueError("eps2q must be >= 0")
    n2q = two_site_gate_count(terms)
    if eps2q == 0 or n2q == 0:
        return math.inf
    return dt / (n2q * eps2q)


def equal_decay_error(n2q_qubit: int, n2q_qudit: int, eps_qubit: float) -> float:
    """Two-qudit error giving the same decay time as the qubit circuit."""
    if n2q_qudit <= 0 or n2q_qubit <= 0:
        raise ValueError("gate counts must be positive")
    return n2q_qubit / n2q_qudit * eps_qubit
