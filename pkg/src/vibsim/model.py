"""
Vibrational model, harmonic-oscillator matrix elements and exact dynamics.

Energies are in cm^-1 and times in ps throughout. The only physical
constant needed is the speed of light, which turns an energy E (cm^-1)
and a time t (ps) into the phase ``2*pi*c*E*t``.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "C_CM_PER_PS", "DEFAULT_MAX_DIM", "ResourceLimitError", "Convention",
    "VibrationalModel", "EigenSystem", "StateLabel", "co2", "h2o", "preset",
    "PRESETS", "max_dim", "ho_operator_matrix", "build_full_hamiltonian",
    "diagonalize", "exact_populations", "transition_sticks",
    "label_eigenstates", "phase",
]

C_CM_PER_PS = 0.0299792458
DEFAULT_MAX_DIM = 4096
MAX_DIM_ENV = "VIBSIM_MAX_DIM"


class ResourceLimitError(RuntimeError):
    """Raised when a requested Hilbert space exceeds the dimension cap."""


class Convention(str, Enum):
    """How powers of q are represented in a truncated basis.

    ``PROJECTED`` multiplies truncated q matrices, ``EXACT`` uses the
    analytic infinite-basis elements restricted to v, v' <= vmax.
    """

    PROJECTED = "projected"
    EXACT = "exact"


def max_dim(override: int | None = None) -> int:
    if override is not None:
        return int(override)
    env = os.environ.get(MAX_DIM_ENV)
    return int(env) if env else DEFAULT_MAX_DIM


def check_dim(dim: int, cap: int | None = None, what: str = "space") -> None:
    limit = max_dim(cap)
    if dim > limit:
        raise ResourceLimitError(
            f"{what} dimension {dim} exceeds cap {limit} (set {MAX_DIM_ENV} to raise it)"
        )


def phase(energy, t):
    """Phase E*t/hbar for energy in cm^-1 and time in ps."""
    return 2.0 * math.pi * C_CM_PER_PS * np.multiply(energy, t)


@dataclass(frozen=True)
class VibrationalModel:
    """Harmonic frequencies plus cubic couplings f_jkl (1-based, j<=k<=l).

    ``parity_mode`` names the mode whose quantum-number parity fixes the
    symmetry label (A1 even, B2 odd); ``None`` disables labeling.
    """

    omega: tuple[float, ...]
    cubic: Mapping[tuple[int, int, int], float] = field(default_factory=dict)
    name: str = ""
    parity_mode: int | None = None

    def __post_init__(self):
        omega = tuple(float(w) for w in self.omega)
        if not omega:
            raise ValueError("model needs at least one mode")
        if any(w <= 0 for w in omega):
            raise ValueError(f"harmonic frequencies must be positive, got {omega}")
        m = len(omega)
        cubic = {}
        for key, f in dict(self.cubic).items():
            j, k, l = (int(x) for x in key)
            if not 1 <= j <= k <= l <= m:
                raise ValueError(f"coupling index {key} must satisfy 1 <= j <= k <= l <= {m}")
            if f != 0.0:
                cubic[(j, k, l)] = float(f)
        if self.parity_mode is not None and not 1 <= self.parity_mode <= m:
            raise ValueError(f"parity_mode {self.parity_mode} out of range")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "cubic", dict(sorted(cubic.items())))

    @property
    def n_modes(self) -> int:
        return len(self.omega)

    def to_dict(self) -> dict:
        d = {
            "n_modes": self.n_modes,
            "omega_cm1": list(self.omega),
            "cubic": [{"j": j, "k": k, "l": l, "f_cm1": f} for (j, k, l), f in self.cubic.items()],
        }
        if self.name:
            d["name"] = self.name
        if self.parity_mode is not None:
            d["parity_mode"] = self.parity_mode
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "VibrationalModel":
        omega = data["omega_cm1"]
        if "n_modes" in data and int(data["n_modes"]) != len(omega):
            raise ValueError(f"n_modes={data['n_modes']} but {len(omega)} frequencies given")
        cubic = {}
        for entry in data.get("cubic", []):
            key = (int(entry["j"]), int(entry["k"]), int(entry["l"]))
            if key in cubic:
                raise ValueError(f"duplicate coupling {key}")
            cubic[key] = float(entry["f_cm1"])
        return cls(tuple(omega), cubic, data.get("name", ""), data.get("parity_mode"))

    @classmethod
    def from_json(cls, path) -> "VibrationalModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def co2() -> VibrationalModel:
    """Two-mode CO2 model (symmetric stretch, bend) with the Fermi resonance."""
    return VibrationalModel(
        (1354.31, 672.85), {(1, 1, 1): -45.78, (1, 2, 2): 74.72}, name="co2"
    )


def h2o() -> VibrationalModel:
    """Three-mode H2O model; mode 3 is the antisymmetric (B2) stretch."""
    return VibrationalModel(
        (3843.74, 1641.18, 3948.48),
        {
            (1, 1, 1): 303.64,
            (1, 1, 2): 39.02,
            (1, 2, 2): -162.13,
            (2, 2, 2): -43.96,
            (1, 3, 3): 911.05,
            (2, 3, 3): 134.59,
        },
        name="h2o",
        parity_mode=3,
    )


PRESETS = {"co2": co2, "h2o": h2o}


def preset(name: str) -> VibrationalModel:
    try:
        return PRESETS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _ladder_q(n: int) -> np.ndarray:
    q = np.zeros((n, n))
    v = np.arange(n - 1)
    q[v, v + 1] = q[v + 1, v] = np.sqrt((v + 1) / 2.0)
    return q


def ho_operator_matrix(vmax: int, kind: str, convention: Convention = Convention.EXACT,
                       omega: float | None = None) -> np.ndarray:
    """Single-mode operator in the truncated harmonic-oscillator basis.

    Parameters
    ----------
    vmax : int
        Highest vibrational quantum number kept.
    kind : {'q1', 'q2', 'q3', 'h0'}
        Power of the dimensionless coordinate, or the harmonic part
        ``diag(0, w, 2w, ...)`` (requires ``omega``).
    convention : Convention
        Truncated-product or exact-element powers of q.
    """
    if vmax < 0:
        raise ValueError("vmax must be >= 0")
    n = vmax + 1
    kind = kind.lower()
    if kind == "h0":
        if omega is None:
            raise ValueError("h0 needs omega")
        return np.diag(np.arange(n) * float(omega))
    if kind not in ("q1", "q2", "q3"):
        raise ValueError(f"unsupported operator kind {kind!r}")
    power = int(kind[1])
    convention = Convention(convention)
    if convention is Convention.PROJECTED:
        return np.linalg.matrix_power(_ladder_q(n), power)
    # q^p only couples v to v +- p, so a basis padded by p levels is exact
    big = np.linalg.matrix_power(_ladder_q(n + power), power)
    return big[:n, :n].copy()


def mode_factors(model: VibrationalModel, key: tuple[int, int, int]) -> dict[int, int]:
    """Map 0-based mode -> power of q for the coupling q_j q_k q_l."""
    powers: dict[int, int] = {}
    for m in key:
        powers[m - 1] = powers.get(m - 1, 0) + 1
    return powers


def build_full_hamiltonian(model: VibrationalModel, vmax: int,
                           convention: Convention = Convention.EXACT,
                           cap: int | None = None) -> np.ndarray:
    """Dense product-basis Hamiltonian; mode 1 is the leftmost Kronecker factor."""
    n = vmax + 1
    dim = n ** model.n_modes
    check_dim(dim, cap, "Hamiltonian")
    eye = np.eye(n)
    h = np.zeros((dim, dim))
    for k, w in enumerate(model.omega):
        ops = [eye] * model.n_modes
        ops[k] = ho_operator_matrix(vmax, "h0", omega=w)
        h += reduce(np.kron, ops)
    for key, f in model.cubic.items():
        ops = [eye] * model.n_modes
        for mode, power in mode_factors(model, key).items():
            ops[mode] = ho_operator_matrix(vmax, f"q{power}", convention)
        h += f * reduce(np.kron, ops)
    return h


def basis_index(v: Sequence[int], vmax: int, n_modes: int | None = None) -> int:
    v = tuple(int(x) for x in v)
    if n_modes is not None and len(v) != n_modes:
        raise ValueError(f"state {v} has {len(v)} modes, expected {n_modes}")
    idx = 0
    for x in v:
        if not 0 <= x <= vmax:
            raise ValueError(f"quantum number {x} outside 0..{vmax}")
        idx = idx * (vmax + 1) + x
    return idx


def basis_states(n_modes: int, vmax: int) -> list[tuple[int, ...]]:
    """All product states in basis order (mode 1 most significant)."""
    return [tuple(int(c) for c in s) for s in np.ndindex(*([vmax + 1] * n_modes))]


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray
    vmax: int | None = None
    n_modes: int | None = None

    @property
    def dim(self) -> int:
        return len(self.energies)

    def index(self, v) -> int:
        if isinstance(v, (int, np.integer)):
            if not 0 <= v < self.dim:
                raise ValueError(f"basis index {v} out of range")
            return int(v)
        if self.vmax is None:
            raise ValueError("eigensystem has no basis metadata; pass an integer index")
        return basis_index(v, self.vmax, self.n_modes)

    def weights(self, v0, v) -> np.ndarray:
        """w_m = <v0|psi_m><psi_m|v>; alpha_mn = w_m w_n for real vectors."""
        return self.vectors[self.index(v0)] * self.vectors[self.index(v)]


def diagonalize(h: np.ndarray, vmax: int | None = None, n_modes: int | None = None,
                degeneracy_tol: float = 1e-9) -> EigenSystem:
    """Dense symmetric eigendecomposition with a deterministic gauge.

    Each eigenvector has its largest-magnitude component made positive.
    Inside a cluster of degenerate eigenvalues, states are ordered by the
    index of that largest component.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if not np.allclose(h, h.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError("Hamiltonian is not symmetric")
    energies, vectors = np.linalg.eigh(0.5 * (h + h.T))
    peak = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[peak, np.arange(len(energies))])
    vectors = vectors * np.where(signs == 0, 1.0, signs)

    order = np.arange(len(energies))
    tol = degeneracy_tol * max(1.0, float(np.ptp(energies)) if len(energies) else 1.0)
    start = 0
    while start < len(energies):
        stop = start + 1
        while stop < len(energies) and energies[stop] - energies[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            order[start:stop] = block[np.argsort(peak[block], kind="stable")]
        start = stop
    return EigenSystem(energies[order], vectors[:, order], vmax, n_modes)


def exact_populations(eig: EigenSystem, v0, v, times) -> np.ndarray:
    """Trotter-free population |<v|exp(-iHt)|v0>|^2 on a time grid (ps)."""
    w = eig.weights(v0, v)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    amp = np.exp(-1j * phase(np.outer(t, eig.energies), 1.0)) @ w
    return np.clip(np.abs(amp) ** 2, 0.0, 1.0)


def transition_sticks(eig: EigenSystem, v0, v, weight_floor: float = 0.0,
                      gap_tol: float = 1e-9) -> list[tuple[float, float]]:
    """Pairs m > n with |alpha_mn| >= floor, as (E_m - E_n, |alpha_mn|) sorted by gap."""
    if weight_floor < 0:
        raise ValueError("weight_floor must be >= 0")
    w = eig.weights(v0, v)
    alpha = np.abs(np.outer(w, w))
    gaps = eig.energies[:, None] - eig.energies[None, :]
    m, n = np.nonzero(np.tril(alpha >= weight_floor, k=-1) & (gaps > gap_tol))
    sticks = sorted(zip(gaps[m, n].tolist(), alpha[m, n].tolist()))
    return [(float(g), float(a)) for g, a in sticks]


@dataclass(frozen=True)
class StateLabel:
    index: int
    energy: float
    symmetry: str | None
    configs: tuple[tuple[tuple[int, ...], float], ...]


def label_eigenstates(eig: EigenSystem, model: VibrationalModel,
                      threshold: float = 0.2) -> list[StateLabel]:
    """Dominant configurations (psi^2 >= threshold) and parity label per eigenstate.

    The label is ``'A1'`` when every dominant configuration has an even
    quantum number in ``model.parity_mode``, ``'B2'`` when all are odd,
    ``'?'`` for a mixed set and ``None`` when the model has no parity mode.
    """
    if eig.vmax is None:
        raise ValueError("eigensystem has no basis metadata")
    states = basis_states(model.n_modes, eig.vmax)
    labels = []
    for n in range(eig.dim):
        w2 = eig.vectors[:, n] ** 2
        picked = [i for i in np.argsort(-w2, kind="stable") if w2[i] >= threshold]
        configs = tuple((states[i], float(w2[i])) for i in picked)
        symmetry = None
        if model.parity_mode is not None:
            parities = {c[model.parity_mode - 1] % 2 for c, _ in configs}
            symmetry = {frozenset({0}): "A1", frozenset({1}): "B2"}.get(frozenset(parities), "?")
        labels.append(StateLabel(n, float(eig.energies[n]), symmetry, configs))
    return labels


def harmonic_energy(model: VibrationalModel, v: Iterable[int]) -> float:
    return float(sum(w * x for w, x in zip(model.omega, v)))
