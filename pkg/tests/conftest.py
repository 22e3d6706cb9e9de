from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from vibsim import gm, model, trotter
from vibsim.encoding import EncodingScheme, encoded_indices
from vibsim.model import Convention

DATA = Path(__file__).parent / "data"


@lru_cache(maxsize=None)
def terms_for(name: str, encoding: str, vmax: int = 3,
              convention: Convention = Convention.EXACT) -> gm.TermList:
    return gm.build_encoded_hamiltonian(model.preset(name), vmax, encoding, convention)


@lru_cache(maxsize=None)
def ordered_for(name: str, encoding: str, dt: float, vmax: int = 3) -> trotter.OrderedTermList:
    return trotter.optimize_ordering(terms_for(name, encoding, vmax), dt)


@lru_cache(maxsize=None)
def eig_for(name: str, vmax: int = 3, convention: Convention = Convention.EXACT) -> model.EigenSystem:
    vib = model.preset(name)
    h = model.build_full_hamiltonian(vib, vmax, convention)
    return model.diagonalize(h, vmax, vib.n_modes)


def site_digits(scheme: EncodingScheme) -> np.ndarray:
    idx = encoded_indices(scheme)
    d, n = scheme.site_dim, scheme.n_sites
    return np.array([[(i // d ** (n - 1 - s)) % d for s in range(n)] for i in idx])


def encoded_block_elementwise(terms: gm.TermList) -> np.ndarray:
    """<x|H|y> on the encoded subspace as products of single-site elements."""
    scheme = terms.scheme
    lam = gm.gell_mann_basis(scheme.site_dim).matrices
    digits = site_digits(scheme)
    block = terms.constant_offset * np.eye(len(digits), dtype=complex)
    for t in terms.terms:
        m = np.ones((len(digits), len(digits)), dtype=complex)
        for s, a in enumerate(t.gm_indices):
            m *= lam[a][digits[:, s][:, None], digits[:, s][None, :]]
        block += t.coeff * m
    return block


@pytest.fixture(scope="session")
def h2o_table():
    return json.loads((DATA / "h2o_table1.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
