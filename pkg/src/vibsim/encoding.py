"""Qubit (binary, direct) and qudit encodings of vibrational basis states.

Site 0 is the most significant digit of a computational-basis index and
mode 1 occupies the leading sites. Within a mode block the binary digits
are big-endian and the direct (one-hot) qubit for level v sits at offset v.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = ["Encoding", "EncodingScheme", "encode_state", "decode_index",
           "scheme_resources", "encoded_indices", "embed_mode_operator"]


class Encoding(str, Enum):
    BINARY = "binary"
    DIRECT = "direct"
    QUDIT = "qudit"


@dataclass(frozen=True)
class EncodingScheme:
    kind: Encoding
    vmax: int
    n_modes: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Encoding(self.kind))
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.vmax < 1:
            raise ValueError(
                f"vmax={self.vmax} leaves a single level per mode (site dimension 1); use vmax >= 1"
            )

    @property
    def sites_per_mode(self) -> int:
        if self.kind is Encoding.BINARY:
            return math.ceil(math.log2(self.vmax + 1))
        if self.kind is Encoding.DIRECT:
            return self.vmax + 1
        return 1

    @property
    def n_sites(self) -> int:
        return self.n_modes * self.sites_per_mode

    @property
    def site_dim(self) -> int:
        return self.vmax + 1 if self.kind is Encoding.QUDIT else 2

    @property
    def dim(self) -> int:
        return self.site_dim ** self.n_sites

    @property
    def block_dim(self) -> int:
        """Dimension of the site space carrying one mode."""
        return self.site_dim ** self.sites_per_mode


def _mode_code(v: int, scheme: EncodingScheme) -> int:
    if scheme.kind is Encoding.DIRECT:
        return 1 << (scheme.sites_per_mode - 1 - v)
    return v


def encode_state(v: Sequence[int], scheme: EncodingScheme) -> int:
    """Computational-basis index of the product state ``v``."""
    v = tuple(int(x) for x in v)
    if len(v) != scheme.n_modes:
        raise ValueError(f"state {v} has {len(v)} modes, scheme expects {scheme.n_modes}")
    idx = 0
    for x in v:
        if not 0 <= x <= scheme.vmax:
            raise ValueError(f"quantum number {x} outside 0..{scheme.vmax}")
        idx = idx * scheme.block_dim + _mode_code(x, scheme)
    return idx


def _decode_block(code: int, scheme: EncodingScheme) -> int | None:
    if scheme.kind is Encoding.DIRECT:
        if code == 0 or code & (code - 1):
            return None
        v = scheme.sites_per_mode - code.bit_length()
        return v
    return code if code <= scheme.vmax else None


def decode_index(idx: int, scheme: EncodingScheme) -> tuple[int, ...] | None:
    """Inverse of :func:`encode_state`; ``None`` for indices outside the code space."""
    idx = int(idx)
    if not 0 <= idx < scheme.dim:
        raise ValueError(f"index {idx} outside 0..{scheme.dim - 1}")
    v = []
    for _ in range(scheme.n_modes):
        idx, code = divmod(idx, scheme.block_dim)
        x = _decode_block(code, scheme)
        if x is None:
            return None
        v.append(x)
    return tuple(reversed(v))


def scheme_resources(scheme: EncodingScheme) -> dict:
    used = (scheme.vmax + 1) ** scheme.n_modes
    return {
        "encoding": scheme.kind.value,
        "n_sites": scheme.n_sites,
        "d": scheme.site_dim,
        "dim": scheme.dim,
        "encoded_fraction": used / scheme.dim,
    }


def encoded_indices(scheme: EncodingScheme) -> np.ndarray:
    """Encoded index of every product state, in product-basis order."""
    codes = np.array([_mode_code(v, scheme) for v in range(scheme.vmax + 1)])
    idx = np.zeros(1, dtype=np.int64)
    for _ in range(scheme.n_modes):
        idx = (idx[:, None] * scheme.block_dim + codes[None, :]).ravel()
    return idx


def embed_mode_operator(op: np.ndarray, scheme: EncodingScheme) -> np.ndarray:
    """Lift a (vmax+1)-level single-mode operator onto the sites of one mode.

    Binary pads with zero rows/columns for unused bit patterns. Direct
    uses the one-hot hard-core form sum_vw o_vw s+_v s-_w, with s+_v s-_v
    the number projector (1 - Z_v)/2; it acts on every bit pattern and
    conserves the excitation count of the block. Qudit is the identity map.
    """
    op = np.asarray(op)
    n = scheme.vmax + 1
    if op.shape != (n, n):
        raise ValueError(f"operator shape {op.shape} does not match vmax={scheme.vmax}")
    if scheme.kind is Encoding.QUDIT:
        return op.copy()
    size = scheme.block_dim
    out = np.zeros((size, size), dtype=op.dtype)
    if scheme.kind is Encoding.BINARY:
        out[:n, :n] = op
        return out
    b = scheme.sites_per_mode
    bit = [1 << (b - 1 - v) for v in range(n)]
    for x in range(size):
        for v in range(n):
            if not x & bit[v]:
                continue
            # s+_w s-_v moves the excitation from v to w (diagonal when w == v)
            for w in range(n):
                if op[w, v] == 0:
                    continue
                if w == v:
                    out[x, x] += op[v, v]
                elif not x & bit[w]:
                    out[x ^ bit[v] ^ bit[w], x] += op[w, v]
    return out
