"""Seeded Bernoulli site colouring of a lattice window.

Each replica draws from its own counter-based stream.  The stream key is
``mix64(mix64(seed ^ SEED_SALT) + GOLDEN * (replica_index + 1))`` and the
``k``-th uniform of the stream is ``mix64(key + GOLDEN * (k + 1)) >> 11`` times
``2**-53``, where ``mix64`` is the SplitMix64 finaliser.  Site ``(a, b)`` of an
``L_i x L_j`` window consumes uniform number ``k = a * L_j + b`` and is White
iff that uniform is ``< p``.  Nothing depends on the order in which replicas
are generated, so any partition of replicas over workers gives the same
colours.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from .lattice import LatticeCoord, Window

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
SEED_SALT = np.uint64(0x5851F42D4C957F2D)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

DUMP_MAGIC = b"PCFG"
_HEADER = struct.Struct("<4sIIdQI")  # 32 bytes


class Color(enum.IntEnum):
    BLACK = 0
    WHITE = 1


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def replica_key(seed, replica):
    base = mix64(np.uint64(seed) ^ SEED_SALT)
    return mix64(base + GOLDEN * (np.uint64(replica) + _ONE))


@njit(cache=True)
def uniform(key, k):
    return float(mix64(key + GOLDEN * (np.uint64(k) + _ONE)) >> _S11) * _INV53


@njit(cache=True, nogil=True)
def fill_colors(out, p, key):
    """Fill a 2-D uint8 array in place: 1 = White, 0 = Black."""
    L_i, L_j = out.shape
    ctr = key
    for a in range(L_i):
        for b in range(L_j):
            ctr = ctr + GOLDEN
            u = float(mix64(ctr) >> _S11) * _INV53
            out[a, b] = 1 if u < p else 0


def stream_key(seed: int, replica_index: int) -> np.uint64:
    """Key of the uniform stream for ``(seed, replica_index)``."""
    return np.uint64(replica_key(np.uint64(seed % 2**64), np.uint64(replica_index)))


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic sub-seed for an experiment stage (probe, level, ...)."""
    z = np.uint64(seed % 2**64)
    for t in tags:
        z = mix64(np.uint64(z) ^ mix64(np.uint64(t % 2**64) + GOLDEN))
    return int(z)


@dataclass(frozen=True, eq=False)
class PercConfig:
    """One sampled colouring of ``window``; colours are held packed, 1 bit per
    site, row-major in local ``(a, b)`` order."""

    window: Window
    p: float
    bits: np.ndarray
    seed: int = 0
    replica_index: int = 0

    @classmethod
    def from_colors(cls, window: Window, colors, p: float = float("nan"),
                    seed: int = 0, replica_index: int = 0) -> "PercConfig":
        arr = np.asarray(colors).astype(bool)
        if arr.shape != window.shape:
            raise ValueError(f"colour array shape {arr.shape} != window shape {window.shape}")
        return cls(window, p, np.packbits(arr.ravel()), seed, replica_index)

    @cached_property
    def colors(self) -> np.ndarray:
        """Boolean array, ``True`` = White; read-only."""
        n = self.window.n_sites
        arr = np.unpackbits(self.bits, count=n).astype(bool).reshape(self.window.shape)
        arr.flags.writeable = False
        return arr

    @cached_property
    def codes(self) -> np.ndarray:
        """``uint8`` view of the colours (1 = White) for compiled kernels."""
        arr = self.colors.astype(np.uint8)
        arr.flags.writeable = False
        return arr

    def color(self, c) -> Color:
        a, b = self.window.local(c)
        return Color(int(self.colors[a, b]))

    def flipped(self) -> "PercConfig":
        """Colour-swapped copy (the law of sampling at ``1 - p``)."""
        return PercConfig.from_colors(self.window, ~self.colors, 1.0 - self.p,
                                      self.seed, self.replica_index)

    def white_fraction(self) -> float:
        return float(self.colors.mean())

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(DUMP_MAGIC, self.window.L_i, self.window.L_j, float(self.p),
                            int(self.seed), int(self.replica_index))
        return head + self.bits.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, delta: float = 1.0,
                   origin=LatticeCoord(0, 0)) -> "PercConfig":
        magic, L_i, L_j, p, seed, rep = _HEADER.unpack_from(data)
        if magic != DUMP_MAGIC:
            raise ValueError(f"bad config dump magic {magic!r}")
        nbytes = (L_i * L_j + 7) // 8
        bits = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=_HEADER.size).copy()
        return cls(Window(L_i, L_j, delta, origin), p, bits, seed, rep)


def sample(window: Window, p: float, seed: int, replica_index: int = 0) -> PercConfig:
    """Colour every site of ``window`` White independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if window.n_sites < 1:
        raise ValueError("cannot sample an empty window")
    buf = np.empty(window.shape, dtype=np.uint8)
    fill_colors(buf, float(p), stream_key(seed, replica_index))
    cfg = PercConfig(window, float(p), np.packbits(buf.ravel()), int(seed), int(replica_index))
    buf.flags.writeable = False
    cfg.__dict__["codes"] = buf
    return cfg


def color(cfg: PercConfig, c) -> Color:
    return cfg.color(c)
