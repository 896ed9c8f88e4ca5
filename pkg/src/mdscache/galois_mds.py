"""
GF(2^8) arithmetic and a systematic Reed-Solomon erasure codec.

Field
-----
Elements are bytes. Addition is xor; multiplication uses log/antilog tables
built from the primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D) with
generator 0x02.

Code
----
The ``n_fragments`` source fragments of a file are read as the values of a
polynomial of degree < n at the evaluation points 0, 1, ..., n-1. Packet ``i``
is that polynomial evaluated at the field point ``i``, so the first n packets
are the fragments themselves (systematic) and any n packets with distinct
indices determine the polynomial by Lagrange interpolation. There are 256
field points, hence at most 256 packets per file.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

PRIMITIVE_POLY = 0x11D
GENERATOR = 0x02
FIELD_SIZE = 256
MAX_PACKETS = FIELD_SIZE


def _build_tables():
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    # doubled so that exp[log a + log b] never needs a mod 255
    exp[255:510] = exp[:255]
    a = np.arange(256)
    mul = exp[(log[a][:, None] + log[a][None, :])].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0
    return exp, log, mul


_EXP, _LOG, _MUL = _build_tables()
for _t in (_EXP, _LOG, _MUL):
    _t.setflags(write=False)


class CodecError(ValueError):
    """Invalid codec parameters or packet sets."""


def gf_add(a: int, b: int) -> int:
    return a ^ b


gf_sub = gf_add


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(_EXP[_LOG[a] + _LOG[b]])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(_EXP[255 - _LOG[a]])


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return int(_EXP[(_LOG[a] - _LOG[b]) % 255])


def gf_pow(a: int, k: int) -> int:
    if k == 0:
        return 1
    if a == 0:
        return 0
    return int(_EXP[(_LOG[a] * k) % 255])


@dataclass(frozen=True)
class FieldElement:
    """A single GF(256) symbol with operator overloads."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < FIELD_SIZE:
            raise ValueError(f"field element out of range: {self.value}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return FieldElement(self.value ^ other.value)

    __sub__ = __add__

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return FieldElement(gf_mul(self.value, other.value))

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        return FieldElement(gf_div(self.value, other.value))

    def inverse(self) -> "FieldElement":
        return FieldElement(gf_inv(self.value))


@dataclass(frozen=True)
class CodeParams:
    """MDS(n_packets, n_fragments) code shape for one file."""

    n_fragments: int
    n_packets: int

    def __post_init__(self):
        if self.n_fragments < 1:
            raise CodecError("n_fragments must be >= 1")
        if self.n_packets < self.n_fragments:
            raise CodecError("n_packets must be >= n_fragments")
        if self.n_packets > MAX_PACKETS:
            raise CodecError(
                f"n_packets={self.n_packets} exceeds field capacity {MAX_PACKETS}"
            )


@dataclass(frozen=True)
class Packet:
    index: int
    payload: bytes


# An uncoded fragment is just a packet with index < n_fragments.
Fragment = Packet


def _lagrange_matrix(sources: tuple[int, ...], targets: tuple[int, ...]) -> np.ndarray:
    """Coefficients C with value(t) = sum_s C[t, s] * value(s) for a polynomial
    of degree < len(sources) known at the points ``sources``."""
    k = len(sources)
    # L_s(t) = prod_{u != s} (t - u) / (s - u); subtraction is xor
    dens = []
    for s in sources:
        den = 1
        for u in sources:
            if u != s:
                den = gf_mul(den, s ^ u)
        if den == 0:
            raise RuntimeError("singular interpolation: repeated evaluation point")
        dens.append(den)
    coeffs = np.zeros((len(targets), k), dtype=np.uint8)
    for ti, t in enumerate(targets):
        if t in sources:
            coeffs[ti, sources.index(t)] = 1
            continue
        full = 1
        for u in sources:
            full = gf_mul(full, t ^ u)
        for si, s in enumerate(sources):
            coeffs[ti, si] = gf_div(full, gf_mul(t ^ s, dens[si]))
    return coeffs


@lru_cache(maxsize=4096)
def _cached_lagrange(sources: tuple[int, ...], targets: tuple[int, ...]) -> np.ndarray:
    m = _lagrange_matrix(sources, targets)
    m.setflags(write=False)
    return m


def _combine(coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """GF(256) matrix product coeffs (t x k) @ rows (k x L)."""
    out = np.zeros((coeffs.shape[0], rows.shape[1]), dtype=np.uint8)
    for i in range(coeffs.shape[0]):
        acc = out[i]
        for j in range(coeffs.shape[1]):
            c = coeffs[i, j]
            if c:
                acc ^= _MUL[c][rows[j]]
    return out


def _as_payload(item) -> bytes:
    return item.payload if isinstance(item, Packet) else bytes(item)


def encode(params: CodeParams, fragments: Sequence[bytes | Packet]) -> list[Packet]:
    """Encode ``n_fragments`` equal-length fragments into ``n_packets`` packets.

    Packets ``0 .. n_fragments-1`` reproduce the fragments verbatim; any
    ``n_fragments`` of the returned packets suffice for :func:`decode`.
    """
    payloads = [_as_payload(f) for f in fragments]
    if len(payloads) != params.n_fragments:
        raise CodecError(
            f"expected {params.n_fragments} fragments, got {len(payloads)}"
        )
    length = len(payloads[0])
    if any(len(p) != length for p in payloads):
        raise CodecError("fragment length mismatch")

    rows = np.frombuffer(b"".join(payloads), dtype=np.uint8).reshape(
        params.n_fragments, length
    )
    packets = [Packet(i, payloads[i]) for i in range(params.n_fragments)]
    if params.n_packets > params.n_fragments:
        sources = tuple(range(params.n_fragments))
        targets = tuple(range(params.n_fragments, params.n_packets))
        parity = _combine(_cached_lagrange(sources, targets), rows)
        packets.extend(Packet(t, parity[i].tobytes()) for i, t in enumerate(targets))
    return packets


def decode(params: CodeParams, packets: Sequence[Packet]) -> list[bytes]:
    """Recover the source fragments from at least ``n_fragments`` packets."""
    k = params.n_fragments
    if len(packets) < k:
        raise CodecError(f"insufficient packets: need {k}, got {len(packets)}")
    indices = [p.index for p in packets]
    if len(set(indices)) != len(indices):
        raise CodecError("duplicate packet indices")
    if any(not 0 <= i < params.n_packets for i in indices):
        raise CodecError("packet index out of range")
    length = len(packets[0].payload)
    if any(len(p.payload) != length for p in packets):
        raise CodecError("packet length mismatch")

    # systematic packets first: they need no arithmetic
    chosen = sorted(packets, key=lambda p: p.index)[:k]
    sources = tuple(p.index for p in chosen)
    if sources == tuple(range(k)):
        return [p.payload for p in chosen]
    rows = np.frombuffer(b"".join(p.payload for p in chosen), dtype=np.uint8).reshape(
        k, length
    )
    out = _combine(_cached_lagrange(sources, tuple(range(k))), rows)
    return [out[i].tobytes() for i in range(k)]


def split(data: bytes, n_fragments: int) -> list[bytes]:
    """Split ``data`` into equal fragments; the length must divide evenly."""
    if n_fragments < 1 or len(data) % n_fragments:
        raise CodecError(
            f"data length {len(data)} is not a multiple of n_fragments={n_fragments}"
        )
    size = len(data) // n_fragments
    return [data[i * size:(i + 1) * size] for i in range(n_fragments)]
