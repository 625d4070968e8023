"""Matrix-valued Brownian increments and reproducible per-path RNG streams.

Stream derivation: the 64-bit key of stream ``i`` under master seed ``s`` is
``splitmix64_mix(s XOR (GOLDEN * i mod 2**64))``.  ``GOLDEN`` is odd and the
SplitMix64 finalizer is a bijection on 64-bit words, so keys are distinct for
distinct indices below 2**64.  The key seeds a numpy ``PCG64`` generator.
"""
from dataclasses import dataclass, field

import numpy as np

from .matcore import embed_complex, embed_quaternion

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

GOE, GUE, GSE = "GOE", "GUE", "GSE"
GINIBRE = "Ginibre"
SKEW = "SkewSymmetric"
DIAGONAL = "DiagonalBM"
INCREMENT_KINDS = (GOE, GUE, GSE, GINIBRE, SKEW, DIAGONAL)

BETA_TO_KIND = {1: GOE, 2: GUE, 4: GSE}
KIND_FIELD = {GOE: "real", GUE: "complex", GSE: "quaternion"}


def splitmix64_mix(x):
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(master_seed, index):
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    return splitmix64_mix((master_seed & MASK64) ^ ((GOLDEN * index) & MASK64))


@dataclass
class RngStream:
    master_seed: int
    stream_index: int
    key: int = field(init=False)
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.key = stream_key(self.master_seed, self.stream_index)
        self.generator = np.random.Generator(np.random.PCG64(self.key))

    def normal(self, size):
        return self.generator.standard_normal(size)

    def raw(self, count):
        return self.generator.bit_generator.random_raw(count)


def derive_stream(master_seed, path_index):
    return RngStream(master_seed, path_index)


def n_normals(kind, n):
    """Number of standard normals consumed by one increment."""
    if kind in (GOE, GUE, GSE):
        comps = {GOE: 1, GUE: 2, GSE: 4}[kind]
        return n + comps * n * (n - 1) // 2
    if kind == GINIBRE:
        return n * n
    if kind == SKEW:
        return n * (n - 1) // 2
    if kind == DIAGONAL:
        return n
    raise ValueError(f"unknown increment kind {kind!r}")


def matrix_dim(kind, n):
    if kind == GUE:
        return 2 * n
    if kind == GSE:
        return 4 * n
    return n


def build_increment(kind, n, z):
    """Unit-step increment (h = 1) from standard normals ``z`` of shape (..., n_normals).

    GOE/GUE/GSE: diagonal entries N(0, 1); each real component of an
    off-diagonal entry N(0, 1/2).  Ginibre: iid N(0, 1).  SkewSymmetric:
    N(0, 1) above the diagonal, minus its transpose.  DiagonalBM: N(0, 1)
    on the diagonal.
    """
    z = np.asarray(z, dtype=float)
    batch = z.shape[:-1]
    if z.shape[-1] != n_normals(kind, n):
        raise ValueError("wrong number of normals for this increment")
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    if kind == GINIBRE:
        return z.reshape(batch + (n, n))
    if kind == DIAGONAL:
        out = np.zeros(batch + (n, n))
        out[..., np.arange(n), np.arange(n)] = z
        return out
    if kind == SKEW:
        up = np.zeros(batch + (n, n))
        up[..., iu[0], iu[1]] = z
        return up - np.swapaxes(up, -1, -2)

    def sym(diag, offs):
        out = np.zeros(batch + (n, n))
        if diag is not None:
            out[..., np.arange(n), np.arange(n)] = diag
        out[..., iu[0], iu[1]] = offs
        out[..., iu[1], iu[0]] = offs
        return out

    def skew(offs):
        out = np.zeros(batch + (n, n))
        out[..., iu[0], iu[1]] = offs
        out[..., iu[1], iu[0]] = -offs
        return out

    half = np.sqrt(0.5)
    diag = z[..., :n]
    parts = [z[..., n + k * m:n + (k + 1) * m] * half for k in range({GOE: 1, GUE: 2, GSE: 4}[kind])]
    real_part = sym(diag, parts[0])
    if kind == GOE:
        return real_part
    if kind == GUE:
        # Hermitian: imaginary part is antisymmetric
        return embed_complex(real_part + 1j * skew(parts[1]))
    return embed_quaternion(real_part, skew(parts[1]), skew(parts[2]), skew(parts[3]))


def sample_matrix_increment(kind, n, h, stream, size=None):
    """Brownian increment over a step ``h`` for the given ensemble.

    Complex and quaternion kinds come back in their real embedding (2n resp.
    4n square).  ``size`` adds a leading batch axis.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not h > 0:
        raise ValueError("step h must be positive")
    shape = (n_normals(kind, n),) if size is None else (size, n_normals(kind, n))
    z = stream.normal(shape)
    return np.sqrt(h) * build_increment(kind, n, z)


class PathNormals:
    """Per-path buffered standard normals.

    Each path owns one ``RngStream`` and consumes it sequentially, so the
    numbers a path sees do not depend on how paths are batched together.
    """

    def __init__(self, streams, block=4096):
        self.streams = list(streams)
        self.block = block
        p = len(self.streams)
        self.buf = np.empty((p, block))
        for i, s in enumerate(self.streams):
            self.buf[i] = s.normal(block)
        self.cursor = np.zeros(p, dtype=np.int64)

    def draw(self, k, rows=None):
        """``k`` fresh normals for each path in ``rows`` (default: all)."""
        if k > self.block:
            raise ValueError("request larger than the buffer block")
        rows = np.arange(len(self.streams)) if rows is None else np.asarray(rows)
        need = rows[self.cursor[rows] + k > self.block]
        for i in need:
            keep = self.buf[i, self.cursor[i]:].copy()
            self.buf[i, :keep.size] = keep
            self.buf[i, keep.size:] = self.streams[i].normal(self.block - keep.size)
            self.cursor[i] = 0
        idx = self.cursor[rows][:, None] + np.arange(k)
        out = self.buf[rows[:, None], idx]
        self.cursor[rows] += k
        return out
