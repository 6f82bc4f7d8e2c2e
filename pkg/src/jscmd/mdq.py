"""Fixed-rate multiple description scalar quantizer.

Central quantization, index assignment, natural-binary bit mapping and the
symbol-wise hard-decision decoder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from jscmd.source_model import log_normal_interval, validate_boundaries


class TotalErasure(Exception):
    """No description of a position survived; callers substitute the prior mean."""


def cell_centroids(boundaries) -> np.ndarray:
    """Conditional means of the standard normal over each cell."""
    b = np.asarray(boundaries, dtype=float)
    lo, hi = b[:-1], b[1:]
    pdf = np.exp(-0.5 * np.square(b)) / np.sqrt(2 * np.pi)
    mass = np.exp(log_normal_interval(lo, hi))
    return (pdf[:-1] - pdf[1:]) / mass


def uniform_boundaries(n_cells: int, cell_width: float | None = None) -> np.ndarray:
    """Boundaries of a uniform quantizer with ``n_cells - 2`` bounded cells centred on 0.

    The default width makes the bounded cells span [-3.5, 3.5].
    """
    if n_cells < 2:
        raise ValueError("need at least two cells")
    interior = n_cells - 2
    if cell_width is None:
        cell_width = 7.0 / interior if interior else 1.0
    # (i - c) is exact, so mirrored boundaries are exact negatives of each other
    edges = (np.arange(n_cells - 1) - interior / 2) * cell_width
    return np.concatenate([[-np.inf], edges, [np.inf]])


@dataclass(frozen=True)
class MdqCodebook:
    """Central codebook, K side codebooks and the index assignment between them.

    ``assignment[l, k]`` is the side index lambda_k of central cell ``l``.
    """

    L: int
    K: int
    side_sizes: tuple[int, ...]
    boundaries: np.ndarray
    centroids: np.ndarray
    side_centroids: tuple[np.ndarray, ...]
    assignment: np.ndarray
    bits_per_description: tuple[int, ...]

    def __post_init__(self):
        a = self.assignment
        if a.shape != (self.L, self.K):
            raise ValueError(f"assignment must be {self.L}x{self.K}")
        if self.L > math.prod(self.side_sizes):
            raise ValueError("L exceeds the product of side codebook sizes")
        if np.any(a < 0) or np.any(a >= np.asarray(self.side_sizes)[None, :]):
            raise ValueError("side index out of range")
        if len({tuple(row) for row in a.tolist()}) != self.L:
            raise ValueError("index assignment is not injective")

    @classmethod
    def from_assignment(cls, boundaries, assignment, side_sizes=None) -> "MdqCodebook":
        """Build a codebook from central boundaries and an L x K assignment table.

        Centroids are conditional means under the unit Gaussian; a side centroid is
        the mean over the union of central cells sharing that side index.
        """
        b = validate_boundaries(boundaries)
        a = np.asarray(assignment, dtype=np.int64)
        L = b.size - 1
        if a.ndim != 2 or a.shape[0] != L:
            raise ValueError(f"assignment must have {L} rows")
        K = a.shape[1]
        if side_sizes is None:
            side_sizes = tuple(int(a[:, k].max()) + 1 for k in range(K))
        side_sizes = tuple(int(s) for s in side_sizes)
        centroids = cell_centroids(b)
        mass = np.exp(log_normal_interval(b[:-1], b[1:]))
        side_centroids = []
        for k in range(K):
            m = np.bincount(a[:, k], weights=mass, minlength=side_sizes[k])
            first = np.bincount(a[:, k], weights=mass * centroids, minlength=side_sizes[k])
            with np.errstate(invalid="ignore", divide="ignore"):
                side_centroids.append(np.where(m > 0, first / m, 0.0))
        bits = tuple(max(1, math.ceil(math.log2(s))) for s in side_sizes)
        return cls(L, K, side_sizes, b, centroids, tuple(side_centroids), a, bits)

    def cell_probabilities(self) -> np.ndarray:
        """Unit-Gaussian mass of each central cell."""
        p = np.exp(log_normal_interval(self.boundaries[:-1], self.boundaries[1:]))
        return p / p.sum()

    @property
    def redundancy(self) -> float:
        return 1.0 - math.log2(self.L) / sum(math.log2(s) for s in self.side_sizes)

    def side_bits(self, k: int) -> np.ndarray:
        """Natural-binary codewords of side codebook k, MSB first: (L_k, B_k) array of 0/1."""
        B = self.bits_per_description[k]
        idx = np.arange(self.side_sizes[k])
        return ((idx[:, None] >> np.arange(B - 1, -1, -1)[None, :]) & 1).astype(np.int8)

    def inverse_table(self) -> np.ndarray:
        """Flat lookup from the mixed-radix side tuple to the central index (-1 if unused)."""
        table = np.full(math.prod(self.side_sizes), -1, dtype=np.int64)
        flat = np.ravel_multi_index(tuple(self.assignment.T), self.side_sizes)
        table[flat] = np.arange(self.L)
        return table

    def to_json(self) -> str:
        return json.dumps({
            "L": self.L,
            "K": self.K,
            "side_sizes": list(self.side_sizes),
            "boundaries": [_encode_float(v) for v in self.boundaries],
            "centroids": self.centroids.tolist(),
            "side_centroids": [c.tolist() for c in self.side_centroids],
            "assignment": self.assignment.tolist(),
            "bits_per_description": list(self.bits_per_description),
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MdqCodebook":
        d = json.loads(text)
        return cls(
            L=d["L"], K=d["K"], side_sizes=tuple(d["side_sizes"]),
            boundaries=np.array([float(v) for v in d["boundaries"]]),
            centroids=np.array(d["centroids"], dtype=float),
            side_centroids=tuple(np.array(c, dtype=float) for c in d["side_centroids"]),
            assignment=np.array(d["assignment"], dtype=np.int64),
            bits_per_description=tuple(d["bits_per_description"]),
        )


def _encode_float(v: float):
    # JSON has no infinities; keep them as strings float() understands
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def staircase_assignment(side_size: int, spread: int, n_cells: int | None = None) -> np.ndarray:
    """Two-description staircase index assignment.

    ``spread`` counts the diagonals of the side_size x side_size matrix that are
    filled: the main one, then alternately the next upper and lower diagonal.
    Cells are numbered along anti-diagonals (i + j), upper entries first, and the
    enumeration is optionally cut after ``n_cells`` cells.
    """
    if spread < 1:
        raise ValueError("spread must be >= 1")
    if side_size < 2:
        raise ValueError("side_size must be >= 2")
    upper, lower = spread // 2, (spread - 1) // 2
    cells = [(i, j) for i in range(side_size) for j in range(side_size)
             if -lower <= j - i <= upper]
    cells.sort(key=lambda ij: (ij[0] + ij[1], ij[0]))
    if n_cells is not None:
        if n_cells > len(cells):
            raise ValueError(
                f"{spread} diagonals of a {side_size}x{side_size} matrix hold only {len(cells)} cells")
        if n_cells < 2:
            raise ValueError("need at least two central cells")
        cells = cells[:n_cells]
    return np.array(cells, dtype=np.int64)


def build_2dsq(side_size: int = 8, spread: int = 3, n_cells: int | None = 21,
               cell_width: float | None = None) -> MdqCodebook:
    """Uniform two-description scalar quantizer with a staircase index assignment."""
    assignment = staircase_assignment(side_size, spread, n_cells)
    if len(assignment) > side_size * side_size:
        raise ValueError("diagonal pattern yields more cells than the side matrix holds")
    boundaries = uniform_boundaries(len(assignment), cell_width)
    return MdqCodebook.from_assignment(boundaries, assignment, (side_size, side_size))


def quantize(codebook: MdqCodebook, samples) -> np.ndarray:
    """Central cell index of each sample; cells are half-open [b_l, b_{l+1})."""
    return np.searchsorted(codebook.boundaries[1:-1], np.asarray(samples, dtype=float), side="right")


def encode(codebook: MdqCodebook, samples) -> tuple[np.ndarray, np.ndarray]:
    """Central indices ``x`` and the (K, ...) array of side indices lambda_k(x)."""
    x = quantize(codebook, samples)
    streams = np.moveaxis(codebook.assignment[x], -1, 0)
    return x, streams


def to_bits(codebook: MdqCodebook, k: int, indices) -> np.ndarray:
    """Side indices -> (..., B_k) bit array."""
    return codebook.side_bits(k)[np.asarray(indices)]


def from_bits(bits) -> np.ndarray:
    """(..., B) 0/1 bits (MSB first) -> integer index."""
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits @ weights


def hard_decode(codebook: MdqCodebook, received) -> float:
    """Reconstruct one position from the side indices that arrived.

    ``received`` has one entry per description, ``None`` marking a lost one. A
    complete valid tuple maps back to its central centroid; anything else is
    reconstructed as the mean of the received side centroids.
    """
    if len(received) != codebook.K:
        raise ValueError(f"expected {codebook.K} entries")
    present = [(k, int(i)) for k, i in enumerate(received) if i is not None]
    if not present:
        raise TotalErasure
    if len(present) == codebook.K:
        flat = np.ravel_multi_index(tuple(i for _, i in present), codebook.side_sizes)
        l = codebook.inverse_table()[flat]
        if l >= 0:
            return float(codebook.centroids[l])
    return float(np.mean([codebook.side_centroids[k][i] for k, i in present]))


def hard_decode_streams(codebook: MdqCodebook, side_indices) -> np.ndarray:
    """Vectorized :func:`hard_decode` over (K, ...) side indices with -1 for lost entries.

    Total erasures decode to 0, the prior mean.
    """
    idx = np.asarray(side_indices, dtype=np.int64)
    K = codebook.K
    present = idx >= 0
    total = np.zeros(idx.shape[1:])
    for k in range(K):
        total += np.where(present[k], codebook.side_centroids[k][np.where(present[k], idx[k], 0)], 0.0)
    count = present.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(count > 0, total / np.maximum(count, 1), 0.0)
    full = count == K
    if np.any(full):
        safe = np.where(present, idx, 0)
        flat = np.ravel_multi_index(tuple(safe), codebook.side_sizes)
        central = codebook.inverse_table()[flat]
        valid = full & (central >= 0)
        out = np.where(valid, codebook.centroids[np.maximum(central, 0)], out)
    return out
