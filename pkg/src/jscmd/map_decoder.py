"""MAP sequence decoding as a longest path in the stage x codeword trellis.

The exact decoder scans every transition (O(L^2) per stage). When the
log-transition matrix is Monge, each stage's candidate matrix is totally
monotone and its row maxima are found with SMAWK in O(L) lookups.

Ties are broken toward the smallest codeword index everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from jscmd.channel import Channel, ReceivedSequence, stage_loglik
from jscmd.mdq import MdqCodebook
from jscmd.source_model import MarkovSourceModel


class InfeasibleObservation(ValueError):
    """Every path has probability zero given the observations."""


class NotMonge(ValueError):
    pass


@dataclass
class DecodeStats:
    """Work counters: transition candidates scanned and start edges evaluated."""

    transition_candidates: int = 0
    start_edges: int = 0


class MongeCheck(NamedTuple):
    ok: bool
    violation: tuple[int, int, int, int] | None = None


def check_monge(model: MarkovSourceModel, exhaustive: bool = False, tol: float = 1e-9) -> MongeCheck:
    """Test log P(a|b') + log P(a'|b) <= log P(a|b) + log P(a'|b') for a < a', b < b'.

    By default only adjacent pairs (a' = a + 1, b' = b + 1) are checked, which is
    equivalent for finite matrices. ``exhaustive`` scans every quadruple.
    The reported violation is (a, a', b, b').
    """
    S = model.log_transition.T  # S[a, b] = log P(a | b)
    L = S.shape[0]
    if not exhaustive:
        lhs = S[:-1, 1:] + S[1:, :-1]
        rhs = S[:-1, :-1] + S[1:, 1:]
        bad = _violates(lhs, rhs, tol)
        if not bad.any():
            return MongeCheck(True)
        a, b = np.argwhere(bad)[0]
        return MongeCheck(False, (int(a), int(a) + 1, int(b), int(b) + 1))
    a, a2, b, b2 = np.ogrid[:L, :L, :L, :L]
    lhs = S[a, b2] + S[a2, b]
    rhs = S[a, b] + S[a2, b2]
    bad = _violates(lhs, rhs, tol) & (a < a2) & (b < b2)
    if not bad.any():
        return MongeCheck(True)
    return MongeCheck(False, tuple(int(v) for v in np.argwhere(bad)[0]))


def _violates(lhs, rhs, tol):
    with np.errstate(invalid="ignore"):
        return ~(lhs <= rhs + tol) & ~((lhs == -np.inf) & (rhs == -np.inf))


def smawk(rows: Sequence[int], cols: Sequence[int], lookup: Callable[[int, int], float]) -> dict[int, int]:
    """Leftmost row maxima of a totally monotone matrix given implicitly by ``lookup``.

    The matrix must satisfy the Monge-type condition under which leftmost row
    maxima move right (weakly) as the row index grows. Returns {row: column}.
    """
    if not rows:
        return {}
    stack: list[int] = []
    for c in cols:
        while stack:
            r = rows[len(stack) - 1]
            if lookup(r, stack[-1]) >= lookup(r, c):
                break
            stack.pop()
        if len(stack) < len(rows):
            stack.append(c)
    cols = stack
    result = smawk(rows[1::2], cols, lookup)
    j = 0
    for i in range(0, len(rows), 2):
        r = rows[i]
        stop = result[rows[i + 1]] if i + 1 < len(rows) else cols[-1]
        best_col = cols[j]
        best = lookup(r, best_col)
        while cols[j] != stop:
            j += 1
            v = lookup(r, cols[j])
            if v > best:
                best, best_col = v, cols[j]
        result[r] = best_col
    return result


def row_maxima_dense(rows: Sequence[int], cols: Sequence[int],
                     lookup: Callable[[int, int], float]) -> dict[int, int]:
    """Leftmost row maxima by scanning every entry; the reference for :func:`smawk`."""
    result = {}
    for r in rows:
        best_col = cols[0]
        best = lookup(r, best_col)
        for c in cols[1:]:
            v = lookup(r, c)
            if v > best:
                best, best_col = v, c
        result[r] = best_col
    return result


def longest_path(model: MarkovSourceModel, loglik: np.ndarray,
                 stats: DecodeStats | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact DP over the trellis for one or a batch of sequences.

    ``loglik`` is (..., N, L). Returns the decoded indices (..., N) and the
    objective value of the winning path (...). An all -inf stage leaves the
    path at index 0 with objective -inf.
    """
    loglik = np.asarray(loglik, dtype=float)
    N, L = loglik.shape[-2:]
    log_t = model.log_transition.T  # [a, b]
    back = np.zeros(loglik.shape, dtype=np.int64)
    w = model.log_prior + loglik[..., 0, :]
    for n in range(1, N):
        cand = w[..., None, :] + log_t
        best = np.argmax(cand, axis=-1)
        back[..., n, :] = best
        w = np.take_along_axis(cand, best[..., None], axis=-1)[..., 0] + loglik[..., n, :]
    if stats is not None:
        batch = int(np.prod(loglik.shape[:-2], dtype=np.int64))
        stats.start_edges += batch * L
        stats.transition_candidates += batch * (N - 1) * L * L
    return _trace_back(w, back)


def _trace_back(w, back):
    N = back.shape[-2]
    path = np.empty(back.shape[:-1], dtype=np.int64)
    path[..., N - 1] = np.argmax(w, axis=-1)
    for n in range(N - 1, 0, -1):
        path[..., n - 1] = np.take_along_axis(back[..., n, :], path[..., n:n + 1], axis=-1)[..., 0]
    return path, np.max(w, axis=-1)


def longest_path_fast(model: MarkovSourceModel, loglik: np.ndarray,
                      stats: DecodeStats | None = None,
                      row_maxima: Callable = smawk) -> tuple[np.ndarray, float]:
    """Same result as :func:`longest_path` for one sequence, via per-stage SMAWK.

    Stage matrices are never materialized; entries are evaluated on demand.
    ``stats.transition_candidates`` counts the lookups actually made.
    Passing ``row_maxima=row_maxima_dense`` gives the quadratic scan over the
    same lookup, for like-for-like timing.
    """
    loglik = np.asarray(loglik, dtype=float)
    N, L = loglik.shape
    log_t = model.log_transition.tolist()  # log_t[b][a]
    idx = list(range(L))
    back = np.zeros((N, L), dtype=np.int64)
    w = (model.log_prior + loglik[0]).tolist()
    calls = 0

    def lookup(a: int, b: int) -> float:
        nonlocal calls
        calls += 1
        return w[b] + log_t[b][a]

    for n in range(1, N):
        arg = row_maxima(idx, idx, lookup)
        best = [arg[a] for a in idx]
        back[n] = best
        row = loglik[n].tolist()
        w = [w[b] + log_t[b][a] + row[a] for a, b in enumerate(best)]
    if stats is not None:
        stats.start_edges += L
        stats.transition_candidates += calls
    path, score = _trace_back(np.array(w), back)
    return path, float(score)


def _check_feasible(score):
    if np.any(np.asarray(score) == -np.inf):
        raise InfeasibleObservation("no codeword sequence is consistent with the observations")


def map_decode(model: MarkovSourceModel, codebook: MdqCodebook, channels: Sequence[Channel],
               received: ReceivedSequence, stats: DecodeStats | None = None) -> np.ndarray:
    """MAP estimate of the central index sequence from whatever descriptions arrived."""
    loglik = stage_loglik(codebook, channels, received)
    path, score = longest_path(model, loglik, stats)
    _check_feasible(score)
    return path


def map_decode_fast(model: MarkovSourceModel, codebook: MdqCodebook, channels: Sequence[Channel],
                    received: ReceivedSequence, stats: DecodeStats | None = None) -> np.ndarray:
    """:func:`map_decode` with SMAWK row maxima; requires a Monge log-transition matrix."""
    check = check_monge(model)
    if not check.ok:
        raise NotMonge(f"log-transition matrix violates the Monge condition at {check.violation}")
    loglik = stage_loglik(codebook, channels, received)
    path, score = longest_path_fast(model, loglik, stats)
    _check_feasible(score)
    return path


def path_objective(model: MarkovSourceModel, loglik: np.ndarray, path) -> float:
    """Log posterior (up to a constant) of one codeword sequence."""
    path = np.asarray(path)
    total = model.log_prior[path[0]] + loglik[0, path[0]]
    for n in range(1, len(path)):
        total += model.log_transition[path[n - 1], path[n]] + loglik[n, path[n]]
    return float(total)
