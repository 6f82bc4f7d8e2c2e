"""Hidden Markov state estimation from multiple noisy descriptions of the HMM output.

The observation law is kept at central-codeword granularity:
``observation[s, z, x]`` is the probability that the quantized output is
codeword x on the transition s -> z.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from jscmd.channel import Channel, ReceivedSequence, hard_side_indices, stage_loglik
from jscmd.map_decoder import DecodeStats, InfeasibleObservation
from jscmd.mdq import MdqCodebook, hard_decode_streams, quantize
from jscmd.source_model import log_normal_interval, validate_boundaries


def _stochastic(a, axis=-1) -> bool:
    return bool(np.all(a >= 0) and np.all(np.abs(a.sum(axis=axis) - 1.0) <= 1e-9))


@dataclass(frozen=True)
class HmmModel:
    """State dynamics plus codeword-level observation laws.

    ``initial`` doubles as the state marginal P_S(z) used by the memoryless
    estimators; ``state_observation[z, x]`` is P_O(x | z), used at the first
    stage and by the memoryless estimators.
    """

    transition: np.ndarray
    initial: np.ndarray
    observation: np.ndarray
    state_observation: np.ndarray

    def __post_init__(self):
        M = self.initial.size
        L = self.observation.shape[-1]
        if self.transition.shape != (M, M) or self.observation.shape != (M, M, L) \
                or self.state_observation.shape != (M, L):
            raise ValueError("inconsistent HMM array shapes")
        for name in ("transition", "initial", "observation", "state_observation"):
            if not _stochastic(getattr(self, name)):
                raise ValueError(f"{name} is not stochastic")

    @property
    def M(self) -> int:
        return self.initial.size

    @property
    def L(self) -> int:
        return self.observation.shape[-1]

    def logs(self):
        with np.errstate(divide="ignore"):
            return (np.log(self.transition), np.log(self.initial),
                    np.log(self.observation), np.log(self.state_observation))

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k).tolist() for k in
                           ("transition", "initial", "observation", "state_observation")}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HmmModel":
        d = json.loads(text)
        return cls(*(np.array(d[k], dtype=float) for k in
                     ("transition", "initial", "observation", "state_observation")))


def stationary(transition) -> np.ndarray:
    vals, vecs = np.linalg.eig(np.asarray(transition).T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


@dataclass(frozen=True)
class GaussianHmm:
    """Continuous HMM with a Gaussian output per destination state.

    ``sticky`` builds the transition matrix rho * I + (1 - rho) / M.
    """

    transition: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def sticky(cls, rho: float, means, stds) -> "GaussianHmm":
        means = np.asarray(means, dtype=float)
        M = means.size
        T = rho * np.eye(M) + (1.0 - rho) / M
        return cls(T, means, np.broadcast_to(np.asarray(stds, dtype=float), means.shape).copy())

    @property
    def M(self) -> int:
        return self.means.size

    def model(self, boundaries) -> HmmModel:
        b = validate_boundaries(boundaries)
        lo = (b[None, :-1] - self.means[:, None]) / self.stds[:, None]
        hi = (b[None, 1:] - self.means[:, None]) / self.stds[:, None]
        per_state = np.exp(log_normal_interval(lo, hi))
        per_state /= per_state.sum(axis=1, keepdims=True)
        obs = np.broadcast_to(per_state[None, :, :], (self.M, self.M, b.size - 1)).copy()
        return HmmModel(np.asarray(self.transition, dtype=float), stationary(self.transition), obs, per_state)

    def sample(self, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """State path and real-valued outputs, the first state drawn from the stationary law."""
        rng = np.random.default_rng(seed)
        cdf = np.cumsum(self.transition, axis=1)
        u = rng.random(n)
        z = np.empty(n, dtype=np.int64)
        z[0] = min(np.searchsorted(np.cumsum(stationary(self.transition)), u[0], side="right"), self.M - 1)
        for i in range(1, n):
            z[i] = min(np.searchsorted(cdf[z[i - 1]], u[i], side="right"), self.M - 1)
        chi = self.means[z] + self.stds[z] * rng.standard_normal(n)
        return z, chi


def hmm_viterbi(hmm: HmmModel, loglik: np.ndarray,
                stats: DecodeStats | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Joint MAP (states, codewords) for one sequence (N, L) or a batch (..., N, L).

    Returns (z, x, objective). Ties go to the smallest state, then the smallest codeword.
    """
    loglik = np.asarray(loglik, dtype=float)
    N, L = loglik.shape[-2:]
    M = hmm.M
    log_ps, log_init, log_po, log_po1 = hmm.logs()
    batch = loglik.shape[:-2]
    back_s = np.zeros(batch + (N, M), dtype=np.int64)
    back_x = np.zeros(batch + (N, M), dtype=np.int64)

    first = log_po1 + loglik[..., 0, None, :]  # (..., z, x)
    back_x[..., 0, :] = np.argmax(first, axis=-1)
    w = log_init + np.max(first, axis=-1)
    for n in range(1, N):
        # xi[..., s, z] = max_x log P_O(x | s, z) + loglik[n, x]
        inner = log_po + loglik[..., n, None, None, :]
        x_arg = np.argmax(inner, axis=-1)
        xi = np.take_along_axis(inner, x_arg[..., None], axis=-1)[..., 0]
        cand = w[..., :, None] + log_ps + xi  # (..., s, z)
        s_arg = np.argmax(cand, axis=-2)  # (..., z)
        back_s[..., n, :] = s_arg
        back_x[..., n, :] = np.take_along_axis(x_arg, s_arg[..., None, :], axis=-2)[..., 0, :]
        w = np.take_along_axis(cand, s_arg[..., None, :], axis=-2)[..., 0, :]
    if stats is not None:
        count = int(np.prod(batch, dtype=np.int64))
        stats.start_edges += count * M * L
        stats.transition_candidates += count * (N - 1) * M * M * L

    z = np.empty(batch + (N,), dtype=np.int64)
    x = np.empty(batch + (N,), dtype=np.int64)
    z[..., N - 1] = np.argmax(w, axis=-1)
    for n in range(N - 1, -1, -1):
        zn = z[..., n:n + 1]
        x[..., n] = np.take_along_axis(back_x[..., n, :], zn, axis=-1)[..., 0]
        if n > 0:
            z[..., n - 1] = np.take_along_axis(back_s[..., n, :], zn, axis=-1)[..., 0]
    return z, x, np.max(w, axis=-1)


def joint_objective(hmm: HmmModel, loglik: np.ndarray, z, x) -> float:
    """Log joint posterior (up to a constant) of one (state, codeword) sequence pair."""
    log_ps, log_init, log_po, log_po1 = hmm.logs()
    total = log_init[z[0]] + log_po1[z[0], x[0]] + loglik[0, x[0]]
    for n in range(1, len(z)):
        total += log_ps[z[n - 1], z[n]] + log_po[z[n - 1], z[n], x[n]] + loglik[n, x[n]]
    return float(total)


def hmm_map_estimate(hmm: HmmModel, codebook: MdqCodebook, channels: Sequence[Channel],
                     received: ReceivedSequence, stats: DecodeStats | None = None):
    """Exact joint MAP estimate (z, x) of the state and codeword sequences."""
    z, x, score = hmm_viterbi(hmm, stage_loglik(codebook, channels, received), stats)
    if score == -np.inf:
        raise InfeasibleObservation("no state/codeword sequence is consistent with the observations")
    return z, x


def memoryless_states(hmm: HmmModel, x: np.ndarray, lost=None) -> np.ndarray:
    """argmax_z P_S(z) P_O(x_n | z) per position; lost positions fall back to argmax P_S."""
    _, log_init, _, log_po1 = hmm.logs()
    scores = log_init + log_po1.T[np.asarray(x)]  # (..., M)
    z = np.argmax(scores, axis=-1)
    if lost is not None:
        z = np.where(lost, int(np.argmax(log_init)), z)
    return z


def cheapest_codewords(codebook: MdqCodebook, received: ReceivedSequence) -> tuple[np.ndarray, np.ndarray]:
    """Hard-decision codeword per position and the mask of totally erased positions."""
    side = hard_side_indices(codebook, received)
    lost = np.all(side < 0, axis=0)
    return quantize(codebook, hard_decode_streams(codebook, side)), lost


def hmm_estimate_cheapest(hmm: HmmModel, codebook: MdqCodebook, received: ReceivedSequence) -> np.ndarray:
    """Hard-decision decode each position, then pick the most probable state for that codeword."""
    x, lost = cheapest_codewords(codebook, received)
    return memoryless_states(hmm, x, lost)


def mid_codewords(loglik: np.ndarray) -> np.ndarray:
    """Channel-aware codeword decision: argmax_x sum_k log P_k(y_{k,n} | lambda_k(x))."""
    return np.argmax(loglik, axis=-1)


def hmm_estimate_mid(hmm: HmmModel, codebook: MdqCodebook, channels: Sequence[Channel],
                     received: ReceivedSequence) -> np.ndarray:
    """Maximum-likelihood codeword per position, then the most probable state for it."""
    x = mid_codewords(stage_loglik(codebook, channels, received))
    return memoryless_states(hmm, x)
