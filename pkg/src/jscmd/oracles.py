"""Exhaustive-enumeration oracles and random tiny instances.

Every function here scores all L^N (or M^N L^N) sequences explicitly as a
dense tensor. None of them shares code with the decoders they check.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from jscmd.channel import EecChannel, ReceivedSequence, stage_loglik, transmit_streams
from jscmd.hmm_estimator import HmmModel
from jscmd.mdq import MdqCodebook
from jscmd.source_model import MarkovSourceModel


def _axis_term(values, axes, ndim):
    shape = [1] * ndim
    for ax, size in zip(axes, values.shape):
        shape[ax] = size
    return values.reshape(shape)


def sequence_scores(model: MarkovSourceModel, loglik: np.ndarray) -> np.ndarray:
    """Log posterior (unnormalized) of every codeword sequence, as an L x ... x L tensor."""
    N, L = loglik.shape
    total = _axis_term(model.log_prior + loglik[0], [0], N)
    for n in range(1, N):
        total = total + _axis_term(model.log_transition + loglik[n][None, :], [n - 1, n], N)
    return total


def brute_map(model: MarkovSourceModel, loglik: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximum objective and the first (lexicographically smallest) maximizing sequence."""
    scores = sequence_scores(model, loglik)
    flat = int(np.argmax(scores))
    return float(scores.ravel()[flat]), np.array(np.unravel_index(flat, scores.shape))


def brute_marginals(model: MarkovSourceModel, loglik: np.ndarray) -> np.ndarray:
    """P(x_n = l | y) by summing the joint over all other positions."""
    scores = sequence_scores(model, loglik)
    p = np.exp(scores - scores.max())
    N = loglik.shape[0]
    out = np.stack([p.sum(axis=tuple(a for a in range(N) if a != n)) for n in range(N)])
    return out / out.sum(axis=1, keepdims=True)


def brute_hmm(hmm: HmmModel, loglik: np.ndarray) -> float:
    """max over (z, x) of the joint log posterior; axes are z_1..z_N then x_1..x_N."""
    N, L = loglik.shape
    nd = 2 * N
    log_ps, log_init, log_po, log_po1 = hmm.logs()
    total = _axis_term(log_init, [0], nd) + _axis_term(log_po1 + loglik[0][None, :], [0, N], nd)
    for n in range(1, N):
        total = total + _axis_term(log_ps, [n - 1, n], nd)
        total = total + _axis_term(log_po + loglik[n][None, None, :], [n - 1, n, N + n], nd)
    return float(total.max())


@dataclass
class Instance:
    model: MarkovSourceModel
    codebook: MdqCodebook
    channels: list
    received: ReceivedSequence
    x: np.ndarray

    @property
    def loglik(self) -> np.ndarray:
        return stage_loglik(self.codebook, self.channels, self.received)


def random_stochastic(rng, shape, zero_rate=0.0):
    p = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
    if zero_rate:
        p = np.where(rng.random(p.shape) < zero_rate, 0.0, p)
        # keep at least one positive entry per row
        p[..., 0] += (p.sum(axis=-1) == 0)
        p = p / p.sum(axis=-1, keepdims=True)
    return p


def random_codebook(rng, L: int, K: int = 2) -> MdqCodebook:
    side = int(np.ceil(L ** (1.0 / K) - 1e-9)) + int(rng.integers(0, 2))
    side = max(side, 2)
    pairs = np.array(list(product(range(side), repeat=K)))
    pick = pairs[np.sort(rng.choice(len(pairs), size=L, replace=False))]
    edges = np.sort(rng.normal(size=L - 1) * 1.5)
    edges += np.arange(L - 1) * 1e-3  # strictly increasing
    return MdqCodebook.from_assignment(np.concatenate([[-np.inf], edges, [np.inf]]), pick, (side,) * K)


def random_channels(rng, K: int = 2) -> list[EecChannel]:
    chans = []
    for _ in range(K):
        pe = 0.0 if rng.random() < 0.2 else float(rng.uniform(0, 0.6))
        pc = 0.0 if rng.random() < 0.2 else float(rng.uniform(0, 0.3))
        chans.append(EecChannel(pe, pc))
    return chans


def sample_chain(rng, prior, transition, n: int) -> np.ndarray:
    x = np.empty(n, dtype=np.int64)
    x[0] = rng.choice(len(prior), p=prior)
    for i in range(1, n):
        x[i] = rng.choice(len(prior), p=transition[x[i - 1]])
    return x


def random_instance(rng, N: int, L: int, K: int = 2, zero_rate: float = 0.0) -> Instance:
    prior = random_stochastic(rng, (L,))
    transition = random_stochastic(rng, (L, L), zero_rate)
    model = MarkovSourceModel.from_probabilities(prior, transition)
    codebook = random_codebook(rng, L, K)
    channels = random_channels(rng, K)
    x = sample_chain(rng, prior, transition, N)
    side = codebook.assignment[x].T
    seeds = [int(s) for s in rng.integers(0, 2**32, size=K)]
    received = transmit_streams(codebook, channels, side, seeds)
    return Instance(model, codebook, channels, received, x)


def random_hmm(rng, M: int, L: int, zero_rate: float = 0.0) -> HmmModel:
    return HmmModel(random_stochastic(rng, (M, M), zero_rate), random_stochastic(rng, (M,)),
                    random_stochastic(rng, (M, M, L), zero_rate), random_stochastic(rng, (M, L), zero_rate))


def random_hmm_instance(rng, N: int, M: int, L: int, K: int = 2) -> tuple[HmmModel, np.ndarray]:
    """Random HMM and the stage log-likelihoods of a transmitted codeword path it generated."""
    hmm = random_hmm(rng, M, L)
    z = sample_chain(rng, hmm.initial, hmm.transition, N)
    x = np.empty(N, dtype=np.int64)
    x[0] = rng.choice(L, p=hmm.state_observation[z[0]])
    for n in range(1, N):
        x[n] = rng.choice(L, p=hmm.observation[z[n - 1], z[n]])
    codebook = random_codebook(rng, L, K)
    channels = random_channels(rng, K)
    seeds = [int(s) for s in rng.integers(0, 2**32, size=K)]
    received = transmit_streams(codebook, channels, codebook.assignment[x].T, seeds)
    return hmm, stage_loglik(codebook, channels, received)
