"""Memoryless diversity channels: simulation and codeword likelihoods.

EEC observations are int8 arrays over {0, 1, ERASED}; AWGN observations are
real BPSK samples. All likelihoods are natural-log probabilities, with
``-inf`` standing for an impossible observation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from jscmd.mdq import MdqCodebook, from_bits, to_bits

ERASED = 2


def _log(p: float) -> float:
    return float(np.log(p)) if p > 0 else -np.inf


@dataclass(frozen=True)
class EecChannel:
    """Error-and-erasure channel: each bit is erased, else inverted, else intact."""

    p_erase: float = 0.0
    p_cross: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p_erase", "p_cross"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    def transmit(self, bits, seed: int | None = None) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int8)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        erase = rng.random(bits.shape) < self.p_erase
        flip = rng.random(bits.shape) < self.p_cross
        out = np.where(flip, 1 - bits, bits).astype(np.int8)
        out[erase] = ERASED
        return out

    def bit_log_probs(self) -> tuple[float, float, float]:
        """log P(b'|b) for b' == b, b' != b, b' == '$'."""
        keep = 1.0 - self.p_erase
        return (_log(keep * (1.0 - self.p_cross)), _log(keep * self.p_cross), _log(self.p_erase))

    def codeword_loglik(self, observed, codewords) -> np.ndarray:
        """log P(observed | c) for every candidate codeword.

        ``observed`` is (..., B), ``codewords`` is (C, B); the result is (..., C).
        """
        obs = np.asarray(observed)
        if np.any((obs != 0) & (obs != 1) & (obs != ERASED)):
            raise ValueError("EEC symbols must be 0, 1 or ERASED")
        cw = np.asarray(codewords)
        same, other, erased = self.bit_log_probs()
        o = obs[..., None, :]
        # count matches / mismatches per candidate; avoids 0 * -inf
        n_erased = np.sum(o == ERASED, axis=-1)
        n_match = np.sum(o == cw, axis=-1)
        n_miss = cw.shape[-1] - n_erased - n_match
        return _count_times(n_match, same) + _count_times(n_miss, other) + _count_times(n_erased, erased)


def _count_times(count, logp: float):
    if np.isfinite(logp):
        return count * logp
    return np.where(count > 0, -np.inf, 0.0)


@dataclass(frozen=True)
class AwgnChannel:
    """BPSK over additive white Gaussian noise with density exp(-d^2 / sigma) / sqrt(pi sigma).

    The noise variance is therefore sigma / 2.
    """

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def transmit(self, bits, seed: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        symbols = 2.0 * np.asarray(bits, dtype=float) - 1.0
        return symbols + np.sqrt(self.sigma / 2.0) * rng.standard_normal(symbols.shape)

    def codeword_loglik(self, observed, codewords) -> np.ndarray:
        obs = np.asarray(observed, dtype=float)[..., None, :]
        sym = 2.0 * np.asarray(codewords, dtype=float) - 1.0
        B = sym.shape[-1]
        d2 = np.sum(np.square(obs - sym), axis=-1)
        return -d2 / self.sigma - 0.5 * B * np.log(np.pi * self.sigma)


Channel = Union[EecChannel, AwgnChannel]


@dataclass
class ReceivedSequence:
    """What the decoder sees: one (N, B_k) observation array per description."""

    streams: list[np.ndarray]

    @property
    def K(self) -> int:
        return len(self.streams)

    @property
    def N(self) -> int:
        return self.streams[0].shape[-2]


def likelihood(channel: Channel, observed, sent) -> float:
    """log P_k(b' | b) of one observed codeword given the sent bits."""
    observed = np.asarray(observed)
    sent = np.asarray(sent)
    if observed.shape != sent.shape:
        raise ValueError("observed and sent codewords differ in length")
    return float(channel.codeword_loglik(observed, sent[None, :])[0])


def likelihood_table(channel: Channel, observed, codebook: MdqCodebook, k: int) -> np.ndarray:
    """log P_k(y | lambda_k(c)) for every central codeword c.

    Works on a single (B,) codeword or any (..., B) batch, returning (..., L).
    The per-side-index table is computed once and gathered through lambda_k.
    """
    side = channel.codeword_loglik(observed, codebook.side_bits(k))
    return side[..., codebook.assignment[:, k]]


def transmit_streams(codebook: MdqCodebook, channels: Sequence[Channel], side_indices,
                     seeds: Sequence[int] | None = None) -> ReceivedSequence:
    """Send each description's bits through its own channel."""
    streams = []
    for k, ch in enumerate(channels):
        bits = to_bits(codebook, k, side_indices[k])
        streams.append(ch.transmit(bits, None if seeds is None else seeds[k]))
    return ReceivedSequence(streams)


def stage_loglik(codebook: MdqCodebook, channels: Sequence[Channel], received: ReceivedSequence) -> np.ndarray:
    """sum_k log P_k(y_{k,n} | lambda_k(c)): (..., N, L) table shared by all decoders."""
    if len(channels) != codebook.K or received.K != codebook.K:
        raise ValueError("need one channel and one stream per description")
    total = None
    for k, ch in enumerate(channels):
        t = likelihood_table(ch, received.streams[k], codebook, k)
        total = t if total is None else total + t
    return total


def hard_side_indices(codebook: MdqCodebook, received: ReceivedSequence) -> np.ndarray:
    """Symbol-wise side index decisions, -1 where a description is unusable.

    EEC: any erased bit or an out-of-range index loses the description.
    AWGN: sign decisions per bit.
    """
    out = []
    for k, obs in enumerate(received.streams):
        obs = np.asarray(obs)
        if np.issubdtype(obs.dtype, np.floating):
            idx = from_bits(obs > 0)
            lost = np.zeros(idx.shape, dtype=bool)
        else:
            lost = np.any(obs == ERASED, axis=-1)
            idx = from_bits(np.where(obs == ERASED, 0, obs))
        lost |= idx >= codebook.side_sizes[k]
        out.append(np.where(lost, -1, idx))
    return np.stack(out)
