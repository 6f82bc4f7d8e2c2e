"""MMSE decoding: forward-backward over K observation streams, and its memoryless reduction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from jscmd.channel import Channel, ReceivedSequence, stage_loglik
from jscmd.map_decoder import InfeasibleObservation
from jscmd.mdq import MdqCodebook
from jscmd.source_model import MarkovSourceModel


@dataclass
class PosteriorTable:
    """P(x_n = l | all observations) with the per-stage scaling used to compute it.

    ``log_evidence`` is log P(y_1, ..., y_K) recovered from the scale factors.
    """

    posterior: np.ndarray
    log_scale: np.ndarray
    log_evidence: np.ndarray


def _linear_likelihood(loglik):
    # each stage is rescaled by its maximum; the shift cancels in every posterior
    shift = np.max(loglik, axis=-1, keepdims=True)
    if np.any(shift == -np.inf):
        raise InfeasibleObservation("a stage has zero likelihood for every codeword")
    return np.exp(loglik - shift), shift[..., 0]


def gamma_kernel(model: MarkovSourceModel, loglik_stage) -> np.ndarray:
    """gamma_n(l', l) = P(l | l') * prod_k P_k(y_{k,n} | lambda_k(l)) for one stage."""
    return model.transition * np.exp(np.asarray(loglik_stage))[None, :]


def posteriors(model: MarkovSourceModel, loglik: np.ndarray) -> PosteriorTable:
    """Scaled forward-backward for one sequence (N, L) or a batch (..., N, L)."""
    loglik = np.asarray(loglik, dtype=float)
    N = loglik.shape[-2]
    lik, shift = _linear_likelihood(loglik)
    T = model.transition
    alpha = np.empty(lik.shape)
    scale = np.empty(lik.shape[:-1])
    a = model.prior * lik[..., 0, :]
    for n in range(N):
        if n > 0:
            a = (alpha[..., n - 1, :] @ T) * lik[..., n, :]
        c = a.sum(axis=-1)
        if np.any(c == 0):
            raise InfeasibleObservation(f"zero total probability at stage {n}")
        scale[..., n] = c
        alpha[..., n, :] = a / c[..., None]
    beta = np.ones(lik.shape)
    for n in range(N - 2, -1, -1):
        b = (lik[..., n + 1, :] * beta[..., n + 1, :]) @ T.T
        beta[..., n, :] = b / b.sum(axis=-1, keepdims=True)
    post = alpha * beta
    post /= post.sum(axis=-1, keepdims=True)
    log_scale = np.log(scale)
    return PosteriorTable(post, log_scale, log_scale.sum(axis=-1) + shift.sum(axis=-1))


def forward_backward(model: MarkovSourceModel, codebook: MdqCodebook, channels: Sequence[Channel],
                     received: ReceivedSequence) -> PosteriorTable:
    return posteriors(model, stage_loglik(codebook, channels, received))


def mmse_reconstruct(posterior, codebook: MdqCodebook) -> np.ndarray:
    """Conditional-mean reconstruction: posterior-weighted central centroids."""
    p = posterior.posterior if isinstance(posterior, PosteriorTable) else np.asarray(posterior)
    return p @ codebook.centroids


def iid_posteriors(prior, loglik: np.ndarray) -> np.ndarray:
    """Per-position posterior ignoring source memory: P(l) * prod_k P_k(y | lambda_k(l))."""
    lik, _ = _linear_likelihood(np.asarray(loglik, dtype=float))
    p = np.asarray(prior) * lik
    total = p.sum(axis=-1, keepdims=True)
    if np.any(total == 0):
        raise InfeasibleObservation("zero total probability at some position")
    return p / total


def mmse_decode_iid(codebook: MdqCodebook, channels: Sequence[Channel], received: ReceivedSequence,
                    prior=None) -> np.ndarray:
    """Memoryless MMSE reconstruction; ``prior`` defaults to the unit-Gaussian cell masses."""
    if prior is None:
        prior = codebook.cell_probabilities()
    post = iid_posteriors(prior, stage_loglik(codebook, channels, received))
    return post @ codebook.centroids


def mmse_decode(model: MarkovSourceModel, codebook: MdqCodebook, channels: Sequence[Channel],
                received: ReceivedSequence) -> np.ndarray:
    return mmse_reconstruct(forward_backward(model, codebook, channels, received), codebook)
