"""Gauss-Markov source generation and the discrete Markov model of its quantized output."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.special import log_ndtr, logsumexp

# outer cells are integrated over [-TRUNCATION, TRUNCATION] standard deviations
TRUNCATION = 10.0
_PANEL_WIDTH = 0.1
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class GaussMarkovSource:
    """Zero-mean, unit-variance first-order autoregressive Gaussian source."""

    rho: float
    seed: int = 0
    mean: float = field(default=0.0, init=False)
    variance: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")


def generate(source: GaussMarkovSource, n: int, seed: int | None = None) -> np.ndarray:
    """Draw ``n`` samples of the AR(1) process, starting from the stationary law.

    ``seed`` overrides ``source.seed`` (used for per-trial streams).
    """
    if n <= 0:
        return np.zeros(0)
    rng = np.random.default_rng(source.seed if seed is None else seed)
    w = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = w[0]
    if n > 1:
        innovations = np.sqrt(1.0 - source.rho**2) * w[1:]
        x[1:], _ = lfilter([1.0], [1.0, -source.rho], innovations, zi=[source.rho * w[0]])
    return x


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate on both ends."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x > -np.log(2.0)
    with np.errstate(divide="ignore"):
        out[small] = np.log(-np.expm1(x[small]))
        out[~small] = np.log1p(-np.exp(x[~small]))
    return out


def log_normal_interval(lo, hi):
    """log P(lo <= Z < hi) for standard normal Z, with full relative precision in the tails.

    Intervals on the positive half-line are evaluated through their mirror image, so
    that mirrored intervals give bit-identical results.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    log_b = log_ndtr(b)
    with np.errstate(invalid="ignore"):
        diff = log_ndtr(a) - log_b
    diff = np.where(np.isnan(diff), -np.inf, diff)
    return log_b + log1mexp(np.minimum(diff, 0.0))


def validate_boundaries(boundaries) -> np.ndarray:
    b = np.asarray(boundaries, dtype=float)
    if b.ndim != 1 or b.size < 3:
        raise ValueError("need at least two cells (three boundaries)")
    if not (b[0] == -np.inf and b[-1] == np.inf):
        raise ValueError("outermost boundaries must be -inf and +inf")
    if np.any(np.diff(b) <= 0):
        raise ValueError("cell boundaries must be strictly increasing")
    return b


@dataclass(frozen=True)
class MarkovSourceModel:
    """First-order Markov model of the central quantizer output.

    ``transition[b, a]`` is P(x_n = a | x_{n-1} = b); rows sum to one.
    """

    prior: np.ndarray
    transition: np.ndarray
    log_prior: np.ndarray
    log_transition: np.ndarray

    @classmethod
    def from_probabilities(cls, prior, transition) -> "MarkovSourceModel":
        prior = np.asarray(prior, dtype=float)
        transition = np.asarray(transition, dtype=float)
        L = prior.size
        if transition.shape != (L, L):
            raise ValueError(f"transition must be {L}x{L}, got {transition.shape}")
        if abs(prior.sum() - 1.0) > 1e-9 or np.any(prior < 0):
            raise ValueError("prior is not a probability vector")
        if np.any(np.abs(transition.sum(axis=1) - 1.0) > 1e-9) or np.any(transition < 0):
            raise ValueError("transition is not row-stochastic")
        with np.errstate(divide="ignore"):
            return cls(prior, transition, np.log(prior), np.log(transition))

    @classmethod
    def from_log(cls, log_prior, log_transition) -> "MarkovSourceModel":
        log_prior = np.asarray(log_prior, dtype=float)
        log_transition = np.asarray(log_transition, dtype=float)
        return cls(np.exp(log_prior), np.exp(log_transition), log_prior, log_transition)

    @property
    def size(self) -> int:
        return self.prior.size

    def stationarity_error(self) -> float:
        return float(np.max(np.abs(self.prior @ self.transition - self.prior)))


def _quadrature(lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and log-weights over [lo, hi]."""
    panels = max(1, int(np.ceil((hi - lo) / _PANEL_WIDTH)))
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, np.log(weights)


def derive_markov_model(source: GaussMarkovSource, boundaries) -> MarkovSourceModel:
    """Prior and transition matrix of the quantized Gauss-Markov chain.

    The prior is the Gaussian mass of each cell. The joint mass of a cell pair,
    P(x_{n-1} in V_b, x_n in V_a), is integrated over the previous sample with
    composite Gauss-Legendre quadrature in the log domain, the inner integral
    being a conditional normal CDF difference. Outer cells are truncated at
    +-TRUNCATION standard deviations for the outer integral only.
    """
    b = validate_boundaries(boundaries)
    L = b.size - 1
    lo, hi = b[:-1], b[1:]
    log_prior = log_normal_interval(lo, hi)
    log_prior -= logsumexp(log_prior)
    rho = source.rho
    if rho == 0.0:
        # exact independence: every row is the prior
        log_transition = np.tile(log_prior, (L, 1))
        return MarkovSourceModel.from_log(log_prior, log_transition)

    s = np.sqrt(1.0 - rho * rho)
    log_joint = np.empty((L, L))
    for prev in range(L):
        t, log_w = _quadrature(max(lo[prev], -TRUNCATION), min(hi[prev], TRUNCATION))
        log_density = log_w - 0.5 * t * t - 0.5 * np.log(2 * np.pi)
        # inner[a, i] = log P(x_n in V_a | x_{n-1} = t_i)
        inner = log_normal_interval((lo[:, None] - rho * t[None, :]) / s,
                                    (hi[:, None] - rho * t[None, :]) / s)
        log_joint[prev] = logsumexp(inner + log_density[None, :], axis=1)
    log_transition = log_joint - logsumexp(log_joint, axis=1, keepdims=True)
    return MarkovSourceModel.from_log(log_prior, log_transition)
