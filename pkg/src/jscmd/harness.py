"""Seeded Monte-Carlo experiments over source/channel grids and decoder tiers."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from jscmd.channel import AwgnChannel, EecChannel, ReceivedSequence, hard_side_indices, stage_loglik
from jscmd.hmm_estimator import GaussianHmm, cheapest_codewords, hmm_viterbi, memoryless_states, mid_codewords
from jscmd.map_decoder import InfeasibleObservation, check_monge, longest_path, longest_path_fast
from jscmd.mdq import MdqCodebook, build_2dsq, encode, hard_decode_streams, quantize, to_bits
from jscmd.mmse_decoder import iid_posteriors, posteriors
from jscmd.source_model import GaussMarkovSource, MarkovSourceModel, derive_markov_model, generate

log = logging.getLogger(__name__)

DECODERS = ("hard", "map", "map_fast", "mmse", "mmse_iid", "hmm_exact", "hmm_mid", "hmm_cheap")
CSV_COLUMNS = ("rho", "p_cross", "p_erase", "sigma", "decoder", "ser", "snr_db",
               "trials", "n", "seed", "wall_ms")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Experiment grid. ``channel`` selects the EEC grid (p_erase x p_cross) or the AWGN grid (sigma).

    ``hmm`` configures the source used by the hmm_* decoders: per-state output
    ``means`` and ``stds``, and optionally an explicit ``transition`` matrix;
    otherwise the states stay put with probability rho + (1 - rho) / M.
    """

    rho: list[float] = field(default_factory=lambda: [0.0, 0.5, 0.9])
    p_cross: list[float] = field(default_factory=lambda: [0.001, 0.005, 0.01, 0.05])
    p_erase: list[float] = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2])
    sigma: list[float] = field(default_factory=list)
    channel: str = "eec"
    n: int = 10_000
    trials: int = 20
    decoders: list[str] = field(default_factory=lambda: ["hard", "map", "mmse", "mmse_iid"])
    codebook: dict = field(default_factory=lambda: {"side_size": 8, "spread": 3, "cells": 21,
                                                    "cell_width": None})
    hmm: dict = field(default_factory=lambda: {"means": [-2.0, 0.0, 2.0], "stds": [0.8, 0.8, 0.8]})
    base_seed: int = 0
    threads: int = 1
    timing: bool = False

    def validate(self) -> "ExperimentConfig":
        for name in ("p_cross", "p_erase"):
            if any(not 0.0 <= p <= 1.0 for p in getattr(self, name)):
                raise ConfigError(f"{name} values must lie in [0, 1]")
        if any(not 0.0 <= r < 1.0 for r in self.rho) or not self.rho:
            raise ConfigError("rho values must lie in [0, 1) and be non-empty")
        if self.channel not in ("eec", "awgn"):
            raise ConfigError("channel must be 'eec' or 'awgn'")
        if self.channel == "awgn" and (not self.sigma or any(s <= 0 for s in self.sigma)):
            raise ConfigError("awgn mode needs a non-empty list of positive sigma values")
        if self.channel == "eec" and (not self.p_cross or not self.p_erase):
            raise ConfigError("eec mode needs p_cross and p_erase grids")
        if self.trials < 1 or self.n < 1:
            raise ConfigError("trials and n must be >= 1")
        unknown = [d for d in self.decoders if d not in DECODERS]
        if unknown or not self.decoders:
            raise ConfigError(f"unknown decoders {unknown}; choose from {', '.join(DECODERS)}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        return cls(**d).validate()

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except (TypeError, json.JSONDecodeError) as e:
            raise ConfigError(str(e)) from e

    def build_codebook(self) -> MdqCodebook:
        c = self.codebook
        return build_2dsq(c.get("side_size", 8), c.get("spread", 3), c.get("cells", 21), c.get("cell_width"))

    def grid(self) -> list[tuple[float, float, float, float]]:
        """(rho, p_cross, p_erase, sigma) points."""
        rhos = [float(r) for r in self.rho]
        if self.channel == "eec":
            return [(r, float(pc), float(pe), 0.0) for r in rhos for pe in self.p_erase for pc in self.p_cross]
        return [(r, 0.0, 0.0, float(s)) for r in rhos for s in self.sigma]


@dataclass
class MetricRow:
    rho: float
    p_cross: float
    p_erase: float
    sigma: float
    decoder: str
    ser: float
    snr_db: float
    trials: int
    n: int
    seed: int
    wall_ms: float = 0.0
    infeasible: int = 0

    def sort_key(self):
        return (self.rho, self.p_erase, self.p_cross, self.sigma, self.decoder)


def snr_db(signal, reconstruction) -> float:
    err = float(np.sum(np.square(np.asarray(signal) - reconstruction)))
    power = float(np.sum(np.square(signal)))
    return float("inf") if err == 0 else 10.0 * np.log10(power / err)


def _seed(base: int, trial: int, *stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((base ^ trial, *stream))


@dataclass
class _SourceBatch:
    chi: np.ndarray       # (T, N) real samples
    x: np.ndarray         # (T, N) central indices
    side: np.ndarray      # (K, T, N) side indices
    states: np.ndarray | None = None


class _Runner:
    def __init__(self, config: ExperimentConfig):
        self.cfg = config
        self.codebook = config.build_codebook()
        self._sources: dict = {}
        self._models: dict = {}

    # sources are shared by every channel point and decoder (paired trials)
    def gauss_source(self, rho: float) -> _SourceBatch:
        key = ("gm", rho)
        if key not in self._sources:
            src = GaussMarkovSource(rho, self.cfg.base_seed)
            chi = np.stack([generate(src, self.cfg.n, seed=self.cfg.base_seed ^ t)
                            for t in range(self.cfg.trials)])
            x, side = encode(self.codebook, chi)
            self._sources[key] = _SourceBatch(chi, x, side)
        return self._sources[key]

    def hmm_params(self, rho: float) -> GaussianHmm:
        h = self.cfg.hmm
        if h.get("transition") is not None:
            return GaussianHmm(np.asarray(h["transition"], dtype=float), np.asarray(h["means"], dtype=float),
                               np.broadcast_to(np.asarray(h["stds"], dtype=float), (len(h["means"]),)).copy())
        return GaussianHmm.sticky(rho, h["means"], h["stds"])

    def hmm_source(self, rho: float) -> _SourceBatch:
        key = ("hmm", rho)
        if key not in self._sources:
            params = self.hmm_params(rho)
            draws = [params.sample(self.cfg.n, int(_seed(self.cfg.base_seed, t, 1).generate_state(1)[0]))
                     for t in range(self.cfg.trials)]
            states = np.stack([d[0] for d in draws])
            chi = np.stack([d[1] for d in draws])
            x, side = encode(self.codebook, chi)
            self._sources[key] = _SourceBatch(chi, x, side, states)
        return self._sources[key]

    def markov_model(self, rho: float) -> MarkovSourceModel:
        if rho not in self._models:
            self._models[rho] = derive_markov_model(GaussMarkovSource(rho), self.codebook.boundaries)
        return self._models[rho]

    def channels(self, pc: float, pe: float, sigma: float):
        if self.cfg.channel == "eec":
            return [EecChannel(pe, pc) for _ in range(self.codebook.K)]
        return [AwgnChannel(sigma) for _ in range(self.codebook.K)]

    def transmit(self, batch: _SourceBatch, channels) -> ReceivedSequence:
        streams = []
        for k, ch in enumerate(channels):
            bits = to_bits(self.codebook, k, batch.side[k])
            streams.append(np.stack([ch.transmit(bits[t], _seed(self.cfg.base_seed, t, 2 + k))
                                     for t in range(self.cfg.trials)]))
        return ReceivedSequence(streams)

    def run_point(self, point) -> list[MetricRow]:
        rho, pc, pe, sigma = point
        chans = self.channels(pc, pe, sigma)
        rows = []
        gm_decoders = [d for d in self.cfg.decoders if not d.startswith("hmm")]
        hmm_decoders = [d for d in self.cfg.decoders if d.startswith("hmm")]
        if gm_decoders:
            batch = self.gauss_source(rho)
            rx = self.transmit(batch, chans)
            loglik = stage_loglik(self.codebook, chans, rx)
            for name in gm_decoders:
                rows.append(self._evaluate(point, name, batch, lambda t, n=name: self._gm_decode(n, rho, rx, loglik, t)))
        if hmm_decoders:
            batch = self.hmm_source(rho)
            rx = self.transmit(batch, chans)
            loglik = stage_loglik(self.codebook, chans, rx)
            hmm = self.hmm_params(rho).model(self.codebook.boundaries)
            for name in hmm_decoders:
                rows.append(self._evaluate(point, name, batch,
                                           lambda t, n=name: self._hmm_decode(n, hmm, rx, loglik, t)))
        return rows

    def _evaluate(self, point, name: str, batch: _SourceBatch, decode: Callable) -> MetricRow:
        """Decode all trials at once; on an infeasible batch retry trial by trial and drop the bad ones."""
        start = time.perf_counter()
        trials = np.arange(self.cfg.trials)
        try:
            est, recon = decode(trials)
            keep = trials
        except InfeasibleObservation:
            keep, parts = [], []
            for t in trials:
                try:
                    parts.append(decode(np.array([t])))
                    keep.append(t)
                except InfeasibleObservation:
                    pass
            keep = np.array(keep, dtype=np.int64)
            est = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, self.cfg.n), dtype=np.int64)
            recon = np.concatenate([p[1] for p in parts]) if parts else np.zeros((0, self.cfg.n))
        elapsed = (time.perf_counter() - start) * 1000.0 if self.cfg.timing else 0.0
        truth = batch.states if name.startswith("hmm") else batch.x
        infeasible = self.cfg.trials - len(keep)
        if infeasible:
            log.warning("%s at %s: %d infeasible trials excluded", name, point, infeasible)
        if len(keep):
            ser = float(np.mean(est != truth[keep]))
            snr = snr_db(batch.chi[keep], recon)
        else:
            ser, snr = float("nan"), float("nan")
        rho, pc, pe, sigma = point
        return MetricRow(rho, pc, pe, sigma, name, ser, snr, len(keep), self.cfg.n, self.cfg.base_seed,
                         elapsed, infeasible)

    def _gm_decode(self, name: str, rho: float, rx: ReceivedSequence, loglik, trials):
        cb = self.codebook
        model = self.markov_model(rho)
        ll = loglik[trials]
        if name == "hard":
            sub = ReceivedSequence([s[trials] for s in rx.streams])
            recon = hard_decode_streams(cb, hard_side_indices(cb, sub))
            return quantize(cb, recon), recon
        if name == "map":
            path, score = longest_path(model, ll)
            if np.any(score == -np.inf):
                raise InfeasibleObservation
            return path, cb.centroids[path]
        if name == "map_fast":
            if not check_monge(model).ok:
                raise ConfigError(f"rho={rho}: log-transition matrix is not Monge")
            paths = []
            for seq in ll:
                path, score = longest_path_fast(model, seq)
                if score == -np.inf:
                    raise InfeasibleObservation
                paths.append(path)
            path = np.stack(paths)
            return path, cb.centroids[path]
        if name == "mmse":
            post = posteriors(model, ll).posterior
        else:
            post = iid_posteriors(model.prior, ll)
        return np.argmax(post, axis=-1), post @ cb.centroids

    def _hmm_decode(self, name: str, hmm, rx: ReceivedSequence, loglik, trials):
        cb = self.codebook
        ll = loglik[trials]
        if name == "hmm_exact":
            z, x, score = hmm_viterbi(hmm, ll)
            if np.any(score == -np.inf):
                raise InfeasibleObservation
        elif name == "hmm_mid":
            x = mid_codewords(ll)
            z = memoryless_states(hmm, x)
        else:
            sub = ReceivedSequence([s[trials] for s in rx.streams])
            x, lost = cheapest_codewords(cb, sub)
            z = memoryless_states(hmm, x, lost)
        return z, cb.centroids[x]


def run_experiment(config: ExperimentConfig) -> list[MetricRow]:
    """Run every grid point and decoder; rows come back in canonical sort order.

    Metrics are pooled over all positions of all feasible trials. The result
    depends only on the config (including ``base_seed``), not on ``threads``.
    """
    config.validate()
    runner = _Runner(config)
    points = config.grid()
    # sources and models are built up front so worker threads only read shared state
    for rho in config.rho:
        if any(not d.startswith("hmm") for d in config.decoders):
            runner.gauss_source(rho)
            runner.markov_model(rho)
        if any(d.startswith("hmm") for d in config.decoders):
            runner.hmm_source(rho)
    if config.threads == 1:
        results = [runner.run_point(p) for p in points]
    else:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(runner.run_point, points))
    rows = [r for rs in results for r in rs]
    return sorted(rows, key=MetricRow.sort_key)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.6f}"


def emit_csv(rows: list[MetricRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in sorted(rows, key=MetricRow.sort_key):
        d = asdict(row)
        writer.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return out.getvalue()


def quantizer_snr(rho: float, n: int, trials: int, base_seed: int, codebook_json: str) -> float:
    """SNR of plain central quantization on the same source draws the harness uses."""
    cb = MdqCodebook.from_json(codebook_json)
    src = GaussMarkovSource(rho, base_seed)
    chi = np.stack([generate(src, n, seed=base_seed ^ t) for t in range(trials)])
    return snr_db(chi, cb.centroids[quantize(cb, chi)])
