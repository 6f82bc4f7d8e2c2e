import numpy as np
import pytest

from jscmd.channel import ERASED, EecChannel, ReceivedSequence, transmit_streams
from jscmd.map_decoder import InfeasibleObservation
from jscmd.mdq import encode
from jscmd.mmse_decoder import (
    PosteriorTable,
    forward_backward,
    iid_posteriors,
    mmse_decode,
    mmse_decode_iid,
    mmse_reconstruct,
    posteriors,
)
from jscmd.oracles import brute_marginals, random_instance, sequence_scores
from jscmd.source_model import GaussMarkovSource, MarkovSourceModel, generate


def send(codebook, rho, n, pe, pc, seed):
    x, streams = encode(codebook, generate(GaussMarkovSource(rho, seed=seed), n))
    chans = [EecChannel(pe, pc), EecChannel(pe, pc)]
    return x, chans, transmit_streams(codebook, chans, streams, seeds=[seed + 100, seed + 200])


def snr(s, r):
    return 10 * np.log10(np.sum(s**2) / np.sum((s - r) ** 2))


@pytest.mark.parametrize("rho", [0.0, 0.9])
def test_noiseless_posterior_is_indicator(gm_models, codebook21, rho):
    x, chans, rx = send(codebook21, rho, 200, 0.0, 0.0, 3)
    table = forward_backward(gm_models[rho], codebook21, chans, rx)
    np.testing.assert_allclose(table.posterior, np.eye(21)[x], atol=1e-12)
    np.testing.assert_allclose(mmse_decode_iid(codebook21, chans, rx), codebook21.centroids[x], atol=1e-12)


def test_all_erased_gives_prior(gm_models, codebook21):
    rx = ReceivedSequence([np.full((30, 3), ERASED, dtype=np.int8)] * 2)
    table = forward_backward(gm_models[0.0], codebook21, [EecChannel(0.5, 0.1)] * 2, rx)
    np.testing.assert_allclose(table.posterior, np.tile(gm_models[0.0].prior, (30, 1)), atol=1e-12)


def test_matches_brute_marginals(rng):
    for _ in range(150):
        inst = random_instance(rng, int(rng.integers(1, 7)), int(rng.integers(2, 6)))
        ll = inst.loglik
        table = posteriors(inst.model, ll)
        np.testing.assert_allclose(table.posterior, brute_marginals(inst.model, ll), rtol=0, atol=1e-9)


def test_log_evidence(rng):
    for _ in range(30):
        inst = random_instance(rng, int(rng.integers(1, 6)), int(rng.integers(2, 5)))
        ll = inst.loglik
        s = sequence_scores(inst.model, ll)
        want = s.max() + np.log(np.sum(np.exp(s - s.max())))
        assert posteriors(inst.model, ll).log_evidence == pytest.approx(want, abs=1e-9)


def test_rows_normalized(gm_models, codebook21):
    _, chans, rx = send(codebook21, 0.9, 2000, 0.2, 0.05, 4)
    p = forward_backward(gm_models[0.9], codebook21, chans, rx).posterior
    assert np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-9
    assert np.all(p >= 0)


def test_long_sequence_does_not_underflow(gm_models, codebook21):
    _, chans, rx = send(codebook21, 0.9, 20000, 0.3, 0.1, 5)
    table = forward_backward(gm_models[0.9], codebook21, chans, rx)
    assert np.all(np.isfinite(table.posterior))
    assert np.isfinite(table.log_evidence) and table.log_evidence < -1000


def test_reconstruct_examples(codebook21, rng):
    l = 13
    assert mmse_reconstruct(np.eye(21)[[l]], codebook21)[0] == pytest.approx(codebook21.centroids[l], abs=1e-15)
    assert mmse_reconstruct(np.full((1, 21), 1 / 21), codebook21)[0] == pytest.approx(0.0, abs=1e-12)
    p = rng.dirichlet(np.ones(21), size=10)
    want = [sum(p[n, j] * codebook21.centroids[j] for j in range(21)) for n in range(10)]
    table = PosteriorTable(p, np.zeros(10), np.zeros(()))
    np.testing.assert_allclose(mmse_reconstruct(table, codebook21), want, atol=1e-12)


def test_iid_equals_full_when_memoryless(gm_models, codebook21):
    _, chans, rx = send(codebook21, 0.0, 3000, 0.2, 0.05, 6)
    full = mmse_decode(gm_models[0.0], codebook21, chans, rx)
    iid = mmse_decode_iid(codebook21, chans, rx, prior=gm_models[0.0].prior)
    np.testing.assert_allclose(full, iid, atol=1e-12)


def test_iid_loses_to_full_with_memory(gm_models, codebook21):
    s = generate(GaussMarkovSource(0.9, seed=7), 50000)
    _, streams = encode(codebook21, s)
    chans = [EecChannel(0.1, 0.05), EecChannel(0.1, 0.05)]
    rx = transmit_streams(codebook21, chans, streams, seeds=[1, 2])
    full = mmse_decode(gm_models[0.9], codebook21, chans, rx)
    iid = mmse_decode_iid(codebook21, chans, rx)
    assert snr(s, full) > snr(s, iid) + 0.5


def test_iid_posteriors_formula(rng):
    prior = rng.dirichlet(np.ones(4))
    ll = np.log(rng.dirichlet(np.ones(4), size=6))
    p = prior * np.exp(ll)
    np.testing.assert_allclose(iid_posteriors(prior, ll), p / p.sum(axis=1, keepdims=True), atol=1e-14)


def test_batched_equals_loop(gm_models, rng):
    ll = np.log(rng.dirichlet(np.ones(21), size=(3, 25)))
    batch = posteriors(gm_models[0.5], ll)
    for t in range(3):
        one = posteriors(gm_models[0.5], ll[t])
        np.testing.assert_allclose(batch.posterior[t], one.posterior, atol=1e-15)


def test_infeasible_stage_raises():
    m = MarkovSourceModel.from_probabilities([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    ll = np.array([[0.0, -np.inf], [-np.inf, 0.0]])
    with pytest.raises(InfeasibleObservation):
        posteriors(m, ll)
