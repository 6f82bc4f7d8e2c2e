"""Quick oracle suite behind ``jscmd selftest``."""

from __future__ import annotations

import numpy as np

from jscmd.hmm_estimator import hmm_viterbi
from jscmd.map_decoder import check_monge, longest_path, longest_path_fast
from jscmd.mdq import build_2dsq
from jscmd.mmse_decoder import posteriors
from jscmd.oracles import brute_hmm, brute_map, brute_marginals, random_hmm_instance, random_instance
from jscmd.source_model import GaussMarkovSource, derive_markov_model


def _close(a: float, b: float, tol: float = 1e-9) -> bool:
    return (a == b) or abs(a - b) <= tol


def run_selftest(instances: int, rng: np.random.Generator, out=print) -> bool:
    results = {}

    ok = True
    for _ in range(instances):
        inst = random_instance(rng, int(rng.integers(1, 9)), int(rng.integers(2, 7)))
        ll = inst.loglik
        best, _ = brute_map(inst.model, ll)
        _, score = longest_path(inst.model, ll)
        ok &= _close(best, float(score))
    results["map vs exhaustive search"] = ok

    ok = True
    for _ in range(instances):
        inst = random_instance(rng, int(rng.integers(1, 9)), int(rng.integers(2, 7)))
        post = posteriors(inst.model, inst.loglik).posterior
        ok &= bool(np.max(np.abs(post - brute_marginals(inst.model, inst.loglik))) <= 1e-9)
    results["forward-backward vs exhaustive marginals"] = ok

    ok = True
    for _ in range(instances):
        hmm, ll = random_hmm_instance(rng, int(rng.integers(1, 7)), int(rng.integers(1, 4)),
                                      int(rng.integers(2, 5)))
        _, _, score = hmm_viterbi(hmm, ll)
        ok &= _close(brute_hmm(hmm, ll), float(score))
    results["hmm joint map vs exhaustive search"] = ok

    ok = True
    cb = build_2dsq()
    for rho in (0.0, 0.5, 0.9):
        model = derive_markov_model(GaussMarkovSource(rho), cb.boundaries)
        ok &= check_monge(model).ok
        for _ in range(max(1, instances // 10)):
            ll = np.log(rng.dirichlet(np.ones(cb.L) * 0.3, size=50))
            fast, _ = longest_path_fast(model, ll)
            slow, _ = longest_path(model, ll)
            ok &= bool(np.array_equal(fast, slow))
    results["smawk fast path vs exact dp"] = ok

    for name, passed in results.items():
        out(f"{'PASS' if passed else 'FAIL'}  {name}")
    return all(results.values())
