"""End-to-end acceptance checks, one test per criterion.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from concentrate.analytics import conservation_check, yield_series
from concentrate.core import BellKind, SchmidtPair, fidelity, pair_entanglement
from concentrate.harness import CampaignConfig, render_report, run_campaign, run_exact
from concentrate.measurement import build_idp_povm
from concentrate.protocols import (
    CAT,
    ENT_ASSISTED,
    PROPOSAL1,
    PROPOSAL2,
    cat_target,
    enumerate_branches,
    success_probability,
)

from conftest import grid_pairs

ALPHA_SQ = (0.55, 0.6, 0.75, 0.9, 0.95)
MC_TRIALS = 1_000_000


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.2f} s, limit {self.limit} s"


def within_sigma(row, p, n_sigma=4.0):
    return abs(row.empirical_p - p) <= n_sigma * row.std_error


@pytest.mark.acceptance(1, "qubit-assisted single pair: exact 2a^2b^2, Monte Carlo within 4 sigma")
def test_criterion_1_proposal1_probability():
    with Timer(10.0):
        for a2 in ALPHA_SQ:
            p = 2 * a2 * (1 - a2)
            exact = run_exact(CampaignConfig(PROPOSAL1, a2)).per_round[0]
            assert abs(exact.empirical_p - p) <= 1e-12
            sampled = run_campaign(CampaignConfig(PROPOSAL1, a2, trials=MC_TRIALS, seed=1001)).per_round[0]
            assert within_sigma(sampled, p)
            assert abs(sampled.empirical_p - p) <= 0.002


@pytest.mark.acceptance(2, "iterated yield: 4 sigma of series, exact recursion, limit 2b^2")
def test_criterion_2_iterative_yield():
    with Timer(30.0):
        s = SchmidtPair.from_alpha_sq(0.75)
        report = run_campaign(CampaignConfig("proposal1-iterate", 0.75, trials=100_000, seed=2002, rounds=6))
        curve = yield_series(s, len(report.per_round))
        expected = float(curve.cumulative_fractions[-1])
        overall = report.overall
        assert abs(overall["empirical_fraction"] - expected) <= 4 * overall["std_error"]

        exact = run_exact(CampaignConfig("proposal1-iterate", 0.75, rounds=6))
        full = yield_series(s, 6).fractions()
        running = np.cumsum([row.successes for row in exact.per_round])
        assert len(running) == 6
        np.testing.assert_allclose(running, full, rtol=0, atol=1e-12)
        assert abs(running[-1] - 0.5) <= 1e-3


@pytest.mark.acceptance(3, "series convergence: increasing partial sums, remainder bound at k=10")
def test_criterion_3_series_convergence():
    with Timer(1.0):
        for x in (0.1, 0.3, 0.5, 0.7, 0.9):
            curve = yield_series(SchmidtPair.from_coefficients(1.0, x), 10)
            sums = curve.partial_sums
            assert all(b > a for a, b in zip(sums, sums[1:]))
            remainder = 1 - sums[-1]
            assert 0 <= remainder <= curve.remainder_bounds[-1]
            assert 1.0 - float(sums[-1]) == 0.0


@pytest.mark.acceptance(4, "unambiguous POVM: valid on 50 grid points, conclusive probability 2b^2")
def test_criterion_4_povm_validity():
    with Timer(1.0):
        for s in grid_pairs():
            povm = build_idp_povm(s)
            np.testing.assert_allclose(sum(povm.elements), np.eye(2), rtol=0, atol=1e-12)
            for e in povm.elements:
                np.testing.assert_allclose(e, e.conj().T, rtol=0, atol=1e-12)
                assert np.min(np.linalg.eigvalsh(e)) >= -1e-12
            conclusive = povm.elements[0] + povm.elements[1]
            for u in (np.array([s.alpha, s.beta]), np.array([s.alpha, -s.beta])):
                p = float(np.real(u @ conclusive @ u))
                assert abs(p - (1 - (s.alpha**2 - s.beta**2))) <= 1e-12
                assert abs(p - 2 * s.beta**2) <= 1e-12


@pytest.mark.acceptance(5, "POVM single pair: exact 2b^2, Bell fidelity, product on failure, 4 sigma")
def test_criterion_5_proposal2_end_to_end():
    with Timer(10.0):
        for a2 in ALPHA_SQ:
            s = SchmidtPair.from_alpha_sq(a2)
            p = 2 * s.beta**2
            assert abs(run_exact(CampaignConfig(PROPOSAL2, a2)).per_round[0].empirical_p - p) <= 1e-12
            for b in enumerate_branches(PROPOSAL2, s):
                out = b.outcome
                if out.succeeded:
                    assert out.bell in (BellKind.PhiPlus, BellKind.PhiMinus)
                    assert fidelity(out.final_state, cat_target(out.bell, out.final_state.labels)) >= 1 - 1e-10
                else:
                    assert pair_entanglement(out.final_state) <= 1e-10
            sampled = run_campaign(CampaignConfig(PROPOSAL2, a2, trials=MC_TRIALS, seed=5005)).per_round[0]
            assert within_sigma(sampled, p)


@pytest.mark.acceptance(6, "entanglement-assisted: parity branches, conditional and overall success")
def test_criterion_6_entanglement_assisted():
    with Timer(5.0):
        for s in grid_pairs()[1::7]:
            a2, b2 = s.alpha**2, s.beta**2
            branches = enumerate_branches(ENT_ASSISTED, s)
            even = [b for b in branches if b.outcome.path[0] == "even"]
            odd = [b for b in branches if b.outcome.path[0] == "odd"]
            p_even = math.fsum(b.probability for b in even)
            p_odd = math.fsum(b.probability for b in odd)
            assert abs(p_even - (a2 * a2 + b2 * b2)) <= 1e-12
            assert abs(p_odd - 2 * a2 * b2) <= 1e-12
            conditional = success_probability(even) / p_even
            assert abs(conditional - 2 * b2 * b2 / (a2 * a2 + b2 * b2)) <= 1e-12
            assert abs(success_probability(branches) - 2 * b2) <= 1e-12
            assert all(b.outcome.succeeded for b in odd)
            assert abs(success_probability(odd) / p_odd - 1.0) <= 1e-12
            report = run_exact(CampaignConfig(ENT_ASSISTED, a2))
            assert abs(report.per_round[0].empirical_p - 2 * b2) <= 1e-12


@pytest.mark.acceptance(7, "average entanglement conserved for every protocol on 50 grid points")
def test_criterion_7_conservation():
    cases = [(PROPOSAL1, {}), (PROPOSAL2, {}), (ENT_ASSISTED, {}),
             (CAT, {"n_parties": 3, "method": PROPOSAL1}), (CAT, {"n_parties": 3, "method": PROPOSAL2})]
    for s in grid_pairs():
        for protocol, kwargs in cases:
            report = conservation_check(s, protocol, **kwargs)
            assert abs(report.e_before - 2 * s.beta**2) <= 1e-12
            assert report.deviation <= 1e-12, (protocol, kwargs, s)


@pytest.mark.acceptance(8, "cat states: 2a^2b^2 and 2b^2 for 3-6 parties, GHZ fidelity, actor symmetry")
def test_criterion_8_multipartite():
    with Timer(10.0):
        for s in (SchmidtPair.from_alpha_sq(a2) for a2 in (0.6, 0.75, 0.9)):
            a2, b2 = s.alpha**2, s.beta**2
            for n in (3, 4, 5, 6):
                labels = tuple(chr(ord("A") + i) for i in range(n))
                by_actor = {}
                for method, p in ((PROPOSAL1, 2 * a2 * b2), (PROPOSAL2, 2 * b2)):
                    for actor in labels:
                        branches = enumerate_branches(CAT, s, n_parties=n, method=method, actor=actor)
                        by_actor.setdefault(method, []).append(success_probability(branches))
                        assert abs(by_actor[method][-1] - p) <= 1e-12
                        for b in branches:
                            if b.outcome.succeeded:
                                target = cat_target(b.outcome.bell, labels, odd_party=actor)
                                assert fidelity(b.outcome.final_state, target) >= 1 - 1e-10
                for probs in by_actor.values():
                    assert max(probs) - min(probs) <= 1e-12


@pytest.mark.acceptance(9, "determinism: identical configs give byte-identical reports at any parallelism")
def test_criterion_9_determinism(tmp_path):
    configs = [
        CampaignConfig(PROPOSAL1, 0.7, trials=300_000, seed=9),
        CampaignConfig("proposal1-iterate", 0.8, trials=300_000, seed=2**64 - 1, rounds=6),
        CampaignConfig(PROPOSAL2, 0.6, trials=300_000, seed=12345),
        CampaignConfig(ENT_ASSISTED, 0.9, trials=300_000, seed=0),
        CampaignConfig(CAT, 0.75, trials=300_000, seed=77, parties=5, method=PROPOSAL1),
        CampaignConfig(CAT, 0.75, trials=300_000, seed=78, parties=4, method=PROPOSAL2),
    ]
    for cfg in configs:
        for fmt in ("json", "csv"):
            first = render_report(run_campaign(cfg, workers=1), fmt).encode("utf-8")
            second = render_report(run_campaign(cfg, workers=1), fmt).encode("utf-8")
            parallel = render_report(run_campaign(cfg, workers=4), fmt).encode("utf-8")
            assert first == second == parallel
        exact = [render_report(run_exact(cfg), "json") for _ in range(2)]
        assert exact[0] == exact[1]
