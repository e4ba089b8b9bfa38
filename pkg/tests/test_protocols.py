import json
import math

import numpy as np
import pytest

from qmclab.errors import DimensionError
from qmclab.petz import far_from_markov
from qmclab.protocols import certify, qmc_test, tomo_multipartite, tomo_tripartite
from qmclab.protocols.transcript import Guarantee
from qmclab.states import (
    DensityOperator,
    assemble_qmc,
    draw_markov_structure,
    perturb_markov_structure,
    random_density,
    random_markov_chain,
    random_qmc,
)


def _qmc(seed, dims=(2, 2, 2)):
    return random_qmc(dims, rng=np.random.default_rng(seed))


def test_guarantee_directions():
    floor = Guarantee.at_least("x >= 1", 1.0, 0.5)
    assert not floor.passed and floor.violated and floor.slack == -0.5
    ceiling = Guarantee.at_most("x <= 1", 1.0, 0.5)
    assert ceiling.passed and ceiling.slack == 0.5
    assert ceiling.to_json()["direction"] == "<="
    wrong = Guarantee.decision("far", "equal", applicable=False)
    assert not wrong.passed and not wrong.violated


@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2)])
def test_tripartite_tomography(dims):
    for seed in range(4):
        t = tomo_tripartite(_qmc(seed, dims), 0.1, np.random.default_rng(seed + 100), seed=seed)
        assert t.guarantee.applicable
        assert t.guarantee.passed, t.to_json()
        assert [c.marginal for c in t.oracle_calls] == ["AB", "BC"]
        assert all(c.achieved <= c.target for c in t.oracle_calls)
        assert t.budget.formula_name == "thm1_fidelity"
        assert t.aux["input_petz_distance"] <= 1e-8
        assert t.seed == seed
        json.dumps(t.to_json())


def test_exact_marginals_reproduce_the_chain():
    t = tomo_tripartite(_qmc(5), 1e-9, np.random.default_rng(0))
    assert all(c.achieved == 0.0 for c in t.oracle_calls)
    assert t.aux["half_trace_distance"] <= 1e-8
    assert t.aux["fidelity"] >= 1 - 1e-8


@pytest.mark.parametrize("route", ["fidelity-eps", "trace"])
def test_eps_routes(route):
    for seed in range(3):
        t = tomo_tripartite(
            _qmc(seed), None, np.random.default_rng(seed), route=route, eps=0.3
        )
        assert t.guarantee.direction == "<="
        assert t.guarantee.passed, t.to_json()
        assert t.budget.formula_name == "thm1_trace"
    assert ("copies_ab" in t.aux) == (route == "trace")


def test_tomography_with_injected_failure(rng):
    t = tomo_tripartite(_qmc(1), 0.1, rng, failure_prob=1.0)
    assert "failure-injected" in t.tags
    assert t.failure_injected
    assert not t.guarantee.applicable
    assert not t.guarantee.violated


def test_injected_failure_rate():
    f, trials = 0.2, 300
    injected = 0
    for seed in range(trials):
        rng = np.random.default_rng(seed)
        t = tomo_tripartite(_qmc(seed), 1e-9, rng, failure_prob=f)
        assert len(t.oracle_calls) == 2
        injected += t.failure_injected
    expected = 1 - (1 - f) ** 2
    sigma = math.sqrt(expected * (1 - expected) / trials)
    assert abs(injected / trials - expected) <= 3 * sigma


def test_tomography_argument_checks(rng):
    with pytest.raises(ValueError):
        tomo_tripartite(_qmc(0), None, rng)
    with pytest.raises(ValueError):
        tomo_tripartite(_qmc(0), None, rng, route="trace")
    flat = DensityOperator(random_density(4, None, rng).matrix, (2, 2))
    with pytest.raises(DimensionError):
        tomo_tripartite(flat, 0.1, rng)
    with pytest.raises(DimensionError):
        tomo_multipartite(flat, 0.1, rng)


@pytest.mark.parametrize("allocation", ["uniform", "weighted"])
def test_chain_tomography(allocation):
    for seed in range(3):
        rng = np.random.default_rng(seed)
        rho = random_markov_chain((2, 2, 2, 2), rng)
        t = tomo_multipartite(rho, 0.2, rng, allocation=allocation)
        assert t.guarantee.passed, t.to_json()
        assert t.aux["meets_target"]
        assert t.aux["input_chain_error"] <= 1e-7
        assert [c.marginal for c in t.oracle_calls] == ["12", "34", "23"]
        assert [c.group for c in t.oracle_calls] == ["odd", "odd", "even"]
        assert t.budget.formula_name == "thm4_fidelity"


def test_chain_tomography_on_three_systems(rng):
    t = tomo_multipartite(_qmc(2), 0.1, rng)
    assert len(t.oracle_calls) == 2
    assert t.guarantee.passed


def test_certify_equal(rng):
    sigma = _qmc(3)
    t = certify(sigma, sigma, 0.1, rng, failure_prob=0.0)
    assert t.output == "equal"
    assert t.aux["truth"] == "equal"
    assert t.aux["marginals_close"] and t.aux["chain_floor_holds"]
    assert t.guarantee.passed and t.guarantee.applicable
    assert t.budget.formula_name == "thm2_fidelity"


def test_certify_far(rng):
    for _ in range(3):
        structure = draw_markov_structure((2, 2, 2), None, rng)
        sigma = assemble_qmc(structure)
        _, rho = perturb_markov_structure(structure, 0.05, rng)
        t = certify(rho, sigma, 0.05, rng, failure_prob=0.0)
        assert t.aux["truth"] == "far"
        assert t.output == "far"
        assert t.guarantee.passed


def test_certify_promise_and_trace_mode(rng):
    structure = draw_markov_structure((2, 2, 2), None, rng)
    sigma = assemble_qmc(structure)
    _, rho = perturb_markov_structure(structure, 0.02, rng)
    t = certify(rho, sigma, 0.05, rng, failure_prob=0.0)
    assert "promise-violated" in t.tags
    assert not t.guarantee.applicable
    t = certify(sigma, sigma, None, rng, mode="trace", eps=0.2, failure_prob=0.0)
    assert t.aux["delta"] == pytest.approx(0.02)
    assert t.output == "equal"
    assert t.budget.formula_name == "thm2_trace"
    with pytest.raises(DimensionError):
        certify(sigma, _qmc(0, (2, 3, 2)), 0.1, rng)


def test_certify_injected_failure(rng):
    sigma = _qmc(4)
    t = certify(sigma, sigma, 0.1, rng, failure_prob=1.0)
    assert t.output == "far"
    assert t.failure_injected
    assert not t.guarantee.passed
    assert not t.guarantee.violated


@pytest.mark.parametrize("orientation", ["bc", "ab"])
def test_tester_accepts_chains(orientation):
    for seed in range(3):
        t = qmc_test(_qmc(seed, (2, 3, 2)), 0.3, np.random.default_rng(seed), orientation)
        assert t.aux["truth"] == "Markov"
        assert t.output == "Markov"
        assert t.aux["statistic"] <= t.aux["markov_ceiling"]
        assert t.guarantee.passed


def test_tester_rejects_far_states(rng):
    rho = far_from_markov(_qmc(6), 0.3)
    t = qmc_test(rho, 0.3, rng)
    assert t.aux["truth"] == "far"
    assert t.output == "far"
    assert t.aux["statistic"] >= t.aux["far_floor"] - 1e-9
    assert t.budget.formula_name == "thm3_trace"
    assert t.aux["exact_marginal"] == "AB"


def test_tester_promise_gap(rng):
    rho = far_from_markov(_qmc(7), 0.1)
    t = qmc_test(rho, 0.3, rng)
    assert "promise-violated" in t.tags
    assert not t.guarantee.applicable
    with pytest.raises(ValueError):
        qmc_test(rho, 0.3, rng, orientation="ac")


def test_subpackage_exports():
    import qmclab.protocols as protocols
    from qmclab.protocols import certification, testing

    assert "ground_truth" not in vars(protocols)
    assert "logger" not in vars(protocols)
    assert set(protocols.__all__) <= set(vars(protocols))
    sigma = _qmc(0)
    assert certification.ground_truth(sigma, sigma, 0.1) == "equal"
    assert testing.ground_truth(sigma, 0.3) == "Markov"
