import math

import pytest

from qmclab.errors import ConfigError, DimensionError, UnknownFormulaError
from qmclab.linalg import fidelity, trace_distance
from qmclab.protocols.budget import FORMULAS, chain_deltas, sample_budget
from qmclab.protocols.oracle import (
    EstimationOracleConfig,
    oracle_estimate,
    oracle_estimate_detailed,
)
from qmclab.states import DensityOperator, random_density


def test_known_values():
    assert sample_budget("hhj_fidelity", 2, 0.1).n == 11983
    assert sample_budget("thm2_trace", (2, 2, 2), 0.1, {"C": 1}).n == 800
    budget = sample_budget("thm2_fidelity", (2, 3, 2), 0.5)
    assert budget.n == 100 * 4 * 3 * 2
    assert budget.constants == {"C": 100.0, "c": 1.0, "k": 1.0}
    assert budget.to_json()["dims"] == [2, 3, 2]


@pytest.mark.parametrize("name", sorted(FORMULAS))
def test_budgets_shrink_with_target(name):
    dims = (2, 3, 2)
    counts = [sample_budget(name, dims, t).n for t in (0.01, 0.05, 0.1, 0.3, 0.5)]
    assert counts == sorted(counts, reverse=True)
    assert min(counts) >= 1


def test_trace_form_is_fidelity_form_at_half_eps_squared():
    eps = 0.2
    assert (
        sample_budget("thm1_trace", (2, 2, 2), eps).n
        == sample_budget("thm1_fidelity", (2, 2, 2), eps**2 / 2).n
    )


def test_branches_are_recorded():
    budget = sample_budget("thm1_fidelity", (2, 2, 2), 0.1)
    aux = budget.aux
    assert budget.n == math.ceil(min(aux["log_branch"], aux["poly_branch"]))
    proof = sample_budget("thm4_proof", (2, 2, 2, 2), 0.1)
    assert proof.aux["delta_i"] == pytest.approx(0.1 / (8 * 16))
    assert proof.n >= proof.aux["odd_pass"]


def test_budget_errors():
    with pytest.raises(UnknownFormulaError):
        sample_budget("thm9", (2, 2, 2), 0.1)
    with pytest.raises(DimensionError):
        sample_budget("thm1_fidelity", (2, 2), 0.1)
    with pytest.raises(DimensionError):
        sample_budget("thm4_fidelity", (2, 2), 0.1)
    with pytest.raises(DimensionError):
        sample_budget("ow16_trace", (2, 0), 0.1)
    with pytest.raises(ConfigError) as e:
        sample_budget("thm2_trace", (2, 2, 2), 0.0)
    assert e.value.field == "target"
    with pytest.raises(ValueError):
        sample_budget("thm2_fidelity", (2, 2, 2), -0.1)
    assert sample_budget("thm3_proof", (2, 2, 2), 1.5).n >= 1


def test_unit_and_large_targets():
    at_one = sample_budget("thm1_fidelity", (2, 2, 2), 1.0)
    assert math.isfinite(at_one.aux["log_branch"])
    assert 1 <= at_one.n <= sample_budget("thm1_fidelity", (2, 2, 2), 0.1).n
    assert at_one.n == math.ceil(100 * 8 * 4 * min(math.log(8), 1.0))
    assert sample_budget("hhj_fidelity", 2, 1.0).n >= 1
    # Beyond the dimension the logarithm is clamped and the count bottoms out.
    assert sample_budget("hhj_fidelity", 2, 5.0).n == 1
    assert sample_budget("thm1_fidelity", (2, 2, 2), 20.0).n == 1


def test_chain_deltas():
    dims = (2, 3, 4, 2)
    uniform = chain_deltas(dims, 0.1)
    assert uniform == [0.1 / (8 * 16)] * 3
    weighted = chain_deltas(dims, 0.1, "weighted")
    assert sum(math.sqrt(d) for d in weighted) == pytest.approx(
        math.sqrt(0.1) / (2 * math.sqrt(2))
    )
    assert weighted[1] > weighted[0]
    with pytest.raises(ValueError):
        chain_deltas(dims, 0.1, "greedy")


def _state(rng):
    return DensityOperator(random_density(4, None, rng).matrix, (2, 2))


def test_oracle_stress_infidelity(rng):
    rho = _state(rng)
    cfg = EstimationOracleConfig("infidelity", 0.05)
    for _ in range(5):
        est = oracle_estimate_detailed(rho, cfg, rng)
        assert not est.failed
        assert est.state.dims == (2, 2)
        measured = 1 - fidelity(rho.matrix, est.state.matrix)
        assert measured == pytest.approx(est.discrepancy)
        assert 0.045 * (1 - 1e-9) <= measured <= 0.05


def test_oracle_benign_and_trace(rng):
    rho = _state(rng)
    benign = EstimationOracleConfig("infidelity", 0.05, stress=False)
    for _ in range(5):
        assert oracle_estimate_detailed(rho, benign, rng).discrepancy <= 0.05 * (1 + 1e-6)
    trace = EstimationOracleConfig("trace", 0.1)
    est = oracle_estimate(rho, trace, rng)
    assert 0.09 <= trace_distance(rho.matrix, est.matrix) <= 0.1


def test_oracle_resolution_and_failure(rng):
    rho = _state(rng)
    exact = oracle_estimate_detailed(rho, EstimationOracleConfig("infidelity", 1e-12), rng)
    assert exact.state is rho
    assert exact.discrepancy == 0.0
    failing = EstimationOracleConfig("infidelity", 0.05, failure_prob=1.0)
    est = oracle_estimate_detailed(rho, failing, rng)
    assert est.failed
    assert est.state.dims == rho.dims


def test_oracle_config_validation():
    with pytest.raises(ConfigError):
        EstimationOracleConfig("l2", 0.1)
    with pytest.raises(ConfigError):
        EstimationOracleConfig("infidelity", 0.0)
    with pytest.raises(ConfigError):
        EstimationOracleConfig("infidelity", 1.0)
    with pytest.raises(ConfigError) as e:
        EstimationOracleConfig("trace", 0.1, failure_prob=1.5)
    assert e.value.field == "failure_prob"
    assert EstimationOracleConfig("trace", 1.5).target == 1.5
