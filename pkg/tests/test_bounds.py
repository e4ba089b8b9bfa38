import json
import math

import numpy as np
import pytest

from qmclab.base import BoundReport, bound_names, get_bound
from qmclab.bounds import (
    adversarial_search,
    check_core_l2,
    check_gram_fidelity,
    check_half_marginal,
    check_infidelity_sqrt,
    check_norm_relations,
    check_partial_trace_l2,
    check_petz_fidelity,
    check_petz_l2_dim,
    check_powers_stormer,
    check_schatten_4to2,
)
from qmclab.errors import DegenerateInputError, InvalidExponentError, UnknownBoundError
from qmclab.linalg import SystemLayout, identity, kron
from qmclab.states import DensityOperator, random_density, random_qmc

ALL_BOUNDS = [
    "core_l2",
    "core_l2_simplified",
    "general_petz",
    "gram_fidelity",
    "half_marginal",
    "infidelity_sqrt",
    "norm_relations",
    "partial_trace_l2",
    "petz_fidelity",
    "petz_l2_dim",
    "petz_trace",
    "powers_stormer",
    "schatten_4to2",
]


def test_registry():
    assert bound_names() == ALL_BOUNDS
    assert get_bound("core_l2").bound_name == "core_l2"
    with pytest.raises(UnknownBoundError):
        get_bound("triangle")


@pytest.mark.parametrize("name", ALL_BOUNDS)
@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2)])
def test_bounds_hold_on_random_instances(name, dims):
    bound = get_bound(name)
    for seed in range(8):
        report = bound.run(SystemLayout(dims), seed)
        assert report.seed == seed
        assert report.passed(), report.to_json()


@pytest.mark.parametrize("name", ["core_l2", "petz_fidelity", "petz_trace"])
def test_low_rank_instances(name):
    bound = get_bound(name)
    for seed in range(4):
        assert bound.run(SystemLayout((2, 2, 2)), seed, rank=1).passed()


def test_runs_are_reproducible():
    bound = get_bound("petz_trace")
    first = bound.run(SystemLayout((2, 2, 2)), 7)
    again = bound.run(SystemLayout((2, 2, 2)), 7)
    assert first.inputs_digest == again.inputs_digest
    assert first.slack == again.slack
    json.dumps(first.to_json())


def _marginals(rho):
    return rho.marginal([0, 1]), rho.marginal([1, 2])


def _pairs(rho, sig):
    return rho.marginal([0, 1]), sig.marginal([0, 1]), rho.marginal([1, 2]), sig.marginal([1, 2])


def test_identical_inputs_have_zero_lhs(rng):
    rho = random_qmc((2, 2, 2), rng=rng)
    rho_ab, rho_bc = _marginals(rho)
    report = check_core_l2(rho_ab, rho_ab, rho_bc, rho_bc)
    assert report.lhs == pytest.approx(0.0, abs=1e-10)
    assert report.passed()
    assert check_petz_fidelity(rho_ab, rho_ab, rho_bc, rho_bc).passed()
    assert isinstance(report, BoundReport)


def test_petz_fidelity_on_close_chains(rng):
    rho = random_qmc((2, 2, 2), rng=rng)
    for t in (1e-4, 1e-2, 0.1):
        w = random_density(8, None, rng).matrix
        sig = DensityOperator((1 - t) * rho.matrix + t * w, rho.layout)
        report = check_petz_fidelity(*_pairs(rho, sig))
        assert report.passed()
        assert report.aux["fidelity"] >= report.aux["fidelity_floor"] - 1e-8


@pytest.mark.parametrize("p", [2.0, 3.0, math.inf])
def test_petz_l2_dim_exponents(rng, p):
    rho = DensityOperator(random_density(8, None, rng).matrix, (2, 2, 2))
    sig = DensityOperator(random_density(8, None, rng).matrix, (2, 2, 2))
    assert check_petz_l2_dim(*_pairs(rho, sig), p=p).passed()
    with pytest.raises(InvalidExponentError):
        check_petz_l2_dim(*_pairs(rho, sig), p=0.5)


def test_half_marginal(rng):
    rho = random_qmc((2, 2, 2), rng=rng)
    sig_bc = DensityOperator(random_density(4, None, rng).matrix, (2, 2))
    report = check_half_marginal(rho.marginal([0, 1]), rho.marginal([1, 2]), sig_bc)
    assert report.passed()


def test_lemma_checks(rng):
    rho = random_density(4, None, rng).matrix
    sigma = random_density(4, None, rng).matrix
    assert check_infidelity_sqrt(rho, sigma).passed()
    assert check_infidelity_sqrt(rho, rho).lhs == pytest.approx(0.0, abs=1e-10)
    relations = check_norm_relations(rho, sigma)
    assert relations.passed()
    assert relations.aux["binding"] in {
        k[: -len("_slack")] for k in relations.aux if k.endswith("_slack")
    }
    x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    y = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert check_gram_fidelity(x, y).passed()
    for p in (1.0, 1.5, 2.0, 4.0):
        assert check_schatten_4to2(x, y, p).passed()


def test_degenerate_inputs(rng):
    x = rng.standard_normal((3, 3)) + 0j
    with pytest.raises(DegenerateInputError):
        check_gram_fidelity(np.zeros((3, 3)), x)
    with pytest.raises(InvalidExponentError):
        check_schatten_4to2(x, x, 0.5)


def test_powers_stormer_trace_tag(rng):
    p = random_density(3, None, rng).matrix
    q = random_density(3, None, rng).matrix
    assert "non-unit-trace" not in check_powers_stormer(p, q).tags
    report = check_powers_stormer(2 * p, q)
    assert "non-unit-trace" in report.tags
    assert report.passed()


def test_partial_trace_equality_case(rng):
    y = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    report = check_partial_trace_l2(kron(identity(2), y), SystemLayout((2, 3)))
    assert report.slack == pytest.approx(0.0, abs=1e-10)
    assert report.passed()


def test_search_stays_feasible():
    layout = SystemLayout((2, 2, 2))
    for name in ("infidelity_sqrt", "norm_relations", "petz_trace"):
        result = adversarial_search(name, layout, np.random.default_rng(3), steps=40, restarts=2)
        assert result.bound_name == name
        assert result.evaluations >= 2
        assert result.min_slack >= -1e-8
        assert result.min_slack == result.report.slack


def test_search_is_deterministic():
    layout = SystemLayout((2, 2, 2))
    runs = [
        adversarial_search("core_l2", layout, np.random.default_rng(11), steps=20, restarts=2)
        for _ in range(2)
    ]
    assert runs[0].min_slack == runs[1].min_slack
    assert runs[0].report.inputs_digest == runs[1].report.inputs_digest
