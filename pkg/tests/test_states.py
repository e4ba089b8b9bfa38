import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmclab.errors import DimensionError, InfeasibleTargetError, TraceError
from qmclab.linalg import fidelity, identity, kron, trace_distance
from qmclab.petz import chain_reconstruct, cmi, markov_diagnostics, pair_marginals
from qmclab.states import (
    BlockSpec,
    DensityOperator,
    assemble_qmc,
    draw_markov_structure,
    embed_with_max_mixed,
    ghz_state,
    perturb_away,
    perturb_markov_structure,
    product_state,
    random_block_spec,
    random_density,
    random_markov_chain,
    random_qmc,
    random_unitary,
    validate_density,
)

LAYOUTS = [(2, 2, 2), (2, 3, 2), (3, 4, 2)]


def test_random_density_rank(rng):
    for rank in (1, 2, 4):
        rho = random_density(4, rank, rng)
        assert rho.trace == pytest.approx(1.0)
        assert np.linalg.matrix_rank(rho.matrix, tol=1e-10) == rank
    with pytest.raises(DimensionError):
        random_density(3, 4, rng)


def test_random_unitary(rng):
    u = random_unitary(5, rng)
    np.testing.assert_allclose(u.conj().T @ u, identity(5), atol=1e-12)


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_random_block_spec_covers_dimension(d_b, seed):
    spec = random_block_spec(d_b, np.random.default_rng(seed))
    assert spec.d_b == d_b
    assert sum(spec.weights) == pytest.approx(1.0)


def test_block_spec_validation():
    with pytest.raises(DimensionError):
        BlockSpec(())
    with pytest.raises(DimensionError):
        BlockSpec(((1, 0),))
    with pytest.raises(DimensionError):
        BlockSpec(((1, 1), (1, 1)), (0.7, 0.7))
    assert BlockSpec(((1, 2), (2, 1))).offsets() == [0, 2]


@pytest.mark.parametrize("dims", LAYOUTS)
def test_random_qmc_is_markov(dims):
    for seed in range(5):
        rho = random_qmc(dims, rng=np.random.default_rng(seed))
        diag = markov_diagnostics(rho)
        assert diag["cmi"] <= 1e-8
        assert diag["petz_distance"] <= 1e-8
        assert diag["orderings_disagreement"] <= 1e-8


def test_qmc_with_fixed_spec(rng):
    spec = BlockSpec(((1, 1), (2, 1)), (0.25, 0.75))
    structure = draw_markov_structure((2, 3, 2), spec, rng)
    assert structure.spec.splits == spec.splits
    rho = assemble_qmc(structure)
    assert rho.dims == (2, 3, 2)
    assert cmi(rho) <= 1e-8
    with pytest.raises(DimensionError):
        draw_markov_structure((2, 4, 2), spec, rng)


def test_ghz_is_not_markov():
    rho = ghz_state((2, 2, 2))
    assert cmi(rho) == pytest.approx(1.0, abs=1e-9)
    assert markov_diagnostics(rho)["petz_distance"] == pytest.approx(1.0, abs=1e-9)


def test_markov_chain_recovers_from_pairs(rng):
    rho = random_markov_chain((2, 2, 3, 2), rng)
    rec = chain_reconstruct(pair_marginals(rho))
    assert rec.dims == (2, 2, 3, 2)
    assert trace_distance(rho.matrix, rec.matrix) <= 1e-7
    with pytest.raises(DimensionError):
        random_markov_chain((2, 2), rng)


def test_product_state(rng):
    a, b, c = (random_density(d, None, rng) for d in (2, 3, 2))
    rho = product_state(a, b, c)
    assert rho.dims == (2, 3, 2)
    np.testing.assert_allclose(rho.marginal([1]).matrix, b.matrix, atol=1e-12)
    np.testing.assert_allclose(rho.marginal([0, 2]).matrix, kron(a.matrix, c.matrix), atol=1e-12)
    assert abs(cmi(rho)) <= 1e-9
    assert product_state(a) is a


def test_embed_with_max_mixed(rng):
    rho = random_density(2, None, rng)
    wide = embed_with_max_mixed(rho, "right", 3)
    assert wide.dims == (2, 3)
    np.testing.assert_allclose(wide.marginal([0]).matrix, rho.matrix, atol=1e-12)
    assert embed_with_max_mixed(rho, "left", 3).dims == (3, 2)


def test_perturb_away_hits_target(rng):
    rho = random_qmc((2, 2, 2), rng=rng)
    moved = perturb_away(rho, "infidelity", 0.05, rng)
    measured = 1 - fidelity(rho.matrix, moved.matrix)
    assert 0.05 <= measured + 1e-12
    assert measured <= 0.05 * (1 + 1e-6)
    moved = perturb_away(rho, "trace", 0.2, rng)
    assert trace_distance(rho.matrix, moved.matrix) == pytest.approx(0.2, rel=1e-6)
    assert perturb_away(rho, "trace", 0.0, rng) is rho
    with pytest.raises(InfeasibleTargetError):
        perturb_away(rho, "trace", 2.5, rng)


def test_perturbed_structure_stays_markov(rng):
    structure = draw_markov_structure((2, 2, 2), None, rng)
    _, rho = perturb_markov_structure(structure, 0.02, rng)
    assert cmi(rho) <= 1e-8
    measured = 1 - fidelity(assemble_qmc(structure).matrix, rho.matrix)
    assert measured == pytest.approx(0.02, rel=1e-6)


def test_validate_density_checks_layout():
    with pytest.raises(TraceError):
        validate_density(1.2 * identity(2) / 2, [2])
    with pytest.raises(DimensionError):
        validate_density(identity(4) / 4, [2, 3])
    rho = DensityOperator(identity(8) / 8, (2, 2, 2))
    with pytest.raises(DimensionError):
        rho.marginal([3])
