import math

import numpy as np
import pytest

from funnelkit import allocation
from funnelkit.allocation import (
    disjoint_task_leakage,
    minimize,
    privacy_funnel_model,
    solve_allocation,
    solve_and_synthesize,
    solve_standard,
)
from funnelkit.model import DataModel, TaskSpec, with_gammas
from funnelkit.oracle import enumerate_lp_vertices, random_model
from funnelkit.types import InfeasibleModelError
from funnelkit.utils import seeded


def test_simplex_small_programs():
    # min -x - y s.t. x + 2y <= 4, 3x + y <= 6
    res = minimize([-1.0, -1.0], np.zeros((0, 2)), [], [[1.0, 2.0], [3.0, 1.0]], [4.0, 6.0])
    assert res.status == "optimal"
    assert res.x == pytest.approx([1.6, 1.2])
    assert res.objective == pytest.approx(-2.8)

    # x + y >= 3 with x, y <= 1 is infeasible
    res = minimize([1.0, 1.0], [[1.0, 1.0]], [3.0], np.eye(2), [1.0, 1.0])
    assert res.status == "infeasible"


def test_simplex_redundant_equalities():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    res = solve_standard([1.0, 2.0, 3.0], A, [1.0, 2.0])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(1.0)
    assert res.x == pytest.approx([1.0, 0.0, 0.0])


def test_parity_allocation(parity_model):
    alloc = solve_allocation(parity_model)
    assert alloc.optimal
    assert alloc.total_leakage_bits == pytest.approx(0.5, abs=1e-9)
    assert alloc.alphas == pytest.approx([1.5, 1.0], abs=1e-9)
    assert alloc.leakage_per_component == pytest.approx([0.5, 0.0], abs=1e-9)


def test_leakage_free_region(parity_model):
    alloc = solve_allocation(with_gammas(parity_model, [0.5, 2.0]))
    assert alloc.total_leakage_bits == pytest.approx(0.0, abs=1e-12)
    assert alloc.alphas == pytest.approx(alloc.taus)
    alloc = solve_allocation(with_gammas(parity_model, [0.0, 0.0]))
    assert alloc.total_leakage_bits == 0.0


def test_infeasible(parity_model):
    alloc = solve_allocation(with_gammas(parity_model, [1.0, 4.5]))
    assert alloc.status == "infeasible"
    assert alloc.violated_tasks == [1]
    assert math.isinf(alloc.total_leakage_bits)
    with pytest.raises(InfeasibleModelError) as info:
        solve_and_synthesize(with_gammas(parity_model, [1.0, 4.5]))
    assert info.value.tasks == (1,)


def test_lexicographic_tie_break(parity_component):
    # one task over both components: every split of 0.5 extra bits is optimal
    m = DataModel([parity_component, parity_component], [TaskSpec((0, 1), gamma_bits=2.5)])
    alloc = solve_allocation(m)
    assert alloc.total_leakage_bits == pytest.approx(0.5, abs=1e-9)
    assert alloc.alphas == pytest.approx([1.0, 1.5], abs=1e-9)


def test_solve_and_synthesize(parity_model):
    bundle = solve_and_synthesize(parity_model)
    assert bundle.metrics.leakage_bits == pytest.approx(0.5, abs=1e-9)
    assert all(bundle.metrics.satisfied(parity_model.gammas))
    assert len(bundle.product.factors) == 2
    assert bundle.solutions[0].mix_p == pytest.approx(0.5)


def test_disjoint_tasks(parity_component, skewed_component):
    m = DataModel(
        [parity_component, skewed_component, parity_component],
        [TaskSpec((0,), gamma_bits=1.5), TaskSpec((1, 2), gamma_bits=2.0)],
    )
    assert solve_allocation(m).total_leakage_bits == pytest.approx(disjoint_task_leakage(m), abs=1e-9)
    overlapping = DataModel(m.components, list(m.tasks) + [TaskSpec((0, 1), gamma_bits=1.0)])
    with pytest.raises(ValueError):
        disjoint_task_leakage(overlapping)


def test_privacy_funnel_special_case(skewed_component):
    alpha = 0.5 * (skewed_component.h_x + skewed_component.h_x - skewed_component.h_s)
    alloc = solve_allocation(privacy_funnel_model(skewed_component, alpha))
    assert alloc.total_leakage_bits == pytest.approx(alpha - (skewed_component.h_x - skewed_component.h_s), abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_matches_vertex_enumeration(seed):
    with seeded(seed):
        m = random_model(max_components=4, max_x=3, max_tasks=4, cap=10**6, infeasible=0.15, tight=0.2)
    alloc = solve_allocation(m)
    brute = enumerate_lp_vertices(m)
    if math.isinf(brute):
        assert not alloc.optimal
    else:
        assert alloc.optimal
        assert alloc.total_leakage_bits == pytest.approx(brute, abs=1e-9)
        for a, tau, comp in zip(alloc.alphas, alloc.taus, m.components):
            assert tau - 1e-9 <= a <= comp.h_x + 1e-9
        assert alloc.total_leakage_bits == pytest.approx(
            sum(max(0.0, a - t) for a, t in zip(alloc.alphas, alloc.taus)), abs=1e-9
        )


def test_module_constants():
    assert allocation.LEX_SLACK < 1e-9


@pytest.mark.parametrize("gammas", [[0.0, 0.0], [0.5, 2.0], [1.0, 2.0]])
def test_leakage_free_targets_release_privatizer(parity_model, gammas):
    bundle = solve_and_synthesize(with_gammas(parity_model, gammas))
    assert bundle.allocation.total_leakage_bits == 0.0
    assert bundle.allocation.alphas == bundle.allocation.taus
    assert all(s.mix_p is None for s in bundle.solutions)
    assert bundle.metrics.leakage_bits == pytest.approx(0.0, abs=1e-12)


def test_tie_break_does_not_drift(parity_model):
    alloc = solve_allocation(parity_model)
    assert abs(alloc.alphas[0] - 1.5) <= 1e-12
    assert alloc.alphas[1] == alloc.taus[1]
    assert alloc.leakage_per_component[1] == 0.0
