#!/usr/bin/env python3
"""
Tests for S, S*, B, T_n, the isometry Φ and the closed-form norms.
"""

import math

import numpy as np
import pytest

from src.config import config
from src.exceptions import DomainError, InputError, LeafObstructionError
from src.dynamics import omega
from src.operators import (
    OperatorKind,
    apply_B,
    apply_B_pow,
    apply_operator,
    apply_S,
    apply_S_pow,
    apply_Sstar,
    apply_T_n,
    backward_bound,
    check_unitary_equivalence,
    contraction_check,
    mu_weights,
    phi_inverse,
    phi_map,
    shift_norm,
)
from src.space_core import TreeFunction, WeightMap, dual_pairing, norm_p, random_tree_function
from src.tree_core import (
    ROOT,
    FiniteTree,
    VertexAddress,
    Window,
    bilateral_line,
    kary_rooted,
    kary_unrooted,
    random_recursive,
    unilateral_leaf_line,
    window_vertices,
)


def addr(text):
    return VertexAddress.parse(text)


@pytest.fixture
def binary():
    return kary_rooted(2, Window(0, 32))


def test_forward_shift_examples(binary):
    assert apply_S(TreeFunction.point_mass(addr("0")), binary) == TreeFunction({addr("0.0"): 1, addr("0.1"): 1})

    line = kary_rooted(1, Window(0, 8))
    assert apply_S(TreeFunction({ROOT: 2.5}), line) == TreeFunction({addr("0"): 2.5})

    f = random_tree_function(binary, 3, 4, seed=1)
    assert apply_S_pow(f, 0, binary) == f
    depth_two = apply_S_pow(TreeFunction.point_mass(ROOT), 2, binary)
    assert sorted(str(v) for v in depth_two.support()) == ["0.0", "0.1", "1.0", "1.1"]


def test_adjoint_of_point_mass(binary):
    weights = WeightMap.geometric(0.5)
    image = apply_Sstar(TreeFunction.point_mass(addr("1.0")), weights, binary)
    assert image == TreeFunction({addr("1"): 0.5})
    assert apply_Sstar(TreeFunction.point_mass(ROOT), weights, binary) == TreeFunction.zero()


def test_backward_shift_examples(binary):
    assert apply_B(TreeFunction.point_mass(addr("0.1")), binary) == TreeFunction.point_mass(addr("0"))

    f = random_tree_function(binary, 3, 6, seed=2)
    assert apply_B_pow(f, f.max_level() + 1, binary) == TreeFunction.zero()

    level_two = TreeFunction({v: 1.0 for v in window_vertices(binary, down=2) if v.level == 2})
    assert apply_B_pow(level_two, 2, binary) == TreeFunction({ROOT: 4.0})

    with pytest.raises(InputError):
        apply_B_pow(f, -1, binary)


def test_duality_on_random_recursive_tree():
    """⟨Sf, g⟩ = ⟨f, S*g⟩ on 100 seeded pairs, p = 3/2."""
    model = random_recursive(200, seed=0)
    rng = np.random.default_rng(5)
    vertices = window_vertices(model)
    weights = WeightMap.table({v: float(rng.uniform(0.5, 2.0)) for v in vertices})
    depth = model.window.down
    for i in range(100):
        f = random_tree_function(model, depth, 8, seed=2 * i)
        g = random_tree_function(model, depth, 8, seed=2 * i + 1)
        lhs = dual_pairing(apply_S(f, model), g, weights)
        rhs = dual_pairing(f, apply_Sstar(g, weights, model), weights)
        assert abs(lhs - rhs) < 1e-12


def test_right_inverse_is_exact(binary):
    for i in range(50):
        g = random_tree_function(binary, 3, 5, seed=100 + i)
        for n in range(1, 7):
            back = apply_B_pow(apply_T_n(g, n, binary), n, binary)
            assert back.support() == g.support()
            assert max(abs(back[v] - g[v]) for v in g.support()) < 1e-14


def test_right_inverse_mass_identity(binary):
    """‖T_n g‖_q^q = Σ_u |g(u)|^q Ω(u, n)."""
    weights = WeightMap.geometric(0.5)
    q = 2.0
    for i in range(10):
        g = random_tree_function(binary, 3, 4, seed=200 + i)
        for n in (1, 3, 5):
            lhs = norm_p(apply_T_n(g, n, binary), weights, q) ** q
            rhs = math.fsum(abs(value) ** q * omega(u, n, weights, q, binary) for u, value in g.items())
            assert lhs == pytest.approx(rhs, rel=1e-12)


def test_right_inverse_stops_at_a_leaf():
    finite = FiniteTree([("a", "b"), ("b", "c")], root="a")
    with pytest.raises(LeafObstructionError):
        apply_T_n(TreeFunction.point_mass(finite.resolve("b")), 2, finite)
    with pytest.raises(InputError):
        apply_T_n(TreeFunction.point_mass(ROOT), 0, finite)


def test_shift_norm_closed_forms():
    estimate = shift_norm(WeightMap.unit(), 2, kary_rooted(2))
    assert estimate.value == pytest.approx(math.sqrt(2))
    assert estimate.tag == "exact"
    assert shift_norm(WeightMap.geometric(0.5), 1, kary_rooted(1)).value == pytest.approx(0.5)
    for p in (1, 2, 5):
        assert shift_norm(WeightMap.unit(), p, bilateral_line()).value == pytest.approx(1.0)


def test_shift_norm_scans_finite_trees():
    finite = FiniteTree([("a", "b"), ("a", "c"), ("b", "d")], root="a")
    weights = WeightMap.table({finite.resolve(name): value for name, value in zip("abcd", (1.0, 2.0, 3.0, 8.0))})
    estimate = shift_norm(weights, 1, finite)
    assert estimate.tag == "exact"
    assert estimate.value == pytest.approx(5.0)
    assert estimate.witness == "@"


def test_table_norms_on_a_window_past_the_vertex_limit():
    """A full binary window 32 levels deep cannot be listed; the scan stops early and the default covers the rest."""
    model = kary_rooted(2)
    weights = WeightMap.table({ROOT: 1.0}, default=1.0)

    estimate = shift_norm(weights, 2, model)
    assert estimate.value == pytest.approx(math.sqrt(2))
    assert estimate.tag == "window-limited"
    assert "scan stopped" in estimate.note

    bound = backward_bound(weights, 2, model)
    assert bound.value == pytest.approx(2.0)
    assert bound.tag == "window-limited"
    assert backward_bound(weights, 3, model).value == pytest.approx(4.0)


def test_table_scan_depth_follows_the_vertex_limit(monkeypatch):
    monkeypatch.setattr(config, "WINDOW_LIMIT", 100)
    model = kary_rooted(2)
    weights = WeightMap.table({ROOT: 1.0, addr("0"): 0.25}, default=1.0)
    estimate = shift_norm(weights, 1, model)
    assert estimate.value == pytest.approx(8.0)
    assert estimate.witness == "0"
    assert "scan stopped at level 5" in estimate.note

    # without a default the tail is unknown, so only the scanned levels count
    bare = WeightMap.table({v: 1.0 for v in window_vertices(model, down=5)})
    assert shift_norm(bare, 1, model).value == pytest.approx(2.0)


def test_backward_bound_closed_forms():
    bound = backward_bound(WeightMap.unit(), 2, kary_rooted(3))
    assert bound.value == pytest.approx(3.0)
    assert backward_bound(WeightMap.geometric(2.0), 1, kary_rooted(2)).value <= 1
    assert backward_bound(WeightMap.unit(), 2, unilateral_leaf_line()).value == pytest.approx(1.0)


def test_phi_is_an_isometry(binary):
    weights = WeightMap.geometric(2.0)
    for q in (1.5, 2.0, 3.0):
        mu = mu_weights(weights, q)
        for v in window_vertices(binary, down=3):
            assert mu(v) * weights(v) ** (q - 1) == pytest.approx(1.0)
        for i in range(20):
            f = random_tree_function(binary, 4, 6, seed=300 + i)
            assert norm_p(phi_map(f, weights), weights, q) == pytest.approx(norm_p(f, mu, q), rel=1e-12)
            assert phi_inverse(phi_map(f, weights), weights) == f


def test_phi_with_unit_weights_is_identity(binary):
    f = random_tree_function(binary, 3, 5, seed=4)
    assert phi_map(f, WeightMap.unit()) == f


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_unitary_equivalence(binary, q):
    weights = WeightMap.geometric(0.75)
    for i in range(100):
        f = random_tree_function(binary, 4, 6, seed=400 + i)
        assert check_unitary_equivalence(f, weights, q, binary) < 1e-12


def test_unitary_equivalence_needs_q_above_one(binary):
    with pytest.raises(DomainError):
        check_unitary_equivalence(TreeFunction.point_mass(ROOT), WeightMap.unit(), 1.0, binary)


def test_backward_shift_contracts_l1():
    model = kary_rooted(2, Window(0, 8))
    report = contraction_check(OperatorKind.BACKWARD_SHIFT, WeightMap.unit(), 1.0, model, samples=200, seed=0)
    assert report.max_ratio <= 1 + 1e-12
    assert report.point_mass_ratio >= 1 - 1e-12

    adjoint = contraction_check(OperatorKind.ADJOINT_SHIFT, WeightMap.geometric(0.5), 1.0, model, samples=50)
    assert adjoint.max_ratio <= 1 + 1e-12

    with pytest.raises(InputError):
        contraction_check(OperatorKind.FORWARD_SHIFT, WeightMap.unit(), 1.0, model)


def test_apply_operator_dispatch(binary):
    f = random_tree_function(binary, 3, 4, seed=9)
    weights = WeightMap.geometric(2.0)
    assert apply_operator(OperatorKind.FORWARD_SHIFT, f, binary, n=2) == apply_S_pow(f, 2, binary)
    assert apply_operator(OperatorKind.BACKWARD_SHIFT, f, binary) == apply_B(f, binary)
    assert apply_operator(OperatorKind.ADJOINT_SHIFT, f, binary, weights) == apply_Sstar(f, weights, binary)
    assert apply_operator(OperatorKind.PHI_MAP, f, binary, weights) == phi_map(f, weights)
    assert apply_operator(OperatorKind.PHI_INVERSE, f, binary, weights) == phi_inverse(f, weights)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_forward_shift_respects_its_norm(binary, p):
    weights = WeightMap.geometric(0.75)
    norm = shift_norm(weights, p, binary).value
    for i in range(200):
        f = random_tree_function(binary, 4, 6, seed=600 + i)
        assert norm_p(apply_S(f, binary), weights, p) <= norm * norm_p(f, weights, p) * (1 + 1e-12)


@pytest.mark.parametrize("q", [2.0, 3.0])
@pytest.mark.parametrize("weights", [WeightMap.unit(), WeightMap.geometric(0.75), WeightMap.geometric(2.0)])
def test_backward_shift_respects_its_bound(binary, weights, q):
    """‖Bf‖_q <= M^(1/q) ‖f‖_q."""
    bound = backward_bound(weights, q, binary).value ** (1.0 / q)
    for i in range(200):
        f = random_tree_function(binary, 4, 6, seed=800 + i)
        assert norm_p(apply_B(f, binary), weights, q) <= bound * norm_p(f, weights, q) * (1 + 1e-12)


def test_powers_match_repeated_application():
    model = kary_unrooted(2, Window(8, 8))
    for i in range(50):
        f = random_tree_function(model, 3, 5, seed=1000 + i)
        n = 1 + i % 4
        forward, backward = f, f
        for _ in range(n):
            forward = apply_S(forward, model)
            backward = apply_B(backward, model)
        assert apply_S_pow(f, n, model) == forward

        direct = apply_B_pow(f, n, model)
        assert set(direct.support()) == set(backward.support())
        assert max(abs(direct[v] - backward[v]) for v in direct.support()) < 1e-14
