#!/usr/bin/env python3
"""
Tests for the dense truncations and the norm estimates built on them.
"""

import csv
import math

import numpy as np
import pytest

from src.exceptions import InputError
from src.matrix_oracle import estimate_norm_p2, lower_bound_norm_p, truncate_operator, write_matrix_csv
from src.operators import OperatorKind, apply_B, apply_S, apply_Sstar, apply_T_n, shift_norm
from src.space_core import TreeFunction, WeightMap, norm_p, random_tree_function
from src.tree_core import ROOT, FiniteTree, Window, kary_rooted, kary_unrooted


@pytest.mark.parametrize("depth", [4, 7, 10])
def test_shift_singular_value_matches_closed_form(depth):
    """
    The truncated S^T S is diagonal with entry outdegree(u) = 2 at every
    vertex above the bottom level, so σ_max = √2 at any depth >= 1. Depth 10
    stands in for deeper windows without an 8191 x 8191 dense matrix.
    """
    model = kary_rooted(2, Window(0, depth))
    op = truncate_operator(OperatorKind.FORWARD_SHIFT, WeightMap.unit(), model)
    estimate = estimate_norm_p2(op)
    closed = shift_norm(WeightMap.unit(), 2, model).value
    assert closed == pytest.approx(math.sqrt(2))
    assert closed - 1e-3 <= estimate <= closed + 1e-9


def test_oracle_grows_with_the_window():
    weights = WeightMap.geometric(0.5)
    model = kary_rooted(3, Window(0, 6))
    estimates = [
        estimate_norm_p2(truncate_operator(OperatorKind.FORWARD_SHIFT, weights, model, Window(0, depth)))
        for depth in (2, 4, 6)
    ]
    assert all(later >= earlier - 1e-12 for earlier, later in zip(estimates, estimates[1:]))
    assert estimates[-1] <= shift_norm(weights, 2, model).value + 1e-9


@pytest.mark.parametrize("kind", [OperatorKind.FORWARD_SHIFT, OperatorKind.BACKWARD_SHIFT, OperatorKind.ADJOINT_SHIFT])
def test_matrix_agrees_with_operators_inside_the_window(kind):
    model = kary_rooted(2, Window(0, 8))
    weights = WeightMap.geometric(0.75)
    op = truncate_operator(kind, weights, model, Window(0, 5))
    for seed in range(20):
        f = random_tree_function(model, 4, 6, seed=seed)
        if kind == OperatorKind.FORWARD_SHIFT:
            expected = apply_S(f, model)
        elif kind == OperatorKind.BACKWARD_SHIFT:
            expected = apply_B(f, model)
        else:
            expected = apply_Sstar(f, weights, model)
        assert norm_p(op.apply(f) - expected, weights, 2) < 1e-14


def test_right_inverse_matrix_flags_its_boundary():
    model = kary_rooted(2, Window(0, 6))
    op = truncate_operator(OperatorKind.RIGHT_INVERSE, WeightMap.unit(), model, Window(0, 4), n=2)
    assert {v.level for v in op.boundary} == {3, 4}
    g = TreeFunction({ROOT: 1.0, model.resolve("1"): -2.0})
    assert op.apply(g) == apply_T_n(g, 2, model)


def test_unary_line_shift_is_the_subdiagonal():
    op = truncate_operator(OperatorKind.FORWARD_SHIFT, WeightMap.unit(), kary_rooted(1, Window(0, 4)))
    np.testing.assert_array_equal(op.matrix, np.eye(5, k=-1))
    assert op.boundary == {op.vertices[-1]}


def test_unrooted_truncation_keeps_spine_order():
    model = kary_unrooted(2, Window(3, 3))
    op = truncate_operator(OperatorKind.BACKWARD_SHIFT, WeightMap.unit(), model, Window(1, 1))
    assert len(op.vertices) == 7
    assert op.matrix.sum() == 6
    assert op.boundary == {model.resolve("^1/@")}


def test_small_windows():
    single = FiniteTree([], root="a")
    zero = truncate_operator(OperatorKind.BACKWARD_SHIFT, WeightMap.unit(), single)
    assert estimate_norm_p2(zero) == 0.0

    phi = truncate_operator(OperatorKind.PHI_MAP, WeightMap.table({ROOT: 4.0}), single)
    assert estimate_norm_p2(phi) == pytest.approx(0.25)
    assert lower_bound_norm_p(phi, trials=4) == pytest.approx(0.25)


def test_lower_bounds():
    model = kary_rooted(2, Window(0, 4))
    forward = truncate_operator(OperatorKind.FORWARD_SHIFT, WeightMap.unit(), model)
    assert lower_bound_norm_p(forward, trials=32, seed=1) == pytest.approx(math.sqrt(2))

    backward = truncate_operator(OperatorKind.BACKWARD_SHIFT, WeightMap.unit(), model, p=1)
    assert lower_bound_norm_p(backward, trials=32, seed=1) == pytest.approx(1.0)

    for p in (1.5, 3.0):
        weighted = truncate_operator(OperatorKind.FORWARD_SHIFT, WeightMap.geometric(0.5), model, p=p)
        assert lower_bound_norm_p(weighted, trials=32) <= shift_norm(WeightMap.geometric(0.5), p, model).value + 1e-9

    with pytest.raises(InputError):
        lower_bound_norm_p(forward, trials=0)
    with pytest.raises(InputError):
        estimate_norm_p2(backward)


def test_truncation_window_must_fit_the_model():
    with pytest.raises(InputError):
        truncate_operator(OperatorKind.FORWARD_SHIFT, WeightMap.unit(), kary_rooted(2, Window(0, 3)), Window(0, 5))


def test_matrix_csv_dump(tmp_path):
    op = truncate_operator(OperatorKind.FORWARD_SHIFT, WeightMap.unit(), kary_rooted(1, Window(0, 2)))
    path = tmp_path / "matrix.csv"
    write_matrix_csv(op, str(path))
    with open(path, encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["vertex", "@", "0", "0.0"]
    assert rows[2] == ["0", "1.0", "0.0", "0.0"]
