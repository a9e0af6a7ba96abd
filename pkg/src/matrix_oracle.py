"""
Dense truncations of the operators to a window, used to cross-check the
closed-form norms.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np

from .config import config
from .exceptions import InputError, OracleConvergenceError, WindowExhaustedError
from .operators import OperatorKind
from .space_core import TreeFunction, WeightMap
from .tree_core import TreeModel, VertexAddress, Window, children_n, gamma, window_vertices

logger = logging.getLogger(__name__)


@dataclass
class TruncatedOperator:
    """
    Matrix of an operator restricted to the window vertices.

    Entry (i, j) is the coefficient of χ_{v_i} in the image of χ_{v_j};
    images leaving the window are dropped. Boundary vertices are those
    whose column or row lost entries that way.
    """

    kind: OperatorKind
    vertices: List[VertexAddress]
    matrix: np.ndarray
    weights: WeightMap
    p: float
    boundary: Set[VertexAddress] = field(default_factory=set)
    index: Dict[VertexAddress, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {v: i for i, v in enumerate(self.vertices)}

    @property
    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights(v) for v in self.vertices], dtype=float)

    def to_vector(self, f: TreeFunction) -> np.ndarray:
        x = np.zeros(len(self.vertices), dtype=complex)
        for v, value in f.items():
            if v not in self.index:
                raise WindowExhaustedError(f"{v} lies outside the truncation window", witness=str(v))
            x[self.index[v]] = value
        return x

    def from_vector(self, x: np.ndarray) -> TreeFunction:
        return TreeFunction({self.vertices[i]: complex(x[i]) for i in np.flatnonzero(x)})

    def apply(self, f: TreeFunction) -> TreeFunction:
        return self.from_vector(self.matrix @ self.to_vector(f))


def truncate_operator(
    kind: OperatorKind,
    weights: WeightMap,
    model: TreeModel,
    window: Optional[Window] = None,
    p: float = 2.0,
    n: int = 1,
) -> TruncatedOperator:
    """Materialize S, S*, B, T_n or Φ on a window of the model as a dense matrix."""
    window = window or model.window
    if window.up > model.window.up or window.down > model.window.down:
        raise InputError(f"truncation window {window} exceeds the model window {model.window}")
    vertices = window_vertices(model, window.up, window.down)
    index = {v: i for i, v in enumerate(vertices)}
    size = len(vertices)
    matrix = np.zeros((size, size), dtype=float)
    boundary = set()

    def parent_in_window(v: VertexAddress) -> Optional[VertexAddress]:
        parent = model.parent(v) if v.path or v.up < model.window.up else None
        if parent is not None and parent not in index:
            boundary.add(v)
            return None
        return parent

    for j, v in enumerate(vertices):
        if kind == OperatorKind.FORWARD_SHIFT:
            kids = model.children(v)
            for kid in kids:
                if kid in index:
                    matrix[index[kid], j] = 1.0
                else:
                    boundary.add(v)
        elif kind in (OperatorKind.BACKWARD_SHIFT, OperatorKind.ADJOINT_SHIFT):
            parent = parent_in_window(v)
            if parent is not None:
                coefficient = 1.0 if kind == OperatorKind.BACKWARD_SHIFT else weights(v) / weights(parent)
                matrix[index[parent], j] = coefficient
        elif kind == OperatorKind.RIGHT_INVERSE:
            if v.level + n > window.down:
                boundary.add(v)
                continue
            count = gamma(model, v, n)
            for w in children_n(model, v, n):
                matrix[index[w], j] = 1.0 / count
        elif kind == OperatorKind.PHI_MAP:
            matrix[j, j] = 1.0 / weights(v)
        else:
            matrix[j, j] = weights(v)

    logger.info(f"[oracle] {kind.value} truncated to {size} vertices, {len(boundary)} on the boundary")
    return TruncatedOperator(kind, vertices, matrix, weights, p, boundary, index)


def _weighted_norm(x: np.ndarray, weights: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(x) ** p * weights) ** (1.0 / p))


def estimate_norm_p2(op: TruncatedOperator) -> float:
    """
    Largest singular value of the truncation as an operator on L^2(λ), by
    power iteration on the Gram operator of D^(1/2) A D^(-1/2).

    The returned value ‖M x‖ for a unit x never exceeds σ_max.

    Raises:
        OracleConvergenceError: no convergence within the iteration cap
    """
    if op.p != 2:
        raise InputError(f"singular values give the norm for p = 2 only, got p = {op.p}")
    size = len(op.vertices)
    if size == 0 or not np.any(op.matrix):
        return 0.0
    root_weights = np.sqrt(op.weight_vector)

    def forward(x: np.ndarray) -> np.ndarray:
        return root_weights * (op.matrix @ (x / root_weights))

    def adjoint(y: np.ndarray) -> np.ndarray:
        return (op.matrix.T @ (root_weights * y)) / root_weights

    x = np.ones(size) / np.sqrt(size)
    estimate, gap = 0.0, np.inf
    for iteration in range(config.ORACLE_MAX_ITERATIONS):
        y = forward(x)
        previous, estimate = estimate, float(np.linalg.norm(y))
        z = adjoint(y)
        length = np.linalg.norm(z)
        if length == 0:
            return 0.0
        x = z / length
        gap = abs(estimate - previous)
        if iteration > 0 and gap <= config.ORACLE_TOLERANCE * estimate:
            logger.debug(f"[oracle] converged after {iteration + 1} iterations: {estimate}")
            return estimate
    raise OracleConvergenceError(
        f"power iteration did not converge in {config.ORACLE_MAX_ITERATIONS} iterations",
        last_value=estimate,
        gap=float(gap),
    )


def lower_bound_norm_p(op: TruncatedOperator, trials: int, seed: int = 0) -> float:
    """
    max ‖A v‖_p / ‖v‖_p over point masses and seeded random vectors; never
    above the true operator norm.
    """
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    weights = op.weight_vector
    best = 0.0
    for j in range(len(op.vertices)):
        column = op.matrix[:, j]
        if np.any(column):
            best = max(best, _weighted_norm(column, weights, op.p) / weights[j] ** (1.0 / op.p))
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        v = rng.uniform(-1.0, 1.0, len(op.vertices))
        denominator = _weighted_norm(v, weights, op.p)
        if denominator > 0:
            best = max(best, _weighted_norm(op.matrix @ v, weights, op.p) / denominator)
    return best


def write_matrix_csv(op: TruncatedOperator, path: str, label=None) -> None:
    """Dump the matrix with vertex labels on both axes."""
    label = label or str
    names = [label(v) for v in op.vertices]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["vertex"] + names)
        for name, row in zip(names, op.matrix):
            writer.writerow([name] + [repr(float(value)) for value in row])
