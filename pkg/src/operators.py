"""
The shift operators on finitely supported functions, the isometry between
weighted spaces, and closed-form operator norms.
"""

import logging
import math
from collections import defaultdict
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from .exceptions import DomainError, InputError, LeafObstructionError, WindowExhaustedError
from .space_core import (
    TreeFunction,
    WeightKind,
    WeightMap,
    exact_sum,
    norm_p,
    random_tree_function,
)
from .tree_core import (
    FiniteTree,
    TreeModel,
    VertexAddress,
    children_n,
    gamma,
    parent_n,
    window_vertices,
)

logger = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    FORWARD_SHIFT = "S"
    ADJOINT_SHIFT = "S*"
    BACKWARD_SHIFT = "B"
    RIGHT_INVERSE = "T_n"
    PHI_MAP = "Phi"
    PHI_INVERSE = "Phi^-1"


class NormEstimate(BaseModel):
    value: float
    tag: str  # exact | window-limited
    witness: Optional[str] = None
    note: str = ""


def _grouped(contributions: Dict[VertexAddress, List[complex]]) -> TreeFunction:
    return TreeFunction({v: exact_sum(terms) for v, terms in contributions.items()})


def apply_S(f: TreeFunction, model: TreeModel) -> TreeFunction:
    """(Sf)(v) = f(parent(v)); zero at the root."""
    return apply_S_pow(f, 1, model)


def apply_S_pow(f: TreeFunction, n: int, model: TreeModel) -> TreeFunction:
    if n < 0:
        raise InputError(f"power must be nonnegative, got {n}")
    if n == 0:
        return f
    image = {}
    for u, value in f.items():
        for v in children_n(model, u, n):
            image[v] = value
    return TreeFunction(image)


def apply_Sstar(g: TreeFunction, weights: WeightMap, model: TreeModel) -> TreeFunction:
    """(S*g)(u) = Σ_{v ∈ child(u)} g(v) λ_v / λ_u."""
    contributions = defaultdict(list)
    for v, value in g.items():
        u = parent_n(model, v, 1)
        if u is not None:
            contributions[u].append(value * (weights(v) / weights(u)))
    return _grouped(contributions)


def apply_B(f: TreeFunction, model: TreeModel) -> TreeFunction:
    """(Bf)(u) = Σ_{v ∈ child(u)} f(v)."""
    return apply_B_pow(f, 1, model)


def apply_B_pow(f: TreeFunction, n: int, model: TreeModel) -> TreeFunction:
    if n < 0:
        raise InputError(f"power must be nonnegative, got {n}")
    if n == 0:
        return f
    contributions = defaultdict(list)
    for v, value in f.items():
        u = parent_n(model, v, n)
        if u is not None:
            contributions[u].append(value)
    return _grouped(contributions)


def apply_T_n(g: TreeFunction, n: int, model: TreeModel) -> TreeFunction:
    """
    Right inverse of B^n: spread g(u) evenly over child^n(u).

    Raises:
        LeafObstructionError: some u in the support has no n-th descendants
    """
    if n < 1:
        raise InputError(f"T_n needs n >= 1, got {n}")
    image = {}
    for u, value in g.items():
        count = gamma(model, u, n)
        if count == 0:
            raise LeafObstructionError(
                f"{u} has no descendants {n} levels down, so T_{n} is undefined there", witness=str(u)
            )
        share = value / count
        for w in children_n(model, u, n):
            image[w] = share
    return TreeFunction(image)


def mu_weights(weights: WeightMap, q: float) -> WeightMap:
    """The weights μ with μ_u · λ_u^(q-1) = 1."""
    return weights.power(1.0 - q)


def phi_map(f: TreeFunction, weights: WeightMap) -> TreeFunction:
    """(Φf)(u) = f(u) / λ_u, an isometry from L^q(μ) onto L^q(λ)."""
    return TreeFunction({u: value / weights(u) for u, value in f.items()})


def phi_inverse(g: TreeFunction, weights: WeightMap) -> TreeFunction:
    return TreeFunction({u: value * weights(u) for u, value in g.items()})


def apply_operator(
    kind: OperatorKind,
    f: TreeFunction,
    model: TreeModel,
    weights: Optional[WeightMap] = None,
    n: int = 1,
) -> TreeFunction:
    weights = weights or WeightMap.unit()
    if kind == OperatorKind.FORWARD_SHIFT:
        return apply_S_pow(f, n, model)
    if kind == OperatorKind.BACKWARD_SHIFT:
        return apply_B_pow(f, n, model)
    if kind == OperatorKind.ADJOINT_SHIFT:
        return apply_Sstar(f, weights, model)
    if kind == OperatorKind.RIGHT_INVERSE:
        return apply_T_n(f, n, model)
    if kind == OperatorKind.PHI_MAP:
        return phi_map(f, weights)
    return phi_inverse(f, weights)


def check_unitary_equivalence(f: TreeFunction, weights: WeightMap, q: float, model: TreeModel) -> float:
    """‖S*Φf − ΦBf‖ in L^q(λ); zero up to rounding for every f."""
    if not q > 1:
        raise DomainError(f"the isometry needs q > 1, got {q}")
    lhs = apply_Sstar(phi_map(f, weights), weights, model)
    rhs = phi_map(apply_B(f, model), weights)
    return norm_p(lhs - rhs, weights, q)


class ContractionReport(BaseModel):
    operator: str
    q: float
    samples: int
    max_ratio: float
    point_mass_ratio: float
    witness: Optional[str] = None


def contraction_check(
    kind: OperatorKind,
    weights: WeightMap,
    q: float,
    model: TreeModel,
    samples: int = 200,
    seed: int = 0,
    support_depth: int = 3,
) -> ContractionReport:
    """
    Largest observed ‖Af‖_q / ‖f‖_q over seeded random f, plus the best
    point-mass ratio, for A = B or A = S*.
    """
    if kind not in (OperatorKind.BACKWARD_SHIFT, OperatorKind.ADJOINT_SHIFT):
        raise InputError(f"contraction check applies to B and S*, not {kind.value}")

    def ratio(f: TreeFunction) -> float:
        return norm_p(apply_operator(kind, f, model, weights), weights, q) / norm_p(f, weights, q)

    rng = np.random.default_rng(seed)
    max_ratio = 0.0
    for _ in range(samples):
        size = int(rng.integers(1, 8))
        f = random_tree_function(model, support_depth, size, int(rng.integers(0, 2 ** 31)))
        max_ratio = max(max_ratio, ratio(f))

    best_point, witness = 0.0, None
    for v in window_vertices(model, min(model.window.up, support_depth), min(model.window.down, support_depth)):
        value = ratio(TreeFunction.point_mass(v))
        if value > best_point:
            best_point, witness = value, str(v)
    max_ratio = max(max_ratio, best_point)
    logger.info(f"[contraction] {kind.value} on L^{q}: max ratio {max_ratio}, point mass {best_point}")
    return ContractionReport(
        operator=kind.value, q=q, samples=samples, max_ratio=max_ratio, point_mass_ratio=best_point, witness=witness
    )


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def _has_vertices_above_target(weights: WeightMap, model: TreeModel) -> bool:
    return not model.rooted or weights.target.anchor.level > 0


def _closed_form_degree(weights: WeightMap, model: TreeModel) -> Optional[int]:
    """Outdegree bound usable for a closed-form supremum, or None."""
    meta = model.metadata
    if meta is None or isinstance(model, FiniteTree):
        return None
    if weights.kind in (WeightKind.UNIT, WeightKind.GEOMETRIC):
        return meta.max_outdegree
    if weights.kind == WeightKind.DISTANCE and weights.is_level_function:
        return meta.uniform_outdegree
    return None


def _fitting_window(model: TreeModel) -> Tuple[List[VertexAddress], int]:
    """The window's vertices, or those of the deepest sub-window within the vertex limit."""
    try:
        return window_vertices(model), model.window.down
    except WindowExhaustedError:
        pass
    vertices, depth = [], 0
    for down in range(model.window.down):
        try:
            vertices, depth = window_vertices(model, down=down), down
        except WindowExhaustedError:
            break
    logger.warning(f"[norms] {model.name}: window too wide, scanning down to level {depth} only")
    return vertices, depth


def _default_tail(weights: WeightMap, model: TreeModel) -> Optional[int]:
    """Outdegree seen below every table entry, where all weights equal the default."""
    meta = model.metadata
    if weights.kind != WeightKind.TABLE or weights.default is None or isinstance(model, FiniteTree):
        return None
    if meta is None or meta.uniform_outdegree is None:
        return None
    return meta.uniform_outdegree


def _scan(model: TreeModel, quantity, tail: Optional[float] = None) -> NormEstimate:
    """
    Supremum of quantity(v) over every scanned vertex whose children are
    scanned too, raised to tail when the weights settle to a default.
    """
    vertices, depth = _fitting_window(model)
    best, witness = 0.0, None
    for v in vertices:
        if v.level >= depth:
            continue
        value = quantity(v)
        if value > best:
            best, witness = value, v
    notes = []
    if depth < model.window.down:
        notes.append(f"scan stopped at level {depth}")
    if tail is not None:
        notes.append(f"default tail {tail:.6g}")
        if tail > best:
            best, witness = tail, None
    exact = isinstance(model, FiniteTree) and depth == model.window.down
    return NormEstimate(
        value=best,
        tag="exact" if exact else "window-limited",
        witness=None if witness is None else str(witness),
        note="; ".join(notes),
    )


def shift_norm(weights: WeightMap, p: float, model: TreeModel) -> NormEstimate:
    """
    ‖S‖ on L^p(λ): (sup_u Σ_{v ∈ child(u)} λ_v / λ_u)^(1/p).

    Closed forms cover unit, geometric and level-distance weights on
    families with declared outdegrees. Tables and opaque trees are
    scanned over the window, or its deepest part within the vertex limit,
    and tagged window-limited; a table default on a uniform family adds
    the ratio every vertex below the entries attains.
    """
    degree = _closed_form_degree(weights, model)
    if degree is None:
        estimate = _scan(
            model,
            lambda u: math.fsum(weights(v) / weights(u) for v in model.children(u)),
            tail=_default_tail(weights, model),
        )
        estimate.value = estimate.value ** (1.0 / p)
        return estimate

    if weights.kind == WeightKind.UNIT:
        ratio = 1.0
    elif weights.kind == WeightKind.GEOMETRIC:
        ratio = weights.base
    else:
        ratio = 1.0 / weights.s
        if _has_vertices_above_target(weights, model):
            ratio = max(ratio, weights.s)
    value = math.inf if math.isinf(degree) else (degree * ratio) ** (1.0 / p)
    return NormEstimate(value=value, tag="exact", note=f"closed form, max outdegree {degree}")


def backward_bound(weights: WeightMap, q: float, model: TreeModel) -> NormEstimate:
    """
    M = sup over non-root w of γ(parent(w))^(q-1) λ_parent(w) / λ_w.

    ‖B‖ on L^q(λ) is at most M^(1/q); M is an upper bound only.
    """
    degree = _closed_form_degree(weights, model)
    if degree is None:
        def quantity(u: VertexAddress) -> float:
            kids = model.children(u)
            if not kids:
                return 0.0
            return len(kids) ** (q - 1) * max(weights(u) / weights(v) for v in kids)

        tail = _default_tail(weights, model)
        return _scan(model, quantity, tail=None if tail is None else tail ** (q - 1))

    if weights.kind == WeightKind.UNIT:
        ratio = 1.0
    elif weights.kind == WeightKind.GEOMETRIC:
        ratio = 1.0 / weights.base
    else:
        ratio = weights.s
        if _has_vertices_above_target(weights, model):
            ratio = max(ratio, 1.0 / weights.s)
    return NormEstimate(value=degree ** (q - 1) * ratio, tag="exact", note=f"closed form, max outdegree {degree}")
