"""
Orbit shadowing: one vector whose backward-shift orbit passes within ε of
each of finitely many targets, built from the right inverses T_n.

The vector lives deep in the tree (hundreds of levels down for small ε),
so it is kept lumped: exact point masses plus blocks, where a block
spreads c·γ(w,a)/D over every w in child^m(u). Blocks stay blocks under
B^n, and their q-norms have closed forms, so every reported error is an
exact evaluation.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from .dynamics import DECAYS, decay_report, default_grid
from .exceptions import InputError, LeafObstructionError, ShadowingError
from .operators import apply_B_pow
from .space_core import TreeFunction, WeightMap, descendant_sum, norm_p
from .tree_core import TreeModel, VertexAddress, children_n, find_leaf, gamma, parent_n

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Block:
    """Value coefficient·γ(w, gamma_shift)/divisor on every w in child^depth(anchor)."""

    anchor: VertexAddress
    depth: int
    coefficient: complex
    gamma_shift: int = 0
    divisor: int = 1

    @property
    def level(self) -> int:
        return self.anchor.level + self.depth

    def collapsed_value(self, model: TreeModel) -> complex:
        """Σ of the block over child^depth(anchor): the value B^depth leaves at the anchor."""
        return self.coefficient * (gamma(model, self.anchor, self.depth + self.gamma_shift) / self.divisor)

    def mass(self, weights: WeightMap, q: float, model: TreeModel) -> float:
        """Σ_w |value(w)|^q λ_w."""
        total = descendant_sum(
            model, self.anchor, self.depth, weights,
            gamma_shift=self.gamma_shift, gamma_power=q, gamma_divisor=self.divisor,
        )
        return abs(self.coefficient) ** q * total


class LumpedFunction:
    def __init__(self, points: Optional[TreeFunction] = None, blocks: Sequence[Block] = ()):
        self.points = points or TreeFunction.zero()
        self.blocks: Tuple[Block, ...] = tuple(block for block in blocks if block.coefficient != 0)

    @classmethod
    def zero(cls) -> "LumpedFunction":
        return cls()

    @classmethod
    def right_inverse(cls, g: TreeFunction, n: int, model: TreeModel) -> "LumpedFunction":
        """T_n g, lumped."""
        blocks = []
        for u, value in g.items():
            count = gamma(model, u, n)
            if count == 0:
                raise LeafObstructionError(f"{u} has no descendants {n} levels down", witness=str(u))
            blocks.append(Block(u, n, value, 0, count))
        return cls(blocks=blocks)

    def __add__(self, other: Union["LumpedFunction", TreeFunction]) -> "LumpedFunction":
        if isinstance(other, TreeFunction):
            return LumpedFunction(self.points + other, self.blocks)
        return LumpedFunction(self.points + other.points, self.blocks + other.blocks)

    def __sub__(self, other: TreeFunction) -> "LumpedFunction":
        return LumpedFunction(self.points - other, self.blocks)

    def backward_pow(self, n: int, model: TreeModel) -> "LumpedFunction":
        """B^n, exactly."""
        points = apply_B_pow(self.points, n, model)
        blocks = []
        for block in self.blocks:
            if n < block.depth:
                blocks.append(Block(block.anchor, block.depth - n, block.coefficient, block.gamma_shift + n, block.divisor))
                continue
            target = parent_n(model, block.anchor, n - block.depth) if n > block.depth else block.anchor
            if target is not None:
                points = points + TreeFunction.point_mass(target, block.collapsed_value(model))
        return LumpedFunction(points, blocks)

    def _regions(self) -> List[Tuple[VertexAddress, int]]:
        return [(v, v.level) for v in self.points.support()] + [(b.anchor, b.level) for b in self.blocks]

    def is_disjoint(self, model: TreeModel) -> bool:
        """True when no two pieces share a vertex."""
        regions = self._regions()
        for i, (first, level) in enumerate(regions):
            for second, other_level in regions[i + 1:]:
                if level != other_level:
                    continue
                if model.is_ancestor_or_self(first, second) or model.is_ancestor_or_self(second, first):
                    return False
        return True

    def materialize(self, model: TreeModel) -> TreeFunction:
        result = self.points
        for block in self.blocks:
            values = {}
            for w in children_n(model, block.anchor, block.depth):
                values[w] = block.coefficient * (gamma(model, w, block.gamma_shift) / block.divisor)
            result = result + TreeFunction(values)
        return result

    def norm_q(self, weights: WeightMap, q: float, model: TreeModel) -> float:
        if not self.is_disjoint(model):
            return norm_p(self.materialize(model), weights, q)
        masses = [abs(value) ** q * weights(v) for v, value in self.points.items()]
        masses.extend(block.mass(weights, q, model) for block in self.blocks)
        return math.fsum(masses) ** (1.0 / q)

    def __repr__(self) -> str:
        return f"LumpedFunction(points={len(self.points)}, blocks={len(self.blocks)})"


class StageRecord(BaseModel):
    k: int
    n_k: int
    support_depth: int
    tail_bound: float
    error: Optional[float] = None


class ShadowErrorTable(BaseModel):
    rows: List[StageRecord]
    vector_norm: float
    epsilon: Optional[float] = None


@dataclass
class ShadowPlan:
    targets: List[TreeFunction]
    weights: WeightMap
    q: float
    epsilon: float
    model: TreeModel
    schedule: List[int] = field(default_factory=list)
    tail_bounds: List[float] = field(default_factory=list)
    corrections: List[TreeFunction] = field(default_factory=list)
    vector: Optional[LumpedFunction] = None
    errors: List[float] = field(default_factory=list)

    def support_depth(self, k: int) -> int:
        return max((v.level for v in self.targets[k].support()), default=0)

    def to_dict(self) -> dict:
        label = self.model.label
        return {
            "q": self.q,
            "epsilon": self.epsilon,
            "schedule": list(self.schedule),
            "tail_bounds": list(self.tail_bounds),
            "targets": [_function_entries(g, label) for g in self.targets],
            "corrections": [_function_entries(c, label) for c in self.corrections],
            "errors": list(self.errors),
            "vector": None if self.vector is None else {
                "points": _function_entries(self.vector.points, label),
                "blocks": [
                    {
                        "anchor": label(block.anchor),
                        "depth": block.depth,
                        "re": block.coefficient.real,
                        "im": block.coefficient.imag,
                        "gamma_shift": block.gamma_shift,
                        "divisor": str(block.divisor),
                    }
                    for block in self.vector.blocks
                ],
            },
        }


def _function_entries(f: TreeFunction, label) -> List[dict]:
    return [{"address": label(v), "re": value.real, "im": value.imag} for v, value in f.items()]


def _cross_bound(
    g: TreeFunction, n_later: int, n_earlier: int, weights: WeightMap, q: float, model: TreeModel
) -> Tuple[float, Optional[VertexAddress]]:
    """
    Upper bound on ‖B^n_earlier T_n_later g‖_q, with the support vertex
    contributing most.
    """
    total, worst, worst_term = 0.0, None, -1.0
    for u, value in g.items():
        mass = descendant_sum(
            model, u, n_later - n_earlier, weights,
            gamma_shift=n_earlier, gamma_power=q, gamma_divisor=gamma(model, u, n_later),
        )
        term = abs(value) * mass ** (1.0 / q)
        total += term
        if term > worst_term:
            worst, worst_term = u, term
    return total, worst


def plan_schedule(
    targets: Sequence[TreeFunction],
    weights: WeightMap,
    q: float,
    epsilon: float,
    model: TreeModel,
    n_max: Optional[int] = None,
) -> ShadowPlan:
    """
    Choose n_1 < ... < n_m for the targets.

    n_1 = 1. Each later n_j is the smallest value past the previous stage's
    spacing such that stage j disturbs every earlier target by at most
    ε·2^(-j). Stage k's tail bound sums what later stages add to it.

    Raises:
        ShadowingError: the tree is not rooted and leafless, Ω does not
            decay at a target vertex, or no n inside the window is small
            enough
    """
    if not targets:
        raise InputError("shadowing needs at least one target")
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    if not model.rooted:
        raise ShadowingError("orbit shadowing is built for rooted trees only")
    leaf = find_leaf(model)
    if leaf is not None:
        raise ShadowingError("orbit shadowing needs a leafless tree", witness=str(leaf))
    for g in targets:
        for v in g.support():
            model.require(v)

    plan = ShadowPlan(list(targets), weights, q, epsilon, model)
    support = sorted({v for g in targets for v in g.support()})
    if support:
        report = decay_report("Omega", support, default_grid(n_max), weights, q, model)
        for vertex, verdict in report.probe_verdicts.items():
            if verdict != DECAYS:
                raise ShadowingError(f"Ω does not decay at {vertex} ({verdict})", witness=vertex)

    tails = [0.0] * len(targets)
    for j, g in enumerate(targets):
        if j == 0:
            plan.schedule.append(1)
            continue
        previous = plan.schedule[-1]
        lower = previous + 2 * plan.support_depth(j - 1) + 1
        budget = epsilon * 2.0 ** -(j + 1)
        deepest = model.window.down - plan.support_depth(j)
        chosen, blocking = None, None
        for n in range(lower, deepest + 1):
            bounds = []
            for k in range(j):
                bound, worst = _cross_bound(g, n, plan.schedule[k], weights, q, model)
                bounds.append(bound)
                if bound > budget:
                    blocking = worst
                    break
            else:
                chosen = n
                for k, bound in enumerate(bounds):
                    tails[k] += bound
                break
        if chosen is None:
            raise ShadowingError(
                f"no n <= {deepest} makes stage {j + 1} smaller than {budget:.3g}; widen the window",
                witness=None if blocking is None else str(blocking),
            )
        logger.info(f"[shadow] stage {j + 1}: n = {chosen}")
        plan.schedule.append(chosen)

    plan.tail_bounds = tails
    return plan


def build_shadow_vector(plan: ShadowPlan) -> LumpedFunction:
    """
    f_k = f_(k-1) + T_(n_k) c_k with c_k = g_k − B^(n_k) f_(k-1), so that
    B^(n_k) f_k = g_k exactly. Fills the plan's corrections, vector and
    errors.
    """
    if len(plan.schedule) != len(plan.targets):
        raise InputError("plan has no schedule; run plan_schedule first")
    model = plan.model
    f = LumpedFunction.zero()
    corrections = []
    for g, n in zip(plan.targets, plan.schedule):
        interference = f.backward_pow(n, model).materialize(model)
        c = g - interference
        corrections.append(c)
        f = f + LumpedFunction.right_inverse(c, n, model)
    plan.corrections = corrections
    plan.vector = f
    table = verify_shadow(f, plan)
    plan.errors = [row.error for row in table.rows]
    logger.info(f"[shadow] built vector with errors {plan.errors}")
    return f


def verify_shadow(f: Union[LumpedFunction, TreeFunction], plan: ShadowPlan) -> ShadowErrorTable:
    """Exact ‖B^(n_k) f − g_k‖_q for every stage, plus ‖f‖_q."""
    model = plan.model
    lumped = LumpedFunction(f) if isinstance(f, TreeFunction) else f
    rows = []
    for k, (g, n) in enumerate(zip(plan.targets, plan.schedule)):
        error = (lumped.backward_pow(n, model) - g).norm_q(plan.weights, plan.q, model)
        rows.append(
            StageRecord(
                k=k + 1,
                n_k=n,
                support_depth=plan.support_depth(k),
                tail_bound=plan.tail_bounds[k] if k < len(plan.tail_bounds) else 0.0,
                error=error,
            )
        )
    return ShadowErrorTable(rows=rows, vector_norm=lumped.norm_q(plan.weights, plan.q, model), epsilon=plan.epsilon)
