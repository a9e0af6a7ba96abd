"""
Decay quantities of the backward shift and the hypercyclicity deciders
built on them.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .config import config
from .exceptions import DomainError, InputError, LeafObstructionError, UnboundedOperatorError
from .operators import backward_bound, mu_weights
from .space_core import WeightKind, WeightMap, descendant_sum
from .tree_core import (
    ROOT,
    AncestorShareSet,
    ShapeClass,
    TreeModel,
    VertexAddress,
    classify_shape,
    find_branch_vertex,
    find_leaf,
    free_end_verdict,
    gamma,
    parent_n,
    window_vertices,
)

logger = logging.getLogger(__name__)

DECAYS = "DecaysToZero"
DIVERGES = "DivergesToInfinity"
INCONCLUSIVE = "Inconclusive"


def _gamma_checked(model: TreeModel, u: VertexAddress, n: int) -> int:
    count = gamma(model, u, n)
    if count == 0:
        raise LeafObstructionError(f"a leaf below {u} leaves child^{n}({u}) empty", witness=str(u))
    return count


def _scaled(total: float, count: int, q: float) -> float:
    """total / count^q without overflowing on large counts."""
    if total == 0:
        return 0.0
    if math.isinf(total):
        return math.inf
    return math.exp(math.log(total) - q * math.log(count))


def omega(u: VertexAddress, n: int, weights: WeightMap, q: float, model: TreeModel) -> float:
    """Ω(u,n) = γ(u,n)^(-q) Σ_{v ∈ child^n(u)} λ_v."""
    count = _gamma_checked(model, u, n)
    return _scaled(descendant_sum(model, u, n, weights), count, q)


def omega_star(u: VertexAddress, n: int, weights: WeightMap, q: float, model: TreeModel) -> float:
    """γ(u,n)^(-q) Σ_{v ∈ child^n(u)} λ_v^(1-q); the Ω of the adjoint side."""
    count = _gamma_checked(model, u, n)
    return _scaled(descendant_sum(model, u, n, weights, weight_power=1.0 - q), count, q)


def necessary_sum(u: VertexAddress, n: int, weights: WeightMap, q: float, model: TreeModel) -> float:
    """Σ_{v ∈ child^n(u)} λ_v^(-1/q)."""
    _gamma_checked(model, u, n)
    return descendant_sum(model, u, n, weights, weight_power=-1.0 / q)


def theta(u: VertexAddress, n: int, weights: WeightMap, q: float, model: TreeModel) -> float:
    """Θ(u,n) = γ(parent^n(u), n)^(q-1) λ_{parent^n(u)}."""
    ancestor = parent_n(model, u, n)
    if ancestor is None:
        raise DomainError(f"{u} has no {n}-ancestor", witness=str(u))
    count = gamma(model, ancestor, n)
    return math.exp((q - 1) * math.log(count) + math.log(weights(ancestor)))


QUANTITIES: Dict[str, Callable[..., float]] = {
    "Omega": omega,
    "Theta": theta,
    "OmegaStar": omega_star,
    "NecessarySum": necessary_sum,
}

QUANTITY_ALIASES = {
    "omega": "Omega",
    "theta": "Theta",
    "omega_star": "OmegaStar",
    "necessary_sum": "NecessarySum",
}


class DecayReport(BaseModel):
    quantity: str
    q: float
    probes: List[str]
    grid: List[int]
    values: Dict[str, List[float]]
    ratios: Dict[str, Optional[float]]
    probe_verdicts: Dict[str, str]
    subsequence: Dict[str, str]
    shared_n: List[int] = []
    verdict: str
    note: str = ""


class HypercyclicityVerdict(BaseModel):
    operator: str
    status: str  # NotHC | HC | ReducesToSalas | EvidenceOnly
    reason: Optional[str] = None
    theorem: str
    witness: Optional[str] = None
    evidence_graded: bool = False
    reports: List[DecayReport] = []
    note: str = ""


def _fit_ratio(grid: Sequence[int], values: Sequence[float]) -> Optional[float]:
    """Geometric ratio per step of a least-squares line through log(values)."""
    if len(values) < 2:
        return None
    if any(value <= 0 for value in values):
        return 0.0 if all(value == 0 for value in values[1:]) else None
    if any(math.isinf(value) for value in values):
        return math.inf
    slope = np.polyfit(np.asarray(grid, dtype=float), np.log(np.asarray(values, dtype=float)), 1)[0]
    return float(math.exp(slope))


def _classify(grid: Sequence[int], values: Sequence[float]) -> tuple:
    start = len(values) // 2
    tail_grid, tail = list(grid[start:]), list(values[start:])
    ratio = _fit_ratio(tail_grid, tail)
    if ratio is None:
        return INCONCLUSIVE, ratio
    pairs = list(zip(tail, tail[1:]))
    if ratio < 1 - config.DECAY_MARGIN and all(b <= a for a, b in pairs):
        return DECAYS, ratio
    if ratio > 1 + config.DECAY_MARGIN and all(b >= a for a, b in pairs):
        return DIVERGES, ratio
    return INCONCLUSIVE, ratio


def _common_subsequence(rows: Sequence[Sequence[float]], start: int = 0) -> List[int]:
    """Grid indices from start on where every row drops strictly below its value at the previous pick."""
    picked, last = [], None
    for i in range(start, len(rows[0])):
        current = [row[i] for row in rows]
        if last is None or all(value < previous for value, previous in zip(current, last)):
            picked.append(i)
            last = current
    return picked


def shared_decay(grid: Sequence[int], rows: Sequence[Sequence[float]]) -> Tuple[str, List[int], List[Optional[float]]]:
    """
    Grade every row along one subsequence n_k common to all of them,
    picked from the last half of the grid.

    Returns:
        (verdict, n_k, fitted ratio per row); DecaysToZero needs at least
        three common points and every ratio below 1 - margin
    """
    picked = _common_subsequence(rows, len(grid) // 2) if rows else []
    subsequence = [grid[i] for i in picked]
    if len(picked) < 3:
        return INCONCLUSIVE, subsequence, [None] * len(rows)
    ratios = [_fit_ratio(subsequence, [row[i] for i in picked]) for row in rows]
    if all(ratio is not None and ratio < 1 - config.DECAY_MARGIN for ratio in ratios):
        return DECAYS, subsequence, ratios
    return INCONCLUSIVE, subsequence, ratios


def joint_decay(reports: Sequence[DecayReport]) -> Tuple[str, List[int]]:
    """
    Whether all reports decay along one shared n_k. Reports on the same
    grid whose probes all decay on the full grid share it outright.
    """
    grid = reports[0].grid
    if any(report.grid != grid for report in reports):
        raise InputError("joint decay needs reports on the same n-grid")
    if all(used == "full" and report.verdict == DECAYS for report in reports for used in report.subsequence.values()):
        return DECAYS, list(grid[len(grid) // 2:])
    rows = [row for report in reports for row in report.values.values()]
    verdict, subsequence, _ = shared_decay(grid, rows)
    return verdict, subsequence


def decay_report(
    quantity: str,
    probes: Sequence[VertexAddress],
    grid: Sequence[int],
    weights: WeightMap,
    q: float,
    model: TreeModel,
) -> DecayReport:
    """
    Evaluate a decay quantity on every (probe, n) cell and grade it.

    A probe decays when its values are nonincreasing over the last half of
    the grid with fitted ratio below 1 - margin. When some probe fails
    that, one running-minimum subsequence shared by all probes is tried,
    and every probe is graded along it. The overall verdict is
    DecaysToZero (or DivergesToInfinity) only when every probe agrees.
    """
    name = QUANTITY_ALIASES.get(quantity, quantity)
    if name not in QUANTITIES:
        raise InputError(f"Unknown decay quantity: {quantity}")
    if not probes:
        raise InputError("decay report needs at least one probe vertex")
    evaluate = QUANTITIES[name]

    values, ratios, verdicts, subsequence = {}, {}, {}, {}
    for u in probes:
        row = [evaluate(u, n, weights, q, model) for n in grid]
        logger.debug(f"[decay] {name} at {u}: {row}")
        key = str(u)
        values[key] = row
        verdicts[key], ratios[key] = _classify(grid, row)
        subsequence[key] = "full"

    common: List[int] = list(grid[len(grid) // 2:])
    outcomes = set(verdicts.values())
    if outcomes != {DECAYS} and DIVERGES not in outcomes and name != "NecessarySum":
        keys = list(values)
        shared, common, shared_ratios = shared_decay(grid, [values[key] for key in keys])
        if shared == DECAYS:
            for key, ratio in zip(keys, shared_ratios):
                verdicts[key], ratios[key], subsequence[key] = DECAYS, ratio, "common"
            outcomes = {DECAYS}

    overall = outcomes.pop() if len(outcomes) == 1 else INCONCLUSIVE
    note = f"{len(probes)} probes, n in [{min(grid)}, {max(grid)}]; evidence, not proof"
    logger.info(f"[decay] {name}: {overall} ({note})")
    return DecayReport(
        quantity=name,
        q=q,
        probes=[str(u) for u in probes],
        grid=list(grid),
        values=values,
        ratios=ratios,
        probe_verdicts=verdicts,
        subsequence=subsequence,
        shared_n=common,
        verdict=overall,
        note=note,
    )


def default_probes(model: TreeModel) -> List[VertexAddress]:
    """All vertices to the configured probe depth (levels -2..2 around the anchor when unrooted)."""
    if model.rooted:
        return window_vertices(model, down=min(model.window.down, config.PROBE_DEPTH))
    reach = min(2, model.window.up, model.window.down)
    return [v for v in window_vertices(model, up=reach, down=reach)]


def default_grid(n_max: Optional[int] = None) -> List[int]:
    n_max = config.N_MAX if n_max is None else n_max
    if n_max < 2:
        raise InputError(f"n_max must be at least 2 to grade decay, got {n_max}")
    return list(range(1, n_max + 1))


# ---------------------------------------------------------------------------
# Deciders
# ---------------------------------------------------------------------------

def decide_forward(model: TreeModel) -> HypercyclicityVerdict:
    """Hypercyclicity of S: never on rooted or branching trees; lines reduce to classical weighted shifts."""
    shape = classify_shape(model)
    if shape == ShapeClass.ROOTED:
        return HypercyclicityVerdict(
            operator="forward",
            status="NotHC",
            reason="Rooted",
            theorem="forward shift on a rooted tree vanishes at the root",
            witness=model.label(ROOT),
        )
    if shape == ShapeClass.HAS_BRANCH_VERTEX:
        witness = find_branch_vertex(model)
        return HypercyclicityVerdict(
            operator="forward",
            status="NotHC",
            reason="Branching",
            theorem="forward shift on a tree with a vertex of outdegree at least 2",
            witness=None if witness is None else model.label(witness),
        )
    if shape in (ShapeClass.BILATERAL_LINE, ShapeClass.UNILATERAL_LEAF_LINE):
        return HypercyclicityVerdict(
            operator="forward",
            status="ReducesToSalas",
            reason=shape.value,
            theorem="the tree is a line, so S is a classical weighted shift",
            note="decide with the classical weight characterization of weighted shifts on sequence spaces",
        )
    return HypercyclicityVerdict(
        operator="forward",
        status="EvidenceOnly",
        theorem="no branch vertex seen near the anchor and no structural metadata",
        note="declare family metadata to obtain a structural verdict",
    )


def _not_hc(operator: str, reason: str, theorem: str, witness: Optional[str] = None, **extra) -> HypercyclicityVerdict:
    return HypercyclicityVerdict(operator=operator, status="NotHC", reason=reason, theorem=theorem, witness=witness, **extra)


def decide_backward(
    model: TreeModel,
    weights: WeightMap,
    q: float,
    probes: Optional[Sequence[VertexAddress]] = None,
    n_max: Optional[int] = None,
    operator: str = "backward",
) -> HypercyclicityVerdict:
    """
    Hypercyclicity of B on L^q(λ).

    The cascade: unbounded B is an error; a leaf rules it out; a bound
    M <= 1 makes B a contraction; unit weights on rooted trees are decided
    exactly by free ends; general rooted weights use the free-end
    necessary condition and then Ω decay; unrooted trees need Θ and Ω
    decay. Decay-based HC verdicts are evidence-graded.
    """
    if q < 1:
        raise InputError(f"q must be >= 1, got {q}")
    bound = backward_bound(weights, q, model)
    if math.isinf(bound.value):
        raise UnboundedOperatorError("B is unbounded on this weighted space", witness=bound.witness)

    leaf = find_leaf(model)
    if leaf is not None:
        return _not_hc(operator, "Leaf", "a leaf keeps B from having dense range", model.label(leaf))

    probes = list(probes) if probes else default_probes(model)
    grid = default_grid(n_max)

    if model.rooted and weights.kind == WeightKind.UNIT and q > 1:
        verdict = free_end_verdict(model, max(grid) + config.PROBE_DEPTH)
        if verdict.kind == "HasFreeEnd":
            return _not_hc(
                operator, "FreeEnd", "unweighted rooted leafless tree with a free end",
                model.label(verdict.witness),
            )
        if verdict.kind == "NoFreeEnd":
            return HypercyclicityVerdict(
                operator=operator,
                status="HC",
                reason="NoFreeEndUnweighted",
                theorem="unweighted rooted leafless tree without free ends",
            )
        return HypercyclicityVerdict(
            operator=operator,
            status="EvidenceOnly",
            theorem="unweighted rooted leafless trees are HC exactly when free ends are absent",
            note=f"free-end search inconclusive to depth {verdict.depth}",
        )

    if bound.tag == "exact" and bound.value <= 1:
        return _not_hc(
            operator, "Contraction", "B is a contraction, so every orbit is bounded",
            note=f"M = {bound.value}",
        )

    if model.rooted:
        verdict = free_end_verdict(model, max(grid) + config.PROBE_DEPTH)
        if verdict.kind == "HasFreeEnd" and weights.bounded_below_along_descent():
            witness = verdict.witness
            report = decay_report("NecessarySum", [witness], grid, weights, q, model)
            return _not_hc(
                operator, "NecessaryFails",
                "the necessary sum stays bounded below a free end when weights are bounded below",
                model.label(witness), reports=[report],
            )
        report = decay_report("Omega", probes, grid, weights, q, model)
        if report.verdict == DECAYS:
            return HypercyclicityVerdict(
                operator=operator,
                status="HC",
                reason="SufficientConditionMet",
                theorem="Ω(u,n) tends to zero for every u on a rooted tree",
                evidence_graded=True,
                reports=[report],
            )
        return HypercyclicityVerdict(
            operator=operator,
            status="EvidenceOnly",
            theorem="rooted weighted trees: only one-sided conditions are available",
            reports=[report],
        )

    omega_report = decay_report("Omega", probes, grid, weights, q, model)
    theta_report = decay_report("Theta", probes, grid, weights, q, model)
    # Θ and Ω must vanish along the same n_k
    joint, shared_n = joint_decay([theta_report, omega_report])
    if joint == DECAYS:
        return HypercyclicityVerdict(
            operator=operator,
            status="HC",
            reason="SufficientConditionMet",
            theorem="Θ(u,n) and Ω(u,n) both tend to zero for every u on an unrooted tree",
            evidence_graded=True,
            reports=[theta_report, omega_report],
            note=f"shared n_k = {shared_n}",
        )
    return HypercyclicityVerdict(
        operator=operator,
        status="EvidenceOnly",
        theorem="unrooted trees: only the sufficient condition is available",
        reports=[theta_report, omega_report],
        note=f"no n_k shared by Θ and Ω at every vertex (tried {shared_n})",
    )


def decide_adjoint(
    model: TreeModel,
    weights: WeightMap,
    q: float,
    probes: Optional[Sequence[VertexAddress]] = None,
    n_max: Optional[int] = None,
) -> HypercyclicityVerdict:
    """
    Hypercyclicity of S* on L^q(λ), via its unitary equivalence with B
    on L^q(μ), μ = λ^(1-q).
    """
    if q == 1:
        return _not_hc("adjoint", "Contraction", "S* is a contraction on L^1")
    leaf = find_leaf(model)
    if leaf is not None:
        return _not_hc("adjoint", "Leaf", "a leaf keeps S* from having dense range", model.label(leaf))
    verdict = decide_backward(model, mu_weights(weights, q), q, probes, n_max, operator="adjoint")
    verdict.note = (verdict.note + "; " if verdict.note else "") + "decided for B on L^q(μ), μ = λ^(1-q)"
    return verdict


def example_weights_rary(r: int, s: float, q: float, anchor: VertexAddress, model: TreeModel) -> WeightMap:
    """
    λ_u = s^(-dist(u, H)), H the vertices sharing an ancestor with the
    anchor, on an r-ary unrooted tree. Requires s > r^(q-1).
    """
    threshold = r ** (q - 1)
    if not s > threshold:
        raise DomainError(f"s = {s} must exceed r^(q-1) = {threshold}")
    meta = model.metadata
    if meta is not None and meta.uniform_outdegree not in (None, r):
        raise InputError(f"tree has outdegree {meta.uniform_outdegree}, not r = {r}")
    return WeightMap.distance_to_h(s, AncestorShareSet(model.resolve(anchor)), model)
