"""
Weights, finitely supported functions and the weighted L^p norms on them.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .exceptions import AddressError, DomainError, InputError
from .tree_core import (
    AncestorShareSet,
    TreeModel,
    VertexAddress,
    VertexSet,
    children_n,
    dist_to_set,
    gamma,
    window_vertices,
)

logger = logging.getLogger(__name__)


class WeightKind(str, Enum):
    UNIT = "unit"
    GEOMETRIC = "geometric"
    DISTANCE = "distance_to_H"
    TABLE = "table"


class WeightMap:
    """
    A strictly positive weight on the vertices of one tree.

    Kinds:
        unit: every vertex weighs 1
        geometric: base ** level
        distance_to_H: s ** -dist(v, H)
        table: explicit per-vertex values with an optional default
    """

    def __init__(
        self,
        kind: WeightKind,
        base: float = 1.0,
        s: float = 1.0,
        target: Optional[VertexSet] = None,
        entries: Optional[Mapping[VertexAddress, float]] = None,
        default: Optional[float] = None,
        model: Optional[TreeModel] = None,
    ):
        self.kind = WeightKind(kind)
        self.base = float(base)
        self.s = float(s)
        self.target = target
        self.entries = MappingProxyType(dict(entries or {}))
        self.default = default
        self.model = model
        self._distance_cache: Dict[VertexAddress, int] = {}

        if self.base <= 0 or self.s <= 0:
            raise InputError("weight parameters must be strictly positive")
        for vertex, value in self.entries.items():
            if not value > 0:
                raise InputError(f"weight at {vertex} must be strictly positive, got {value}", witness=str(vertex))
        if default is not None and not default > 0:
            raise InputError(f"default weight must be strictly positive, got {default}")
        if self.kind == WeightKind.DISTANCE and (target is None or model is None):
            raise InputError("distance_to_H weights need a vertex set and a tree")

    @classmethod
    def unit(cls) -> "WeightMap":
        return cls(WeightKind.UNIT)

    @classmethod
    def geometric(cls, base: float) -> "WeightMap":
        return cls(WeightKind.GEOMETRIC, base=base)

    @classmethod
    def distance_to_h(cls, s: float, target: VertexSet, model: TreeModel) -> "WeightMap":
        return cls(WeightKind.DISTANCE, s=s, target=target, model=model)

    @classmethod
    def table(cls, entries: Mapping[VertexAddress, float], default: Optional[float] = None) -> "WeightMap":
        return cls(WeightKind.TABLE, entries=entries, default=default)

    def power(self, exponent: float) -> "WeightMap":
        """The weight v -> λ_v ** exponent, of the same kind."""
        if self.kind == WeightKind.UNIT:
            return self
        if self.kind == WeightKind.GEOMETRIC:
            return WeightMap.geometric(self.base ** exponent)
        if self.kind == WeightKind.DISTANCE:
            return WeightMap.distance_to_h(self.s ** exponent, self.target, self.model)
        default = None if self.default is None else self.default ** exponent
        return WeightMap.table({v: value ** exponent for v, value in self.entries.items()}, default)

    # Level functions depend on the level of a vertex only

    @property
    def is_level_function(self) -> bool:
        if self.kind in (WeightKind.UNIT, WeightKind.GEOMETRIC):
            return True
        if self.kind == WeightKind.DISTANCE:
            meta = self.model.metadata
            return isinstance(self.target, AncestorShareSet) and meta is not None and meta.leafless
        return False

    def level_log_value(self, level: int) -> float:
        if self.kind == WeightKind.UNIT:
            return 0.0
        if self.kind == WeightKind.GEOMETRIC:
            return level * math.log(self.base)
        if self.kind == WeightKind.DISTANCE and self.is_level_function:
            return -abs(level - self.target.anchor.level) * math.log(self.s)
        raise DomainError(f"{self.kind.value} weights are not a function of the level")

    def level_value(self, level: int) -> float:
        return math.exp(self.level_log_value(level))

    def __call__(self, v: VertexAddress) -> float:
        if self.kind == WeightKind.UNIT:
            return 1.0
        if self.kind == WeightKind.GEOMETRIC:
            return self.base ** v.level
        if self.kind == WeightKind.DISTANCE:
            return self.s ** -self.distance(v)
        if v in self.entries:
            return self.entries[v]
        if self.default is None:
            raise AddressError(f"no weight given for vertex {v}", witness=str(v))
        return self.default

    def distance(self, v: VertexAddress) -> int:
        if self.is_level_function:
            return abs(v.level - self.target.anchor.level)
        if v not in self._distance_cache:
            self._distance_cache[v] = dist_to_set(self.model, v, self.target)
        return self._distance_cache[v]

    def bounded_below_along_descent(self) -> Optional[bool]:
        """Whether weights stay bounded away from zero deep below any vertex; None if unknown."""
        if self.kind == WeightKind.UNIT:
            return True
        if self.kind == WeightKind.GEOMETRIC:
            return self.base >= 1
        if self.kind == WeightKind.DISTANCE:
            return self.s <= 1
        if self.default is not None:
            return True
        return None

    def describe(self) -> dict:
        result = {"kind": self.kind.value}
        if self.kind == WeightKind.GEOMETRIC:
            result["base"] = self.base
        elif self.kind == WeightKind.DISTANCE:
            result["s"] = self.s
            if isinstance(self.target, AncestorShareSet):
                result["anchor"] = str(self.target.anchor)
        elif self.kind == WeightKind.TABLE:
            result["entries"] = len(self.entries)
            result["default"] = self.default
        return result


class TreeFunction:
    """
    A finitely supported complex function on vertices. Exact zeros are
    dropped, so two functions are equal iff they have the same support
    and the same values.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Optional[Mapping[VertexAddress, complex]] = None):
        canonical = {}
        for vertex, value in (values or {}).items():
            number = complex(value)
            if number != 0:
                canonical[vertex] = number
        self._values = MappingProxyType(dict(sorted(canonical.items())))

    @classmethod
    def zero(cls) -> "TreeFunction":
        return cls()

    @classmethod
    def point_mass(cls, v: VertexAddress, value: complex = 1.0) -> "TreeFunction":
        return cls({v: value})

    @property
    def values(self) -> Mapping[VertexAddress, complex]:
        return self._values

    def support(self) -> List[VertexAddress]:
        return list(self._values)

    def items(self) -> Iterable[Tuple[VertexAddress, complex]]:
        return self._values.items()

    def max_level(self) -> int:
        return max((v.level for v in self._values), default=0)

    def __getitem__(self, v: VertexAddress) -> complex:
        return self._values.get(v, 0j)

    def __len__(self) -> int:
        return len(self._values)

    def __bool__(self) -> bool:
        return bool(self._values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TreeFunction):
            return NotImplemented
        return dict(self._values) == dict(other._values)

    def __hash__(self):
        return hash(tuple(self._values.items()))

    def __add__(self, other: "TreeFunction") -> "TreeFunction":
        combined = dict(self._values)
        for v, value in other.items():
            combined[v] = combined.get(v, 0j) + value
        return TreeFunction(combined)

    def __neg__(self) -> "TreeFunction":
        return self.scale(-1)

    def __sub__(self, other: "TreeFunction") -> "TreeFunction":
        return self + (-other)

    def scale(self, alpha: complex) -> "TreeFunction":
        return TreeFunction({v: alpha * value for v, value in self.items()})

    def __repr__(self) -> str:
        body = ", ".join(f"{v}: {value}" for v, value in self.items())
        return f"TreeFunction({{{body}}})"


@dataclass(frozen=True)
class Exponents:
    """A Lebesgue exponent p and its conjugate q = p/(p-1)."""

    p: float

    def __post_init__(self):
        if not self.p >= 1 or math.isinf(self.p):
            raise InputError(f"exponent must lie in [1, inf), got {self.p}")

    @property
    def q(self) -> float:
        if self.p == 1:
            raise DomainError("p = 1 has no finite conjugate exponent")
        return self.p / (self.p - 1)

    @classmethod
    def from_q(cls, q: float) -> "Exponents":
        if not q > 1 or math.isinf(q):
            raise InputError(f"conjugate exponent must lie in (1, inf), got {q}")
        return cls(q / (q - 1))


def exact_sum(terms: Iterable[complex]) -> complex:
    """Correctly rounded sum of complex terms, real and imaginary parts separately."""
    terms = list(terms)
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def norm_p(f: TreeFunction, weights: WeightMap, p: float) -> float:
    """(Σ |f(v)|^p λ_v)^(1/p), summed in address order."""
    if p < 1:
        raise InputError(f"norm exponent must be >= 1, got {p}")
    total = math.fsum(abs(value) ** p * weights(v) for v, value in f.items())
    return total ** (1.0 / p)


def dual_pairing(f: TreeFunction, g: TreeFunction, weights: WeightMap) -> complex:
    """Σ f(v) g(v) λ_v. Bilinear, with no complex conjugation."""
    common = [v for v in f.support() if v in g.values]
    return exact_sum(f[v] * g[v] * weights(v) for v in common)


def random_tree_function(model: TreeModel, support_depth: int, support_size: int, seed: int) -> TreeFunction:
    """
    A seeded random function with values in the complex unit box.

    Args:
        model: Tree providing the vertices
        support_depth: Largest |level| a support vertex may have
        support_size: Number of support vertices (capped by what exists)
        seed: Seed for numpy's default generator

    Returns:
        TreeFunction with the requested support size
    """
    if support_size < 1:
        raise InputError(f"support_size must be >= 1, got {support_size}")
    depth = max(0, support_depth)
    candidates = window_vertices(model, up=min(model.window.up, depth), down=min(model.window.down, depth))
    rng = np.random.default_rng(seed)
    size = min(support_size, len(candidates))
    chosen = sorted(rng.choice(len(candidates), size=size, replace=False))
    real = rng.uniform(-1.0, 1.0, size)
    imag = rng.uniform(-1.0, 1.0, size)
    return TreeFunction({candidates[int(i)]: complex(real[j], imag[j]) for j, i in enumerate(chosen)})


def descendant_sum(
    model: TreeModel,
    u: VertexAddress,
    depth: int,
    weights: WeightMap,
    weight_power: float = 1.0,
    gamma_shift: Optional[int] = None,
    gamma_power: float = 0.0,
    gamma_divisor: int = 1,
) -> float:
    """
    Σ over w in child^depth(u) of (γ(w, gamma_shift) / gamma_divisor)^gamma_power · λ_w^weight_power.

    Uniform-outdegree families with level-function weights are summed in
    closed form on the log scale; everything else is enumerated.
    """
    meta = model.metadata
    k = None if meta is None else meta.uniform_outdegree
    if k is not None and weights.is_level_function:
        model.require(u)
        model.check_depth(u, depth + (gamma_shift or 0))
        log_total = depth * math.log(k) + weight_power * weights.level_log_value(u.level + depth)
        if gamma_shift is not None and gamma_power:
            log_total += gamma_power * (gamma_shift * math.log(k) - math.log(gamma_divisor))
        try:
            return math.exp(log_total)
        except OverflowError:
            return math.inf

    logger.debug(f"[descendant-sum] enumerating child^{depth}({u}) on {model.name}")
    terms = []
    for w in children_n(model, u, depth):
        term = weights(w) ** weight_power
        if gamma_shift is not None and gamma_power:
            term *= (gamma(model, w, gamma_shift) / gamma_divisor) ** gamma_power
        terms.append(term)
    return math.fsum(terms)
