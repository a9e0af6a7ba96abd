"""
JSON documents: tree specs, weight specs, tree functions and target lists.
"""

import json
import logging
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import config
from .exceptions import InputError
from .space_core import TreeFunction, WeightMap
from .tree_core import FAMILIES, AncestorShareSet, FiniteTree, TreeModel, Window, build_family, window_vertices

logger = logging.getLogger(__name__)

Name = Union[str, int]


class WindowSpec(BaseModel):
    up: int = Field(default_factory=lambda: config.DEFAULT_UP, ge=0)
    down: int = Field(default_factory=lambda: config.DEFAULT_DOWN, ge=0)


class FamilyParams(BaseModel):
    k: Optional[int] = Field(default=None, ge=1)
    graft_at: Optional[str] = None
    size: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    window: WindowSpec = Field(default_factory=WindowSpec)


class TreeSpec(BaseModel):
    """Tree document, schema ``treeshift/tree/v1``."""

    model_config = ConfigDict(populate_by_name=True)

    schema_id: str = Field(default=config.TREE_SCHEMA, alias="schema")
    kind: Literal["finite", "family"]
    root: Optional[Name] = None
    edges: List[Tuple[Name, Name]] = []
    family: Optional[str] = None
    params: FamilyParams = Field(default_factory=FamilyParams)

    @field_validator("schema_id")
    @classmethod
    def check_schema(cls, value: str) -> str:
        if value != config.TREE_SCHEMA:
            raise ValueError(f"expected schema {config.TREE_SCHEMA}, got {value}")
        return value

    @model_validator(mode="after")
    def check_kind(self) -> "TreeSpec":
        if self.kind == "family":
            if self.family not in FAMILIES + ("random_recursive",):
                raise ValueError(f"unknown family {self.family!r}")
        return self

    def build(self) -> TreeModel:
        if self.kind == "finite":
            return FiniteTree(self.edges, root=None if self.root is None else str(self.root))
        window = Window(self.params.window.up, self.params.window.down)
        params = self.params.model_dump(exclude={"window"}, exclude_none=True)
        return build_family(self.family, params, window)


class WeightSpec(BaseModel):
    """Weight document, schema ``treeshift/weights/v1``."""

    model_config = ConfigDict(populate_by_name=True)

    schema_id: str = Field(default=config.WEIGHTS_SCHEMA, alias="schema")
    kind: Literal["unit", "geometric", "distance_to_H", "table"]
    base: Optional[float] = Field(default=None, gt=0)
    s: Optional[float] = Field(default=None, gt=0)
    anchor: Optional[str] = None
    entries: Dict[str, float] = {}
    default: Optional[float] = Field(default=None, gt=0)

    @field_validator("schema_id")
    @classmethod
    def check_schema(cls, value: str) -> str:
        if value != config.WEIGHTS_SCHEMA:
            raise ValueError(f"expected schema {config.WEIGHTS_SCHEMA}, got {value}")
        return value

    @field_validator("entries")
    @classmethod
    def check_entries(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, weight in value.items():
            if not weight > 0:
                raise ValueError(f"weight at {name} must be strictly positive, got {weight}")
        return value

    @model_validator(mode="after")
    def check_parameters(self) -> "WeightSpec":
        if self.kind == "geometric" and self.base is None:
            raise ValueError("geometric weights need 'base'")
        if self.kind == "distance_to_H" and (self.s is None or self.anchor is None):
            raise ValueError("distance_to_H weights need 's' and 'anchor'")
        return self

    def build(self, model: TreeModel) -> WeightMap:
        if self.kind == "unit":
            return WeightMap.unit()
        if self.kind == "geometric":
            return WeightMap.geometric(self.base)
        if self.kind == "distance_to_H":
            return WeightMap.distance_to_h(self.s, AncestorShareSet(model.resolve(self.anchor)), model)
        entries = {model.resolve(name): weight for name, weight in self.entries.items()}
        if isinstance(model, FiniteTree) and self.default is None:
            missing = [model.label(v) for v in window_vertices(model) if v not in entries]
            if missing:
                raise InputError(f"table weights miss {len(missing)} vertices, e.g. {missing[0]}", witness=missing[0])
        elif self.default is None:
            raise InputError("table weights on an infinite tree need a 'default'")
        return WeightMap.table(entries, self.default)


class FunctionEntry(BaseModel):
    address: Name
    re: float = 0.0
    im: float = 0.0


class TargetsDocument(BaseModel):
    targets: List[List[FunctionEntry]]


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def load_tree_spec(path: str) -> TreeSpec:
    spec = TreeSpec.model_validate(read_json(path))
    logger.debug(f"[documents] tree {path}: {spec.kind} {spec.family or ''}")
    return spec


def load_weight_spec(path: str) -> WeightSpec:
    spec = WeightSpec.model_validate(read_json(path))
    logger.debug(f"[documents] weights {path}: {spec.kind}")
    return spec


def tree_function_from_entries(entries: List[FunctionEntry], model: TreeModel) -> TreeFunction:
    values = {}
    for entry in entries:
        v = model.resolve(str(entry.address))
        values[v] = values.get(v, 0j) + complex(entry.re, entry.im)
    return TreeFunction(values)


def load_tree_function(path: str, model: TreeModel) -> TreeFunction:
    raw = read_json(path)
    entries = [FunctionEntry.model_validate(item) for item in raw]
    return tree_function_from_entries(entries, model)


def load_targets(path: str, model: TreeModel) -> List[TreeFunction]:
    raw = read_json(path)
    document = TargetsDocument.model_validate(raw if isinstance(raw, dict) else {"targets": raw})
    logger.info(f"[documents] loaded {len(document.targets)} targets from {path}")
    return [tree_function_from_entries(entries, model) for entries in document.targets]


def dump_tree_function(f: TreeFunction, model: TreeModel) -> List[dict]:
    return [{"address": model.label(v), "re": value.real, "im": value.imag} for v, value in f.items()]
