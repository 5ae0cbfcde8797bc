"""Relational structures, structural mappings and analogical similarity.

A structure is a set of typed object nodes plus typed relation nodes whose
ordered roles are filled by objects.  Concrete board states and schemas share
the representation; schemas may mark objects as wildcards ("not part of the
schema").  For tic-tac-toe the object with id ``i`` is board cell ``i`` and
the relation with id ``9 + k`` is ``LINES[k]``.

Two scoring backends are provided:

``Backend.PHI``
    the systematicity score: object matches weighted by ``beta`` plus, for
    each mapped relation, one point and a bonus for every role whose filler
    is mapped in parallel.  Similarity is ``exp(theta * max Phi)``.
``Backend.DIFFERENCE``
    counts mismatching mapped objects; similarity is ``exp(-theta * min d)``,
    which is exactly 1 for a perfect (possibly partial) match.

``batch_similarity`` evaluates either backend for many board-shaped
candidates against many board-shaped exemplars at once; it must agree with
the per-structure functions, which the tests check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .tictactoe import BLANK, GATHER, LINES, SYMMETRIES, WILDCARD

SAME_RANK = 0
RELATION_ID_OFFSET = 9
DEFAULT_NODE_BUDGET = 7


class Kind(Enum):
    STATE = "STATE"
    SCHEMA = "SCHEMA"


class Backend(Enum):
    PHI = "PHI"
    DIFFERENCE = "DIFFERENCE"


class Generator(Enum):
    SYMMETRY_8 = "SYMMETRY_8"
    IDENTITY = "IDENTITY"
    EXHAUSTIVE = "EXHAUSTIVE"


class StructureError(ValueError):
    pass


class MappingBudgetError(ValueError):
    """Raised when exhaustive enumeration would exceed the node budget."""


@dataclass(frozen=True)
class ObjectNode:
    id: int
    object_type: int
    wildcard: bool = False


@dataclass(frozen=True)
class RelationNode:
    id: int
    relation_type: int
    roles: tuple[int, ...]


@dataclass(frozen=True)
class RelationalStructure:
    objects: tuple[ObjectNode, ...]
    relations: tuple[RelationNode, ...]
    kind: Kind = Kind.STATE

    def __post_init__(self):
        ids = [o.id for o in self.objects] + [r.id for r in self.relations]
        if len(set(ids)) != len(ids):
            raise StructureError("node ids must be unique within a structure")
        obj_ids = {o.id for o in self.objects}
        for r in self.relations:
            if any(c not in obj_ids for c in r.roles):
                raise StructureError(f"relation {r.id} binds an unknown object")
        if self.kind is Kind.STATE:
            if any(o.wildcard for o in self.objects):
                raise StructureError("a concrete state cannot contain wildcards")
            if len(self.objects) != 9 or len(self.relations) != 8:
                raise StructureError("a board state has 9 objects and 8 relations")

    @cached_property
    def object_by_id(self) -> dict[int, ObjectNode]:
        return {o.id: o for o in self.objects}

    @cached_property
    def relation_by_fillers(self) -> dict[frozenset, RelationNode]:
        return {frozenset(r.roles): r for r in self.relations}

    @cached_property
    def defined_objects(self) -> tuple[ObjectNode, ...]:
        return tuple(o for o in self.objects if not o.wildcard)

    def cells(self) -> tuple[int, ...]:
        """Board form (``WILDCARD`` for excluded slots); needs ids 0..8."""
        by_id = self.object_by_id
        if sorted(by_id) != list(range(9)):
            raise StructureError("structure is not a 3x3 board")
        return tuple(
            WILDCARD if by_id[i].wildcard else by_id[i].object_type for i in range(9)
        )

    def text(self) -> str:
        from .tictactoe import cells_text

        return cells_text(self.cells())


def structure_from_cells(cells: Sequence[int], kind: Kind = Kind.SCHEMA) -> RelationalStructure:
    """Build the board encoding: 9 cell objects and the 8 same-rank lines.

    In schemas a line is kept only if at least one of its cells is defined.
    """
    if len(cells) != 9:
        raise StructureError("expected 9 cells")
    objects = tuple(
        ObjectNode(i, BLANK if c == WILDCARD else int(c), c == WILDCARD)
        for i, c in enumerate(cells)
    )
    relations = tuple(
        RelationNode(RELATION_ID_OFFSET + k, SAME_RANK, line)
        for k, line in enumerate(LINES)
        if kind is Kind.STATE or any(cells[c] != WILDCARD for c in line)
    )
    return RelationalStructure(objects, relations, kind)


EMPTY_STRUCTURE = RelationalStructure((), (), Kind.SCHEMA)


@dataclass(frozen=True)
class SimilarityParams:
    beta: float = 1.0
    theta: float = 1.0
    backend: Backend = Backend.DIFFERENCE

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not self.theta > 0:
            raise ValueError("theta must be > 0")


@dataclass(frozen=True, eq=True)
class Mapping:
    """Partial injective correspondence from candidate to exemplar nodes."""

    objects: dict[int, int] = field(default_factory=dict)
    relations: dict[int, int] = field(default_factory=dict)
    score: float | None = None
    symmetry: int | None = None

    __hash__ = None  # type: ignore[assignment]

    @property
    def pairs(self) -> dict[int, int]:
        return {**self.objects, **self.relations}

    def inverse(self) -> "Mapping":
        return Mapping(
            {v: k for k, v in self.objects.items()},
            {v: k for k, v in self.relations.items()},
            self.score,
            None,
        )


# --- mapping generators -------------------------------------------------


def _is_defined(structure: RelationalStructure, oid: int) -> bool:
    o = structure.object_by_id.get(oid)
    return o is not None and not o.wildcard


def _relations_by_object_map(candidate, exemplar, obj_map: dict[int, int]) -> dict[int, int]:
    """Relation correspondence implied by an object correspondence.

    A candidate relation maps to the unique same-typed exemplar relation that
    contains every image of its mapped fillers.
    """
    rel_map: dict[int, int] = {}
    taken: set[int] = set()
    for r in candidate.relations:
        images = {obj_map[c] for c in r.roles if c in obj_map}
        if not images:
            continue
        hits = [
            r2 for r2 in exemplar.relations
            if r2.relation_type == r.relation_type
            and r2.id not in taken
            and images <= set(r2.roles)
        ]
        if len(hits) == 1:
            rel_map[r.id] = hits[0].id
            taken.add(hits[0].id)
    return rel_map


def _symmetry_mapping(candidate, exemplar, s: int) -> Mapping:
    sigma = SYMMETRIES[s]
    objs = {
        o.id: sigma[o.id]
        for o in candidate.defined_objects
        if _is_defined(exemplar, sigma[o.id])
    }
    rels = {}
    for r in candidate.relations:
        image = exemplar.relation_by_fillers.get(frozenset(sigma[c] for c in r.roles))
        if image is not None and image.relation_type == r.relation_type:
            rels[r.id] = image.id
    return Mapping(objs, rels, symmetry=s)


def iter_mappings(
    candidate: RelationalStructure,
    exemplar: RelationalStructure,
    generator: Generator = Generator.SYMMETRY_8,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> Iterator[Mapping]:
    if generator is Generator.IDENTITY:
        yield _symmetry_mapping(candidate, exemplar, 0)
    elif generator is Generator.SYMMETRY_8:
        for s in range(len(SYMMETRIES)):
            yield _symmetry_mapping(candidate, exemplar, s)
    elif generator is Generator.EXHAUSTIVE:
        left = [o.id for o in candidate.defined_objects]
        right = [o.id for o in exemplar.defined_objects]
        n = min(len(left), len(right))
        if n > node_budget:
            raise MappingBudgetError(
                f"exhaustive mapping of {n} objects exceeds the budget of {node_budget}"
            )
        if len(left) <= len(right):
            for image in itertools.permutations(right, n):
                objs = dict(zip(left, image))
                yield Mapping(objs, _relations_by_object_map(candidate, exemplar, objs))
        else:
            for pre in itertools.permutations(left, n):
                objs = dict(zip(pre, right))
                yield Mapping(objs, _relations_by_object_map(candidate, exemplar, objs))
    else:  # pragma: no cover
        raise ValueError(f"unknown generator {generator!r}")


def enumerate_mappings(
    candidate: RelationalStructure,
    exemplar: RelationalStructure,
    generator: Generator = Generator.SYMMETRY_8,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> list[Mapping]:
    return list(iter_mappings(candidate, exemplar, generator, node_budget))


# --- scoring ------------------------------------------------------------


def _object_sim(a: ObjectNode, b: ObjectNode) -> float:
    if a.wildcard or b.wildcard:
        return 0.0
    return 1.0 if a.object_type == b.object_type else 0.0


def _relation_sim(a: RelationNode, b: RelationNode) -> float:
    return 1.0 if a.relation_type == b.relation_type else 0.0


def _parallel_roles(r: RelationNode, r2: RelationNode, obj_map: dict[int, int]) -> list[int]:
    """Role fillers of ``r`` whose image fills the same role of ``r2``."""
    return [c for c, c2 in zip(r.roles, r2.roles) if obj_map.get(c) == c2]


def phi_score(candidate, exemplar, mapping: Mapping, params: SimilarityParams = SimilarityParams()) -> float:
    cand_o, ex_o = candidate.object_by_id, exemplar.object_by_id
    obj_term = sum(_object_sim(cand_o[a], ex_o[b]) for a, b in mapping.objects.items())
    cand_r = {r.id: r for r in candidate.relations}
    ex_r = {r.id: r for r in exemplar.relations}
    rel_term = 0.0
    for a, b in mapping.relations.items():
        r, r2 = cand_r[a], ex_r[b]
        rel_term += _relation_sim(r, r2) * (1 + len(_parallel_roles(r, r2, mapping.objects)))
    return params.beta * obj_term + rel_term


def phi_score_trickledown(
    candidate,
    exemplar,
    mapping: Mapping,
    params: SimilarityParams = SimilarityParams(),
    node_constant: float = 1.0,
    trickle_factor: float = 1.0,
) -> float:
    """Score a mapping by propagating relation scores down to role fillers.

    One score node is created per mapped pair, with a link from a relation
    pair to each object pair it binds in parallel.  Nodes are visited from
    higher order to lower; each gains ``node_constant`` times its primitive
    similarity (object nodes additionally scaled by ``beta``) and then passes
    ``trickle_factor`` times its score to its children.
    """
    cand_o, ex_o = candidate.object_by_id, exemplar.object_by_id
    cand_r = {r.id: r for r in candidate.relations}
    ex_r = {r.id: r for r in exemplar.relations}

    score: dict[tuple[str, int], float] = {}
    children: dict[tuple[str, int], list[tuple[str, int]]] = {}
    order: dict[tuple[str, int], int] = {}
    prim: dict[tuple[str, int], float] = {}
    for a, b in mapping.objects.items():
        key = ("o", a)
        score[key], order[key], children[key] = 0.0, 0, []
        prim[key] = params.beta * _object_sim(cand_o[a], ex_o[b])
    for a, b in mapping.relations.items():
        key = ("r", a)
        r, r2 = cand_r[a], ex_r[b]
        score[key], order[key] = 0.0, 1
        prim[key] = _relation_sim(r, r2)
        children[key] = [("o", c) for c in _parallel_roles(r, r2, mapping.objects)]

    for key in sorted(score, key=lambda k: -order[k]):
        score[key] += node_constant * prim[key]
        for child in children[key]:
            score[child] += trickle_factor * score[key]
    return float(sum(score.values()))


def difference_count(candidate, exemplar, mapping: Mapping) -> int:
    cand_o, ex_o = candidate.object_by_id, exemplar.object_by_id
    n = 0
    for a, b in mapping.objects.items():
        x, y = cand_o[a], ex_o[b]
        if not x.wildcard and not y.wildcard and x.object_type != y.object_type:
            n += 1
    return n


def analogical_similarity(
    candidate: RelationalStructure,
    exemplar: RelationalStructure,
    params: SimilarityParams = SimilarityParams(),
    generator: Generator = Generator.SYMMETRY_8,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> tuple[float, Mapping]:
    """Similarity of the best mapping and that mapping (first one on ties)."""
    best: Mapping | None = None
    best_score = -math.inf
    for m in iter_mappings(candidate, exemplar, generator, node_budget):
        if params.backend is Backend.PHI:
            s = phi_score(candidate, exemplar, m, params)
        else:
            s = -float(difference_count(candidate, exemplar, m))
        if s > best_score:
            best, best_score = m, s
    if best is None:
        raise StructureError("no mapping exists between the structures")
    # best_score is Phi, or the negated difference count
    return math.exp(params.theta * best_score), replace(best, score=best_score)


def featural_similarity(candidate, exemplar, params: SimilarityParams = SimilarityParams()) -> float:
    if candidate.kind is not Kind.STATE or exemplar.kind is not Kind.STATE:
        raise StructureError("featural similarity is defined between concrete states only")
    return analogical_similarity(candidate, exemplar, params, Generator.IDENTITY)[0]


# --- vectorised board kernel ---------------------------------------------

_LINES = np.array(LINES, dtype=np.intp)


def _parallel_table() -> np.ndarray:
    """PAR[s, k, i]: role i of line k is filled in parallel under symmetry s.

    Line k is the image of candidate line ``sigma^-1(k)``; role i is parallel
    when sigma carries that line's i-th filler onto line k's i-th filler.
    """
    by_set = {frozenset(l): k for k, l in enumerate(LINES)}
    par = np.zeros((len(SYMMETRIES), len(LINES), 3), dtype=bool)
    for s, sigma in enumerate(SYMMETRIES):
        for k0, line in enumerate(LINES):
            k = by_set[frozenset(sigma[c] for c in line)]
            for i in range(3):
                par[s, k, i] = sigma[line[i]] == LINES[k][i]
    return par


PARALLEL = _parallel_table()


def _one_hot(cells: np.ndarray) -> np.ndarray:
    """``(M, 9)`` cells to ``(M, 27)`` indicators of (cell, type); wildcards are all-zero."""
    out = np.zeros((cells.shape[0], 9, 3))
    for k in range(3):
        out[:, :, k] = cells == k
    return out.reshape(cells.shape[0], 27)


def batch_similarity(
    candidates: np.ndarray,
    exemplars: np.ndarray,
    params: SimilarityParams = SimilarityParams(),
    generator: Generator = Generator.SYMMETRY_8,
) -> tuple[np.ndarray, np.ndarray]:
    """Similarities of board-shaped candidates ``(C, 9)`` to exemplars ``(N, 9)``.

    Returns ``(sims, best_symmetry)``, both ``(C, N)``.  Cells hold relative
    object types with ``WILDCARD`` for schema slots.
    """
    if generator is Generator.EXHAUSTIVE:
        raise ValueError("batch kernel supports only IDENTITY and SYMMETRY_8")
    cands = np.asarray(candidates, dtype=np.int8).reshape(-1, 9)
    ex = np.asarray(exemplars, dtype=np.int8).reshape(-1, 9)
    syms = GATHER[:1] if generator is Generator.IDENTITY else GATHER
    # t[c, s, j]: candidate content carried onto exemplar cell j by symmetry s
    t = cands[:, syms]
    n_c, n_s = t.shape[:2]
    mt = t >= 0
    me = ex >= 0
    # counts via one-hot dot products; exact in float64 at these sizes
    overlap = (mt.reshape(-1, 9).astype(float) @ me.T.astype(float)).reshape(n_c, n_s, -1)
    match = (_one_hot(t.reshape(-1, 9)) @ _one_hot(ex).T).reshape(n_c, n_s, -1)
    if params.backend is Backend.DIFFERENCE:
        d = overlap - match
        best = d.argmin(axis=1)
        dmin = np.take_along_axis(d, best[:, None, :], axis=1)[:, 0, :]
        return np.exp(-params.theta * dmin), best

    mt_lines = mt[:, :, _LINES]  # (C, S, 8, 3)
    me_lines = me[:, _LINES]  # (N, 8, 3)
    par = PARALLEL[: syms.shape[0]]  # (S, 8, 3)
    links = (mt_lines[:, :, None] & me_lines[None, None] & par[None, :, None]).sum(axis=4)
    kept = mt_lines.any(axis=3)[:, :, None, :] & me_lines.any(axis=2)[None, None, :, :]
    rel = (kept * (1 + links)).sum(axis=3)
    phi = params.beta * match + rel
    best = phi.argmax(axis=1)
    pmax = np.take_along_axis(phi, best[:, None, :], axis=1)[:, 0, :]
    return np.exp(params.theta * pmax), best
