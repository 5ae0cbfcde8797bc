"""The exemplar pool and similarity-weighted value estimation.

Exemplars are stored column-wise (a cell matrix plus value, attention and
bookkeeping vectors) so a whole set of candidate afterstates can be scored
against the pool in one vectorised call.  ``Exemplar`` objects are views
built on demand for inspection and dumping.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .relational import (
    Generator,
    Kind,
    RelationalStructure,
    SimilarityParams,
    batch_similarity,
    structure_from_cells,
)
from .tictactoe import GATHER, WILDCARD, cells_text, parse_cells

DEFAULT_VALUE = 0.0


class Origin(Enum):
    RECRUITED_STATE = "RECRUITED_STATE"
    INDUCED_SCHEMA = "INDUCED_SCHEMA"
    REFINED_SCHEMA = "REFINED_SCHEMA"


class NoSupport(Exception):
    """No exemplar lends any weight to the candidate."""


@dataclass
class Exemplar:
    id: int
    cells: tuple[int, ...]
    v: float
    u: float
    origin: Origin
    created_at: int

    @property
    def kind(self) -> Kind:
        return Kind.STATE if self.origin is Origin.RECRUITED_STATE else Kind.SCHEMA

    @property
    def structure(self) -> RelationalStructure:
        return structure_from_cells(self.cells, self.kind)

    def text(self) -> str:
        return cells_text(self.cells)


def canonical_key(cells: Sequence[int]) -> bytes:
    """Key shared by all 8 symmetric images of a board or schema."""
    a = np.asarray(cells, dtype=np.int8)
    return min(a[g].tobytes() for g in GATHER)


def _as_cells(candidate) -> np.ndarray:
    if isinstance(candidate, RelationalStructure):
        candidate = candidate.cells()
    return np.asarray(candidate, dtype=np.int8)


class ExemplarPool:
    def __init__(self, rng: np.random.Generator | None = None):
        self.rng = rng if rng is not None else np.random.default_rng()
        self.cells = np.empty((0, 9), dtype=np.int8)
        self.v = np.empty(0)
        self.u = np.empty(0)
        self.ids = np.empty(0, dtype=np.int64)
        self.is_schema = np.empty(0, dtype=bool)
        self.origins: list[Origin] = []
        self.created_at: list[int] = []
        self._next_id = 0
        self._state_keys: set[bytes] = set()
        self._schema_keys: set[bytes] = set()

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n_states(self) -> int:
        return int((~self.is_schema).sum())

    @property
    def n_schemas(self) -> int:
        return int(self.is_schema.sum())

    @property
    def exemplars(self) -> list[Exemplar]:
        return [self[i] for i in range(len(self))]

    def __getitem__(self, i: int) -> Exemplar:
        return Exemplar(
            int(self.ids[i]),
            tuple(int(c) for c in self.cells[i]),
            float(self.v[i]),
            float(self.u[i]),
            self.origins[i],
            self.created_at[i],
        )

    def index_of(self, exemplar_id: int) -> int:
        hits = np.flatnonzero(self.ids == exemplar_id)
        if not len(hits):
            raise KeyError(exemplar_id)
        return int(hits[0])

    def contains_state(self, cells: Sequence[int]) -> bool:
        return np.asarray(cells, dtype=np.int8).tobytes() in self._state_keys

    def contains_schema(self, cells: Sequence[int]) -> bool:
        return canonical_key(cells) in self._schema_keys

    def add(self, cells: Sequence[int], v: float, u: float, origin: Origin, created_at: int = 0) -> int:
        row = np.asarray(cells, dtype=np.int8).reshape(1, 9)
        schema = origin is not Origin.RECRUITED_STATE
        if not schema and (row < 0).any():
            raise ValueError("a state exemplar cannot contain wildcards")
        eid = self._next_id
        self._next_id += 1
        self.cells = np.concatenate([self.cells, row])
        self.v = np.append(self.v, float(v))
        self.u = np.append(self.u, float(u))
        self.ids = np.append(self.ids, eid)
        self.is_schema = np.append(self.is_schema, schema)
        self.origins.append(origin)
        self.created_at.append(int(created_at))
        if schema:
            self._schema_keys.add(canonical_key(row[0]))
        else:
            self._state_keys.add(row[0].tobytes())
        return eid

    def remove(self, keep: np.ndarray) -> list[int]:
        """Drop every exemplar where ``keep`` is False; return removed ids."""
        keep = np.asarray(keep, dtype=bool)
        removed = [int(i) for i in self.ids[~keep]]
        if not removed:
            return removed
        self.cells = self.cells[keep]
        self.v = self.v[keep]
        self.u = self.u[keep]
        self.ids = self.ids[keep]
        self.is_schema = self.is_schema[keep]
        self.origins = [o for o, k in zip(self.origins, keep) if k]
        self.created_at = [c for c, k in zip(self.created_at, keep) if k]
        self._state_keys = {r.tobytes() for r, s in zip(self.cells, self.is_schema) if not s}
        self._schema_keys = {canonical_key(r) for r, s in zip(self.cells, self.is_schema) if s}
        return removed


# --- value estimation -----------------------------------------------------


@dataclass
class Evaluation:
    """Pool response to a batch of candidates, all arrays row-per-candidate.

    ``weights`` are attention-times-similarity.  Exemplars filtered out by
    retrieval get similarity (hence weight) 0.  ``values`` fall back to the default estimate
    where ``totals`` is 0.
    """

    sims: np.ndarray
    best_symmetry: np.ndarray
    weights: np.ndarray
    totals: np.ndarray
    values: np.ndarray

    def activations(self, row: int) -> np.ndarray:
        t = self.totals[row]
        if not t > 0:
            raise NoSupport("no exemplar supports this candidate")
        return self.weights[row] / t


def evaluate(pool: ExemplarPool, candidates: np.ndarray, params: SimilarityParams,
             generator: Generator = Generator.SYMMETRY_8, mac=None) -> Evaluation:
    cands = np.asarray(candidates, dtype=np.int8).reshape(-1, 9)
    n_c = cands.shape[0]
    if len(pool) == 0:
        z = np.zeros((n_c, 0))
        return Evaluation(z, np.zeros((n_c, 0), dtype=np.intp), z, np.zeros(n_c), np.full(n_c, DEFAULT_VALUE))
    sims, best = batch_similarity(cands, pool.cells, params, generator)
    if mac is not None:
        from .macfac import retrieval_mask

        sims = sims * retrieval_mask(pool, cands, mac)
    weights = pool.u[None, :] * sims
    totals = weights.sum(axis=1)
    supported = totals > 0
    values = np.full(n_c, DEFAULT_VALUE)
    # normalise first so a lone supporting exemplar reproduces its value exactly
    values[supported] = (weights[supported] / totals[supported, None]) @ pool.v
    return Evaluation(sims, best, weights, totals, values)


def activations(pool: ExemplarPool, candidate, params: SimilarityParams = SimilarityParams(),
                generator: Generator = Generator.SYMMETRY_8, mac=None) -> list[tuple[int, float, float]]:
    """``(exemplar id, similarity, activation)`` for every pool member.

    Raises ``NoSupport`` when the pool is empty or lends no weight.
    """
    return _detail(pool, evaluate(pool, _as_cells(candidate), params, generator, mac))


def _detail(pool, ev):
    if len(pool) == 0:
        raise NoSupport("empty pool")
    a = ev.activations(0)
    return [(int(i), float(s), float(x)) for i, s, x in zip(pool.ids, ev.sims[0], a)]


def estimate_value(pool: ExemplarPool, candidate, params: SimilarityParams = SimilarityParams(),
                   generator: Generator = Generator.SYMMETRY_8, mac=None):
    """Similarity-weighted average of exemplar values, with per-exemplar detail."""
    ev = evaluate(pool, _as_cells(candidate), params, generator, mac)
    try:
        detail = _detail(pool, ev)
    except NoSupport:
        return DEFAULT_VALUE, []
    return float(ev.values[0]), detail


# --- pool maintenance -----------------------------------------------------


def recruitment_probability(pool: ExemplarPool) -> float:
    return min(1.0, 1.0 / (pool.n_states + 1))


def maybe_recruit(pool: ExemplarPool, state, rng: np.random.Generator | None = None,
                  created_at: int = 0) -> bool:
    cells = _as_cells(state)
    if (cells < 0).any():
        raise ValueError("only concrete states are recruited")
    if pool.contains_state(cells):
        return False
    rng = rng if rng is not None else pool.rng
    if rng.random() >= recruitment_probability(pool):
        return False
    pool.add(cells, 0.0, 1.0, Origin.RECRUITED_STATE, created_at)
    return True


def add_schema(pool: ExemplarPool, schema, initial_value: float,
               origin: Origin = Origin.INDUCED_SCHEMA, created_at: int = 0) -> bool:
    if isinstance(schema, RelationalStructure) and schema.kind is not Kind.SCHEMA:
        raise ValueError("add_schema expects a schema")
    cells = _as_cells(schema)
    if (cells == WILDCARD).all() or pool.contains_schema(cells):
        return False
    pool.add(cells, initial_value, 1.0, origin, created_at)
    return True


def prune_nonpositive(pool: ExemplarPool) -> list[int]:
    """Remove exemplars whose attention fell below zero."""
    return pool.remove(pool.u >= 0)


# --- dump format ----------------------------------------------------------


def dump_pool(pool: ExemplarPool, path: str | Path) -> None:
    with open(path, "w") as fh:
        for e in pool.exemplars:
            fh.write(f"{e.text()} {e.origin.value} {e.v!r} {e.u!r} {e.created_at}\n")


class PoolFormatError(ValueError):
    pass


def load_pool(path: str | Path) -> ExemplarPool:
    pool = ExemplarPool(np.random.default_rng(0))
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        try:
            if len(parts) != 5:
                raise ValueError(f"expected 5 fields, found {len(parts)}")
            cells = parse_cells(parts[0])
            pool.add(cells, float(parts[2]), float(parts[3]), Origin(parts[1]), int(parts[4]))
        except ValueError as exc:
            raise PoolFormatError(f"{path}:{lineno}: {exc}") from None
    return pool
