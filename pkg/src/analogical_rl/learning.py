"""Action choice, TD learning of values and attentions, and schema induction.

All learning during a game is cached on ``TurnRecord`` objects, computed
from the quantities seen at decision time, and applied to the pool once the
game is over (``apply_cached_updates``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .memory import DEFAULT_VALUE, ExemplarPool, Origin, add_schema, prune_nonpositive
from .relational import Kind, Mapping, ObjectNode, RelationalStructure, RelationNode
from .tictactoe import SYMMETRIES, WILDCARD, cells_text


@dataclass(frozen=True)
class LearningParams:
    epsilon: float = 1.0
    gamma: float = 1.0
    tau: float = 1.0
    induction_k: float = 6.0
    min_induction_samples: int = 100

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.min_induction_samples < 2:
            raise ValueError("min_induction_samples must be at least 2")


class InductionMode(Enum):
    OFF = "off"
    YOKED = "yoked"
    GUIDED = "guided"


@dataclass
class PendingInduction:
    partner: int  # index into the turn's pool snapshot
    reduction: float | None = None
    threshold: float | None = None


@dataclass
class TurnRecord:
    """One decision and everything learning needs from it.

    The array fields are aligned with the pool as it stood during the game.
    ``sims`` are the similarities that actually entered the estimate (zero
    for exemplars a retrieval filter left out).
    """

    ply: int
    side: int
    afterstate: tuple[int, ...]
    cells: np.ndarray
    value: float
    ids: np.ndarray
    sims: np.ndarray
    weights: np.ndarray
    total: float
    v: np.ndarray
    u: np.ndarray
    best_symmetry: np.ndarray
    exemplar_cells: np.ndarray
    partner_is_schema: np.ndarray
    reward: float = 0.0
    next_value: float = 0.0
    td: float | None = None
    dv: np.ndarray | None = None
    du: np.ndarray | None = None
    reductions: np.ndarray | None = None
    pending: list[PendingInduction] = field(default_factory=list)
    yoke_quota: int = 0
    yoke_order: np.ndarray | None = None
    induced: int = 0

    @property
    def activations(self) -> np.ndarray:
        if not self.total > 0:
            return np.zeros_like(self.weights)
        return self.weights / self.total


# --- choice ---------------------------------------------------------------


def softmax_probabilities(values, tau: float) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("softmax over an empty candidate list")
    z = np.exp((x - x.max()) / tau)
    return z / z.sum()


def softmax_select(values, tau: float, rng: np.random.Generator) -> int:
    """Sample a candidate index with probability proportional to exp(V / tau)."""
    p = softmax_probabilities(values, tau)
    return int(rng.choice(len(p), p=p))


def greedy_select(values, rng: np.random.Generator) -> int:
    """Index of a maximal value, ties broken uniformly."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no candidates to choose from")
    best = np.flatnonzero(x == x.max())
    return int(best[0]) if len(best) == 1 else int(best[rng.integers(len(best))])


# --- TD learning ----------------------------------------------------------


def td_error(reward: float, next_value: float, current_value: float, gamma: float) -> float:
    return reward + gamma * next_value - current_value


def assign_td(trajectory: list[TurnRecord], final_reward: float, params: LearningParams) -> None:
    """SARSA errors along one side's consecutive afterstates.

    The successor of the last afterstate is the terminal state, valued 0.
    """
    for j, turn in enumerate(trajectory):
        if j + 1 < len(trajectory):
            turn.reward, turn.next_value = 0.0, trajectory[j + 1].value
        else:
            turn.reward, turn.next_value = final_reward, 0.0
        turn.td = td_error(turn.reward, turn.next_value, turn.value, params.gamma)


def value_deltas(turn: TurnRecord, params: LearningParams) -> np.ndarray:
    return params.epsilon * turn.td * turn.activations


def attention_deltas(turn: TurnRecord, params: LearningParams) -> np.ndarray:
    if not turn.total > 0:
        return np.zeros_like(turn.weights)
    return params.epsilon * turn.td * turn.sims * (turn.v - turn.value) / turn.total


def td_reductions(turn: TurnRecord, params: LearningParams) -> np.ndarray:
    """How much smaller |TD| is with each exemplar than without it.

    Leaving an exemplar out changes only the estimate of the chosen
    afterstate; the successor estimate is held fixed.  Exemplars with no
    weight get 0.
    """
    w = turn.weights
    n = len(w)
    out = np.zeros(n)
    if n == 0:
        return out
    wv = w * turn.v
    # sums over everything but i, without subtracting from the total
    z = np.concatenate([[0.0], np.cumsum(w)[:-1]]) + np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    s = np.concatenate([[0.0], np.cumsum(wv)[:-1]]) + np.concatenate([np.cumsum(wv[::-1])[::-1][1:], [0.0]])
    v_without = np.full(n, DEFAULT_VALUE)
    ok = z > 0
    v_without[ok] = s[ok] / z[ok]
    target = turn.reward + params.gamma * turn.next_value
    active = w > 0
    out[active] = np.abs(target - v_without[active]) - abs(turn.td)
    return out


@dataclass
class InductionStats:
    """Running mean and variance of TD reductions (Chan et al. merge)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, xs) -> None:
        xs = np.asarray(xs, dtype=float).ravel()
        n_b = xs.size
        if n_b == 0:
            return
        mean_b = float(xs.mean())
        m2_b = float(((xs - mean_b) ** 2).sum())
        n = self.count + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / n
        self.m2 += m2_b + delta * delta * self.count * n_b / n
        self.count = n

    @property
    def sd(self) -> float:
        return math.sqrt(self.m2 / (self.count - 1)) if self.count > 1 else 0.0

    def threshold(self, k: float) -> float:
        return self.mean + k * self.sd


def maybe_induce_schemas(turn: TurnRecord, stats: InductionStats | None, params: LearningParams,
                         mode: InductionMode, rng: np.random.Generator | None = None,
                         quota: int = 0) -> list[PendingInduction]:
    """Decide which analogies of this turn become schemas.

    Guided: every exemplar whose TD reduction beats ``mean + k * SD`` of all
    reductions seen so far (once enough have been seen).  Yoked: ``quota``
    schemas from exemplars taken in a uniformly random order; the order is
    cached so duplicates can be skipped when the induction is applied.
    """
    turn.pending = []
    if mode is InductionMode.GUIDED:
        red = turn.reductions if turn.reductions is not None else td_reductions(turn, params)
        turn.reductions = red
        active = turn.weights > 0
        if stats.count >= params.min_induction_samples:
            thr = stats.threshold(params.induction_k)
            for i in np.flatnonzero(active & (red > thr)):
                turn.pending.append(PendingInduction(int(i), float(red[i]), thr))
        stats.update(red[active])
    elif mode is InductionMode.YOKED:
        turn.yoke_quota = int(quota)
        n = len(turn.ids)
        turn.yoke_order = rng.permutation(n) if quota and n else np.empty(0, dtype=np.intp)
    return turn.pending


# --- schemas --------------------------------------------------------------


class DegenerateSchema(ValueError):
    pass


def schema_from_mapping(candidate: RelationalStructure, exemplar: RelationalStructure,
                        best_mapping: Mapping) -> RelationalStructure:
    """Keep the mapped objects on which both sides agree, in the candidate's frame.

    Everything else becomes a wildcard; relations survive if at least one of
    their fillers is defined.
    """
    keep: dict[int, int] = {}
    ex = exemplar.object_by_id
    for a, b in best_mapping.objects.items():
        x, y = candidate.object_by_id[a], ex[b]
        if not x.wildcard and not y.wildcard and x.object_type == y.object_type:
            keep[a] = x.object_type
    if not keep:
        raise DegenerateSchema("the analogy shares no defined objects")
    objects = tuple(
        ObjectNode(o.id, keep.get(o.id, o.object_type), o.id not in keep) for o in candidate.objects
    )
    relations = tuple(
        RelationNode(r.id, r.relation_type, r.roles)
        for r in candidate.relations
        if any(c in keep for c in r.roles)
    )
    return RelationalStructure(objects, relations, Kind.SCHEMA)


def schema_cells(candidate: np.ndarray, exemplar: np.ndarray, symmetry: int) -> np.ndarray:
    """Board-form ``schema_from_mapping`` under one of the 8 symmetries."""
    cand = np.asarray(candidate, dtype=np.int8)
    ex_seen = np.asarray(exemplar, dtype=np.int8)[list(SYMMETRIES[symmetry])]
    agree = (cand >= 0) & (ex_seen >= 0) & (cand == ex_seen)
    return np.where(agree, cand, np.int8(WILDCARD)).astype(np.int8)


# --- post-game update -----------------------------------------------------


def _try_induce(pool: ExemplarPool, turn: TurnRecord, partner: int, created_at: int,
                estimator) -> str | None:
    cells = schema_cells(turn.cells, turn.exemplar_cells[partner], int(turn.best_symmetry[partner]))
    origin = Origin.REFINED_SCHEMA if turn.partner_is_schema[partner] else Origin.INDUCED_SCHEMA
    if pool.contains_schema(cells) or (cells == WILDCARD).all():
        return None
    value = turn.value if estimator is None else estimator(pool, turn.cells)
    if add_schema(pool, cells, value, origin, created_at):
        return cells_text(cells)
    return None


def apply_cached_updates(pool: ExemplarPool, game: list[TurnRecord], params: LearningParams,
                         learn_attention: bool = True, created_at: int = 0, estimator=None) -> list[dict]:
    """Apply a finished game's cached learning to the pool.

    Values, then attentions, in turn order; then pruning of negative
    attentions; then the cached inductions in turn order.  Returns one record
    per schema actually added.

    A new schema starts at the estimate of its turn's afterstate.  With
    ``estimator(pool, cells)`` that estimate is taken from the pool as it
    stands at induction, after this game's learning; without it, the
    decision-time estimate is used.
    """
    if not game:
        return []
    order = sorted(game, key=lambda t: t.ply)
    for t in order:
        if not np.array_equal(t.ids, pool.ids):
            raise RuntimeError("pool changed during the game; cached updates would misalign")
    v = pool.v
    for t in order:
        if t.dv is not None and len(t.dv):
            v = v + t.dv
    pool.v = v
    if learn_attention:
        u = pool.u
        for t in order:
            if t.du is not None and len(t.du):
                u = u + t.du
        pool.u = u
    prune_nonpositive(pool)

    events = []
    for t in order:
        t.induced = 0
        for p in t.pending:
            text = _try_induce(pool, t, p.partner, created_at, estimator)
            if text is not None:
                t.induced += 1
                events.append(_event(created_at, t, p.partner, p.reduction, p.threshold, text, "guided"))
        if t.yoke_quota and t.yoke_order is not None:
            for partner in t.yoke_order:
                if t.induced >= t.yoke_quota:
                    break
                text = _try_induce(pool, t, int(partner), created_at, estimator)
                if text is not None:
                    t.induced += 1
                    events.append(_event(created_at, t, int(partner), None, None, text, "yoked"))
    return events


def _event(game_index, turn, partner, reduction, threshold, text, mode):
    return {
        "game": game_index,
        "turn": turn.ply,
        "partner": int(turn.ids[partner]),
        "reduction": reduction,
        "threshold": threshold,
        "schema": text,
        "mode": mode,
    }
