"""Self-play training, evaluation against the ideal player, and replicated runs.

A replicate is a pure function of (variant, config, replicate index, yoke
schedule): every random draw comes from generators seeded from those.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import VARIANT_NAMES, ExperimentConfig
from .learning import (
    InductionMode,
    InductionStats,
    LearningParams,
    TurnRecord,
    apply_cached_updates,
    assign_td,
    attention_deltas,
    greedy_select,
    maybe_induce_schemas,
    softmax_select,
    value_deltas,
)
from .macfac import MacParams
from .memory import ExemplarPool, evaluate, maybe_recruit
from .relational import Generator, SimilarityParams
from .solver import SolvedTable, TieBreak, ideal_move, is_nonlosing, solve
from .tictactoe import EMPTY_BOARD, O, Outcome, X, afterstates, outcome, reward_for, to_move

log = logging.getLogger(__name__)


class Variant(Enum):
    FEATURAL = "featural"
    RELATIONAL = "relational"
    UNGUIDED_FIXED = "unguided_fixed"
    GUIDED_FIXED = "guided_fixed"
    GUIDED_LEARNED = "guided_learned"


@dataclass(frozen=True)
class VariantSpec:
    variant: Variant
    generator: Generator
    induction: InductionMode
    learn_attention: bool


VARIANTS = {
    Variant.FEATURAL: VariantSpec(Variant.FEATURAL, Generator.IDENTITY, InductionMode.OFF, False),
    Variant.RELATIONAL: VariantSpec(Variant.RELATIONAL, Generator.SYMMETRY_8, InductionMode.OFF, False),
    Variant.UNGUIDED_FIXED: VariantSpec(Variant.UNGUIDED_FIXED, Generator.SYMMETRY_8, InductionMode.YOKED, False),
    Variant.GUIDED_FIXED: VariantSpec(Variant.GUIDED_FIXED, Generator.SYMMETRY_8, InductionMode.GUIDED, False),
    Variant.GUIDED_LEARNED: VariantSpec(Variant.GUIDED_LEARNED, Generator.SYMMETRY_8, InductionMode.GUIDED, True),
}


# (block, game) -> per-turn counts of schemas the guided model added
YokeSchedule = dict[tuple[int, int], tuple[int, ...]]


def _relative_rows(boards, mover: int) -> np.ndarray:
    a = np.array(boards, dtype=np.int8)
    other = O if mover == X else X
    out = np.zeros_like(a)
    out[a == mover] = 1
    out[a == other] = 2
    return out


class Model:
    """A learner: one exemplar pool plus the fixed parameters of a variant."""

    def __init__(self, spec: VariantSpec, sim: SimilarityParams = SimilarityParams(),
                 learn: LearningParams = LearningParams(), rng: np.random.Generator | None = None,
                 mac: MacParams | None = None, eval_policy: str = "GREEDY", learning_sides: str = "BOTH",
                 schema_value: str = "INDUCTION"):
        self.spec = spec
        self.sim = sim
        self.learn = learn
        self.rng = rng if rng is not None else np.random.default_rng()
        self.mac = mac
        self.eval_policy = eval_policy
        self.learning_sides = learning_sides
        self.schema_value = schema_value
        self.pool = ExemplarPool(self.rng)
        self.stats = InductionStats()
        self.induction_log: list[dict] = []
        self.yoke_deficit = 0

    def estimate(self, board) -> tuple[list[tuple[int, ...]], np.ndarray, object]:
        mover = to_move(board)
        afters = afterstates(board)
        cells = _relative_rows(afters, mover)
        return afters, cells, evaluate(self.pool, cells, self.sim, self.spec.generator, self.mac)

    def estimate_cells(self, pool: ExemplarPool, cells) -> float:
        """Current estimate of one mover-relative board."""
        ev = evaluate(pool, np.asarray(cells, dtype=np.int8).reshape(1, 9), self.sim, self.spec.generator, self.mac)
        return float(ev.values[0])

    def select(self, board, rng: np.random.Generator) -> tuple[int, ...]:
        """Test-time move: no learning, greedy unless configured otherwise."""
        afters, _, ev = self.estimate(board)
        if self.eval_policy == "SOFTMAX":
            return afters[softmax_select(ev.values, self.learn.tau, rng)]
        return afters[greedy_select(ev.values, rng)]


def _turn_record(model: Model, ply: int, side: int, after, cells, ev, k: int) -> TurnRecord:
    pool = model.pool
    return TurnRecord(
        ply=ply,
        side=side,
        afterstate=after,
        cells=cells[k],
        value=float(ev.values[k]),
        ids=pool.ids,
        sims=ev.sims[k],
        weights=ev.weights[k],
        total=float(ev.totals[k]),
        v=pool.v,
        u=pool.u,
        best_symmetry=ev.best_symmetry[k],
        exemplar_cells=pool.cells,
        partner_is_schema=pool.is_schema,
    )


def play_training_game(model: Model, game_index: int = 0, yoke_quota: tuple[int, ...] | None = None) -> list[TurnRecord]:
    """One self-play game with cached learning applied at the end.

    Both sides are played by ``model`` on a shared pool with each side
    seeing the board from its own perspective.  Returns every ply's record.
    """
    rng = model.rng
    board = EMPTY_BOARD
    turns: list[TurnRecord] = []
    while outcome(board) is Outcome.ONGOING:
        side = to_move(board)
        afters, cells, ev = model.estimate(board)
        k = softmax_select(ev.values, model.learn.tau, rng)
        turns.append(_turn_record(model, len(turns), side, afters[k], cells, ev, k))
        board = afters[k]
    result = outcome(board)

    for side in (X, O):
        assign_td([t for t in turns if t.side == side], reward_for(result, side), model.learn)
    learned = turns if model.learning_sides == "BOTH" else [t for t in turns if t.side == X]

    for t in learned:
        t.dv = value_deltas(t, model.learn)
        if model.spec.learn_attention:
            t.du = attention_deltas(t, model.learn)

    mode = model.spec.induction
    quotas: list[int] = []
    if mode is InductionMode.GUIDED:
        for t in learned:
            maybe_induce_schemas(t, model.stats, model.learn, mode)
    elif mode is InductionMode.YOKED:
        quotas = _spread_quota(yoke_quota or (), len(learned), model.yoke_deficit)
        for t, q in zip(learned, quotas):
            maybe_induce_schemas(t, None, model.learn, mode, rng, q)

    events = apply_cached_updates(model.pool, learned, model.learn, model.spec.learn_attention, game_index,
                                  model.estimate_cells if model.schema_value == "INDUCTION" else None)
    model.induction_log.extend(events)
    if mode is InductionMode.YOKED:
        model.yoke_deficit = sum(quotas) - sum(t.induced for t in learned)

    for t in turns:
        maybe_recruit(model.pool, t.cells, rng, game_index)
    return turns


def _spread_quota(counts, n_turns: int, carry: int) -> list[int]:
    """Per-turn quotas; anything past this game's length, and any carried
    shortfall from earlier games, lands on the last turn."""
    if n_turns == 0:
        return []
    q = [int(c) for c in counts[:n_turns]] + [0] * max(0, n_turns - len(counts))
    q[-1] += int(sum(counts[n_turns:])) + carry
    return q


# --- evaluation -----------------------------------------------------------


def evaluate_pair(model, table: SolvedTable, rng: np.random.Generator,
                  tie_break: TieBreak = TieBreak.RANDOM) -> int:
    """Points over two games against the ideal player, once as X and once as O.

    A point is scored for each model move that keeps at least a draw; the
    count for a game stops at the first move that hands the opponent a
    forced win.  ``model`` only needs a ``select(board, rng)`` method.
    """
    points = 0
    for model_side in (X, O):
        board = EMPTY_BOARD
        while outcome(board) is Outcome.ONGOING:
            if to_move(board) == model_side:
                board = model.select(board, rng)
                if not is_nonlosing(table, board, model_side):
                    break
                points += 1
            else:
                board = ideal_move(table, board, rng, tie_break)
    return points


class SolvedPolicy:
    """Plays a game-value-maximal move, for checking the scoring ceiling."""

    def __init__(self, table: SolvedTable):
        self.table = table

    def select(self, board, rng):
        return ideal_move(self.table, board, rng, TieBreak.RANDOM)


# --- replicates -----------------------------------------------------------


@dataclass
class CurvePoint:
    replicate: int
    block: int
    points: int
    n_exemplars: int
    n_schemas: int
    mean_abs_v_states: float
    mean_abs_v_schemas: float
    mean_u_states: float
    mean_u_schemas: float


def pool_summary(pool: ExemplarPool) -> dict[str, float]:
    def mean(x):
        return float(x.mean()) if x.size else math.nan

    st, sc = ~pool.is_schema, pool.is_schema
    return {
        "n_exemplars": len(pool),
        "n_schemas": int(sc.sum()),
        "mean_abs_v_states": mean(np.abs(pool.v[st])),
        "mean_abs_v_schemas": mean(np.abs(pool.v[sc])),
        "mean_u_states": mean(pool.u[st]),
        "mean_u_schemas": mean(pool.u[sc]),
    }


@dataclass
class ReplicateResult:
    variant: str
    replicate: int
    curve: list[CurvePoint]
    inductions: list[dict]
    pool: ExemplarPool
    schedule: YokeSchedule = field(default_factory=dict)


_TABLE: SolvedTable | None = None


def shared_table() -> SolvedTable:
    """The solved game, computed once per process."""
    global _TABLE
    if _TABLE is None:
        _TABLE = solve()
    return _TABLE


def _seed(config: ExperimentConfig, variant: str, replicate: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([config.seed, VARIANT_NAMES.index(variant), replicate, *extra])


def build_model(variant: str, config: ExperimentConfig, replicate: int) -> Model:
    spec = VARIANTS[Variant(variant)]
    rng = np.random.default_rng(_seed(config, variant, replicate))
    return Model(spec, config.similarity_params(), config.learning_params(), rng, config.mac_params(),
                 config.eval_policy, config.learning_sides, config.schema_value)


def run_replicate(variant: str, config: ExperimentConfig, replicate: int, yoke: YokeSchedule | None = None,
                  table: SolvedTable | None = None) -> ReplicateResult:
    model = build_model(variant, config, replicate)
    if model.spec.induction is InductionMode.YOKED and yoke is None:
        raise ValueError("the unguided variant needs a yoke schedule from a guided run")
    table = table if table is not None else shared_table()
    tie = TieBreak[config.tie_break]
    curve: list[CurvePoint] = []
    schedule: YokeSchedule = {}
    game_index = 0
    for block in range(config.blocks):
        for g in range(config.games_per_block):
            quota = yoke.get((block, g), ()) if yoke is not None else None
            turns = play_training_game(model, game_index, quota)
            if model.spec.induction is InductionMode.GUIDED:
                counts = tuple(t.induced for t in sorted(turns, key=lambda t: t.ply)
                               if t.dv is not None)
                if any(counts):
                    schedule[(block, g)] = counts
            game_index += 1
        eval_rng = np.random.default_rng(_seed(config, variant, replicate, block, 1))
        pts = evaluate_pair(model, table, eval_rng, tie)
        curve.append(CurvePoint(replicate, block, pts, **pool_summary(model.pool)))
    return ReplicateResult(variant, replicate, curve, model.induction_log, model.pool, schedule)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replicates: dict[str, list[ReplicateResult]]

    def summary(self) -> list[tuple[str, int, float, float]]:
        """(variant, block, mean points, standard error) over replicates."""
        rows = []
        for variant in self.config.variants:
            pts = np.array([[c.points for c in r.curve] for r in self.replicates[variant]], dtype=float)
            n = pts.shape[0]
            mean = pts.mean(axis=0)
            se = pts.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(pts.shape[1])
            rows.extend((variant, b, float(mean[b]), float(se[b])) for b in range(pts.shape[1]))
        return rows


def _job(args):
    variant, config, replicate, yoke = args
    return run_replicate(variant, config, replicate, yoke)


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentResult:
    """Run every requested variant for every replicate.

    Guided-fixed replicate ``i`` supplies the yoke schedule for unguided
    replicate ``i``; it is run even if not requested, then dropped.
    """
    config.validate()
    wanted = list(config.variants)
    first = [v for v in VARIANT_NAMES if v in wanted and v != "unguided_fixed"]
    if "unguided_fixed" in wanted and "guided_fixed" not in first:
        first.append("guided_fixed")

    results: dict[str, list[ReplicateResult]] = {v: [] for v in first}
    stage1 = [(v, config, i, None) for v in first for i in range(config.replicates)]
    for res in _map(stage1, config.threads, progress):
        results[res.variant].append(res)
    if "unguided_fixed" in wanted:
        guided = {r.replicate: r.schedule for r in results["guided_fixed"]}
        stage2 = [("unguided_fixed", config, i, guided[i]) for i in range(config.replicates)]
        results["unguided_fixed"] = list(_map(stage2, config.threads, progress))
    for v in results:
        results[v].sort(key=lambda r: r.replicate)
    return ExperimentResult(config, {v: results[v] for v in wanted})


def _map(jobs, threads: int, progress):
    if threads <= 1:
        for job in jobs:
            res = _job(job)
            if progress:
                progress(res)
            yield res
        return
    with ProcessPoolExecutor(max_workers=threads) as ex:
        for res in ex.map(_job, jobs):
            if progress:
                progress(res)
            yield res
