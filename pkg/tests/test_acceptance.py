"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The desk-scale experiment (8 replicates x 500 blocks of 10 games, all five
variants) is run once per session and shared by criteria 4 to 8; it takes
roughly a quarter of an hour on one core.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from analogical_rl.config import DESK_SCALE, VARIANT_NAMES, ExperimentConfig
from analogical_rl.harness import SolvedPolicy, evaluate_pair, run_experiment
from analogical_rl.learning import (
    LearningParams,
    apply_cached_updates,
    attention_deltas,
    schema_cells,
    softmax_probabilities,
    td_error,
    td_reductions,
    value_deltas,
)
from analogical_rl.macfac import MacParams, features, mac_score, retrieve_top_n
from analogical_rl.memory import ExemplarPool, Origin, activations, add_schema, estimate_value, recruitment_probability
from analogical_rl.relational import (
    Backend,
    Generator,
    Kind,
    SimilarityParams,
    analogical_similarity,
    difference_count,
    enumerate_mappings,
    phi_score,
    phi_score_trickledown,
    structure_from_cells,
)
from analogical_rl.solver import is_nonlosing, solve
from analogical_rl.tictactoe import EMPTY_BOARD, LINES, apply_symmetry, parse_board, reachable_boards

from conftest import cells, schema, state
from test_learning import turn_from
from test_solver import plain_minimax_values
from test_tictactoe import REACHABLE_POSITIONS, _enumerate_by_move_sequences

PHI = SimilarityParams(backend=Backend.PHI)
DIFF = SimilarityParams()
TOL = 1e-12


# --- criterion 1 ----------------------------------------------------------


def test_c1_solver_correctness(tmp_path, acceptance_report):
    t0 = time.perf_counter()
    table = solve(tmp_path / "absent.bin")
    elapsed = time.perf_counter() - t0
    oracle = plain_minimax_values()
    agree = sum(int(table.values[b]) == v for b, v in oracle.items())
    ok = (agree == len(oracle) == len(table.values) and int(table.value(EMPTY_BOARD)) == 0
          and elapsed < 5.0)
    acceptance_report(1, "solver matches plain minimax on every reachable board", ok,
                      f"{agree}/{len(oracle)} boards agree, empty board {table.value(EMPTY_BOARD).name}, "
                      f"{elapsed:.2f}s")
    assert ok


# --- criterion 2 ----------------------------------------------------------


def _golden():
    """(label, computed, frozen) for every hand-derived example."""
    P = LearningParams()
    a, b = state("XX./O../..."), state(".XX/..O/...")
    ident = enumerate_mappings(a, b, Generator.IDENTITY)[0]
    mirror = enumerate_mappings(a, b, Generator.SYMMETRY_8)[4]
    full = state("XO./.X./..O")
    fid = enumerate_mappings(full, full, Generator.IDENTITY)[0]

    pool = ExemplarPool(np.random.default_rng(0))
    pool.add(cells("XO./.X./..O"), 0.0, 3.0, Origin.RECRUITED_STATE)
    pool.add(cells("XO./.X./..."), 0.0, 1.0, Origin.RECRUITED_STATE)
    act = [x for _, _, x in activations(pool, cells("XO./.X./..."), SimilarityParams(theta=math.log(2)))]

    vpool = ExemplarPool(np.random.default_rng(0))
    vpool.add(cells("XO./.X./..."), 1.0, 3.0, Origin.RECRUITED_STATE)
    vpool.add(cells("..X/.XO/..."), -1.0, 1.0, Origin.RECRUITED_STATE)

    rpool = ExemplarPool(np.random.default_rng(0))
    for t in ("X../.../...", ".X./.../...", ".../X../..."):
        rpool.add(cells(t), 0, 1, Origin.RECRUITED_STATE)

    spool = ExemplarPool(np.random.default_rng(0))
    add_schema(spool, cells("XX*/O**/***"), 0.1)
    rot_dup = add_schema(spool, apply_symmetry(cells("XX*/O**/***"), 1), 0.1)

    t_dv = turn_from([1, 1], [1, 1], [0, 0], td=0.4)
    t_du = turn_from([0.5, 0.5], [1, 1], [1, 0], td=0.2)
    t_red = turn_from([1, 1], [1, 1], [1, 0], reward=1.0)
    red = td_reductions(t_red, P)

    apool = ExemplarPool(np.random.default_rng(0))
    apool.add(cells("X../.../..."), 1.0, 1.0, Origin.RECRUITED_STATE)
    apool.add(cells(".X./.../..."), 0.0, 1.0, Origin.RECRUITED_STATE)
    t_apply = turn_from([0.5, 0.5], apool.u, apool.v, td=0.2)
    t_apply.ids = apool.ids
    t_apply.dv, t_apply.du = value_deltas(t_apply, P), attention_deltas(t_apply, P)
    apply_cached_updates(apool, [t_apply], P)

    table = solve()
    block = parse_board("XX./.O./...")
    ideal_set = table.best_moves[block]

    mpool = ExemplarPool(np.random.default_rng(0))
    mpool.add(cells("XO./.X./..."), 0.0, 0.0, Origin.RECRUITED_STATE)
    mpool.add(cells("OOO/XXX/..."), 0.0, 0.3, Origin.RECRUITED_STATE)
    mac_last = retrieve_top_n(mpool, cells("XO./.X./..."), MacParams(top_n=2))[-1]

    line_schema = schema_cells(cells("O.O/.O./XXX"), cells(".O./O.O/XXX"), 0)
    return [
        ("phi identical boards", phi_score(full, full, fid, PHI), 41.0),
        ("phi four differences", phi_score(a, b, ident, PHI), 37.0),
        ("trickle-down identical boards", phi_score_trickledown(full, full, fid, PHI, 1.0, 1.0), 41.0),
        ("difference count under identity", difference_count(a, b, ident), 4),
        ("difference count under reflection", difference_count(a, b, mirror), 0),
        ("featural similarity of the reflected pair", analogical_similarity(a, b, DIFF, Generator.IDENTITY)[0],
         math.exp(-4)),
        ("relational similarity of the reflected pair", analogical_similarity(a, b, DIFF)[0], 1.0),
        ("one differing cell", analogical_similarity(state("XO./.X./..O"), state("XO./.X./.OO"), DIFF)[0],
         math.exp(-1)),
        ("rotation is perfectly similar", analogical_similarity(state("XO./.X./..O"),
                                                                state("..X/.XO/O.."), DIFF)[0], 1.0),
        ("line schema matches a bottom row", analogical_similarity(state("O.O/.O./XXX"),
                                                                   schema("***/***/XXX"), DIFF)[0], 1.0),
        ("activation u={3,1}", act[0], 0.6),
        ("activation u={3,1} second", act[1], 0.4),
        ("estimate v={+1,-1} a={.75,.25}", estimate_value(vpool, cells("XO./.X./..."))[0], 0.5),
        ("recruitment probability with 3 states", recruitment_probability(rpool), 0.25),
        ("rotated schema rejected", rot_dup, False),
        ("softmax {1,0}", softmax_probabilities([1, 0], 1)[0], math.e / (math.e + 1)),
        ("TD terminal win", td_error(1, 0, 0.6, 1), 0.4),
        ("TD mid game", td_error(0, 0.2, 0.5, 1), -0.3),
        ("value delta", value_deltas(t_dv, P)[0], 0.2),
        ("attention delta +", attention_deltas(t_du, P)[0], 0.05),
        ("attention delta -", attention_deltas(t_du, P)[1], -0.05),
        ("TD reduction helpful", red[0], 0.5),
        ("TD reduction misleading", red[1], -0.5),
        ("bottom-row schema", "".join(".XO*"[c] for c in line_schema), "******XXX"),
        ("single-turn update value", apool.v[0], 1.1),
        ("single-turn update attention", apool.u[0], 1.05),
        ("reachable positions", len(reachable_boards()), REACHABLE_POSITIONS),
        ("enumeration oracle positions", len(_enumerate_by_move_sequences()), REACHABLE_POSITIONS),
        ("block is the unique ideal move", [parse_board("XXO/.O./...")] == list(ideal_set), True),
        ("all nine openings draw", len(table.best_moves[EMPTY_BOARD]), 9),
        ("edge reply to corner loses", is_nonlosing(table, parse_board("XO./.../..."), 2), False),
        ("mac cosine 1/2 at u=2", mac_score(features(cells("XX*/***/OO*")), features(cells("XX*/***/XX*")), 2.0),
         1.0),
        ("zero attention ranks last", mac_last, int(mpool.ids[0])),
    ]


def test_c2_golden_values(acceptance_report):
    bad = []
    rows = _golden()
    for label, got, want in rows:
        if isinstance(want, float):
            ok = abs(float(got) - want) <= TOL
        else:
            ok = got == want
        if not ok:
            bad.append(f"{label}: {got!r} != {want!r}")
    acceptance_report(2, "hand-derived golden values reproduce", not bad,
                      f"{len(rows) - len(bad)}/{len(rows)} exact" + (f"; {bad}" if bad else ""))
    assert not bad


# --- criterion 3 ----------------------------------------------------------


def test_c3_phi_equals_trickledown(acceptance_report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    n = 10_000
    for _ in range(n):
        x = structure_from_cells(tuple(rng.integers(0, 3, 9)), Kind.STATE)
        y = structure_from_cells(tuple(rng.integers(0, 3, 9)), Kind.STATE)
        m = enumerate_mappings(x, y, Generator.SYMMETRY_8)[int(rng.integers(8))]
        worst = max(worst, abs(phi_score(x, y, m, PHI) - phi_score_trickledown(x, y, m, PHI, 1.0, 1.0)))
    ok = worst <= 1e-9
    acceptance_report(3, "phi score equals trickle-down score", ok, f"{n} triples, max |diff| {worst:.1e}")
    assert ok


# --- desk-scale experiment ------------------------------------------------


@pytest.fixture(scope="session")
def desk():
    cfg = ExperimentConfig(replicates=DESK_SCALE["replicates"], blocks=DESK_SCALE["blocks"])
    return run_experiment(cfg)


def _final_means(desk, variant, last=50):
    return np.array([np.mean([c.points for c in r.curve[-last:]]) for r in desk.replicates[variant]])


def _welch_greater(a, b):
    return float(stats.ttest_ind(a, b, equal_var=False, alternative="greater").pvalue)


@pytest.mark.slow
def test_c4_variant_ordering(desk, acceptance_report):
    m = {v: _final_means(desk, v) for v in VARIANT_NAMES}
    pairs = [("relational", "featural"), ("guided_fixed", "unguided_fixed"), ("guided_learned", "guided_fixed")]
    ps = {f"{a}>{b}": _welch_greater(m[a], m[b]) for a, b in pairs}
    ok = all(p < 0.05 for p in ps.values())
    means = ", ".join(f"{v} {m[v].mean():.2f}" for v in VARIANT_NAMES)
    tests = ", ".join(f"{k} p={p:.3g}" for k, p in ps.items())
    acceptance_report(4, "variant ordering at desk scale", ok, f"last-50 means: {means}; {tests}")
    assert ok


@pytest.mark.slow
def test_c5_schema_diagnosticity(desk, acceptance_report):
    hits_v = hits_u = both = 0
    for r in desk.replicates["guided_learned"]:
        p = r.pool
        s = p.is_schema
        if not s.any() or s.all():
            continue
        v_ok = np.abs(p.v[s]).mean() > np.abs(p.v[~s]).mean()
        u_ok = p.u[s].mean() > p.u[~s].mean()
        hits_v += v_ok
        hits_u += u_ok
        both += v_ok and u_ok
    n = len(desk.replicates["guided_learned"])
    ok = both >= 6
    acceptance_report(5, "schemas carry larger |v| and u than states", ok,
                      f"|v| in {hits_v}/{n}, u in {hits_u}/{n}, both in {both}/{n}; need 6")
    assert ok


def _is_clean(text):
    c = [".XO*".index(ch) for ch in text]
    if c.count(3) < 5:
        return False
    return any(c[i] == c[j] == c[k] and c[i] in (1, 2) for i, j, k in LINES)


@pytest.mark.slow
def test_c6_clean_schema_emerges(desk, acceptance_report):
    reps = desk.replicates["guided_learned"]
    with_clean = sum(any(_is_clean(e["schema"]) for e in r.inductions) for r in reps)
    ok = with_clean >= len(reps) / 2
    acceptance_report(6, "a clean three-in-a-line schema is induced", ok,
                      f"{with_clean}/{len(reps)} replicates")
    assert ok


@pytest.mark.slow
def test_c7_evaluation_bounds(desk, acceptance_report):
    table = solve()
    policy = SolvedPolicy(table)
    ideal = [evaluate_pair(policy, table, np.random.default_rng(s)) for s in range(1000)]
    learned = [c.points for rs in desk.replicates.values() for r in rs for c in r.curve]
    ok = all(p == 9 for p in ideal) and all(0 <= p <= 9 for p in learned)
    acceptance_report(7, "solved policy scores 9, learners stay in [0, 9]", ok,
                      f"ideal min {min(ideal)}, learned range [{min(learned)}, {max(learned)}] "
                      f"over {len(learned)} pairs")
    assert ok


@pytest.mark.slow
def test_c8_yoking_exactness(desk, acceptance_report):
    pairs = list(zip(desk.replicates["guided_fixed"], desk.replicates["unguided_fixed"]))
    same = sum(g.pool.n_schemas == u.pool.n_schemas and len(g.inductions) == len(u.inductions)
               for g, u in pairs)
    counts = [g.pool.n_schemas for g, _ in pairs]
    ok = same == len(pairs)
    acceptance_report(8, "unguided schema count equals guided count", ok,
                      f"{same}/{len(pairs)} pairs equal; guided counts {counts}")
    assert ok


# --- criteria 9 and 10 ----------------------------------------------------


def test_c9_determinism(tmp_path, acceptance_report):
    from analogical_rl.cli import main

    args = ["run", "--replicates", "2", "--blocks", "15", "--no-svg"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "curves.csv").read_bytes()
    b = (tmp_path / "b" / "curves.csv").read_bytes()
    ok = a == b
    acceptance_report(9, "identical config and seed give byte-identical curves.csv", ok,
                      f"{len(a)} bytes, all five variants")
    assert ok


def _fingerprint(result):
    out = []
    for v, reps in result.replicates.items():
        for r in reps:
            out.append((v, r.replicate, tuple(dataclass_tuple(c) for c in r.curve), repr(r.inductions),
                        r.pool.cells.tobytes(), r.pool.v.tobytes(), r.pool.u.tobytes(), r.pool.ids.tobytes()))
    return out


def dataclass_tuple(c):
    return tuple(repr(x) for x in vars(c).values())


def test_c10_mac_with_full_retrieval_is_identical(acceptance_report):
    base = ExperimentConfig(replicates=2, blocks=10)
    plain = run_experiment(base)
    # no pool can ever hold more exemplars than were ever created
    bound = max(int(r.pool.ids.max()) + 1 for rs in plain.replicates.values() for r in rs)
    filtered = run_experiment(ExperimentConfig(replicates=2, blocks=10, mac_top_n=bound))
    ok = _fingerprint(plain) == _fingerprint(filtered)
    acceptance_report(10, "MAC stage retrieving the whole pool changes nothing", ok,
                      f"top_n={bound}, 5 variants x 2 replicates x 10 blocks, bitwise")
    assert ok
