import time

import numpy as np
import pytest

from analogical_rl.solver import GameValue, TieBreak, ideal_move, is_nonlosing, load_table, save_table, solve
from analogical_rl.tictactoe import EMPTY_BOARD, O, Outcome, X, afterstates, apply_symmetry, outcome, parse_board, to_move


def plain_minimax_values():
    """Oracle: one full game-tree walk, no memo lookups, no symmetry."""
    seen = {}

    def value(b):
        res = outcome(b)
        if res is Outcome.X_WINS:
            v = 1
        elif res is Outcome.O_WINS:
            v = -1
        elif res is Outcome.DRAW:
            v = 0
        else:
            kids = [value(a) for a in afterstates(b)]
            v = max(kids) if to_move(b) == X else min(kids)
        assert seen.setdefault(b, v) == v
        return v

    value(EMPTY_BOARD)
    return seen


def test_solver_agrees_with_plain_minimax(table):
    oracle = plain_minimax_values()
    assert set(oracle) == set(table.values)
    assert all(int(table.values[b]) == v for b, v in oracle.items())


def test_solve_is_fast():
    t = time.perf_counter()
    solve()
    assert time.perf_counter() - t < 5.0


def test_empty_board_is_a_draw(table):
    assert table.value(EMPTY_BOARD) == GameValue.DRAW


def test_one_ply_win(table):
    assert table.value(parse_board("XX./OO./...")) == GameValue.X_WIN


def test_double_threat_is_won(table):
    # X to move with two open lines is won; same with O to move who can block only one
    assert table.value(parse_board("X.X/.O./X.O")) == GameValue.X_WIN
    assert table.value(parse_board("XX./.XO/O..")) == GameValue.X_WIN


def test_ideal_move_blocks_threat(table, rng):
    b = parse_board("XX./.O./...")
    assert ideal_move(table, b, rng) == parse_board("XXO/.O./...")


def test_ideal_move_takes_win(table, rng):
    b = parse_board("XX./OO./X..")
    assert outcome(ideal_move(table, b, rng)) is Outcome.O_WINS


def test_ideal_openings_are_uniform_among_ties(table):
    assert len(table.best_moves[EMPTY_BOARD]) == 9
    rng = np.random.default_rng(0)
    picks = {ideal_move(table, EMPTY_BOARD, rng) for _ in range(300)}
    assert len(picks) == 9
    assert ideal_move(table, EMPTY_BOARD, None, TieBreak.FIRST) == table.best_moves[EMPTY_BOARD][0]


def test_ideal_move_rejects_finished_games(table, rng):
    with pytest.raises(ValueError):
        ideal_move(table, parse_board("XXX/OO./..."), rng)


def test_is_nonlosing(table):
    assert is_nonlosing(table, parse_board("X../.../..."), X)
    assert is_nonlosing(table, parse_board("X../.O./..."), O)
    # an edge reply to a corner opening loses
    assert not is_nonlosing(table, parse_board("XO./.../..."), O)
    # leaving O's open row unblocked loses
    assert not is_nonlosing(table, parse_board("XX./OO./X.."), X)
    assert is_nonlosing(table, parse_board("XXX/OO./..."), X)


def test_ideal_self_play_draws(table):
    rng = np.random.default_rng(1)
    for _ in range(200):
        b = EMPTY_BOARD
        while outcome(b) is Outcome.ONGOING:
            b = ideal_move(table, b, rng)
        assert outcome(b) is Outcome.DRAW


def test_value_is_symmetry_invariant(table):
    for b, v in table.values.items():
        for s in range(8):
            assert table.values[apply_symmetry(b, s)] == v


def test_cache_round_trip(tmp_path, table):
    path = tmp_path / "solved.bin"
    save_table(table, path)
    again = load_table(path)
    assert again.values == table.values
    assert again.best_moves == table.best_moves
    path.write_bytes(b"junk")
    with pytest.raises(ValueError):
        load_table(path)
    assert solve(path).values == table.values
    assert load_table(path).values == table.values
