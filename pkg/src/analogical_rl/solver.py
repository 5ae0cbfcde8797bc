"""Exact tic-tac-toe solution by backward induction, and the ideal opponent."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from .tictactoe import (
    EMPTY_BOARD,
    IllegalPosition,
    Outcome,
    X,
    afterstates,
    outcome,
    to_move,
)

log = logging.getLogger(__name__)


class GameValue(IntEnum):
    """Value under ideal play by both sides, ordered from X's point of view."""

    O_WIN = -1
    DRAW = 0
    X_WIN = 1


class TieBreak(Enum):
    RANDOM = "RANDOM"
    FIRST = "FIRST"


_TERMINAL = {Outcome.X_WINS: GameValue.X_WIN, Outcome.O_WINS: GameValue.O_WIN, Outcome.DRAW: GameValue.DRAW}


@dataclass
class SolvedTable:
    values: dict[tuple[int, ...], GameValue]
    best_moves: dict[tuple[int, ...], tuple[tuple[int, ...], ...]]

    def value(self, board: Sequence[int]) -> GameValue:
        return self.values[tuple(board)]

    def __len__(self) -> int:
        return len(self.values)


def _best_for(mover: int, child_values: list[GameValue]) -> GameValue:
    return max(child_values) if mover == X else min(child_values)


def solve(cache_path: str | Path | None = None) -> SolvedTable:
    """Solve every position reachable from the empty board.

    With ``cache_path`` the table is read from that file when it is present
    and valid, and written there otherwise.
    """
    if cache_path is not None:
        try:
            return load_table(cache_path)
        except (OSError, ValueError) as exc:
            log.info("re-solving, cache unusable: %s", exc)

    values: dict[tuple[int, ...], GameValue] = {}

    def visit(board: tuple[int, ...]) -> GameValue:
        v = values.get(board)
        if v is not None:
            return v
        res = outcome(board)
        if res is not Outcome.ONGOING:
            v = _TERMINAL[res]
        else:
            v = _best_for(to_move(board), [visit(b) for b in afterstates(board)])
        values[board] = v
        return v

    visit(EMPTY_BOARD)
    table = SolvedTable(values, _best_moves(values))
    if cache_path is not None:
        save_table(table, cache_path)
    return table


def _best_moves(values):
    best = {}
    for board, v in values.items():
        if outcome(board) is Outcome.ONGOING:
            best[board] = tuple(b for b in afterstates(board) if values[b] == v)
    return best


def ideal_move(table: SolvedTable, board: Sequence[int], rng: np.random.Generator | None = None,
               tie_break: TieBreak = TieBreak.RANDOM) -> tuple[int, ...]:
    board = tuple(board)
    if outcome(board) is not Outcome.ONGOING:
        raise IllegalPosition("game is over; no moves available")
    choices = table.best_moves[board]
    if tie_break is TieBreak.FIRST or len(choices) == 1:
        return choices[0]
    if rng is None:
        raise ValueError("random tie-breaking needs an rng")
    return choices[int(rng.integers(len(choices)))]


def is_nonlosing(table: SolvedTable, board_after_model_move: Sequence[int], model_side: int) -> bool:
    v = table.value(board_after_model_move)
    own_win = GameValue.X_WIN if model_side == X else GameValue.O_WIN
    return v == GameValue.DRAW or v == own_win


# --- on-disk cache --------------------------------------------------------

_MAGIC = b"TTTSOLVE"
_VERSION = 1
_HEADER = struct.Struct("<8sHI")
_ENTRY = struct.Struct("<Hb")


def _index(board: Sequence[int]) -> int:
    n = 0
    for c in board:
        n = 3 * n + c
    return n


def _unindex(n: int) -> tuple[int, ...]:
    cells = []
    for _ in range(9):
        n, c = divmod(n, 3)
        cells.append(c)
    return tuple(reversed(cells))


def save_table(table: SolvedTable, path: str | Path) -> None:
    entries = sorted((_index(b), int(v)) for b, v in table.values.items())
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, len(entries)))
        for idx, v in entries:
            fh.write(_ENTRY.pack(idx, v))


def load_table(path: str | Path) -> SolvedTable:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated solver cache")
    magic, version, count = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"not a version-{_VERSION} solver cache")
    if len(data) != _HEADER.size + count * _ENTRY.size:
        raise ValueError("solver cache has the wrong length")
    values = {}
    for k in range(count):
        idx, v = _ENTRY.unpack_from(data, _HEADER.size + k * _ENTRY.size)
        values[_unindex(idx)] = GameValue(v)
    if values.get(EMPTY_BOARD) is None:
        raise ValueError("solver cache lacks the empty board")
    return SolvedTable(values, _best_moves(values))

