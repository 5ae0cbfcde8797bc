"""Tic-tac-toe mechanics and board geometry.

Boards are tuples of 9 ints in row-major order using absolute tokens
(``EMPTY``, ``X``, ``O``).  The side to move is implied by the token counts.
Encodings handed to the learner are *perspective relative*: the mover's
tokens become ``AGENT`` and the other side's become ``OPPONENT``.
"""

from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

EMPTY, X, O = 0, 1, 2

# relative object types
BLANK, AGENT, OPPONENT = 0, 1, 2
WILDCARD = -1

# rows, then columns, then main and anti diagonal; roles left-to-right /
# top-to-bottom, diagonals read top row first.
LINES: tuple[tuple[int, int, int], ...] = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),
    (0, 3, 6), (1, 4, 7), (2, 5, 8),
    (0, 4, 8), (2, 4, 6),
)


def _sym_from_coords(fn) -> tuple[int, ...]:
    out = []
    for i in range(9):
        r, c = divmod(i, 3)
        r2, c2 = fn(r, c)
        out.append(3 * r2 + c2)
    return tuple(out)


# SYMMETRIES[s][i] is the cell that cell i is carried to by symmetry s.
SYMMETRIES: tuple[tuple[int, ...], ...] = (
    _sym_from_coords(lambda r, c: (r, c)),          # identity
    _sym_from_coords(lambda r, c: (c, 2 - r)),      # rotate 90 clockwise
    _sym_from_coords(lambda r, c: (2 - r, 2 - c)),  # rotate 180
    _sym_from_coords(lambda r, c: (2 - c, r)),      # rotate 270
    _sym_from_coords(lambda r, c: (r, 2 - c)),      # mirror left/right
    _sym_from_coords(lambda r, c: (2 - r, c)),      # mirror top/bottom
    _sym_from_coords(lambda r, c: (c, r)),          # main diagonal
    _sym_from_coords(lambda r, c: (2 - c, 2 - r)),  # anti diagonal
)

# GATHER[s] satisfies transformed[j] == cells[GATHER[s][j]], i.e. the inverse
# permutation, so applying a symmetry to an array is a single fancy index.
GATHER = np.array([np.argsort(s) for s in SYMMETRIES], dtype=np.intp)


def apply_symmetry(cells: Sequence[int], s: int) -> tuple[int, ...]:
    """Move the content of every cell ``i`` to ``SYMMETRIES[s][i]``."""
    return tuple(cells[j] for j in GATHER[s])


class Outcome(Enum):
    ONGOING = "ONGOING"
    X_WINS = "X_WINS"
    O_WINS = "O_WINS"
    DRAW = "DRAW"


class IllegalPosition(ValueError):
    pass


EMPTY_BOARD: tuple[int, ...] = (EMPTY,) * 9


def to_move(board: Sequence[int]) -> int:
    nx = sum(1 for c in board if c == X)
    no = sum(1 for c in board if c == O)
    return X if nx == no else O


def validate(board: Sequence[int]) -> None:
    if len(board) != 9 or any(c not in (EMPTY, X, O) for c in board):
        raise IllegalPosition(f"not a board: {board!r}")
    nx = sum(1 for c in board if c == X)
    no = sum(1 for c in board if c == O)
    if nx - no not in (0, 1):
        raise IllegalPosition(f"token counts X={nx} O={no} are impossible")
    xw, ow = _has_line(board, X), _has_line(board, O)
    if xw and ow:
        raise IllegalPosition("both players have a completed line")
    # the winner must have made the last move
    if xw and nx != no + 1:
        raise IllegalPosition("X has a line but O moved after it")
    if ow and nx != no:
        raise IllegalPosition("O has a line but X moved after it")


def _has_line(board: Sequence[int], token: int) -> bool:
    return any(board[a] == board[b] == board[c] == token for a, b, c in LINES)


def outcome(board: Sequence[int]) -> Outcome:
    if _has_line(board, X):
        return Outcome.X_WINS
    if _has_line(board, O):
        return Outcome.O_WINS
    if EMPTY not in board:
        return Outcome.DRAW
    return Outcome.ONGOING


def afterstates(board: Sequence[int]) -> list[tuple[int, ...]]:
    """Every board reachable by the side to move placing one token."""
    if outcome(board) is not Outcome.ONGOING:
        raise IllegalPosition("game is over; no moves available")
    mover = to_move(board)
    out = []
    for i, c in enumerate(board):
        if c == EMPTY:
            nxt = list(board)
            nxt[i] = mover
            out.append(tuple(nxt))
    return out


def reward_for(result: Outcome, perspective: int) -> float:
    if result is Outcome.ONGOING:
        raise ValueError("reward is only defined for finished games")
    if result is Outcome.DRAW:
        return 0.0
    winner = X if result is Outcome.X_WINS else O
    return 1.0 if winner == perspective else -1.0


def relative_cells(board: Sequence[int], perspective: int) -> tuple[int, ...]:
    """Relabel absolute tokens so ``perspective``'s own tokens are AGENT."""
    other = O if perspective == X else X
    lut = {EMPTY: BLANK, perspective: AGENT, other: OPPONENT}
    return tuple(lut[c] for c in board)


def encode(board: Sequence[int], perspective: int):
    """Relational encoding of ``board`` seen by ``perspective``."""
    from .relational import Kind, structure_from_cells

    return structure_from_cells(relative_cells(board, perspective), Kind.STATE)


# --- text forms ---------------------------------------------------------

_ABS_CHARS = {EMPTY: ".", X: "X", O: "O"}
_REL_CHARS = {WILDCARD: "*", BLANK: ".", AGENT: "X", OPPONENT: "O"}
_REL_PARSE = {v: k for k, v in _REL_CHARS.items()}


def board_text(board: Sequence[int]) -> str:
    return "".join(_ABS_CHARS[c] for c in board)


def cells_text(cells: Sequence[int]) -> str:
    """Nine characters from ``. X O *``; X is the focal agent."""
    return "".join(_REL_CHARS[int(c)] for c in cells)


def parse_cells(text: str) -> tuple[int, ...]:
    t = text.replace("/", "").strip()
    if len(t) != 9 or any(ch not in _REL_PARSE for ch in t.upper()):
        raise ValueError(f"expected 9 characters from '.XO*', got {text!r}")
    return tuple(_REL_PARSE[ch] for ch in t.upper())


def parse_board(notation: str) -> tuple[int, ...]:
    """Parse ``XO./.X./..O X`` style notation (rows, then side to move).

    The side-to-move token is optional; if present it must agree with the
    token counts.  Row separators are optional too.
    """
    parts = notation.split()
    if not parts or len(parts) > 2:
        raise ValueError(f"cannot parse board notation {notation!r}")
    cells = parts[0].replace("/", "")
    if len(cells) != 9 or any(ch not in ".XOxo-_" for ch in cells):
        raise ValueError(f"expected 9 cells from '.XO', got {parts[0]!r}")
    lut = {".": EMPTY, "-": EMPTY, "_": EMPTY, "X": X, "O": O}
    board = tuple(lut[ch.upper()] for ch in cells)
    validate(board)
    if len(parts) == 2:
        side = parts[1].upper()
        if side not in ("X", "O"):
            raise ValueError(f"side to move must be X or O, got {parts[1]!r}")
        if outcome(board) is Outcome.ONGOING and (X if side == "X" else O) != to_move(board):
            raise IllegalPosition(f"{side} cannot be to move in {parts[0]}")
    return board


def format_board(board: Sequence[int]) -> str:
    t = board_text(board)
    side = "X" if to_move(board) == X else "O"
    return f"{t[0:3]}/{t[3:6]}/{t[6:9]} {side}"


def reachable_boards() -> set[tuple[int, ...]]:
    """All positions reachable from the empty board by legal play."""
    seen = {EMPTY_BOARD}
    stack = [EMPTY_BOARD]
    while stack:
        b = stack.pop()
        if outcome(b) is not Outcome.ONGOING:
            continue
        for nxt in afterstates(b):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen
