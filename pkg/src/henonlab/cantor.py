"""Dyadic words, branch charts, the piece hierarchy, the tip, and orbits.

The level-n pieces are images of the standing box under composed branch
charts, one chart per word letter: `v` is the chart of the doubling step,
`c` is that chart followed by the map of the same level. The invariant
Cantor set is the nested intersection; its unique invariant measure gives
every level-n piece mass 2^-n, so piece centers double as quadrature nodes.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TowerTooShallow
from .funcrep import Box3, Interval
from .henon import RenormSequence

__all__ = [
    "Word", "Piece", "CantorSample",
    "adding_machine", "build_pieces", "tip", "cantor_orbit",
    "nesting_defect", "separation_gap", "permutation_defect",
    "write_pieces_csv",
]

PROBE_GRID = 8


@dataclass(frozen=True)
class Word:
    """A finite dyadic word, least significant letter first (v = 0, c = 1)."""

    letters: tuple[str, ...]

    def __post_init__(self):
        bad = [l for l in self.letters if l not in ("v", "c")]
        if bad:
            raise DomainError(f"letters must be 'v' or 'c', got {bad}")

    @classmethod
    def from_int(cls, value: int, n: int) -> "Word":
        if not 0 <= value < 2 ** n:
            raise DomainError(f"value {value} out of range for {n} letters")
        return cls(tuple("c" if (value >> k) & 1 else "v" for k in range(n)))

    @property
    def value(self) -> int:
        return sum(1 << k for k, l in enumerate(self.letters) if l == "c")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "".join(self.letters)


def adding_machine(w: Word) -> Word:
    """Add one with carry, modulo 2^len(w)."""
    out = []
    carry = True
    for l in w.letters:
        if carry:
            out.append("v" if l == "c" else "c")
            carry = l == "c"
        else:
            out.append(l)
    return Word(tuple(out))


def _word_shift(w: Word, k: int) -> Word:
    return Word.from_int((w.value + k) % (1 << len(w)), len(w))


@dataclass(frozen=True)
class Piece:
    """The level-n piece of one word: composed chart, probe image, hull."""

    word: Word
    hull: Box3
    probes: np.ndarray = field(repr=False)
    tower: RenormSequence = field(repr=False)

    @property
    def level(self) -> int:
        return len(self.word)

    @property
    def diameter(self) -> float:
        return self.hull.diameter

    @property
    def center(self) -> np.ndarray:
        return np.array([ax.mid for ax in self.hull.axes])

    def __call__(self, x, y, z):
        return _apply_word(self.tower, self.word.letters, x, y, z)

    def derivative(self, x, y, z) -> np.ndarray:
        """Chain-rule derivative of the composed chart, shape (..., 3, 3)."""
        letters = self.word.letters
        x = np.asarray(x, dtype=float)
        shape = np.broadcast(x, np.asarray(y), np.asarray(z)).shape
        out = np.zeros(shape + (3, 3))
        out[...] = np.eye(3)
        for k in reversed(range(len(letters))):
            step = self.tower.steps[k]
            d = step.branch_derivative(x, y, z)
            x, y, z = step.branch(x, y, z)
            if letters[k] == "c":
                d = self.tower.maps[k].derivative(x, y, z) @ d
                x, y, z = self.tower.maps[k](x, y, z)
            out = d @ out
        return out


def _apply_word(tower: RenormSequence, letters, x, y, z):
    for k in reversed(range(len(letters))):
        x, y, z = tower.steps[k].branch(x, y, z)
        if letters[k] == "c":
            x, y, z = tower.maps[k](x, y, z)
    return x, y, z


def _hull_interval(vals: np.ndarray) -> Interval:
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if hi <= lo:
        # deep pieces collapse an axis to one float; keep a rounding-size width
        pad = max(1e-300, abs(lo) * 5e-16)
        return Interval(lo - pad, hi + pad)
    return Interval(lo, hi)


def _make_piece(tower: RenormSequence, word: Word) -> Piece:
    n = len(word)
    g = tower.maps[n].box.grid(PROBE_GRID, PROBE_GRID, PROBE_GRID)
    out = _apply_word(tower, word.letters, *g)
    probes = np.stack([np.ravel(c) for c in out])
    hull = Box3(*(_hull_interval(c) for c in probes))
    return Piece(word=word, hull=hull, probes=probes, tower=tower)


def build_pieces(tower: RenormSequence, n: int) -> list[Piece]:
    """All 2^n level-n pieces, ordered by word value."""
    if tower.depth < n:
        raise TowerTooShallow(f"need {n} levels, tower has {tower.depth}")
    return [_make_piece(tower, Word.from_int(v, n)) for v in range(1 << n)]


def tip(tower: RenormSequence, tol: float = 1e-3) -> np.ndarray:
    """Center of the deepest all-v piece; its diameter must be below tol."""
    piece = _make_piece(tower, Word.from_int(0, tower.depth))
    if piece.diameter >= tol:
        raise TowerTooShallow(
            f"depth {tower.depth} leaves tip diameter {piece.diameter:.3e} >= {tol:.3e}")
    return piece.center


@dataclass(frozen=True)
class CantorSample:
    """One orbit point located by its word, with the truncation error bar."""

    word: Word
    point: np.ndarray
    level: int
    diameter: float


def cantor_orbit(tower: RenormSequence, w0: Word, steps: int) -> list[CantorSample]:
    """Orbit samples of the invariant set, by piece lookup of w0 + k.

    Each sample is the center of the piece of the shifted word, so there is
    no iteration drift; the piece diameter bounds the truncation error.
    """
    n = len(w0)
    if tower.depth < n:
        raise TowerTooShallow(f"need {n} levels, tower has {tower.depth}")
    cache: dict[int, Piece] = {}
    out = []
    for k in range(steps):
        w = _word_shift(w0, k)
        piece = cache.get(w.value)
        if piece is None:
            piece = cache[w.value] = _make_piece(tower, w)
        out.append(CantorSample(word=w, point=piece.center, level=n,
                                diameter=piece.diameter))
    return out


# -- hierarchy checks ----------------------------------------------------------


def _axis_excess(inner: Interval, outer: Interval) -> float:
    return max(outer.lo - inner.lo, inner.hi - outer.hi)


def nesting_defect(children: list[Piece], parents: list[Piece]) -> float:
    """Max outward excursion of child hulls from their parent hulls (<= 0 is nested)."""
    by_value = {p.word.value: p for p in parents}
    worst = -np.inf
    for child in children:
        parent = by_value[Word(child.word.letters[:-1]).value]
        worst = max(worst, max(_axis_excess(ci, pi) for ci, pi
                               in zip(child.hull.axes, parent.hull.axes)))
    return float(worst)


def separation_gap(pieces: list[Piece]) -> float:
    """Min over pairs of the largest single-axis hull gap (> 0 means disjoint)."""
    best = np.inf
    for i, a in enumerate(pieces):
        for b in pieces[i + 1:]:
            gap = max(max(bx.lo - ax.hi, ax.lo - bx.hi)
                      for ax, bx in zip(a.hull.axes, b.hull.axes))
            best = min(best, gap)
    return float(best)


def permutation_defect(pieces: list[Piece]) -> float:
    """Max distance from the mapped probes of each piece to the successor hull.

    The map carries every level-n piece onto the piece of the shifted word
    (into it, for the word closing the cycle), so the defect stays far below
    the piece diameter.
    """
    tower = pieces[0].tower
    by_value = {p.word.value: p for p in pieces}
    m = tower.maps[0]
    worst = 0.0
    for piece in pieces:
        succ = by_value[_word_shift(piece.word, 1).value]
        img = m(*piece.probes)
        exc2 = np.zeros_like(img[0])
        for got, ax in zip(img, succ.hull.axes):
            exc2 += np.maximum(0.0, np.maximum(ax.lo - got, got - ax.hi)) ** 2
        worst = max(worst, float(np.max(np.sqrt(exc2))))
    return worst


def write_pieces_csv(pieces: list[Piece], path) -> None:
    """One row per piece: word, level, hull corners, diameter."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["word", "level", "x_lo", "x_hi", "y_lo", "y_hi",
                    "z_lo", "z_hi", "diameter"])
        for p in pieces:
            cells = [str(p.word) or "-", p.level]
            for ax in p.hull.axes:
                cells += [format(ax.lo, ".17g"), format(ax.hi, ".17g")]
            cells.append(format(p.diameter, ".17g"))
            w.writerow(cells)
