"""Permutation pairs, labeled Rauzy moves, Rauzy diagrams and the
singularity data (sigma, kappa, genus) of the suspension.

Letters are the integers ``1..d``.  A pair ``(top, bottom)`` lists the
letters of the continuity intervals from left to right, before and
after applying the map.
"""
from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import ConfigError, InconsistentGenus


class Move(str, Enum):
    TOP = "top"
    BOTTOM = "bottom"

    @classmethod
    def parse(cls, value) -> "Move":
        if isinstance(value, Move):
            return value
        v = str(value).lower()
        if v in ("t", "top"):
            return cls.TOP
        if v in ("b", "bottom", "bot"):
            return cls.BOTTOM
        raise ConfigError(f"unknown move {value!r}")


@dataclass(frozen=True, order=True)
class PermutationPair:
    top: tuple[int, ...]
    bottom: tuple[int, ...]

    def __post_init__(self):
        top = tuple(int(a) for a in self.top)
        bottom = tuple(int(a) for a in self.bottom)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "bottom", bottom)
        d = len(top)
        if d < 2 or len(bottom) != d:
            raise ConfigError("top and bottom must have the same length d >= 2")
        letters = set(range(1, d + 1))
        if set(top) != letters or set(bottom) != letters:
            raise ConfigError(f"rows must be bijections onto 1..{d}: {top}, {bottom}")

    @property
    def d(self) -> int:
        return len(self.top)

    def top_position(self, letter: int) -> int:
        """0-based slot of ``letter`` in the top row."""
        return self.top.index(letter)

    def bottom_position(self, letter: int) -> int:
        return self.bottom.index(letter)

    def to_dict(self) -> dict:
        return {"top": list(self.top), "bottom": list(self.bottom)}

    @classmethod
    def from_dict(cls, data: dict) -> "PermutationPair":
        try:
            return cls(tuple(data["top"]), tuple(data["bottom"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad permutation pair: {data!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PermutationPair":
        return cls.from_dict(json.loads(text))

    def label(self) -> str:
        return " ".join(map(str, self.top)) + " / " + " ".join(map(str, self.bottom))

    def __str__(self) -> str:
        return self.label()


def rotation_pair(d: int = 2) -> PermutationPair:
    """Pair of rotation type: top ``1..d``, bottom ``d, 1, ..., d-1``."""
    top = tuple(range(1, d + 1))
    return PermutationPair(top, (d,) + top[:-1])


def symmetric_pair(d: int) -> PermutationPair:
    top = tuple(range(1, d + 1))
    return PermutationPair(top, top[::-1])


def is_irreducible(pi: PermutationPair) -> bool:
    seen_top: set[int] = set()
    seen_bottom: set[int] = set()
    for k in range(pi.d - 1):
        seen_top.add(pi.top[k])
        seen_bottom.add(pi.bottom[k])
        if seen_top == seen_bottom:
            return False
    return True


@dataclass(frozen=True)
class RauzyArrow:
    source: PermutationPair
    target: PermutationPair
    move: Move
    winner: int
    loser: int

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
            "move": self.move.value,
            "winner": self.winner,
            "loser": self.loser,
        }


def _reinsert(row: tuple[int, ...], after: int) -> tuple[int, ...]:
    # the last letter of ``row`` is moved right after the letter ``after``
    last = row[-1]
    rest = list(row[:-1])
    rest.insert(rest.index(after) + 1, last)
    return tuple(rest)


def rauzy_move(pi: PermutationPair, move) -> RauzyArrow:
    """Labeled Rauzy move.

    On a top move the top row is kept and the bottom loser is moved from
    the last slot to the slot right after the winner; the bottom move is
    symmetric.
    """
    return _rauzy_move(pi, Move.parse(move))


@lru_cache(maxsize=1 << 14)
def _rauzy_move(pi: PermutationPair, move: Move) -> RauzyArrow:
    alpha, beta = pi.top[-1], pi.bottom[-1]
    if move is Move.TOP:
        target = PermutationPair(pi.top, _reinsert(pi.bottom, alpha))
        return RauzyArrow(pi, target, move, alpha, beta)
    target = PermutationPair(_reinsert(pi.top, beta), pi.bottom)
    return RauzyArrow(pi, target, move, beta, alpha)


def elementary_matrix(arrow: RauzyArrow) -> list[list[int]]:
    """Zorich elementary matrix ``I + E_{loser, winner}`` (0-based rows)."""
    d = arrow.source.d
    m = [[int(i == j) for j in range(d)] for i in range(d)]
    m[arrow.loser - 1][arrow.winner - 1] += 1
    return m


@dataclass
class RotationPath:
    arrows: list[RauzyArrow] = field(default_factory=list)

    def __post_init__(self):
        for a, b in zip(self.arrows, self.arrows[1:]):
            if a.target != b.source:
                raise ConfigError("arrows do not compose")

    def append(self, arrow: RauzyArrow) -> None:
        if self.arrows and self.arrows[-1].target != arrow.source:
            raise ConfigError("arrow does not start where the path ends")
        self.arrows.append(arrow)

    @property
    def winners(self) -> list[int]:
        return [a.winner for a in self.arrows]

    @property
    def moves(self) -> list[Move]:
        return [a.move for a in self.arrows]

    def __len__(self) -> int:
        return len(self.arrows)

    def __getitem__(self, k):
        return self.arrows[k]

    @property
    def start(self) -> PermutationPair:
        return self.arrows[0].source

    @property
    def end(self) -> PermutationPair:
        return self.arrows[-1].target

    def is_closed(self) -> bool:
        return bool(self.arrows) and self.start == self.end

    def to_dict(self) -> dict:
        start = self.start.to_dict() if self.arrows else None
        return {"start": start, "moves": [m.value for m in self.moves]}

    @classmethod
    def from_moves(cls, pi: PermutationPair, moves: Iterable) -> "RotationPath":
        path = cls()
        for mv in moves:
            arrow = rauzy_move(pi, mv)
            path.append(arrow)
            pi = arrow.target
        return path


@dataclass(frozen=True)
class RauzyClass:
    members: tuple[PermutationPair, ...]
    arrows: tuple[RauzyArrow, ...]

    def to_dict(self) -> dict:
        index = {p: i for i, p in enumerate(self.members)}
        return {
            "nodes": [dict(id=i, **p.to_dict()) for i, p in enumerate(self.members)],
            "edges": [
                {
                    "source": index[a.source],
                    "target": index[a.target],
                    "move": a.move.value,
                    "winner": a.winner,
                    "loser": a.loser,
                }
                for a in self.arrows
            ],
        }

    def to_dot(self) -> str:
        index = {p: i for i, p in enumerate(self.members)}
        lines = ["digraph rauzy {"]
        for p, i in index.items():
            lines.append(f'  n{i} [label="{p.label()}"];')
        for a in self.arrows:
            lines.append(
                f'  n{index[a.source]} -> n{index[a.target]} '
                f'[label="{a.move.value[0]}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


def rauzy_class(pi: PermutationPair) -> RauzyClass:
    """Closure of ``pi`` under both moves, members sorted lexicographically."""
    if not is_irreducible(pi):
        raise ConfigError(f"{pi} is reducible")
    seen = {pi}
    queue = deque([pi])
    while queue:
        p = queue.popleft()
        for mv in Move:
            q = rauzy_move(p, mv).target
            if q not in seen:
                seen.add(q)
                queue.append(q)
    members = tuple(sorted(seen))
    arrows = tuple(rauzy_move(p, mv) for p in members for mv in (Move.TOP, Move.BOTTOM))
    return RauzyClass(members, arrows)


@dataclass(frozen=True)
class SingularityData:
    """Vertices are ``("U", i)`` and ``("V", i)``; ``U_0 = V_0`` and
    ``U_d = V_d`` are stored under their ``U`` name."""

    sigma: dict
    kappa: int
    genus: int
    cycles: tuple
    endpoint_singularity: tuple[int, ...]  # s(u_i) for i = 0..d, labels 0..kappa-1


def singularity_data(pi: PermutationPair) -> SingularityData:
    d = pi.d

    def vertex(kind: str, i: int):
        if i == 0 or i == d:
            return ("U", i)
        return (kind, i)

    sigma = {}
    for i in range(d):
        j = pi.bottom.index(pi.top[i])  # pi_b(j+1) = pi_t(i+1)
        sigma[vertex("U", i)] = vertex("V", j)
    for k in range(1, d + 1):
        ell = pi.top.index(pi.bottom[k - 1]) + 1  # pi_t(ell) = pi_b(k)
        sigma[vertex("V", k)] = vertex("U", ell)
    if len(sigma) != 2 * d or set(sigma.values()) != set(sigma):
        raise InconsistentGenus("sigma is not a bijection on its 2d vertices")
    cycles = []
    done = set()
    for v in sorted(sigma):
        if v in done:
            continue
        cyc = [v]
        done.add(v)
        w = sigma[v]
        while w != v:
            cyc.append(w)
            done.add(w)
            w = sigma[w]
        cycles.append(tuple(cyc))
    kappa = len(cycles)
    if (d - kappa + 1) % 2:
        raise InconsistentGenus(f"d - kappa + 1 = {d - kappa + 1} is odd")
    genus = (d - kappa + 1) // 2
    owner = {v: s for s, cyc in enumerate(cycles) for v in cyc}
    endpoint = tuple(owner[("U", i)] for i in range(d + 1))
    return SingularityData(sigma, kappa, genus, tuple(cycles), endpoint)


def is_infinity_complete(path: RotationPath | Sequence[RauzyArrow], horizon: int):
    """Winner counts over the first ``horizon`` arrows and whether every
    letter won at least once."""
    arrows = list(path.arrows if isinstance(path, RotationPath) else path)
    if len(arrows) < horizon:
        raise ConfigError("path shorter than horizon")
    d = arrows[0].source.d if arrows else 0
    counts = Counter(a.winner for a in arrows[:horizon])
    vec = tuple(counts.get(i, 0) for i in range(1, d + 1))
    return vec, all(c >= 1 for c in vec)
