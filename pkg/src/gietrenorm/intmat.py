"""Exact integer matrices stored as tuples of tuples of Python ints."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Matrix = tuple[tuple[int, ...], ...]


def identity(d: int) -> Matrix:
    return tuple(tuple(int(i == j) for j in range(d)) for i in range(d))


def matmul(a, b) -> Matrix:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def matvec(a, v) -> tuple:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def transpose(a) -> Matrix:
    return tuple(zip(*a))


def norm1(a) -> int:
    """Sum of the absolute values of all entries."""
    return sum(abs(x) for row in a for x in row)


def is_positive(a) -> bool:
    return all(x > 0 for row in a for x in row)


def det(a) -> int:
    """Exact determinant by fraction-free elimination."""
    m = [list(r) for r in a]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k]:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[-1][-1]


def to_float(a) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in a])


def product(mats, d: int) -> Matrix:
    """``mats[-1] @ ... @ mats[0]`` (later matrices act last)."""
    out = identity(d)
    for m in mats:
        out = matmul(m, out)
    return out


@dataclass(frozen=True)
class CocycleMatrix:
    entries: Matrix
    span: tuple[int, int]

    @property
    def d(self) -> int:
        return len(self.entries)

    def norm(self) -> int:
        return norm1(self.entries)

    def det(self) -> int:
        return det(self.entries)

    def __matmul__(self, other: "CocycleMatrix") -> "CocycleMatrix":
        # self acts after other
        return CocycleMatrix(matmul(self.entries, other.entries), (other.span[0], self.span[1]))

    def to_list(self):
        return [list(r) for r in self.entries]
