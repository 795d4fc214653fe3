"""Low-complexity background potentials U on Z^2."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np


def _as_int_pair(t) -> tuple[int, int]:
    t1, t2 = t
    return int(t1), int(t2)


@dataclass(frozen=True)
class InteractionPotential:
    """Base class; ``translation`` shifts the pattern: ``(T_t U)(n) = U(n - t)``."""

    translation: tuple[int, int] = (0, 0)

    def _raw(self, n1: np.ndarray, n2: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, n1, n2):
        return evaluate(self, n1, n2)

    def translate(self, t) -> "InteractionPotential":
        t1, t2 = _as_int_pair(t)
        s1, s2 = self.translation
        return replace(self, translation=(s1 + t1, s2 + t2))

    def values(self) -> list[float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(InteractionPotential):
    def _raw(self, n1, n2):
        return np.zeros(np.broadcast(n1, n2).shape)

    def values(self):
        return [0.0]

    def to_dict(self):
        return {"type": "zero", "translation": list(self.translation)}


@dataclass(frozen=True)
class FiniteRange(InteractionPotential):
    """``U(n1, n2) = f(n1 - n2)`` with ``f`` supported on finitely many offsets."""

    kernel: tuple[tuple[int, float], ...] = ()

    @classmethod
    def from_kernel(cls, kernel: dict, translation=(0, 0)) -> "FiniteRange":
        items = tuple(sorted((int(d), float(u)) for d, u in kernel.items()))
        return cls(translation=_as_int_pair(translation), kernel=items)

    @property
    def radius(self) -> int:
        return max((abs(d) for d, _ in self.kernel), default=0)

    def _raw(self, n1, n2):
        d = np.asarray(n1) - np.asarray(n2)
        out = np.zeros(np.shape(d))
        for off, u in self.kernel:
            out = np.where(d == off, u, out)
        return out

    def values(self):
        return sorted({0.0} | {u for _, u in self.kernel})

    def to_dict(self):
        return {"type": "finite_range", "kernel": {str(d): u for d, u in self.kernel},
                "translation": list(self.translation)}


def hubbard(u: float) -> FiniteRange:
    """On-site interaction ``u * delta_{n1, n2}``."""
    return FiniteRange.from_kernel({0: u})


@dataclass(frozen=True)
class Periodic(InteractionPotential):
    table: tuple[tuple[float, ...], ...] = ((0.0,),)

    @classmethod
    def from_table(cls, table, translation=(0, 0)) -> "Periodic":
        arr = np.asarray(table, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("periodic table must be a nonempty 2D array")
        return cls(translation=_as_int_pair(translation), table=tuple(map(tuple, arr.tolist())))

    @property
    def period(self) -> tuple[int, int]:
        return len(self.table), len(self.table[0])

    def _raw(self, n1, n2):
        arr = np.asarray(self.table)
        p1, p2 = arr.shape
        return arr[np.mod(n1, p1), np.mod(n2, p2)]

    def values(self):
        return sorted(set(np.asarray(self.table).ravel().tolist()))

    def to_dict(self):
        return {"type": "periodic", "table": [list(r) for r in self.table],
                "translation": list(self.translation)}


def fibonacci_letters(k) -> np.ndarray:
    """Sturmian word ``floor((k+1) phi) - floor(k phi) - 1`` in {0, 1}, phi golden.

    Integer arithmetic only: ``floor(k phi) = (k + floor(k sqrt 5)) // 2``.
    """
    k = np.atleast_1d(np.asarray(k, dtype=object))
    return np.array([_floor_phi(int(j) + 1) - _floor_phi(int(j)) - 1 for j in k], dtype=np.int64)


def _floor_phi(k: int) -> int:
    if k >= 0:
        r = math.isqrt(5 * k * k)
    else:
        r = -math.isqrt(5 * k * k) - 1
    return (k + r) // 2


@dataclass(frozen=True)
class Fibonacci(InteractionPotential):
    """Two-valued potential along the diagonal coordinate ``d = n1 - n2``."""

    values_ab: tuple[float, float] = (0.0, 1.0)

    def _raw(self, n1, n2):
        d = np.asarray(n1) - np.asarray(n2)
        shape = np.shape(d)
        flat = np.ravel(d)
        lo, hi = (int(flat.min()), int(flat.max())) if flat.size else (0, -1)
        letters = fibonacci_letters(np.arange(lo, hi + 1))
        vals = np.asarray(self.values_ab)[letters]
        return vals[flat - lo].reshape(shape) if flat.size else np.zeros(shape)

    def values(self):
        return sorted(set(self.values_ab))

    def to_dict(self):
        return {"type": "fibonacci", "values": list(self.values_ab),
                "translation": list(self.translation)}


def evaluate(U: InteractionPotential, n1, n2):
    """Value of the (translated) potential at ``(n1, n2)``; scalars or arrays."""
    t1, t2 = U.translation
    out = U._raw(np.asarray(n1) - t1, np.asarray(n2) - t2)
    return float(out) if np.ndim(out) == 0 else out


def translate(U: InteractionPotential, t) -> InteractionPotential:
    return U.translate(t)


def value_set(U: InteractionPotential) -> list[float]:
    """Sorted distinct values taken by ``U``."""
    return U.values()


def max_abs(U: InteractionPotential) -> float:
    return max(abs(x) for x in U.values())


# ---------------------------------------------------------------- complexity


class ComplexityCount(NamedTuple):
    count: int
    exact: bool  # False: enumeration over a finite translation window only


def _pattern_key(block: np.ndarray) -> bytes:
    # +0.0 canonicalizes negative zero; patterns compare bit-exactly
    return (np.ascontiguousarray(block, dtype=np.float64) + 0.0).tobytes()


def _window(U: InteractionPotential, a1: int, a2: int, N: int) -> np.ndarray:
    i = np.arange(N)
    return np.asarray(evaluate(U, (a1 + i)[:, None], (a2 + i)[None, :]), dtype=float)


def fundamental_translations(U: InteractionPotential, N: int, window: int | None = None):
    """Window corners ``(a1, a2)`` whose N x N restrictions exhaust all patterns.

    Returns ``(corners, exact)``.  The restriction of ``T_n U`` to ``[0, N-1]^2``
    is ``U`` read on ``[-n1, -n1 + N - 1] x [-n2, -n2 + N - 1]``.
    """
    if isinstance(U, Zero):
        return [(0, 0)], True
    if isinstance(U, FiniteRange):
        # pattern depends only on a1 - a2; beyond |a1 - a2| > N - 1 + r it is zero
        span = N + U.radius
        return [(s, 0) for s in range(-span, span + 1)], True
    if isinstance(U, Periodic):
        p1, p2 = U.period
        return [(i, j) for i in range(p1) for j in range(p2)], True
    if isinstance(U, Fibonacci):
        w = window if window is not None else 20 * N + 50
        return [(s, 0) for s in range(-w, w + 1)], False
    raise TypeError(f"unsupported interaction {type(U).__name__}")


def complexity_count(U: InteractionPotential, N: int, window: int | None = None) -> ComplexityCount:
    """Number of distinct restrictions of translates of ``U`` to an N x N box."""
    if N < 2:
        raise ValueError("window size N must be >= 2")
    corners, exact = fundamental_translations(U, N, window)
    seen = {_pattern_key(_window(U, a1, a2, N)) for a1, a2 in corners}
    return ComplexityCount(len(seen), exact)


def fit_complexity_exponent(U: InteractionPotential, Ns: Sequence[int], window: int | None = None) -> float:
    """Least-squares slope of ``log count`` against ``log N``."""
    Ns = list(Ns)
    if len(Ns) < 3:
        raise ValueError("need at least three window sizes")
    counts = [complexity_count(U, N, window).count for N in Ns]
    slope, _ = np.polyfit(np.log(Ns), np.log(counts), 1)
    return float(slope)


def distinct_translations(U: InteractionPotential, sites: np.ndarray) -> list[tuple[int, int]]:
    """Translations of ``U`` giving pairwise distinct restrictions to ``sites``.

    ``sites`` is an ``(n, 2)`` integer array.  Used to test a box "for all
    translations of U".
    """
    sites = np.asarray(sites)
    lo = sites.min(axis=0)
    ext = int((sites.max(axis=0) - lo).max()) + 1
    corners, _ = fundamental_translations(U, max(ext, 2))
    out, seen = [], set()
    for a1, a2 in corners:
        # translation t with (T_t U)(lo) = U(a): t = lo - a
        t = (int(lo[0] - a1), int(lo[1] - a2))
        Ut = U.translate(t)
        key = _pattern_key(evaluate(Ut, sites[:, 0], sites[:, 1]))
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


def from_dict(d: dict) -> InteractionPotential:
    """Parse the JSON description, e.g. ``{"type": "hubbard", "u": 1.0}``."""
    d = dict(d)
    kind = d.pop("type", "zero")
    t = _as_int_pair(d.pop("translation", (0, 0)))
    if kind == "zero":
        U: InteractionPotential = Zero(translation=t)
    elif kind == "hubbard":
        U = FiniteRange.from_kernel({0: float(d.pop("u"))}, t)
    elif kind == "finite_range":
        U = FiniteRange.from_kernel(d.pop("kernel"), t)
    elif kind == "periodic":
        U = Periodic.from_table(d.pop("table"), t)
    elif kind == "fibonacci":
        a, b = d.pop("values")
        U = Fibonacci(translation=t, values_ab=(float(a), float(b)))
    else:
        raise ValueError(f"unknown interaction type {kind!r}")
    if d:
        raise ValueError(f"unknown interaction keys: {sorted(d)}")
    return U
