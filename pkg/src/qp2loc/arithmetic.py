"""Continued fractions, torus distances and lattice-orbit counting.

The orbit points are ``({k1 omega}, {k2 omega})`` for ``|k1|, |k2| <= N``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SQRT2M1 = math.sqrt(2.0) - 1.0
OMEGA_PRESETS = {"golden": GOLDEN, "sqrt2m1": SQRT2M1}
MAX_N = 10_000_000


def resolve_omega(omega) -> float:
    if isinstance(omega, str):
        try:
            return OMEGA_PRESETS[omega]
        except KeyError:
            raise ValueError(f"unknown frequency preset {omega!r}") from None
    return float(omega)


@dataclass(frozen=True)
class FrequencyData:
    omega: float
    partial_quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    finite: bool  # expansion terminated: omega is (numerically) p/q


_PERIODIC_QUOTIENTS = {"golden": 1, "sqrt2m1": 2}


def continued_fraction(omega, depth: int) -> FrequencyData:
    """Partial quotients ``[0; a1, a2, ...]`` and convergents of ``omega``.

    Presets expand exactly (their quotients are constant).  Floats are
    expanded as the binary rationals they are; the expansion stops early,
    flagged ``finite``, once a convergent rounds to ``omega`` itself.  Pass a
    :class:`fractions.Fraction` for exact rational input.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if isinstance(omega, str) and omega in _PERIODIC_QUOTIENTS:
        quotients = [_PERIODIC_QUOTIENTS[omega]] * depth
        return FrequencyData(resolve_omega(omega), tuple(quotients), _convergents(quotients), False)
    exact = isinstance(omega, Fraction)
    x = omega if exact else Fraction(resolve_omega(omega))
    if not 0 < x < 1:
        raise ValueError("omega must lie in (0, 1)")
    target = float(x)
    quotients = []
    r = x
    finite = False
    while len(quotients) < depth:
        r = 1 / r
        a = math.floor(r)
        r -= a
        quotients.append(int(a))
        p, q = _convergents(quotients)[-1]
        if r == 0 or (not exact and p / q == target):
            finite = True
            break
    return FrequencyData(target, tuple(quotients), _convergents(quotients), finite)


def _convergents(quotients) -> tuple[tuple[int, int], ...]:
    p_prev, q_prev, p, q = 1, 0, 0, 1  # p_{-1}/q_{-1} = 1/0, p_0/q_0 = 0/1
    out = []
    for a in quotients:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append((p, q))
    return tuple(out)


def _two_prod(a: np.ndarray, b: float):
    """Error-free product ``a * b = p + e`` (Veltkamp/Dekker splitting)."""
    split = 134217729.0  # 2**27 + 1
    p = a * b

    def halves(x):
        c = split * x
        hi = c - (c - x)
        return hi, x - hi

    ah, al = halves(a)
    bh, bl = halves(np.float64(b))
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def frac_part(k, omega: float) -> np.ndarray:
    """``{k omega}`` in [0, 1) with a compensated product for large ``k``."""
    k = np.asarray(k, dtype=np.float64)
    p, e = _two_prod(k, float(omega))
    f = (p - np.floor(p)) + e
    return np.mod(f, 1.0)


def torus_norm(k, omega) -> np.ndarray | float:
    """Distance from ``k omega`` to the nearest integer."""
    omega = resolve_omega(omega)
    k = np.asarray(k, dtype=np.float64)
    p, e = _two_prod(k, omega)
    d = (p - np.round(p)) + e
    out = np.abs(d - np.round(d))
    return float(out) if out.ndim == 0 else out


def signed_torus_distance(k, omega: float) -> np.ndarray:
    """``k omega - round(k omega)`` in [-1/2, 1/2]."""
    k = np.asarray(k, dtype=np.float64)
    p, e = _two_prod(k, omega)
    d = (p - np.round(p)) + e
    return d - np.round(d)


def _dio_products(omega: float, N: int, delta: float) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > MAX_N:
        raise ValueError(f"N capped at {MAX_N}")
    k = np.arange(1, N + 1, dtype=np.float64)
    return torus_norm(k, omega) * k ** (1.0 + delta)


def diophantine_check(omega, N: int, C_dio: float, delta_dio: float) -> tuple[bool, int]:
    """Whether ``||k omega|| >= C |k|^{-1-delta}`` for ``1 <= |k| <= N``.

    Returns ``(holds, k_worst)`` with ``k_worst`` minimizing ``||k omega|| k^{1+delta}``.
    """
    if C_dio <= 0 or delta_dio < 0:
        raise ValueError("need C_dio > 0 and delta_dio >= 0")
    prod = _dio_products(resolve_omega(omega), N, delta_dio)
    i = int(np.argmin(prod))
    return bool(prod[i] >= C_dio), i + 1


def best_dio_constant(omega, N: int, delta_dio: float) -> float:
    """Largest ``C`` for which :func:`diophantine_check` passes at scale ``N``."""
    return float(np.min(_dio_products(resolve_omega(omega), N, delta_dio)))


def is_best_approximation(omega, q: int) -> bool:
    """``||q omega|| < ||q' omega||`` for every ``1 <= q' < q``."""
    if q <= 1:
        return True
    d = torus_norm(np.arange(1, q + 1), omega)
    return bool(d[-1] < d[:-1].min())


# -------------------------------------------------------------- thin bands


@dataclass(frozen=True)
class ThinBand:
    """Subset of ``[0, 1]^2`` given by a vectorized membership predicate.

    Bands built by :meth:`between_graphs` also keep their boundary graphs,
    which enables the sorted-sweep count in :func:`lattice_points_in_band`.
    ``eta`` is the length of the longest segment inside the band, when known.
    """

    contains: Callable[[np.ndarray, np.ndarray], np.ndarray]
    eta: float | None = None
    lower: Callable[[np.ndarray], np.ndarray] | None = None
    upper: Callable[[np.ndarray], np.ndarray] | None = None
    interval: tuple[float, float] = (0.0, 1.0)
    label: str = field(default="band", compare=False)

    @classmethod
    def between_graphs(cls, lower, upper, interval=(0.0, 1.0), eta=None, label="graph band"):
        x0, x1 = interval

        def contains(t1, t2):
            t1 = np.asarray(t1, float)
            t2 = np.asarray(t2, float)
            return (t1 >= x0) & (t1 <= x1) & (lower(t1) <= t2) & (t2 <= upper(t1))

        return cls(contains, eta, lower, upper, (float(x0), float(x1)), label)

    @classmethod
    def full_square(cls):
        return cls.between_graphs(lambda x: np.zeros_like(x), lambda x: np.ones_like(x),
                                  eta=math.sqrt(2.0), label="full square")

    @classmethod
    def empty(cls):
        return cls(lambda t1, t2: np.zeros(np.broadcast(t1, t2).shape, bool), eta=0.0, label="empty")

    @classmethod
    def parabolic(cls, width: float, shift: float = 0.0, curvature: float = 1.0,
                  interval=(0.0, 1.0)):
        """``|theta2 - shift - curvature * theta1^2 / 2| <= width`` over ``interval``.

        A segment in the band has horizontal extent at most ``4 sqrt(width / curvature)``;
        ``eta`` accounts for the steepest slope on the interval.
        """
        x0, x1 = interval
        slope = curvature * max(abs(x0), abs(x1))
        eta = 4.0 * math.sqrt(width / curvature) * math.sqrt(1.0 + slope ** 2)
        return cls.between_graphs(lambda x: shift + 0.5 * curvature * x * x - width,
                                  lambda x: shift + 0.5 * curvature * x * x + width,
                                  interval, eta, label=f"parabolic w={width:g}")


def estimate_eta(band: ThinBand, n_probes: int = 2000, step: float = 1e-4, seed: int = 0) -> float:
    """Longest-segment length estimated by random chords (a lower estimate)."""
    rng = np.random.default_rng(seed)
    pts = rng.random((200_000, 2))
    inside = pts[band.contains(pts[:, 0], pts[:, 1])]
    if inside.size == 0:
        return 0.0
    best = 0.0
    n_steps = int(math.sqrt(2.0) / step) + 1
    s = np.arange(-n_steps, n_steps + 1) * step
    for _ in range(n_probes):
        p = inside[rng.integers(len(inside))]
        ang = rng.random() * np.pi
        xs = p[0] + s * math.cos(ang)
        ys = p[1] + s * math.sin(ang)
        ok = band.contains(xs, ys) & (xs >= 0) & (xs <= 1) & (ys >= 0) & (ys <= 1)
        mid = n_steps
        hi = mid
        while hi + 1 < ok.size and ok[hi + 1]:
            hi += 1
        lo = mid
        while lo - 1 >= 0 and ok[lo - 1]:
            lo -= 1
        best = max(best, (hi - lo) * step)
    return best


@dataclass(frozen=True)
class BandCount:
    points: np.ndarray  # (m, 2) integer pairs (k1, k2), sorted lexicographically
    N: int
    eta: float | None
    envelope: float  # C * N^{3/4 + 3 delta} with C = envelope_constant

    @property
    def count(self) -> int:
        return int(len(self.points))


def _orbit(N: int, omega: float):
    ks = np.arange(-N, N + 1, dtype=np.int64)
    return ks, frac_part(ks, omega)


def _sweep_rows(band: ThinBand, ks, xs, order, xs_sorted, rows):
    out = []
    for i in rows:
        x1 = xs[i]
        if not (band.interval[0] <= x1 <= band.interval[1]):
            continue
        lo = band.lower(np.array([x1]))[0]
        hi = band.upper(np.array([x1]))[0]
        a = np.searchsorted(xs_sorted, lo, side="left")
        b = np.searchsorted(xs_sorted, hi, side="right")
        if b > a:
            cols = np.sort(order[a:b])
            out.append(np.column_stack([np.full(cols.size, ks[i]), ks[cols]]))
    return out


def _grid_rows(band: ThinBand, ks, xs, rows):
    out = []
    for i in rows:
        hit = np.nonzero(band.contains(np.full(xs.size, xs[i]), xs))[0]
        if hit.size:
            out.append(np.column_stack([np.full(hit.size, ks[i]), ks[hit]]))
    return out


def lattice_points_in_band(band: ThinBand, omega, N: int, delta_dio: float = 0.01,
                           envelope_constant: float = 1.0, threads: int = 1) -> BandCount:
    """All ``(k1, k2)``, ``|k_i| <= N``, with ``({k1 omega}, {k2 omega})`` in the band.

    Graph bands are counted by a sorted sweep over ``{k2 omega}``; generic
    predicates fall back to a row-by-row scan.  Rows are split into chunks
    that may run on a thread pool; the merge order is fixed.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > MAX_N:
        raise ValueError(f"N capped at {MAX_N}")
    omega = resolve_omega(omega)
    ks, xs = _orbit(N, omega)
    chunks = np.array_split(np.arange(ks.size), max(1, threads) * 4)
    if band.lower is not None and band.upper is not None:
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        job = lambda rows: _sweep_rows(band, ks, xs, order, xs_sorted, rows)
    else:
        job = lambda rows: _grid_rows(band, ks, xs, rows)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    flat = [blk for part in parts for blk in part]
    pts = np.concatenate(flat) if flat else np.zeros((0, 2), dtype=np.int64)
    if pts.size:
        pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    env = envelope_constant * N ** (0.75 + 3 * delta_dio)
    return BandCount(pts, N, band.eta, env)


def fit_growth_exponent(Ns: Sequence[int], counts: Sequence[float]) -> float:
    """Least-squares slope of ``log count`` against ``log N`` (zero counts rejected)."""
    c = np.asarray(counts, float)
    if np.any(c <= 0):
        raise ValueError("counts must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(np.asarray(Ns, float)), np.log(c), 1)
    return float(slope)


# ------------------------------------------------- short lattice distances


@dataclass(frozen=True)
class ShortVectorCount:
    count: int
    N: int
    radius: float
    envelope_exponent: float  # 1/2 + 2 delta
    c1: float  # sqrt(count / N^{1/2 + 2 delta})
    diophantine: bool


def _component_shifts(omega: float, N: int, r: float) -> np.ndarray:
    """Realizable small differences ``{k omega} - {k' omega}`` with ``|k|, |k'| <= N``."""
    ks, xs = _orbit(N, omega)
    js = np.arange(-2 * N, 2 * N + 1)
    s = signed_torus_distance(js, omega)
    cand = np.nonzero(np.abs(s) <= r)[0]
    out = []
    for c in cand:
        j, sj = int(js[c]), float(s[c])
        if j == 0:
            out.append(0.0)
            continue
        # pairs k - k' = j with both in range; the difference equals sj iff no wrap
        k_lo, k_hi = max(-N, -N + j), min(N, N + j)
        if k_lo > k_hi:
            continue
        diff = xs[k_lo + N:k_hi + N + 1] - xs[k_lo - j + N:k_hi - j + N + 1]
        if np.any(np.abs(diff - sj) < 1e-9):
            out.append(sj)
    return np.asarray(out)


def short_distance_vectors(omega, N: int, delta_dio: float = 0.01, C_dio: float = 0.2) -> ShortVectorCount:
    """Count short difference vectors between N-lattice points.

    A difference ``p1 - p2`` has components ``j_i omega`` mod 1 with
    ``|j_i| <= 2N``; vectors are counted by their index pair ``(j1, j2) != 0``
    with ``|p1 - p2| <= 2 N^{-3/4}``.
    """
    if N < 16:
        raise ValueError("N must be >= 16")
    omega = resolve_omega(omega)
    r = 2.0 * N ** -0.75
    s = _component_shifts(omega, N, r)
    d2 = s[:, None] ** 2 + s[None, :] ** 2
    count = int(np.sum(d2 <= r * r)) - 1  # drop j1 = j2 = 0
    ok, _ = diophantine_check(omega, 2 * N, C_dio, delta_dio)
    expo = 0.5 + 2 * delta_dio
    return ShortVectorCount(count, N, r, expo, math.sqrt(count / N ** expo), ok)
