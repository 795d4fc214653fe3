"""Sublevel sets of ``w(t1, t2) = v(t1) + v(t2)`` along lines, and line segments
contained in its zero set.

A line is ``t -> (t, a t + b)`` for ``t`` in ``[offset, offset + 1]``;
measures are taken in the parameter ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from ._numerics import sublevel_length
from .potential import FourierPotential, SegmentParams, classify_symmetry, segment_gradient


@dataclass(frozen=True)
class SegmentMeasureResult:
    segment: SegmentParams
    offset: float
    E: float
    delta: float
    measure: float
    resolution: int


def w_on_segment(v: FourierPotential, p: SegmentParams, t):
    t = np.asarray(t, dtype=float)
    return v(t) + v(p.a * t + p.b)


def sublevel_measure(v: FourierPotential, p: SegmentParams, E: float, delta: float,
                     resolution: int = 4096, offset: float = 0.0) -> SegmentMeasureResult:
    """Measure of ``{t : |v(t) + v(a t + b) - E| <= delta}`` on a unit interval.

    A grid of ``resolution`` cells is bisected near sign changes of
    ``delta - |w - E|`` until cells are settled by the Lipschitz bound.
    """
    if resolution < 4096:
        raise ValueError("resolution must be >= 4096")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    rng = 2.0 * v.sup_norm()
    if E - delta > rng or E + delta < -rng:
        m = 0.0
    else:
        lip = v.derivative_bound() * (1.0 + abs(p.a))
        m = sublevel_length(lambda t: delta - np.abs(w_on_segment(v, p, t) - E),
                            offset, offset + 1.0, lip, resolution)
    return SegmentMeasureResult(p, float(offset), float(E), float(delta), min(max(m, 0.0), 1.0), resolution)


def fit_alpha(v: FourierPotential, p: SegmentParams, E: float, deltas: Sequence[float],
              resolution: int = 4096) -> float:
    """Slope of ``log measure`` against ``log delta``; ``inf`` if every measure is 0."""
    d = np.asarray(sorted(deltas), dtype=float)
    if d.size < 2 or d[0] <= 0 or d[-1] / d[0] < 1e4 * (1 - 1e-9):
        raise ValueError("need positive deltas spanning at least four decades")
    m = np.array([sublevel_measure(v, p, E, x, resolution).measure for x in d])
    keep = m > 0
    if not keep.any():
        return math.inf
    if keep.sum() < 2:
        return math.inf
    slope, _ = np.polyfit(np.log(d[keep]), np.log(m[keep]), 1)
    return float(slope)


def monotonicity_intervals(v: FourierPotential, p: SegmentParams, n_grid: int = 8192) -> np.ndarray:
    """Critical points of ``w`` along the segment on ``[0, 1)``, by root isolation.

    The number of intervals of monotonicity equals the number of returned
    points (the segment is closed up periodically only when ``a`` is an integer).
    """
    g = lambda t: float(segment_gradient(v, p, t))
    ts = np.linspace(0.0, 1.0, n_grid + 1)
    ys = segment_gradient(v, p, ts)
    roots = []
    for i in np.nonzero(np.sign(ys[:-1]) * np.sign(ys[1:]) < 0)[0]:
        roots.append(brentq(g, ts[i], ts[i + 1], xtol=1e-14))
    roots.extend(ts[:-1][ys[:-1] == 0])
    return np.sort(np.asarray(roots))


# ------------------------------------------------------ segments in level sets


@dataclass(frozen=True)
class LevelSegment:
    params: SegmentParams  # theta2 = a theta1 + b
    residual: float  # sup over the segment of |w - E|
    source: str  # "type_I", "type_II" or "search"


def segment_residual(v: FourierPotential, p: SegmentParams, E: float, n: int = 4097) -> float:
    t = np.linspace(0.0, 1.0, n)
    return float(np.max(np.abs(w_on_segment(v, p, t) - E)))


def min_max_residual(v: FourierPotential, E: float, n_a: int = 41, n_b: int = 128,
                     n_theta: int = 512, n_polish: int = 4):
    """Minimize ``sup_t |v(t) + v(a t + b) - E|`` over lines with ``|a| <= 1``.

    A coarse ``(a, b)`` grid is followed by Nelder-Mead from the best cells.
    Returns ``(residual, SegmentParams)``.
    """
    t = np.linspace(0.0, 1.0, n_theta, endpoint=False)
    a = np.linspace(-1.0, 1.0, n_a)
    b = np.linspace(0.0, 1.0, n_b, endpoint=False)
    vt = v(t)
    A, B = np.meshgrid(a, b, indexing="ij")
    arg = A[..., None] * t + B[..., None]
    res = np.max(np.abs(vt + v(arg.ravel()).reshape(arg.shape) - E), axis=-1)
    tt = np.linspace(0.0, 1.0, 2 * n_theta + 1)

    def obj(x):
        aa = float(np.clip(x[0], -1.0, 1.0))
        return float(np.max(np.abs(v(tt) + v(aa * tt + x[1]) - E)))

    best_val, best_x = math.inf, (0.0, 0.0)
    for idx in np.argsort(res, axis=None)[:n_polish]:
        i, j = np.unravel_index(idx, res.shape)
        r = minimize(obj, x0=[a[i], b[j]], method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
        if r.fun < best_val:
            best_val, best_x = float(r.fun), (float(np.clip(r.x[0], -1, 1)), float(r.x[1] % 1.0))
    return best_val, SegmentParams(*best_x)


def find_level_segment(v: FourierPotential, E: float, tol: float = 1e-10) -> LevelSegment | None:
    """A line segment on which ``v(t1) + v(t2) = E``, if there is one.

    Symmetric potentials at ``E = 0`` give the predicted segments
    ``t2 = t1 + 1/2`` (second type, preferred) or ``t2 = 2 t_sym - t1``
    (first type).  Otherwise a min-max search over lines decides.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rep = classify_symmetry(v)
    if abs(E) <= tol:
        cands = []
        if rep.type_II:
            cands.append((SegmentParams(1.0, 0.5), "type_II"))
        if rep.type_I:
            cands.append((SegmentParams(-1.0, (2.0 * rep.theta_sym) % 1.0), "type_I"))
        for p, src in cands:
            r = segment_residual(v, p, E)
            if r <= tol:
                return LevelSegment(p, r, src)
    r, p = min_max_residual(v, E)
    if r <= tol:
        return LevelSegment(p, r, "search")
    return None


# ------------------------------------------------------------------ Harnack


def _poly(coeffs):
    return np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))


def harnack_sublevel(coeffs: Sequence[float], M: float, lam: float, resolution: int = 1 << 16):
    """Measure of ``{x in [-1, 1] : |f(x)| <= lam}`` for a real polynomial ``f``.

    ``coeffs`` are in increasing degree with ``f(0) = 1``.  Returns the
    measured length and the reference ``exp(2 log(lam) / log(M))``.
    """
    f = _poly(coeffs)
    if abs(f(0.0) - 1.0) > 1e-12:
        raise ValueError("f(0) must equal 1")
    if not (M > 1 and lam > 0):
        raise ValueError("need M > 1 and lam > 0")
    lip = float(np.sum(np.abs(f.deriv().coef))) if f.degree() > 0 else 0.0
    m = sublevel_length(lambda x: lam - np.abs(f(x)), -1.0, 1.0, max(lip, 1e-300), resolution)
    return m, math.exp(2.0 * math.log(lam) / math.log(M))


def harnack_disk_bound(coeffs: Sequence[float], radius: float = 2 * math.e, n: int = 4096) -> float:
    """``max |f|`` on the circle ``|z| = radius`` (the caller's ``M``)."""
    f = _poly(coeffs)
    z = radius * np.exp(2j * np.pi * np.arange(n) / n)
    return float(np.max(np.abs(f(z))))
