"""Eigenvectors of boxes, their decay, and resonance scans over lattice translates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .arithmetic import frac_part, resolve_omega
from .green import Resolvent, ResonantEnergyError, classify, green
from .interaction import InteractionPotential, Zero, value_set
from .operator import BoxHamiltonian, Region, assemble, make_region, outer_boundary_pairs, square
from .potential import FourierPotential, classify_symmetry

MAX_WINDOW_SITES = 40_000
MAX_WINDOW_COUNT = 2000
DENSE_SITES = 2500


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray  # columns, sign-fixed

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(zip(self.values, self.vectors.T))


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    s = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    s[s == 0] = 1.0
    return vecs * s


def _v0(n: int) -> np.ndarray:
    return np.random.default_rng(12345).standard_normal(n)


def eigensolve(H: BoxHamiltonian, window=None, max_sites: int = MAX_WINDOW_SITES,
               max_count: int = MAX_WINDOW_COUNT) -> Eigenpairs:
    """Sorted eigenpairs, all of them or those with eigenvalue in ``window``.

    Windowed solves on large boxes use shift-invert Lanczos around the
    window center, doubling the number of requested pairs until the window
    is exhausted.
    """
    n = H.size
    if window is None or n <= DENSE_SITES:
        vals, vecs = np.linalg.eigh(H.dense())
        if window is not None:
            lo, hi = window
            keep = (vals >= lo) & (vals <= hi)
            vals, vecs = vals[keep], vecs[:, keep]
            if len(vals) > max_count:
                raise WindowError(f"{len(vals)} eigenvalues in window; narrow the window")
        return Eigenpairs(vals, _fix_signs(vecs))
    if n > max_sites:
        raise WindowError(f"box has {n} sites, more than the cap {max_sites}")
    lo, hi = window
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    A = H.sparse()
    k = min(32, n - 2)
    while True:
        vals, vecs = spla.eigsh(A, k=k, sigma=center, which="LM", v0=_v0(n))
        inside = np.abs(vals - center) <= half
        if inside.sum() > max_count:
            raise WindowError(f"more than {max_count} eigenvalues in window; narrow the window")
        if np.max(np.abs(vals - center)) > half or k >= n - 2:
            break
        k = min(2 * k, n - 2)
    order = np.argsort(vals[inside])
    return Eigenpairs(vals[inside][order], _fix_signs(vecs[:, inside][:, order]))


def nearest_eigenpair(H: BoxHamiltonian, target: float):
    """Eigenpair with eigenvalue closest to ``target``."""
    if H.size <= DENSE_SITES:
        ep = eigensolve(H)
        i = int(np.argmin(np.abs(ep.values - target)))
        return float(ep.values[i]), ep.vectors[:, i]
    val, vec = spla.eigsh(H.sparse(), k=1, sigma=target, which="LM", v0=_v0(H.size))
    return float(val[0]), _fix_signs(vec)[:, 0]


# ------------------------------------------------------------------ decay


@dataclass(frozen=True)
class DecayProfile:
    eigenvalue: float
    center: tuple[int, int]
    rate: float  # inf for a state supported on one site
    r2: float
    ipr: float
    fit: bool  # rate is meaningful (r2 >= 0.8)


def ipr(psi) -> float:
    p = np.abs(np.asarray(psi)) ** 2
    return float(np.sum(p * p) / np.sum(p) ** 2)


def decay_profile(psi, region: Region, eigenvalue: float = math.nan, floor: float = 1e-14) -> DecayProfile:
    """Exponential decay rate of ``|psi|`` away from its maximum.

    The per-shell maximum of ``log|psi|`` (max-metric shells around the
    peak) is fitted linearly against the shell radius; entries below
    ``floor`` are ignored.
    """
    psi = np.asarray(psi, dtype=float)
    psi = psi / np.linalg.norm(psi)
    s = region.sites
    i0 = int(np.argmax(np.abs(psi)))
    c = s[i0]
    d = np.max(np.abs(s - c), axis=1)
    mags = np.abs(psi)
    keep = (mags >= floor) & (d > 0)
    q = ipr(psi)
    center = (int(c[0]), int(c[1]))
    if not keep.any():
        return DecayProfile(float(eigenvalue), center, math.inf, 1.0, q, True)
    dd, lg = d[keep], np.log(mags[keep])
    shells = np.unique(dd)
    env = np.array([lg[dd == r].max() for r in shells])
    xs = np.r_[0.0, shells.astype(float)]
    ys = np.r_[math.log(mags[i0]), env]
    if len(xs) < 3:
        slope = (ys[-1] - ys[0]) / (xs[-1] - xs[0])
        return DecayProfile(float(eigenvalue), center, float(max(-slope, 0.0)), 1.0, q, True)
    slope, icpt = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + icpt)
    tot = np.sum((ys - ys.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / tot) if tot > 0 else 0.0
    rate = float(-slope)
    return DecayProfile(float(eigenvalue), center, rate, r2, q, bool(r2 >= 0.8 and rate > 0))


def forbidden_halfwidth(lam: float, mu: float = 0.5) -> float:
    """Half-width ``lam / exp(log(lam)^mu)`` of the excluded window around each ``U_j``."""
    # the window only makes sense for lam > 1; below that nothing is excluded
    return lam / math.exp(math.log(lam) ** mu) if lam > 1 else 0.0


def allowed_energy(E, lam: float, u_values, mu: float = 0.5) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    w = forbidden_halfwidth(lam, mu)
    ok = np.abs(E) <= lam / 2
    for u in u_values:
        ok &= np.abs(E - u) >= w
    return ok


def mid_spectrum_states(H: BoxHamiltonian, n_states: int = 20, mu: float = 0.5) -> Eigenpairs:
    """Eigenpairs nearest to ``n_states`` targets spread over the allowed energies.

    Allowed: ``|E| <= lam / 2`` and ``|E - U_j| >= lam / exp(log(lam)^mu)``.
    """
    lam = H.lam
    uj = value_set(H.U)
    grid = np.linspace(-lam / 2, lam / 2, 20001)
    grid = grid[allowed_energy(grid, lam, uj, mu)]
    if grid.size == 0:
        return Eigenpairs(np.zeros(0), np.zeros((H.size, 0)))
    targets = grid[np.linspace(0, grid.size - 1, n_states).round().astype(int)]
    vals, vecs = [], []
    if H.size <= DENSE_SITES:
        ep = eigensolve(H)
        ok = allowed_energy(ep.values, lam, uj, mu)
        cand = np.nonzero(ok)[0]
        for t in targets:
            if cand.size == 0:
                break
            i = cand[np.argmin(np.abs(ep.values[cand] - t))]
            if i not in vals:
                vals.append(i)
        idx = np.sort(np.asarray(vals, dtype=int))
        return Eigenpairs(ep.values[idx], ep.vectors[:, idx])
    seen = set()
    A = H.sparse()
    for t in targets:
        ev, evec = spla.eigsh(A, k=8, sigma=float(t), which="LM", v0=_v0(H.size))
        evec = _fix_signs(evec)
        for i in np.argsort(np.abs(ev - t)):
            key = round(float(ev[i]), 10)
            if key in seen or not allowed_energy(ev[i], lam, uj, mu):
                continue
            seen.add(key)
            vals.append(float(ev[i]))
            vecs.append(evec[:, i])
            break
    order = np.argsort(vals)
    return Eigenpairs(np.asarray(vals)[order], np.asarray(vecs).T[:, order] if vecs else np.zeros((H.size, 0)))


# --------------------------------------------------------------- Poisson


def poisson_check(H: BoxHamiltonian, psi, E: float, Lam: Region, m) -> float:
    """Residual of ``psi(m) = -sum G_Lam(m, n) psi(n')`` over boundary pairs.

    ``psi`` is an eigenvector of ``H`` (on a strictly larger region) with
    eigenvalue ``E``; the minus sign comes from the ``+1`` hopping.
    """
    big = H.region
    if not big.contains(Lam.sites).all():
        raise ValueError("sub-region must lie inside the box")
    if not Lam.contains([m])[0]:
        raise ValueError("m must lie in the sub-region")
    pairs = outer_boundary_pairs(Lam)
    if not big.contains(pairs[:, 2:]).all():
        raise ValueError("outer neighbours of the sub-region must lie inside the box")
    if len(Lam) >= len(big):
        raise ValueError("sub-region must be strictly smaller than the box")
    G = green(H.restrict(Lam), E)
    im = Lam.index_of(m)
    rows = [Lam.index_of(p) for p in pairs[:, :2]]
    outer = [big.index_of(p) for p in pairs[:, 2:]]
    psi = np.asarray(psi, dtype=float)
    rhs = -np.sum(G[im, rows] * psi[outer])
    return float(abs(psi[big.index_of(m)] - rhs))


# ---------------------------------------------------------------- annulus


@dataclass(frozen=True)
class AnnulusResult:
    R: int | None
    candidates: tuple[int, int]
    width: float
    n_boxes: int  # distinct boxes classified


def _box_at(n, N, lam, omega, theta, v, U) -> BoxHamiltonian:
    return assemble(square(N, n), lam, omega, theta, v, U)


def annulus_scan(lam: float, omega, theta, v: FourierPotential, U: InteractionPotential | None,
                 E: float, N: int, r0: float, gamma: float, b: float, relax: float = 100.0,
                 max_boxes: int = 200_000) -> AnnulusResult:
    """Smallest ``R`` in ``[N^{r0/2}, N^{r0}]`` whose annulus holds only good N-boxes.

    The annulus is ``[-R - w, R + w]^2`` minus ``[-R + w, R - w]^2`` with
    ``w = N^{r0/4}``; a center ``n`` is good when ``n + [-N, N]^2`` passes
    both bounds, relaxed by ``relax``, for every translation of ``U``.
    """
    U = Zero() if U is None else U
    w = N ** (r0 / 4)
    lo, hi = math.ceil(N ** (r0 / 2)), math.floor(N ** r0)
    cache: dict = {}

    def good(n):
        if n not in cache:
            if len(cache) >= max_boxes:
                raise RuntimeError("annulus scan exceeds the box budget")
            H = _box_at(n, N, lam, omega, theta, v, U)
            try:
                cache[n] = classify(H, E, gamma, b, all_translations=True, relax=relax).good
            except ResonantEnergyError:
                cache[n] = False
        return cache[n]

    for R in range(lo, hi + 1):
        outer = math.floor(R + w)
        inner = R - w
        ok = True
        for i in range(-outer, outer + 1):
            for j in range(-outer, outer + 1):
                if max(abs(i), abs(j)) <= inner:
                    continue
                if not good((i, j)):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return AnnulusResult(R, (lo, hi), w, len(cache))
    return AnnulusResult(None, (lo, hi), w, len(cache))


# ---------------------------------------------------------- double resonance


@dataclass(frozen=True)
class ResonanceScan:
    omega: float
    lam: float
    N: int
    M: int
    K_range: tuple[float, float]
    energies: np.ndarray = field(repr=False)
    bad_pairs: tuple[tuple[int, int], ...]
    scanned: tuple[tuple[int, int], ...] = field(repr=False)
    records: tuple = field(repr=False, default=())  # (k1, k2, j or -1, M good at all E_j, N good)

    @property
    def bad_fraction(self) -> float:
        return len(self.bad_pairs) / len(self.scanned) if self.scanned else 0.0


def annulus_points(K_lo: float, K_hi: float):
    """``k`` with ``K_lo <= |k| <= K_hi`` in the max metric, row-major."""
    if K_lo > K_hi:
        return []
    r = math.floor(K_hi)
    return [(i, j) for i in range(-r, r + 1) for j in range(-r, r + 1)
            if K_lo <= max(abs(i), abs(j)) <= K_hi]


def double_resonance_scan(omega, lam: float, theta_ref, v: FourierPotential, U, N: int, M: int,
                          K_lo: float, K_hi: float, gamma: float, b: float,
                          relax: float = 100.0) -> ResonanceScan:
    """Pairs ``k`` for which both the M-box and the N-box at phase
    ``theta_ref + k omega`` are bad at a common eigenvalue of the reference M-box.

    The N-box is only solved when the M-box is bad for some ``E_j``; the
    scan of a given ``k`` stops at its first doubly bad energy.
    """
    if not M < N:
        raise ValueError("need M < N")
    U = Zero() if U is None else U
    omega = resolve_omega(omega)
    t1, t2 = float(theta_ref[0]), float(theta_ref[1])
    Es = []
    for t in ([(0, 0)] if isinstance(U, Zero) else _translations(U, square(M))):
        Es.append(np.linalg.eigvalsh(assemble(square(M), lam, omega, (t1, t2), v, U.translate(t)).dense()))
    energies = np.unique(np.concatenate(Es))
    ks = annulus_points(K_lo, K_hi)
    shifts = [(0, 0)] if isinstance(U, Zero) else None
    bad, recs = [], []
    for k in ks:
        ph = ((t1 + frac_part(k[0], omega)) % 1.0, (t2 + frac_part(k[1], omega)) % 1.0)
        m_good = _good_all(square(M), lam, omega, ph, v, U, shifts, energies, gamma, b, relax)
        hit = -1
        cand = np.nonzero(~m_good)[0]
        if cand.size:
            n_good = _good_all(square(N), lam, omega, ph, v, U, shifts, energies[cand], gamma, b,
                               relax, first_bad=True)
            if not n_good.all():
                hit = int(cand[np.argmin(n_good)])
        if hit >= 0:
            bad.append(k)
        recs.append((k[0], k[1], hit, bool(m_good.all()), hit < 0))
    return ResonanceScan(omega, float(lam), N, M, (float(K_lo), float(K_hi)), energies,
                         tuple(bad), tuple(ks), tuple(recs))


def _good_all(region, lam, omega, ph, v, U, shifts, energies, gamma, b, relax, first_bad=False):
    """Flags per energy, good only if good for every distinct translation of ``U``."""
    if shifts is None:
        shifts = _translations(U, region)
    out = np.ones(len(energies), bool)
    for t in shifts:
        R = Resolvent(assemble(region, lam, omega, ph, v, U.translate(t)))
        out &= R.good_mask(energies, gamma, b, relax, first_bad=first_bad)
        if first_bad and not out.all():
            break
    return out


def _translations(U, region):
    from .interaction import distinct_translations

    return distinct_translations(U, region.sites)


# ------------------------------------------------------------ zero mode


def zero_mode_check(v: FourierPotential, omega, theta1: float, window_radius: int,
                    lam: float = 1.0, theta2: float | None = None) -> float:
    """``max |H psi|`` over interior sites for ``psi(n, n) = (-1)^n``, 0 elsewhere.

    With ``v(t + 1/2) = -v(t)``, ``U = 0`` and ``theta2 = theta1 + 1/2``
    (the default) ``psi`` is an exact zero-energy solution.
    """
    if not classify_symmetry(v).type_II:
        raise ValueError("zero mode needs a potential with v(t + 1/2) = -v(t)")
    if window_radius < 1:
        raise ValueError("window_radius must be >= 1")
    t2 = theta1 + 0.5 if theta2 is None else theta2
    w = window_radius
    reg = make_region(((-w, w), (-w, w)))
    H = assemble(reg, lam, omega, (theta1, t2), v, Zero())
    s = reg.sites
    psi = np.where(s[:, 0] == s[:, 1], np.where(s[:, 0] % 2 == 0, 1.0, -1.0), 0.0)
    out = H.sparse() @ psi
    interior = np.max(np.abs(s), axis=1) <= w - 1
    return float(np.max(np.abs(out[interior])))
