"""Finite regions of Z^2 and the two-particle Hamiltonian restricted to them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .arithmetic import frac_part, resolve_omega
from .interaction import InteractionPotential, Zero, evaluate, max_abs
from .potential import FourierPotential

DENSE_MAX_SIGMA = 64


class RegionError(ValueError):
    pass


class InteractionBoundError(ValueError):
    pass


class Region:
    """Arbitrary finite set of lattice sites in canonical (row-major) order.

    Rows are indexed by ``n1`` and sites inside a row by increasing ``n2``.
    """

    def __init__(self, sites):
        arr = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
        if arr.size == 0:
            raise RegionError("empty region")
        arr = np.unique(arr, axis=0)  # lexicographic: n1 outer, n2 inner
        arr.setflags(write=False)
        self._sites = arr

    @property
    def sites(self) -> np.ndarray:
        return self._sites

    def __len__(self):
        return len(self._sites)

    def __eq__(self, other):
        return isinstance(other, Region) and np.array_equal(self._sites, other._sites)

    def __hash__(self):
        return hash(self._sites.tobytes())

    def __repr__(self):
        lo, hi = self.bounds
        return f"{type(self).__name__}({len(self)} sites in [{lo[0]},{hi[0]}]x[{lo[1]},{hi[1]}])"

    @property
    def bounds(self):
        return self._sites.min(axis=0), self._sites.max(axis=0)

    @property
    def sigma(self) -> int:
        """Diameter in the max metric."""
        lo, hi = self.bounds
        return int((hi - lo).max())

    @cached_property
    def index_grid(self) -> np.ndarray:
        """Bounding-box array holding each site's index, -1 where absent."""
        lo, hi = self.bounds
        grid = np.full(tuple(hi - lo + 1), -1, dtype=np.int64)
        rel = self._sites - lo
        grid[rel[:, 0], rel[:, 1]] = np.arange(len(self))
        return grid

    def index_of(self, n) -> int:
        lo, _ = self.bounds
        i, j = int(n[0]) - int(lo[0]), int(n[1]) - int(lo[1])
        g = self.index_grid
        if 0 <= i < g.shape[0] and 0 <= j < g.shape[1] and g[i, j] >= 0:
            return int(g[i, j])
        raise KeyError(f"site {tuple(n)} not in region")

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
        lo, _ = self.bounds
        rel = pts - lo
        g = self.index_grid
        ok = (rel >= 0).all(axis=1) & (rel[:, 0] < g.shape[0]) & (rel[:, 1] < g.shape[1])
        out = np.zeros(len(pts), bool)
        out[ok] = g[rel[ok, 0], rel[ok, 1]] >= 0
        return out

    def translated(self, t) -> "Region":
        return Region(self._sites + np.asarray(t, dtype=np.int64))

    def neighbor_pairs(self) -> np.ndarray:
        """Index pairs ``(i, j)``, ``i < j``, of nearest neighbours."""
        g = self.index_grid
        right = np.stack([g[:, :-1].ravel(), g[:, 1:].ravel()], axis=1)
        down = np.stack([g[:-1, :].ravel(), g[1:, :].ravel()], axis=1)
        pairs = np.concatenate([right, down])
        pairs = pairs[(pairs >= 0).all(axis=1)]
        return np.sort(pairs, axis=1)

    def is_elementary(self) -> bool:
        return as_elementary(self) is not None


class ElementaryRegion(Region):
    """Rectangle ``[a1, b1] x [a2, b2]``, optionally minus its translate by ``cut``."""

    def __init__(self, rect, cut=None):
        (a1, b1), (a2, b2) = rect
        if b1 < a1 or b2 < a2:
            raise RegionError("empty rectangle")
        if cut is not None and tuple(cut) == (0, 0):
            raise RegionError("cut vector must be nonzero")
        self.rect = ((a1, b1), (a2, b2))
        self.cut = cut
        n1, n2 = np.meshgrid(np.arange(a1, b1 + 1), np.arange(a2, b2 + 1), indexing="ij")
        pts = np.stack([n1.ravel(), n2.ravel()], axis=1)
        if cut is not None:
            t1, t2 = cut
            removed = ((pts[:, 0] - t1 >= a1) & (pts[:, 0] - t1 <= b1)
                       & (pts[:, 1] - t2 >= a2) & (pts[:, 1] - t2 <= b2))
            pts = pts[~removed]
        super().__init__(pts)


def make_region(rect, cut=None) -> ElementaryRegion:
    """``rect = ((a1, b1), (a2, b2))``, closed integer intervals."""
    (a1, b1), (a2, b2) = rect
    c = None if cut is None else (int(cut[0]), int(cut[1]))
    return ElementaryRegion(((int(a1), int(b1)), (int(a2), int(b2))), c)


def square(N: int, center=(0, 0)) -> ElementaryRegion:
    """``center + [-N, N]^2``."""
    c1, c2 = center
    return make_region(((c1 - N, c1 + N), (c2 - N, c2 + N)))


def as_elementary(region: Region) -> ElementaryRegion | None:
    """Recognize ``region`` as a rectangle minus a translate of itself."""
    lo, hi = region.bounds
    rect = ((int(lo[0]), int(hi[0])), (int(lo[1]), int(hi[1])))
    missing = np.argwhere(region.index_grid < 0)
    if missing.size == 0:
        return make_region(rect)
    mlo, mhi = missing.min(axis=0), missing.max(axis=0)
    if len(missing) != int(np.prod(mhi - mlo + 1)):
        return None  # removed part is not a rectangle
    span = hi - lo
    t = []
    for ax in range(2):
        if mlo[ax] > 0 and mhi[ax] == span[ax]:
            t.append(int(mlo[ax]))
        elif mlo[ax] == 0 and mhi[ax] < span[ax]:
            t.append(int(mhi[ax] - span[ax]))
        elif mlo[ax] == 0 and mhi[ax] == span[ax]:
            t.append(0)
        else:
            return None
    if t == [0, 0]:
        return None
    cand = make_region(rect, tuple(t))
    return cand if cand == region else None


def internal_boundary(W: Region, Lam: Region) -> np.ndarray:
    """Sites of ``W`` with a nearest neighbour in ``Lam`` but outside ``W``."""
    ws = W.sites
    if not Lam.contains(ws).all():
        raise RegionError("W must be a subset of Lambda")
    hit = np.zeros(len(ws), bool)
    for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = ws + d
        hit |= Lam.contains(nb) & ~W.contains(nb)
    return ws[hit]


def outer_boundary_pairs(Lam: Region, domain: Region | None = None) -> np.ndarray:
    """Pairs ``(n, n')`` with ``n`` in ``Lam``, ``n'`` outside, ``|n - n'| = 1``.

    Returned as an ``(m, 4)`` array of ``n1, n2, n1', n2'``; when ``domain``
    is given, ``n'`` is restricted to it.
    """
    out = []
    for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = Lam.sites + d
        ok = ~Lam.contains(nb)
        if domain is not None:
            ok &= domain.contains(nb)
        out.append(np.concatenate([Lam.sites[ok], nb[ok]], axis=1))
    pairs = np.concatenate(out)
    return pairs[np.lexsort(pairs.T[::-1])]


@dataclass(frozen=True)
class Piece:
    alpha: tuple[int, int]  # center of Q_alpha
    region: Region
    elementary: bool  # recognized shape with M0 <= diameter <= 2 M0


def partition(Lam0: Region, M0: int) -> list[Piece]:
    """Cover ``Lam0`` by ``Q_alpha cap Lam0`` with ``Q_alpha`` in ``[-M0, M0]^2 + 2 M0 Z^2``.

    Neighbouring cubes share a boundary row, so pieces may overlap.
    """
    if M0 < 1:
        raise ValueError("M0 must be >= 1")
    lo, hi = Lam0.bounds
    step = 2 * M0
    r1 = range(-((M0 - lo[0]) // step), (hi[0] + M0) // step + 1)
    r2 = range(-((M0 - lo[1]) // step), (hi[1] + M0) // step + 1)
    sites = Lam0.sites
    pieces = []
    for i in r1:
        for j in r2:
            c = np.array([i * step, j * step])
            inside = (np.abs(sites - c) <= M0).all(axis=1)
            if not inside.any():
                continue
            reg = Region(sites[inside])
            ok = as_elementary(reg) is not None and M0 <= reg.sigma <= 2 * M0
            pieces.append(Piece((int(c[0]), int(c[1])), reg, ok))
    return pieces


def region_from_dict(d: dict) -> ElementaryRegion:
    d = dict(d)
    rect = d.pop("rect")
    cut = d.pop("cut", None)
    if d:
        raise ValueError(f"unknown region keys: {sorted(d)}")
    return make_region(rect, cut)


# -------------------------------------------------------------- hamiltonian


@dataclass(frozen=True, eq=False)
class BoxHamiltonian:
    """``H_Lambda(theta) = Delta + lam (v(n1 w + t1) + v(n2 w + t2)) + U`` on a region.

    ``Delta`` is the plain nearest-neighbour adjacency (entries 1, no diagonal).
    """

    region: Region
    lam: float
    omega: float
    theta: tuple[float, float]
    v: FourierPotential
    U: InteractionPotential
    m_int: float
    diagonal: np.ndarray = field(repr=False)
    pairs: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.region)

    @property
    def u_values(self) -> np.ndarray:
        s = self.region.sites
        return np.asarray(evaluate(self.U, s[:, 0], s[:, 1]), dtype=float)

    def hopping(self) -> sp.csr_matrix:
        n = self.size
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        ones = np.ones(len(i))
        return sp.coo_matrix((np.r_[ones, ones], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()

    def sparse(self) -> sp.csr_matrix:
        return (self.hopping() + sp.diags(self.diagonal)).tocsr()

    def dense(self) -> np.ndarray:
        H = np.diag(self.diagonal.astype(float))
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        H[i, j] = 1.0
        H[j, i] = 1.0
        return H

    @property
    def prefers_dense(self) -> bool:
        return self.region.sigma <= DENSE_MAX_SIGMA

    def with_diagonal(self, diag) -> "BoxHamiltonian":
        """Same region and hopping, arbitrary diagonal (perturbation studies)."""
        d = np.asarray(diag, dtype=float)
        if d.shape != self.diagonal.shape:
            raise ValueError("diagonal has the wrong length")
        return BoxHamiltonian(self.region, self.lam, self.omega, self.theta, self.v,
                              self.U, self.m_int, d, self.pairs)

    def restrict(self, sub: Region) -> "BoxHamiltonian":
        """The same operator restricted to a subregion (phases unchanged)."""
        return assemble(sub, self.lam, self.omega, self.theta, self.v, self.U, self.m_int)


def phase_values(v: FourierPotential, n, omega: float, theta: float) -> np.ndarray:
    return v(np.mod(frac_part(n, omega) + theta, 1.0))


def assemble(region: Region, lam: float, omega, theta, v: FourierPotential,
             U: InteractionPotential | None = None, m_int: float = 10.0) -> BoxHamiltonian:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    U = Zero() if U is None else U
    if max_abs(U) > m_int * lam:
        raise InteractionBoundError(
            f"interaction bound violated: max|U| = {max_abs(U):g} > m_int * lambda = {m_int * lam:g}")
    omega = resolve_omega(omega)
    t1, t2 = float(theta[0]), float(theta[1])
    s = region.sites
    diag = lam * (phase_values(v, s[:, 0], omega, t1) + phase_values(v, s[:, 1], omega, t2))
    diag = diag + np.asarray(evaluate(U, s[:, 0], s[:, 1]), dtype=float)
    diag.setflags(write=False)
    return BoxHamiltonian(region, float(lam), omega, (t1, t2), v, U, float(m_int), diag,
                          region.neighbor_pairs())
