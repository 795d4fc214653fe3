"""Green's functions of box Hamiltonians and good/bad classification.

A box is *good* at energy E when ``||G|| < exp(sigma^b) / lam`` and
``|G(n, m)| < exp(-gamma |n - m|)`` for every pair at max-metric distance
``|n - m| >= sigma / 4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.stats import binomtest

from .arithmetic import resolve_omega
from .interaction import InteractionPotential, Zero, distinct_translations, value_set
from .operator import BoxHamiltonian, Region, assemble, internal_boundary, phase_values

COND_CAP = 1e14


class ResonantEnergyError(ArithmeticError):
    """E is (numerically) an eigenvalue of the box."""

    def __init__(self, E, nearest, cond):
        super().__init__(f"resonant energy: E={E!r} is within {abs(E - nearest):.3g} of "
                         f"eigenvalue {nearest!r} (condition {cond:.3g})")
        self.E = E
        self.nearest_eigenvalue = nearest
        self.condition = cond


class PreconditionError(ValueError):
    """A hypothesis of a bound does not hold; ``reason`` names which one."""

    def __init__(self, reason, message):
        super().__init__(message)
        self.reason = reason


class HypothesisError(PreconditionError):
    def __init__(self, reason, message, site=None):
        super().__init__(reason, message)
        self.site = site


# ------------------------------------------------------------------ solves


def _condition(evals: np.ndarray, E: float):
    gaps = np.abs(evals - E)
    i = int(np.argmin(gaps))
    lo = gaps[i]
    cond = math.inf if lo == 0 else float(gaps.max() / lo)
    return cond, float(evals[i])


def _check(evals, E):
    cond, nearest = _condition(evals, E)
    if cond > COND_CAP:
        raise ResonantEnergyError(E, nearest, cond)
    return cond


@dataclass(frozen=True)
class GreenSolve:
    G: np.ndarray = field(repr=False)
    E: float
    condition: float
    residual: float  # max row sum of |(H - E) G - I|
    nearest_eigenvalue: float


def green_solve(H: BoxHamiltonian, E: float) -> GreenSolve:
    """``(H - E)^{-1}`` by a symmetric factorization, with diagnostics."""
    A = H.dense()
    evals = sla.eigvalsh(A)
    cond = _check(evals, E)
    A[np.diag_indices_from(A)] -= E
    n = len(A)
    G = sla.solve(A, np.eye(n), assume_a="sym", check_finite=False)
    G = 0.5 * (G + G.T)
    res = float(np.abs(A @ G - np.eye(n)).sum(axis=1).max())
    return GreenSolve(G, float(E), cond, res, _condition(evals, E)[1])


def green(H: BoxHamiltonian, E: float) -> np.ndarray:
    return green_solve(H, E).G


class Resolvent:
    """Eigendecomposition of a box, reused for many energies."""

    def __init__(self, H: BoxHamiltonian):
        self.H = H
        self.evals, self.evecs = np.linalg.eigh(H.dense())

    def __call__(self, E: float) -> np.ndarray:
        _check(self.evals, E)
        Q = self.evecs
        G = (Q / (self.evals - E)) @ Q.T
        return 0.5 * (G + G.T)

    def norm(self, E: float) -> float:
        return float(1.0 / np.min(np.abs(self.evals - E)))

    def good_mask(self, energies, gamma: float, b: float, relax: float = 1.0,
                  first_bad: bool = False, chunk: int = 16) -> np.ndarray:
        """Good/bad flag for each energy, vectorized over energies.

        Norms come from the eigenvalues; decay pairs (upper triangle with
        distance ``>= sigma/4``) from one product per chunk.  Resonant
        energies are bad.  With ``first_bad`` evaluation stops after the
        first bad energy; later entries are then left True.
        """
        Es = np.atleast_1d(np.asarray(energies, dtype=float))
        region = self.H.region
        sigma = region.sigma
        dist = pair_distances(region)
        mask = dist >= _decay_cut(sigma)
        iu, ju = np.nonzero(np.triu(mask))
        norm_bound = relax * math.exp(sigma ** b) / self.H.lam
        out = np.ones(len(Es), bool)
        gaps = self.evals[:, None] - Es[None, :]
        amin = np.min(np.abs(gaps), axis=0)
        with np.errstate(divide="ignore"):
            ok_norm = (np.max(np.abs(gaps), axis=0) / amin <= COND_CAP) & (1.0 / amin < norm_bound)
        if len(iu) * len(self.evals) > 4_000_000:
            # big box: one dense G per energy beats the pair-by-mode product
            thr_full = relax * np.exp(-gamma * dist)
            Q = self.evecs
            for i, E in enumerate(Es):
                ok = bool(ok_norm[i])
                if ok:
                    G = (Q / (self.evals - E)) @ Q.T
                    ok = bool(np.all(np.abs(G[mask]) < thr_full[mask]))
                out[i] = ok
                if first_bad and not ok:
                    break
            return out
        thr = relax * np.exp(-gamma * dist[iu, ju])
        P = self.evecs[iu] * self.evecs[ju]  # pairs x modes
        for s in range(0, len(Es), chunk):
            ok = ok_norm[s:s + chunk].copy()
            if len(iu):
                vals = np.abs(P @ (1.0 / gaps[:, s:s + chunk]))
                ok &= np.all(vals < thr[:, None], axis=0)
            out[s:s + chunk] = ok
            if first_bad and not ok.all():
                break
        return out


# ---------------------------------------------------------- classification


@lru_cache(maxsize=128)
def _distances(region: Region) -> np.ndarray:
    s = region.sites
    return np.maximum(np.abs(s[:, None, 0] - s[None, :, 0]), np.abs(s[:, None, 1] - s[None, :, 1]))


def pair_distances(region: Region, metric: str = "max") -> np.ndarray:
    if metric == "max":
        return _distances(region)
    s = region.sites
    if metric == "l1":
        return np.abs(s[:, None, 0] - s[None, :, 0]) + np.abs(s[:, None, 1] - s[None, :, 1])
    if metric == "euclid":
        return np.hypot(s[:, None, 0] - s[None, :, 0], s[:, None, 1] - s[None, :, 1])
    raise ValueError(f"unknown metric {metric!r}")


def decay_fit(values: np.ndarray, dist: np.ndarray, dmin: float) -> float:
    """Decay rate from the per-distance maxima of ``log|values|``.

    For each distance ``d >= dmin`` the largest entry is kept, and the
    negated slope of a line through ``(d, log max)`` is returned; nan when
    fewer than two distances are available.
    """
    mags = np.abs(values)
    mask = (dist >= dmin) & (mags > 0)
    if not mask.any():
        return math.nan
    d = dist[mask]
    logs = np.log(mags[mask])
    shells = np.unique(d)
    if len(shells) < 2:
        return math.nan
    env = np.array([logs[d == s].max() for s in shells])
    slope = np.polyfit(shells.astype(float), env, 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class GreenReport:
    E: float
    norm: float  # spectral norm; the good/bad flag uses this one
    hs_norm: float
    gamma_fit: float
    good_norm: bool
    good_decay: bool
    gamma: float
    b: float
    sigma: int
    n_translations: int = 1

    @property
    def good(self) -> bool:
        return self.good_norm and self.good_decay


def _decay_cut(sigma: int) -> float:
    # pairs at distance >= sigma/4; the diagonal never counts as a decay pair
    return max(sigma / 4.0, 1.0)


def _report(G, region, lam, E, gamma, b, relax, metric="max") -> GreenReport:
    sigma = region.sigma
    norm = float(np.linalg.norm(G, 2)) if len(G) > 1 else float(abs(G[0, 0]))
    dist = pair_distances(region, metric)
    cut = _decay_cut(sigma)
    mask = dist >= cut
    good_norm = norm < relax * math.exp(sigma ** b) / lam
    good_decay = bool(np.all(np.abs(G[mask]) < relax * np.exp(-gamma * dist[mask])))
    return GreenReport(float(E), norm, float(np.linalg.norm(G)), decay_fit(G, dist, cut),
                       bool(good_norm), good_decay, float(gamma), float(b), sigma)


def classify(H: BoxHamiltonian, E: float, gamma: float, b: float, all_translations: bool = False,
             relax: float = 1.0, metric: str = "max", resolvent: Resolvent | None = None) -> GreenReport:
    """Good/bad flags for the box at energy ``E``.

    ``relax`` multiplies both right-hand sides.  With ``all_translations``
    the box must be good for every translate of ``U`` that changes ``H``
    (the report then holds the worst norm and decay rate).
    """
    if not all_translations or isinstance(H.U, Zero):
        G = resolvent(E) if resolvent is not None else green(H, E)
        return _report(G, H.region, H.lam, E, gamma, b, relax, metric)
    reports = []
    for t in distinct_translations(H.U, H.region.sites):
        Ht = assemble(H.region, H.lam, H.omega, H.theta, H.v, H.U.translate(t), H.m_int)
        reports.append(_report(green(Ht, E), H.region, H.lam, E, gamma, b, relax, metric))
    worst = max(reports, key=lambda r: r.norm)
    return GreenReport(float(E), worst.norm, max(r.hs_norm for r in reports),
                       min(r.gamma_fit for r in reports), all(r.good_norm for r in reports),
                       all(r.good_decay for r in reports), float(gamma), float(b),
                       H.region.sigma, len(reports))


# ------------------------------------------------------------- level sets


def level_margins(theta, region: Region, omega, v, U: InteractionPotential, E: float,
                  lam: float) -> np.ndarray:
    """``|v(t1 + n1 w) + v(t2 + n2 w) - (E - U_j) / lam|`` per site and value ``U_j``."""
    omega = resolve_omega(omega)
    s = region.sites
    w = phase_values(v, s[:, 0], omega, theta[0]) + phase_values(v, s[:, 1], omega, theta[1])
    uj = np.asarray(value_set(U), dtype=float)
    return np.abs(w[:, None] - (E - uj[None, :]) / lam)


def vlevel_check(theta, region: Region, omega, v, U: InteractionPotential, E: float,
                 lam: float, delta: float) -> bool:
    if not delta > 0:
        raise ValueError("delta must be positive")
    return bool(level_margins(theta, region, omega, v, U, E, lam).min() > delta)


@dataclass(frozen=True)
class NeumannCheck:
    ratio: float  # 16 / (lam delta)
    entry_violation: float  # max over pairs of |G| - bound; <= 0 when the bound holds
    entry_log_margin: float  # min over pairs of log(bound) - log|G|
    norm_bound: float
    norm: float

    @property
    def norm_violation(self) -> float:
        return self.norm - self.norm_bound

    @property
    def holds(self) -> bool:
        return self.entry_violation <= 0 and self.norm_violation <= 0


def neumann_verify(H: BoxHamiltonian, E: float, delta: float, metric: str = "max") -> NeumannCheck:
    """Compare G against the Neumann-series bounds valid away from the level set.

    Entries: ``|G(n, m)| <= r^{|n - m| + 1} / (1 - r)`` with ``r = 16 / (lam delta)``;
    norm: ``||G|| <= 8 / (lam delta)``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = 16.0 / (H.lam * delta)
    if r >= 1:
        raise PreconditionError("neumann_ratio", f"Neumann ratio 16/(lambda*delta) = {r:g} >= 1")
    if not vlevel_check(H.theta, H.region, H.omega, H.v, H.U, E, H.lam, delta):
        raise PreconditionError("level_set_hit", "some site lies within delta of the level set")
    G = green(H, E)
    dist = pair_distances(H.region, metric)
    bound = r ** (dist + 1.0) / (1.0 - r)
    absG = np.abs(G)
    viol = float(np.max(absG - bound))
    with np.errstate(divide="ignore"):
        margin = float(np.min(np.log(bound) - np.log(absG)))
    norm = float(np.linalg.norm(G, 2))
    return NeumannCheck(r, viol, margin, 8.0 / (H.lam * delta), norm)


@dataclass(frozen=True)
class PerturbCheck:
    holds: bool  # H2 satisfies the doubled bounds
    slack1: float  # log-margin of H1 against the undoubled bounds
    slack2: float  # log-margin of H2 against the undoubled bounds
    perturbation: float  # ||V1 - V2||_inf
    threshold: float  # exp(-3 gamma_1 N)


def _log_slack(G, region, lam, gamma, b) -> float:
    sigma = region.sigma
    dist = pair_distances(region)
    mask = dist >= _decay_cut(sigma)
    norm = float(np.linalg.norm(G, 2))
    s = sigma ** b - math.log(lam) - math.log(norm)
    if mask.any():
        with np.errstate(divide="ignore"):
            s = min(s, float(np.min(-gamma * dist[mask] - np.log(np.abs(G[mask])))))
    return s


def perturb_verify(H1: BoxHamiltonian, H2: BoxHamiltonian, E: float, gamma: float, b: float) -> PerturbCheck:
    """Stability of a good box under an exponentially small change of potential.

    Hypotheses (each raises :class:`PreconditionError` with its own reason):
    ``H1 - E`` good, ``||V1 - V2|| <= exp(-3 gamma_1 N)`` with
    ``gamma_1 = max(gamma, 1)``, and ``N^b <= gamma_1 N / 10`` with ``N = sigma``.
    """
    if H1.region != H2.region or H1.lam != H2.lam:
        raise ValueError("H1 and H2 must share region and lambda")
    N = H1.region.sigma
    g1 = max(gamma, 1.0)
    if not N ** b <= g1 * N / 10.0:
        raise PreconditionError("scale", f"N^b = {N ** b:.4g} exceeds gamma_1 N / 10 = {g1 * N / 10:.4g}")
    pert = float(np.max(np.abs(H1.diagonal - H2.diagonal))) / H1.lam
    thr = math.exp(-3.0 * g1 * N)
    if pert > thr:
        raise PreconditionError("perturbation", f"||V1 - V2|| = {pert:.3g} exceeds exp(-3 gamma_1 N) = {thr:.3g}")
    r1 = _report(green(H1, E), H1.region, H1.lam, E, gamma, b, 1.0)
    if not r1.good_norm:
        raise PreconditionError("norm", "H1 violates the norm bound")
    if not r1.good_decay:
        raise PreconditionError("decay", "H1 violates the off-diagonal decay bound")
    G1, G2 = green(H1, E), green(H2, E)
    r2 = _report(G2, H2.region, H2.lam, E, gamma, b, 2.0)
    return PerturbCheck(r2.good, _log_slack(G1, H1.region, H1.lam, gamma, b),
                        _log_slack(G2, H2.region, H2.lam, gamma, b), pert, thr)


# ----------------------------------------------------------------- covering


def paste_norm(H: BoxHamiltonian, covers: dict, E: float, A: float, t: float, N: int):
    """Norm bound for ``G_Lambda`` from local windows ``W(m)``.

    Every ``m`` in the region of ``H`` needs a window ``covers[m]`` containing
    it, of diameter at most ``N``, with ``||G_W|| < A`` and
    ``|G_W(m, n)| <= exp(-t N)`` on the internal boundary of ``W``.  If
    ``4 N^2 exp(-t N) <= 1/2`` then ``||G_Lambda|| <= 2 N^2 A``.
    Returns ``(bound holds, ||G_Lambda||)``.
    """
    if 4 * N * N * math.exp(-t * N) > 0.5:
        raise HypothesisError("scale", "4 N^2 exp(-t N) > 1/2")
    Lam = H.region
    for m in map(tuple, Lam.sites.tolist()):
        W = covers.get(m)
        if W is None:
            raise HypothesisError("missing", f"no window for site {m}", m)
        if not W.contains([m])[0] or not Lam.contains(W.sites).all():
            raise HypothesisError("window", f"window for {m} must contain it and lie in Lambda", m)
        if W.sigma > N:
            raise HypothesisError("diameter", f"window for {m} has diameter {W.sigma} > {N}", m)
        try:
            GW = green(H.restrict(W), E)
        except ResonantEnergyError:
            raise HypothesisError("norm", f"window for {m} is resonant at E", m) from None
        if np.linalg.norm(GW, 2) >= A:
            raise HypothesisError("norm", f"||G_W|| >= A for the window of {m}", m)
        bd = internal_boundary(W, Lam)
        if len(bd):
            i = W.index_of(m)
            cols = [W.index_of(n) for n in bd]
            if np.abs(GW[i, cols]).max() > math.exp(-t * N):
                raise HypothesisError("decay", f"boundary decay fails for the window of {m}", m)
    norm = float(np.linalg.norm(green(H, E), 2))
    return norm <= 2 * N * N * A, norm


def centered_windows(Lam: Region, half: int) -> dict:
    """``W(m)``: the square of side ``2 half + 1`` around ``m``, shifted to fit in a rectangle."""
    from .operator import make_region

    lo, hi = Lam.bounds
    out = {}
    for m in map(tuple, Lam.sites.tolist()):
        c = [min(max(m[k], lo[k] + half), hi[k] - half) for k in range(2)]
        rect = tuple((max(int(lo[k]), c[k] - half), min(int(hi[k]), c[k] + half)) for k in range(2))
        out[m] = make_region(rect)
    return out


# ------------------------------------------------- bad-set measure on lines


@dataclass(frozen=True)
class LineMeasure:
    measure: float
    ci_low: float
    ci_high: float
    n_bad: int
    n_samples: int
    length: float


def badset_measure_on_line(p0, p1, region: Region, E: float, gamma: float, b: float,
                           n_samples: int, lam: float, omega, v, U=None, seed: int = 0,
                           all_translations: bool = False, confidence: float = 0.95) -> LineMeasure:
    """Stratified Monte-Carlo estimate of the bad phases on the segment ``[p0, p1]``.

    Phases where E is an eigenvalue count as bad.  The interval is the
    Wilson score interval for the bad fraction, scaled by the length.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    length = float(np.hypot(*(p1 - p0)))
    if length == 0:
        return LineMeasure(0.0, 0.0, 0.0, 0, 0, 0.0)
    U = Zero() if U is None else U
    rng = np.random.default_rng(seed)
    s = (np.arange(n_samples) + rng.random(n_samples)) / n_samples
    bad = 0
    for si in s:
        th = p0 + si * (p1 - p0)
        H = assemble(region, lam, omega, th, v, U)
        try:
            bad += not classify(H, E, gamma, b, all_translations).good
        except ResonantEnergyError:
            bad += 1
    ci = binomtest(bad, n_samples).proportion_ci(confidence, method="wilson")
    return LineMeasure(length * bad / n_samples, float(length * ci.low), float(length * ci.high), bad, n_samples, length)


# ---------------------------------------------------------- multi-scale runs


@dataclass(frozen=True)
class ScaleRow:
    N: int
    bad_fraction: float
    gamma_fit: float  # median over sampled boxes
    n_boxes: int


def multiscale_sweep(lam: float, omega, v, U=None, E: float = 0.0, ladder=(8, 16, 32),
                     gamma: float | None = None, b: float = 0.9, n_boxes: int = 8,
                     theta=(0.0, 0.0), spread: int = 1000, seed: int = 0, drift_delta: float | None = None):
    """Bad-box fraction and fitted decay rate for square boxes of side ``N + 1``.

    Boxes sit at random lattice translates within ``[-spread, spread]^2``.
    When ``drift_delta`` is set, a :class:`UserWarning` is emitted if
    ``gamma_fit`` drops by more than ``N_j^{-drift_delta}`` between scales;
    ladders that are not roughly squaring also warn.
    """
    import warnings

    from .operator import make_region

    U = Zero() if U is None else U
    gamma = math.log(lam) / 2 if gamma is None else gamma
    rng = np.random.default_rng(seed)
    rows = []
    for N in ladder:
        bad, fits = 0, []
        for _ in range(n_boxes):
            c = rng.integers(-spread, spread + 1, size=2)
            reg = make_region(((c[0], c[0] + N), (c[1], c[1] + N)))
            H = assemble(reg, lam, omega, theta, v, U)
            try:
                rep = classify(H, E, gamma, b)
            except ResonantEnergyError:
                bad += 1
                continue
            bad += not rep.good
            if math.isfinite(rep.gamma_fit):
                fits.append(rep.gamma_fit)
        rows.append(ScaleRow(int(N), bad / n_boxes, float(np.median(fits)) if fits else math.nan, n_boxes))
    for prev, cur in zip(rows, rows[1:]):
        if drift_delta is not None and cur.gamma_fit < prev.gamma_fit - prev.N ** -drift_delta:
            warnings.warn(f"gamma_fit drifts from {prev.gamma_fit:.3g} to {cur.gamma_fit:.3g}", stacklevel=2)
        if not (prev.N ** 1.5 <= cur.N <= prev.N ** 2.5):
            warnings.warn(f"ladder step {prev.N} -> {cur.N} is not N -> ~N^2", stacklevel=2)
    return rows
