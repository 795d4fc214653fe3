import math
import warnings

import numpy as np
import pytest
from scipy.optimize import brentq

from qp2loc.arithmetic import GOLDEN
from qp2loc.green import (PreconditionError, HypothesisError, ResonantEnergyError, Resolvent, badset_measure_on_line,
                          centered_windows, classify, decay_fit, green, green_solve, level_margins, multiscale_sweep,
                          neumann_verify, pair_distances, paste_norm, perturb_verify, vlevel_check)
from qp2loc.interaction import Zero, hubbard
from qp2loc.operator import Region, assemble, make_region, square
from qp2loc.potential import preset

SIN = preset("sin")
COS = preset("cos")
BOX7 = make_region(((0, 6), (0, 6)))


def box(lam, theta=(0.1, 0.2), region=BOX7, v=SIN, U=None):
    return assemble(region, lam, "golden", theta, v, U)


# ------------------------------------------------------------------- solves


def test_single_site():
    H = box(3.0, region=Region([(2, 5)]))
    d = H.diagonal[0]
    G = green(H, 0.7)
    assert G.shape == (1, 1)
    assert G[0, 0] == pytest.approx(1 / (d - 0.7), rel=1e-15)


def test_exact_eigenvalue_is_resonant():
    H = box(3.0, region=make_region(((0, 2), (0, 2))))
    for e in np.linalg.eigvalsh(H.dense()):
        with pytest.raises(ResonantEnergyError, match="resonant energy") as ei:
            green(H, e)
        assert ei.value.nearest_eigenvalue == pytest.approx(e, abs=1e-12)


def test_residual_and_symmetry():
    H = box(4.0, theta=(0.31, 0.77), v=COS, U=hubbard(2.0))
    s = green_solve(H, 0.123)
    assert s.residual <= 1e-9 * max(1.0, s.condition)
    assert np.array_equal(s.G, s.G.T)
    A = H.dense() - 0.123 * np.eye(H.size)
    assert np.allclose(s.G, np.linalg.inv(A), atol=1e-10 * s.condition)


def test_large_coupling_norm():
    lam = 1e6
    H = box(lam)
    assert vlevel_check(H.theta, BOX7, GOLDEN, SIN, Zero(), 0.0, lam, lam ** -0.5)
    assert np.linalg.norm(green(H, 0.0), 2) <= 8e-3


# ------------------------------------------------------------- classify


def test_classify_large_coupling_good():
    lam = 1e6
    r = classify(box(lam), 0.0, 0.5 * math.log(lam), 0.9)
    assert r.good_norm and r.good_decay and r.good
    assert r.norm == pytest.approx(np.linalg.norm(green(box(lam), 0.0), 2))
    assert r.hs_norm >= r.norm


def test_classify_near_resonance_bad():
    H = box(2.0, region=make_region(((0, 8), (0, 8))))
    E = np.linalg.eigvalsh(H.dense())[40] + 1e-6
    r = classify(H, E, 1.0, 0.9)
    assert not r.good_decay and not r.good_norm


def test_classify_free_case_no_decay():
    H = box(1e-6, region=make_region(((0, 8), (0, 8))))
    r = classify(H, 0.1, 1.0, 0.9)
    assert not r.good_decay
    assert r.gamma_fit < 0.1


def test_classify_invariants():
    H = box(8.0, theta=(0.4, 0.05), v=COS)
    r = classify(H, 0.3, 1.5, 0.9)
    G = green(H, 0.3)
    d = pair_distances(H.region)
    m = d >= H.region.sigma / 4
    assert r.good_norm == (r.norm < math.exp(H.region.sigma ** 0.9) / 8.0)
    assert r.good_decay == bool(np.all(np.abs(G[m]) < np.exp(-1.5 * d[m])))


def test_classify_all_translations():
    H = box(30.0, region=make_region(((0, 3), (0, 3))), U=hubbard(1.0))
    r = classify(H, 0.2, 1.0, 0.9, all_translations=True)
    assert r.n_translations == 8
    single = classify(H, 0.2, 1.0, 0.9)
    assert r.norm >= single.norm
    assert r.good <= single.good


def test_metric_choice():
    R = make_region(((0, 3), (0, 3)))
    assert pair_distances(R, "max")[0, -1] == 3
    assert pair_distances(R, "l1")[0, -1] == 6
    assert pair_distances(R, "euclid")[0, -1] == pytest.approx(3 * math.sqrt(2))
    with pytest.raises(ValueError):
        pair_distances(R, "chebyshev")


def test_decay_fit_exact_exponential():
    R = make_region(((0, 9), (0, 9)))
    d = pair_distances(R)
    G = 3.0 * np.exp(-0.7 * d)
    assert decay_fit(G, d, 2) == pytest.approx(0.7, rel=1e-12)
    assert math.isnan(decay_fit(G, d, 9))


@pytest.mark.parametrize("side,lam", [(7, 5.0), (16, 50.0)])
def test_good_mask_agrees_with_classify(side, lam):
    # 16 x 16 exercises the dense per-energy path
    H = box(lam, region=make_region(((0, side - 1), (0, side - 1))), v=COS)
    Es = np.linspace(-2 * lam - 3, 2 * lam + 3, 25)
    res = Resolvent(H)
    ref = []
    for E in Es:
        try:
            ref.append(classify(H, E, 1.0, 0.9, relax=3.0).good)
        except ResonantEnergyError:
            ref.append(False)
    assert res.good_mask(Es, 1.0, 0.9, relax=3.0).tolist() == ref
    first = res.good_mask(Es, 1.0, 0.9, relax=3.0, first_bad=True)
    k = ref.index(False) if False in ref else len(ref)
    assert first[:k + 1].tolist() == ref[:k + 1]


# ------------------------------------------------------------ level sets


def test_vlevel_far_energy():
    lam, delta = 7.0, 0.05
    U = hubbard(2.0)
    E = 2 * lam + 2.0 + lam * delta + 1e-9
    for th in [(0.0, 0.0), (0.3, 0.9), (0.25, 0.25)]:
        assert vlevel_check(th, BOX7, GOLDEN, SIN, U, E, lam, delta)
        assert vlevel_check(th, BOX7, GOLDEN, SIN, U, -E - 2.0, lam, delta)


def test_vlevel_exact_hit():
    # put the origin site exactly on the level set by solving for theta1
    lam, E, th2 = 5.0, 1.3, 0.2
    f = lambda t: SIN(t) + SIN(th2) - E / lam
    th1 = brentq(f, 0.5, 0.75, xtol=1e-15)
    assert not vlevel_check((th1, th2), make_region(((0, 3), (0, 3))), GOLDEN, SIN, Zero(), E, lam, 1e-9)
    assert level_margins((th1, th2), make_region(((0, 3), (0, 3))), GOLDEN, SIN, Zero(), E, lam).min() < 1e-12


def test_vlevel_rejects_zero_delta():
    with pytest.raises(ValueError):
        vlevel_check((0, 0), BOX7, GOLDEN, SIN, Zero(), 0.0, 1.0, 0.0)


# -------------------------------------------------------- Neumann bounds


def test_neumann_large_coupling():
    c = neumann_verify(box(1e6), 0.0, 1e-3)
    assert c.holds
    assert c.entry_violation <= 0 and c.norm_violation <= 0
    assert c.ratio == pytest.approx(0.016)


def test_neumann_ratio_error():
    with pytest.raises(PreconditionError) as ei:
        neumann_verify(box(10.0), 0.0, 0.01)
    assert ei.value.reason == "neumann_ratio"


def test_neumann_level_set_hit():
    lam, E, th2 = 1e4, 0.3e4, 0.2
    th1 = brentq(lambda t: SIN(t) + SIN(th2) - E / lam, 0.5, 0.75, xtol=1e-15)
    with pytest.raises(PreconditionError) as ei:
        neumann_verify(box(lam, theta=(th1, th2)), E, 0.01)
    assert ei.value.reason == "level_set_hit"


def test_neumann_single_site():
    c = neumann_verify(box(1e5, region=Region([(0, 0)])), 0.0, 0.01)
    assert c.holds and c.norm_violation < 0 and c.entry_violation < 0


def test_neumann_randomized():
    rng = np.random.default_rng(7)
    R = make_region(((0, 3), (0, 3)))
    checked = 0
    for _ in range(1000):
        lam = 10 ** rng.uniform(4, 8)
        th = rng.random(2)
        E = rng.uniform(-2, 2) * lam
        margin = level_margins(th, R, GOLDEN, SIN, Zero(), E, lam).min()
        delta = 0.9 * margin
        if 16 / (lam * delta) >= 1:
            continue
        H = assemble(R, lam, GOLDEN, th, SIN)
        assert neumann_verify(H, E, delta).holds
        checked += 1
    assert checked > 900


# ---------------------------------------------------------- perturbation


def test_perturbation_examples():
    lam, gamma, b = 1e6, 9.0, 0.9
    H1 = box(lam)
    H2 = H1.with_diagonal(H1.diagonal + 1e-60)
    assert perturb_verify(H1, H2, 0.0, gamma, b).holds
    same = perturb_verify(H1, H1, 0.0, gamma, b)
    assert same.holds and same.slack1 == same.slack2 and same.perturbation == 0.0
    with pytest.raises(PreconditionError) as ei:
        perturb_verify(H1, H1.with_diagonal(H1.diagonal + 1e-3), 0.0, gamma, b)
    assert ei.value.reason == "perturbation"
    with pytest.raises(PreconditionError) as ei:
        perturb_verify(H1, H1, 0.0, 6.0, b)
    assert ei.value.reason == "scale"


def test_perturbation_bad_h1():
    H = box(2.0, region=make_region(((0, 8), (0, 8))))
    E = np.linalg.eigvalsh(H.dense())[40] + 1e-6
    with pytest.raises(PreconditionError) as ei:
        perturb_verify(H, H, E, 9.0, 0.9)
    assert ei.value.reason in ("norm", "decay")


def test_perturbation_randomized():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(300):
        lam = 10 ** rng.uniform(4, 8)
        gamma = rng.uniform(9, 12)
        H1 = box(lam, theta=tuple(rng.random(2)))
        E = rng.uniform(-2, 2) * lam
        eps = math.exp(-3 * gamma * 6) * lam * rng.random(H1.size)
        H2 = H1.with_diagonal(H1.diagonal + eps)
        try:
            r = perturb_verify(H1, H2, E, gamma, 0.9)
        except PreconditionError as e:
            assert e.reason in ("norm", "decay")
            continue
        assert r.holds
        checked += 1
    assert checked > 50


# ---------------------------------------------------------------- pasting


def test_paste_large_coupling():
    L = make_region(((0, 20), (0, 20)))
    H = box(1e6, region=L)
    ok, norm = paste_norm(H, centered_windows(L, 2), 0.0, A=8e-3, t=6.0, N=4)
    assert ok and norm <= 2 * 16 * 8e-3


def test_paste_resonant_window():
    L = make_region(((0, 20), (0, 20)))
    H = box(1e6, region=L)
    cov = centered_windows(L, 2)
    E = np.linalg.eigvalsh(H.restrict(cov[(0, 0)]).dense())[0]
    with pytest.raises(HypothesisError) as ei:
        paste_norm(H, cov, E, A=8e-3, t=6.0, N=4)
    assert ei.value.reason == "norm" and ei.value.site == (0, 0)


def test_paste_single_window():
    L = make_region(((0, 4), (0, 4)))
    H = box(1e6, region=L)
    A = 2 * np.linalg.norm(green(H, 0.0), 2)
    ok, norm = paste_norm(H, {tuple(m): L for m in L.sites.tolist()}, 0.0, A=A, t=6.0, N=4)
    assert ok and norm < A


def test_paste_hypotheses():
    L = make_region(((0, 8), (0, 8)))
    H = box(1e6, region=L)
    with pytest.raises(HypothesisError, match="4 N"):
        paste_norm(H, centered_windows(L, 2), 0.0, A=1.0, t=0.1, N=4)
    cov = centered_windows(L, 2)
    del cov[(3, 3)]
    with pytest.raises(HypothesisError) as ei:
        paste_norm(H, cov, 0.0, A=1.0, t=6.0, N=4)
    assert ei.value.site == (3, 3)


def test_paste_randomized():
    rng = np.random.default_rng(3)
    L = make_region(((0, 10), (0, 10)))
    cov = centered_windows(L, 2)
    verified = 0
    for _ in range(30):
        lam = 10 ** rng.uniform(3, 7)
        H = box(lam, theta=tuple(rng.random(2)), region=L)
        E = rng.uniform(-2, 2) * lam
        try:
            ok, _ = paste_norm(H, cov, E, A=10 ** rng.uniform(-4, 0), t=5.0, N=4)
        except HypothesisError:
            continue
        assert ok
        verified += 1
    assert verified > 0


# ------------------------------------------------------------ line measure


def test_line_measure_far_energy_zero():
    lam = 1e8
    m = badset_measure_on_line((0, 0), (1, 0.3), square(2), 2.5 * lam, 3.0, 0.9, 1000, lam, "golden", SIN)
    assert m.measure == 0.0 and m.n_bad == 0
    assert m.ci_high > 0


def test_line_measure_zero_length():
    m = badset_measure_on_line((0.2, 0.2), (0.2, 0.2), square(2), 0.0, 1.0, 0.9, 1000, 2.0, "golden", SIN)
    assert m.measure == 0.0 and m.length == 0.0


def test_line_measure_small_coupling_diagnostic():
    m = badset_measure_on_line((0, 0), (1, 0.3), square(2), 0.0, 1.0, 0.9, 1000, 2.0, "golden", SIN)
    assert m.measure > math.exp(-2 ** 0.05)
    assert m.ci_low <= m.measure <= m.ci_high <= m.length
    again = badset_measure_on_line((0, 0), (1, 0.3), square(2), 0.0, 1.0, 0.9, 1000, 2.0, "golden", SIN)
    assert again == m


def test_line_measure_sample_floor():
    with pytest.raises(ValueError):
        badset_measure_on_line((0, 0), (1, 0), square(1), 0.0, 1.0, 0.9, 999, 2.0, "golden", SIN)


# -------------------------------------------------------------- multiscale


def lyapunov_1d(lam, E, omega, theta, n=20000):
    # transfer-matrix growth rate of the 1D cosine operator
    x = np.array([1.0, 0.0])
    acc = 0.0
    for k in range(n):
        x = np.array([(E - lam * math.cos(2 * math.pi * (theta + k * omega))) * x[0] - x[1], x[0]])
        s = np.abs(x).max()
        acc += math.log(s)
        x /= s
    return acc / n


def test_lyapunov_oracle():
    # Herman bound: the 1D cosine operator has Lyapunov exponent log(lam/2) on its spectrum
    assert lyapunov_1d(50.0, 0.0, GOLDEN, 0.1) == pytest.approx(math.log(25), rel=0.02)


def test_multiscale_large_coupling():
    lam = 50.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = multiscale_sweep(lam, "golden", COS, ladder=(8, 16, 32), gamma=0.5 * math.log(lam))
    assert [r.N for r in rows] == [8, 16, 32]
    for r in rows:
        assert abs(r.gamma_fit - math.log(lam / 2)) <= 0.25 * math.log(lam / 2)


def test_multiscale_small_coupling():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = multiscale_sweep(0.5, "golden", COS, ladder=(8, 16, 32), gamma=0.5)
    assert all(r.bad_fraction == 1.0 for r in rows)
    fits = [r.gamma_fit for r in rows]
    assert fits == sorted(fits, reverse=True) and fits[-1] < 0.2


def test_multiscale_single_scale_and_ladder_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rows = multiscale_sweep(50.0, "golden", COS, ladder=(8,), n_boxes=2, drift_delta=0.1)
    assert len(rows) == 1
    with pytest.warns(UserWarning, match="ladder"):
        multiscale_sweep(50.0, "golden", COS, ladder=(4, 6), n_boxes=1)
