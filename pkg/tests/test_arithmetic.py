import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qp2loc.arithmetic import (GOLDEN, SQRT2M1, ThinBand, best_dio_constant, continued_fraction,
                               diophantine_check, estimate_eta, fit_growth_exponent, frac_part,
                               is_best_approximation, lattice_points_in_band, short_distance_vectors,
                               torus_norm)



def exact_norm(k, omega):
    # exact: a float omega is a binary rational
    x = k * Fraction(omega)
    return float(abs(x - round(x)))


def exact_frac(k, omega):
    x = k * Fraction(omega)
    return float(x - math.floor(x))


def float_cf(x, depth):
    out = []
    for _ in range(depth):
        x = 1.0 / x
        a = math.floor(x)
        out.append(a)
        x -= a
        if x < 1e-9:
            break
    return out


# ------------------------------------------------------- continued fractions


def test_golden_quotients():
    fd = continued_fraction("golden", 30)
    assert fd.partial_quotients == (1,) * 30
    assert not fd.finite
    assert float_cf(GOLDEN, 20) == [1] * 20


def test_sqrt2m1_quotients():
    fd = continued_fraction("sqrt2m1", 25)
    assert fd.partial_quotients == (2,) * 25
    assert float_cf(SQRT2M1, 15) == [2] * 15


def test_rational_third():
    fd = continued_fraction(1 / 3, 10)
    assert fd.partial_quotients == (3,) and fd.finite
    fd = continued_fraction(Fraction(7, 19), 10)
    assert fd.finite and Fraction(*fd.convergents[-1]) == Fraction(7, 19)


def test_convergent_recurrence_and_error():
    fd = continued_fraction("golden", 25)
    q = [q for _, q in fd.convergents]
    for k in range(2, len(q)):
        assert q[k] == fd.partial_quotients[k] * q[k - 1] + q[k - 2]
    for k in range(len(q) - 1):
        p = fd.convergents[k][0]
        err = abs(Fraction(GOLDEN) - Fraction(p, q[k]))
        assert err < 1.0 / (q[k] * q[k + 1])


def test_float_input_reexpands():
    x = 0.7234987
    fd = continued_fraction(x, 60)
    p, q = fd.convergents[-1]
    assert abs(p / q - x) < 1e-15
    assert fd.partial_quotients[:6] == tuple(float_cf(x, 6))


def test_cf_validation():
    with pytest.raises(ValueError):
        continued_fraction(1.5, 5)
    with pytest.raises(ValueError):
        continued_fraction("golden", 0)


# ------------------------------------------------------------ torus norms


def test_torus_norm_examples():
    # 3 * 0.5 = 1.5 and 2 * 0.25 = 0.5 both sit half-way between integers
    assert torus_norm(3, 0.5) == 0.5
    assert torus_norm(2, 0.25) == 0.5
    assert torus_norm(4, 0.25) == 0.0
    assert torus_norm(1, "golden") == pytest.approx(1 - GOLDEN, abs=1e-16)
    assert torus_norm(1, "golden") == pytest.approx(GOLDEN ** 2, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10 ** 7), st.floats(0.001, 0.999))
def test_torus_norm_vs_exact(k, omega):
    assert torus_norm(k, omega) == pytest.approx(exact_norm(k, omega), abs=1e-15)
    assert torus_norm(-k, omega) == torus_norm(k, omega)
    assert 0 <= torus_norm(k, omega) <= 0.5


def test_frac_part_large_k():
    ks = np.array([10 ** 6 + 3, 9_999_991, -7_654_321])
    for k, f in zip(ks, frac_part(ks, GOLDEN)):
        assert f == pytest.approx(exact_frac(int(k), GOLDEN), abs=1e-15)


# ---------------------------------------------------------------- DC(N)


def test_diophantine_examples():
    assert diophantine_check(0.5, 2, 0.1, 0.1) == (False, 2)
    ok, _ = diophantine_check("golden", 10 ** 4, 0.2, 0.01)
    assert ok
    ok, _ = diophantine_check("golden", 10, 1.0, 0.0)
    assert not ok
    with pytest.raises(ValueError):
        diophantine_check("golden", 10, 0.0, 0.0)


def test_best_constant_vs_scan():
    ks = range(1, 101)
    ref = min(exact_norm(k, GOLDEN) * k for k in ks)
    assert best_dio_constant("golden", 100, 0.0) == pytest.approx(ref, rel=1e-12)
    # the k = 1 term dominates; along Fibonacci denominators the products tend to 1/sqrt(5)
    assert ref == pytest.approx(1 - GOLDEN, rel=1e-12)
    fib = [55, 89]
    for q in fib:
        assert q * exact_norm(q, GOLDEN) == pytest.approx(1 / math.sqrt(5), abs=2e-3)
    assert 0 < best_dio_constant("sqrt2m1", 100, 0.0) < best_dio_constant("golden", 100, 0.0)
    assert best_dio_constant(0.5, 2, 0.0) == 0.0


def test_best_approximation_property():
    fd = continued_fraction("golden", 25)
    for _, q in fd.convergents:
        if 1 < q <= 10 ** 4:
            assert is_best_approximation("golden", q)
            d = [exact_norm(j, GOLDEN) for j in range(1, q)]
            assert exact_norm(q, GOLDEN) < min(d)
    assert not is_best_approximation("golden", 4)


# ------------------------------------------------------------ band counts


def brute_band(band, omega, N):
    # column-major loop order, independent of the module's row sweep
    pts = []
    for k2 in range(N, -N - 1, -1):
        x2 = exact_frac(k2, omega)
        for k1 in range(-N, N + 1):
            x1 = exact_frac(k1, omega)
            if band.contains(np.array(x1), np.array(x2)):
                pts.append((k1, k2))
    return sorted(pts)


def test_full_and_empty():
    assert lattice_points_in_band(ThinBand.full_square(), "golden", 5).count == 121
    assert lattice_points_in_band(ThinBand.full_square(), 0.3, 5).count == 121
    assert lattice_points_in_band(ThinBand.empty(), "golden", 100).count == 0


def test_parabolic_regression():
    band = ThinBand.parabolic(1e-4, interval=(0.1, 0.9))
    bc = lattice_points_in_band(band, "golden", 500)
    assert bc.count == 167
    generic = ThinBand(band.contains, band.eta)
    assert np.array_equal(lattice_points_in_band(generic, "golden", 500).points, bc.points)


@pytest.mark.parametrize("seed", range(4))
def test_band_vs_brute_force(seed):
    rng = np.random.default_rng(seed)
    w = 10 ** rng.uniform(-3, -1.5)
    band = ThinBand.parabolic(w, shift=rng.uniform(0, 0.5), curvature=rng.uniform(0.5, 1.5),
                              interval=(0.05, 0.95))
    N = int(rng.integers(20, 60))
    got = [tuple(p) for p in lattice_points_in_band(band, "golden", N).points.tolist()]
    assert got == brute_band(band, GOLDEN, N)


def test_threads_do_not_change_output():
    band = ThinBand.parabolic(3e-3, shift=0.2)
    a = lattice_points_in_band(band, "golden", 400)
    b = lattice_points_in_band(band, "golden", 400, threads=4)
    assert np.array_equal(a.points, b.points)


def test_band_envelope_and_eta():
    band = ThinBand.parabolic(1e-4, interval=(0.1, 0.9))
    bc = lattice_points_in_band(band, "golden", 256)
    assert bc.envelope == pytest.approx(256 ** 0.78)
    est = estimate_eta(band, n_probes=300, step=2e-4)
    assert 0 < est <= band.eta


def test_growth_fit():
    assert fit_growth_exponent([10, 100, 1000], [3, 30, 300]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_growth_exponent([10, 100], [0, 5])


# ---------------------------------------------------------- short vectors


def brute_short(omega, N):
    ks = np.arange(-N, N + 1)
    x = np.array([exact_frac(int(k), omega) for k in ks])
    r = 2.0 * N ** -0.75
    # component differences x_k - x_k' below r, keyed by j = k - k'
    comp = {}
    for i in range(ks.size):
        d = x[i] - x
        for jj in np.nonzero(np.abs(d) <= r)[0]:
            comp.setdefault(int(ks[i] - ks[jj]), set()).add(round(float(d[jj]), 12))
    found = set()
    for j1, s1 in comp.items():
        for j2, s2 in comp.items():
            if (j1, j2) != (0, 0) and any(a * a + b * b <= r * r for a in s1 for b in s2):
                found.add((j1, j2))
    return len(found)


@pytest.mark.parametrize("N", [16, 24, 40])
def test_short_vectors_vs_brute(N):
    assert short_distance_vectors("golden", N).count == brute_short(GOLDEN, N)


def test_short_vectors_degenerate_and_growth():
    sv = short_distance_vectors(0.5, 16)
    assert not sv.diophantine
    # every even index pair j has ||j / 2|| = 0
    assert sv.count == 33 * 33 - 1
    assert sv.count > short_distance_vectors("golden", 16).count
    Ns = [256, 512, 1024, 2048, 4096]
    counts = [short_distance_vectors("golden", N).count for N in Ns]
    assert counts == [3188, 4548, 6392, 9264, 12872]
    assert fit_growth_exponent(Ns, counts) <= 0.55
    with pytest.raises(ValueError):
        short_distance_vectors("golden", 8)
