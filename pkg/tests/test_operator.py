import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qp2loc.arithmetic import GOLDEN
from qp2loc.interaction import Zero, hubbard, Periodic
from qp2loc.operator import (InteractionBoundError, Region, RegionError, as_elementary, assemble, internal_boundary,
                             make_region, outer_boundary_pairs, partition, region_from_dict, square)
from qp2loc.potential import preset

SIN = preset("sin")
COS = preset("cos")


def path_eigs(L):
    j = np.arange(1, L + 1)
    return 2 * np.cos(np.pi * j / (L + 1))


def hopping_norm(region):
    H = assemble(region, 1e-300, GOLDEN, (0, 0), SIN)
    return np.linalg.norm(H.hopping().toarray(), 2)


def test_square_region():
    R = make_region(((0, 4), (0, 4)))
    assert len(R) == 25 and R.sigma == 4
    assert np.array_equal(R.sites[:6], [[0, 0], [0, 1], [0, 2], [0, 3], [0, 4], [1, 0]])


def test_l_shape():
    R = make_region(((0, 4), (0, 4)), cut=(2, 2))
    assert len(R) == 16
    s = {tuple(p) for p in R.sites}
    ref = {(i, j) for i in range(5) for j in range(5)} - {(i, j) for i in range(2, 5) for j in range(2, 5)}
    assert s == ref
    assert as_elementary(R) == R


def test_region_errors():
    with pytest.raises(RegionError):
        make_region(((0, 0), (0, 0)), cut=(0, 0))
    with pytest.raises(RegionError):
        make_region(((0, -1), (0, 0)))
    with pytest.raises(RegionError):
        Region(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        region_from_dict({"rect": [[0, 1], [0, 1]], "bogus": 1})


def test_as_elementary_rejects_non_er():
    plus = Region([(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)])
    assert as_elementary(plus) is None
    assert as_elementary(square(2)) == square(2)


def test_index_of_and_contains():
    R = make_region(((0, 4), (0, 4)), cut=(2, 2))
    for i, p in enumerate(R.sites):
        assert R.index_of(p) == i
    with pytest.raises(KeyError):
        R.index_of((3, 3))
    assert R.contains([(0, 0), (3, 3), (9, 9)]).tolist() == [True, False, False]


@pytest.mark.parametrize("L,M", [(1, 1), (2, 2), (3, 7), (10, 4), (20, 20)])
def test_hopping_spectrum_is_tensor_sum(L, M):
    R = make_region(((0, L - 1), (0, M - 1)))
    H = assemble(R, 1e-300, GOLDEN, (0, 0), SIN)
    ev = np.sort(np.linalg.eigvalsh(H.hopping().toarray()))
    ref = np.sort(np.add.outer(path_eigs(L), path_eigs(M)).ravel())
    assert np.max(np.abs(ev - ref)) < 1e-12


def test_laplacian_norm_bound():
    for R in (square(3), make_region(((0, 10), (-4, 6)), (3, -2)), make_region(((0, 0), (0, 30))),
              Region([(0, 0), (0, 1), (1, 1), (5, 5)])):
        assert hopping_norm(R) <= 4 + 1e-12
    big = make_region(((0, 49), (0, 49)))
    assert hopping_norm(big) >= 3.95
    assert hopping_norm(big) == pytest.approx(4 * np.cos(np.pi / 51), abs=1e-12)


def test_free_two_by_two():
    H = assemble(make_region(((0, 1), (0, 1))), 1e-12, GOLDEN, (0, 0), SIN)
    assert np.allclose(np.linalg.eigvalsh(H.dense()), [-2, 0, 0, 2], atol=1e-11)


def test_diagonal_definition():
    R = square(1)
    H = assemble(R, 2.5, GOLDEN, (0.0, 0.0), SIN)
    s = R.sites
    ref = 2.5 * (np.sin(2 * np.pi * s[:, 0] * GOLDEN) + np.sin(2 * np.pi * s[:, 1] * GOLDEN))
    assert np.allclose(np.diag(H.dense()), ref, atol=1e-13)
    A = H.dense()
    assert np.array_equal(A, A.T)
    off = A - np.diag(np.diag(A))
    for i, p in enumerate(s):
        for j, q in enumerate(s):
            assert off[i, j] == (1.0 if np.abs(p - q).sum() == 1 else 0.0)


def test_sparse_matches_dense():
    H = assemble(make_region(((0, 6), (0, 5)), (2, 3)), 3.0, GOLDEN, (0.1, 0.7), COS, hubbard(1.0))
    assert np.array_equal(H.sparse().toarray(), H.dense())


def test_interaction_bound():
    with pytest.raises(InteractionBoundError, match="m_int"):
        assemble(square(2), 1.0, GOLDEN, (0, 0), SIN, hubbard(11.0))
    assemble(square(2), 1.0, GOLDEN, (0, 0), SIN, hubbard(11.0), m_int=12.0)
    with pytest.raises(ValueError):
        assemble(square(2), 0.0, GOLDEN, (0, 0), SIN)


@settings(max_examples=30, deadline=None)
@given(st.integers(-20, 20), st.integers(-20, 20), st.floats(0, 1), st.floats(0, 1))
def test_translation_covariance(t1, t2, th1, th2):
    U = Periodic.from_table([[0.0, 1.5, -1.0], [2.0, 0.5, 0.0]])
    R = make_region(((-3, 4), (-2, 3)), (2, 1))
    H1 = assemble(R, 3.0, GOLDEN, (th1, th2), COS, U.translate((t1, t2)))
    H2 = assemble(R.translated((-t1, -t2)), 3.0, GOLDEN, (th1 + t1 * GOLDEN, th2 + t2 * GOLDEN), COS, U)
    assert np.allclose(H1.dense(), H2.dense(), atol=1e-11)


def test_restrict_and_with_diagonal():
    H = assemble(square(3), 2.0, GOLDEN, (0.2, 0.3), COS)
    sub = square(1)
    Hs = H.restrict(sub)
    idx = [H.region.index_of(p) for p in sub.sites]
    assert np.array_equal(Hs.dense(), H.dense()[np.ix_(idx, idx)])
    H2 = H.with_diagonal(np.zeros(H.size))
    assert np.array_equal(H2.dense(), H.hopping().toarray())
    with pytest.raises(ValueError):
        H.with_diagonal(np.zeros(3))


# ---------------------------------------------------------------- boundaries


def test_internal_boundary():
    Lam = square(2)
    assert internal_boundary(Lam, Lam).size == 0
    one = Region([(0, 0)])
    assert internal_boundary(one, Lam).tolist() == [[0, 0]]
    left = make_region(((-2, 2), (-2, -1)))
    got = {tuple(p) for p in internal_boundary(left, Lam)}
    assert got == {(i, -1) for i in range(-2, 3)}
    with pytest.raises(RegionError):
        internal_boundary(square(3), Lam)


def test_outer_boundary_pairs():
    pairs = outer_boundary_pairs(square(1))
    assert len(pairs) == 12
    assert all(np.abs(p[:2] - p[2:]).sum() == 1 for p in pairs)
    inner = outer_boundary_pairs(square(1), domain=square(2))
    assert len(inner) == 12
    assert len(outer_boundary_pairs(square(2), domain=square(2))) == 0


# ------------------------------------------------------------------ partition


def _union(pieces):
    return {tuple(p) for pc in pieces for p in pc.region.sites}


def test_partition_square():
    Lam = square(4)
    pieces = partition(Lam, 2)
    assert len(pieces) == 9
    assert _union(pieces) == {tuple(p) for p in Lam.sites}
    assert all(pc.elementary for pc in pieces)


def test_partition_l_shape():
    Lam = make_region(((-10, 10), (-10, 10)), (7, 7))
    pieces = partition(Lam, 2)
    assert _union(pieces) == {tuple(p) for p in Lam.sites}
    assert sum(not pc.elementary for pc in pieces) <= 5


def test_partition_small_region():
    pieces = partition(make_region(((0, 1), (0, 1))), 5)
    assert len(pieces) == 1
    with pytest.raises(ValueError):
        partition(square(2), 0)
