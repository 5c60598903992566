import itertools

import numpy as np
import pytest

from bimonotone import (
    GridShape,
    QuotientConeSpec,
    bimonotone_constraints,
    brute_min_linear,
    dp_min_linear,
    dp_tableau,
    extremals_bruteforce,
    is_feasible,
    min_linear_quotient,
)


def quotient_extremals(spec: QuotientConeSpec) -> np.ndarray:
    """All 0/1 members of the quotient cone, by exhaustive enumeration."""
    p = spec.size
    assert p <= 14
    out = []
    for bits in itertools.product((0.0, 1.0), repeat=p):
        m = np.array(bits).reshape(spec.rows, spec.cols)
        if spec.contains(m):
            out.append(m)
    return np.array(out)


class TestDpTableau:
    def test_suffix_sums(self, rng):
        a = rng.normal(size=(3, 4))
        b, _ = dp_tableau(a)
        for k in range(1, 4):
            for l in range(1, 5):
                assert np.isclose(b[k, l], a[k - 1, l - 1 :].sum(), atol=1e-12)
        assert (b[0] == 0).all() and (b[:, 0] == 0).all() and (b[:, 5] == 0).all()

    def test_global_min_cell(self, rng):
        a = rng.normal(size=(3, 3))
        _, h = dp_tableau(a)
        _, val = brute_min_linear(a.ravel(), bimonotone_constraints(GridShape(3, 3)))
        assert np.isclose(h[1, 4], val, atol=1e-12)

    def test_rejects_non_matrix(self):
        with pytest.raises(ValueError):
            dp_tableau(np.zeros(5))


class TestDpMinLinear:
    @pytest.mark.parametrize("r,s", [(1, 1), (1, 4), (4, 1), (2, 3), (3, 3), (4, 4)])
    def test_matches_bruteforce(self, rng, r, s):
        cone = bimonotone_constraints(GridShape(r, s))
        for _ in range(40):
            a = rng.normal(size=(r, s))
            e, val = dp_min_linear(a)
            _, ref = brute_min_linear(a.ravel(), cone)
            assert abs(val - ref) <= 1e-12
            assert np.isclose((a * e).sum(), val, atol=1e-12)

    def test_minimizer_is_extremal(self, rng):
        cone = bimonotone_constraints(GridShape(3, 4))
        for _ in range(20):
            e, _ = dp_min_linear(rng.normal(size=(3, 4)))
            assert set(np.unique(e)) <= {0.0, 1.0}
            assert is_feasible(e.ravel(), cone)

    def test_value_never_positive(self, rng):
        for _ in range(20):
            _, val = dp_min_linear(rng.normal(size=(4, 3)))
            assert val <= 0.0

    def test_all_positive_coefficients(self):
        e, val = dp_min_linear(np.full((3, 3), 2.0))
        assert val == 0.0
        assert (e == 0).all()

    def test_all_negative_coefficients(self):
        a = -np.arange(1.0, 7.0).reshape(2, 3)
        e, val = dp_min_linear(a)
        assert (e == 1).all()
        assert np.isclose(val, a.sum(), atol=1e-12)

    def test_ties_resolve_to_pointwise_largest(self, rng):
        # minimizers of a linear functional are closed under pointwise max,
        # so a unique largest one exists; the backtrack should find it
        cone = bimonotone_constraints(GridShape(3, 3))
        ext = extremals_bruteforce(cone)
        for _ in range(40):
            a = rng.integers(-2, 3, size=(3, 3)).astype(float)
            e, val = dp_min_linear(a)
            scores = ext @ a.ravel()
            best = ext[scores <= scores.min() + 1e-12]
            largest = best.max(axis=0)
            assert (e.ravel() == largest).all()

    def test_single_cell(self):
        e, val = dp_min_linear(np.array([[-3.0]]))
        assert val == -3.0 and e[0, 0] == 1.0
        e, val = dp_min_linear(np.array([[3.0]]))
        assert val == 0.0 and e[0, 0] == 0.0


class TestBruteMinLinear:
    def test_achieves_value_on_extremal(self, rng):
        cone = bimonotone_constraints(GridShape(2, 4))
        a = rng.normal(size=8)
        e, val = brute_min_linear(a, cone)
        assert np.isclose(e @ a, val, atol=1e-12)
        assert is_feasible(e, cone)


class TestMinLinearQuotient:
    @pytest.mark.parametrize("r,s,k,l", [
        (3, 4, 1, 1), (3, 4, 1, 2), (3, 4, 2, 1), (2, 5, 1, 3),
        (4, 3, 2, 2), (3, 3, 0, 0), (2, 2, 1, 1),
    ])
    def test_matches_exhaustive_enumeration(self, rng, r, s, k, l):
        spec = QuotientConeSpec(r, s, head_rows=k, head_cols=l)
        ext = quotient_extremals(spec)
        for _ in range(15):
            a = rng.normal(size=(r, s))
            e, val = min_linear_quotient(a, k, l)
            ref = (ext * a).sum(axis=(1, 2)).min()
            assert abs(val - ref) <= 1e-12
            assert np.isclose((a * e).sum(), val, atol=1e-12)
            assert spec.contains(e)
            assert set(np.unique(e)) <= {0.0, 1.0}

    def test_zero_heads_equals_plain_dp(self, rng):
        for _ in range(10):
            a = rng.normal(size=(4, 5))
            _, v1 = min_linear_quotient(a, 0, 0)
            _, v2 = dp_min_linear(a)
            assert abs(v1 - v2) <= 1e-12

    def test_value_never_positive(self, rng):
        for _ in range(10):
            _, val = min_linear_quotient(rng.normal(size=(4, 4)), 2, 1)
            assert val <= 0.0
