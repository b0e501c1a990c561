import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from diracradial import (
    Con0ViolationError,
    ProfileError,
    agmon_weight,
    agmon_weight_grid,
    make_callable_profile,
    make_cutoffs,
    make_profile,
    smoothstep,
    turning_radius,
    vector_potential_from_B,
    verify_hypothesis,
)


def dense_simpson(f, a, b, n=100001):
    """Independent quadrature oracle: composite Simpson on a dense grid."""
    x = np.linspace(a, b, n)
    return simpson(f(x), x=x)


def bisect_root(f, a, b, iters=200):
    """Independent bisection oracle."""
    fa = f(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


class TestMakeProfile:
    def test_linear_values(self):
        p = make_profile("linear", {"a": 1.0, "lam": 0.5})
        assert p.A(np.array([2.0]))[0] == pytest.approx(2.0)
        assert p.V(np.array([2.0]))[0] == pytest.approx(1.0)

    def test_constant_B_gauge(self):
        p = make_profile("constant_B", {"b": 2.0})
        assert p.A(np.array([3.0]))[0] == pytest.approx(3.0)

    def test_power_log_derivative(self):
        p = make_profile("power", {"a": 1.0, "p": 0.5})
        r = np.array([4.0])
        assert (p.dA(r) / p.A(r) ** 2)[0] == pytest.approx(0.0625)

    def test_unknown_family(self):
        with pytest.raises(ProfileError):
            make_profile("spiral", [1.0])

    def test_param_count_mismatch(self):
        with pytest.raises(ProfileError):
            make_profile("linear", [1.0, 2.0, 3.0])

    def test_positional_params(self):
        p = make_profile("linear", [2.0, 0.25])
        assert p.A(np.array([1.0]))[0] == pytest.approx(2.0)
        assert p.V(np.array([4.0]))[0] == pytest.approx(1.0)

    def test_tabulated_roundtrip(self):
        r = np.linspace(0.0, 50.0, 400)
        p = make_profile("tabulated", {"r": r, "A": r, "V": 0.3 * r})
        assert p.A(np.array([7.3]))[0] == pytest.approx(7.3, rel=1e-8)
        assert p.dA(np.array([7.3]))[0] == pytest.approx(1.0, rel=1e-6)


class TestVectorPotentialFromB:
    def test_constant_field(self):
        assert vector_potential_from_B(lambda s: np.full_like(s, 2.0), 5.0) == pytest.approx(5.0)

    def test_linear_field(self):
        assert vector_potential_from_B(lambda s: 2.0 * s, 3.0) == pytest.approx(6.0)

    def test_decaying_field_oracle(self):
        # A(1) = 1 - ln 2, cross-checked against a dense-Simpson oracle
        got = vector_potential_from_B(lambda s: 1.0 / (1.0 + s), 1.0)
        oracle = dense_simpson(lambda s: s / (1.0 + s), 0.0, 1.0)
        assert got == pytest.approx(1.0 - math.log(2.0), rel=1e-10)
        assert got == pytest.approx(oracle, rel=1e-8)

    def test_nonfinite_field(self):
        with pytest.raises(ValueError):
            vector_potential_from_B(lambda s: np.where(s < 0.5, 1.0, np.inf), 1.0)
        with pytest.raises(ValueError):
            # non-integrable pole inside the interval
            vector_potential_from_B(lambda s: 1.0 / np.abs(s - 0.49921871), 1.0)

    def test_gauge_consistency_random_radii(self):
        # reconstructed A matches the closed form at 64 random radii to 1e-8
        rng = np.random.default_rng(7)
        p = make_profile("constant_B", {"b": 2.0})
        for r in rng.uniform(0.05, 40.0, 64):
            rebuilt = vector_potential_from_B(p.B, float(r))
            assert rebuilt == pytest.approx(float(p.A(np.array([r]))[0]), rel=1e-8)


class TestAgmonWeight:
    def test_linear_exact(self):
        p = make_profile("linear", {"a": 1.0})
        assert agmon_weight(p, 2.0) == pytest.approx(2.0)
        assert agmon_weight(p, 3.0) == pytest.approx(4.5)

    def test_log_profile_oracle(self):
        p = make_callable_profile(lambda r: np.log1p(r), label="log")
        got = agmon_weight(p, 1.0)
        assert got == pytest.approx(2.0 * math.log(2.0) - 1.0, rel=1e-9)
        assert got == pytest.approx(
            dense_simpson(lambda s: np.log1p(s), 0.0, 1.0), rel=1e-8
        )

    def test_grid_matches_pointwise(self):
        p = make_callable_profile(lambda r: np.log1p(r), label="log")
        rs = np.linspace(0.5, 12.0, 40)
        grid_vals = agmon_weight_grid(p, rs)
        for k in [0, 7, 19, 39]:
            assert grid_vals[k] == pytest.approx(agmon_weight(p, rs[k]), rel=1e-8)

    @given(st.floats(0.1, 30.0), st.floats(0.1, 30.0))
    @settings(max_examples=40, deadline=None)
    def test_monotone(self, r1, r2):
        p = make_profile("power", {"a": 0.7, "p": 1.3})
        lo, hi = sorted([r1, r2])
        assert agmon_weight(p, hi) >= agmon_weight(p, lo) - 1e-12


class TestTurningRadius:
    def test_linear_simple(self):
        p = make_profile("linear", {"a": 1.0})
        assert turning_radius(p, 0.5, 0.5) == pytest.approx(1.0, rel=1e-12)

    def test_linear_oracle(self):
        p = make_profile("linear", {"a": 1.0})
        got = turning_radius(p, 7.5, 0.5)
        oracle = bisect_root(lambda r: 0.5 * r * r - 7.5, 1.0, 10.0)
        assert got == pytest.approx(math.sqrt(15.0), rel=1e-12)
        assert got == pytest.approx(oracle, rel=1e-10)

    def test_log_profile_oracle(self):
        p = make_callable_profile(lambda r: np.log1p(r), label="log")
        got = turning_radius(p, 0.5, 0.5)
        oracle = bisect_root(lambda r: r * math.log1p(r) - 1.0, 0.5, 3.0)
        assert got == pytest.approx(oracle, rel=1e-10)

    def test_fixed_point_identity(self):
        p = make_profile("linear", {"a": 1.0})
        for m in np.arange(0.5, 41.0, 1.0):
            rj = turning_radius(p, m, 0.1)
            assert abs(m - 0.1 * rj * abs(p.A(np.array([rj]))[0])) < 1e-10

    def test_outside_bound(self):
        rng = np.random.default_rng(3)
        p = make_profile("linear", {"a": 1.0})
        rj = turning_radius(p, 5.5, 0.1)
        r = rng.uniform(rj, 50 * rj, 64)
        assert np.all(5.5 <= 0.1 * r * np.abs(p.A(r)) + 1e-9)

    def test_strictly_increasing_in_m(self):
        p = make_profile("linear", {"a": 1.0})
        rjs = [turning_radius(p, m, 0.1) for m in np.arange(0.5, 41.0, 1.0)]
        assert np.all(np.diff(rjs) > 0)

    def test_decaying_profile_raises(self):
        # r |A(r)| stays bounded, so no turning radius exists up to the ceiling
        p = make_callable_profile(lambda r: 1.0 / (1.0 + r ** 2), label="decaying")
        with pytest.raises(Con0ViolationError):
            turning_radius(p, 10.0, 0.1, R_ceiling=100.0)

    def test_bad_delta0(self):
        p = make_profile("linear", {"a": 1.0})
        with pytest.raises(ValueError):
            turning_radius(p, 0.5, 1.5)


class TestCutoffs:
    def test_support_properties(self):
        p = make_profile("linear", {"a": 1.0})
        cs = make_cutoffs(p, 0.5, 0.5)  # r_j = 1
        assert cs.r_j == pytest.approx(1.0, rel=1e-12)
        assert cs.f_j(2.9) == 0.0
        assert cs.f_j(6.1) == 1.0
        assert cs.f_tilde_j(0.9) == 0.0
        assert cs.f_tilde_j(2.1) == 1.0

    def test_partition_of_unity(self):
        p = make_profile("linear", {"a": 1.0})
        cs = make_cutoffs(p, 0.5, 0.5)
        mid = cs.f_j(4.5)
        assert 0.0 < mid < 1.0
        r = np.linspace(0.1, 10.0, 101)
        assert np.allclose(cs.f_j(r) + cs.f_j_c(r), 1.0, atol=1e-15)

    def test_smoothstep_range(self):
        x = np.linspace(0.0, 3.0, 301)
        y = smoothstep(x)
        assert y.min() == 0.0 and y.max() == 1.0
        assert np.all(np.diff(y) >= 0.0)
        assert smoothstep(1.0) == 0.0 and smoothstep(2.0) == 1.0


class TestVerifyHypothesis:
    def test_linear_localized(self):
        rep = verify_hypothesis(make_profile("linear", {"a": 1.0, "lam": 0.5}), 1.0, 1000.0, 64)
        assert rep.regime == "localized"
        assert rep.con1_limsup == pytest.approx(0.5)

    def test_swapped_roles_delocalized(self):
        rep = verify_hypothesis(make_profile("linear", {"a": 0.5, "lam": 1.0}), 1.0, 1000.0, 64)
        assert rep.regime == "delocalized"
        assert rep.va_limsup == pytest.approx(0.5)

    def test_power_localized_con2(self):
        rep1 = verify_hypothesis(make_profile("power", {"a": 1.0, "p": 0.5}), 1.0, 100.0, 64)
        rep2 = verify_hypothesis(make_profile("power", {"a": 1.0, "p": 0.5}), 1.0, 10000.0, 64)
        assert rep1.regime == "localized"
        assert rep2.con2_sup_tail < rep1.con2_sup_tail  # tends to zero with range

    def test_vanishing_A_fails_con0(self):
        rep = verify_hypothesis(make_profile("linear", {"a": 0.0, "lam": 0.0}), 1.0, 100.0, 16)
        assert not rep.con0_pass
        assert rep.regime == "indeterminate"

    def test_vanishing_A_growing_V_is_delocalized(self):
        # A == 0 with unbounded V satisfies the deconfinement condition outright
        rep = verify_hypothesis(make_profile("linear", {"a": 0.0, "lam": 0.5}), 1.0, 100.0, 16)
        assert not rep.con0_pass
        assert rep.regime == "delocalized"

    def test_probe_validation(self):
        p = make_profile("linear", {"a": 1.0})
        with pytest.raises(ValueError):
            verify_hypothesis(p, 10.0, 1.0, 64)
        with pytest.raises(ValueError):
            verify_hypothesis(p, 1.0, 10.0, 4)


@given(st.floats(0.5, 40.5), st.floats(0.05, 0.9))
@settings(max_examples=40, deadline=None)
def test_turning_radius_fixed_point_property(m, delta0):
    p = make_profile("linear", {"a": 1.0})
    rj = turning_radius(p, m, delta0)
    assert abs(m - delta0 * rj * rj) <= 1e-9 * max(1.0, m)
