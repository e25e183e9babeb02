from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln
from scipy.stats import poisson

from squeezedjc import _mutations
from squeezedjc import fock_oracle as fo
from squeezedjc.errors import ConvergenceError, DomainError, TruncationWarning
from squeezedjc.states import (
    AmplitudeSeries,
    ModelParams,
    bn_aligned,
    bn_array,
    bn_general,
    build_series,
    gamma_param,
)


def displaced_poisson(s: float, chi: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    mag = np.exp(-0.5 * s * s + n * np.log(abs(s)) - 0.5 * gammaln(n + 1.0))
    return mag * np.sign(s) ** n * np.exp(1j * chi * n)


def oracle(p: ModelParams, retained: int = 256) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return fo.bn_numeric(p.alpha, p.zeta, p.beta, fo.TruncationSpec(retained)).coefficients


class TestModelParams:
    def test_phases_reduced(self):
        p = ModelParams(theta=-1.0, phi=7.0, chi=2 * math.pi)
        assert 0 <= p.theta < 2 * math.pi and p.theta == pytest.approx(2 * math.pi - 1)
        assert p.phi == pytest.approx(7.0 - 2 * math.pi)
        assert p.chi == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("kw", [{"a": -1}, {"b": -0.1}, {"r": -2}, {"lam": 0}, {"delta": math.nan}])
    def test_rejects_invalid(self, kw):
        with pytest.raises(DomainError):
            ModelParams(**kw)

    def test_aligned_constructor(self):
        p = ModelParams.aligned(a=3, b=2, r=0.3, chi=0.7)
        assert p.phase_aligned
        assert p.theta == pytest.approx(0.7) and p.phi == pytest.approx(1.4)

    def test_alignment_detection(self):
        assert not ModelParams(a=1, theta=0.2, r=0.3, phi=1.4, b=1, chi=0.7).phase_aligned
        assert not ModelParams(r=0.3, phi=1.0, b=1, chi=0.7).phase_aligned
        # theta plays no role when alpha vanishes
        assert ModelParams(a=0, theta=2.0, r=0.3, phi=1.4, b=1, chi=0.7).phase_aligned

    def test_complex_views(self):
        p = ModelParams(a=2, theta=math.pi / 2, r=0.5, phi=math.pi, b=3, chi=0.0)
        assert p.alpha == pytest.approx(2j)
        assert p.zeta == pytest.approx(-0.5)
        assert p.beta == pytest.approx(3.0)

    def test_replace_and_dict(self):
        p = ModelParams(b=2)
        q = p.replace(r=0.4)
        assert q.r == 0.4 and q.b == 2 and p.r == 0.0
        assert ModelParams(**q.as_dict()) == q


class TestGammaParam:
    @pytest.mark.parametrize(
        "args, expected",
        [
            ((2.0, 0.0, 0.0, 0.0), 2.0 + 0j),
            ((2.0, 0.0, 0.1, 0.0), 2.0 * math.exp(0.1) + 0j),
            ((1.0, math.pi / 2, 0.5, math.pi), 1j * math.exp(0.5)),
        ],
    )
    def test_examples(self, args, expected):
        assert gamma_param(*args) == pytest.approx(expected, abs=1e-14)

    def test_aligned_is_real_stretch(self):
        # phi = 2 chi makes gamma = b e^r e^{i chi}
        g = gamma_param(1.5, 0.4, 0.7, 0.8)
        assert g == pytest.approx(1.5 * math.exp(0.7) * np.exp(0.4j), abs=1e-14)

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            gamma_param(-1.0, 0, 0, 0)


class TestAligned:
    def test_poisson_row(self):
        p = ModelParams(b=2)
        assert abs(bn_aligned(p, 1)) ** 2 == pytest.approx(4 * math.exp(-4), rel=1e-13)

    @pytest.mark.parametrize("chi", [0.0, 1.1, 3.0])
    def test_equal_displacements_leave_vacuum(self, chi):
        p = ModelParams.aligned(a=2.5, b=2.5, chi=chi)
        vals, _ = bn_array(p, 20)
        assert abs(vals[0]) == pytest.approx(1.0, abs=1e-14)
        assert np.max(np.abs(vals[1:])) == 0.0

    @pytest.mark.parametrize("a, b, chi", [(15, 5, 0.0), (0, 2, 0.7), (1, 3, 2.0), (3.2, 3, 0.0)])
    def test_no_squeeze_is_displaced_poisson(self, a, b, chi):
        p = ModelParams.aligned(a=a, b=b, chi=chi)
        vals, _ = bn_array(p, 250)
        assert np.max(np.abs(vals - displaced_poisson(b - a, chi, 250))) < 1e-13

    def test_rejects_unaligned(self):
        with pytest.raises(DomainError):
            bn_aligned(ModelParams(r=0.3, phi=1.0, b=1, chi=0.2), 0)
        with pytest.raises(DomainError):
            bn_array(ModelParams(r=0.3, phi=1.0, b=1, chi=0.2), 3, method="aligned")

    def test_negative_index(self):
        with pytest.raises(DomainError):
            bn_aligned(ModelParams(b=1), -1)

    def test_scalar_matches_array(self):
        p = ModelParams.aligned(a=10, b=2, r=0.1)
        vals, _ = bn_array(p, 120)
        for n in (0, 1, 57, 100, 120):
            assert bn_aligned(p, n) == pytest.approx(vals[n], abs=1e-15)

    @pytest.mark.parametrize("a, b, r", [(10, 2, 0.1), (0, 5, 0.9), (3, 2, 0.3)])
    def test_phase_marginal(self, a, b, r):
        mags = [np.abs(bn_array(ModelParams.aligned(a=a, b=b, r=r, chi=c), 200)[0]) for c in (0.0, 1.0, 2.0)]
        assert np.max(np.abs(mags[1] - mags[0])) < 1e-12
        assert np.max(np.abs(mags[2] - mags[0])) < 1e-12

    @pytest.mark.parametrize("a, b, r, chi", [(10, 2, 0.1, 0.0), (3, 2, 0.3, 0.7), (0, 5, 0.9, 0.0)])
    def test_matches_oracle(self, a, b, r, chi):
        p = ModelParams.aligned(a=a, b=b, r=r, chi=chi)
        vals, _ = bn_array(p, 300)
        assert np.max(np.abs(vals - oracle(p, 512)[:301])) < 1e-8


class TestGeneral:
    def test_agrees_with_aligned(self):
        p = ModelParams.aligned(b=5, r=0.9)
        a, _ = bn_array(p, 400, method="aligned")
        g, _ = bn_array(p, 400, method="general")
        assert np.max(np.abs(a - g)) < 1e-12

    @pytest.mark.parametrize(
        "p",
        [
            ModelParams(a=1.0, theta=0.4, r=0.5, phi=2.0, b=2.0, chi=1.1),
            ModelParams(a=3.0, theta=2.5, r=0.2, phi=5.0, b=1.0, chi=0.3),
            ModelParams(a=0.5, theta=0.0, r=0.8, phi=1.0, b=0.0, chi=0.0),
        ],
        ids=["mixed", "opposed", "beta0"],
    )
    def test_matches_oracle(self, p):
        vals, _ = bn_array(p, 200)
        assert np.max(np.abs(vals - oracle(p)[:201])) < 1e-10

    @settings(max_examples=15, deadline=None)
    @given(
        st.floats(0, 3), st.floats(0, 2 * math.pi), st.floats(0, 0.8), st.floats(0, 2 * math.pi),
        st.floats(0, 3), st.floats(0, 2 * math.pi),
    )
    def test_random_phases_match_oracle(self, a, theta, r, phi, b, chi):
        p = ModelParams(a=a, theta=theta, r=r, phi=phi, b=b, chi=chi)
        vals, _ = bn_array(p, 120, method="general")
        assert np.max(np.abs(vals - oracle(p, 256)[:121])) < 1e-9

    @pytest.mark.parametrize("r, phi", [(0.5, 0.0), (1.0, 2.0), (0.2, 4.0)])
    def test_vacuum_has_even_support(self, r, phi):
        p = ModelParams(r=r, phi=phi)
        vals, _ = bn_array(p, 100)
        assert np.max(np.abs(vals[1::2])) == 0.0
        ref = oracle(p)[:101]
        assert np.max(np.abs(ref[1::2])) < 1e-12
        assert np.max(np.abs(vals - ref)) < 1e-12

    def test_degenerate_branch_matches_oracle(self):
        # b e^r = a puts gamma on top of alpha
        r, b = 0.5, 2.0
        p = ModelParams.aligned(a=b * math.exp(r), b=b, r=r, chi=0.3)
        vals, _ = bn_array(p, 100)
        assert np.max(np.abs(vals[1::2])) == 0.0
        assert np.max(np.abs(vals - oracle(p)[:101])) < 1e-10

    def test_wide_squeeze_matches_oracle(self):
        p = ModelParams.aligned(b=1, r=2.3)
        vals, _ = bn_array(p, 1023)
        assert np.max(np.abs(vals - oracle(p, 1024))) < 1e-7


class TestBuildSeries:
    def test_coherent(self):
        s = build_series(ModelParams(b=2), tail_target=1e-8)
        assert s.mass + s.tail_mass == pytest.approx(1.0, abs=1e-12)
        assert 1 - s.mass < 1e-8
        # smallest n with a Poisson(4) survival below the target
        expected = int(np.nonzero(poisson.sf(np.arange(60), 4.0) < 1e-8)[0][0])
        assert s.n_max == expected == 20
        n = np.arange(s.n_max + 1)
        assert np.allclose(s.weights, np.exp(-4 + n * math.log(4) - gammaln(n + 1)), atol=1e-15)
        assert s.source == "analytic_aligned"

    def test_squeezed(self):
        s = build_series(ModelParams.aligned(b=5, r=0.9), tail_target=1e-6)
        assert abs(s.mass + s.tail_mass - 1) < 1e-6
        assert 1 - s.mass < 1e-6

    def test_displaced_poisson_mean(self):
        s = build_series(ModelParams.aligned(a=15, b=5), tail_target=1e-8)
        mean = float(np.sum(np.arange(s.n_max + 1) * s.weights))
        assert mean == pytest.approx(100.0, abs=1e-5)

    def test_general_source_tag(self):
        s = build_series(ModelParams(a=1, theta=0.3, r=0.2, phi=1.0, b=1, chi=0.0))
        assert s.source == "analytic_general"

    def test_coefficients_are_read_only(self):
        s = build_series(ModelParams(b=1))
        with pytest.raises(ValueError):
            s.coefficients[0] = 0

    def test_unreachable_target_reports_mass(self):
        p = ModelParams.aligned(a=9.5, b=2, r=2.8)
        with pytest.raises(ConvergenceError) as err:
            build_series(p, n_cap=4096)
        assert "achieved_mass" in err.value.diagnostics
        assert err.value.diagnostics["n_cap"] == 4096

    @pytest.mark.parametrize("target", [0.0, 1e-2])
    def test_rejects_bad_target(self, target):
        with pytest.raises(DomainError):
            build_series(ModelParams(b=1), tail_target=target)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0, 12), st.floats(0, 6), st.floats(0, 1.0), st.floats(0, 2 * math.pi))
    def test_completeness(self, a, b, r, chi):
        s = build_series(ModelParams.aligned(a=a, b=b, r=r, chi=chi))
        assert s.mass <= 1 + 1e-9
        assert abs(s.mass + s.tail_mass - 1) < 1e-6


class TestAmplitudeSeries:
    def test_single(self):
        s = AmplitudeSeries.single(3)
        assert s.n_max == 3 and s.mass == 1.0 and s.weights[3] == 1.0

    def test_rejects_bad_source(self):
        with pytest.raises(DomainError):
            AmplitudeSeries(0, np.ones(1, complex), 0.0, "somewhere", {})

    def test_rejects_length_mismatch(self):
        with pytest.raises(DomainError):
            AmplitudeSeries(3, np.ones(2, complex), 0.0, "analytic_aligned", {})


class TestMutationHooks:
    def test_sinh_sign_flips_gamma(self):
        ref = gamma_param(1.0, 0.0, 0.5, 0.0)
        with _mutations.inject("sinh_sign"):
            flipped = gamma_param(1.0, 0.0, 0.5, 0.0)
        assert ref == pytest.approx(math.exp(0.5))
        assert flipped == pytest.approx(math.exp(-0.5))

    def test_dropped_phase_changes_phases_only(self):
        p = ModelParams.aligned(a=3, b=2, r=0.3, chi=0.7)
        ref, _ = bn_array(p, 50)
        with _mutations.inject("drop_chi_phase"):
            mut, _ = bn_array(p, 50)
        assert np.allclose(np.abs(ref), np.abs(mut), atol=1e-14)
        assert np.max(np.abs(ref - mut)) > 1e-3

    def test_unknown_mutation(self):
        with pytest.raises(ValueError):
            with _mutations.inject("nope"):
                pass
