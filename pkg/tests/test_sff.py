import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import assume, given
from hypothesis import strategies as st

from bglsff.errors import DegenerateFilterError, InvalidArgumentError, ResourceError
from bglsff.sff import (
    FilterSpec,
    plateau_value,
    plateau_value_at,
    sff_bgl,
    sff_dephasing_jumps,
    sff_filtered,
    sff_unitary,
    sff_via_kernel,
)
from bglsff.spectral import DegeneracyClusters, Spectrum, cluster_degeneracies, partition_function

from helpers import naive_sff_bgl, spectra

TWO = Spectrum(np.array([0.0, 1.0]))
# |1 + e^{-i-1}|^2 / (2 (1 + e^{-2}))
BGL_EXAMPLE = abs(1 + np.exp(-1j - 1)) ** 2 / (2 * (1 + math.exp(-2)))

betas = st.sampled_from([0.0, 0.5, 1.0, 5.0])
gammas = st.sampled_from([0.0, 1e-3, 0.1, 1.0])
times = st.floats(0, 1e3)


class TestUnitary:
    def test_single_level(self):
        assert sff_unitary(Spectrum(np.array([0.7])), 3.0, 12.5) == pytest.approx(1.0, abs=1e-15)

    def test_two_levels(self):
        assert sff_unitary(TWO, 0.0, math.pi) == pytest.approx(0.0, abs=1e-15)
        assert sff_unitary(TWO, 0.0, 0.0) == 1.0

    def test_matches_partition_function(self, rng):
        s = Spectrum(rng.normal(size=30))
        t = np.array([0.0, 0.5, 3.0, 40.0])
        ref = np.abs(partition_function(s, 2.0 + 1j * t)) ** 2 / partition_function(s, 2.0).real ** 2
        assert np.allclose(sff_unitary(s, 2.0, t), ref, rtol=1e-12, atol=1e-15)

    def test_array_and_scalar_time(self):
        vals = sff_unitary(TWO, 0.0, [0.0, math.pi])
        assert isinstance(vals, np.ndarray) and vals.shape == (2,)
        assert isinstance(sff_unitary(TWO, 0.0, 1.0), float)

    @pytest.mark.parametrize("beta,t", [(-1.0, 1.0), (0.0, -1.0), (math.inf, 1.0)])
    def test_preconditions(self, beta, t):
        with pytest.raises(InvalidArgumentError):
            sff_unitary(TWO, beta, t)


class TestBgl:
    def test_two_level_example(self):
        assert BGL_EXAMPLE == pytest.approx(0.6751, abs=1e-4)
        assert sff_bgl(TWO, 0.0, 1.0, 1.0) == pytest.approx(BGL_EXAMPLE, rel=1e-14)

    def test_two_level_long_time(self):
        assert sff_bgl(TWO, 0.0, 1.0, 200.0) == pytest.approx(0.5, abs=1e-12)

    @given(spectra(max_dim=8), betas, gammas, times)
    def test_matches_direct_formula(self, e, beta, gamma, t):
        s = Spectrum(e)
        with np.errstate(all="ignore"):
            ref = naive_sff_bgl(e, beta, gamma, t)
        # the unstabilised oracle is only meaningful away from underflow
        assume(np.isfinite(ref) and np.sum(np.exp(-beta * e - 2 * gamma * t * e**2)) > 1e-250)
        assert sff_bgl(s, beta, gamma, t) == pytest.approx(ref, rel=1e-9, abs=1e-13)

    @given(spectra(max_dim=8), betas, times)
    def test_gamma_zero_is_unitary(self, e, beta, t):
        s = Spectrum(e)
        assert sff_bgl(s, beta, 0.0, t) == pytest.approx(sff_unitary(s, beta, t), rel=1e-14, abs=1e-15)

    def test_extreme_exponents_stay_finite(self):
        s = Spectrum(np.linspace(-3, 3, 40))
        t = np.logspace(-1, 6, 50)
        vals = sff_bgl(s, 20.0, 1.0, t)
        assert np.all(np.isfinite(vals))

    def test_negative_gamma(self):
        with pytest.raises(InvalidArgumentError):
            sff_bgl(TWO, 0.0, -1.0, 1.0)


class TestBoundsAndIdentities:
    @given(spectra(max_dim=8), betas, gammas, times)
    def test_fidelity_bounds(self, e, beta, gamma, t):
        s = Spectrum(e)
        for v in (
            sff_unitary(s, beta, t),
            sff_bgl(s, beta, gamma, t),
            sff_dephasing_jumps(s, beta, gamma, t),
            sff_filtered(s, beta, FilterSpec.power(gamma, 1.0), t),
        ):
            assert 0.0 <= v <= 1.0

    @given(spectra(max_dim=8), betas, gammas)
    def test_t_zero_is_one(self, e, beta, gamma):
        s = Spectrum(e)
        for v in (
            sff_unitary(s, beta, 0.0),
            sff_bgl(s, beta, gamma, 0.0),
            sff_dephasing_jumps(s, beta, gamma, 0.0),
            sff_filtered(s, beta, FilterSpec.power(gamma, 0.5), 0.0),
        ):
            assert v == pytest.approx(1.0, abs=1e-14)

    @given(spectra(max_dim=8), betas, gammas, times)
    def test_reduction_chain(self, e, beta, gamma, t):
        s = Spectrum(e)
        bgl = sff_bgl(s, beta, gamma, t)
        assert sff_filtered(s, beta, FilterSpec.power(gamma, 2.0), t) == pytest.approx(bgl, rel=1e-14, abs=1e-15)

    @given(spectra(max_dim=8), betas, gammas, times)
    def test_constant_filters_are_unitary(self, e, beta, gamma, t):
        s = Spectrum(e)
        ref = sff_unitary(s, beta, t)
        assert sff_filtered(s, beta, FilterSpec.power(gamma, 0.0), t) == pytest.approx(ref, rel=1e-12, abs=1e-14)
        assert sff_filtered(s, beta, FilterSpec(), t) == pytest.approx(ref, rel=1e-14, abs=1e-15)


class TestFiltered:
    def test_custom_table(self):
        g = np.array([1.0, 0.5])
        t = 0.7
        num = abs(1 + 0.5 * np.exp(-1j * t)) ** 2
        assert sff_filtered(TWO, 0.0, FilterSpec(kind="custom", values=g), t) == pytest.approx(num / (2 * 1.25))

    def test_custom_function_matches_power(self, rng):
        s = Spectrum(rng.normal(size=12))
        t = np.array([0.3, 4.0, 90.0])
        fn = FilterSpec(kind="custom", function=lambda e, ti: np.exp(-0.01 * ti * np.abs(e) ** 3))
        assert np.allclose(sff_filtered(s, 1.0, fn, t), sff_filtered(s, 1.0, FilterSpec.power(0.01, 3.0), t))

    def test_named_gaussian_is_bgl(self, rng):
        s = Spectrum(rng.normal(size=12))
        f = FilterSpec(kind="custom", name="gaussian", gamma=0.05)
        assert np.allclose(sff_filtered(s, 1.0, f, [1.0, 10.0]), sff_bgl(s, 1.0, 0.05, [1.0, 10.0]), rtol=1e-14)

    @pytest.mark.parametrize("name", ["lorentzian", "sech"])
    def test_leading_gaussian_filters_agree_for_small_gamma_t(self, name, rng):
        s = Spectrum(rng.normal(size=16) * 0.3)
        f = FilterSpec(kind="custom", name=name, gamma=1e-4)
        assert sff_filtered(s, 1.0, f, 5.0) == pytest.approx(sff_bgl(s, 1.0, 1e-4, 5.0), rel=1e-6)

    def test_all_zero_filter(self):
        with pytest.raises(DegenerateFilterError):
            sff_filtered(TWO, 0.0, FilterSpec(kind="custom", values=np.zeros(2)), 1.0)

    @pytest.mark.parametrize(
        "kw",
        [
            {"kind": "power", "gamma": -1.0},
            {"kind": "power", "delta": -0.5},
            {"kind": "custom"},
            {"kind": "custom", "name": "boxcar"},
            {"kind": "custom", "values": np.array([-1.0, 1.0])},
            {"kind": "triangle"},
        ],
    )
    def test_invalid_specs(self, kw):
        with pytest.raises(InvalidArgumentError):
            FilterSpec(**kw)

    def test_time_coupling_flag(self):
        assert FilterSpec.power(1.0, 2.0).time_coupled
        assert not FilterSpec(kind="custom", values=np.ones(2)).time_coupled
        assert not FilterSpec().time_coupled


def lindblad_fidelity(e, beta, gamma, t):
    """Oracle: propagate the full energy-dephasing Lindbladian with expm."""
    d = e.size
    h = np.diag(e).astype(complex)
    eye = np.eye(d)
    # column-stacking vec: vec(A X B) = (B^T kron A) vec(X)
    comm = np.kron(eye, h) - np.kron(h.T, eye)
    gen = -1j * comm - gamma * comm @ comm
    p = np.exp(-beta * e)
    psi = np.sqrt(p / p.sum())
    rho0 = np.outer(psi, psi)
    rho_t = (scipy.linalg.expm(gen * t) @ rho0.reshape(-1, order="F")).reshape(d, d, order="F")
    return float(np.real(psi @ rho_t @ psi))


class TestDephasingJumps:
    def test_gamma_zero(self, rng):
        s = Spectrum(rng.normal(size=10))
        t = np.array([0.2, 3.0, 50.0])
        assert np.allclose(sff_dephasing_jumps(s, 1.0, 0.0, t), sff_unitary(s, 1.0, t), atol=1e-14)

    def test_long_time_limit(self):
        assert sff_dephasing_jumps(TWO, 0.0, 1.0, 100.0) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("beta,gamma,t", [(0.0, 0.3, 1.7), (1.0, 0.05, 10.0), (2.0, 1.0, 0.4)])
    def test_matches_lindblad_oracle(self, rng, beta, gamma, t):
        e = np.sort(rng.normal(size=4))
        assert sff_dephasing_jumps(Spectrum(e), beta, gamma, t) == pytest.approx(
            lindblad_fidelity(e, beta, gamma, t), abs=1e-12
        )

    def test_dimension_cap(self):
        with pytest.raises(ResourceError):
            sff_dephasing_jumps(Spectrum(np.linspace(0, 1, 20)), 0.0, 0.1, 1.0, max_dim=10)


def time_average_unitary(energies, beta, period, n=20000):
    t = np.linspace(0, period, n, endpoint=False)
    return float(np.mean(sff_unitary(Spectrum(np.asarray(energies, dtype=float)), beta, t)))


class TestPlateau:
    def test_nondegenerate_infinite_temperature(self, rng):
        s = Spectrum(np.sort(rng.normal(size=50)))
        assert plateau_value(cluster_degeneracies(s), 0.0) == pytest.approx(0.02, rel=1e-14)

    def test_degenerate_clusters_match_time_average(self):
        # integer levels make the form factor 2 pi periodic, so the average is exact
        c = DegeneracyClusters(np.array([-1.0, 1.0]), np.array([2, 2]), 1e-10)
        assert plateau_value(c, 0.0) == pytest.approx(0.5, rel=1e-14)
        assert time_average_unitary([-1, -1, 1, 1], 0.0, 2 * math.pi) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("beta", [0.0, 0.7, 2.0])
    def test_time_average_oracle(self, beta):
        levels = [-2.0, -2.0, -1.0, 1.0, 1.0, 1.0, 3.0]
        c = cluster_degeneracies(Spectrum(np.array(levels)))
        assert plateau_value(c, beta) == pytest.approx(time_average_unitary(levels, beta, 2 * math.pi), rel=1e-10)

    @pytest.mark.parametrize("beta", [0.0, 1.0, 5.0])
    def test_bgl_asymptotic_saturates_bound(self, beta, rng):
        e = np.sort(np.concatenate([[0.0], rng.uniform(0.2, 2.0, 5) * rng.choice([-1, 1], 5)]))
        s = Spectrum(e)
        expected = 1.0 / partition_function(s, beta).real
        assert plateau_value(cluster_degeneracies(s), beta, "bgl_asymptotic") == pytest.approx(expected, rel=1e-13)
        assert sff_bgl(s, beta, 1.0, 1e4) == pytest.approx(expected, rel=1e-9)

    @given(spectra(min_dim=2, max_dim=8), st.floats(0, 5))
    def test_bound_when_central_level_nonpositive(self, e, beta):
        c = cluster_degeneracies(Spectrum(e))
        star = c.energies[np.argmin(np.abs(c.energies))]
        if star > 0:
            return
        bound = 1.0 / partition_function(Spectrum(e), beta).real
        assert plateau_value(c, beta, "bgl_asymptotic") >= bound - 1e-12

    def test_finite_time_estimate_converges(self):
        c = DegeneracyClusters(np.array([-1.0, 0.0, 1.0]), np.array([2, 1, 3]), 1e-10)
        late = plateau_value_at(c, 1.0, 0.5, 1e4)
        assert late == pytest.approx(plateau_value(c, 1.0, "bgl_asymptotic"), rel=1e-12)
        assert plateau_value_at(c, 1.0, 0.0, 5.0) == pytest.approx(plateau_value(c, 1.0), rel=1e-12)

    def test_unknown_mode(self):
        c = DegeneracyClusters(np.array([0.0]), np.array([1]), 1e-10)
        with pytest.raises(InvalidArgumentError):
            plateau_value(c, 0.0, "median")


class TestKernel:
    def test_two_level_example(self):
        assert sff_via_kernel(TWO, 0.0, 1.0, 1.0, nodes=64) == pytest.approx(BGL_EXAMPLE, abs=1e-6)

    @pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
    def test_random_spectrum(self, t, rng):
        s = Spectrum(np.sort(rng.normal(size=16)))
        ref = sff_bgl(s, 1.0, 0.01, t)
        assert sff_via_kernel(s, 1.0, 0.01, t) == pytest.approx(ref, rel=1e-6)

    @pytest.mark.parametrize("kw", [{"gamma": 0.0, "t": 1.0}, {"gamma": 1.0, "t": 0.0}, {"gamma": 1.0, "t": 1.0, "nodes": 4}])
    def test_preconditions(self, kw):
        with pytest.raises(InvalidArgumentError):
            sff_via_kernel(TWO, 0.0, **kw)

    def test_nonconvergence_warns(self):
        s = Spectrum(np.linspace(-5, 5, 9))
        with pytest.warns(RuntimeWarning):
            sff_via_kernel(s, 0.0, 10.0, 100.0, nodes=8, max_nodes=16)

    def test_no_warning_when_converged(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            sff_via_kernel(TWO, 0.0, 1.0, 1.0)

    def test_small_form_factor_at_large_gamma_t(self):
        # F ~ 2e-7: the thermally dominant levels are filtered out, so a
        # real-axis quadrature would be limited by its ~1e-14 rounding floor
        e = np.array([-3.64397868, -3.30481471, -1.47323276, 0.44738617, 1.38418973])
        s, beta, t = Spectrum(e), 3.682433934778177, 0.20913857786939935
        gamma = 25.876185866173174 / t
        ref = sff_bgl(s, beta, gamma, t)
        assert ref < 1e-6
        assert sff_via_kernel(s, beta, gamma, t) == pytest.approx(ref, rel=1e-6)

    @pytest.mark.parametrize("beta", [0.0, 1.0, 5.0])
    @pytest.mark.parametrize("gt", [1e-4, 1e-1, 10.0, 100.0])
    def test_gamma_t_range(self, rng, beta, gt):
        s = Spectrum(np.sort(rng.normal(size=8)))
        t = 3.0
        assert sff_via_kernel(s, beta, gt / t, t) == pytest.approx(sff_bgl(s, beta, gt / t, t), rel=1e-6)


class TestLargeGammaT:
    def test_single_surviving_level(self):
        # at gamma t = 1e7 only the smallest |E| survives: F = p_min / Z(beta)
        e = np.array([3.22113146, 4.79514069])
        expected = 1.0 / (1.0 + math.exp(-5.0 * (e[1] - e[0])))
        assert sff_bgl(Spectrum(e), 5.0, 1.0, 1e6) == pytest.approx(expected, rel=1e-14)

    def test_power_filter_matches_bgl_far_out(self, rng):
        s = Spectrum(np.sort(rng.normal(scale=3.0, size=6)))
        t = np.logspace(3, 7, 9)
        a = sff_filtered(s, 1.0, FilterSpec.power(1.0, 2.0), t)
        assert np.allclose(a, sff_bgl(s, 1.0, 1.0, t), rtol=1e-14, atol=0)
