import math

import numpy as np
import pytest

from ftkreg import (
    GaussianIid,
    Grid,
    MarExpit,
    MarNone,
    OUParams,
    SimSpec,
    SpecInvalid,
    WienerDiff,
    calibrate_mar,
    gamma_lift,
    generate,
    legendre_poly,
    mar_probability,
    num_index,
    response_value,
    simulate_ou,
    sine_shape,
)
from ftkreg.simulate import LEGENDRE_GRID, SINE_GRID, _expit


def make_rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


class TestOu:
    def test_vanishing_noise_relaxes_to_mean(self):
        p = OUParams(theta=2.0, mu=5.0, sigma=1e-12, dt=0.01, z0=9.0)
        path = simulate_ou(p, 800, make_rng())
        expected = 5.0 + (9.0 - 5.0) * math.exp(-2.0 * 800 * 0.01)
        assert path[-1] == pytest.approx(expected, abs=1e-6)
        assert abs(path[-1] - 5.0) < 1e-5

    def test_long_run_mean_and_variance(self):
        p = OUParams()
        n = 1_000_000
        path = simulate_ou(p, n, make_rng(7))
        rho = math.exp(-p.theta * p.dt)
        n_eff = n * (1 - rho) / (1 + rho)
        se = p.stationary_sd / math.sqrt(n_eff)
        assert np.mean(path) == pytest.approx(5.0, abs=3 * se)
        assert np.var(path) == pytest.approx(12.25, rel=0.10)

    def test_matches_plain_recursion(self):
        p = OUParams(theta=1.3, mu=2.0, sigma=0.7, dt=0.05, z0=1.0)
        eps = np.random.default_rng(3).standard_normal(500)
        a = math.exp(-p.theta * p.dt)
        s = p.sigma * math.sqrt((1 - a * a) / (2 * p.theta))
        z, ref = p.z0, []
        for e in eps:
            z = p.mu + (z - p.mu) * a + s * e
            ref.append(z)

        class FixedRng:
            def standard_normal(self, n):
                return eps[:n]

        path = simulate_ou(p, 500, FixedRng())
        assert np.allclose(path, ref, rtol=1e-10, atol=1e-12)

    def test_euler_scheme_close_at_fine_step(self):
        p = OUParams(dt=0.0005)
        exact = simulate_ou(p, 2000, make_rng(5), "exact")
        euler = simulate_ou(p, 2000, make_rng(5), "euler")
        assert np.corrcoef(exact, euler)[0, 1] > 0.999


class TestNumIndex:
    @pytest.mark.parametrize("z,expected", [(0, 1), (1, 2), (-1, 3), (2, 4), (-2, 5), (3, 6)])
    def test_values(self, z, expected):
        assert num_index(z) == expected
        assert num_index(float(z)) == expected


class TestLegendre:
    def test_degree_zero(self):
        assert legendre_poly(0, 0.3) == 1.0
        assert legendre_poly(0, -1.0) == 1.0

    def test_value_at_one(self):
        for j in range(41):
            assert legendre_poly(j, 1.0) == pytest.approx(1.0, abs=1e-10)

    def test_p2(self):
        assert legendre_poly(2, 0.5) == pytest.approx(-0.125, abs=1e-14)

    def test_against_numpy(self):
        s = np.linspace(-1, 1, 101)
        for j in (1, 3, 7, 15):
            ref = np.polynomial.legendre.Legendre.basis(j)(s)
            assert np.allclose(legendre_poly(j, s), ref, rtol=1e-10, atol=1e-12)


class TestGammaLift:
    def test_integer_is_pure_polynomial(self):
        c = gamma_lift(2.0)
        expected = legendre_poly(num_index(2), LEGENDRE_GRID.points)
        assert np.allclose(c.values, expected, rtol=0, atol=1e-14)

    def test_half_blend(self):
        c = gamma_lift(0.5)
        expected = 0.5 * legendre_poly(1, LEGENDRE_GRID.points) + 0.5 * legendre_poly(
            2, LEGENDRE_GRID.points
        )
        assert np.allclose(c.values, expected, rtol=0, atol=1e-14)

    def test_continuity_at_integers(self):
        for k in (-2.0, 1.0, 3.0):
            below = gamma_lift(k - 1e-7)
            at = gamma_lift(k)
            assert np.max(np.abs(below.values - at.values)) < 1e-6

    def test_endpoint_identity(self):
        # every lifted curve hits P_j(1) = 1 blends at s = 1
        for z in (0.25, -1.7, 4.4):
            assert gamma_lift(z).values[-1] == pytest.approx(1.0, abs=1e-9)


class TestSineShape:
    def test_zero(self):
        assert np.all(sine_shape(0.0).values == 0.0)

    def test_endpoint(self):
        c = sine_shape(2.5)
        assert c.values[-1] == pytest.approx(2.5, abs=1e-12)

    def test_left_end_closed_form(self):
        c = sine_shape(1.0)
        assert c.values[0] == pytest.approx(1.0 + math.sqrt(3.0) / 2.0, abs=1e-10)


class TestResponse:
    def test_zero_curve(self):
        from ftkreg import Curve

        zero = Curve(SINE_GRID, np.zeros(100))
        assert response_value(zero, "integral_square") == 0.0
        assert response_value(zero, "deriv_integral_square") == 0.0

    def test_constant_on_legendre_interval(self):
        from ftkreg import Curve

        one = Curve(LEGENDRE_GRID, np.ones(400))
        assert response_value(one, "integral_square") == pytest.approx(2.0, rel=1e-12)

    def test_sine_telescoping(self):
        c = sine_shape(1.0)
        value = response_value(c, "deriv_integral_square")
        expected = (c.values[-1] - c.values[0]) ** 2
        assert value == pytest.approx(expected, abs=1e-3)
        assert expected == pytest.approx(0.75, abs=1e-9)


class TestMarProbability:
    def test_zero_curve(self):
        from ftkreg import Curve

        zero = Curve(LEGENDRE_GRID, np.zeros(400))
        assert mar_probability(zero) == 0.5

    def test_constant_one(self):
        from ftkreg import Curve

        one = Curve(LEGENDRE_GRID, np.ones(400))
        assert mar_probability(one) == pytest.approx(_expit(2.0), rel=1e-10)
        assert mar_probability(one) == pytest.approx(0.8808, abs=1e-4)

    def test_monotone_in_energy(self):
        from ftkreg import Curve

        values = [mar_probability(Curve(LEGENDRE_GRID, np.full(400, a))) for a in (0.0, 0.5, 1.0, 2.0)]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestCalibration:
    def test_hits_target_rate(self):
        for model, rate in (("legendre", 0.2), ("sine", 0.5)):
            law = calibrate_mar(model, rate, seed=123)
            # recompute the pilot missing rate on fresh draws
            ou = OUParams()
            rng = np.random.default_rng(9)
            zs = rng.normal(ou.mu, ou.stationary_sd, 50_000)
            if model == "legendre":
                from ftkreg.simulate import _energy_batch, _gamma_lift_batch

                energies = _energy_batch(_gamma_lift_batch(zs, LEGENDRE_GRID), LEGENDRE_GRID)
            else:
                from ftkreg.simulate import _energy_batch, _sine_shape_batch

                energies = _energy_batch(_sine_shape_batch(zs, SINE_GRID), SINE_GRID)
            achieved = float(np.mean(1.0 - _expit((energies - law.offset) / law.scale)))
            assert achieved == pytest.approx(rate, abs=0.01)


class TestSpec:
    def test_defaults_by_model(self):
        s1 = SimSpec(model="legendre", T=1.0, delta=0.005, seed=1)
        assert s1.grid == LEGENDRE_GRID
        assert s1.response == "integral_square"
        assert isinstance(s1.noise, WienerDiff)
        s2 = SimSpec(model="sine", T=2.0, delta=0.1, seed=1)
        assert s2.grid == SINE_GRID
        assert s2.response == "deriv_integral_square"
        assert isinstance(s2.noise, GaussianIid)

    def test_T_must_be_multiple(self):
        with pytest.raises(SpecInvalid):
            SimSpec(model="sine", T=1.05, delta=0.1, seed=1)

    def test_grid_must_match_model(self):
        with pytest.raises(SpecInvalid):
            SimSpec(model="sine", T=1.0, delta=0.1, seed=1, grid=Grid(0.0, 1.0, 100))

    def test_json_roundtrip(self):
        spec = SimSpec(
            model="legendre", T=2.0, delta=0.01, seed=5,
            mar=MarExpit(offset=0.3, scale=2.0), noise=GaussianIid(0.5),
        )
        back = SimSpec.from_dict(spec.to_dict())
        assert back == spec


class TestGenerate:
    def test_complete_when_no_mar(self):
        ds = generate(SimSpec(model="sine", T=3.0, delta=0.1, seed=2))
        assert ds.n == 30
        assert ds.n_observed() == 30

    def test_bit_reproducible(self):
        spec = SimSpec(model="legendre", T=1.0, delta=0.005, seed=42, mar=MarExpit(0.0, 0.1))
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a.values_matrix, b.values_matrix)
        assert np.array_equal(a.zetas, b.zetas)
        ya = [o.y for o in a.observations]
        yb = [o.y for o in b.observations]
        assert ya == yb

    def test_mar_toggle_keeps_covariates_and_responses(self):
        base = SimSpec(model="legendre", T=1.0, delta=0.005, seed=11)
        masked = SimSpec(
            model="legendre", T=1.0, delta=0.005, seed=11, mar=MarExpit(0.0, 0.1)
        )
        a, b = generate(base), generate(masked)
        assert np.array_equal(a.values_matrix, b.values_matrix)
        mask = b.zetas == 1
        ya = np.array([o.y for o in a.observations])
        assert np.array_equal(ya[mask], b.responses[mask])
        assert 0 < b.n_observed() < b.n

    def test_empirical_mar_rate(self):
        law = calibrate_mar("legendre", 0.2, seed=3)
        spec = SimSpec(model="legendre", T=50.0, delta=0.005, seed=8, mar=law)
        ds = generate(spec)
        from ftkreg.simulate import _energy_batch

        probs = _expit((_energy_batch(ds.values_matrix, ds.grid) - law.offset) / law.scale)
        achieved = 1.0 - ds.n_observed() / ds.n
        assert achieved == pytest.approx(float(np.mean(1.0 - probs)), abs=0.02)
        assert achieved == pytest.approx(0.2, abs=0.02)

    def test_wiener_diff_unit_lag_at_delta_one(self):
        spec = SimSpec(
            model="sine", T=4000.0, delta=1.0, seed=13, noise=WienerDiff()
        )
        ds = generate(spec)
        m_vals = np.array([response_value(o.x, "deriv_integral_square") for o in ds.observations])
        eps = ds.responses - m_vals
        assert np.var(eps) == pytest.approx(1.0, rel=0.1)
        assert abs(np.corrcoef(eps[:-1], eps[1:])[0, 1]) < 0.05

    def test_wiener_diff_overlap_correlation(self):
        # at delta = 0.5 the unit-lag differences overlap by half
        spec = SimSpec(model="sine", T=1500.0, delta=0.5, seed=14, noise=WienerDiff())
        ds = generate(spec)
        m_vals = np.array([response_value(o.x, "deriv_integral_square") for o in ds.observations])
        eps = ds.responses - m_vals
        corr = np.corrcoef(eps[:-1], eps[1:])[0, 1]
        assert corr == pytest.approx(0.5, abs=0.08)

    def test_gaussian_noise_sd(self):
        spec = SimSpec(
            model="sine", T=800.0, delta=0.2, seed=15, noise=GaussianIid(0.075)
        )
        ds = generate(spec)
        m_vals = np.array([response_value(o.x, "deriv_integral_square") for o in ds.observations])
        eps = ds.responses - m_vals
        assert np.std(eps) == pytest.approx(0.075, rel=0.1)

    def test_times_and_mesh(self):
        ds = generate(SimSpec(model="sine", T=2.0, delta=0.25, seed=1))
        assert ds.delta == 0.25
        assert ds.times[0] == pytest.approx(0.25)
        assert ds.times[-1] == pytest.approx(2.0)
