"""Lindblad integration: accuracy, invariants, frame handling, EOM identity."""

from fractions import Fraction

import numpy as np
import pytest

from anharme.models import FlatBath, Flavor, build_case1, build_case1_number_basis
from anharme.simulate import (
    FockSuperposition,
    FockTruncation,
    Occupation,
    PhaseSpace,
    ProductState,
    QuadratureX,
    QuadratureY,
    SimulationConfig,
    TruncationLeak,
    Vacuum,
    compare_flavors,
    evolve,
    quadrature_eom_check,
    random_density_matrix,
)

F = Fraction
TWO_PI = 2 * np.pi


def _fig_state():
    return FockSuperposition([0.5, 0.5, 0.5, 0.5])


class TestStates:
    def test_vacuum(self):
        psi = Vacuum().statevector(FockTruncation((3, 4)))
        assert psi[0] == 1.0 and np.linalg.norm(psi) == 1.0

    def test_superposition_normalized(self):
        psi = FockSuperposition([1, 1]).statevector(FockTruncation(4))
        assert np.allclose(psi[:2], [2**-0.5, 2**-0.5])

    def test_superposition_on_second_mode(self):
        psi = FockSuperposition([0, 1], mode=1).statevector(FockTruncation((2, 3)))
        assert psi[1] == 1.0

    def test_product_state(self):
        psi = ProductState([[1, 1], [1, 0]]).statevector(FockTruncation((2, 2)))
        assert np.allclose(psi, [2**-0.5, 0, 2**-0.5, 0])

    def test_state_must_fit(self):
        with pytest.raises(ValueError):
            FockSuperposition([1, 1, 1]).statevector(FockTruncation(2))


class TestTruncation:
    def test_cap(self):
        with pytest.raises(ValueError):
            FockTruncation((64, 65))

    def test_mode_populations(self):
        trunc = FockTruncation((2, 2))
        rho = np.diag([0.5, 0.2, 0.2, 0.1]).astype(complex)
        pops0 = trunc.mode_level_populations(rho, 0)
        assert np.allclose(pops0, [0.7, 0.3])
        pops1 = trunc.mode_level_populations(rho, 1)
        assert np.allclose(pops1, [0.7, 0.3])


class TestEvolveAccuracy:
    def test_linear_decay_is_exponential(self):
        model = build_case1(0, 1, FlatBath(0.08), Flavor.LINEAR)
        cfg = SimulationConfig(
            t_final=3 * TWO_PI,
            dt=TWO_PI / 200,
            record_every=10,
            initial_state=FockSuperposition([0, 1]),
        )
        res = evolve(model, FockTruncation(8), cfg)
        expected = np.exp(-0.08 * res.times)
        assert np.max(np.abs(res.series("n_a") - expected)) < 1e-6

    def test_step_halving_convergence(self):
        model = build_case1(F(1, 5), 1, FlatBath(0.08), Flavor.EFFECTIVE)
        cfg = dict(t_final=TWO_PI, record_every=10**9, initial_state=_fig_state())
        vals = {}
        for divisor in (100, 200, 400):
            res = evolve(
                model,
                FockTruncation(14),
                SimulationConfig(dt=TWO_PI / divisor, **cfg),
            )
            vals[divisor] = res.series("n_a")[-1]
        assert abs(vals[200] - vals[100]) < 1e-6
        # RK4: halving dt cuts the error by about 2^4
        err_coarse = abs(vals[100] - vals[400])
        err_fine = abs(vals[200] - vals[400])
        assert 8 < err_coarse / err_fine < 32

    def test_trace_and_hermiticity_drift(self):
        model = build_case1(F(1, 5), 1, FlatBath(0.08), Flavor.EFFECTIVE)
        cfg = SimulationConfig(
            t_final=3 * TWO_PI, dt=TWO_PI / 200, record_every=5, initial_state=_fig_state()
        )
        res = evolve(model, FockTruncation(14), cfg)
        assert res.stats["trace_drift"] <= 1e-7
        assert res.stats["hermiticity_drift"] <= 1e-10

    def test_linear_energy_monotone(self):
        model = build_case1(0, 1, FlatBath(0.08), Flavor.LINEAR)
        cfg = SimulationConfig(
            t_final=2 * TWO_PI, dt=TWO_PI / 200, record_every=5, initial_state=_fig_state()
        )
        res = evolve(model, FockTruncation(12), cfg)
        n = res.series("n_a")
        assert np.all(np.diff(n) <= 1e-12)

    def test_truncation_leak_raises(self):
        model = build_case1(0, 1, FlatBath(0.08), Flavor.LINEAR)
        cfg = SimulationConfig(
            t_final=1.0, dt=0.01, initial_state=FockSuperposition([0, 0, 1])
        )
        with pytest.raises(TruncationLeak):
            evolve(model, FockTruncation(4), cfg)

    def test_positivity_monitor_warns_not_aborts(self):
        # the first-order frame transform makes rho(0) slightly non-positive;
        # the monitor must warn (never raise) and record the floor
        model = build_case1(F(1, 5), 1, FlatBath(0.08), Flavor.EFFECTIVE)
        cfg = SimulationConfig(
            t_final=TWO_PI,
            dt=TWO_PI / 200,
            record_every=20,
            initial_state=_fig_state(),
            positivity_check_every=1,
        )
        with pytest.warns(UserWarning, match="not exactly CP"):
            res = evolve(model, FockTruncation(14), cfg)
        assert res.stats["min_eigenvalue"] < 0


class TestFlavorComparison:
    def test_default_dt_bound_once_across_flavors(self):
        # flavors have slightly different corrected frequencies; the shared
        # comparison must still produce aligned series when dt is unset
        bath = FlatBath(0.08)
        models = {f.value: build_case1(F(1, 5), 1, bath, f) for f in Flavor}
        cfg = SimulationConfig(t_final=2.0, record_every=7, initial_state=_fig_state())
        out = compare_flavors(models, FockTruncation(14), cfg)
        lengths = {name: len(res.times) for name, res in out.items()}
        assert len(set(lengths.values())) == 1
        dts = {res.stats["dt"] for res in out.values()}
        assert len(dts) == 1

    def test_epsilon_zero_pointwise_identical(self):
        bath = FlatBath(0.08)
        models = {f.value: build_case1(0, 1, bath, f) for f in Flavor}
        cfg = SimulationConfig(
            t_final=TWO_PI, dt=TWO_PI / 100, record_every=10, initial_state=_fig_state()
        )
        out = compare_flavors(models, FockTruncation(12), cfg)
        base = out["linear"].series("n_a")
        for name in ("kerr", "effective"):
            assert np.max(np.abs(out[name].series("n_a") - base)) < 1e-10

    def test_effective_decays_faster_from_first_excited(self):
        # single quantum in the directly damped mode: the corrected
        # single-photon channel empties it faster than the linear theory
        bath = FlatBath(0.08)
        models = {
            f.value: build_case1(F(1, 5), 1, bath, f)
            for f in (Flavor.LINEAR, Flavor.EFFECTIVE)
        }
        cfg = SimulationConfig(
            t_final=3 * TWO_PI,
            dt=TWO_PI / 200,
            record_every=10,
            initial_state=FockSuperposition([0, 1]),
        )
        out = compare_flavors(models, FockTruncation(10), cfg)
        t = out["linear"].times
        window = t >= 0.5 * TWO_PI
        n_lin = out["linear"].series("n_a")[window]
        n_eff = out["effective"].series("n_a")[window]
        assert np.all(n_eff < n_lin)

    def test_kerr_populations_match_linear(self):
        bath = FlatBath(0.08)
        models = {
            f.value: build_case1(F(1, 5), 1, bath, f)
            for f in (Flavor.LINEAR, Flavor.KERR)
        }
        cfg = SimulationConfig(
            t_final=2 * TWO_PI, dt=TWO_PI / 200, record_every=10, initial_state=_fig_state()
        )
        out = compare_flavors(models, FockTruncation(14), cfg)
        dev = np.abs(out["kerr"].series("n_a") - out["linear"].series("n_a"))
        assert np.max(dev) < 1e-9

    def test_phase_space_orbits(self):
        # no dissipation: linear orbit circular, effective clearly deformed
        bath = FlatBath(0.0)
        models = {
            f.value: build_case1(F(1, 5), 1, bath, f)
            for f in (Flavor.LINEAR, Flavor.KERR, Flavor.EFFECTIVE)
        }
        cfg = SimulationConfig(
            t_final=TWO_PI,
            dt=TWO_PI / 400,
            record_every=4,
            initial_state=_fig_state(),
            observables=(PhaseSpace(0),),
        )
        out = compare_flavors(models, FockTruncation(14), cfg)
        def radius_var(res):
            r = np.hypot(res.series("x_a"), res.series("y_a"))
            return (r.max() - r.min()) / r.mean()
        assert radius_var(out["linear"]) < 1e-9
        assert radius_var(out["kerr"]) < 0.04
        assert radius_var(out["effective"]) > 0.08

    def test_frame_transform_toggle(self):
        model = build_case1(F(1, 5), 1, FlatBath(0.08), Flavor.EFFECTIVE)
        base = dict(
            t_final=0.1, dt=0.05, initial_state=_fig_state(), observables=(Occupation(0),)
        )
        on = evolve(model, FockTruncation(14), SimulationConfig(**base))
        off = evolve(
            model,
            FockTruncation(14),
            SimulationConfig(apply_frame_transform=False, **base),
        )
        # transformed initial expectation differs from the bare one only at O(eps^2)
        assert on.series("n_a")[0] != off.series("n_a")[0]
        assert abs(on.series("n_a")[0] - off.series("n_a")[0]) < 0.2**2 * 10


class TestNumberBasisEquivalence:
    def test_flat_bath_occupation_matches_compact(self):
        eps, s0 = 0.1, 0.08
        compact = build_case1(eps, 1, FlatBath(s0), Flavor.EFFECTIVE)
        number = build_case1_number_basis(eps, 1, FlatBath(s0), 8)
        cfg = SimulationConfig(
            t_final=2 * TWO_PI,
            dt=TWO_PI / 200,
            record_every=10,
            initial_state=_fig_state(),
            apply_frame_transform=False,
        )
        res_c = evolve(compact, FockTruncation(8), cfg)
        res_n = evolve(number, FockTruncation(8), cfg)
        assert np.max(np.abs(res_c.series("n_a") - res_n.series("n_a"))) < 1e-6


class TestQuadratureEom:
    def test_vacuum_residual_zero(self):
        rho = np.zeros((12, 12), complex)
        rho[0, 0] = 1.0
        resid = quadrature_eom_check(0.2, 1.0, 0.04, FockTruncation(12), [rho])
        assert resid < 1e-12

    def test_random_states(self):
        rng = np.random.default_rng(50)
        samples = [random_density_matrix(12, rng) for _ in range(20)]
        resid = quadrature_eom_check(0.2, 1.0, 0.04, FockTruncation(12), samples)
        assert resid <= 1e-9

    def test_epsilon_zero_damped_oscillator(self):
        rng = np.random.default_rng(51)
        samples = [random_density_matrix(10, rng) for _ in range(5)]
        resid = quadrature_eom_check(0.0, 1.3, 0.07, FockTruncation(10), samples)
        assert resid < 1e-12


class TestObservables:
    def test_quadrature_names_and_values(self):
        model = build_case1(0, 1, FlatBath(0.0), Flavor.LINEAR)
        cfg = SimulationConfig(
            t_final=TWO_PI / 4,
            dt=TWO_PI / 400,
            record_every=100,
            initial_state=FockSuperposition([1, 1]),
            observables=(QuadratureX(0), QuadratureY(0), Occupation(0)),
        )
        res = evolve(model, FockTruncation(6), cfg)
        # coherent-like rotation: X(0) = 1, after a quarter period X -> 0, Y -> -1
        assert res.series("x_a")[0] == pytest.approx(1.0)
        assert res.series("y_a")[0] == pytest.approx(0.0, abs=1e-12)
        assert res.series("x_a")[-1] == pytest.approx(0.0, abs=1e-6)
        assert res.series("y_a")[-1] == pytest.approx(-1.0, abs=1e-6)
