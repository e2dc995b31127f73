"""Evolution engines: unitary/Lindblad integration, injection protocol, steady states."""

import numpy as np
import pytest

from svlaser.algebra import build_bogoliubov, generalized_coherent, generalized_vacuum
from svlaser.dynamics import (
    InjectionSchedule,
    IntegratorConfig,
    TimeSeries,
    detect_steady_state,
    evolve_lindblad,
    evolve_pure,
    liouvillian_steady_state,
    run_injection,
)
from svlaser.errors import (
    DegenerateSteadyStateError,
    InvalidSpaceError,
    NumericalFailureError,
    StiffnessError,
    UnphysicalParameterError,
)
from svlaser.hilbert import FockSpace, StateVector, annihilation
from svlaser.models import (
    EffectiveParams,
    EngineeredReservoirParams,
    LaserRateParams,
    _dissipator,
    effective_hamiltonian,
    engineered_reservoir_generator,
    laser_generator,
)

RNG = np.random.default_rng(11)


class TestEvolvePure:
    def test_zero_hamiltonian_keeps_state(self):
        psi0 = StateVector(RNG.normal(size=6) + 1j * RNG.normal(size=6), normalize=True)
        res = evolve_pure(np.zeros((6, 6)), psi0, 5.0, n_samples=11)
        assert np.allclose(res.final_state.amplitudes, psi0.amplitudes, atol=1e-12)

    def test_rabi_oscillation(self):
        # resonant exchange in the 1-excitation sector: <sigma_ee> = cos^2(g t)
        g = 0.8
        sp = FockSpace(3)
        pair = build_bogoliubov(0.0, sp)
        h = effective_hamiltonian(EffectiveParams(g=g, kappa=0.0), pair)
        psi0 = np.zeros(6, dtype=complex)
        psi0[1 * 3 + 0] = 1.0  # |e> ⊗ |0>
        proj_e = np.kron(np.diag([0.0, 1.0]), np.eye(3))
        res = evolve_pure(h, StateVector(psi0), 6.0,
                          observers={"ee": lambda p: np.real(p.conj() @ proj_e @ p)},
                          n_samples=61)
        assert np.max(np.abs(res.series["ee"].values - np.cos(g * res.times) ** 2)) < 1e-7
        assert res.stats["norm_drift"] < 1e-8

    def test_time_reversibility(self):
        sp = FockSpace(12)
        pair = build_bogoliubov(0.5, sp)
        h = effective_hamiltonian(EffectiveParams(g=1.0, kappa=0.5), pair)
        psi0 = np.zeros(24, dtype=complex)
        psi0[12] = 1.0
        fwd = evolve_pure(h, StateVector(psi0), 4.0, n_samples=5)
        back = evolve_pure(-1.0 * h, fwd.final_state, 4.0, n_samples=5)
        assert np.linalg.norm(back.final_state.amplitudes - psi0) < 1e-7

    def test_harmonic_path_matches_static(self):
        # a single zero-frequency block must reproduce the static integrator
        sp = FockSpace(8)
        pair = build_bogoliubov(0.3, sp)
        h = effective_hamiltonian(EffectiveParams(g=0.9, kappa=0.3), pair)
        psi0 = np.zeros(16, dtype=complex)
        psi0[8] = 1.0
        stat = evolve_pure(h, StateVector(psi0), 3.0, n_samples=7)
        harm = evolve_pure([(0.0, h.matrix)], StateVector(psi0), 3.0, n_samples=7)
        assert np.linalg.norm(stat.final_state.amplitudes
                              - harm.final_state.amplitudes) < 1e-8

    def test_harmonic_two_tone_against_generic_stepper(self):
        # compiled kernel vs. the plain numpy right-hand side
        from svlaser._integrators import integrate_adaptive, integrate_harmonic
        dim = 5
        m1 = RNG.normal(size=(dim, dim)) + 1j * RNG.normal(size=(dim, dim))
        terms = [(3.0, m1), (-3.0, m1.conj().T)]
        psi0 = np.zeros(dim, dtype=complex)
        psi0[0] = 1.0
        ts = np.linspace(0, 2.0, 9)
        out_h, _ = integrate_harmonic(terms, psi0, 0.0, ts, rtol=1e-10, atol=1e-12)

        def f(t, y):
            return -1j * ((np.exp(3j * t) * m1 + np.exp(-3j * t) * m1.conj().T) @ y)

        out_g, _ = integrate_adaptive(f, psi0, 0.0, ts, rtol=1e-10, atol=1e-12)
        assert np.max(np.abs(out_h - out_g)) < 1e-7

    def test_max_step_is_honored(self):
        sp = FockSpace(4)
        pair = build_bogoliubov(0.0, sp)
        h = effective_hamiltonian(EffectiveParams(g=0.1, kappa=0.0), pair)
        psi0 = np.zeros(8, dtype=complex)
        psi0[4] = 1.0
        cfg = IntegratorConfig(max_step=0.01)
        res = evolve_pure(h, StateVector(psi0), 1.0, cfg, n_samples=3)
        assert res.stats["n_accepted"] >= 100

    def test_stiffness_error_on_underflow(self):
        with pytest.raises(StiffnessError):
            evolve_pure(np.eye(3) * 1.0, StateVector([1, 0, 0]), 1.0,
                        IntegratorConfig(min_step=0.5), n_samples=3)


class TestEvolveLindblad:
    def test_pure_loss_decay(self):
        # <n>(t) = e^{-C t} starting from |1>
        dim = 5
        sp = FockSpace(dim)
        a = annihilation(sp).matrix
        ada = a.conj().T @ a
        C = 0.7
        rhs = lambda r: (C / 2.0) * _dissipator(a, ada, r)
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[1, 1] = 1.0
        n_op = np.diag(np.arange(dim, dtype=float))
        res = evolve_lindblad(rhs, rho0, 3.0,
                              observers={"n": lambda r: np.real(np.sum(n_op * r.T))},
                              n_samples=31)
        assert np.max(np.abs(res.series["n"].values - np.exp(-C * res.times))) < 1e-8
        assert res.stats["trace_drift"] < 1e-8

    def test_zero_generator_constant(self):
        rho0 = np.diag([0.25, 0.25, 0.5]).astype(complex)
        res = evolve_lindblad(lambda r: np.zeros_like(r), rho0, 2.0, n_samples=5)
        assert np.allclose(res.final_state.matrix, rho0, atol=1e-14)

    def test_engineered_reservoir_reaches_dark_state(self):
        # from a mixed thermal-like start the unique dark state of D[A] wins
        dim = 40
        pair = build_bogoliubov(0.6, FockSpace(dim))
        rhs = engineered_reservoir_generator(
            EngineeredReservoirParams(Gamma=1.0, Gamma_tilde=0.0), pair)
        nbar = 0.4
        probs = (nbar / (1 + nbar)) ** np.arange(dim)
        rho0 = np.diag(probs / probs.sum()).astype(complex)
        res = evolve_lindblad(rhs, rho0, 40.0, n_samples=9)
        vac = generalized_vacuum(pair).amplitudes
        fid = np.real(vac.conj() @ res.final_state.matrix @ vac)
        assert fid >= 1 - 1e-6

    def test_hermiticity_drift_logged(self):
        dim = 6
        pair = build_bogoliubov(0.3, FockSpace(dim))
        rhs = engineered_reservoir_generator(
            EngineeredReservoirParams(Gamma=1.0, Gamma_tilde=0.2), pair)
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[2, 2] = 1.0
        res = evolve_lindblad(rhs, rho0, 5.0, n_samples=6)
        assert res.stats["herm_drift_rate"] < 1e-8


class TestInjection:
    def test_zero_atoms_returns_initial_field(self):
        pair = build_bogoliubov(0.6, FockSpace(40))
        vac = generalized_vacuum(pair)
        rho0 = np.outer(vac.amplitudes, vac.amplitudes.conj())
        res = run_injection(InjectionSchedule(92.0, 0), EffectiveParams(1.0, 0.6),
                            0.35, 0.5, pair, rho_field0=rho0)
        assert np.allclose(res.final_field.matrix, rho0, atol=1e-12)

    def test_schedule_invariants(self):
        s = InjectionSchedule(92.0, 10)
        assert s.interaction_time * s.atom_rate_k == 1.0
        with pytest.raises(UnphysicalParameterError):
            InjectionSchedule(0.0, 5)
        with pytest.raises(UnphysicalParameterError):
            InjectionSchedule(1.0, -2)

    def test_trace_preserved_across_run(self):
        pair = build_bogoliubov(0.6, FockSpace(24))
        res = run_injection(InjectionSchedule(40.0, 120), EffectiveParams(1.0, 0.6),
                            0.35, 0.5, pair)
        assert res.stats["trace_drift"] < 1e-7

    def test_kappa_zero_control_is_nearly_poissonian(self):
        # conventional-laser control: tiny thermal field, |Q| well below 0.2
        dim = 20
        pair = build_bogoliubov(0.0, FockSpace(dim))
        n_op = np.diag(np.arange(dim, dtype=float))
        n2_op = n_op @ n_op
        obs = {"n": lambda r: np.real(np.sum(n_op * r.T)),
               "n2": lambda r: np.real(np.sum(n2_op * r.T))}
        res = run_injection(InjectionSchedule(92.0, 92 * 12), EffectiveParams(1.0, 0.0),
                            0.35, 0.5, pair, observers=obs)
        n = res.series["n"].values[-1]
        n2 = res.series["n2"].values[-1]
        q = (n2 - n * n) / n - 1.0
        assert n > 1e-3
        assert abs(q) <= 0.2
        assert q > 0  # approaches Poissonian from above


class TestSteadyDetection:
    def test_constant_series(self):
        t = np.linspace(0, 10, 101)
        det = detect_steady_state(TimeSeries("x", t, np.full(101, 2.0)), 1.0, 1e-6)
        assert det.reached and det.t_steady == t[0]

    def test_exponential_series(self):
        t = np.linspace(0, 20, 2001)
        det = detect_steady_state(TimeSeries("x", t, np.exp(-t)), 1.0, 1e-3)
        # flat once e^{-t}(e^w - 1) <= eps: t* = ln((e-1)/eps) ~ ln(1/eps)
        expected = np.log((np.e - 1) / 1e-3)
        assert det.reached
        assert det.t_steady == pytest.approx(expected, abs=0.05)

    def test_never_reached(self):
        t = np.linspace(0, 10, 101)
        det = detect_steady_state(TimeSeries("x", t, t), 1.0, 1e-3)
        assert not det.reached and np.isnan(det.t_steady)

    def test_requires_two_windows(self):
        t = np.linspace(0, 1.5, 16)
        with pytest.raises(ValueError):
            detect_steady_state(TimeSeries("x", t, np.zeros(16)), 1.0, 1e-3)


@pytest.mark.slow
class TestSteadyDetectionOnLaserSeries:
    @pytest.mark.xfail(
        strict=True,
        reason="Stated anchor: eps=0.02/window=1 detection at t <= 3.5/g. The "
               "faithful per-atom protocol relaxes at the cavity-loss rate "
               "C = 0.35 g, so strict detection happens near t = 7.5/g "
               "(see decisions ledger).")
    def test_strict_detection_anchor(self, laser_run):
        obs = laser_run["observables"]
        series = TimeSeries("n", obs["t_in_g_units"], obs["mean_photon_number"])
        det = detect_steady_state(series, window=1.0, eps=0.02)
        assert det.reached and det.t_steady <= 3.5


class TestLiouvillianSteadyState:
    def test_pure_loss_gives_vacuum_projector(self):
        dim = 10
        a = annihilation(FockSpace(dim)).matrix
        ada = a.conj().T @ a
        ss = liouvillian_steady_state(lambda r: 0.5 * _dissipator(a, ada, r), dim)
        target = np.zeros((dim, dim))
        target[0, 0] = 1.0
        assert np.max(np.abs(ss.matrix - target)) < 1e-12

    def test_engineered_reservoir_dark_state(self):
        # kappa小 keeps the truncated kernel residual below the 1e-8 bar at dim 24
        dim, kappa = 24, 0.25
        pair = build_bogoliubov(kappa, FockSpace(dim))
        rhs = engineered_reservoir_generator(
            EngineeredReservoirParams(Gamma=1.0, Gamma_tilde=0.0), pair)
        ss = liouvillian_steady_state(rhs, dim)
        vac = generalized_vacuum(pair).amplitudes
        assert np.max(np.abs(ss.matrix - np.outer(vac, vac.conj()))) < 1e-8

    def test_dim_cap(self):
        with pytest.raises(InvalidSpaceError):
            liouvillian_steady_state(lambda r: r, 25)

    def test_degenerate_null_space_reported(self):
        with pytest.raises(DegenerateSteadyStateError, match="dimension"):
            liouvillian_steady_state(lambda r: np.zeros_like(r), 3)

    @pytest.mark.xfail(
        strict=True,
        reason="Stated property: far-above-threshold null state matches the "
               "coherent-amplitude prediction at fidelity >= 0.9.  At the "
               "quoted rate ratios the 4th-order saturation dominates the gain "
               "(B = 16 A), the detailed-balance ratio (A - B(n+1))/C is "
               "negative for every n, and the exact null state is an "
               "unphysical truncation-edge artifact (see decisions ledger).")
    def test_laser_far_above_threshold_null_state(self):
        dim, kappa = 20, 0.4
        pair = build_bogoliubov(kappa, FockSpace(dim))
        rates = LaserRateParams.from_pump(92.0, 0.5, 0.35)
        ss = liouvillian_steady_state(laser_generator(rates, pair), dim,
                                      positivity_tol=1e-4)
        alpha = np.sqrt((rates.gain_A - rates.loss_C) / rates.saturation_B)
        coh = generalized_coherent(pair, alpha).amplitudes
        fid = float(np.real(coh.conj() @ ss.matrix @ coh))
        assert fid >= 0.9

    def test_injection_state_matches_coherent_prediction(self):
        # the cross-check the rate coefficients do support: the sequential-atom
        # steady state overlaps the predicted generalized coherent state
        dim, kappa = 20, 0.4
        pair = build_bogoliubov(kappa, FockSpace(dim))
        rates = LaserRateParams.from_pump(92.0, 0.5, 0.35)
        res = run_injection(InjectionSchedule(92.0, 92 * 12),
                            EffectiveParams(1.0, kappa), rates.loss_C, rates.gamma,
                            pair)
        alpha = np.sqrt((rates.gain_A - rates.loss_C) / rates.saturation_B)
        coh = generalized_coherent(pair, alpha).amplitudes
        fid = float(np.real(coh.conj() @ res.final_field.matrix @ coh))
        assert fid >= 0.9


class TestConvergence:
    def test_halved_tolerances_change_little(self):
        dim = 16
        pair = build_bogoliubov(0.6, FockSpace(dim))
        rhs = engineered_reservoir_generator(
            EngineeredReservoirParams(Gamma=1.0, Gamma_tilde=0.1), pair)
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[0, 0] = 1.0
        n_op = np.diag(np.arange(dim, dtype=float))
        runs = []
        for cfg in (IntegratorConfig(), IntegratorConfig().halved()):
            res = evolve_lindblad(rhs, rho0, 8.0, cfg,
                                  observers={"n": lambda r: np.real(np.sum(n_op * r.T))},
                                  n_samples=17)
            runs.append(res.series["n"].values)
        assert np.max(np.abs(runs[0] - runs[1])) < 1e-8

    def test_fixed_step_mode_is_deterministic(self):
        dim = 8
        pair = build_bogoliubov(0.3, FockSpace(dim))
        rhs = engineered_reservoir_generator(
            EngineeredReservoirParams(Gamma=1.0, Gamma_tilde=0.0), pair)
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[1, 1] = 1.0
        cfg = IntegratorConfig(fixed_step=0.01)
        a = evolve_lindblad(rhs, rho0, 2.0, cfg, n_samples=5).final_state.matrix
        b = evolve_lindblad(rhs, rho0, 2.0, cfg, n_samples=5).final_state.matrix
        assert np.array_equal(a, b)
