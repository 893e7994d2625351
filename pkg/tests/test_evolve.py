import numpy as np
import pytest

from cavityphase import rwa
from cavityphase.cavity import CavityConfig, build_basis, cylindrical
from cavityphase.evolve import (
    IntegrityError, PeriodPropagator, StateVector, energy, evolve,
    ground_state, integrate_direct, max_energy,
)

CYL = cylindrical()
BASIS = build_basis(CYL, 16)
W21 = BASIS.omega_nk(2, 1)
W41 = BASIS.omega_nk(4, 1)


def resonant_cfg(n, eps=0.01, size=16):
    return CavityConfig(CYL, eps, BASIS.omega_nk(n, 1), size)


class TestStaticWall:
    def test_ground_state_is_stationary(self):
        cfg = CavityConfig(CYL, 0.0, 9.0, 16)
        traj = evolve(cfg, ground_state(16), 4 * cfg.tau, steps_per_period=64)
        assert np.max(np.abs(np.abs(traj.coeffs[:, 0]) - 1.0)) < 1e-12
        assert np.max(np.abs(traj.coeffs[:, 1:])) < 1e-12
        assert np.max(np.abs(traj.energy - BASIS.energies[0])) < 1e-10

    def test_energy_of_ground_state(self):
        cfg = CavityConfig(CYL, 0.0, 9.0, 16)
        assert energy(ground_state(16), 0.3, cfg, BASIS) == pytest.approx(
            float(BASIS.energies[0]), rel=1e-14)


class TestEnergyExpectation:
    def test_cross_term_vanishes_at_turning_points(self):
        cfg = resonant_cfg(2)
        rng = np.random.default_rng(7)
        a = rng.normal(size=16) + 1j * rng.normal(size=16)
        a /= np.linalg.norm(a)
        t_turn = 0.25 * cfg.tau  # cos(omega t) = 0
        from cavityphase.cavity import alpha_at
        diag = float(alpha_at(t_turn, cfg)) ** 2 * float(
            np.sum(BASIS.energies * np.abs(a) ** 2))
        assert energy(a, t_turn, cfg, BASIS) == pytest.approx(diag, rel=1e-12)

    def test_accepts_state_vector(self):
        cfg = resonant_cfg(2)
        sv = StateVector(coeffs=ground_state(16), t=0.0)
        assert energy(sv, 0.0, cfg, BASIS) == pytest.approx(
            float(BASIS.energies[0]), rel=1e-14)


@pytest.fixture(scope="module")
def n4_run():
    cfg = resonant_cfg(4)
    sol = rwa.make_rabi(rwa.ResonanceSpec(k=1, n=4, N=1, omega_nk=W41),
                        0.01, float(BASIS.eta[3, 0]))
    T = np.pi / sol.Gamma
    traj = evolve(cfg, ground_state(16), 1.25 * T, steps_per_period=200)
    return cfg, sol, T, traj


class TestResonantEvolution:
    def test_population_inversion(self, n4_run):
        _, sol, T, traj = n4_run
        p4 = np.abs(traj.coeffs[:, 3]) ** 2
        assert p4.max() > 0.95
        t_peak = traj.times[traj.coeff_index[np.argmax(p4)]]
        assert t_peak == pytest.approx(T / 2, rel=0.1)

    def test_norm_drift_budget(self, n4_run):
        _, _, _, traj = n4_run
        assert np.max(np.abs(traj.norm - 1.0)) < 1e-8

    def test_max_energy_reaches_target_level(self, n4_run):
        cfg, _, T, traj = n4_run
        result = max_energy(traj, min_span=1.2 * T)
        assert result.span_ok
        scaled = ((1 - cfg.epsilon) ** 2 * result.value - BASIS.energies[0]) \
            / (W41)
        assert scaled == pytest.approx(1.0, abs=0.05)

    def test_two_level_dominance(self):
        cfg = resonant_cfg(2)
        sol = rwa.make_rabi(rwa.ResonanceSpec(k=1, n=2, N=1, omega_nk=W21),
                            0.01, float(BASIS.eta[1, 0]))
        traj = evolve(cfg, ground_state(16), 1.2 * np.pi / sol.Gamma,
                      steps_per_period=200)
        leak = (np.sum(np.abs(traj.coeffs) ** 2, axis=1)
                - np.abs(traj.coeffs[:, 0]) ** 2 - np.abs(traj.coeffs[:, 1]) ** 2)
        assert np.max(leak) < 0.05

    def test_rwa_population_agreement(self):
        cfg = resonant_cfg(2)
        sol = rwa.make_rabi(rwa.ResonanceSpec(k=1, n=2, N=1, omega_nk=W21),
                            0.01, float(BASIS.eta[1, 0]))
        traj = evolve(cfg, ground_state(16), 1.05 * np.pi / sol.Gamma,
                      steps_per_period=200, coeff_stride=200)
        times = traj.coeff_times()
        p_num = np.abs(traj.coeffs[:, 1]) ** 2
        p_rwa = np.abs(rwa.rabi_amplitudes(times, sol, 0.0)[1]) ** 2
        assert np.max(np.abs(p_num - p_rwa)) < 0.02

    def test_off_resonant_leakage_bounded_by_tails(self):
        # midway between peaks the transfer stays on the Lorentzian tails
        omega = 45.0
        cfg = CavityConfig(CYL, 0.01, omega, 16)
        traj = evolve(cfg, ground_state(16), 600 * cfg.tau, steps_per_period=64,
                      coeff_stride=64)
        excited = np.sum(np.abs(traj.coeffs[:, 1:]) ** 2, axis=1)
        bound = 0.0
        for n in range(2, 9):
            for N in (1, 2, 3):
                # tails evaluated with the on-peak width of each resonance
                spec = rwa.ResonanceSpec(k=1, n=n, N=N,
                                         omega_nk=BASIS.omega_nk(n, 1))
                g = rwa.width(spec, 0.01, float(BASIS.eta[n - 1, 0]))
                bound += rwa.lorentzian(omega, spec, g)
        assert np.max(excited) < 3.0 * bound + 1e-4


class TestIntegrity:
    def test_fast_propagator_matches_generic(self):
        import cavityphase._fastprop as fp
        from cavityphase.evolve import coefficient_rhs
        from cavityphase.integrate import integrate_adaptive
        if not fp.HAVE_NUMBA:
            pytest.skip("numba unavailable; only the generic path exists")
        cfg = resonant_cfg(2)
        f = coefficient_rhs(cfg, BASIS)
        ts = [j * cfg.tau / 4 for j in range(5)]
        _, _, ref = integrate_adaptive(f, 0.0, np.eye(16, dtype=complex),
                                       cfg.tau, rtol=1e-10, atol=1e-12,
                                       sample_times=ts)
        fast = fp.propagator_samples(BASIS.energies, BASIS.eta, cfg.epsilon,
                                     cfg.omega, ts, 1e-10, 1e-12)
        dev = max(np.max(np.abs(a - b)) for a, b in zip(ref, fast))
        assert dev < 1e-10

    def test_time_reversal(self):
        cfg = resonant_cfg(2)
        a0 = ground_state(16)
        a1 = integrate_direct(cfg, a0, 0.0, 8 * cfg.tau)
        back = integrate_direct(cfg, a1, 8 * cfg.tau, 0.0)
        assert np.linalg.norm(back - a0) < 1e-6

    def test_direct_vs_propagator_path(self):
        cfg = resonant_cfg(2)
        prop = PeriodPropagator(cfg, BASIS, 4)
        a_prop = prop.boundary_states(ground_state(16), np.array([3.0]))[:, 0]
        a_direct = integrate_direct(cfg, ground_state(16), 0.0, 3 * cfg.tau)
        assert np.max(np.abs(a_prop - a_direct)) < 1e-8

    def test_basis_convergence_of_peak_energy(self):
        sol = rwa.make_rabi(rwa.ResonanceSpec(k=1, n=2, N=1, omega_nk=W21),
                            0.01, float(BASIS.eta[1, 0]))
        span = 0.7 * np.pi / sol.Gamma  # covers the envelope crest
        values = []
        for size in (16, 32):
            cfg = resonant_cfg(2, size=size)
            traj = evolve(cfg, ground_state(size), span, steps_per_period=64,
                          coeff_stride=64)
            values.append(max_energy(traj).value)
        assert abs(values[1] - values[0]) / values[0] < 1e-6

    def test_unnormalized_initial_state_rejected(self):
        cfg = resonant_cfg(2)
        with pytest.raises(ValueError):
            evolve(cfg, 2.0 * ground_state(16), cfg.tau)

    def test_steps_per_period_floor(self):
        cfg = resonant_cfg(2)
        with pytest.raises(ValueError):
            evolve(cfg, ground_state(16), cfg.tau, steps_per_period=32)

    def test_propagator_unitarity_gate(self):
        cfg = resonant_cfg(2)
        with pytest.raises(IntegrityError):
            PeriodPropagator(cfg, BASIS, 4, unitarity_tol=1e-16)


class TestTrajectoryLayout:
    def test_sample_grid_alignment(self):
        cfg = resonant_cfg(2)
        traj = evolve(cfg, ground_state(16), 3 * cfg.tau, steps_per_period=100)
        assert len(traj.times) == 301
        assert np.all(np.diff(traj.times) > 0)
        assert traj.times[100] == pytest.approx(cfg.tau, rel=1e-12)

    def test_coeff_stride_keeps_boundaries(self):
        cfg = resonant_cfg(2)
        traj = evolve(cfg, ground_state(16), 3 * cfg.tau, steps_per_period=100,
                      coeff_stride=100)
        assert list(traj.coeff_index) == [0, 100, 200, 300]
        with pytest.raises(ValueError):
            traj.state_at_index(50)

    def test_invalid_stride_rejected(self):
        cfg = resonant_cfg(2)
        with pytest.raises(ValueError):
            evolve(cfg, ground_state(16), cfg.tau, steps_per_period=100,
                   coeff_stride=7)
