import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityphase import rwa
from cavityphase.cavity import build_basis, cylindrical, spherical

W21 = 12.34403819035765  # lowest cylindrical transition, from the Bessel zeros


def spec_for(n, N, geometry=None, delta=0.0):
    basis = build_basis(geometry or cylindrical(), 16)
    return rwa.ResonanceSpec(k=1, n=n, N=N, omega_nk=basis.omega_nk(n, 1),
                             delta_omega=delta)


class TestGammaFactor:
    def test_first_order_on_peak(self):
        s = rwa.ResonanceSpec(k=1, n=2, N=1, omega_nk=W21)
        assert rwa.gamma_factor(s) == W21

    def test_second_order_on_peak(self):
        s = rwa.ResonanceSpec(k=1, n=2, N=2, omega_nk=W21)
        assert rwa.gamma_factor(s) == pytest.approx(0.75 * W21, rel=1e-14)

    def test_third_order_on_peak(self):
        s = rwa.ResonanceSpec(k=1, n=2, N=3, omega_nk=W21)
        assert rwa.gamma_factor(s) == pytest.approx(17.0 * W21 / 24.0, rel=1e-14)

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            rwa.ResonanceSpec(k=1, n=2, N=4, omega_nk=W21)

    def test_detuning_dependence(self):
        s = rwa.ResonanceSpec(k=1, n=2, N=2, omega_nk=W21, delta_omega=0.4)
        assert rwa.gamma_factor(s) == pytest.approx((3 * W21 - 0.4) / 4.0, rel=1e-14)


# published scaled widths gamma_N/2 for the k = 1 rows; spherical rows at
# the values quoted in parentheses there
TABLE_CYL = {(1, 2): 6.17, (1, 3): 17.3, (1, 4): 33.3,
             (2, 2): 4.63, (2, 3): 13.0, (2, 4): 25.0, (2, 5): 40.7,
             (3, 4): 23.6, (3, 5): 38.5, (3, 6): 56.8}
TABLE_SPH = {(1, 2): 7.40, (2, 2): 5.55, (2, 3): 14.8, (2, 4): 27.8,
             (3, 4): 26.2}


class TestWidth:
    @pytest.mark.parametrize("key,expected", sorted(TABLE_CYL.items()))
    def test_scaled_widths_cylindrical(self, key, expected):
        N, n = key
        assert rwa.scaled_width(spec_for(n, N)) == pytest.approx(expected, rel=5e-3)

    @pytest.mark.parametrize("key,expected", sorted(TABLE_SPH.items()))
    def test_scaled_widths_spherical(self, key, expected):
        N, n = key
        assert rwa.scaled_width(spec_for(n, N, spherical())) == pytest.approx(
            expected, rel=5e-3)

    def test_width_uses_magnitude_of_eta(self):
        s = spec_for(2, 1)
        assert rwa.width(s, 0.01, -1.2) == rwa.width(s, 0.01, 1.2)

    def test_forbidden_transition(self):
        with pytest.raises(rwa.ForbiddenTransitionError):
            rwa.width(spec_for(2, 1), 0.01, 0.0)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_epsilon_power_scaling_exact(self, N):
        s = spec_for(4, N)
        ratio = rwa.width(s, 0.02, 0.7) / rwa.width(s, 0.01, 0.7)
        assert ratio == pytest.approx(2.0 ** N, rel=1e-13)

    def test_first_order_matches_half_drive_coupling(self):
        # Gamma_1 = eta * eps * omega / 2 at any detuning
        s = rwa.ResonanceSpec(k=1, n=2, N=1, omega_nk=W21, delta_omega=0.3)
        assert rwa.width(s, 0.02, 1.1) == pytest.approx(
            0.02 * 1.1 * s.drive_omega / 2.0, rel=1e-14)


class TestRabiSolution:
    def test_initial_condition(self):
        sol = rwa.make_rabi(spec_for(2, 1), 0.01, 1.07)
        ck, cn = rwa.rabi_amplitudes(0.0, sol, 0.0)
        assert ck == pytest.approx(1.0) and cn == pytest.approx(0.0)

    def test_full_transfer_on_peak(self):
        sol = rwa.make_rabi(spec_for(2, 1), 0.01, 1.07)
        _, cn = rwa.rabi_amplitudes(np.pi / (2 * sol.Gamma), sol, 0.0)
        assert abs(cn) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_half_transfer_at_two_gamma_detuning(self):
        g = 0.066
        delta = 2.0 * g
        sol = rwa.RabiSolution(Gamma=g, chi=math.sqrt(g * g + 0.25 * delta ** 2),
                               eta_nk=1.07, epsilon=0.01)
        # crest of sin(chi t) gives the maximum exactly
        _, cn = rwa.rabi_amplitudes(np.pi / (2 * sol.chi), sol, delta)
        assert abs(cn) ** 2 == pytest.approx(0.5, abs=1e-12)

    @given(st.floats(0.0, 50.0), st.floats(-0.5, 0.5), st.floats(1e-4, 0.5))
    @settings(max_examples=300, deadline=None)
    def test_norm_identity(self, t, delta, gamma):
        chi = math.sqrt(gamma * gamma + 0.25 * delta * delta)
        sol = rwa.RabiSolution(Gamma=gamma, chi=chi, eta_nk=1.0, epsilon=0.01)
        ck, cn = rwa.rabi_amplitudes(t, sol, delta)
        assert abs(ck) ** 2 + abs(cn) ** 2 == pytest.approx(1.0, abs=1e-12)


class TestLorentzian:
    def test_unity_on_peak(self):
        s = spec_for(2, 1)
        assert rwa.lorentzian(s.omega_nk, s, 0.05) == pytest.approx(1.0)

    def test_half_maximum(self):
        s = spec_for(2, 1)
        g = 0.05
        assert rwa.lorentzian(s.omega_nk + 2 * g, s, g) == pytest.approx(0.5, rel=1e-12)
        assert rwa.lorentzian(s.omega_nk - 2 * g, s, g) == pytest.approx(0.5, rel=1e-12)

    def test_tail_value(self):
        s = spec_for(2, 1)
        g = 0.05
        assert rwa.lorentzian(s.omega_nk + 6 * g, s, g) == pytest.approx(0.1, rel=1e-12)

    @given(st.floats(-3.0, 3.0))
    @settings(max_examples=100, deadline=None)
    def test_symmetry(self, d):
        s = spec_for(2, 1)
        g = 0.07
        left = rwa.lorentzian(s.omega_nk - d, s, g)
        right = rwa.lorentzian(s.omega_nk + d, s, g)
        assert left == pytest.approx(right, rel=1e-12)

    def test_requires_positive_width(self):
        with pytest.raises(ValueError):
            rwa.lorentzian(10.0, spec_for(2, 1), 0.0)


class TestEnergyEnvelope:
    def test_shift_vanishes_on_peak(self):
        s = spec_for(2, 1)
        sol = rwa.make_rabi(s, 0.01, 1.07)
        assert rwa.energy_shift(s, sol, 2.89, 15.24) == pytest.approx(0.0, abs=1e-14)

    def test_envelope_bounds_on_peak(self):
        from cavityphase.cavity import CavityConfig
        s = spec_for(2, 1)
        sol = rwa.make_rabi(s, 0.01, 1.07)
        cfg = CavityConfig(cylindrical(), 0.01, s.drive_omega)
        basis = build_basis(cylindrical(), 16)
        E_k, E_n = basis.energies[0], basis.energies[1]
        t = np.linspace(0.0, np.pi / sol.Gamma, 2000)
        e = rwa.rwa_energy(t, s, sol, E_k, E_n, cfg)
        assert e[0] == pytest.approx(E_k, rel=1e-12)
        assert np.max(e) <= E_n * (1 - cfg.epsilon) ** -2 + 1e-9
        assert np.max(e) >= E_n * (1 + cfg.epsilon) ** -2 - 1e-9

    def test_shift_closed_form(self):
        # A = -omega_nk * delta^2 / (4 chi^2)
        s = rwa.ResonanceSpec(k=1, n=2, N=1, omega_nk=W21, delta_omega=0.21)
        sol = rwa.make_rabi(s, 0.01, 1.07)
        basis = build_basis(cylindrical(), 16)
        E_k, E_n = float(basis.energies[0]), float(basis.energies[1])
        expected = -s.omega_nk * s.delta_omega ** 2 / (4 * sol.chi ** 2)
        assert rwa.energy_shift(s, sol, E_k, E_n) == pytest.approx(expected, rel=1e-12)


class TestPhaseFormulas:
    def test_beta1_zero_nodes(self):
        s = spec_for(2, 1)
        sol = rwa.make_rabi(s, 0.01, 1.07)
        t1 = -0.5 * s.tau  # chi*(t1 + tau/2) = 0
        assert rwa.rwa_beta1(t1, s, sol) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_beta1_amplitude_is_2Npi(self, N):
        s = spec_for(4, N)
        sol = rwa.make_rabi(s, 0.01, 0.4256)
        t1 = np.pi / (2 * sol.chi) - 0.5 * s.tau
        assert rwa.rwa_beta1(t1, s, sol) == pytest.approx(2 * N * np.pi, rel=1e-12)

    def test_beta1_offset_equivalence_on_peak(self):
        # tau/2 equals N*pi/omega_nk exactly at resonance
        s = spec_for(3, 2)
        assert 0.5 * s.tau == pytest.approx(2 * np.pi / s.omega_nk * 1.0, rel=1e-14)

    def test_beta0_starts_at_zero(self):
        s = spec_for(2, 1)
        sol = rwa.make_rabi(s, 0.01, 1.07)
        assert rwa.rwa_beta0(0, s.tau, s, sol) == 0.0

    def test_beta0_jump_across_half_period(self):
        s = spec_for(2, 1)
        sol = rwa.make_rabi(s, 0.01, 1.0754)
        T = np.pi / sol.chi
        q_half = int(round(0.5 * T / s.tau))
        before = rwa.rwa_beta0(q_half - 1, s.tau, s, sol)
        after = rwa.rwa_beta0(q_half + 1, s.tau, s, sol)
        step = abs(rwa.principal(after - before))
        assert step == pytest.approx(np.pi, abs=0.2)

    def test_window_shift_parity(self):
        assert rwa.window_shift(0.0) == 0.0
        assert rwa.window_shift(0.5) == 0.0  # right-closed first window
        assert rwa.window_shift(0.6) == np.pi
        assert rwa.window_shift(1.49) == np.pi
        assert rwa.window_shift(1.51) == 0.0
        assert rwa.window_shift(2.0) == 0.0

    def test_principal_branch(self):
        assert rwa.principal(np.pi) == pytest.approx(np.pi)
        assert rwa.principal(-np.pi) == pytest.approx(np.pi)
        assert rwa.principal(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
        arr = rwa.principal(np.array([0.0, 2 * np.pi, -2 * np.pi]))
        assert np.allclose(arr, 0.0, atol=1e-12)


class TestDriveExpansion:
    def test_vanishes_with_drive(self):
        s = spec_for(2, 1)
        t = np.linspace(0, 5, 100)
        assert np.max(np.abs(rwa.w_expansion(t, s, 0.0))) == 0.0

    def test_leading_term_at_t_zero(self):
        s = spec_for(2, 1)
        w1 = rwa.w_expansion(0.0, s, 1e-7, order=1)
        assert w1 / 1e-7 == pytest.approx(s.drive_omega, rel=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_resonant_average_reproduces_width_factor(self, N):
        # the zero-frequency component of the expansion at omega_nk/N is
        # eps^N gamma_N / 2 in magnitude -- an independent check that the
        # width carries gamma_N/2
        eps = 0.01
        s = spec_for(2, N)
        cycles = 2000
        t = np.linspace(0.0, cycles * s.tau, cycles * 64, endpoint=False)
        mean = np.mean(rwa.w_expansion(t, s, eps))
        expected = eps ** N * rwa.gamma_factor(s) / 2.0
        assert abs(mean) == pytest.approx(expected, rel=2e-2)

    def test_off_resonant_average_is_small(self):
        eps = 0.01
        s = rwa.ResonanceSpec(k=1, n=2, N=1, omega_nk=W21, delta_omega=2.0)
        cycles = 2000
        t = np.linspace(0.0, cycles * s.tau, cycles * 64, endpoint=False)
        mean = np.mean(rwa.w_expansion(t, s, eps))
        on_peak = eps * rwa.gamma_factor(spec_for(2, 1)) / 2.0
        assert abs(mean) < 1e-2 * on_peak

    def test_order_validation(self):
        with pytest.raises(ValueError):
            rwa.w_expansion(0.0, spec_for(2, 1), 0.01, order=4)


class TestResonanceBookkeeping:
    def test_positions_sorted_and_windowed(self):
        basis = build_basis(cylindrical(), 16)
        pos = rwa.resonance_positions(basis.energies, omega_min=10.0,
                                      omega_max=70.0, n_max=8)
        values = [p for (_, _, p) in pos]
        assert values == sorted(values)
        assert all(10.0 <= v <= 70.0 for v in values)
        as_set = {(n, N) for (n, N, _) in pos}
        assert {(2, 1), (3, 2), (4, 3), (4, 1)} <= as_set

    def test_assignment_picks_smallest_detuning(self):
        basis = build_basis(cylindrical(), 16)
        s = rwa.assign_resonance(12.35, basis.energies)
        assert (s.n, s.N) == (2, 1)
        s = rwa.assign_resonance(17.27, basis.energies)
        assert (s.n, s.N) == (3, 2)

    def test_effective_position_shift_scale(self):
        s = spec_for(2, 2)
        shift = rwa.effective_position(s, 0.01) - s.omega_nk / 2
        assert shift == pytest.approx(s.omega_nk / 2 * 1.5e-4, rel=1e-2)
