"""
Тесты для модуля геометрического пути.
"""

import numpy as np
import pytest

from src.metrics.fidelity import average_gate_fidelity, custom_gate, named_gate
from src.path_design.geometric_path import (
    GATE_TABLE,
    PAULI_Y,
    PAULI_Z,
    FieldSamples,
    GateName,
    GeometricPath,
    control_fields,
    gamma1,
    gamma2,
    gate_unitary,
    invariant_op,
    invariant_residual,
    lr_phases,
    phi_minus,
    phi_plus,
    qg_closed_form,
    sensitivity_Qg,
)

T_GATE = 5e-6


@pytest.fixture(scope="module")
def not_path():
    return GeometricPath.designed(T_GATE, np.pi)


class TestPathFunctions:
    """
    Тесты γ₁ и γ₂.
    """

    def test_gamma1_values(self):
        assert gamma1(0.0, T_GATE) == 0.0
        assert gamma1(T_GATE / 2, T_GATE) == pytest.approx(np.pi)
        assert gamma1(T_GATE / 4, T_GATE) == pytest.approx(np.pi / 2)
        assert gamma1(T_GATE, T_GATE) == pytest.approx(0.0, abs=1e-15)

    def test_gamma1_out_of_range(self):
        with pytest.raises(ValueError):
            gamma1(2 * T_GATE, T_GATE)
        with pytest.raises(ValueError):
            gamma2(-T_GATE, T_GATE, np.pi)

    def test_gamma2_values(self):
        assert gamma2(0.0, T_GATE, np.pi) == 0.0
        assert gamma2(T_GATE, T_GATE, np.pi) == pytest.approx(-np.pi)
        assert gamma2(T_GATE / 4, T_GATE, np.pi) == pytest.approx(4.0 / 3.0)

    def test_single_step(self, not_path):
        """
        γ₂ имеет одну ступеньку −Θ_g в T/2.
        """
        values = np.array([not_path.gamma2(t) for t in not_path.sample_times()])
        jumps = np.diff(values)
        big = np.flatnonzero(np.abs(jumps) > 0.5)
        assert len(big) == 1
        assert jumps[big[0]] == pytest.approx(-np.pi, abs=1e-3)


class TestControlFields:
    def test_boundaries(self, not_path):
        assert control_fields(0.0, not_path) == pytest.approx((0.0, 0.0), abs=1e-6)
        assert control_fields(T_GATE / 2, not_path) == pytest.approx((0.0, 0.0), abs=1e-6)

    def test_matches_finite_difference(self, not_path):
        """
        Подстановка γ̇₂tanγ₁ совпадает с разностной производной γ₂.
        """
        t = T_GATE / 8
        h = T_GATE * 1e-6
        g1, g2 = not_path.gamma1(t), not_path.gamma2(t)
        g1_dot = not_path.gamma1_dot(t)
        g2_dot = (not_path.gamma2(t + h) - not_path.gamma2(t - h)) / (2 * h)
        expected_x = -(g1_dot * np.cos(g2) - g2_dot * np.tan(g1) * np.sin(g2))
        expected_y = g1_dot * np.sin(g2) + g2_dot * np.tan(g1) * np.cos(g2)

        omega_x, omega_y = control_fields(t, not_path)
        assert omega_x == pytest.approx(expected_x, rel=1e-6)
        assert omega_y == pytest.approx(expected_y, rel=1e-6)

    def test_finite_at_quarter_period(self, not_path):
        omega_x, omega_y = control_fields(T_GATE / 4, not_path)
        assert np.isfinite(omega_x) and np.isfinite(omega_y)

    def test_sampled_fields(self, not_path):
        fields = not_path.fields
        assert len(fields) == 4001
        t = fields.times[1000]
        assert fields.at(t) == pytest.approx(control_fields(t, not_path))
        assert fields.omega0(t) == pytest.approx(0.5 * (fields.omega_x[1000] + 1j * fields.omega_y[1000]))

    def test_field_samples_shape(self):
        with pytest.raises(ValueError):
            FieldSamples(times=np.arange(3), omega_x=np.zeros(3), omega_y=np.zeros(2))


class TestInvariant:
    """
    Тесты динамического инварианта.
    """

    def test_special_values(self):
        assert np.allclose(invariant_op(0.0, 1.3).entries, PAULI_Z)
        assert np.allclose(invariant_op(np.pi / 2, 0.0).entries, PAULI_Y)

    @pytest.mark.parametrize("g1,g2", [(0.3, 1.1), (2.0, -0.7), (np.pi, 0.4)])
    def test_eigenvectors(self, g1, g2):
        invariant = invariant_op(g1, g2)
        assert np.allclose(np.linalg.eigvalsh(invariant.entries), [-1.0, 1.0])

    def test_tracked_eigenvectors(self, not_path):
        for t in np.linspace(0.0, T_GATE, 17):
            invariant = invariant_op(not_path.gamma1(t), not_path.gamma2(t))
            plus, minus = phi_plus(not_path, t), phi_minus(not_path, t)
            assert np.allclose(invariant.apply(plus).amplitudes, plus.amplitudes)
            assert np.allclose(invariant.apply(minus).amplitudes, -minus.amplitudes)

    def test_invariant_equation(self, not_path):
        assert invariant_residual(not_path) < 1e-6


class TestPhases:
    """
    Тесты фаз Льюиса–Ризенфельда.
    """

    @pytest.mark.parametrize("name", [GateName.PI_PHASE, GateName.NOT, GateName.HADAMARD])
    def test_final_phases(self, name):
        theta_g = GATE_TABLE[name][1]
        path = GeometricPath.designed(T_GATE, theta_g)
        record = lr_phases(path, T_GATE)
        assert record.theta_d_minus == pytest.approx(0.0, abs=1e-6)
        assert record.theta_g_minus == pytest.approx(theta_g, abs=1e-6)

    def test_initial_phases(self, not_path):
        record = lr_phases(not_path, 0.0)
        assert record.theta_d_minus == 0.0
        assert record.theta_g_minus == 0.0

    def test_total_phase(self, not_path):
        record = lr_phases(not_path, 0.3 * T_GATE)
        assert record.mu_minus == record.theta_d_minus + record.theta_g_minus


class TestSensitivity:
    """
    Тесты чувствительности к систематической ошибке.
    """

    def test_designed_path(self, not_path):
        assert sensitivity_Qg(not_path) < 1e-6
        assert qg_closed_form(np.pi, 1.0) < 1e-12

    def test_reference_path(self):
        reference = GeometricPath.reference(T_GATE, np.pi)
        value = sensitivity_Qg(reference)
        assert value > 0.1
        assert value == pytest.approx(qg_closed_form(np.pi, 0.0), rel=1e-4)

    def test_invalid_path(self):
        with pytest.raises(ValueError):
            GeometricPath(T=0.0, theta_g=np.pi)
        with pytest.raises(ValueError):
            GeometricPath(T=T_GATE, theta_g=np.pi, smooth_gamma2=lambda t: 0.0)


class TestGateUnitary:
    def test_pi_phase(self):
        assert np.allclose(gate_unitary(named_gate("pi_phase")).entries, np.diag([-1.0, 1.0]))

    def test_not(self):
        assert np.allclose(gate_unitary(named_gate("not")).entries, [[0.0, -1.0], [-1.0, 0.0]])

    def test_zero_phase_is_identity(self):
        for theta in (0.1, 0.7, 2.0):
            assert np.allclose(gate_unitary(custom_gate(theta, 0.0)).entries, np.eye(2))

    @pytest.mark.parametrize("name", ["pi_phase", "not", "hadamard"])
    def test_matches_target_up_to_phase(self, name):
        gate = named_gate(name)
        assert average_gate_fidelity(gate_unitary(gate).entries, gate.target_unitary) == pytest.approx(1.0, abs=1e-10)
