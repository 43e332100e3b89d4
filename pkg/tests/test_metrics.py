"""
Тесты для мер точности и аппроксимации.
"""

import numpy as np
import pytest

from src.fock.operators import StateVector
from src.metrics.fidelity import (
    U_HADAMARD,
    U_NOT,
    U_PI,
    FidelityTrace,
    average_gate_fidelity,
    checkpoint_indices,
    custom_gate,
    fidelity_trace,
    named_gate,
    state_fidelity,
    target_gates,
)
from src.metrics.fitting import fit_exponential
from src.path_design.geometric_path import GateName


class TestAverageGateFidelity:
    """
    Тесты средней точности вентиля.
    """

    def test_perfect_gate(self):
        assert average_gate_fidelity(U_NOT, U_NOT) == pytest.approx(1.0)

    def test_orthogonal_paulis(self):
        """
        Для M = σ_zσ_x след нулевой, F̄ = 2/6.
        """
        assert average_gate_fidelity(U_NOT, U_PI) == pytest.approx(1.0 / 3.0)

    def test_complete_leakage(self):
        assert average_gate_fidelity(np.zeros((2, 2)), U_NOT) == 0.0

    def test_global_phase(self):
        assert average_gate_fidelity(np.exp(0.7j) * U_HADAMARD, U_HADAMARD) == pytest.approx(1.0)

    def test_logical_projection(self):
        """
        Столбцы в большом пространстве проецируются на логический базис.
        """
        basis = np.zeros((5, 2), dtype=complex)
        basis[0, 0] = basis[3, 1] = 1.0
        columns = np.zeros((5, 2), dtype=complex)
        columns[3, 0] = columns[0, 1] = 1.0
        assert average_gate_fidelity(columns, U_NOT, basis) == pytest.approx(1.0)

        leaked = columns.copy()
        leaked[:, 1] = 0.0
        leaked[4, 1] = 1.0
        assert average_gate_fidelity(leaked, U_NOT, basis) == pytest.approx(2.0 / 6.0)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            average_gate_fidelity(np.eye(3), U_NOT)
        with pytest.raises(ValueError):
            average_gate_fidelity(np.zeros((5, 2)), U_NOT, np.zeros((4, 2)))
        with pytest.raises(ValueError):
            average_gate_fidelity(np.eye(2), np.eye(3))


class TestStateFidelity:
    def test_pure_state(self):
        target = StateVector(np.array([1.0, 1.0]) / np.sqrt(2), "logical")
        assert state_fidelity(StateVector(np.array([1.0, 0.0]), "logical"), target) == pytest.approx(0.5)

    def test_mixed_state(self):
        target = StateVector(np.array([1.0, 0.0]), "logical")
        assert state_fidelity(0.5 * np.eye(2), target) == pytest.approx(0.5)

    def test_invalid_density(self):
        target = StateVector(np.array([1.0, 0.0]), "logical")
        with pytest.raises(ValueError):
            state_fidelity(np.array([[1.0, 1.0], [0.0, 0.0]]), target)
        with pytest.raises(ValueError):
            state_fidelity(np.eye(3) / 3, target)


class TestTargetGates:
    def test_table(self):
        gates = target_gates()
        assert set(gates) == {GateName.PI_PHASE, GateName.NOT, GateName.HADAMARD}
        assert gates[GateName.HADAMARD].theta == pytest.approx(np.pi / 8)
        assert np.allclose(named_gate("not").target_unitary.entries, U_NOT)

    def test_unknown_gate(self):
        with pytest.raises(ValueError):
            named_gate("toffoli")

    def test_custom_gate_is_unitary(self):
        gate = custom_gate(0.3, 1.1)
        assert gate.name == GateName.CUSTOM
        assert gate.target_unitary.unitarity_defect() < 1e-12

    def test_custom_matches_named(self):
        """
        При (π/4, π) произвольный вентиль совпадает с NOT до глобальной фазы.
        """
        gate = custom_gate(np.pi / 4, np.pi)
        assert average_gate_fidelity(gate.target_unitary.entries, U_NOT) == pytest.approx(1.0)


class TestFidelityTrace:
    def test_trace_from_snapshots(self):
        times = np.array([0.0, 1.0])
        snapshots = [np.eye(2, dtype=complex), U_NOT.astype(complex)]
        basis = np.eye(2, dtype=complex)
        trace = fidelity_trace(times, snapshots, U_NOT, basis)
        assert trace.values == pytest.approx([1.0 / 3.0, 1.0])
        assert trace.final == pytest.approx(1.0)

    def test_frame_applied(self):
        frame = lambda t: np.array([1.0, -1.0])  # noqa: E731
        trace = fidelity_trace(np.array([0.0]), [np.eye(2, dtype=complex)], U_PI, np.eye(2), frame)
        assert trace.final == pytest.approx(1.0)

    def test_range_check(self):
        with pytest.raises(ValueError):
            FidelityTrace(times=np.array([0.0]), values=np.array([1.1]))
        with pytest.raises(ValueError):
            FidelityTrace(times=np.array([0.0, 1.0]), values=np.array([0.5]))
        clipped = FidelityTrace(times=np.array([0.0]), values=np.array([1.0 + 1e-12]))
        assert clipped.final == 1.0

    def test_checkpoints(self):
        indices = checkpoint_indices(2000)
        assert len(indices) == 201
        assert indices[0] == 0 and indices[-1] == 2000
        assert len(checkpoint_indices(50)) == 51


class TestExponentialFit:
    """
    Тесты аппроксимации F = a·e^{−b·R_N} + c.
    """

    def test_recovers_parameters(self):
        a, b, c = -0.005, 0.17, 0.993
        x = np.linspace(5.0, 20.0, 16)
        points = list(zip(x, a * np.exp(-b * x) + c))
        fit = fit_exponential(points)
        assert fit.a == pytest.approx(a, abs=1e-6)
        assert fit.b == pytest.approx(b, abs=1e-6)
        assert fit.c == pytest.approx(c, abs=1e-6)
        assert fit.rms_residual < 1e-9
        assert not fit.degenerate
        assert fit.predict(12.0) == pytest.approx(a * np.exp(-b * 12.0) + c, abs=1e-9)

    def test_unsorted_points(self):
        x = np.array([20.0, 5.0, 10.0, 15.0, 7.5])
        points = list(zip(x, -0.01 * np.exp(-0.2 * x) + 0.99))
        assert fit_exponential(points).b == pytest.approx(0.2, abs=1e-6)

    def test_constant_data(self):
        fit = fit_exponential([(x, 0.98) for x in (5.0, 10.0, 15.0, 20.0)])
        assert fit.degenerate
        assert fit.c == pytest.approx(0.98)
        assert fit.b == 0.0

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_exponential([(5.0, 0.9), (10.0, 0.95), (15.0, 0.97)])

    def test_repeated_snr(self):
        with pytest.raises(ValueError):
            fit_exponential([(5.0, 0.9), (5.0, 0.91), (10.0, 0.95), (15.0, 0.97)])
