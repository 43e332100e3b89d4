"""
Тесты для интеграторов, модели шума и полной модели.
"""

from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from src.device.model import SystemParams, derive_drive_spec, static_matrices
from src.evolution.full_model import InteractionPicture, literal_spot_check, magnus_propagate
from src.evolution.noise import (
    NoiseSpec,
    empirical_snr_db,
    noise_generator,
    with_awgn,
    with_systematic_error,
)
from src.evolution.solver import (
    DecoherenceRates,
    Scheme,
    TimeGrid,
    collapse_operators,
    lindblad_propagate,
    lindblad_superoperator,
    propagate_piecewise,
    propagate_propagator,
    propagate_state,
)
from src.fock.operators import StateVector, fock_state, identity_op, joint_state, number_op, tensor_embed
from src.metrics.fidelity import named_gate
from src.path_design.geometric_path import FieldSamples, GeometricPath
from src.utils.errors import ConvergenceError

RABI = 2.0 * np.pi * 1e6
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def _qubit(amplitudes) -> StateVector:
    return StateVector(np.asarray(amplitudes, dtype=complex), "qubit")


def _rabi(t: float) -> np.ndarray:
    return 0.5 * RABI * SIGMA_X


class TestTimeGrid:
    def test_spacing(self):
        grid = TimeGrid(1.0, 4)
        assert grid.dt == pytest.approx(0.25)
        assert grid.times() == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
        assert grid.halved().steps == 8

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 10)
        with pytest.raises(ValueError):
            TimeGrid(1.0, 10, scheme="euler")

    def test_step_limit(self):
        with pytest.raises(ValueError):
            TimeGrid(1.0, 10).check_step(0.01)
        TimeGrid(1.0, 10, Scheme.DP54_ADAPTIVE).check_step(0.01)


class TestSchrodinger:
    """
    Тесты интегрирования уравнения Шрёдингера.
    """

    def test_rabi_flip(self):
        """
        π-импульс переводит |0⟩ в −i|1⟩.
        """
        grid = TimeGrid(np.pi / RABI, 1000)
        trajectory = propagate_state(_rabi, _qubit([1.0, 0.0]), grid)
        assert np.allclose(trajectory.final, [0.0, -1j], atol=1e-8)
        assert trajectory.max_drift < 1e-8
        assert trajectory.final_state().basis_tag == "qubit"

    def test_adaptive_matches_fixed(self):
        grid = TimeGrid(0.3 / RABI, 200)
        fixed = propagate_state(_rabi, _qubit([1.0, 0.0]), grid)
        adaptive = propagate_state(_rabi, _qubit([1.0, 0.0]), replace(grid, scheme=Scheme.DP54_ADAPTIVE))
        assert np.allclose(fixed.final, adaptive.final, atol=1e-8)

    def test_snapshots(self):
        trajectory = propagate_state(_rabi, _qubit([1.0, 0.0]), TimeGrid(1e-7, 10), keep_snapshots=True)
        assert len(trajectory.snapshots) == 11
        assert trajectory.times[0] == 0.0

    def test_unnormalized_state(self):
        with pytest.raises(ValueError):
            propagate_state(_rabi, _qubit([1.0, 1.0]), TimeGrid(1e-7, 10))

    def test_norm_drift_detected(self):
        """
        Слишком крупный шаг rk4 разрушает норму.
        """
        with pytest.raises(ConvergenceError) as error:
            propagate_state(lambda t: 10.0 * np.diag([1.0, -1.0]), _qubit([1.0, 0.0]), TimeGrid(1.0, 2))
        assert error.value.achieved > 1e-8

    def test_propagator_columns(self):
        basis = [_qubit([1.0, 0.0]), _qubit([0.0, 1.0])]
        trajectory = propagate_propagator(_rabi, basis, TimeGrid(np.pi / RABI, 1000))
        assert np.allclose(trajectory.final, [[0.0, -1j], [-1j, 0.0]], atol=1e-8)

    def test_propagator_requires_orthonormal(self):
        with pytest.raises(ValueError):
            propagate_propagator(_rabi, [_qubit([1.0, 0.0]), _qubit([1.0, 0.0])], TimeGrid(1.0, 10))
        with pytest.raises(ValueError):
            propagate_propagator(_rabi, [], TimeGrid(1.0, 10))

    def test_energy_conserved(self):
        """
        При постоянном H среднее ⟨ψ|H|ψ⟩ сохраняется.
        """
        rng = np.random.default_rng(11)
        raw = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        H = 0.5 * (raw + raw.conj().T)
        start = StateVector(np.array([1.0, 0.0, 0.0], dtype=complex), "qutrit")
        trajectory = propagate_state(lambda t: H, start, TimeGrid(1.0, 1000), keep_snapshots=True)
        energies = [np.vdot(psi, H @ psi).real for psi in trajectory.snapshots]
        assert max(energies) - min(energies) < 1e-8

    def test_piecewise_rabi_flip(self):
        basis = [_qubit([1.0, 0.0]), _qubit([0.0, 1.0])]
        trajectory = propagate_piecewise(_rabi, basis, TimeGrid(np.pi / RABI, 10, Scheme.EXPM_MIDPOINT))
        assert np.allclose(trajectory.final, [[0.0, -1j], [-1j, 0.0]], atol=1e-12)
        assert trajectory.kind == "propagator"

    def test_piecewise_rough_hamiltonian(self):
        """
        На отсчётах с линейной интерполяцией шаг равен точной экспоненте среднего.
        """
        rng = np.random.default_rng(5)
        nodes = 40
        raw = rng.normal(size=(nodes + 1, 3, 3)) + 1j * rng.normal(size=(nodes + 1, 3, 3))
        samples = 20.0 * (raw + np.conj(np.transpose(raw, (0, 2, 1))))
        knots = np.linspace(0.0, 1.0, nodes + 1)

        def H(t):
            real = [[np.interp(t, knots, samples[:, i, j].real) for j in range(3)] for i in range(3)]
            imag = [[np.interp(t, knots, samples[:, i, j].imag) for j in range(3)] for i in range(3)]
            return np.array(real) + 1j * np.array(imag)

        basis = [StateVector(column, "qutrit") for column in np.eye(3, dtype=complex)]
        trajectory = propagate_piecewise(H, basis, TimeGrid(1.0, nodes, Scheme.EXPM_MIDPOINT))
        expected = np.eye(3, dtype=complex)
        for k in range(nodes):
            expected = expm(-0.5j * (samples[k] + samples[k + 1]) / nodes) @ expected
        assert np.allclose(trajectory.final, expected, atol=1e-10)
        assert trajectory.max_drift < 1e-10

    def test_piecewise_requires_scheme(self):
        with pytest.raises(ValueError):
            propagate_piecewise(_rabi, [_qubit([1.0, 0.0])], TimeGrid(1.0, 10))


class TestDecoherence:
    """
    Тесты основного уравнения Линдблада.
    """

    @pytest.fixture
    def small(self):
        return SystemParams(n_max=4)

    def test_rate_units(self):
        angular = DecoherenceRates.from_khz(50.0, 50.0, 10.0)
        assert angular.gamma_d == pytest.approx(5e4)
        linear = DecoherenceRates.from_khz(50.0, 50.0, 10.0, angular=False)
        assert linear.gamma_kappa == pytest.approx(2 * np.pi * 1e4)
        with pytest.raises(ValueError):
            DecoherenceRates(gamma_d=-1.0)

    def test_collapse_channels(self, small):
        assert len(collapse_operators(small, DecoherenceRates(1.0, 1.0, 1.0))) == 6
        assert collapse_operators(small, DecoherenceRates()) == []
        channels = collapse_operators(small, DecoherenceRates(gamma_kappa=3.0))
        assert len(channels) == 1
        assert channels[0][1] == 3.0

    def test_cavity_decay(self, small):
        """
        Населённость |g,1⟩ распадается как e^{−κt}.
        """
        kappa = 1e5
        dim = small.joint_dim
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[1, 1] = 1.0
        collapse = collapse_operators(small, DecoherenceRates(gamma_kappa=kappa))
        trajectory = lindblad_propagate(
            lambda t: np.zeros((dim, dim), dtype=complex), collapse, rho0, TimeGrid(1.0 / kappa, 200)
        )
        assert trajectory.final[0, 0].real == pytest.approx(1.0 - np.exp(-1.0), abs=1e-8)
        assert trajectory.final[1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-8)
        assert trajectory.kind == "density"

    def test_spontaneous_decay(self, small):
        """
        Населённость |e,0⟩ убывает как e^{−Γ_s t}, дефазировка её не меняет.
        """
        gamma = 1e5
        excited = joint_state(fock_state(0, small.n_max), "e").amplitudes
        rho0 = np.outer(excited, excited.conj())
        collapse = collapse_operators(small, DecoherenceRates(gamma_d=3e4, gamma_s=gamma))
        dim = small.joint_dim
        trajectory = lindblad_propagate(
            lambda t: np.zeros((dim, dim), dtype=complex), collapse, rho0, TimeGrid(1.0 / gamma, 200)
        )
        population = np.vdot(excited, trajectory.final @ excited).real
        assert population == pytest.approx(np.exp(-1.0), abs=1e-8)

    def test_photon_number_decay(self, small):
        """
        Из |g,2⟩ среднее число фотонов убывает как 2e^{−κt}.
        """
        kappa = 1e5
        start = joint_state(fock_state(2, small.n_max), "g").amplitudes
        rho0 = np.outer(start, start.conj())
        number = tensor_embed(number_op(small.n_max), identity_op("qutrit", 3)).entries
        collapse = collapse_operators(small, DecoherenceRates(gamma_kappa=kappa))
        dim = small.joint_dim
        trajectory = lindblad_propagate(
            lambda t: np.zeros((dim, dim), dtype=complex), collapse, rho0, TimeGrid(2.0 / kappa, 400)
        )
        assert np.trace(trajectory.final @ number).real == pytest.approx(2.0 * np.exp(-2.0), abs=1e-8)

    def test_superoperator_matches_rhs(self, small):
        """
        exp(𝓛t)vec(ρ₀) совпадает с интегрированием при постоянном H.
        """
        rng = np.random.default_rng(3)
        H = static_matrices(small)[0] * 1e-10
        dim = small.joint_dim
        vector = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        vector /= np.linalg.norm(vector)
        rho0 = np.outer(vector, vector.conj())
        collapse = collapse_operators(small, DecoherenceRates(0.5, 0.3, 0.2))
        t = 1.0
        generator = lindblad_superoperator(H, collapse)
        expected = (expm(generator * t) @ rho0.ravel()).reshape(dim, dim)
        trajectory = lindblad_propagate(lambda _: H, collapse, rho0, TimeGrid(t, 400))
        assert np.allclose(trajectory.final, expected, atol=1e-8)

    def test_invalid_initial_density(self, small):
        dim = small.joint_dim
        with pytest.raises(ValueError):
            lindblad_propagate(lambda t: np.zeros((dim, dim)), [], np.eye(dim), TimeGrid(1.0, 10))
        bad = np.zeros((dim, dim), dtype=complex)
        bad[0, 1] = 1.0
        bad[0, 0] = 1.0
        with pytest.raises(ValueError):
            lindblad_propagate(lambda t: np.zeros((dim, dim)), [], bad, TimeGrid(1.0, 10))


@pytest.fixture(scope="module")
def clean_fields():
    return GeometricPath.designed(5e-6, np.pi).fields


class TestNoise:
    """
    Тесты ошибок управления.
    """

    def test_seed_range(self):
        with pytest.raises(ValueError):
            NoiseSpec(seed=-1)
        with pytest.raises(ValueError):
            NoiseSpec(seed=2**64)

    def test_generator_streams(self):
        first = noise_generator(42, 0).normal(size=5)
        assert np.array_equal(first, noise_generator(42, 0).normal(size=5))
        assert not np.array_equal(first, noise_generator(42, 1).normal(size=5))

    def test_systematic_scale(self):
        params = SystemParams()
        gate = named_gate("not")
        spec = derive_drive_spec(params, gate, GeometricPath.designed(params.T, gate.theta_g))
        scaled = with_systematic_error(spec, 0.1)
        assert scaled.scale == pytest.approx(1.1)
        t = params.T / 8
        assert np.allclose(scaled.omega_tilde_at(t), 1.1 * spec.omega_tilde_at(t))
        assert with_systematic_error(scaled, -0.1).scale == pytest.approx(0.99)

    def test_no_noise(self, clean_fields):
        assert with_awgn(clean_fields, None, 1) is clean_fields
        assert with_awgn(clean_fields, float("inf"), 1) is clean_fields

    def test_measured_snr(self, clean_fields):
        noisy = with_awgn(clean_fields, 10.0, 7)
        assert empirical_snr_db(clean_fields, noisy) == pytest.approx(10.0, abs=0.3)
        assert np.array_equal(noisy.times, clean_fields.times)

    def test_reproducible(self, clean_fields):
        first = with_awgn(clean_fields, 10.0, 7, index=3)
        second = with_awgn(clean_fields, 10.0, 7, index=3)
        other = with_awgn(clean_fields, 10.0, 7, index=4)
        assert np.array_equal(first.omega_x, second.omega_x)
        assert not np.array_equal(first.omega_x, other.omega_x)

    def test_grid_checks(self):
        empty = FieldSamples(times=np.array([]), omega_x=np.array([]), omega_y=np.array([]))
        with pytest.raises(ValueError):
            with_awgn(empty, 10.0, 0)
        uneven = FieldSamples(times=np.array([0.0, 1.0, 3.0]), omega_x=np.ones(3), omega_y=np.ones(3))
        with pytest.raises(ValueError):
            with_awgn(uneven, 10.0, 0)


class TestFullModel:
    """
    Тесты схемы magnus_ip.
    """

    @pytest.fixture(scope="class")
    def small(self):
        return SystemParams(n_max=8)

    @pytest.fixture(scope="class")
    def spec(self, small):
        gate = named_gate("not")
        return derive_drive_spec(small, gate, GeometricPath.designed(small.T, gate.theta_g))

    @pytest.fixture(scope="class")
    def code_states(self, small):
        return [joint_state(fock_state(n, small.n_max), "g") for n in (0, 2)]

    def test_interaction_picture(self, small):
        picture = InteractionPicture.from_params(small)
        static = static_matrices(small)[0]
        rebuilt = picture.vectors @ np.diag(picture.energies) @ picture.vectors.conj().T
        assert np.allclose(rebuilt, static, atol=1e-3)
        columns = np.eye(small.joint_dim, dtype=complex)[:, :2]
        t = 1.3e-7
        assert np.allclose(picture.to_lab(picture.to_frame(columns, t), t), columns, atol=1e-10)

    def test_free_evolution(self, small, spec, code_states):
        """
        Без драйва g-ветвь только набирает фазу δnT, кратную 2π.
        """
        trajectory = magnus_propagate(
            small, replace(spec, scale=0.0), code_states, TimeGrid(small.T, 100, Scheme.MAGNUS_IP)
        )
        expected = np.column_stack([s.amplitudes for s in code_states])
        assert np.allclose(trajectory.final, expected, atol=1e-6)

    def test_recorded_snapshots(self, small, spec, code_states):
        trajectory = magnus_propagate(
            small, spec, code_states, TimeGrid(small.T, 100, Scheme.MAGNUS_IP), keep_snapshots=True, record_every=25
        )
        assert len(trajectory.snapshots) == 5
        assert trajectory.times[-1] == pytest.approx(small.T)
        assert trajectory.max_drift < 1e-8

    def test_literal_spot_check(self, small, spec, code_states):
        assert literal_spot_check(small, spec, code_states) < 1e-6
