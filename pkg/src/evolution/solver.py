"""
Модуль интегрирования уравнений движения: уравнение Шрёдингера для
состояний и пропагаторов, основное уравнение Линдблада для матрицы плотности.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp

from src.device.model import SystemParams
from src.fock.operators import (
    ComplexOperator,
    StateVector,
    annihilation_op,
    fock_tag,
    identity_op,
    qutrit_op,
    tensor_embed,
)
from src.utils.errors import ConvergenceError

Hamiltonian = Callable[[float], np.ndarray]

NORM_DRIFT_LIMIT = 1e-8
TRACE_DRIFT_LIMIT = 1e-6
HERMITICITY_LIMIT = 1e-10
POSITIVITY_LIMIT = -1e-8
POSITIVITY_CHECK_EVERY = 50


class Scheme(str, Enum):
    """
    Схемы интегрирования.
    """

    RK4_FIXED = "rk4_fixed"
    DP54_ADAPTIVE = "dp54_adaptive"
    MAGNUS_IP = "magnus_ip"
    EXPM_MIDPOINT = "expm_midpoint"


@dataclass(frozen=True)
class TimeGrid:
    """
    Сетка по времени [t0, t1] с числом шагов steps.

    Attributes:
        t1 (float): Конечный момент, с
        steps (int): Число шагов (для адаптивной схемы: число точек вывода)
        scheme (Scheme): Схема интегрирования
        t0 (float): Начальный момент, с
        rtol (float): Относительный допуск адаптивной схемы
        atol (float): Абсолютный допуск адаптивной схемы
    """

    t1: float
    steps: int
    scheme: Scheme = Scheme.RK4_FIXED
    t0: float = 0.0
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError(f"Число шагов должно быть положительным, получено {self.steps}")
        if self.t1 <= self.t0:
            raise ValueError(f"Пустой интервал [{self.t0}, {self.t1}]")
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)

    def halved(self) -> "TimeGrid":
        """
        Та же сетка с удвоенным числом шагов.
        """
        return TimeGrid(self.t1, 2 * self.steps, self.scheme, self.t0, self.rtol / 2, self.atol / 2)

    def check_step(self, max_step: Optional[float]) -> None:
        """
        Raises:
            ValueError: Если шаг rk4_fixed превышает max_step
        """
        if max_step is not None and self.scheme == Scheme.RK4_FIXED and self.dt > max_step:
            raise ValueError(f"Шаг {self.dt:.3e} с превышает допустимый {max_step:.3e} с")


@dataclass
class Trajectory:
    """
    Результат интегрирования.

    Attributes:
        times (np.ndarray): Моменты снимков
        snapshots (List[np.ndarray]): Вектор, матрица столбцов или ρ
        drift (np.ndarray): Отклонение нормы (следа) от начального значения
        kind (str): state, propagator или density
    """

    times: np.ndarray
    snapshots: List[np.ndarray]
    drift: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def final_state(self) -> StateVector:
        if self.kind != "state":
            raise ValueError(f"Траектория типа {self.kind} не содержит вектора состояния")
        return StateVector(self.final, self.meta.get("basis_tag", "joint"))

    @property
    def max_drift(self) -> float:
        return float(np.max(np.abs(self.drift))) if len(self.drift) else 0.0


@dataclass(frozen=True)
class DecoherenceRates:
    """
    Скорости декогеренции, с⁻¹.

    Attributes:
        gamma_d (float): Дефазировка Γ_d уровней e, f
        gamma_s (float): Релаксация Γ_s
        gamma_kappa (float): Потери резонатора Γ_κ
    """

    gamma_d: float = 0.0
    gamma_s: float = 0.0
    gamma_kappa: float = 0.0

    def __post_init__(self):
        for name in ("gamma_d", "gamma_s", "gamma_kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"Скорость {name} не может быть отрицательной")

    @classmethod
    def from_khz(
        cls, gamma_d: float = 0.0, gamma_s: float = 0.0, gamma_kappa: float = 0.0, angular: bool = True
    ) -> "DecoherenceRates":
        """
        Переводит кГц в с⁻¹: angular=True читает числа как с⁻¹·10³, иначе умножает на 2π.
        """
        factor = 1e3 if angular else 2.0 * np.pi * 1e3
        return cls(gamma_d * factor, gamma_s * factor, gamma_kappa * factor)


def _rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + dt / 2, y + dt / 2 * k1)
    k3 = rhs(t + dt / 2, y + dt / 2 * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    grid: TimeGrid,
    keep_snapshots: bool,
    monitor: Optional[Callable[[int, float, np.ndarray], None]] = None,
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Общий цикл для rk4_fixed и dp54_adaptive над массивом любой формы.
    """
    shape = y0.shape
    if grid.scheme == Scheme.RK4_FIXED:
        times = grid.times()
        dt = grid.dt
        y = y0.copy()
        snapshots = [y.copy()] if keep_snapshots else []
        for i in range(grid.steps):
            y = _rk4_step(rhs, times[i], y, dt)
            if monitor is not None:
                monitor(i + 1, times[i + 1], y)
            if keep_snapshots:
                snapshots.append(y.copy())
        if not keep_snapshots:
            snapshots = [y]
            times = times[-1:]
        return times, snapshots

    if grid.scheme == Scheme.DP54_ADAPTIVE:

        def flat_rhs(t: float, flat: np.ndarray) -> np.ndarray:
            return rhs(t, flat.reshape(shape)).ravel()

        t_eval = grid.times() if keep_snapshots else np.array([grid.t1])
        solution = solve_ivp(
            flat_rhs,
            (grid.t0, grid.t1),
            y0.astype(complex).ravel(),
            method="RK45",
            t_eval=t_eval,
            rtol=grid.rtol,
            atol=grid.atol,
        )
        if not solution.success:
            raise ConvergenceError(f"Адаптивный интегратор не достиг допуска: {solution.message}")
        logger.debug(f"dp54: {solution.nfev} вычислений правой части")
        snapshots = [solution.y[:, i].reshape(shape) for i in range(solution.y.shape[1])]
        if monitor is not None:
            for i, (t, y) in enumerate(zip(solution.t, snapshots)):
                monitor(i, t, y)
        return solution.t, snapshots

    raise ValueError(f"Схема {grid.scheme.value} не поддерживается общим интегратором")


def propagate_state(
    H_of_t: Hamiltonian,
    psi0: StateVector,
    grid: TimeGrid,
    keep_snapshots: bool = False,
    max_step: Optional[float] = None,
) -> Trajectory:
    """
    Решает i dψ/dt = H(t)ψ.

    Args:
        H_of_t (Hamiltonian): Функция t -> матрица H(t)
        psi0 (StateVector): Нормированное начальное состояние
        grid (TimeGrid): Сетка
        keep_snapshots (bool): Сохранять ψ во всех узлах
        max_step (Optional[float]): Предельный шаг rk4_fixed

    Returns:
        Trajectory: Траектория (kind="state")

    Raises:
        ValueError: Ненормированное ψ₀ или нарушение шага
        ConvergenceError: Дрейф нормы >= 1e-8 или отказ адаптивной схемы
    """
    if abs(psi0.norm - 1.0) > 1e-10:
        raise ValueError(f"Начальное состояние не нормировано: |ψ| = {psi0.norm:.12f}")
    grid.check_step(max_step)

    def rhs(t: float, psi: np.ndarray) -> np.ndarray:
        return -1j * (H_of_t(t) @ psi)

    times, snapshots = _integrate(rhs, np.asarray(psi0.amplitudes, dtype=complex), grid, keep_snapshots)
    drift = np.array([np.linalg.norm(s) - 1.0 for s in snapshots])
    trajectory = Trajectory(times, snapshots, drift, "state", {"basis_tag": psi0.basis_tag})
    if trajectory.max_drift >= NORM_DRIFT_LIMIT:
        raise ConvergenceError(
            f"Дрейф нормы {trajectory.max_drift:.2e} превышает {NORM_DRIFT_LIMIT:.0e}",
            achieved=trajectory.max_drift,
        )
    logger.debug(f"ψ: {grid.steps} шагов {grid.scheme.value}, дрейф нормы {trajectory.max_drift:.2e}")
    return trajectory


def columns_defect(columns: np.ndarray) -> float:
    """
    ‖Y†Y − I‖_max для матрицы столбцов Y.
    """
    gram = columns.conj().T @ columns
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def propagate_propagator(
    H_of_t: Hamiltonian,
    basis_states: Sequence[StateVector],
    grid: TimeGrid,
    keep_snapshots: bool = False,
    max_step: Optional[float] = None,
) -> Trajectory:
    """
    Распространяет столбцы пропагатора U(t)|b_j⟩ для заданных базисных состояний.

    Returns:
        Trajectory: Снимки: матрицы dim x len(basis_states) (kind="propagator")

    Raises:
        ConvergenceError: Если столбцы теряют ортонормированность более чем на 1e-8
    """
    columns = _initial_columns(basis_states)
    grid.check_step(max_step)

    def rhs(t: float, Y: np.ndarray) -> np.ndarray:
        return -1j * (H_of_t(t) @ Y)

    times, snapshots = _integrate(rhs, columns, grid, keep_snapshots)
    return _propagator_trajectory(times, snapshots, basis_states[0].basis_tag)


def propagate_piecewise(
    H_of_t: Hamiltonian,
    basis_states: Sequence[StateVector],
    grid: TimeGrid,
    keep_snapshots: bool = False,
) -> Trajectory:
    """
    Распространяет столбцы пропагатора схемой expm_midpoint.

    Шаг U ← exp(−iH(t + dt/2)dt)·U точно унитарен при любой гладкости H(t).
    Для полей, заданных отсчётами, узлы сетки должны совпадать с узлами
    отсчётов: тогда на каждом шаге H(t) постоянен и равен среднему двух
    соседних отсчётов.

    Raises:
        ValueError: Схема сетки не expm_midpoint
        ConvergenceError: Если столбцы теряют ортонормированность более чем на 1e-8
    """
    if grid.scheme != Scheme.EXPM_MIDPOINT:
        raise ValueError(f"Ожидалась схема {Scheme.EXPM_MIDPOINT.value}, получена {grid.scheme.value}")
    columns = _initial_columns(basis_states)
    times = grid.times()
    dt = grid.dt
    snapshots = [columns.copy()] if keep_snapshots else []
    for i in range(grid.steps):
        energies, vectors = np.linalg.eigh(H_of_t(times[i] + dt / 2))
        columns = vectors @ (np.exp(-1j * energies * dt)[:, None] * (vectors.conj().T @ columns))
        if keep_snapshots:
            snapshots.append(columns.copy())
    if not keep_snapshots:
        snapshots = [columns]
        times = times[-1:]
    logger.debug(f"expm_midpoint: {grid.steps} шагов")
    return _propagator_trajectory(times, snapshots, basis_states[0].basis_tag)


def _initial_columns(basis_states: Sequence[StateVector]) -> np.ndarray:
    if not basis_states:
        raise ValueError("Нужно хотя бы одно базисное состояние")
    columns = np.column_stack([np.asarray(s.amplitudes, dtype=complex) for s in basis_states])
    if columns_defect(columns) > 1e-10:
        raise ValueError("Базисные состояния не ортонормированы")
    return columns


def _propagator_trajectory(times: np.ndarray, snapshots: List[np.ndarray], basis_tag: str) -> Trajectory:
    drift = np.array([columns_defect(s) for s in snapshots])
    trajectory = Trajectory(times, snapshots, drift, "propagator", {"basis_tag": basis_tag})
    if trajectory.max_drift >= NORM_DRIFT_LIMIT:
        raise ConvergenceError(
            f"Столбцы пропагатора потеряли ортонормированность: {trajectory.max_drift:.2e}",
            achieved=trajectory.max_drift,
        )
    return trajectory


def collapse_operators(p: SystemParams, rates: DecoherenceRates) -> List[Tuple[ComplexOperator, float]]:
    """
    Операторы коллапса в совместном пространстве; каналы с нулевой скоростью опускаются.

    (σ_ee, Γ_d), (σ_ff, Γ_d), (|g⟩⟨f|, Γ_s/2), (|e⟩⟨f|, Γ_s/2), (|g⟩⟨e|, Γ_s), (a, Γ_κ).
    """
    cavity_identity = identity_op(fock_tag(p.n_max), p.n_max + 1)
    qutrit_identity = identity_op("qutrit", 3)
    channels = [
        (tensor_embed(cavity_identity, qutrit_op("ee")), rates.gamma_d),
        (tensor_embed(cavity_identity, qutrit_op("ff")), rates.gamma_d),
        (tensor_embed(cavity_identity, qutrit_op("gf")), rates.gamma_s / 2),
        (tensor_embed(cavity_identity, qutrit_op("ef")), rates.gamma_s / 2),
        (tensor_embed(cavity_identity, qutrit_op("ge")), rates.gamma_s),
        (tensor_embed(annihilation_op(p.n_max), qutrit_identity), rates.gamma_kappa),
    ]
    return [(operator, rate) for operator, rate in channels if rate > 0]


def lindblad_superoperator(hamiltonian: np.ndarray, collapse: Sequence[Tuple[ComplexOperator, float]]) -> np.ndarray:
    """
    Матрица генератора Линдблада для построчной векторизации ρ (постоянный H).
    """
    dim = hamiltonian.shape[0]
    identity = np.eye(dim)
    generator = -1j * (np.kron(hamiltonian, identity) - np.kron(identity, hamiltonian.T))
    for operator, rate in collapse:
        L = operator.entries
        LdL = L.conj().T @ L
        generator = generator + rate * (
            np.kron(L, L.conj()) - 0.5 * np.kron(LdL, identity) - 0.5 * np.kron(identity, LdL.T)
        )
    return generator


def _check_density(rho: np.ndarray, where: str) -> None:
    hermiticity = float(np.max(np.abs(rho - rho.conj().T)))
    if hermiticity > HERMITICITY_LIMIT:
        raise ConvergenceError(f"ρ потеряла эрмитовость ({where}): {hermiticity:.2e}", achieved=hermiticity)
    trace_drift = abs(np.trace(rho).real - 1.0)
    if trace_drift > TRACE_DRIFT_LIMIT:
        raise ConvergenceError(f"Дрейф следа ρ ({where}): {trace_drift:.2e}", achieved=trace_drift)
    lowest = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if lowest < POSITIVITY_LIMIT:
        raise ConvergenceError(
            f"ρ потеряла положительность ({where}): λ_min = {lowest:.2e}", achieved=lowest
        )


def lindblad_propagate(
    H_of_t: Hamiltonian,
    collapse: Sequence[Tuple[ComplexOperator, float]],
    rho0: np.ndarray,
    grid: TimeGrid,
    keep_snapshots: bool = False,
) -> Trajectory:
    """
    Решает dρ/dt = −i[H, ρ] + Σ r (LρL† − ½{L†L, ρ}).

    Эрмитовость, след и минимальное собственное значение ρ проверяются
    каждые POSITIVITY_CHECK_EVERY шагов и в конце.

    Raises:
        ValueError: Если ρ₀ не эрмитова, не положительна или след не равен 1
        ConvergenceError: При нарушении эрмитовости, следа или положительности
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if np.max(np.abs(rho0 - rho0.conj().T)) > HERMITICITY_LIMIT:
        raise ValueError("ρ₀ не эрмитова")
    if abs(np.trace(rho0).real - 1.0) > 1e-10:
        raise ValueError(f"След ρ₀ = {np.trace(rho0).real:.12f}")
    if np.min(np.linalg.eigvalsh(rho0)) < POSITIVITY_LIMIT:
        raise ValueError("ρ₀ не положительно полуопределена")

    jumps = [(operator.entries, rate) for operator, rate in collapse]
    anticommutator = sum(
        (rate * operator.conj().T @ operator for operator, rate in jumps),
        np.zeros_like(rho0),
    )

    def rhs(t: float, rho: np.ndarray) -> np.ndarray:
        H = H_of_t(t)
        result = -1j * (H @ rho - rho @ H) - 0.5 * (anticommutator @ rho + rho @ anticommutator)
        for L, rate in jumps:
            result = result + rate * (L @ rho @ L.conj().T)
        return result

    def monitor(index: int, t: float, rho: np.ndarray) -> None:
        if index % POSITIVITY_CHECK_EVERY == 0:
            _check_density(rho, f"t={t:.3e}")

    times, snapshots = _integrate(rhs, rho0, grid, keep_snapshots, monitor)
    _check_density(snapshots[-1], "t=T")
    drift = np.array([np.trace(s).real - 1.0 for s in snapshots])
    logger.debug(
        f"ρ: {grid.steps} шагов {grid.scheme.value}, {len(jumps)} каналов, дрейф следа {np.max(np.abs(drift)):.2e}"
    )
    return Trajectory(times, snapshots, drift, "density")
