"""
Модуль построения геометрического пути методом обратного проектирования
через динамический инвариант.

Эффективный двухуровневый базис (effective2): индекс 0 = |0̃,e⟩, индекс 1 = |+,g⟩.
В этом порядке эффективные операторы Паули совпадают со стандартными матрицами.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import quad

from src.fock.operators import EFFECTIVE2_TAG, LOGICAL_TAG, ComplexOperator, StateVector
from src.utils.errors import ConvergenceError

QUAD_EPSABS = 1e-9
QUAD_TOLERANCE = 1e-7
DEFAULT_SAMPLE_COUNT = 4001
DEFAULT_CHI0 = 1.0


class GateName(Enum):
    """
    Именованные логические вентили.
    """

    PI_PHASE = "pi_phase"
    NOT = "not"
    HADAMARD = "hadamard"
    CUSTOM = "custom"


# (θ, Θ_g) для именованных вентилей
GATE_TABLE: Dict[GateName, Tuple[float, float]] = {
    GateName.PI_PHASE: (np.pi, np.pi),
    GateName.NOT: (np.pi / 4, np.pi),
    GateName.HADAMARD: (np.pi / 8, np.pi),
}

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class GateSpec:
    """
    Описание логического вентиля.

    Attributes:
        name (GateName): Имя вентиля
        theta (float): Угол θ одетых состояний, рад
        theta_g (float): Геометрическая фаза Θ_g, рад
        target_unitary (ComplexOperator): Целевая 2x2 матрица в span{|𝕆⟩, |𝟙⟩}
    """

    name: GateName
    theta: float
    theta_g: float
    target_unitary: ComplexOperator

    def __post_init__(self):
        if self.target_unitary.dim != 2:
            raise ValueError("Целевой вентиль должен быть 2x2")
        if self.target_unitary.unitarity_defect() > 1e-12:
            raise ValueError(f"Целевой вентиль {self.name.value} не унитарен")
        if self.name in GATE_TABLE:
            theta, theta_g = GATE_TABLE[self.name]
            if not (np.isclose(self.theta, theta) and np.isclose(self.theta_g, theta_g)):
                raise ValueError(
                    f"Параметры {self.name.value} не совпадают с таблицей: ({theta}, {theta_g})"
                )


@dataclass(frozen=True)
class PhaseRecord:
    """
    Фазы Льюиса–Ризенфельда на ветви |φ₋⟩ в момент t.
    """

    t: float
    theta_d_minus: float
    theta_g_minus: float
    mu_minus: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu_minus", self.theta_d_minus + self.theta_g_minus)


@dataclass(frozen=True)
class FieldSamples:
    """
    Поля управления Ω_x, Ω_y на равномерной сетке.

    Между узлами поля интерполируются линейно.
    """

    times: np.ndarray
    omega_x: np.ndarray
    omega_y: np.ndarray

    def __post_init__(self):
        for name in ("times", "omega_x", "omega_y"):
            data = np.array(getattr(self, name), dtype=float)
            data.setflags(write=False)
            object.__setattr__(self, name, data)
        if not (self.times.shape == self.omega_x.shape == self.omega_y.shape):
            raise ValueError("Сетка и поля должны иметь одинаковую длину")

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def at(self, t: float) -> Tuple[float, float]:
        return (
            float(np.interp(t, self.times, self.omega_x)),
            float(np.interp(t, self.times, self.omega_y)),
        )

    def omega0(self, t: float) -> complex:
        """
        Комплексная огибающая Ω₀ = (Ω_x + iΩ_y)/2.
        """
        omega_x, omega_y = self.at(t)
        return 0.5 * (omega_x + 1j * omega_y)


def _check_time(t: float, T: float) -> None:
    # допуск на округление сетки
    if t < -1e-15 * T or t > T * (1 + 1e-12):
        raise ValueError(f"t={t} вне интервала [0, {T}]")


def gamma1(t: float, T: float) -> float:
    """
    γ₁(t) = π sin²(πt/T).

    Raises:
        ValueError: Если t вне [0, T]
    """
    _check_time(t, T)
    return float(np.pi * np.sin(np.pi * t / T) ** 2)


def gamma1_dot(t: float, T: float) -> float:
    return float(np.pi**2 / T * np.sin(2 * np.pi * t / T))


def xi(t: float, T: float) -> float:
    """
    Ступенька ξ(t): 0 на [0, T/2), 1 на [T/2, T].
    """
    return 0.0 if t < T / 2 else 1.0


def gamma2(t: float, T: float, theta_g: float, chi0: float = DEFAULT_CHI0) -> float:
    """
    γ₂(t) = −Θ_g ξ(t) + χ₀·(4/3) sin³γ₁(t).
    """
    g1 = gamma1(t, T)
    return float(-theta_g * xi(t, T) + chi0 * 4.0 / 3.0 * np.sin(g1) ** 3)


@dataclass(frozen=True)
class GeometricPath:
    """
    Геометрический путь: γ₁, γ₂, Θ_g, χ₀ и поля управления на сетке.

    Гладкая часть γ̃₂ по умолчанию χ₀·(4/3)sin³γ₁; её можно заменить
    произвольной функцией, симметричной относительно T/2.

    Attributes:
        T (float): Длительность, с
        theta_g (float): Θ_g, рад
        chi0 (float): Коэффициент χ₀
        sample_count (int): Число узлов сетки полей
    """

    T: float
    theta_g: float
    chi0: float = DEFAULT_CHI0
    sample_count: int = DEFAULT_SAMPLE_COUNT
    smooth_gamma2: Optional[Callable[[float], float]] = None
    smooth_gamma2_dot: Optional[Callable[[float], float]] = None
    fields: FieldSamples = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"T должно быть положительным, получено {self.T}")
        if self.sample_count < 3:
            raise ValueError("Нужно минимум 3 узла сетки")
        if (self.smooth_gamma2 is None) != (self.smooth_gamma2_dot is None):
            raise ValueError("γ̃₂ и её производная задаются вместе")
        times = self.sample_times()
        g1 = np.array([gamma1(t, self.T) for t in times])
        if np.max(np.abs(g1 - g1[::-1])) > 1e-12:
            raise ValueError("γ₁ не симметрична относительно T/2")
        fields = np.array([control_fields(t, self) for t in times])
        object.__setattr__(
            self, "fields", FieldSamples(times=times, omega_x=fields[:, 0], omega_y=fields[:, 1])
        )
        logger.debug(
            f"Путь построен: T={self.T:.3e} с, Θ_g={self.theta_g:.4f}, χ₀={self.chi0}, "
            f"узлов {self.sample_count}"
        )

    @classmethod
    def designed(cls, T: float, theta_g: float, chi0: float = DEFAULT_CHI0, **kwargs) -> "GeometricPath":
        return cls(T=T, theta_g=theta_g, chi0=chi0, **kwargs)

    @classmethod
    def reference(cls, T: float, theta_g: float, **kwargs) -> "GeometricPath":
        """
        Опорный путь с γ̃₂ ≡ 0 (ступенька −Θ_g сохраняется).
        """
        return cls(T=T, theta_g=theta_g, chi0=0.0, **kwargs)

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.sample_count)

    def gamma1(self, t: float) -> float:
        return gamma1(t, self.T)

    def gamma1_dot(self, t: float) -> float:
        return gamma1_dot(t, self.T)

    def smooth(self, t: float) -> float:
        """
        Гладкая часть γ̃₂(t).
        """
        if self.smooth_gamma2 is not None:
            return float(self.smooth_gamma2(t))
        return float(self.chi0 * 4.0 / 3.0 * np.sin(self.gamma1(t)) ** 3)

    def smooth_dot(self, t: float) -> float:
        if self.smooth_gamma2_dot is not None:
            return float(self.smooth_gamma2_dot(t))
        g1 = self.gamma1(t)
        return float(4.0 * self.chi0 * self.gamma1_dot(t) * np.sin(g1) ** 2 * np.cos(g1))

    def tan_term(self, t: float) -> float:
        """
        γ̇₂ tanγ₁ без особенности: для семейства χ₀ равно 4χ₀γ̇₁sin³γ₁.
        """
        if self.smooth_gamma2_dot is not None:
            return float(self.smooth_gamma2_dot(t) * np.tan(self.gamma1(t)))
        return float(4.0 * self.chi0 * self.gamma1_dot(t) * np.sin(self.gamma1(t)) ** 3)

    def gamma2(self, t: float) -> float:
        _check_time(t, self.T)
        return float(-self.theta_g * xi(t, self.T) + self.smooth(t))


def control_fields(t: float, path: GeometricPath) -> Tuple[float, float]:
    """
    Поля управления из уравнения инварианта.

    Ω_x = −(γ̇₁cosγ₂ − γ̇₂tanγ₁sinγ₂), Ω_y = γ̇₁sinγ₂ + γ̇₂tanγ₁cosγ₂
    при H_e = ½(Ω_xσ_x + Ω_yσ_y). В T/2 берётся правый предел γ₂.

    Returns:
        Tuple[float, float]: (Ω_x, Ω_y), рад/с
    """
    g1_dot = path.gamma1_dot(t)
    g2 = path.gamma2(t)
    tan_term = path.tan_term(t)
    omega_x = -(g1_dot * np.cos(g2) - tan_term * np.sin(g2))
    omega_y = g1_dot * np.sin(g2) + tan_term * np.cos(g2)
    return float(omega_x), float(omega_y)


def _quad(func: Callable[[float], float], lower: float, upper: float) -> float:
    if upper <= lower:
        return 0.0
    value, abserr = quad(func, lower, upper, epsabs=QUAD_EPSABS, epsrel=0.0, limit=200)
    if abserr > QUAD_TOLERANCE:
        raise ConvergenceError(
            f"Квадратура не сошлась на [{lower:.3e}, {upper:.3e}]: ошибка {abserr:.2e}",
            achieved=abserr,
        )
    return float(value)


def lr_phases(path: GeometricPath, t: float) -> PhaseRecord:
    """
    Динамическая и геометрическая фазы ветви |φ₋⟩ к моменту t.

    θ̇_d⁻ = γ̇₂sin²γ₁/(2cosγ₁), θ̇_g⁻ = −γ̇₂sin²(γ₁/2). Интегрирование
    адаптивной квадратурой Гаусса–Кронрода отдельно на [0, T/2) и [T/2, t];
    вклад ступеньки −Θ_g в T/2 добавляется аналитически.

    Raises:
        ConvergenceError: Если квадратура не достигла допуска
    """
    _check_time(t, path.T)
    t = min(max(t, 0.0), path.T)
    half = path.T / 2

    def dynamic_rate(s: float) -> float:
        return 0.5 * np.sin(path.gamma1(s)) * path.tan_term(s)

    def geometric_rate(s: float) -> float:
        return -path.smooth_dot(s) * np.sin(path.gamma1(s) / 2) ** 2

    theta_d = _quad(dynamic_rate, 0.0, min(t, half))
    theta_g = _quad(geometric_rate, 0.0, min(t, half))
    if t >= half:
        g1_half = path.gamma1(half)
        # ступенька −Θ_g в γ₂
        theta_g += path.theta_g * np.sin(g1_half / 2) ** 2
        theta_d -= path.theta_g * np.sin(g1_half) ** 2 / (2 * np.cos(g1_half))
        theta_d += _quad(dynamic_rate, half, t)
        theta_g += _quad(geometric_rate, half, t)
    return PhaseRecord(t=t, theta_d_minus=float(theta_d), theta_g_minus=float(theta_g))


def chi(path: GeometricPath, t: float) -> float:
    """
    χ(t) = γ₂(t) + 2μ₋(t).
    """
    return path.gamma2(t) + 2.0 * lr_phases(path, t).mu_minus


def invariant_op(gamma_1: float, gamma_2: float) -> ComplexOperator:
    """
    Динамический инвариант I = sinγ₁sinγ₂σ_x + sinγ₁cosγ₂σ_y + cosγ₁σ_z.
    """
    entries = (
        np.sin(gamma_1) * np.sin(gamma_2) * PAULI_X
        + np.sin(gamma_1) * np.cos(gamma_2) * PAULI_Y
        + np.cos(gamma_1) * PAULI_Z
    )
    return ComplexOperator(entries, EFFECTIVE2_TAG)


def bloch_hamiltonian(omega_x: float, omega_y: float) -> ComplexOperator:
    """
    H_e = ½(Ω_xσ_x + Ω_yσ_y) в базисе effective2.
    """
    return ComplexOperator(0.5 * (omega_x * PAULI_X + omega_y * PAULI_Y), EFFECTIVE2_TAG)


def phi_plus(path: GeometricPath, t: float) -> StateVector:
    g1, g2 = path.gamma1(t), path.gamma2(t)
    return StateVector(
        np.array([np.cos(g1 / 2), 1j * np.exp(-1j * g2) * np.sin(g1 / 2)]), EFFECTIVE2_TAG
    )


def phi_minus(path: GeometricPath, t: float) -> StateVector:
    g1, g2 = path.gamma1(t), path.gamma2(t)
    return StateVector(
        np.array([1j * np.exp(1j * g2) * np.sin(g1 / 2), np.cos(g1 / 2)]), EFFECTIVE2_TAG
    )


def sensitivity_Qg(path: GeometricPath) -> float:
    """
    Чувствительность к систематической ошибке Q_g = |∫e^{iχ}γ̇₁sin²γ₁dt|².

    χ(t) строится из γ₂ + 2μ₋, а не из замкнутой формы.
    """
    half = path.T / 2

    def weight(s: float) -> float:
        return path.gamma1_dot(s) * np.sin(path.gamma1(s)) ** 2

    def real_part(s: float) -> float:
        return np.cos(chi(path, s)) * weight(s)

    def imag_part(s: float) -> float:
        return np.sin(chi(path, s)) * weight(s)

    total = 0j
    for lower, upper in ((0.0, half), (half, path.T)):
        total += _quad(real_part, lower, upper) + 1j * _quad(imag_part, lower, upper)
    value = float(abs(total) ** 2)
    logger.debug(f"Q_g = {value:.3e} (χ₀={path.chi0}, Θ_g={path.theta_g:.4f})")
    return value


def qg_closed_form(theta_g: float, chi0: float) -> float:
    """
    Аналитическое Q_g для семейства γ̃₂ = χ₀(4/3)sin³γ₁.
    """
    if chi0 == 0:
        return float((np.pi / 2) ** 2 * abs(1 - np.exp(1j * theta_g)) ** 2)
    amplitude = (np.exp(2j * np.pi * chi0) - 1) * (1 - np.exp(1j * theta_g)) / (4 * chi0)
    return float(abs(amplitude) ** 2)


def dressed_basis(theta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Векторы |+⟩, |−⟩ в логическом базисе (|𝕆⟩, |𝟙⟩).
    """
    plus = np.array([np.cos(theta), np.sin(theta)], dtype=complex)
    minus = np.array([np.sin(theta), -np.cos(theta)], dtype=complex)
    return plus, minus


def gate_unitary(gate: GateSpec) -> ComplexOperator:
    """
    U = e^{iΘ_g}|+⟩⟨+| + |−⟩⟨−| в логическом базисе.
    """
    plus, minus = dressed_basis(gate.theta)
    entries = np.exp(1j * gate.theta_g) * np.outer(plus, plus.conj()) + np.outer(minus, minus.conj())
    return ComplexOperator(entries, LOGICAL_TAG)


def invariant_residual(path: GeometricPath, points: int = DEFAULT_SAMPLE_COUNT) -> float:
    """
    max‖i·dI/dt − [H_e, I]‖_F / max‖H_e‖_F на равномерной сетке.

    dI/dt берётся пятиточечной центральной разностью; узлы рядом с T/2
    и с концами интервала пропускаются.
    """
    times = np.linspace(0.0, path.T, points)
    h = times[1] - times[0]
    half_index = int(np.argmin(np.abs(times - path.T / 2)))

    invariants = np.array(
        [invariant_op(path.gamma1(t), path.gamma2(t)).entries for t in times]
    )
    hamiltonians = np.array(
        [bloch_hamiltonian(*control_fields(t, path)).entries for t in times]
    )
    scale = max(float(np.max(np.linalg.norm(hamiltonians, axis=(1, 2)))), 1e-300)

    worst = 0.0
    for i in range(2, points - 2):
        if abs(i - half_index) <= 2:
            continue
        derivative = (
            -invariants[i + 2] + 8 * invariants[i + 1] - 8 * invariants[i - 1] + invariants[i - 2]
        ) / (12 * h)
        H, I = hamiltonians[i], invariants[i]
        residual = 1j * derivative - (H @ I - I @ H)
        worst = max(worst, float(np.linalg.norm(residual)))
    return worst / scale
