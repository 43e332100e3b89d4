"""
Модуль фоковской алгебры для резонатора и кутрита.
Лестничные операторы, оператор смещения, смещённые фоковские состояния,
логические состояния биномиального кода и тензорное вложение.

Порядок базиса совместного пространства фиксирован: индекс кутрита
медленный, индекс резонатора быстрый (|j⟩_q ⊗ |n⟩_c -> j*(n_max+1) + n).
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import expm

# Уровни кутрита
QUTRIT_LEVELS: Dict[str, int] = {"g": 0, "e": 1, "f": 2}

QUTRIT_TAG = "qutrit"
JOINT_TAG = "joint"
EFFECTIVE2_TAG = "effective2"
EFFECTIVE3_TAG = "effective3"
LOGICAL_TAG = "logical"

# Табличные значения β, только для отчёта о расхождении
TABULATED_BETA_VALUES: Dict[int, float] = {0: 0.1353, 2: 0.1914, 4: 0.1105}


def fock_tag(n_max: int) -> str:
    """
    Возвращает метку фоковского базиса с отсечкой n_max.
    """
    return f"fock({n_max})"


def _frozen(array: np.ndarray) -> np.ndarray:
    data = np.array(array, dtype=complex)
    data.setflags(write=False)
    return data


@dataclass(frozen=True)
class ComplexOperator:
    """
    Плотная комплексная квадратная матрица в объявленном базисе.

    Attributes:
        entries (np.ndarray): Матрица dim x dim
        basis_tag (str): Метка базиса (fock(n), qutrit, joint, effective2, effective3, logical)
    """

    entries: np.ndarray
    basis_tag: str
    dim: int = field(init=False)

    def __post_init__(self):
        data = _frozen(self.entries)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"Оператор должен быть квадратной матрицей, получено {data.shape}")
        object.__setattr__(self, "entries", data)
        object.__setattr__(self, "dim", data.shape[0])

    def dag(self) -> "ComplexOperator":
        return ComplexOperator(self.entries.conj().T, self.basis_tag)

    def __matmul__(self, other: "ComplexOperator") -> "ComplexOperator":
        _require_same_tag(self.basis_tag, other.basis_tag)
        return ComplexOperator(self.entries @ other.entries, self.basis_tag)

    def __add__(self, other: "ComplexOperator") -> "ComplexOperator":
        _require_same_tag(self.basis_tag, other.basis_tag)
        return ComplexOperator(self.entries + other.entries, self.basis_tag)

    def __sub__(self, other: "ComplexOperator") -> "ComplexOperator":
        _require_same_tag(self.basis_tag, other.basis_tag)
        return ComplexOperator(self.entries - other.entries, self.basis_tag)

    def scaled(self, factor: complex) -> "ComplexOperator":
        return ComplexOperator(factor * self.entries, self.basis_tag)

    def apply(self, state: "StateVector") -> "StateVector":
        """
        Действие оператора на вектор состояния того же базиса.
        """
        _require_same_tag(self.basis_tag, state.basis_tag)
        return StateVector(self.entries @ state.amplitudes, self.basis_tag)

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        """
        Проверка эрмитовости по относительной норме Фробениуса.
        """
        scale = max(np.linalg.norm(self.entries), 1.0)
        return np.linalg.norm(self.entries - self.entries.conj().T) <= rtol * scale

    def unitarity_defect(self) -> float:
        """
        Возвращает ‖U†U − I‖_F.
        """
        identity = np.eye(self.dim)
        return float(np.linalg.norm(self.entries.conj().T @ self.entries - identity))


@dataclass(frozen=True)
class StateVector:
    """
    Вектор состояния в объявленном базисе.
    """

    amplitudes: np.ndarray
    basis_tag: str
    dim: int = field(init=False)

    def __post_init__(self):
        data = _frozen(np.ravel(self.amplitudes))
        object.__setattr__(self, "amplitudes", data)
        object.__setattr__(self, "dim", data.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        """
        Скалярное произведение ⟨self|other⟩.
        """
        _require_same_tag(self.basis_tag, other.basis_tag)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DisplacedBasis:
    """
    Таблица коэффициентов β_{m,n} = ⟨m|D(α₀)|n⟩.

    Attributes:
        alpha0 (float): Смещение α₀
        n_max (int): Фоковская отсечка
        coefficients (np.ndarray): Матрица β, строки m, столбцы n
    """

    alpha0: float
    n_max: int
    coefficients: np.ndarray

    def beta(self, m: int, n: int = 0) -> complex:
        return complex(self.coefficients[m, n])

    def normalization_defect(self, n: int) -> float:
        """
        |Σ_m |β_{m,n}|² − 1|, ограничено отсечкой.
        """
        return abs(float(np.sum(np.abs(self.coefficients[:, n]) ** 2)) - 1.0)

    def state(self, n: int) -> StateVector:
        return StateVector(self.coefficients[:, n], fock_tag(self.n_max))


def _require_same_tag(left: str, right: str) -> None:
    if left != right:
        raise ValueError(f"Несовпадение базисов: {left} и {right}")


def annihilation_op(n_max: int) -> ComplexOperator:
    """
    Оператор уничтожения a в фоковском базисе {|0⟩..|n_max⟩}.

    Args:
        n_max (int): Фоковская отсечка (>= 1)

    Returns:
        ComplexOperator: Матрица с ⟨n|a|n+1⟩ = √(n+1)

    Raises:
        ValueError: Если n_max < 1
    """
    if n_max < 1:
        raise ValueError(f"n_max должно быть >= 1, получено {n_max}")
    entries = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)
    return ComplexOperator(entries, fock_tag(n_max))


def creation_op(n_max: int) -> ComplexOperator:
    return annihilation_op(n_max).dag()


def number_op(n_max: int) -> ComplexOperator:
    return ComplexOperator(np.diag(np.arange(n_max + 1, dtype=float)), fock_tag(n_max))


def identity_op(basis_tag: str, dim: int) -> ComplexOperator:
    return ComplexOperator(np.eye(dim), basis_tag)


def fock_state(n: int, n_max: int) -> StateVector:
    if n < 0 or n > n_max:
        raise ValueError(f"Фоковское состояние |{n}⟩ вне отсечки n_max={n_max}")
    amplitudes = np.zeros(n_max + 1, dtype=complex)
    amplitudes[n] = 1.0
    return StateVector(amplitudes, fock_tag(n_max))


def displacement_op(alpha: float, n_max: int) -> ComplexOperator:
    """
    Оператор смещения D(α) = exp[α(a† − a)] для вещественного α.

    Матричная экспонента считается через scaling-and-squaring с аппроксимантом
    Паде (scipy.linalg.expm). Унитарность ограничена отсечкой.
    """
    a = annihilation_op(n_max).entries
    generator = alpha * (a.conj().T - a)
    return ComplexOperator(expm(generator), fock_tag(n_max))


def displaced_fock(n: int, alpha: float, n_max: int) -> StateVector:
    """
    Смещённое фоковское состояние |ñ⟩ = D(α)|n⟩.

    Raises:
        ValueError: Если n > n_max
    """
    if n > n_max:
        raise ValueError(f"n={n} превышает отсечку n_max={n_max}")
    return displacement_op(alpha, n_max).apply(fock_state(n, n_max))


def coherent_coefficients(alpha: float, count: int) -> np.ndarray:
    """
    Ряд когерентного состояния e^{−α²/2} α^m / √m!, m < count.
    """
    m = np.arange(count)
    log_fact = np.array([math.lgamma(k + 1) for k in m])
    with np.errstate(divide="ignore"):
        magnitude = np.exp(-0.5 * alpha**2 - 0.5 * log_fact) * np.power(alpha, m, dtype=float)
    return magnitude


def build_displaced_basis(alpha0: float, n_max: int) -> DisplacedBasis:
    """
    Строит таблицу β_{m,n} для смещения α₀.
    """
    coefficients = displacement_op(alpha0, n_max).entries
    basis = DisplacedBasis(alpha0=alpha0, n_max=n_max, coefficients=_frozen(coefficients))
    defect = basis.normalization_defect(0)
    logger.debug(f"Смещённый базис α₀={alpha0:.4f}, n_max={n_max}, дефект нормы |0̃⟩: {defect:.2e}")
    return basis


def beta_discrepancy_report(basis: DisplacedBasis) -> Dict[int, Dict[str, float]]:
    """
    Сравнивает β_{2k,0} из матричной экспоненты с табличными значениями.

    Returns:
        Dict[int, Dict[str, float]]: {m: {"tabulated", "computed", "ratio"}}
    """
    report = {}
    for m, tabulated in TABULATED_BETA_VALUES.items():
        computed = basis.beta(m, 0).real
        report[m] = {
            "tabulated": tabulated,
            "computed": computed,
            "ratio": computed / tabulated,
        }
    return report


def binomial_logical_states(n_max: int) -> Tuple[StateVector, StateVector]:
    """
    Логические состояния биномиального кода |𝕆⟩ = (|0⟩+|4⟩)/√2, |𝟙⟩ = |2⟩.

    Raises:
        ValueError: Если n_max < 4
    """
    if n_max < 4:
        raise ValueError(f"Для биномиального кода нужно n_max >= 4, получено {n_max}")
    zero = (fock_state(0, n_max).amplitudes + fock_state(4, n_max).amplitudes) / np.sqrt(2.0)
    return StateVector(zero, fock_tag(n_max)), fock_state(2, n_max)


def dressed_states(theta: float, n_max: int) -> Tuple[StateVector, StateVector]:
    """
    Одетые состояния |+⟩ = cosθ|𝕆⟩ + sinθ|𝟙⟩ и |−⟩ = sinθ|𝕆⟩ − cosθ|𝟙⟩.
    """
    zero, one = binomial_logical_states(n_max)
    plus = np.cos(theta) * zero.amplitudes + np.sin(theta) * one.amplitudes
    minus = np.sin(theta) * zero.amplitudes - np.cos(theta) * one.amplitudes
    return StateVector(plus, zero.basis_tag), StateVector(minus, zero.basis_tag)


def knill_laflamme_matrix() -> Tuple[Tuple[Fraction, Fraction], Tuple[Fraction, Fraction]]:
    """
    Точная (рациональная) матрица ⟨ϱ|a†a|ϱ′⟩ для ϱ, ϱ′ ∈ {𝕆, 𝟙}.

    Состояния заданы квадратами амплитуд со знаком; произведение амплитуд
    на одном фоковском уровне извлекается как точный квадратный корень.
    """
    # n -> (знак, квадрат амплитуды)
    code = {
        "O": {0: (1, Fraction(1, 2)), 4: (1, Fraction(1, 2))},
        "1": {2: (1, Fraction(1))},
    }

    def exact_sqrt(value: Fraction) -> Fraction:
        num, den = math.isqrt(value.numerator), math.isqrt(value.denominator)
        if num * num != value.numerator or den * den != value.denominator:
            raise ValueError(f"Произведение амплитуд {value} не является точным квадратом")
        return Fraction(num, den)

    def element(left: str, right: str) -> Fraction:
        total = Fraction(0)
        for n, (sign_l, weight_l) in code[left].items():
            if n in code[right]:
                sign_r, weight_r = code[right][n]
                total += n * sign_l * sign_r * exact_sqrt(weight_l * weight_r)
        return total

    return (
        (element("O", "O"), element("O", "1")),
        (element("1", "O"), element("1", "1")),
    )


def qutrit_op(bra_ket: str) -> ComplexOperator:
    """
    Проектор/переход кутрита |j⟩⟨k| по строке вида "ge" (= |g⟩⟨e|).
    """
    ket, bra = QUTRIT_LEVELS[bra_ket[0]], QUTRIT_LEVELS[bra_ket[1]]
    entries = np.zeros((3, 3), dtype=complex)
    entries[ket, bra] = 1.0
    return ComplexOperator(entries, QUTRIT_TAG)


def qutrit_state(level: str) -> StateVector:
    amplitudes = np.zeros(3, dtype=complex)
    amplitudes[QUTRIT_LEVELS[level]] = 1.0
    return StateVector(amplitudes, QUTRIT_TAG)


def tensor_embed(cavity_op: ComplexOperator, qutrit_operator: ComplexOperator) -> ComplexOperator:
    """
    Тензорное произведение qutrit ⊗ cavity (индекс кутрита медленный).

    Args:
        cavity_op (ComplexOperator): Оператор в базисе fock(n_max)
        qutrit_operator (ComplexOperator): Оператор в базисе qutrit

    Returns:
        ComplexOperator: Оператор размерности 3(n_max+1) с меткой joint

    Raises:
        ValueError: Если метки базисов не fock(n)/qutrit
    """
    if not cavity_op.basis_tag.startswith("fock(") or qutrit_operator.basis_tag != QUTRIT_TAG:
        raise ValueError(
            f"Ожидались базисы fock(n)/qutrit, получено {cavity_op.basis_tag}/{qutrit_operator.basis_tag}"
        )
    return ComplexOperator(np.kron(qutrit_operator.entries, cavity_op.entries), JOINT_TAG)


def joint_state(cavity_state: StateVector, level: str) -> StateVector:
    """
    Состояние |level⟩_q ⊗ |ψ⟩_c в совместном базисе.
    """
    if not cavity_state.basis_tag.startswith("fock("):
        raise ValueError(f"Ожидался фоковский базис, получено {cavity_state.basis_tag}")
    amplitudes = np.kron(qutrit_state(level).amplitudes, cavity_state.amplitudes)
    return StateVector(amplitudes, JOINT_TAG)


def joint_identity(n_max: int) -> ComplexOperator:
    return identity_op(JOINT_TAG, 3 * (n_max + 1))
