"""
Модуль мер точности: средняя точность вентиля, точность состояния,
целевые логические вентили.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np

from src.fock.operators import LOGICAL_TAG, ComplexOperator, StateVector
from src.path_design.geometric_path import (
    GATE_TABLE,
    PAULI_X,
    PAULI_Z,
    GateName,
    GateSpec,
    dressed_basis,
)

FIDELITY_TOLERANCE = 1e-9
TRACE_CHECKPOINTS = 200

U_PI = PAULI_Z
U_NOT = PAULI_X
U_HADAMARD = (PAULI_Z + PAULI_X) / np.sqrt(2.0)

_TARGETS = {
    GateName.PI_PHASE: U_PI,
    GateName.NOT: U_NOT,
    GateName.HADAMARD: U_HADAMARD,
}


@dataclass(frozen=True)
class FidelityTrace:
    """
    Зависимость точности от времени.

    Значения проверяются на попадание в [0, 1] с допуском 1e-9 и обрезаются.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != np.asarray(self.times).shape:
            raise ValueError("Длины сетки и значений не совпадают")
        if np.any(values < -FIDELITY_TOLERANCE) or np.any(values > 1 + FIDELITY_TOLERANCE):
            raise ValueError(f"Точность вне [0, 1]: [{values.min()}, {values.max()}]")
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.clip(values, 0.0, 1.0))

    @property
    def final(self) -> float:
        return float(self.values[-1])


def _matrix(target: Union[ComplexOperator, np.ndarray]) -> np.ndarray:
    return target.entries if isinstance(target, ComplexOperator) else np.asarray(target, dtype=complex)


def average_gate_fidelity(
    columns: np.ndarray,
    target: Union[ComplexOperator, np.ndarray],
    logical_basis: Optional[np.ndarray] = None,
) -> float:
    """
    Средняя точность F̄ = [Tr(M†M) + |Tr M|²]/6, M = U_T†·P_c U P_c.

    Args:
        columns (np.ndarray): Столбцы U|𝕆⟩, U|𝟙⟩ (dim x 2)
        target (Union[ComplexOperator, np.ndarray]): Целевой вентиль 2x2
        logical_basis (Optional[np.ndarray]): Векторы |𝕆⟩, |𝟙⟩ в том же базисе (dim x 2);
            None, если columns уже 2x2 в логическом базисе

    Returns:
        float: F̄ ∈ [0, 1]

    Raises:
        ValueError: Несовпадение размерностей
    """
    columns = np.asarray(columns, dtype=complex)
    target_matrix = _matrix(target)
    if target_matrix.shape != (2, 2):
        raise ValueError(f"Целевой вентиль должен быть 2x2, получено {target_matrix.shape}")
    if logical_basis is not None:
        logical_basis = np.asarray(logical_basis, dtype=complex)
        if logical_basis.shape != columns.shape:
            raise ValueError(
                f"Размерности столбцов {columns.shape} и логического базиса {logical_basis.shape} не совпадают"
            )
        columns = logical_basis.conj().T @ columns
    if columns.shape != (2, 2):
        raise ValueError(f"Ожидались 2 логических столбца, получено {columns.shape}")
    M = target_matrix.conj().T @ columns
    l = 2
    value = (np.trace(M.conj().T @ M).real + abs(np.trace(M)) ** 2) / (l * (l + 1))
    return float(min(max(value, 0.0), 1.0 + FIDELITY_TOLERANCE))


def state_fidelity(rho: Union[np.ndarray, StateVector], target: StateVector) -> float:
    """
    ⟨target|ρ|target⟩ для матрицы плотности или чистого состояния.

    Raises:
        ValueError: Если ρ не эрмитова или размерности не совпадают
    """
    vector = np.asarray(target.amplitudes, dtype=complex)
    if isinstance(rho, StateVector):
        return float(abs(np.vdot(vector, rho.amplitudes)) ** 2)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (vector.size, vector.size):
        raise ValueError(f"Размерность ρ {rho.shape} не совпадает с состоянием {vector.size}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("ρ не эрмитова")
    value = np.vdot(vector, rho @ vector)
    if abs(value.imag) > 1e-12:
        raise ValueError(f"Мнимая часть ⟨ψ|ρ|ψ⟩ = {value.imag:.2e}")
    return float(value.real)


def target_gates() -> Dict[GateName, GateSpec]:
    """
    Вентили π-фазы, NOT и Адамара с параметрами (θ, Θ_g) из таблицы.
    """
    gates = {}
    for name, matrix in _TARGETS.items():
        theta, theta_g = GATE_TABLE[name]
        gates[name] = GateSpec(name, theta, theta_g, ComplexOperator(matrix, LOGICAL_TAG))
    return gates


def named_gate(name: Union[GateName, str]) -> GateSpec:
    return target_gates()[GateName(name)]


def custom_gate(theta: float, theta_g: float) -> GateSpec:
    """
    Произвольный вентиль e^{iΘ_g}|+⟩⟨+| + |−⟩⟨−| для заданных θ, Θ_g.
    """
    plus, minus = dressed_basis(theta)
    matrix = np.exp(1j * theta_g) * np.outer(plus, plus.conj()) + np.outer(minus, minus.conj())
    return GateSpec(GateName.CUSTOM, theta, theta_g, ComplexOperator(matrix, LOGICAL_TAG))


def fidelity_trace(
    times: np.ndarray,
    snapshots,
    target: Union[ComplexOperator, np.ndarray],
    logical_basis: np.ndarray,
    frame=None,
) -> FidelityTrace:
    """
    F̄(t) по снимкам столбцов пропагатора.

    Args:
        frame: Функция t -> диагональ фазовой поправки (для полной модели) или None
    """
    values = []
    for t, columns in zip(times, snapshots):
        if frame is not None:
            columns = frame(t)[:, None] * columns
        values.append(average_gate_fidelity(columns, target, logical_basis))
    return FidelityTrace(np.asarray(times), np.asarray(values))


def checkpoint_indices(steps: int, count: int = TRACE_CHECKPOINTS) -> np.ndarray:
    """
    Индексы узлов сетки из steps шагов для count равномерных контрольных точек.
    """
    return np.unique(np.round(np.linspace(0, steps, count + 1)).astype(int))
