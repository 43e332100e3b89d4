"""
Интегрирование полной модели резонатор–кутрит.

Статическая часть H_s диагонализуется один раз; в её картине взаимодействия
на каждом шаге применяется точная экспонента первого члена Магнуса,
осциллирующие множители которого интегрируются аналитически.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from src.device.model import DriveSpec, SystemParams, full_generator, static_matrices
from src.evolution.solver import (
    NORM_DRIFT_LIMIT,
    Scheme,
    TimeGrid,
    Trajectory,
    columns_defect,
    propagate_propagator,
)
from src.fock.operators import StateVector
from src.utils.errors import ConvergenceError

DEFAULT_MAGNUS_STEPS = 20000
SPOT_CHECK_FRACTION = 1.0 / 500
POINTS_PER_PERIOD = 50


def _phase_integral(omega: np.ndarray, dt: float) -> np.ndarray:
    """
    (e^{iωdt} − 1)/(iω), равное dt при ω → 0.
    """
    small = np.abs(omega * dt) < 1e-8
    safe = np.where(small, 1.0, omega)
    value = (np.exp(1j * safe * dt) - 1.0) / (1j * safe)
    return np.where(small, dt * (1 + 0.5j * omega * dt), value)


@dataclass(frozen=True)
class InteractionPicture:
    """
    Собственный базис H_s и оператор драйва в нём.

    Attributes:
        energies (np.ndarray): Собственные значения E_j
        vectors (np.ndarray): Столбцы собственных векторов V
        coupling (np.ndarray): G = V†(|g⟩⟨e| ⊗ I)V
    """

    energies: np.ndarray
    vectors: np.ndarray
    coupling: np.ndarray

    @classmethod
    def from_params(cls, p: SystemParams) -> "InteractionPicture":
        static, drive = static_matrices(p)
        energies, vectors = np.linalg.eigh(static)
        coupling = vectors.conj().T @ drive @ vectors
        return cls(energies=energies, vectors=vectors, coupling=coupling)

    def to_frame(self, columns: np.ndarray, t: float) -> np.ndarray:
        return np.exp(1j * self.energies * t)[:, None] * (self.vectors.conj().T @ columns)

    def to_lab(self, columns: np.ndarray, t: float) -> np.ndarray:
        return self.vectors @ (np.exp(-1j * self.energies * t)[:, None] * columns)


def magnus_propagate(
    p: SystemParams,
    spec: DriveSpec,
    basis_states: Sequence[StateVector],
    grid: Optional[TimeGrid] = None,
    keep_snapshots: bool = False,
    record_every: int = 1,
) -> Trajectory:
    """
    Распространяет столбцы пропагатора полной модели схемой magnus_ip.

    Args:
        p (SystemParams): Параметры системы
        spec (DriveSpec): Драйв
        basis_states (Sequence[StateVector]): Начальные состояния в совместном базисе
        grid (Optional[TimeGrid]): Сетка, по умолчанию [0, T] с 20000 шагами
        keep_snapshots (bool): Сохранять столбцы (в лабораторной системе)
        record_every (int): Сохранять каждый record_every-й узел

    Returns:
        Trajectory: kind="propagator"

    Raises:
        ConvergenceError: Если столбцы теряют ортонормированность
    """
    if grid is None:
        grid = TimeGrid(p.T, DEFAULT_MAGNUS_STEPS, Scheme.MAGNUS_IP)
    picture = InteractionPicture.from_params(p)
    dt = grid.dt
    gaps = picture.energies[:, None] - picture.energies[None, :]
    kernels = [picture.coupling * _phase_integral(gaps - detuning, dt) for detuning in spec.Delta_p]
    detunings = np.asarray(spec.Delta_p)

    columns = np.column_stack([np.asarray(s.amplitudes, dtype=complex) for s in basis_states])
    x = picture.to_frame(columns, grid.t0)
    times = grid.times()
    snapshots = [columns.copy()] if keep_snapshots else []
    recorded = [0]

    for i in range(grid.steps):
        t = times[i]
        amplitudes = spec.omega_tilde_at(t + dt / 2) * np.exp(-1j * detunings * t)
        rotation = np.exp(1j * picture.energies * t)
        block = sum(a * kernel for a, kernel in zip(amplitudes, kernels))
        block = rotation[:, None] * block * rotation.conj()[None, :]
        generator = block + block.conj().T
        w, U = np.linalg.eigh(generator)
        x = U @ (np.exp(-1j * w)[:, None] * (U.conj().T @ x))
        if keep_snapshots and ((i + 1) % record_every == 0 or i + 1 == grid.steps):
            snapshots.append(picture.to_lab(x, times[i + 1]))
            recorded.append(i + 1)

    final = picture.to_lab(x, grid.t1)
    if keep_snapshots:
        snapshots[-1] = final
        times = times[recorded]
    else:
        snapshots = [final]
        times = times[-1:]
    drift = np.array([columns_defect(s) for s in snapshots])
    trajectory = Trajectory(times, snapshots, drift, "propagator", {"basis_tag": "joint"})
    if trajectory.max_drift >= NORM_DRIFT_LIMIT:
        raise ConvergenceError(
            f"Столбцы пропагатора потеряли ортонормированность: {trajectory.max_drift:.2e}",
            achieved=trajectory.max_drift,
        )
    logger.debug(f"magnus_ip: {grid.steps} шагов, размерность {p.joint_dim}")
    return trajectory


def literal_step_limit(p: SystemParams) -> float:
    """
    Наибольший шаг rk4_fixed для полной модели: 2π/(50Δ).
    """
    return 2.0 * np.pi / (POINTS_PER_PERIOD * abs(p.Delta))


def literal_spot_check(
    p: SystemParams,
    spec: DriveSpec,
    basis_states: Sequence[StateVector],
    fraction: float = SPOT_CHECK_FRACTION,
    magnus_steps: int = 200,
) -> float:
    """
    Сравнивает magnus_ip с прямым rk4 по полному гамильтониану на [0, fraction·T].

    Returns:
        float: max |Δ| элементов столбцов в конце отрезка
    """
    t1 = fraction * p.T
    rk4_steps = int(np.ceil(t1 / literal_step_limit(p)))
    literal = propagate_propagator(
        full_generator(p, spec),
        basis_states,
        TimeGrid(t1, rk4_steps, Scheme.RK4_FIXED),
        max_step=literal_step_limit(p),
    )
    magnus = magnus_propagate(p, spec, basis_states, TimeGrid(t1, magnus_steps, Scheme.MAGNUS_IP))
    difference = float(np.max(np.abs(literal.final - magnus.final)))
    logger.info(f"Сверка magnus_ip с прямым rk4 на [0, {t1:.2e}] с: {difference:.2e} ({rk4_steps} шагов rk4)")
    return difference
