"""
Аппроксимация зависимости точности от SNR: F = a·e^{−b·R_N} + c.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import least_squares

from src.utils.errors import ConvergenceError

MIN_POINTS = 4
FLAT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FitResult:
    """
    Параметры аппроксимации.

    Attributes:
        a (float): Амплитуда
        b (float): Показатель, 1/дБ
        c (float): Плато
        rms_residual (float): Среднеквадратичная невязка
        degenerate (bool): b не определяется (постоянные данные)
    """

    a: float
    b: float
    c: float
    rms_residual: float
    degenerate: bool = False

    def predict(self, snr_db) -> np.ndarray:
        return self.a * np.exp(-self.b * np.asarray(snr_db, dtype=float)) + self.c


def _initial_guess(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """
    Начальное приближение линеаризацией log|y − c₀| по R_N.
    """
    span = y[-1] - y[0]
    c0 = y[-1] + 0.01 * span
    log_distance = np.log(np.abs(y - c0))
    slope, intercept = np.polyfit(x, log_distance, 1)
    b0 = max(-slope, 1e-3)
    a0 = -np.sign(span) * np.exp(intercept) if span != 0 else 0.0
    return float(a0), float(b0), float(c0)


def fit_exponential(points: Sequence[Tuple[float, float]]) -> FitResult:
    """
    Аппроксимация F(R_N) = a·e^{−b·R_N} + c методом Левенберга–Марквардта.

    Args:
        points (Sequence[Tuple[float, float]]): Пары (R_N, средняя точность)

    Returns:
        FitResult: Параметры и невязка

    Raises:
        ValueError: Меньше 4 точек или повторяющиеся R_N
        ConvergenceError: Решатель не сошёлся
    """
    if len(points) < MIN_POINTS:
        raise ValueError(f"Нужно минимум {MIN_POINTS} точки, получено {len(points)}")
    data = np.array(sorted(points), dtype=float)
    x, y = data[:, 0], data[:, 1]
    if np.unique(x).size != x.size:
        raise ValueError("Значения R_N должны быть различными")

    if np.ptp(y) <= FLAT_TOLERANCE * max(1.0, abs(np.mean(y))):
        logger.warning("Данные постоянны: показатель b не определяется")
        return FitResult(a=0.0, b=0.0, c=float(np.mean(y)), rms_residual=float(np.std(y)), degenerate=True)

    def residuals(params: np.ndarray) -> np.ndarray:
        a, b, c = params
        return a * np.exp(-b * x) + c - y

    guess = _initial_guess(x, y)
    result = least_squares(
        residuals, np.array(guess), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000
    )
    rms = float(np.sqrt(np.mean(result.fun**2)))
    if result.status <= 0:
        raise ConvergenceError(
            f"Аппроксимация не сошлась ({result.message}), невязка {rms:.3e}", achieved=rms
        )
    a, b, c = (float(v) for v in result.x)
    logger.info(f"Аппроксимация: a={a:.6f}, b={b:.4f}, c={c:.6f}, невязка {rms:.2e}")
    return FitResult(a=a, b=b, c=c, rms_residual=rms)
