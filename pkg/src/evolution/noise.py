"""
Модуль ошибок управления: систематическая ошибка амплитуды и
аддитивный белый гауссов шум в полях Ω_x, Ω_y.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from loguru import logger

from src.device.model import DriveSpec
from src.path_design.geometric_path import FieldSamples


@dataclass(frozen=True)
class NoiseSpec:
    """
    Параметры ошибок управления.

    Attributes:
        epsilon (float): Систематическая ошибка ε
        snr_db (Optional[float]): Отношение сигнал/шум R_N, дБ (None: без шума)
        seed (int): 64-битное зерно генератора
    """

    epsilon: float = 0.0
    snr_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"Зерно должно быть 64-битным неотрицательным, получено {self.seed}")


def noise_generator(seed: int, index: int = 0) -> np.random.Generator:
    """
    Генератор Philox с потоком, определённым парой (seed, index).
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def with_systematic_error(spec: DriveSpec, epsilon: float) -> DriveSpec:
    """
    Масштабирует все три огибающие Ω̃₂ₖ на (1+ε).
    """
    return replace(spec, scale=spec.scale * (1.0 + epsilon))


def with_awgn(fields: FieldSamples, snr_db: Optional[float], seed: int, index: int = 0) -> FieldSamples:
    """
    Добавляет к Ω_x и Ω_y независимый гауссов шум.

    Мощность шума канала равна измеренной среднеквадратичной мощности
    сигнала этого канала, умноженной на 10^(−R_N/10).

    Args:
        fields (FieldSamples): Поля на равномерной сетке
        snr_db (Optional[float]): R_N в дБ; None или +inf: без шума
        seed (int): Зерно
        index (int): Номер реализации в серии

    Returns:
        FieldSamples: Зашумлённые поля на той же сетке

    Raises:
        ValueError: Пустая или неравномерная сетка
    """
    if len(fields) == 0:
        raise ValueError("Пустой набор отсчётов полей")
    if len(fields) > 2:
        steps = np.diff(fields.times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("Сетка отсчётов должна быть равномерной")
    if snr_db is None or np.isinf(snr_db):
        return fields

    rng = noise_generator(seed, index)
    ratio = 10.0 ** (-snr_db / 10.0)
    noisy = []
    for channel in (fields.omega_x, fields.omega_y):
        power = float(np.mean(channel**2))
        noisy.append(channel + rng.normal(0.0, np.sqrt(power * ratio), size=channel.shape))
    logger.debug(f"AWGN: R_N={snr_db} дБ, seed={seed}, index={index}")
    return FieldSamples(times=fields.times, omega_x=noisy[0], omega_y=noisy[1])


def empirical_snr_db(clean: FieldSamples, noisy: FieldSamples) -> float:
    """
    Измеренное отношение сигнал/шум по обоим каналам, дБ.
    """
    signal = np.concatenate([clean.omega_x, clean.omega_y])
    noise = np.concatenate([noisy.omega_x - clean.omega_x, noisy.omega_y - clean.omega_y])
    return float(10.0 * np.log10(np.mean(signal**2) / np.mean(noise**2)))
