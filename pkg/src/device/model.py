"""
Модуль физической модели: параметры системы резонатор–кутрит,
синтез трёхчастотного драйва, полный и эффективный гамильтонианы,
проверка дисперсионного режима.
"""

import functools
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from loguru import logger

from src.fock.operators import (
    EFFECTIVE3_TAG,
    ComplexOperator,
    DisplacedBasis,
    annihilation_op,
    binomial_logical_states,
    build_displaced_basis,
    dressed_states,
    identity_op,
    fock_tag,
    number_op,
    qutrit_op,
    tensor_embed,
)
from src.path_design.geometric_path import FieldSamples, GateSpec, GeometricPath, control_fields

TWO_PI = 2.0 * np.pi
MIN_BETA = 1e-3
CODE_LEVELS = (0, 2, 4)
DEFAULT_VARSIGMA = 0.1
REGIME_TOLERANCE = 5.0

# Порядок отношения по ς
REGIME_ORDERS = {
    "Omega/Delta": 1,
    "lambda_sqrtN1/Delta": 1,
    "Delta_p/Delta": 2,
    "delta/Delta": 2,
    "Omega_tilde_peak/Delta": 3,
}


class Calibration:
    """
    Способы калибровки частот и амплитуд драйва.
    """

    PERTURBATIVE = "perturbative"
    DRESSED = "dressed"


@dataclass(frozen=True)
class SystemParams:
    """
    Физические параметры системы (угловые частоты в рад/с).

    Attributes:
        lam (float): Связь кутрит–резонатор λ
        Delta (float): Расстройка драйва e↔f Δ
        delta (float): Член резонатора δ
        alpha0 (float): Смещение α₀
        omega0 (float): Частота резонатора (только для отчётов)
        omega_ge (float): Частота перехода g↔e (только для отчётов)
        omega_ef (float): Частота перехода e↔f (только для отчётов)
        T (float): Длительность вентиля, с
        n_max (int): Фоковская отсечка
    """

    lam: float = TWO_PI * 462e6
    Delta: float = TWO_PI * 4.78e9
    delta: float = -TWO_PI * 12e6
    alpha0: float = float(np.sqrt(2.0))
    omega0: float = TWO_PI * 16.792e9
    omega_ge: float = TWO_PI * 3e9
    omega_ef: float = TWO_PI * 12e9
    T: float = 5e-6
    n_max: int = 20

    def __post_init__(self):
        if self.Delta == 0:
            raise ValueError("Δ не может быть нулевой")
        if self.lam == 0:
            raise ValueError("λ не может быть нулевой")
        if self.T <= 0:
            raise ValueError(f"T должно быть положительным, получено {self.T}")
        if self.n_max < 4:
            raise ValueError(f"n_max должно быть >= 4, получено {self.n_max}")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SystemParams":
        """
        Создаёт параметры из словаря ключей файла параметров.

        Частоты задаются как линейные (Гц) и умножаются на 2π, T в мкс.
        """
        kwargs: Dict[str, Any] = {}
        hz_keys = {
            "lambda_hz": "lam",
            "Delta_hz": "Delta",
            "delta_hz": "delta",
            "omega0_hz": "omega0",
            "omega_ge_hz": "omega_ge",
            "omega_ef_hz": "omega_ef",
        }
        for key, attr in hz_keys.items():
            if key in values:
                kwargs[attr] = TWO_PI * float(values[key])
        if "alpha0" in values:
            kwargs["alpha0"] = float(values["alpha0"])
        if "T_us" in values:
            kwargs["T"] = float(values["T_us"]) * 1e-6
        if "n_max" in values:
            kwargs["n_max"] = int(values["n_max"])
        return cls(**kwargs)

    def with_cutoff(self, n_max: int) -> "SystemParams":
        return replace(self, n_max=n_max)

    @property
    def joint_dim(self) -> int:
        return 3 * (self.n_max + 1)

    @property
    def omega_tilde(self) -> float:
        """
        ω̃ = δ + λ²/Δ.
        """
        return self.delta + self.lam**2 / self.Delta

    @property
    def Omega(self) -> float:
        """
        Ω = −ω̃α₀Δ/λ.
        """
        return -self.omega_tilde * self.alpha0 * self.Delta / self.lam

    def frame_cycles(self) -> float:
        """
        δ·T/2π: число оборотов свободной фазы резонатора за вентиль.
        """
        return self.delta * self.T / TWO_PI

    def is_frame_commensurate(self, tol: float = 1e-9) -> bool:
        cycles = self.frame_cycles()
        return abs(cycles - round(cycles)) < tol

    def describe(self) -> Dict[str, float]:
        """
        Параметры в линейных единицах для манифеста.
        """
        return {
            "lambda_hz": self.lam / TWO_PI,
            "Delta_hz": self.Delta / TWO_PI,
            "delta_hz": self.delta / TWO_PI,
            "alpha0": self.alpha0,
            "omega0_hz": self.omega0 / TWO_PI,
            "omega_ge_hz": self.omega_ge / TWO_PI,
            "omega_ef_hz": self.omega_ef / TWO_PI,
            "T_us": self.T * 1e6,
            "n_max": self.n_max,
            "omega_tilde_hz": self.omega_tilde / TWO_PI,
            "Omega_hz": self.Omega / TWO_PI,
            "frame_cycles": self.frame_cycles(),
        }


@dataclass(frozen=True)
class DriveSpec:
    """
    Синтезированный драйв: Ω, ω̃, расстройки Δ′₂ₖ и огибающие Ω̃₂ₖ(t).

    Ω̃₂ₖ(t) = scale · Ω₀(t) · weights[k].

    Attributes:
        Omega (float): Амплитуда драйва e↔f, рад/с
        omega_tilde (float): ω̃, рад/с
        Delta_p (Tuple[float, float, float]): Δ′₀, Δ′₂, Δ′₄, рад/с
        weights (Tuple[complex, complex, complex]): ⟨2k|+⟩/β₂ₖ,₀ (или cosθ/β₀₀, sinθ/β₂₀, cosθ/β₄₀)
        omega0_fn (Callable[[float], complex]): Огибающая Ω₀(t)
        scale (float): Множитель (1+ε) систематической ошибки
        calibration (str): perturbative или dressed
    """

    Omega: float
    omega_tilde: float
    Delta_p: Tuple[float, float, float]
    weights: Tuple[complex, complex, complex]
    omega0_fn: Callable[[float], complex] = field(compare=False, repr=False)
    scale: float = 1.0
    calibration: str = Calibration.PERTURBATIVE

    def omega_tilde_at(self, t: float) -> np.ndarray:
        """
        Ω̃₀(t), Ω̃₂(t), Ω̃₄(t).
        """
        return self.scale * self.omega0_fn(t) * np.asarray(self.weights, dtype=complex)

    def drive_amplitude(self, t: float) -> complex:
        """
        Σₖ Ω̃₂ₖ(t) e^{−iΔ′₂ₖt}: коэффициент при |g⟩⟨e|.
        """
        phases = np.exp(-1j * np.asarray(self.Delta_p) * t)
        return complex(np.sum(self.omega_tilde_at(t) * phases))


@dataclass(frozen=True)
class RegimeReport:
    """
    Отчёт о дисперсионном режиме.

    Attributes:
        ratios (Dict[str, float]): Отношения к Δ по ярусам
        varsigma (float): Заданное ς
        tolerance (float): Допустимый множитель отклонения от ς^p
        varsigma_fit (float): Оценка ς по самим отношениям (справочно)
        tiers (Dict[str, bool]): Прохождение по ярусам
        passed (bool): Все ярусы пройдены
    """

    ratios: Dict[str, float]
    varsigma: float
    tolerance: float
    varsigma_fit: float
    tiers: Dict[str, bool]
    passed: bool

    def as_dict(self) -> Dict[str, Any]:
        return {
            "ratios": dict(self.ratios),
            "varsigma": self.varsigma,
            "tolerance": self.tolerance,
            "varsigma_fit": self.varsigma_fit,
            "tiers": dict(self.tiers),
            "passed": self.passed,
        }


def analytic_envelope(path: GeometricPath) -> Callable[[float], complex]:
    """
    Ω₀(t) = [Ω_x(t) + iΩ_y(t)]/2 из аналитических полей пути.
    """

    def envelope(t: float) -> complex:
        omega_x, omega_y = control_fields(min(max(t, 0.0), path.T), path)
        return 0.5 * (omega_x + 1j * omega_y)

    return envelope


def sampled_envelope(fields: FieldSamples) -> Callable[[float], complex]:
    return fields.omega0


@functools.lru_cache(maxsize=16)
def static_matrices(p: SystemParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Статическая часть H_s и оператор драйва X = |g⟩⟨e| ⊗ I.
    """
    n_max = p.n_max
    a = annihilation_op(n_max)
    cavity_identity = identity_op(fock_tag(n_max), n_max + 1)
    qutrit_identity = identity_op("qutrit", 3)
    coupling = tensor_embed(cavity_identity.scaled(p.Omega) + a.dag().scaled(p.lam), qutrit_op("ef"))
    static = (
        coupling
        + coupling.dag()
        + tensor_embed(number_op(n_max).scaled(p.delta), qutrit_identity)
        + tensor_embed(cavity_identity, qutrit_op("ff")).scaled(-p.Delta)
    )
    drive = tensor_embed(cavity_identity, qutrit_op("ge"))
    return static.entries, drive.entries


def static_hamiltonian(p: SystemParams) -> ComplexOperator:
    """
    H_s = δa†a − Δ|f⟩⟨f| + (Ω + λa†)|e⟩⟨f| + h.c.
    """
    return ComplexOperator(static_matrices(p)[0], "joint")


def calibrate_dressed(
    p: SystemParams, basis: DisplacedBasis
) -> Tuple[Tuple[float, float, float], Tuple[complex, complex, complex], float]:
    """
    Калибровка по точному спектру статической части H_s.

    Находит собственное состояние H_s с наибольшим перекрытием с |0̃,e⟩,
    возвращает Δ′₂ₖ = 2kδ − E, связи ⟨2k,e|ψ⟩ и вес |0̃,e⟩ в ψ.
    """
    energies, vectors = np.linalg.eigh(static_matrices(p)[0])
    dim_c = p.n_max + 1
    target = np.zeros(3 * dim_c, dtype=complex)
    target[dim_c : 2 * dim_c] = basis.coefficients[:, 0]
    overlaps = target.conj() @ vectors
    index = int(np.argmax(np.abs(overlaps)))
    vector = vectors[:, index] * np.exp(-1j * np.angle(overlaps[index]))
    energy = float(energies[index])
    detunings = tuple(float(m * p.delta - energy) for m in CODE_LEVELS)
    couplings = tuple(complex(vector[dim_c + m]) for m in CODE_LEVELS)
    weight = float(abs(overlaps[index]) ** 2)
    logger.debug(
        f"Одетое |0̃,e⟩: E/2π = {energy / TWO_PI / 1e6:.4f} МГц, вес {weight:.6f}"
    )
    return detunings, couplings, weight


def derive_drive_spec(
    p: SystemParams,
    gate: GateSpec,
    path: GeometricPath,
    basis: Optional[DisplacedBasis] = None,
    calibration: str = Calibration.PERTURBATIVE,
    fields: Optional[FieldSamples] = None,
    weighting: str = "code",
) -> DriveSpec:
    """
    Синтез трёхчастотного драйва g↔e.

    Args:
        p (SystemParams): Параметры системы
        gate (GateSpec): Вентиль (θ)
        path (GeometricPath): Путь, дающий Ω₀(t)
        basis (Optional[DisplacedBasis]): Смещённый базис с p.alpha0, p.n_max
        calibration (str): perturbative (формулы) или dressed (точный спектр)
        fields (Optional[FieldSamples]): Зашумлённые поля вместо аналитических
        weighting (str): code: веса ⟨2k|+⟩/β₂ₖ,₀ (с 1/√2 из |𝕆⟩), literal: cosθ/β₀₀, sinθ/β₂₀, cosθ/β₄₀

    Returns:
        DriveSpec: Спецификация драйва

    Raises:
        ValueError: Если β₂ₖ,₀ < 1e-3 или базис не согласован с параметрами
    """
    if basis is None:
        basis = build_displaced_basis(p.alpha0, p.n_max)
    if basis.n_max != p.n_max or not np.isclose(basis.alpha0, p.alpha0):
        raise ValueError("Смещённый базис построен не для этих параметров")

    betas = [basis.beta(m, 0) for m in CODE_LEVELS]
    for m, beta in zip(CODE_LEVELS, betas):
        if abs(beta) < MIN_BETA:
            raise ValueError(f"β_{m},0 = {abs(beta):.2e} слишком мал (< {MIN_BETA})")

    omega_tilde = p.omega_tilde
    Omega = p.Omega
    if calibration == Calibration.DRESSED:
        detunings, couplings, _ = calibrate_dressed(p, basis)
    elif calibration == Calibration.PERTURBATIVE:
        stark = p.alpha0**2 * omega_tilde - Omega**2 / p.Delta
        detunings = tuple(float(m * p.delta + stark) for m in CODE_LEVELS)
        couplings = tuple(betas)
    else:
        raise ValueError(f"Неизвестная калибровка: {calibration}")

    if weighting == "code":
        plus, _ = dressed_states(gate.theta, p.n_max)
        angles = tuple(plus.amplitudes[m].real for m in CODE_LEVELS)
    elif weighting == "literal":
        angles = (np.cos(gate.theta), np.sin(gate.theta), np.cos(gate.theta))
    else:
        raise ValueError(f"Неизвестная схема весов: {weighting}")
    weights = tuple(complex(a / c) for a, c in zip(angles, couplings))
    envelope = sampled_envelope(fields) if fields is not None else analytic_envelope(path)

    logger.debug(
        f"Драйв: ω̃/2π={omega_tilde / TWO_PI / 1e6:.3f} МГц, Ω/2π={Omega / TWO_PI / 1e6:.2f} МГц, "
        f"Δ′/2π={[round(d / TWO_PI / 1e6, 3) for d in detunings]} МГц ({calibration})"
    )
    return DriveSpec(
        Omega=Omega,
        omega_tilde=omega_tilde,
        Delta_p=detunings,
        weights=weights,
        omega0_fn=envelope,
        calibration=calibration,
    )


def full_hamiltonian(p: SystemParams, spec: DriveSpec, t: float) -> ComplexOperator:
    """
    Полный гамильтониан в приближении вращающейся волны (совместный базис).

    H = Σₖ Ω̃₂ₖ(t)e^{−iΔ′₂ₖt}|g⟩⟨e| + (Ω+λa†)|e⟩⟨f| + h.c. + δa†a − Δ|f⟩⟨f|
    """
    if t < 0 or t > p.T * (1 + 1e-12):
        raise ValueError(f"t={t} вне интервала [0, {p.T}]")
    static, drive = static_matrices(p)
    amplitude = spec.drive_amplitude(t)
    coupling = amplitude * drive
    return ComplexOperator(static + coupling + coupling.conj().T, "joint")


def full_generator(p: SystemParams, spec: DriveSpec) -> Callable[[float], np.ndarray]:
    """
    Функция t -> H(t) (матрица) для интеграторов.
    """
    static, drive = static_matrices(p)

    def hamiltonian(t: float) -> np.ndarray:
        coupling = spec.drive_amplitude(t) * drive
        return static + coupling + coupling.conj().T

    return hamiltonian


def effective_hamiltonian(
    path: GeometricPath,
    t: float,
    fields: Optional[FieldSamples] = None,
    scale: float = 1.0,
) -> ComplexOperator:
    """
    Эффективный гамильтониан в базисе {|+,g⟩, |−,g⟩, |0̃,e⟩}.

    H_e = Ω₀(t)|+,g⟩⟨0̃,e| + h.c.; строка и столбец |−,g⟩ нулевые.
    """
    if fields is not None:
        omega0 = fields.omega0(t)
    else:
        omega_x, omega_y = control_fields(t, path)
        omega0 = 0.5 * (omega_x + 1j * omega_y)
    entries = np.zeros((3, 3), dtype=complex)
    entries[0, 2] = scale * omega0
    entries[2, 0] = np.conj(scale * omega0)
    return ComplexOperator(entries, EFFECTIVE3_TAG)


def effective_generator(
    path: GeometricPath,
    fields: Optional[FieldSamples] = None,
    scale: float = 1.0,
    envelope: Optional[Callable[[float], complex]] = None,
) -> Callable[[float], np.ndarray]:
    """
    Функция t -> H_e(t) (3x3); envelope задаёт готовую огибающую Ω₀(t) вместо полей пути.
    """
    if envelope is None:
        return lambda t: effective_hamiltonian(path, min(max(t, 0.0), path.T), fields, scale).entries

    def hamiltonian(t: float) -> np.ndarray:
        entries = np.zeros((3, 3), dtype=complex)
        entries[0, 2] = scale * envelope(t)
        entries[2, 0] = np.conj(entries[0, 2])
        return entries

    return hamiltonian


def effective_joint_generator(
    p: SystemParams,
    gate: GateSpec,
    envelope: Callable[[float], complex],
    scale: float = 1.0,
) -> Callable[[float], np.ndarray]:
    """
    Эффективный гамильтониан, вложенный в совместное пространство qutrit ⊗ cavity.

    H = Ω₀(t)|+⟩⟨0̃| ⊗ |g⟩⟨e| + h.c., где |0̃⟩ = D(α₀)|0⟩ в фоковском базисе.
    """
    basis = build_displaced_basis(p.alpha0, p.n_max)
    plus, _ = dressed_states(gate.theta, p.n_max)
    transition = ComplexOperator(
        np.outer(plus.amplitudes, basis.coefficients[:, 0].conj()), fock_tag(p.n_max)
    )
    coupling = tensor_embed(transition, qutrit_op("ge")).entries

    def hamiltonian(t: float) -> np.ndarray:
        term = scale * envelope(min(max(t, 0.0), p.T)) * coupling
        return term + term.conj().T

    return hamiltonian


def frame_correction(p: SystemParams, t: Optional[float] = None) -> np.ndarray:
    """
    Диагональ exp(+iδa†at) на g-ветви (единица на e, f); по умолчанию t = T.

    При целом δT/2π в момент T это единичная матрица.
    """
    t = p.T if t is None else t
    phases = np.ones(p.joint_dim, dtype=complex)
    n = np.arange(p.n_max + 1)
    phases[: p.n_max + 1] = np.exp(1j * p.delta * n * t)
    return phases


def regime_check(
    p: SystemParams,
    spec: DriveSpec,
    path: Optional[GeometricPath] = None,
    varsigma: float = DEFAULT_VARSIGMA,
    tolerance: float = REGIME_TOLERANCE,
) -> RegimeReport:
    """
    Проверка иерархии Ω/Δ ~ λ√(N+1)/Δ ~ ς, Δ′/Δ ~ δ/Δ ~ ς², Ω̃/Δ ~ ς³ при N = α₀².

    ς задаётся заранее (по умолчанию 0.1). Ярус p пройден, если каждое
    отношение лежит в [ς^p/tolerance, tolerance·ς^p]; для третьего яруса
    проверяется только верхняя граница. Оценка ς методом наименьших
    квадратов по log-отношениям попадает в отчёт и в проверке не участвует.

    Raises:
        ValueError: Если ς вне (0, 1) или tolerance < 1
    """
    if not 0 < varsigma < 1:
        raise ValueError(f"ς должно лежать в (0, 1), получено {varsigma}")
    if tolerance < 1:
        raise ValueError(f"Допуск должен быть >= 1, получено {tolerance}")
    N = p.alpha0**2
    times = path.sample_times() if path is not None else np.linspace(0.0, p.T, 401)
    peak = max(float(np.max(np.abs(spec.omega_tilde_at(t)))) for t in times)
    ratios = {
        "Omega/Delta": abs(spec.Omega / p.Delta),
        "lambda_sqrtN1/Delta": abs(p.lam * np.sqrt(N + 1) / p.Delta),
        "Delta_p/Delta": max(abs(d) for d in spec.Delta_p) / abs(p.Delta),
        "delta/Delta": abs(p.delta / p.Delta),
        "Omega_tilde_peak/Delta": peak / abs(p.Delta),
    }
    weights = sum(k**2 for k in REGIME_ORDERS.values())
    log_fit = sum(k * np.log(ratios[name]) for name, k in REGIME_ORDERS.items() if ratios[name] > 0) / weights

    def within(name: str) -> bool:
        scale = varsigma ** REGIME_ORDERS[name]
        return scale / tolerance <= ratios[name] <= tolerance * scale

    tiers = {
        "tier1": within("Omega/Delta") and within("lambda_sqrtN1/Delta"),
        "tier2": within("Delta_p/Delta") and within("delta/Delta"),
        "tier3": ratios["Omega_tilde_peak/Delta"] <= tolerance * varsigma**3,
    }
    report = RegimeReport(
        ratios=ratios,
        varsigma=varsigma,
        tolerance=tolerance,
        varsigma_fit=float(np.exp(log_fit)),
        tiers=tiers,
        passed=all(tiers.values()),
    )
    if report.passed:
        logger.info(f"Дисперсионный режим подтверждён при ς = {varsigma} (оценка по отношениям {report.varsigma_fit:.3f})")
    else:
        logger.warning(f"Иерархия режима нарушена при ς = {varsigma}: {tiers}")
    return report


def logical_joint_basis(p: SystemParams) -> np.ndarray:
    """
    Столбцы |𝕆,g⟩, |𝟙,g⟩ в совместном базисе (dim x 2).
    """
    zero, one = binomial_logical_states(p.n_max)
    columns = np.zeros((p.joint_dim, 2), dtype=complex)
    columns[: p.n_max + 1, 0] = zero.amplitudes
    columns[: p.n_max + 1, 1] = one.amplitudes
    return columns


def logical_effective_basis(theta: float) -> np.ndarray:
    """
    Столбцы |𝕆,g⟩, |𝟙,g⟩ в базисе {|+,g⟩, |−,g⟩, |0̃,e⟩} (3 x 2).
    """
    return np.array(
        [
            [np.cos(theta), np.sin(theta)],
            [np.sin(theta), -np.cos(theta)],
            [0.0, 0.0],
        ],
        dtype=complex,
    )
