"""
Модуль запуска экспериментов: поля и фазы пути, точность вентилей в
эффективной и полной моделях, развёртки систематической ошибки, шума
и декогеренции. Каждый запуск пишет CSV, графики и манифест.
"""

import functools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar

import numpy as np
from loguru import logger

from src.device.model import (
    TWO_PI,
    DEFAULT_VARSIGMA,
    REGIME_TOLERANCE,
    Calibration,
    SystemParams,
    analytic_envelope,
    derive_drive_spec,
    effective_generator,
    effective_joint_generator,
    frame_correction,
    full_generator,
    logical_effective_basis,
    logical_joint_basis,
    regime_check,
)
from src.evolution.full_model import literal_spot_check, magnus_propagate
from src.evolution.noise import NoiseSpec, with_awgn
from src.evolution.solver import (
    DecoherenceRates,
    Scheme,
    TimeGrid,
    Trajectory,
    collapse_operators,
    lindblad_propagate,
    propagate_piecewise,
    propagate_propagator,
)
from src.fock.operators import (
    EFFECTIVE3_TAG,
    JOINT_TAG,
    StateVector,
    beta_discrepancy_report,
    build_displaced_basis,
)
from src.metrics.fidelity import (
    average_gate_fidelity,
    checkpoint_indices,
    custom_gate,
    fidelity_trace,
    named_gate,
    state_fidelity,
    target_gates,
)
from src.metrics.fitting import fit_exponential
from src.experiments.output import RUN_LOG, PlotStyle, Table, emit_csv, emit_plot, experiment_log, write_manifest
from src.path_design.geometric_path import (
    DEFAULT_CHI0,
    FieldSamples,
    GateName,
    GateSpec,
    GeometricPath,
    invariant_residual,
    lr_phases,
    qg_closed_form,
    sensitivity_Qg,
)
from src.utils.errors import RegimeError

CODE_VERSION = "1.0.0"
CURVATURE_STEP = 0.01
PHASE_POINTS = 201
SYSTEMATIC_FLOOR = 0.99
CURVATURE_RATIO_FLOOR = 100.0

T = TypeVar("T")


class Experiment(str, Enum):
    """
    Именованные эксперименты.
    """

    FIELDS = "fields"
    GATES_EFFECTIVE = "gates_effective"
    GATES_FULL = "gates_full"
    SYSTEMATIC = "systematic"
    AWGN_SAMPLES = "awgn_samples"
    AWGN_SWEEP = "awgn_sweep"
    DECOHERENCE = "decoherence"
    PHASES = "phases"


class Model(str, Enum):
    EFFECTIVE = "effective"
    FULL = "full"


# Идентификаторы рисунков для команды reproduce
FIGURE_IDS: Dict[str, Experiment] = {
    "fig2": Experiment.FIELDS,
    "fig3a": Experiment.GATES_EFFECTIVE,
    "fig3b": Experiment.GATES_FULL,
    "fig4": Experiment.SYSTEMATIC,
    "fig5a": Experiment.AWGN_SAMPLES,
    "fig5b": Experiment.AWGN_SWEEP,
    "fig6": Experiment.DECOHERENCE,
    "phases": Experiment.PHASES,
}

GATE_ORDER = (GateName.PI_PHASE, GateName.NOT, GateName.HADAMARD)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Полностью разрешённая конфигурация эксперимента.

    Attributes:
        experiment (Experiment): Эксперимент
        params (SystemParams): Параметры системы
        gate (GateSpec): Вентиль для одновентильных экспериментов
        noise (NoiseSpec): ε, R_N и зерно
        rate_maxima_khz (Tuple[float, float, float]): Максимумы Γ_d, Γ_s, Γ_κ, кГц
        rates_angular (bool): Чтение кГц как 10³ с⁻¹ (иначе ×2π)
        output_dir (str): Каталог результатов
        samples (int): Реализаций шума на точку
    """

    experiment: Experiment
    params: SystemParams = field(default_factory=SystemParams)
    gate: GateSpec = field(default_factory=lambda: named_gate(GateName.NOT))
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(snr_db=10.0))
    rate_maxima_khz: Tuple[float, float, float] = (50.0, 50.0, 10.0)
    rates_angular: bool = True
    rate_points: int = 11
    output_dir: str = "results"
    samples: int = 50
    snr_range: Tuple[int, int] = (5, 20)
    epsilon_range: float = 0.2
    epsilon_points: int = 81
    chi0: float = DEFAULT_CHI0
    model: Model = Model.EFFECTIVE
    calibration: str = Calibration.PERTURBATIVE
    weighting: str = "code"
    effective_steps: int = 2000
    full_steps: int = 20000
    density_steps: int = 2000
    density_cutoff: int = 12
    trace_points: int = 200
    workers: int = 4
    check_convergence: bool = True
    convergence_threshold: float = 1e-4
    force: bool = False
    varsigma: float = DEFAULT_VARSIGMA
    regime_tolerance: float = REGIME_TOLERANCE
    plots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "model", Model(self.model))
        if self.calibration not in (Calibration.PERTURBATIVE, Calibration.DRESSED):
            raise ValueError(f"Неизвестная калибровка: {self.calibration}")
        if self.samples <= 0:
            raise ValueError("Число реализаций должно быть положительным")
        if self.epsilon_points < 2 or self.rate_points < 2:
            raise ValueError("Развёртка требует минимум 2 точки")
        if self.snr_range[0] > self.snr_range[1]:
            raise ValueError(f"Пустой диапазон SNR: {self.snr_range}")
        if min(self.effective_steps, self.full_steps, self.density_steps) <= 0:
            raise ValueError("Число шагов должно быть положительным")
        if self.effective_steps % 2 or self.density_steps % 2:
            raise ValueError("Число шагов rk4 должно быть чётным (узел в T/2)")

    def fast(self) -> "ExperimentConfig":
        """
        Сокращённые развёртки: 11 точек ε, 10 реализаций, 6 точек по скоростям.
        """
        return replace(self, epsilon_points=11, samples=10, rate_points=6)

    @property
    def steps(self) -> int:
        return self.full_steps if self.model == Model.FULL else self.effective_steps

    def as_dict(self) -> Dict[str, Any]:
        """
        Конфигурация для манифеста.
        """
        return {
            "experiment": self.experiment.value,
            "params": self.params.describe(),
            "gate": {"name": self.gate.name.value, "theta": self.gate.theta, "theta_g": self.gate.theta_g},
            "noise": asdict(self.noise),
            "rate_maxima_khz": list(self.rate_maxima_khz),
            "rates_angular": self.rates_angular,
            "rate_points": self.rate_points,
            "samples": self.samples,
            "snr_range": list(self.snr_range),
            "epsilon_range": self.epsilon_range,
            "epsilon_points": self.epsilon_points,
            "chi0": self.chi0,
            "model": self.model.value,
            "calibration": self.calibration,
            "weighting": self.weighting,
            "effective_steps": self.effective_steps,
            "full_steps": self.full_steps,
            "density_steps": self.density_steps,
            "density_cutoff": self.density_cutoff,
            "trace_points": self.trace_points,
            "force": self.force,
            "varsigma": self.varsigma,
            "regime_tolerance": self.regime_tolerance,
        }

    @classmethod
    def from_sources(
        cls,
        experiment: Experiment,
        yaml_config: Mapping[str, Mapping[str, Any]],
        parameters: Optional[Mapping[str, Any]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "ExperimentConfig":
        """
        Собирает конфигурацию: YAML < файл параметров < флаги командной строки.

        Args:
            experiment (Experiment): Эксперимент
            yaml_config (Mapping): Секции physics, solver, experiment, noise, decoherence, output
            parameters (Optional[Mapping]): Значения файла параметров
            overrides (Optional[Mapping]): Значения флагов (None пропускаются)
        """
        parameters = dict(parameters or {})
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        physics = dict(yaml_config.get("physics", {}))
        solver = yaml_config.get("solver", {})
        exp = yaml_config.get("experiment", {})
        noise = yaml_config.get("noise", {})
        decoherence = yaml_config.get("decoherence", {})
        output = yaml_config.get("output", {})
        regime = yaml_config.get("regime", {})

        physics.update({k: v for k, v in parameters.items() if k in _PHYSICS_KEYS})
        if "fock_cutoff" in overrides:
            physics["n_max"] = overrides["fock_cutoff"]
        params = SystemParams.from_mapping(physics)

        def pick(key: str, *sources: Mapping[str, Any], default: Any = None) -> Any:
            for source in (overrides, parameters) + sources:
                if key in source:
                    return source[key]
            return default

        if "theta" in parameters or "theta_g_rad" in parameters:
            gate = custom_gate(float(parameters.get("theta", np.pi / 4)), float(parameters.get("theta_g_rad", np.pi)))
        else:
            gate = named_gate(pick("gate", exp, default="not"))

        model = Model(pick("model", exp, default="effective"))
        steps_key = "full_steps" if model == Model.FULL else "effective_steps"
        steps = {
            "effective_steps": int(solver.get("effective_steps", 2000)),
            "full_steps": int(solver.get("full_steps", 20000)),
            "density_steps": int(solver.get("density_steps", 2000)),
        }
        if "steps" in overrides or "steps" in parameters:
            steps[steps_key] = int(pick("steps"))

        config = cls(
            experiment=experiment,
            params=params,
            gate=gate,
            noise=NoiseSpec(
                epsilon=float(pick("epsilon", default=0.0)),
                snr_db=float(pick("snr_db", noise, default=10.0)),
                seed=int(pick("seed", noise, default=0)),
            ),
            rate_maxima_khz=(
                float(decoherence.get("gamma_d_max_khz", 50.0)),
                float(decoherence.get("gamma_s_max_khz", 50.0)),
                float(decoherence.get("gamma_kappa_max_khz", 10.0)),
            ),
            rates_angular=bool(pick("rates_angular", decoherence, default=True)),
            rate_points=int(decoherence.get("points", 11)),
            output_dir=str(overrides.get("output_dir") or output.get("directory", "results")),
            samples=int(pick("samples", noise, default=50)),
            snr_range=(int(noise.get("snr_min_db", 5)), int(noise.get("snr_max_db", 20))),
            epsilon_range=float(exp.get("epsilon_range", 0.2)),
            epsilon_points=int(exp.get("epsilon_points", 81)),
            chi0=float(pick("chi0", exp, default=DEFAULT_CHI0)),
            model=model,
            calibration=str(pick("calibration", solver, default=Calibration.PERTURBATIVE)),
            weighting=str(pick("weighting", solver, default="code")),
            density_cutoff=int(solver.get("density_cutoff", 12)),
            trace_points=int(exp.get("trace_points", 200)),
            workers=int(exp.get("workers", 4)),
            check_convergence=bool(pick("check_convergence", solver, default=True)),
            convergence_threshold=float(solver.get("convergence_threshold", 1e-4)),
            force=bool(overrides.get("force", False)),
            varsigma=float(regime.get("varsigma", DEFAULT_VARSIGMA)),
            regime_tolerance=float(regime.get("tolerance", REGIME_TOLERANCE)),
            plots=bool(pick("plots", output, default=True)),
            **steps,
        )
        return config.fast() if overrides.get("fast") else config


_PHYSICS_KEYS = (
    "lambda_hz",
    "Delta_hz",
    "delta_hz",
    "omega0_hz",
    "omega_ge_hz",
    "omega_ef_hz",
    "alpha0",
    "T_us",
    "n_max",
)


@dataclass
class SimResult:
    """
    Результат эксперимента.

    Attributes:
        manifest (Dict[str, Any]): Разрешённая конфигурация, проверки и сводка
        tables (Dict[str, Table]): Таблицы CSV
        paths (List[str]): Записанные файлы
    """

    manifest: Dict[str, Any]
    tables: Dict[str, Table]
    paths: List[str] = field(default_factory=list)


def run_sweep(points: Sequence[T], fn: Callable[[T], Any], workers: int = 4) -> List[Any]:
    """
    Вычисляет fn на всех точках в пуле потоков; порядок результатов совпадает с points.
    """
    if workers <= 1 or len(points) <= 1:
        return [fn(point) for point in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))


def design_path(gate: GateSpec, T_gate: float, chi0: float = DEFAULT_CHI0) -> GeometricPath:
    return GeometricPath.designed(T_gate, gate.theta_g, chi0)


def effective_states(gate: GateSpec) -> List[StateVector]:
    """
    |𝕆,g⟩, |𝟙,g⟩ в базисе эффективной модели.
    """
    basis = logical_effective_basis(gate.theta)
    return [StateVector(basis[:, j], EFFECTIVE3_TAG) for j in range(2)]


def joint_states(p: SystemParams) -> List[StateVector]:
    basis = logical_joint_basis(p)
    return [StateVector(basis[:, j], JOINT_TAG) for j in range(2)]


def sampled_steps(steps: int, fields: FieldSamples) -> int:
    """
    Наименьшее кратное числа интервалов сетки отсчётов, не меньшее steps.
    """
    intervals = len(fields) - 1
    if intervals < 1:
        raise ValueError("Нужно минимум два отсчёта полей")
    return intervals * max(1, -(-steps // intervals))


def run_effective_gate(
    gate: GateSpec,
    path: GeometricPath,
    steps: int,
    scale: float = 1.0,
    fields: Optional[FieldSamples] = None,
    envelope: Optional[Callable[[float], complex]] = None,
    keep_snapshots: bool = False,
) -> Trajectory:
    """
    Пропагатор эффективной модели на логических столбцах.

    Гладкие поля интегрируются rk4_fixed; поля из отсчётов (в том числе
    зашумлённые) схемой expm_midpoint на сетке, согласованной с отсчётами.
    """
    generator = effective_generator(path, fields=fields, scale=scale, envelope=envelope)
    if fields is not None:
        grid = TimeGrid(path.T, sampled_steps(steps, fields), Scheme.EXPM_MIDPOINT)
        return propagate_piecewise(generator, effective_states(gate), grid, keep_snapshots)
    return propagate_propagator(generator, effective_states(gate), TimeGrid(path.T, steps), keep_snapshots)


def effective_fidelity(
    gate: GateSpec,
    path: GeometricPath,
    steps: int,
    scale: float = 1.0,
    fields: Optional[FieldSamples] = None,
    envelope: Optional[Callable[[float], complex]] = None,
) -> float:
    """
    F̄(T) в эффективной модели.
    """
    trajectory = run_effective_gate(gate, path, steps, scale, fields, envelope)
    return average_gate_fidelity(trajectory.final, gate.target_unitary, logical_effective_basis(gate.theta))


def run_full_gate(
    p: SystemParams,
    gate: GateSpec,
    path: GeometricPath,
    steps: int,
    calibration: str = Calibration.PERTURBATIVE,
    weighting: str = "code",
    scale: float = 1.0,
    fields: Optional[FieldSamples] = None,
    keep_snapshots: bool = False,
    record_every: int = 1,
) -> Tuple[float, Trajectory]:
    """
    F̄(T) и траектория полной модели (схема magnus_ip).
    """
    spec = derive_drive_spec(p, gate, path, calibration=calibration, fields=fields, weighting=weighting)
    spec = replace(spec, scale=scale)
    trajectory = magnus_propagate(
        p,
        spec,
        joint_states(p),
        TimeGrid(p.T, steps, Scheme.MAGNUS_IP),
        keep_snapshots=keep_snapshots,
        record_every=record_every,
    )
    final = frame_correction(p)[:, None] * trajectory.final
    return average_gate_fidelity(final, gate.target_unitary, logical_joint_basis(p)), trajectory


def density_fidelity(
    p: SystemParams,
    gate: GateSpec,
    path: GeometricPath,
    rates: DecoherenceRates,
    steps: int,
    model: Model = Model.EFFECTIVE,
    calibration: str = Calibration.PERTURBATIVE,
    weighting: str = "code",
) -> float:
    """
    F_g(T) = ⟨ψ_T|ρ(T)|ψ_T⟩ для ρ(0) = |𝕆,g⟩⟨𝕆,g| и ψ_T = U_T|𝕆,g⟩.
    """
    basis = logical_joint_basis(p)
    start = basis[:, 0]
    target = basis @ gate.target_unitary.entries[:, 0]
    rho0 = np.outer(start, start.conj())
    if Model(model) == Model.EFFECTIVE:
        generator = effective_joint_generator(p, gate, analytic_envelope(path))
        grid = TimeGrid(p.T, steps, Scheme.RK4_FIXED)
    else:
        spec = derive_drive_spec(p, gate, path, calibration=calibration, weighting=weighting)
        generator = full_generator(p, spec)
        grid = TimeGrid(p.T, 1, Scheme.DP54_ADAPTIVE)
    trajectory = lindblad_propagate(generator, collapse_operators(p, rates), rho0, grid)
    rho = trajectory.final
    if Model(model) == Model.FULL:
        phases = frame_correction(p)
        rho = phases[:, None] * rho * phases.conj()[None, :]
    return state_fidelity(rho, StateVector(target, JOINT_TAG))


def curvature(fidelity_at: Callable[[float], float], h: float = CURVATURE_STEP) -> float:
    """
    Вторая производная F̄(ε) в нуле центральной разностью.
    """
    return (fidelity_at(h) - 2.0 * fidelity_at(0.0) + fidelity_at(-h)) / h**2


def _gate_column(gate: GateSpec) -> str:
    return f"F_{gate.name.value}"


class ExperimentRunner:
    """
    Исполнитель экспериментов: вычисления, проверки сходимости и запись результатов.

    Attributes:
        cfg (ExperimentConfig): Конфигурация
        output_dir (str): Каталог этого эксперимента
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.output_dir = os.path.join(cfg.output_dir, cfg.experiment.value)
        self._handlers: Dict[Experiment, Callable[[], Tuple[List[Table], Dict[str, Any], Dict[str, Any]]]] = {
            Experiment.FIELDS: self._fields,
            Experiment.PHASES: self._phases,
            Experiment.GATES_EFFECTIVE: self._gates_effective,
            Experiment.GATES_FULL: self._gates_full,
            Experiment.SYSTEMATIC: self._systematic,
            Experiment.AWGN_SAMPLES: self._awgn_samples,
            Experiment.AWGN_SWEEP: self._awgn_sweep,
            Experiment.DECOHERENCE: self._decoherence,
        }

    def check_regime(self) -> Dict[str, Any]:
        """
        Raises:
            RegimeError: Если иерархия нарушена и force не задан
        """
        p, gate = self.cfg.params, self.cfg.gate
        path = design_path(gate, p.T, self.cfg.chi0)
        spec = derive_drive_spec(p, gate, path, calibration=self.cfg.calibration, weighting=self.cfg.weighting)
        report = regime_check(p, spec, path, self.cfg.varsigma, self.cfg.regime_tolerance)
        if not report.passed:
            if not self.cfg.force:
                raise RegimeError(f"Параметры вне дисперсионного режима: {report.tiers}")
            logger.warning("⚠️ Проверка режима не пройдена, продолжаем из-за --force")
        if not p.is_frame_commensurate():
            logger.warning(
                f"δT/2π = {p.frame_cycles():.6f} не целое: к полной модели применяется фазовая поправка"
            )
        return report.as_dict()

    def run(self) -> SimResult:
        cfg = self.cfg
        run_log = os.path.join(self.output_dir, RUN_LOG)
        with experiment_log(run_log), logger.contextualize(experiment=cfg.experiment.value):
            logger.info(f"🚀 Эксперимент {cfg.experiment.value} (модель {cfg.model.value})")
            regime = self.check_regime()
            tables, summary, convergence = self._handlers[cfg.experiment]()

            manifest = {
                "experiment": cfg.experiment.value,
                "code_version": CODE_VERSION,
                "seed": cfg.noise.seed,
                "config": cfg.as_dict(),
                "regime": regime,
                "convergence": convergence,
                "summary": summary,
            }
            result = SimResult(manifest=manifest, tables={t.name: t for t in tables})
            for table in tables:
                result.paths.append(emit_csv(table, os.path.join(self.output_dir, f"{table.name}.csv")))
                if cfg.plots and table.plot:
                    style = PlotStyle.ERRORBAR if "stddev" in table.columns else PlotStyle.LINE
                    result.paths.append(emit_plot(table, style, os.path.join(self.output_dir, f"{table.name}.svg")))
            result.paths.append(run_log)
            manifest["outputs"] = [os.path.basename(path) for path in result.paths]
            result.paths.append(write_manifest(manifest, os.path.join(self.output_dir, "manifest.yaml")))
            logger.info(f"✅ Эксперимент {cfg.experiment.value} завершён")
        return result

    def _report_delta(self, name: str, delta: float) -> float:
        if delta > self.cfg.convergence_threshold:
            logger.warning(f"⚠️ {name}: изменение точности {delta:.2e} выше порога {self.cfg.convergence_threshold:.0e}")
        else:
            logger.debug(f"{name}: {delta:.2e}")
        return float(delta)

    def _convergence(
        self, evaluate: Callable[[SystemParams, int], float], p: SystemParams, steps: int, uses_cutoff: bool
    ) -> Dict[str, Any]:
        """
        Повтор с удвоенным числом шагов и (для фоковских моделей) с отсечкой +5.
        """
        if not self.cfg.check_convergence:
            return {"checked": False}
        base = evaluate(p, steps)
        report: Dict[str, Any] = {
            "checked": True,
            "reference_fidelity": base,
            "step_halving_delta": self._report_delta("Половинный шаг", abs(evaluate(p, 2 * steps) - base)),
        }
        if uses_cutoff:
            raised = p.with_cutoff(p.n_max + 5)
            report["fock_cutoff"] = [p.n_max, raised.n_max]
            report["fock_cutoff_delta"] = self._report_delta("Отсечка +5", abs(evaluate(raised, steps) - base))
        else:
            report["fock_cutoff_delta"] = None
        return report

    def _fields(self):
        cfg = self.cfg
        path = design_path(cfg.gate, cfg.params.T, cfg.chi0)
        fields = path.fields
        table = Table("fields", ["t_us", "Omega_x_MHz", "Omega_y_MHz"], x_label="t (мкс)", y_label="Ω/2π (МГц)")
        export = Table(
            "path",
            ["t_us", "gamma1_rad", "gamma2_rad", "omega_x_rad_per_s", "omega_y_rad_per_s"],
            plot=False,
        )
        for t, omega_x, omega_y in zip(fields.times, fields.omega_x, fields.omega_y):
            table.add_row(t * 1e6, omega_x / TWO_PI / 1e6, omega_y / TWO_PI / 1e6)
            export.add_row(t * 1e6, path.gamma1(t), path.gamma2(t), omega_x, omega_y)
        magnitude = np.hypot(fields.omega_x, fields.omega_y)
        summary = {
            "peak_Omega_MHz": float(np.max(magnitude)) / TWO_PI / 1e6,
            "Q_g": sensitivity_Qg(path),
            "Q_g_closed_form": qg_closed_form(path.theta_g, path.chi0),
            "invariant_residual": invariant_residual(path),
        }
        return [table, export], summary, {"checked": False, "reason": "квадратуры с контролем погрешности"}

    def _phases(self):
        cfg = self.cfg
        path = design_path(cfg.gate, cfg.params.T, cfg.chi0)
        table = Table("phases", ["t_us", "theta_d_minus_rad", "theta_g_minus_rad"], x_label="t (мкс)", y_label="фаза (рад)")
        records = run_sweep(list(np.linspace(0.0, path.T, PHASE_POINTS)), lambda t: lr_phases(path, t), cfg.workers)
        for record in records:
            table.add_row(record.t * 1e6, record.theta_d_minus, record.theta_g_minus)
        final = records[-1]
        summary = {
            "theta_d_minus_T": final.theta_d_minus,
            "theta_g_minus_T": final.theta_g_minus,
            "theta_g_target": path.theta_g,
        }
        return [table], summary, {"checked": False, "reason": "квадратуры с контролем погрешности"}

    def _gate_traces(self, run_gate: Callable[[GateSpec], Tuple[np.ndarray, List[float]]], name: str):
        gates = [target_gates()[g] for g in GATE_ORDER]
        results = run_sweep(gates, run_gate, self.cfg.workers)
        times = results[0][0]
        table = Table(name, ["t_us"] + [_gate_column(g) for g in gates], x_label="t (мкс)", y_label="F̄")
        for i, t in enumerate(times):
            table.add_row(t * 1e6, *(values[i] for _, values in results))
        finals = {_gate_column(g): values[-1] for g, (_, values) in zip(gates, results)}
        return table, finals

    def _gates_effective(self):
        cfg = self.cfg
        steps = cfg.effective_steps
        indices = checkpoint_indices(steps, cfg.trace_points)

        def run_gate(gate: GateSpec):
            path = design_path(gate, cfg.params.T, cfg.chi0)
            trajectory = run_effective_gate(gate, path, steps, keep_snapshots=True)
            trace = fidelity_trace(
                trajectory.times[indices],
                [trajectory.snapshots[i] for i in indices],
                gate.target_unitary,
                logical_effective_basis(gate.theta),
            )
            return trace.times, list(trace.values)

        table, finals = self._gate_traces(run_gate, "gates_effective")

        def evaluate(p: SystemParams, n: int) -> float:
            return effective_fidelity(cfg.gate, design_path(cfg.gate, p.T, cfg.chi0), n)

        convergence = self._convergence(evaluate, cfg.params, steps, uses_cutoff=False)
        return [table], {"final_fidelity": finals}, convergence

    def _gates_full(self):
        cfg = self.cfg
        p = cfg.params
        steps = cfg.full_steps
        record_every = max(1, steps // cfg.trace_points)

        def run_gate(gate: GateSpec):
            path = design_path(gate, p.T, cfg.chi0)
            _, trajectory = run_full_gate(
                p, gate, path, steps, cfg.calibration, cfg.weighting, keep_snapshots=True, record_every=record_every
            )
            trace = fidelity_trace(
                trajectory.times,
                trajectory.snapshots,
                gate.target_unitary,
                logical_joint_basis(p),
                frame=lambda t: frame_correction(p, t),
            )
            return trace.times, list(trace.values)

        table, finals = self._gate_traces(run_gate, "gates_full")

        path = design_path(cfg.gate, p.T, cfg.chi0)
        spec = derive_drive_spec(p, cfg.gate, path, calibration=cfg.calibration, weighting=cfg.weighting)
        summary = {
            "final_fidelity": finals,
            "calibration": cfg.calibration,
            "weighting": cfg.weighting,
            "Delta_p_MHz": [d / TWO_PI / 1e6 for d in spec.Delta_p],
            "beta_discrepancy": beta_discrepancy_report(build_displaced_basis(p.alpha0, p.n_max)),
            "literal_spot_check": literal_spot_check(p, spec, joint_states(p)),
        }

        def evaluate(params: SystemParams, n: int) -> float:
            gate_path = design_path(cfg.gate, params.T, cfg.chi0)
            return run_full_gate(params, cfg.gate, gate_path, n, cfg.calibration, cfg.weighting)[0]

        convergence = self._convergence(evaluate, p, steps, uses_cutoff=True)
        return [table], summary, convergence

    def _fidelity_at(self, gate: GateSpec, path: GeometricPath, fields: Optional[FieldSamples] = None):
        """
        Функция ε -> F̄(T) для выбранной модели.
        """
        cfg = self.cfg
        if cfg.model == Model.FULL:
            return lambda eps: run_full_gate(
                cfg.params, gate, path, cfg.full_steps, cfg.calibration, cfg.weighting, 1.0 + eps, fields
            )[0]
        envelope = None if fields is not None else functools.lru_cache(maxsize=None)(analytic_envelope(path))
        return lambda eps: effective_fidelity(gate, path, cfg.effective_steps, 1.0 + eps, fields, envelope)

    def _systematic(self):
        cfg = self.cfg
        T_gate = cfg.params.T
        gates = [target_gates()[g] for g in GATE_ORDER]
        evaluators = [self._fidelity_at(g, design_path(g, T_gate, cfg.chi0)) for g in gates]
        reference_path = GeometricPath.reference(T_gate, cfg.gate.theta_g)
        reference = self._fidelity_at(cfg.gate, reference_path)
        epsilons = np.linspace(-cfg.epsilon_range, cfg.epsilon_range, cfg.epsilon_points)

        tasks = [(k, float(eps)) for eps in epsilons for k in range(len(gates) + 1)]

        def evaluate_task(task):
            k, eps = task
            return reference(eps) if k == len(gates) else evaluators[k](eps)

        values = run_sweep(tasks, evaluate_task, cfg.workers)
        width = len(gates) + 1
        reference_column = f"{_gate_column(cfg.gate)}_reference"
        table = Table(
            "systematic",
            ["epsilon"] + [_gate_column(g) for g in gates] + [reference_column],
            x_label="ε",
            y_label="F̄(T)",
        )
        for i, eps in enumerate(epsilons):
            table.add_row(float(eps), *values[i * width : (i + 1) * width])

        designed_effective = functools.lru_cache(maxsize=None)(
            analytic_envelope(design_path(cfg.gate, T_gate, cfg.chi0))
        )
        reference_effective = functools.lru_cache(maxsize=None)(analytic_envelope(reference_path))
        designed_curvature = curvature(
            lambda e: effective_fidelity(
                cfg.gate, design_path(cfg.gate, T_gate, cfg.chi0), cfg.effective_steps, 1 + e, envelope=designed_effective
            )
        )
        reference_curvature = curvature(
            lambda e: effective_fidelity(cfg.gate, reference_path, cfg.effective_steps, 1 + e, envelope=reference_effective)
        )
        summary = {
            "min_fidelity": {c: float(np.min(table.column(c))) for c in table.columns[1:]},
            "argmax_epsilon": {
                c: float(epsilons[int(np.argmax(table.column(c)))]) for c in table.columns[1:]
            },
            "curvature": {
                "designed": designed_curvature,
                "reference": reference_curvature,
                "ratio": abs(reference_curvature) / max(abs(designed_curvature), 1e-300),
            },
        }
        summary["acceptance"] = self._systematic_acceptance(table, gates, summary["curvature"]["ratio"])

        def evaluate(p: SystemParams, n: int) -> float:
            path = design_path(cfg.gate, p.T, cfg.chi0)
            if cfg.model == Model.FULL:
                return run_full_gate(p, cfg.gate, path, n, cfg.calibration, cfg.weighting, 1 + cfg.epsilon_range)[0]
            return effective_fidelity(cfg.gate, path, n, 1 + cfg.epsilon_range)

        convergence = self._convergence(evaluate, cfg.params, cfg.steps, uses_cutoff=cfg.model == Model.FULL)
        return [table], summary, convergence

    def _systematic_acceptance(self, table: Table, gates: Sequence[GateSpec], ratio: float) -> Dict[str, Any]:
        """
        Пороги развёртки по ε: min F̄(T) > 0.99 для каждого вентиля и подавление кривизны в 100 раз.
        """
        worst = min(float(np.min(table.column(_gate_column(g)))) for g in gates)
        report = {
            "fidelity_floor": SYSTEMATIC_FLOOR,
            "min_fidelity": worst,
            "fidelity_passed": bool(worst > SYSTEMATIC_FLOOR),
            "curvature_ratio_floor": CURVATURE_RATIO_FLOOR,
            "curvature_passed": bool(ratio >= CURVATURE_RATIO_FLOOR),
        }
        if not report["fidelity_passed"]:
            logger.warning(
                f"⚠️ min F̄(T) = {worst:.5f} на ε ∈ [−{self.cfg.epsilon_range}, {self.cfg.epsilon_range}] "
                f"ниже {SYSTEMATIC_FLOOR} (модель {self.cfg.model.value})"
            )
        return report

    def _noisy_steps(self, path: GeometricPath) -> int:
        """
        Число шагов зашумлённого запуска: magnus_ip как есть, expm_midpoint кратно сетке отсчётов.
        """
        if self.cfg.model == Model.FULL:
            return self.cfg.full_steps
        return sampled_steps(self.cfg.effective_steps, path.fields)

    def _noisy_fidelity(
        self,
        path: GeometricPath,
        snr_db: float,
        index: int,
        p: Optional[SystemParams] = None,
        steps: Optional[int] = None,
    ) -> float:
        cfg = self.cfg
        fields = with_awgn(path.fields, snr_db, cfg.noise.seed, index)
        steps = steps or self._noisy_steps(path)
        if cfg.model == Model.FULL:
            return run_full_gate(p or cfg.params, cfg.gate, path, steps, cfg.calibration, cfg.weighting, fields=fields)[0]
        return effective_fidelity(cfg.gate, path, steps, fields=fields)

    def _awgn_samples(self):
        cfg = self.cfg
        snr_db = cfg.noise.snr_db if cfg.noise.snr_db is not None else 10.0
        path = design_path(cfg.gate, cfg.params.T, cfg.chi0)
        values = run_sweep(list(range(cfg.samples)), lambda j: self._noisy_fidelity(path, snr_db, j), cfg.workers)
        table = Table("awgn_samples", ["sample_index", "F_avg"], x_label="реализация", y_label="F̄(T)")
        for j, value in enumerate(values):
            table.add_row(j, value)
        summary = {
            "snr_db": snr_db,
            "min": float(np.min(values)),
            "max": float(np.max(values)),
            "mean": float(np.mean(values)),
            "spread": float(np.max(values) - np.min(values)),
        }

        def evaluate(p: SystemParams, n: int) -> float:
            return self._noisy_fidelity(design_path(cfg.gate, p.T, cfg.chi0), snr_db, 0, p, n)

        convergence = self._convergence(
            evaluate, cfg.params, self._noisy_steps(path), uses_cutoff=cfg.model == Model.FULL
        )
        return [table], summary, convergence

    def _awgn_sweep(self):
        cfg = self.cfg
        path = design_path(cfg.gate, cfg.params.T, cfg.chi0)
        snr_values = list(range(cfg.snr_range[0], cfg.snr_range[1] + 1))
        tasks = [(r, snr, j) for r, snr in enumerate(snr_values) for j in range(cfg.samples)]
        values = run_sweep(
            tasks, lambda task: self._noisy_fidelity(path, float(task[1]), task[0] * cfg.samples + task[2]), cfg.workers
        )
        table = Table("awgn_sweep", ["snr_db", "F_mean", "stddev"], x_label="R_N (дБ)", y_label="F̄(T)")
        points = []
        for r, snr in enumerate(snr_values):
            chunk = np.array(values[r * cfg.samples : (r + 1) * cfg.samples])
            stddev = float(np.std(chunk, ddof=1)) if chunk.size > 1 else 0.0
            table.add_row(snr, float(np.mean(chunk)), stddev)
            points.append((float(snr), float(np.mean(chunk))))
        summary: Dict[str, Any] = {"samples_per_point": cfg.samples}
        if len(points) >= 4:
            fit = fit_exponential(points)
            summary["fit"] = {
                "a": fit.a,
                "b": fit.b,
                "c": fit.c,
                "rms_residual": fit.rms_residual,
                "degenerate": fit.degenerate,
            }

        def evaluate(p: SystemParams, n: int) -> float:
            return self._noisy_fidelity(design_path(cfg.gate, p.T, cfg.chi0), float(snr_values[0]), 0, p, n)

        convergence = self._convergence(
            evaluate, cfg.params, self._noisy_steps(path), uses_cutoff=cfg.model == Model.FULL
        )
        return [table], summary, convergence

    def _decoherence(self):
        cfg = self.cfg
        p = cfg.params.with_cutoff(cfg.density_cutoff)
        path = design_path(cfg.gate, p.T, cfg.chi0)
        fractions = np.linspace(0.0, 1.0, cfg.rate_points)
        channels = ("gamma_d", "gamma_s", "gamma_kappa")
        maxima = DecoherenceRates.from_khz(*cfg.rate_maxima_khz, angular=cfg.rates_angular)

        def rates_for(channel: str, fraction: float) -> DecoherenceRates:
            return DecoherenceRates(**{channel: fraction * getattr(maxima, channel)})

        def evaluate_task(task) -> float:
            channel, fraction = task
            return density_fidelity(
                p, cfg.gate, path, rates_for(channel, fraction), cfg.density_steps, cfg.model, cfg.calibration, cfg.weighting
            )

        tasks = [(c, float(f)) for f in fractions for c in channels]
        values = run_sweep(tasks, evaluate_task, cfg.workers)
        table = Table(
            "decoherence",
            ["rate_fraction", "F_gamma_d", "F_gamma_s", "F_gamma_kappa"],
            x_label="Γ/Γ_max",
            y_label="F_g(T)",
        )
        for i, fraction in enumerate(fractions):
            table.add_row(float(fraction), *values[i * 3 : (i + 1) * 3])
        summary = {
            "model": "effective_joint" if cfg.model == Model.EFFECTIVE else "full",
            "n_max": p.n_max,
            "rates_max_per_s": asdict(maxima),
            "rates_max_per_s_other_reading": asdict(
                DecoherenceRates.from_khz(*cfg.rate_maxima_khz, angular=not cfg.rates_angular)
            ),
            "final_fidelity": {
                column: float(table.column(column)[-1]) for column in table.columns[1:]
            },
        }

        def evaluate(params: SystemParams, n: int) -> float:
            return density_fidelity(
                params,
                cfg.gate,
                design_path(cfg.gate, params.T, cfg.chi0),
                rates_for("gamma_kappa", 1.0),
                n,
                cfg.model,
                cfg.calibration,
                cfg.weighting,
            )

        convergence = self._convergence(evaluate, p, cfg.density_steps, uses_cutoff=True)
        return [table], summary, convergence


def run_experiment(cfg: ExperimentConfig) -> SimResult:
    """
    Запускает эксперимент и записывает CSV, графики и манифест.

    Raises:
        RegimeError: Параметры вне режима без force
        ConvergenceError: Нарушение сходимости
        OutputError: Ошибка записи
    """
    return ExperimentRunner(cfg).run()
