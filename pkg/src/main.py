"""
Точка входа симулятора биномиального кода с геометрическими вентилями.
Настраивает логирование, собирает конфигурацию и запускает эксперименты.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

# Добавляем корневую директорию в Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.experiments.output import log_format  # noqa: E402
from src.experiments.runner import (  # noqa: E402
    FIGURE_IDS,
    Experiment,
    ExperimentConfig,
    Model,
    run_experiment,
)
from src.utils.config import ConfigManager, get_config_manager, load_parameter_file  # noqa: E402
from src.utils.errors import SimulationError  # noqa: E402

SIMULATE_CHOICES = {
    "gates": None,
    "awgn": Experiment.AWGN_SAMPLES,
}
SWEEP_CHOICES = {
    "systematic": Experiment.SYSTEMATIC,
    "awgn": Experiment.AWGN_SWEEP,
    "decoherence": Experiment.DECOHERENCE,
}


def console_format(record: Dict[str, Any]) -> str:
    """
    Консольный формат: время от старта, уровень, эксперимент (если идёт) и модуль.
    """
    experiment = record["extra"].get("experiment")
    scope = f"<magenta>{experiment}</magenta> | " if experiment else ""
    return (
        "<green>{elapsed}</green> | <level>{level: <8}</level> | "
        + scope
        + "<cyan>{name}</cyan> - <level>{message}</level>\n{exception}"
    )


def setup_logging(config_manager: ConfigManager) -> None:
    """
    Консоль и общий файл с ротацией из секции logging; логи отдельных
    экспериментов пишет сам запуск в <каталог эксперимента>/run.log.
    """
    logging_config = config_manager.get_logging_config()
    level = logging_config.get("level", "INFO")

    logger.remove()
    logger.add(sys.stdout, level=level, format=console_format, colorize=True)

    log_file = logging_config.get("file", "logs/simulation.log")
    log_dir = os.path.dirname(log_file)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    logger.add(
        log_file,
        level=level,
        format=log_format,
        rotation=logging_config.get("max_size", "10 MB"),
        retention=logging_config.get("rotation", 5),
        compression="zip",
        encoding="utf-8",
    )
    logger.debug(f"Логирование: уровень {level}, файл {log_file}")


def build_parser() -> argparse.ArgumentParser:
    """
    Парсер командной строки: design, simulate, sweep, reproduce.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="файл параметров key = value")
    common.add_argument("--yaml", help="YAML-конфигурация (по умолчанию config/config.yaml)")
    common.add_argument("--out", dest="output_dir", help="каталог результатов")
    common.add_argument("--seed", type=int, help="64-битное зерно генератора шума")
    common.add_argument("--fock-cutoff", dest="fock_cutoff", type=int, help="фоковская отсечка n_max")
    common.add_argument("--steps", type=int, help="число шагов интегратора")
    common.add_argument("--force", action="store_true", default=None, help="продолжать вне режима")
    common.add_argument(
        "--rates-angular",
        dest="rates_angular",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="скорости в кГц читаются как 10³ с⁻¹; так по умолчанию (decoherence.rates_angular: true), "
        "и флаг лишь подтверждает это. --no-rates-angular умножает кГц на 2π",
    )
    common.add_argument("--fast", action="store_true", default=None, help="сокращённые развёртки")
    common.add_argument("--model", choices=[m.value for m in Model], help="эффективная или полная модель")
    common.add_argument("--calibration", choices=["perturbative", "dressed"], help="калибровка драйва")
    common.add_argument("--weighting", choices=["code", "literal"], help="веса тонов драйва")
    common.add_argument("--gate", choices=["pi_phase", "not", "hadamard"], help="логический вентиль")

    parser = argparse.ArgumentParser(
        prog="binomial-ngqc",
        description="Симулятор неадиабатических геометрических вентилей на биномиальном коде",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("design", parents=[common], help="поля управления и фазы пути")
    simulate = commands.add_parser("simulate", parents=[common], help="динамика одного запуска")
    simulate.add_argument("what", nargs="?", choices=sorted(SIMULATE_CHOICES), default="gates")
    sweep = commands.add_parser("sweep", parents=[common], help="развёртка параметра")
    sweep.add_argument("what", choices=sorted(SWEEP_CHOICES))
    reproduce = commands.add_parser("reproduce", parents=[common], help="воспроизведение рисунка")
    reproduce.add_argument("figure", choices=sorted(FIGURE_IDS) + ["all"])
    return parser


def experiments_for(args: argparse.Namespace, model: str) -> List[Experiment]:
    """
    Эксперименты, которые выполняет подкоманда.
    """
    if args.command == "design":
        return [Experiment.FIELDS, Experiment.PHASES]
    if args.command == "simulate":
        chosen = SIMULATE_CHOICES[args.what]
        if chosen is None:
            return [Experiment.GATES_FULL if model == Model.FULL.value else Experiment.GATES_EFFECTIVE]
        return [chosen]
    if args.command == "sweep":
        return [SWEEP_CHOICES[args.what]]
    if args.figure == "all":
        return list(dict.fromkeys(FIGURE_IDS.values()))
    return [FIGURE_IDS[args.figure]]


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    keys = (
        "output_dir",
        "seed",
        "fock_cutoff",
        "steps",
        "force",
        "rates_angular",
        "fast",
        "model",
        "calibration",
        "weighting",
        "gate",
    )
    return {key: getattr(args, key, None) for key in keys}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Основная функция приложения.

    Returns:
        int: Код выхода (0 успех, 2 режим, 3 сходимость, 4 вывод, 1 прочее)
    """
    args = build_parser().parse_args(argv)
    try:
        config_manager = ConfigManager(args.yaml) if args.yaml else get_config_manager()
        setup_logging(config_manager)

        parameters = load_parameter_file(args.config) if args.config else {}
        overrides = overrides_from(args)
        model = overrides.get("model") or parameters.get("model") or config_manager.get_experiment_config().get(
            "model", Model.EFFECTIVE.value
        )
        for experiment in experiments_for(args, model):
            config = ExperimentConfig.from_sources(experiment, config_manager.config, parameters, overrides)
            result = run_experiment(config)
            logger.info(f"Результаты {experiment.value}: {len(result.paths)} файлов")
        return 0

    except SimulationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Приложение завершено пользователем")
        return 1
    except Exception as e:
        logger.error(f"Критическая ошибка: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
