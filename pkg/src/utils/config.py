"""
Модуль для загрузки и управления конфигурацией симулятора.
Обеспечивает централизованное управление настройками: YAML-конфигурация
по умолчанию и файлы параметров вида key = value.
"""

import ast
import math
import operator
import os
from typing import Any, Dict, Optional

import yaml
from loguru import logger

DEFAULT_CONFIG_PATH = "config/config.yaml"
CONFIG_ENV_VAR = "BINOMIAL_NGQC_CONFIG"

# Ключи файла параметров и их типы
PARAMETER_KEYS = {
    "lambda_hz": float,
    "delta_hz": float,
    "Delta_hz": float,
    "omega0_hz": float,
    "omega_ge_hz": float,
    "omega_ef_hz": float,
    "alpha0": float,
    "T_us": float,
    "n_max": int,
    "theta": float,
    "theta_g_rad": float,
    "chi0": float,
    "gate": str,
    "experiment": str,
    "samples": int,
    "seed": int,
    "snr_db": float,
    "epsilon": float,
    "steps": int,
    "model": str,
    "calibration": str,
    "weighting": str,
    "rates_angular": bool,
}

_BINARY_OPERATORS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY_OPERATORS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi}
_FUNCTIONS = {"sqrt": math.sqrt}


def evaluate_expression(text: str) -> float:
    """
    Вычисляет числовое выражение из чисел, pi, sqrt(), + − * / ** и скобок.

    Raises:
        ValueError: Если выражение содержит что-то ещё
    """

    def walk(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY_OPERATORS:
            return _BINARY_OPERATORS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPERATORS:
            return _UNARY_OPERATORS[type(node.op)](walk(node.operand))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS
            and len(node.args) == 1
            and not node.keywords
        ):
            return _FUNCTIONS[node.func.id](walk(node.args[0]))
        raise ValueError(f"Недопустимое выражение: {text}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ValueError(f"Недопустимое выражение: {text}") from e
    return walk(tree)


def _convert(key: str, raw: str) -> Any:
    kind = PARAMETER_KEYS[key]
    if kind is str:
        return raw.strip().strip('"').strip("'")
    if kind is bool:
        value = raw.strip().lower()
        if value in ("true", "yes", "1"):
            return True
        if value in ("false", "no", "0"):
            return False
        raise ValueError(f"Ожидалось логическое значение для {key}: {raw}")
    number = evaluate_expression(raw)
    if kind is int:
        if float(number) != int(number):
            raise ValueError(f"Ожидалось целое значение для {key}: {raw}")
        return int(number)
    return float(number)


def load_parameter_file(path: str) -> Dict[str, Any]:
    """
    Читает файл параметров: строки key = value, комментарии после #.

    Args:
        path (str): Путь к файлу

    Returns:
        Dict[str, Any]: Значения известных ключей (частоты в Гц, как в файле)

    Raises:
        FileNotFoundError: Если файл не найден
        ValueError: Неизвестный ключ, повтор ключа или некорректное значение
    """
    if not os.path.exists(path):
        logger.error(f"Файл параметров не найден: {path}")
        raise FileNotFoundError(f"Файл параметров не найден: {path}")

    values: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as file:
        for number, line in enumerate(file, start=1):
            content = line.split("#", 1)[0].strip()
            if not content:
                continue
            if "=" not in content:
                raise ValueError(f"{path}:{number}: ожидалась строка вида key = value")
            key, raw = (part.strip() for part in content.split("=", 1))
            if key not in PARAMETER_KEYS:
                raise ValueError(f"{path}:{number}: неизвестный ключ {key}")
            if key in values:
                raise ValueError(f"{path}:{number}: ключ {key} задан повторно")
            values[key] = _convert(key, raw)

    logger.info(f"Файл параметров загружен: {path} ({len(values)} ключей)")
    return values


class ConfigManager:
    """
    Менеджер конфигурации для загрузки и управления настройками симулятора.

    Attributes:
        config (Dict[str, Any]): Загруженная конфигурация
        config_path (str): Путь к файлу конфигурации
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Инициализация менеджера конфигурации.

        Args:
            config_path (Optional[str]): Путь к файлу конфигурации; по умолчанию
                берётся из BINOMIAL_NGQC_CONFIG или config/config.yaml
        """
        self.config_path = config_path or os.environ.get(CONFIG_ENV_VAR) or DEFAULT_CONFIG_PATH
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """
        Загружает конфигурацию из YAML файла.

        Returns:
            Dict[str, Any]: Загруженная конфигурация

        Raises:
            FileNotFoundError: Если файл конфигурации не найден
            yaml.YAMLError: Если файл содержит некорректный YAML
        """
        try:
            if not os.path.exists(self.config_path):
                logger.error(f"Файл конфигурации не найден: {self.config_path}")
                raise FileNotFoundError(f"Конфигурационный файл не найден: {self.config_path}")

            with open(self.config_path, "r", encoding="utf-8") as file:
                config = yaml.safe_load(file) or {}

            logger.debug(f"Конфигурация загружена: {self.config_path}")
            return config

        except yaml.YAMLError as e:
            logger.error(f"Ошибка парсинга YAML: {e}")
            raise

    def get_physics_config(self) -> Dict[str, Any]:
        """
        Физические параметры (частоты в Гц, T в мкс).
        """
        return self.config.get("physics", {})

    def get_solver_config(self) -> Dict[str, Any]:
        return self.config.get("solver", {})

    def get_experiment_config(self) -> Dict[str, Any]:
        """
        Параметры экспериментов: вентиль, χ₀, размеры сеток развёрток.
        """
        return self.config.get("experiment", {})

    def get_noise_config(self) -> Dict[str, Any]:
        return self.config.get("noise", {})

    def get_decoherence_config(self) -> Dict[str, Any]:
        """
        Максимальные скорости декогеренции (кГц) и соглашение об единицах.
        """
        return self.config.get("decoherence", {})

    def get_regime_config(self) -> Dict[str, Any]:
        """
        Возвращает параметры проверки режима: varsigma и tolerance.
        """
        return self.config.get("regime", {})

    def get_logging_config(self) -> Dict[str, Any]:
        """
        Получает конфигурацию логирования.

        Returns:
            Dict[str, Any]: Конфигурация логирования
        """
        return self.config.get("logging", {})

    def get_output_config(self) -> Dict[str, Any]:
        return self.config.get("output", {})

    def reload_config(self) -> None:
        """
        Перезагружает конфигурацию из файла.
        """
        logger.info("Перезагрузка конфигурации")
        self.config = self._load_config()


_config_manager: Optional[ConfigManager] = None


def get_config_manager() -> ConfigManager:
    """
    Глобальный экземпляр конфигурации, создаётся при первом обращении.
    """
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager
