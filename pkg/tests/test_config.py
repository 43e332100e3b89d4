"""
Тесты для модуля конфигурации.
"""

import math
import os
import tempfile
from unittest.mock import patch

import pytest
import yaml

from src.device.model import TWO_PI, SystemParams
from src.utils.config import CONFIG_ENV_VAR, ConfigManager, evaluate_expression, load_parameter_file


def _write(text: str, suffix: str) -> str:
    with tempfile.NamedTemporaryFile(mode="w", suffix=suffix, delete=False, encoding="utf-8") as f:
        f.write(text)
        return f.name


class TestConfigManager:
    """
    Тесты для класса ConfigManager.
    """

    def test_config_manager_initialization(self):
        """
        Тест инициализации менеджера конфигурации.
        """
        config_path = _write(yaml.dump({"physics": {"lambda_hz": 462.0e6, "n_max": 20}}), ".yaml")
        try:
            manager = ConfigManager(config_path)

            assert manager.config is not None
            assert manager.get_physics_config()["n_max"] == 20
            assert manager.get_physics_config()["lambda_hz"] == pytest.approx(462.0e6)
        finally:
            os.unlink(config_path)

    def test_missing_config_file(self):
        """
        Тест обработки отсутствующего файла конфигурации.
        """
        with pytest.raises(FileNotFoundError):
            ConfigManager("/nonexistent/config.yaml")

    def test_default_values(self):
        """
        Тест значений по умолчанию для пустой конфигурации.
        """
        config_path = _write(yaml.dump({}), ".yaml")
        try:
            manager = ConfigManager(config_path)

            assert manager.get_physics_config() == {}
            assert manager.get_solver_config() == {}
            assert manager.get_logging_config() == {}
            assert manager.get_output_config() == {}
        finally:
            os.unlink(config_path)

    def test_environment_override(self):
        """
        Путь к конфигурации берётся из переменной окружения.
        """
        config_path = _write(yaml.dump({"noise": {"seed": 7}}), ".yaml")
        try:
            with patch.dict(os.environ, {CONFIG_ENV_VAR: config_path}):
                manager = ConfigManager()
            assert manager.config_path == config_path
            assert manager.get_noise_config()["seed"] == 7
        finally:
            os.unlink(config_path)

    def test_reload_config(self):
        config_path = _write(yaml.dump({"noise": {"seed": 1}}), ".yaml")
        try:
            manager = ConfigManager(config_path)
            with open(config_path, "w", encoding="utf-8") as f:
                yaml.dump({"noise": {"seed": 2}}, f)
            manager.reload_config()
            assert manager.get_noise_config()["seed"] == 2
        finally:
            os.unlink(config_path)

    def test_shipped_config_parses_numbers(self):
        """
        Числа с экспонентой в поставляемом YAML читаются как float.
        """
        manager = ConfigManager("config/config.yaml")
        physics = manager.get_physics_config()

        assert isinstance(physics["lambda_hz"], float)
        assert isinstance(physics["Delta_hz"], float)
        params = SystemParams.from_mapping(physics)
        assert params.lam == pytest.approx(TWO_PI * 462.0e6)
        assert params.is_frame_commensurate()
        decoherence = manager.get_decoherence_config()
        assert decoherence["gamma_kappa_max_khz"] == pytest.approx(10.0)
        assert decoherence["rates_angular"] is True
        regime = manager.get_regime_config()
        assert regime["varsigma"] == pytest.approx(0.1)
        assert regime["tolerance"] == pytest.approx(5.0)


class TestParameterFile:
    """
    Тесты для файла параметров key = value.
    """

    def test_expressions(self):
        assert evaluate_expression("pi/4") == pytest.approx(math.pi / 4)
        assert evaluate_expression("sqrt(2)") == pytest.approx(math.sqrt(2))
        assert evaluate_expression("-2*(3 + 1)**2") == pytest.approx(-32.0)
        assert evaluate_expression("462e6") == pytest.approx(462e6)

    def test_rejects_arbitrary_code(self):
        with pytest.raises(ValueError):
            evaluate_expression("__import__('os').getcwd()")
        with pytest.raises(ValueError):
            evaluate_expression("e")

    def test_load(self):
        """
        Комментарии, выражения и типы значений.
        """
        path = _write(
            "# параметры\n"
            "lambda_hz = 462e6\n"
            "alpha0 = sqrt(2)  # два фотона\n"
            "n_max = 20\n"
            "theta = pi/4\n"
            "gate = not\n"
            "rates_angular = false\n",
            ".txt",
        )
        try:
            values = load_parameter_file(path)
        finally:
            os.unlink(path)

        assert values["lambda_hz"] == pytest.approx(462e6)
        assert values["alpha0"] == pytest.approx(math.sqrt(2))
        assert values["n_max"] == 20 and isinstance(values["n_max"], int)
        assert values["theta"] == pytest.approx(math.pi / 4)
        assert values["gate"] == "not"
        assert values["rates_angular"] is False

    @pytest.mark.parametrize(
        "text",
        [
            "unknown_key = 1\n",
            "n_max = 20\nn_max = 21\n",
            "n_max 20\n",
            "n_max = 2.5\n",
        ],
    )
    def test_invalid_lines(self, text):
        path = _write(text, ".txt")
        try:
            with pytest.raises(ValueError):
                load_parameter_file(path)
        finally:
            os.unlink(path)

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_parameter_file("/nonexistent/params.txt")
