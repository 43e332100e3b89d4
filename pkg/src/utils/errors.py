"""
Иерархия исключений симулятора.
Каждое исключение несёт код завершения процесса для CLI.
"""

from typing import Optional


class SimulationError(Exception):
    """
    Базовое исключение симулятора.

    Attributes:
        exit_code (int): Код завершения процесса для CLI
    """

    exit_code = 1


class RegimeError(SimulationError):
    """
    Параметры не попадают в дисперсионный режим (иерархия по ς).
    """

    exit_code = 2


class ConvergenceError(SimulationError):
    """
    Нарушена сходимость: квадратура, шаг интегратора, дрейф нормы/следа.

    Attributes:
        achieved (Optional[float]): Достигнутая точность или величина дрейфа
    """

    exit_code = 3

    def __init__(self, message: str, achieved: Optional[float] = None):
        super().__init__(message)
        self.achieved = achieved


class OutputError(SimulationError):
    """
    Ошибка записи результатов (CSV, SVG, манифест).
    """

    exit_code = 4
