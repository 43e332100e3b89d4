"""
Модуль вывода результатов: CSV-таблицы, SVG-графики и манифест запуска.
"""

import csv
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import yaml  # noqa: E402
from loguru import logger  # noqa: E402

from src.utils.errors import OutputError  # noqa: E402

SIGNIFICANT_DIGITS = 12
STDDEV_COLUMN = "stddev"
RUN_LOG = "run.log"
RUN_LOG_LEVEL = "DEBUG"


def log_format(record: Dict[str, Any]) -> str:
    """
    Формат файловых логов: время, уровень, эксперимент (или «-»), модуль и строка.
    """
    experiment = record["extra"].get("experiment", "-")
    return (
        "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | "
        f"{experiment: <16}"
        " | {name}:{line} - {message}\n{exception}"
    )


class PlotStyle:
    LINE = "line"
    ERRORBAR = "errorbar"


@dataclass
class Table:
    """
    Таблица результатов: заголовки с единицами измерения и строки чисел.

    Attributes:
        name (str): Имя файла без расширения
        columns (List[str]): Заголовки (t_us, F_avg, epsilon, ...)
        rows (List[Sequence[float]]): Строки в порядке записи
        x_label (str): Подпись оси X графика
        y_label (str): Подпись оси Y графика
        plot (bool): Рисовать ли график по таблице
    """

    name: str
    columns: List[str]
    rows: List[Sequence[float]] = field(default_factory=list)
    x_label: str = ""
    y_label: str = ""
    plot: bool = True

    def add_row(self, *values: float) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"Ожидалось {len(self.columns)} значений, получено {len(values)}")
        self.rows.append(tuple(values))

    def column(self, name: str) -> np.ndarray:
        index = self.columns.index(name)
        return np.array([row[index] for row in self.rows], dtype=float)


def format_value(value: float) -> str:
    """
    Десятичная запись с 12 значащими цифрами.
    """
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def emit_csv(table: Table, path: str) -> str:
    """
    Записывает таблицу в CSV: строка заголовков, LF, 12 значащих цифр.

    Raises:
        OutputError: Ошибка записи
    """
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([format_value(value) for value in row])
    except OSError as e:
        raise OutputError(f"Не удалось записать {path}: {e}") from e
    logger.info(f"📄 CSV записан: {path} ({len(table.rows)} строк)")
    return path


def read_csv(path: str) -> Table:
    """
    Читает CSV, записанный emit_csv.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        columns = next(reader)
        rows = [tuple(float(value) for value in row) for row in reader]
    return Table(name=os.path.splitext(os.path.basename(path))[0], columns=columns, rows=rows)


def emit_plot(table: Table, style: str, path: str, x_column: Optional[str] = None) -> str:
    """
    Рисует таблицу в SVG.

    line: по линии на каждый столбец кроме X; errorbar: первый столбец
    после X с погрешностями из столбца stddev.

    Raises:
        ValueError: errorbar без столбца stddev или неизвестный стиль
        OutputError: Ошибка записи
    """
    x_column = x_column or table.columns[0]
    x = table.column(x_column)
    series = [c for c in table.columns if c not in (x_column, STDDEV_COLUMN)]

    plt.rcParams["svg.hashsalt"] = "binomial-ngqc"
    figure, axes = plt.subplots(figsize=(6, 4))
    if style == PlotStyle.LINE:
        for name in series:
            axes.plot(x, table.column(name), label=name)
        if len(series) > 1:
            axes.legend()
    elif style == PlotStyle.ERRORBAR:
        if STDDEV_COLUMN not in table.columns:
            plt.close(figure)
            raise ValueError("Стиль errorbar требует столбца stddev")
        axes.errorbar(x, table.column(series[0]), yerr=table.column(STDDEV_COLUMN), fmt="o-", capsize=3)
    else:
        plt.close(figure)
        raise ValueError(f"Неизвестный стиль графика: {style}")

    axes.set_xlabel(table.x_label or x_column)
    axes.set_ylabel(table.y_label or (series[0] if len(series) == 1 else ""))
    axes.grid(True, alpha=0.3)
    figure.tight_layout()
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        figure.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise OutputError(f"Не удалось записать {path}: {e}") from e
    finally:
        plt.close(figure)
    logger.info(f"📈 График записан: {path}")
    return path


def _plain(value: Any) -> Any:
    """
    Приводит numpy-типы и кортежи к типам, которые сериализует YAML.
    """
    if isinstance(value, Enum):
        return _plain(value.value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [value.real, value.imag]
    return value


def write_manifest(manifest: Dict[str, Any], path: str) -> str:
    """
    Записывает манифест запуска в YAML.

    Raises:
        OutputError: Ошибка записи
    """
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(_plain(manifest), handle, allow_unicode=True, sort_keys=True)
    except OSError as e:
        raise OutputError(f"Не удалось записать {path}: {e}") from e
    logger.info(f"🧾 Манифест записан: {path}")
    return path


@contextmanager
def experiment_log(path: str, level: str = RUN_LOG_LEVEL) -> Iterator[str]:
    """
    Дублирует логи на время эксперимента в файл рядом с манифестом.

    Файл перезаписывается при каждом запуске; приёмник снимается при выходе
    из блока, в том числе по исключению.

    Raises:
        OutputError: Файл лога не удалось открыть
    """
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        sink_id = logger.add(path, level=level, format=log_format, mode="w", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Не удалось открыть лог {path}: {e}") from e
    try:
        yield path
    finally:
        logger.remove(sink_id)
