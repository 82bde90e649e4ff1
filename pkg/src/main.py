"""
Основная точка входа flowsinks.

Предоставляет CLI интерфейс: по одной команде на эксперимент, запуск
сценария из файла, список моделей и схему отчета.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from dynamics.scenarios import run
from dynamics.tools.field import get_model, list_models
from src.config import settings
from src.reports.models import Experiment, RunReport, ScenarioConfig, StageStatus, parse_config
from src.reports.storage import ReportStorage, load_config_file
from src.utils.error_handler import ConfigError, ToolkitError

logger = logging.getLogger(__name__)
console = Console()

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def configure_logging(debug: bool = False) -> None:
    """Настраивает корневой логгер: поток stderr и необязательный файл из настроек."""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=logging.DEBUG if debug else getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _set_dotted(target: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = target
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value


def _apply_pairs(target: Dict[str, Any], pairs: Iterable[str], option: str) -> None:
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"Ожидается {option} ключ=значение, получено '{pair}'", option)
        _set_dotted(target, key.strip(), _parse_value(raw.strip()))


class FlowsinksCLI:
    """
    CLI интерфейс для запуска экспериментов.

    Собирает конфигурацию из файла и флагов, запускает сценарий,
    сохраняет отчет и ряды данных.
    """

    def build_config(
        self,
        config_path: Optional[str],
        experiment: Optional[Experiment],
        model: Optional[str] = None,
        model_params: Iterable[str] = (),
        params: Iterable[str] = (),
        seed: Optional[int] = None,
        tol: Optional[float] = None,
        out: Optional[str] = None,
        emit: Iterable[str] = (),
    ) -> ScenarioConfig:
        """
        Собирает и проверяет конфигурацию сценария.

        Флаги командной строки имеют приоритет над файлом.

        Raises:
            ConfigError: Если конфигурация неполна или неверна
        """
        data: Dict[str, Any] = load_config_file(config_path) if config_path else {}
        if experiment is not None:
            data["experiment"] = experiment.value
        if model is not None:
            data["model"] = {"name": model, "params": {}}
        model_params = list(model_params)
        if model_params:
            model_section = data.setdefault("model", {})
            if not isinstance(model_section, dict):
                raise ConfigError("Поле 'model' должно быть объектом", "model")
            _apply_pairs(model_section.setdefault("params", {}), model_params, "--model-param")
        _apply_pairs(data.setdefault("parameters", {}), params, "--param")
        if seed is not None:
            data["seed"] = seed
        if tol is not None:
            data["tolerance"] = tol
        output = data.setdefault("output", {})
        if out is not None:
            output["directory"] = out
        emit = list(emit)
        if emit:
            output["emit"] = list(output.get("emit", [])) + emit
        return parse_config(data)

    def execute(self, config: ScenarioConfig) -> int:
        """
        Выполняет сценарий, сохраняет результаты и возвращает код выхода.

        Returns:
            int: 0 при успехе, 2 при ошибке конфигурации, 3 при численной ошибке
        """
        if config.output.emit and not config.output.directory:
            raise ConfigError("Для --emit требуется --out", "output.directory")

        report = run(config)
        self.display_report(report)

        if config.output.directory:
            storage = ReportStorage(config.output.directory)
            path = storage.save_report(report, config.output.report_name)
            console.print(f"[green]Отчет сохранен:[/green] {path}")
            for emitted in storage.emit_plotdata(report, config.output.emit):
                console.print(f"[green]Данные для графика:[/green] {emitted}")
        else:
            click.echo(report.model_dump_json(indent=2))

        return EXIT_NUMERICAL if report.has_numerical_failure else EXIT_OK

    def display_report(self, report: RunReport) -> None:
        """Отображает стадии отчета в виде таблицы."""
        table = Table(title=f"Эксперимент: {report.experiment.value}")
        table.add_column("Стадия", style="cyan")
        table.add_column("Статус", style="white")
        table.add_column("Вердикт", style="white")
        table.add_column("Детали", style="white")

        for stage in report.stages:
            status_icon = {
                StageStatus.OK: "[OK]",
                StageStatus.FAILED: "[ERR]",
                StageStatus.SKIPPED: "[SKIP]",
            }[stage.status]
            verdict = "-" if stage.verdict is None else ("да" if stage.verdict else "нет")
            details = f"{stage.error.code}: {stage.error.message}" if stage.error else ""
            table.add_row(stage.name, f"{status_icon} {stage.status.value}", verdict, details)

        Console(stderr=True).print(table)


def _invoke(cli_state: FlowsinksCLI, **kwargs: Any) -> None:
    try:
        config = cli_state.build_config(**kwargs)
        code = cli_state.execute(config)
    except ConfigError as e:
        Console(stderr=True).print(f"[bold red][ERR] {e}[/bold red]")
        sys.exit(EXIT_CONFIG)
    except ToolkitError as e:
        Console(stderr=True).print(f"[bold red][ERR] [{e.error_code}] {e}[/bold red]")
        sys.exit(EXIT_CONFIG if e.error_code == "UNKNOWN_SERIES" else EXIT_NUMERICAL)
    sys.exit(code)


def scenario_options(func):
    """Общие флаги команд экспериментов."""
    options = [
        click.option("--config", "config_path", type=click.Path(), help="JSON-файл сценария"),
        click.option("--out", type=click.Path(), help="Каталог для отчета и данных"),
        click.option("--seed", type=int, help="Зерно генератора"),
        click.option("--tol", type=float, help="Допуск интегратора (abs = rel)"),
        click.option("--emit", multiple=True, help="Ряд данных для выгрузки (повторяемый)"),
        click.option("--model", help="Имя модели из каталога"),
        click.option("--model-param", "model_params", multiple=True, help="Параметр модели ключ=значение"),
        click.option("--param", "params", multiple=True, help="Параметр эксперимента ключ=значение"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option("--debug", is_flag=True, help="Включить отладочное логирование")
def cli(debug):
    """flowsinks - численные эксперименты с сингулярными потоками."""
    configure_logging(debug)
    if debug:
        logger.debug("Отладочное логирование включено")


def _experiment_command(experiment: Experiment) -> None:
    @scenario_options
    def command(**kwargs: Any) -> None:
        _invoke(FlowsinksCLI(), experiment=experiment, **kwargs)

    command.__doc__ = f"Запустить эксперимент {experiment.value}."
    cli.command(name=experiment.value.replace("_", "-"))(command)


for _experiment in Experiment:
    _experiment_command(_experiment)


@cli.command(name="run")
@scenario_options
def run_command(**kwargs: Any) -> None:
    """Запустить эксперимент, указанный в файле сценария."""
    _invoke(FlowsinksCLI(), experiment=None, **kwargs)


@cli.command()
def models():
    """Показать каталог моделей."""
    table = Table(title="Модели")
    table.add_column("Имя", style="cyan")
    table.add_column("Размерность", style="white")
    table.add_column("Особых точек", style="white")
    table.add_column("Параметры", style="white")
    for name in list_models():
        model = get_model(name)
        table.add_row(name, str(model.dim), str(len(model.singularities)), json.dumps(dict(model.params)))
    console.print(table)


@cli.command()
@click.option(
    "--which",
    type=click.Choice(["report", "config"]),
    default="report",
    help="Схема отчета или конфигурации",
)
def schema(which):
    """Вывести JSON-схему отчета или конфигурации."""
    model = RunReport if which == "report" else ScenarioConfig
    click.echo(json.dumps(model.model_json_schema(), indent=2, ensure_ascii=False))


@cli.command()
@click.argument("report_path", type=click.Path(exists=True))
def show(report_path):
    """Показать сохраненный отчет."""
    path = Path(report_path)
    report = ReportStorage(str(path.parent)).load_report(path.name)
    if report is None:
        sys.exit(EXIT_CONFIG)
    FlowsinksCLI().display_report(report)
    console.print(
        Panel(
            "\n".join(f"{name}: {verdict}" for name, verdict in report.verdicts.items()) or "нет вердиктов",
            title="Вердикты",
            border_style="red" if report.has_numerical_failure else "green",
        )
    )


if __name__ == "__main__":
    cli()
