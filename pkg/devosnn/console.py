"""Thin wrapper around rich.Console with project theme and helper functions."""

from __future__ import annotations

from typing import Any, Sequence

from rich.console import Console
from rich.table import Table
from rich.theme import Theme

from devosnn.metrics import EpochMetrics

_THEME = Theme(
    {
        "phase": "bold cyan",
        "success": "bold green",
        "error": "bold red",
        "warning": "bold yellow",
        "muted": "dim",
        "epoch": "bold white",
    }
)

_console: Console | None = None


def make_console(**kwargs: Any) -> Console:
    """A Console carrying the project theme."""
    return Console(theme=_THEME, **kwargs)


def get_console() -> Console:
    """Return the singleton Console instance."""
    global _console
    if _console is None:
        _console = make_console()
    return _console


def set_console(console: Console) -> None:
    """Replace the singleton Console (test seam)."""
    global _console
    _console = console


def print_phase(label: str) -> None:
    get_console().print(f"\n[phase]{label}[/phase]\n")


def print_success(msg: str) -> None:
    get_console().print(f"[success]{msg}[/success]")


def print_error(msg: str) -> None:
    get_console().print(f"[error]{msg}[/error]")


def print_warning(msg: str) -> None:
    get_console().print(f"[warning]{msg}[/warning]")


def print_muted(text: str) -> None:
    get_console().print(f"[muted]{text}[/muted]")


def print_epoch(m: EpochMetrics, total: int) -> None:
    """One-line summary like '>>> Epoch 3/50: loss 0.41 ...'."""
    alive = "/".join(str(n) for n in m.alive)
    get_console().print(
        f"[epoch]>>> Epoch {m.epoch + 1}/{total}:[/epoch] loss {m.train_loss:.4f}  "
        f"train {m.train_acc:.2f}%  test {m.test_acc:.2f}%  compression {m.compression:.2f}%  "
        f"[muted]alive {alive}  pruned {m.pruned_units}  revived {m.revived}[/muted]"
    )


def metrics_table(metrics: Sequence[EpochMetrics], title: str = "Epochs") -> Table:
    table = Table(title=title)
    for column in ("epoch", "loss", "train %", "test %", "compr. %", "rho_conv", "rho_fc", "rho_g", "alive"):
        table.add_column(column, justify="right")
    for m in metrics:
        table.add_row(
            str(m.epoch), f"{m.train_loss:.4f}", f"{m.train_acc:.2f}", f"{m.test_acc:.2f}",
            f"{m.compression:.2f}", f"{m.rho_conv:.2f}", f"{m.rho_fc:.2f}", f"{m.rho_g:.2f}",
            "/".join(str(n) for n in m.alive),
        )
    return table


def sweep_table(param: str, rows: Sequence[tuple[str, float, float, str]]) -> Table:
    """Rows of (value, test accuracy, compression, run directory)."""
    table = Table(title=f"Sweep over {param}")
    table.add_column(param)
    table.add_column("test %", justify="right")
    table.add_column("compr. %", justify="right")
    table.add_column("run", style="muted")
    for value, acc, compression, run_dir in rows:
        table.add_row(value, f"{acc:.2f}", f"{compression:.2f}", run_dir)
    return table
