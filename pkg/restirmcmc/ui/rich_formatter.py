"""
Terminal output for restirmcmc runs with Rich.
"""
from typing import Dict, Iterable, List, Optional

from rich.align import Align
from rich.box import HEAVY_HEAD, ROUNDED
from rich.columns import Columns
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from restirmcmc import __version__


def _verdict(passed: bool) -> Text:
    return Text("PASS", style="bold green") if passed else Text("FAIL", style="bold red")


class RichFormatter:
    """Rich-based formatter for render, metrics and testbed output."""

    def __init__(self, console: Optional[Console] = None, width: int = 120, no_color: bool = False):
        """
        Initialize formatter.

        Args:
            console: Console to print to; a new one is created when omitted
            width: Console width
            no_color: Disable colored output
        """
        self.console = console or Console(width=width, no_color=no_color, force_terminal=True)
        self.width = width

    def print_banner(self, version: str = __version__):
        banner = r"""
    ____       _____ _______ _____ _____        __  __  _____ __  __  _____
   |  _ \ ___ / ____|__   __|_   _|  __ \      |  \/  |/ ____|  \/  |/ ____|
   | |_) / _ \ (___    | |    | | | |__) |_____| \  / | |    | \  / | |
   |  _ <  __/\___ \   | |    | | |  _  /______| |\/| | |    | |\/| | |
   |_| \_\___|____/    |_|   |_____|_| \_\     |_|  |_|\_____|_|  |_|\_____|
        """
        self.console.print()
        self.console.print(Align.center(banner), style="bold magenta")
        self.console.print(Align.center(
            f"[bold cyan]restirmcmc[/bold cyan] [dim]v{version}[/dim] - "
            "[green]Reservoir resampling with Metropolis-Hastings mutations[/green]"
        ))
        self.console.print()

    def print_config(self, config: Dict) -> None:
        """Key run settings as metric panels."""
        render = config.get("render", {})
        mutation = config.get("mutation", {})
        metrics = [
            ("Mode", config.get("mode", ""), "blue"),
            ("Seed", str(config.get("seed", 0)), "cyan"),
            ("Candidates M", str(render.get("M", "")), "yellow"),
            ("Mutations", str(mutation.get("iters", "")), "magenta"),
            ("Strategy", str(mutation.get("strategy", "")), "green"),
        ]
        panels = [
            Panel(Align.center(f"[bold {color}]{value}[/bold {color}]"),
                  title=f"[bold {color}]{label}[/bold {color}]", expand=False, padding=(0, 2))
            for label, value, color in metrics
        ]
        for i in range(0, len(panels), 3):
            self.console.print(Columns(panels[i:i + 3]))

    def print_frame_table(self, rows: List[Dict], limit: int = 20) -> None:
        """Per-frame timing and acceptance."""
        table = Table(title="[bold blue]FRAMES[/bold blue]", box=HEAVY_HEAD, show_header=True,
                      header_style="bold white on dark_blue")
        table.add_column("Frame", style="cyan", justify="right")
        table.add_column("Time", style="yellow", justify="right")
        table.add_column("Proposed", justify="right")
        table.add_column("Accepted", justify="right")
        table.add_column("Acceptance", style="green", justify="right")
        for row in rows[-limit:]:
            table.add_row(str(row["frame"]), f"{row['duration_ms']:.1f}ms", f"{row['proposed']:,}",
                          f"{row['accepted']:,}", f"{row['acceptance_rate'] * 100:.1f}%")
        self.console.print(table)
        if len(rows) > limit:
            self.console.print(f"[dim]... {len(rows) - limit} earlier frames in acceptance.csv[/dim]")

    def print_covariance_table(self, rows: Iterable[Dict]) -> None:
        table = Table(title="[bold magenta]BOX-AVERAGED COVARIANCE[/bold magenta]", box=HEAVY_HEAD,
                      header_style="bold white on dark_blue")
        table.add_column("Radius", style="cyan", justify="right")
        table.add_column("Self pairs", style="dim")
        table.add_column("Image average", style="magenta", justify="right")
        for row in rows:
            table.add_row(str(row["radius"]), "yes" if row["include_self"] else "no",
                          f"{row['image_avg_covariance']:.6g}")
        self.console.print(table)

    def print_metric_summary(self, values: Dict[str, float]) -> None:
        table = Table(title="Metrics", box=ROUNDED, show_header=False)
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="green", justify="right")
        for name, value in values.items():
            table.add_row(name, f"{value:.6g}")
        self.console.print(table)

    def print_unbiasedness_table(self, results) -> None:
        table = Table(title="[bold blue]UNBIASEDNESS[/bold blue]", box=HEAVY_HEAD,
                      header_style="bold white on dark_blue")
        for name, style in (("Target", "cyan"), ("M", None), ("k", None), ("Mean", "yellow"),
                            ("Oracle", "yellow"), ("z", "magenta"), ("Acceptance", None), ("Result", None)):
            table.add_column(name, style=style, justify="left" if name == "Target" else "right")
        for r in results:
            table.add_row(r.target, str(r.M), str(r.k_mutations), f"{r.mean:.6f}", f"{r.oracle:.6f}",
                          f"{r.z:+.2f}", f"{r.acceptance_rate * 100:.1f}%", _verdict(r.passed))
        self.console.print(table)

    def print_two_pixel_table(self, rows: List[Dict]) -> None:
        table = Table(title="[bold blue]TWO-PIXEL COVARIANCE[/bold blue]", box=HEAVY_HEAD,
                      header_style="bold white on dark_blue")
        table.add_column("Case", style="cyan")
        table.add_column("Without mutation", justify="right")
        table.add_column("With mutation", justify="right")
        table.add_column("Reduction", style="magenta", justify="right")
        table.add_column("Result")
        for row in rows:
            table.add_row(row["case"], f"{row['cov_without']:.4g} ± {row['se_without']:.2g}",
                          f"{row['cov_with']:.4g} ± {row['se_with']:.2g}",
                          f"{row['reduction'] * 100:.1f}%", _verdict(row["passed"]))
        self.console.print(table)

    def print_chain_table(self, rows: List[Dict]) -> None:
        table = Table(title="[bold blue]CHAIN STATIONARITY[/bold blue]", box=HEAVY_HEAD,
                      header_style="bold white on dark_blue")
        table.add_column("Chain", style="cyan")
        table.add_column("States", justify="right")
        table.add_column("TV distance", style="magenta", justify="right")
        table.add_column("Expected")
        table.add_column("Result")
        for row in rows:
            table.add_row(row["chain"], f"{row['samples']:,}", f"{row['tv_distance']:.4f}",
                          row["expectation"], _verdict(row["passed"]))
        self.console.print(table)

    def print_success(self, message: str) -> None:
        self.console.print(f"[green]✓[/green] {message}")

    def print_error(self, error) -> None:
        self.console.print(Panel(f"[bold red]{getattr(error, 'message', str(error))}[/bold red]"
                                 + (f"\n[dim]{error.details}[/dim]" if getattr(error, "details", None) else ""),
                                 title=f"[red]{getattr(error, 'error_code', 'ERROR')}[/red]", box=ROUNDED,
                                 expand=False))
