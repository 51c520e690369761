import sys
from typing import Optional, TextIO

from toptune.config.base import COLORS


class Log:
    """Colored console messages; errors go to stderr, everything else to stdout."""

    quiet = False

    @staticmethod
    def _print(message: str, color: str = "", stream: Optional[TextIO] = None):
        if Log.quiet and stream is None:
            return
        print(f"{color}{message}{COLORS['RESET']}", file=stream or sys.stdout)

    @staticmethod
    def info(message: str):
        Log._print(message, COLORS["INFO"])

    @staticmethod
    def success(message: str):
        Log._print(message, COLORS["SUCCESS"])

    @staticmethod
    def warning(message: str):
        Log._print(message, COLORS["WARNING"])

    @staticmethod
    def error(message: str):
        Log._print(message, COLORS["ERROR"], stream=sys.stderr)

    @staticmethod
    def detail(message: str):
        Log._print(message, COLORS["GRAY"])

    @staticmethod
    def created(path: str):
        Log._print(f"Created: {path}", COLORS["SUCCESS"])

    @staticmethod
    def converted(path: str):
        Log._print(f"Converted: {path}", COLORS["SUCCESS"])

    @staticmethod
    def loaded(path: str):
        Log._print(f"Loaded: {path}", COLORS["INFO"])

    @staticmethod
    def epoch(epoch: int, train_loss: float, validation_em: float, elapsed: float, stop_state: str):
        Log._print(
            f"Epoch {epoch:>3}  loss {train_loss:.4f}  dev EM {validation_em:.4f}  "
            f"{elapsed:7.1f}s  {COLORS['GRAY']}{stop_state}",
            COLORS["INFO"])

    @staticmethod
    def trial(trial: int, seed: int, validation_em: float, test_em: float):
        Log._print(f"Trial {trial:>2} seed {seed}: dev EM {validation_em:.4f}  test EM {test_em:.4f}",
                   COLORS["INFO"])

    @staticmethod
    def completed(task: str, location: str):
        Log._print(f"{task} completed at: {location}", COLORS["SUCCESS"])

    @staticmethod
    def run_start(run_name: str):
        Log._print(f"Starting run: {run_name}", COLORS["INFO"])

    @staticmethod
    def run_end(run_name: str, location: str):
        Log._print(f"Run '{run_name}' finished, outputs at {location} ✨", COLORS["INFO"])
