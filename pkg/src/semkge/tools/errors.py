"""Consistent error formatting and exit codes.

Exit codes: 1 = validation (bad input, config, usage), 2 = runtime failure.
"""

from __future__ import annotations

from dataclasses import dataclass

VALIDATION = 1
RUNTIME = 2


@dataclass(frozen=True)
class SemKgeError(Exception):
    code: int
    short: str
    context: str
    next_step: str

    def format(self) -> str:
        return (
            f"ERROR [{self.code}]: {self.short}\n"
            f"  Context: {self.context}\n"
            f"  Next step: {self.next_step}\n"
        )

    def __str__(self) -> str:
        return f"{self.short}: {self.context}"


def usage_error(context: str, next_step: str = "Check the arguments passed to this call") -> SemKgeError:
    return SemKgeError(code=VALIDATION, short="Invalid usage", context=context, next_step=next_step)


def parse_error(path: str, line_no: int, detail: str) -> SemKgeError:
    return SemKgeError(
        code=VALIDATION,
        short="Malformed input file",
        context=f"{path}, line {line_no}: {detail}",
        next_step="Fix the line (tab-separated, no header) and re-run",
    )


def io_error(path: str, detail: str) -> SemKgeError:
    return SemKgeError(
        code=RUNTIME,
        short="Cannot read or write file",
        context=f"{path}: {detail}",
        next_step="Check that the path exists and is accessible",
    )


def config_error(context: str, next_step: str = "Fix the config file or CLI flags and re-run") -> SemKgeError:
    return SemKgeError(code=VALIDATION, short="Invalid configuration", context=context, next_step=next_step)


def sampling_error(context: str) -> SemKgeError:
    return SemKgeError(
        code=RUNTIME,
        short="Negative sampling failed",
        context=context,
        next_step="Run `semkge-run filter` on the dataset first, or check the schema files",
    )


def divergence(epoch: int, batch: int, detail: str) -> SemKgeError:
    return SemKgeError(
        code=RUNTIME,
        short="Training diverged (non-finite loss)",
        context=f"epoch {epoch}, batch {batch}: {detail}",
        next_step="Lower the learning rate or enable regularization, then re-run",
    )


def checkpoint_error(path: str, detail: str) -> SemKgeError:
    return SemKgeError(
        code=RUNTIME,
        short="Unreadable checkpoint",
        context=f"{path}: {detail}",
        next_step="Re-run `semkge-run train` to regenerate the checkpoint",
    )


def checkpoint_mismatch(detail: str) -> SemKgeError:
    return SemKgeError(
        code=VALIDATION,
        short="Checkpoint does not match the dataset or model",
        context=detail,
        next_step="Evaluate with the dataset and model kind the checkpoint was trained on",
    )


def undefined_metric(metric: str, context: str) -> SemKgeError:
    return SemKgeError(
        code=VALIDATION,
        short=f"{metric} is undefined",
        context=context,
        next_step="Evaluate on a non-empty split",
    )
