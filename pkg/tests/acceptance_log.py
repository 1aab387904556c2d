"""Records one pass/fail line per acceptance criterion."""
from __future__ import annotations

import functools
import time

RESULTS: dict[int, tuple[str, str, float, str]] = {}


def criterion(number: int, title: str, seconds: float):
    """Time the wrapped test, enforce its wall-clock budget and log the outcome."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            status, note = "FAIL", ""
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - start
                if elapsed > seconds:
                    note = f"over budget ({elapsed:.1f}s > {seconds:g}s)"
                    raise AssertionError(note)
                status = "PASS"
            except BaseException as exc:
                note = note or f"{type(exc).__name__}: {str(exc).splitlines()[0][:100] if str(exc) else ''}"
                raise
            finally:
                elapsed = time.perf_counter() - start
                RESULTS[number] = (status, title, elapsed, note)
                print(format_line(number))
        return run
    return wrap


def format_line(number: int) -> str:
    status, title, elapsed, note = RESULTS[number]
    line = f"[{status}] {number:2d}. {title} ({elapsed:.2f}s)"
    return f"{line} {note}" if note else line


def summary_lines() -> list[str]:
    return [format_line(n) for n in sorted(RESULTS)]
