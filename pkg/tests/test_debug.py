"""Tests for the file-based debug logger."""

from __future__ import annotations

from par_nonlocal_pucci.debug import (
    DebugLevel,
    DebugLogger,
    LogTimer,
    debug_error,
    debug_info,
    log_refinement,
    log_report_row,
)


class TestDebugLogger:
    def test_singleton(self) -> None:
        assert DebugLogger() is DebugLogger()

    def test_helpers_never_raise(self) -> None:
        debug_error("TEST", "error message")
        debug_info("TEST", "info message")
        log_refinement("hessian", 1, 128, 1e-3, 1e-4)
        log_report_row("test", {"N": 16, "A": 1.0})

    def test_timer_context(self) -> None:
        with LogTimer("TEST", "noop", DebugLevel.TRACE) as timer:
            pass
        assert timer.operation == "noop"
