"""Test result containers and bootstrap inference helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "TestReport",
    "Test2Report",
    "MeanTestReport",
    "critical_value",
    "p_value",
]


def critical_value(draws: np.ndarray, alpha: float) -> float:
    """(1 - alpha) percentile of the bootstrap draws (order statistic)."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError("alpha must lie in (0, 1)")
    draws = np.sort(np.asarray(draws, dtype=float))
    R = draws.size
    if R < 1:
        raise ConfigurationError("at least one bootstrap draw is required")
    k = int(np.ceil((1.0 - alpha) * R))
    return float(draws[min(max(k, 1), R) - 1])


def p_value(draws: np.ndarray, statistic: float) -> float:
    """(1 + #{draws >= statistic}) / (R + 1); never exactly zero."""
    draws = np.asarray(draws, dtype=float)
    return float((1 + np.sum(draws >= statistic)) / (draws.size + 1))


@dataclass
class TestReport:
    """Omnibus (first-test) result."""

    statistic: float
    argmax: dict
    per_tau_sup: dict           # tau -> sup over cells at that tau
    boot_draws: np.ndarray
    critical_values: dict       # alpha -> c*_{1 - alpha}
    p_value: float
    n_selected: int
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def rejects(self, alpha: float) -> bool:
        if alpha not in self.critical_values:
            return self.statistic > critical_value(self.boot_draws, alpha)
        return self.statistic > self.critical_values[alpha]


@dataclass
class Test2Report:
    """Identification-at-infinity (second-test) result."""

    statistic: float
    per_tau: dict               # tau -> studentized statistic
    boot_draws: np.ndarray
    critical_values: dict
    p_value: float
    n_window: int
    eta_used: float | None
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def rejects(self, alpha: float) -> bool:
        if alpha not in self.critical_values:
            return self.statistic > critical_value(self.boot_draws, alpha)
        return self.statistic > self.critical_values[alpha]


@dataclass
class MeanTestReport(TestReport):
    """Conditional-mean variant of the first test; same shape as TestReport."""
