"""Run configuration for the command-line suites."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from .counterexample import DEFAULT_LADDER, CounterexampleParams
from .errors import ConfigError
from .quad import QuadratureSpec
from .special import KernelParams

COMMANDS = ("constants", "verify-hessian", "verify-riesz", "verify-infconv", "counterexample", "abp-check")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    """Everything a suite run depends on. Every field has a default.

    Attributes:
        command: Suite to run, one of ``COMMANDS``.
        n: Dimension.
        sigma: Order of the operators.
        lam: Lower ellipticity bound.
        Lam: Upper ellipticity bound.
        eta: Lower matrix cutoff for the ellipticity class.
        tol: Quadrature accuracy target.
        r_inner: Fixed inner quadrature radius (automatic when None).
        r_outer: Fixed tail radius (automatic when None).
        angular_points: Sphere rule size (dimension default when None).
        N: Ladder of inner scales for the counterexample suites.
        p: Integrability exponent for ``abp-check`` (p0 when None).
        out: Report file; nothing is written when None.
        format: Report format, csv or json.
        seed: Seed for every sampled check.
        workers: Thread count for independent rows and points.
        quiet: Suppress the summary table.
    """

    command: str = "constants"
    n: int = 2
    sigma: float = 1.6
    lam: float = 1.0
    Lam: float = 4.0
    eta: float = 0.0
    tol: float = 1e-4
    r_inner: float | None = None
    r_outer: float | None = None
    angular_points: int | None = None
    N: tuple[int, ...] = DEFAULT_LADDER
    p: float | None = None
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    workers: int = 1
    quiet: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; expected csv or json")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.N or any(int(v) != v or v < 2 for v in self.N):
            raise ConfigError(f"N must be a non-empty list of integers >= 2, got {self.N}")
        if not math.isfinite(self.tol) or self.tol <= 0.0:
            raise ConfigError(f"tol must be positive, got {self.tol}")

    def kernel_params(self) -> KernelParams:
        return KernelParams(n=self.n, sigma=self.sigma, lam=self.lam, Lam=self.Lam, eta=self.eta)

    def quad_spec(self) -> QuadratureSpec:
        return QuadratureSpec(
            r_inner=self.r_inner, r_outer=self.r_outer, angular_points=self.angular_points, tol=self.tol
        )

    def counterexample_params(self) -> list[CounterexampleParams]:
        return [CounterexampleParams(n=self.n, sigma=self.sigma, N=int(v), lam=self.lam, Lam=self.Lam) for v in self.N]

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["N"] = list(self.N)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values = dict(data)
        if "N" in values:
            raw = values["N"]
            values["N"] = tuple(int(v) for v in (raw if isinstance(raw, (list, tuple)) else [raw]))
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def merged(self, overrides: dict[str, Any]) -> RunConfig:
        """Copy with the non-None entries of ``overrides`` applied."""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(data)


def load_config(path: str | Path) -> RunConfig:
    """Read a JSON RunConfig.

    Raises:
        ConfigError: If the file is missing, is not valid JSON or has unknown keys.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return RunConfig.from_dict(data)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
