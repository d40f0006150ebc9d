"""Run configuration shared by the CLI and the experiment scripts."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Tuple


@dataclass(frozen=True)
class AnalysisConfig:
    """Inputs and options of one analysis run.

    Paths are checked for existence on construction; ``level`` must lie in
    (0, 1) and ``nsim`` must be nonnegative.
    """

    points: Optional[Path] = None
    grid: Optional[Path] = None
    rasters: Tuple[Path, ...] = ()
    window: Optional[Path] = None
    direction: str = "high"
    fp_convention: str = "area"
    baseline: Optional[Path] = None
    weights_column: Optional[str] = None
    h1: Optional[float] = None
    h2: Optional[float] = None
    nsim: int = 0
    seed: Optional[int] = None
    level: float = 0.95
    output_dir: Path = Path(".")
    threads: int = 1
    tol: float = 1e-8
    max_iter: int = 100

    def __post_init__(self):
        for f in ("points", "grid", "window", "baseline"):
            v = getattr(self, f)
            if v is not None:
                object.__setattr__(self, f, Path(v))
        object.__setattr__(self, "rasters", tuple(Path(r) for r in self.rasters))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        for path in self.input_paths():
            if not path.exists():
                raise FileNotFoundError(f"input file not found: {path}")
        if self.direction not in ("high", "low"):
            raise ValueError("direction must be 'high' or 'low'")
        if self.fp_convention not in ("absence", "all", "area"):
            raise ValueError("fp_convention must be 'absence', 'all' or 'area'")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.nsim < 0:
            raise ValueError("nsim must be nonnegative")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def input_paths(self):
        paths = [getattr(self, f) for f in ("points", "grid", "window", "baseline")]
        return [p for p in paths if p is not None] + list(self.rasters)

    @classmethod
    def from_namespace(cls, ns) -> "AnalysisConfig":
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in vars(ns).items() if k in names and v is not None}
        return cls(**kw)
