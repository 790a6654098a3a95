"""Refinement studies, rate fits and Table-1-style reports.

A study runs one catalog problem on a sequence of uniformly refined
meshes, measures the errors of every level against the exact solution
and fits convergence rates. Reports are written as CSV with
17-significant-digit numbers, so parsing a report gives back exactly the
numbers that were written.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .mesh import refine_uniform
from .norms import w_norm_error
from .problems import get_problem
from .timestepping import N_CAP, StepperConfig, backward_euler, semi_discrete_reference

__all__ = [
    "COLUMNS",
    "ERROR_COLUMNS",
    "TIME_MODES",
    "StudyConfig",
    "StudyError",
    "ReportRow",
    "ConvergenceReport",
    "fit_rate",
    "run_study",
    "run_time_study",
    "parse_config",
    "load_config",
    "config_to_text",
    "with_overrides",
]

log = logging.getLogger(__name__)

COLUMNS = ("level", "h", "tau", "dofs", "e_W", "e_LinfL2", "e_L2H1", "seconds")
ERROR_COLUMNS = ("e_W", "e_LinfL2", "e_L2H1")

# semi: tau -> 0 on every level (semi-discrete errors)
# coupled: N = steps * 2**level, tau halves with h
# fixed: N = steps on every level
TIME_MODES = ("semi", "coupled", "fixed")


class StudyError(RuntimeError):
    """A level of a study failed; rows finished before it are kept."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def fit_rate(hs, errs) -> float:
    """Least-squares slope of ``log(err)`` against ``log(h)``."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if hs.shape != errs.shape or hs.ndim != 1:
        raise ValueError("hs and errs must be 1D sequences of equal length")
    if hs.size < 2:
        raise ValueError("a rate needs at least two points")
    if np.any(errs <= 0.0) or not np.all(np.isfinite(errs)):
        raise ValueError("errors must be positive and finite")
    if np.any(hs <= 0.0):
        raise ValueError("mesh sizes must be positive")
    x = np.log(hs)
    if np.ptp(x) == 0.0:
        raise ValueError("a rate needs at least two distinct mesh sizes")
    slope, _ = np.polyfit(x, np.log(errs), 1)
    return float(slope)


@dataclass(frozen=True)
class StudyConfig:
    """Parameters of a refinement study.

    ``levels`` are refinement counts of the problem's base mesh.
    ``steps`` is the number of time steps on level 0 (``coupled``) or on
    every level (``fixed``), and the starting count of the time
    refinement in ``semi`` mode. ``problem_options`` go to the catalog
    factory, e.g. ``{"eps": 0.1}``. With ``timing=False`` the seconds
    column is written as 0, which makes reports reproducible byte for
    byte.
    """

    problem: str
    levels: tuple = (0, 1, 2)
    time_mode: str = "coupled"
    steps: int = 16
    tol_time: float = 1e-8
    tol_rel: float = 1e-10
    out: str | None = None
    timing: bool = True
    problem_options: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = tuple(int(k) for k in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("levels must be nonempty")
        if levels[0] < 0 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be increasing and nonnegative, got {levels}")
        if self.time_mode not in TIME_MODES:
            raise ValueError(f"time_mode must be one of {TIME_MODES}, got {self.time_mode!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if not self.tol_time > 0.0:
            raise ValueError("tol_time must be positive")

    def n_steps(self, level: int) -> int:
        if self.time_mode == "coupled":
            return self.steps * 2 ** level
        return self.steps


@dataclass(frozen=True)
class ReportRow:
    level: int
    h: float
    tau: float
    dofs: int
    e_W: float
    e_LinfL2: float
    e_L2H1: float
    seconds: float


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


@dataclass(frozen=True)
class ConvergenceReport:
    """Rows of a study, ordered by decreasing ``h`` (or ``tau``)."""

    problem: str
    rows: tuple = ()

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def rates(self, against: str = "h") -> dict:
        """Fitted rate of every error column; ``None`` below two rows."""
        if len(self.rows) < 2:
            return {name: None for name in ERROR_COLUMNS}
        x = self.column(against)
        return {name: fit_rate(x, self.column(name)) for name in ERROR_COLUMNS}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(getattr(r, c)) for c in COLUMNS) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, problem: str = "") -> ConvergenceReport:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"expected CSV header {','.join(COLUMNS)}")
        rows = []
        for rec in reader:
            if not rec:
                continue
            if len(rec) != len(COLUMNS):
                raise ValueError(f"malformed CSV row {rec}")
            kw = {c: (int(v) if c in ("level", "dofs") else float(v))
                  for c, v in zip(COLUMNS, rec)}
            rows.append(ReportRow(**kw))
        return cls(problem, tuple(rows))

    @classmethod
    def read_csv(cls, path, problem: str = "") -> ConvergenceReport:
        return cls.from_csv(Path(path).read_text(), problem)

    def format_table(self, against: str = "h") -> str:
        """Aligned text table with a final row of fitted rates."""
        head = ("level", "h", "tau", "dofs", "e_W", "e_LinfL2", "e_L2H1", "seconds")
        body = [[str(r.level), f"{r.h:.5g}", f"{r.tau:.5g}", str(r.dofs),
                 f"{r.e_W:.5e}", f"{r.e_LinfL2:.5e}", f"{r.e_L2H1:.5e}",
                 f"{r.seconds:.2f}"] for r in self.rows]
        rates = self.rates(against)
        rate_row = ["rate", "", "", ""] + [
            "-" if rates[c] is None else f"{rates[c]:.3f}" for c in ERROR_COLUMNS] + [""]
        table = [list(head)] + body + [rate_row]
        widths = [max(len(line[i]) for line in table) for i in range(len(head))]
        lines = ["  ".join(cell.rjust(w) for cell, w in zip(line, widths)) for line in table]
        title = f"{self.problem} (rates against {against})" if self.problem else ""
        return "\n".join(([title] if title else []) + lines) + "\n"


def _row(level, traj, problem, seconds):
    err = w_norm_error(traj, problem.exact)
    m = traj.mesh
    return ReportRow(level=int(level), h=float(m.h_max),
                     tau=float(traj.times[1] - traj.times[0]), dofs=int(m.n_free),
                     e_W=err.e_W, e_LinfL2=err.e_LinfL2, e_L2H1=err.e_L2H1,
                     seconds=float(seconds))


def _solve_level(cfg: StudyConfig, problem, m, level):
    if cfg.time_mode == "semi":
        return semi_discrete_reference(problem, m, cfg.tol_time, n_start=cfg.steps,
                                       n_cap=N_CAP, tol_rel=cfg.tol_rel)
    return backward_euler(problem, m, StepperConfig(cfg.n_steps(level), cfg.tol_rel))


def run_study(cfg: StudyConfig, on_row=None, on_traj=None) -> ConvergenceReport:
    """Run every level of ``cfg`` and collect one report row per level.

    ``on_row(row)`` is called as each level finishes, and
    ``on_traj(level, trajectory)`` with the trajectory it was measured on. If ``cfg.out`` is
    set the CSV is rewritten after every level, so a failing level
    leaves the finished rows on disk; the failure is raised as
    :class:`StudyError` carrying the partial report.
    """
    problem = get_problem(cfg.problem, **cfg.problem_options)
    if problem.exact is None:
        raise ValueError(f"problem {cfg.problem!r} has no exact solution")
    rows = []
    m = problem.mesh(cfg.levels[0])
    current = cfg.levels[0]
    for level in cfg.levels:
        report = ConvergenceReport(problem.name, tuple(rows))
        try:
            while current < level:
                m = refine_uniform(m)
                current += 1
            start = time.perf_counter()
            traj = _solve_level(cfg, problem, m, level)
            row = _row(level, traj, problem,
                       time.perf_counter() - start if cfg.timing else 0.0)
        except Exception as exc:
            if cfg.out:
                report.write_csv(cfg.out)
            raise StudyError(f"level {level} of {cfg.problem} failed: {exc}", report) from exc
        log.info("level %d: h=%.4g tau=%.4g e_W=%.4e", level, row.h, row.tau, row.e_W)
        rows.append(row)
        if on_row is not None:
            on_row(row)
        if on_traj is not None:
            on_traj(level, traj)
        if cfg.out:
            ConvergenceReport(problem.name, tuple(rows)).write_csv(cfg.out)
    return ConvergenceReport(problem.name, tuple(rows))


def run_time_study(problem, level: int, steps, timing: bool = True) -> ConvergenceReport:
    """Backward Euler on one mesh with each step count in ``steps``.

    Rows are ordered by decreasing ``tau``; fit rates with
    ``report.rates("tau")``.
    """
    if isinstance(problem, str):
        problem = get_problem(problem)
    m = problem.mesh(level)
    rows = []
    for N in sorted(int(n) for n in steps):
        start = time.perf_counter()
        traj = backward_euler(problem, m, StepperConfig(N))
        rows.append(_row(level, traj, problem,
                         time.perf_counter() - start if timing else 0.0))
    return ConvergenceReport(problem.name, tuple(rows))


# --- key=value configuration -----------------------------------------------

_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}
_OPTION_KEYS = ("eps", "n_modes", "n_norm")


def _parse_levels(text: str):
    """``"5"`` means levels 0..4; ``"1,2,3"`` (or ``"3,"``) lists them."""
    text = text.strip()
    if "," in text:
        return tuple(int(t) for t in text.split(",") if t.strip())
    count = int(text)
    if count < 1:
        raise ValueError("the number of levels must be positive")
    return tuple(range(count))


def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("NaN is not a valid setting")
    return value


def parse_config(text: str, overrides: dict | None = None) -> StudyConfig:
    """Build a :class:`StudyConfig` from ``key = value`` lines.

    Blank lines and ``#`` comments are ignored. Keys: ``problem``,
    ``levels``, ``time_mode``, ``steps``, ``tol_time``, ``tol_rel``,
    ``out``, ``timing``, and the problem options ``eps``, ``n_modes``,
    ``n_norm``. ``overrides`` (already-parsed strings, e.g. from the
    command line) replace file values.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key.replace("-", "_")] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key.replace("-", "_")] = str(value)
    known = {f.name for f in fields(StudyConfig)} - {"problem_options"}
    unknown = set(raw) - known - set(_OPTION_KEYS)
    if unknown:
        raise ValueError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    if "problem" not in raw:
        raise ValueError("configuration lacks a problem name")
    kw = {"problem": raw["problem"]}
    if "levels" in raw:
        kw["levels"] = _parse_levels(raw["levels"])
    if "time_mode" in raw:
        kw["time_mode"] = raw["time_mode"]
    if "steps" in raw:
        kw["steps"] = int(raw["steps"])
    for key in ("tol_time", "tol_rel"):
        if key in raw:
            kw[key] = _parse_float(raw[key])
    if raw.get("out"):
        kw["out"] = raw["out"]
    if "timing" in raw:
        try:
            kw["timing"] = _BOOL[raw["timing"].lower()]
        except KeyError:
            raise ValueError(f"timing must be a boolean, got {raw['timing']!r}") from None
    options = {}
    if "eps" in raw:
        options["eps"] = _parse_float(raw["eps"])
    for key in ("n_modes", "n_norm"):
        if key in raw:
            options[key] = int(raw[key])
    kw["problem_options"] = options
    return StudyConfig(**kw)


def load_config(path, overrides: dict | None = None) -> StudyConfig:
    return parse_config(Path(path).read_text(), overrides)


def config_to_text(cfg: StudyConfig) -> str:
    """Inverse of :func:`parse_config`."""
    d = asdict(cfg)
    options = d.pop("problem_options")
    lines = []
    for key, value in d.items():
        if value is None:
            continue
        if key == "levels":
            value = ",".join(str(k) for k in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}"
              for k, v in options.items()]
    return "\n".join(lines) + "\n"


def with_overrides(cfg: StudyConfig, **changes) -> StudyConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
