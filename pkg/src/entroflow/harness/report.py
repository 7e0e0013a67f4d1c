"""Report containers and the CSV/JSON/plot-data writers."""

from __future__ import annotations

import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..entropy import EntropySample
from .config import DEFAULT_TOLERANCES, ScenarioConfig

SCHEMA_VERSION = "1"

SERIES_COLUMNS = ("t", "W_boundary", "W_interior", "rhs_vol", "rhs_bdry", "fd_dWdt", "harnack_min")
RESIDUAL_COLUMNS = (
    "divergence",
    "key_identity_max",
    "bochner_max",
    "neumann_compat",
    "decomposition",
    "normal_rate",
    "boundary_integrand_min",
    "boundary_integrand_absmax",
    "volume_integrand_max",
    "H_min",
    "radius_error",
    "isoperimetric_ratio",
)


@dataclass
class Check:
    """One pass/fail flag; `tolerance_key` names an entry of the tolerance table."""

    name: str
    value: float
    tolerance: float
    tolerance_key: str
    comparison: str  # "<=", ">=-" (value >= -tol), "order" (|value - nominal| <= tol)
    passed: bool
    applicable: bool = True
    nominal: float | None = None
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if not self.applicable:
            status = "N/A "
        if self.comparison == "order":
            rel = f"order {self.value:.3f} vs {self.nominal} +- {self.tolerance}"
        elif self.comparison == ">=-":
            rel = f"{self.value:.3e} >= -{self.tolerance:.1e}"
        else:
            rel = f"{self.value:.3e} <= {self.tolerance:.1e}"
        tail = f"  [{self.note}]" if self.note else ""
        return f"{status} {self.name}: {rel} ({self.tolerance_key}){tail}"


def check_le(cfg: ScenarioConfig, name: str, value: float, key: str, note: str = "") -> Check:
    tol = cfg.tol(key)
    value = float(value)
    return Check(name, value, tol, key, "<=", bool(value <= tol), note=note)


def check_ge(cfg: ScenarioConfig, name: str, value: float, key: str, note: str = "") -> Check:
    tol = cfg.tol(key)
    value = float(value)
    return Check(name, value, tol, key, ">=-", bool(value >= -tol), note=note)


def check_order(cfg: ScenarioConfig, name: str, value: float, nominal: float, note: str = "") -> Check:
    tol = cfg.tol("order_halfwidth")
    value = float(value)
    return Check(name, value, tol, "order_halfwidth", "order", bool(abs(value - nominal) <= tol),
                 nominal=nominal, note=note)


def not_applicable(name: str, key: str, note: str) -> Check:
    return Check(name, math.nan, DEFAULT_TOLERANCES[key], key, "<=", True, applicable=False, note=note)


@dataclass
class EntropyReport:
    config: ScenarioConfig
    series: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    convergence: dict = field(default_factory=dict)
    minimizer: dict | None = None
    warnings: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str | None = None
    wall_clock_s: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.aborted and all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def exit_code(self, strict: bool = False) -> int:
        if self.aborted:
            return 3
        if not self.passed or (strict and self.warnings):
            return 1
        return 0

    def summary_lines(self) -> list[str]:
        head = f"== {self.config.name} ({self.config.flow_kind})"
        if self.aborted:
            head += f" ABORTED: {self.abort_reason}"
        lines = [head] + ["  " + c.line() for c in self.checks]
        lines += [f"  WARN {w}" for w in self.warnings]
        return lines


def _fmt(v) -> str:
    """Shortest decimal that round-trips to the same double."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def sample_row(s: EntropySample) -> list[float]:
    base = [s.t, s.W_boundary, s.W_interior, s.rhs_volume, s.rhs_boundary, s.fd_dWdt, s.harnack_min]
    return base + [s.residuals.get(k, math.nan) for k in RESIDUAL_COLUMNS]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_dict(rep: EntropyReport) -> dict:
    cfg = rep.config
    tolerances = {k: cfg.tol(k) for k in DEFAULT_TOLERANCES}
    return _jsonable({
        "schema": SCHEMA_VERSION,
        "scenario": cfg.to_dict(),
        "passed": rep.passed,
        "aborted": rep.aborted,
        "abort_reason": rep.abort_reason,
        "checks": [asdict(c) for c in rep.checks],
        "convergence": rep.convergence,
        "minimizer": rep.minimizer,
        "warnings": rep.warnings,
        "tolerances": tolerances,
        "series_columns": list(SERIES_COLUMNS + RESIDUAL_COLUMNS),
        "n_samples": len(rep.series),
        "metadata": {
            "wall_clock_s": rep.wall_clock_s,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    })


def emit_outputs(rep: EntropyReport, out_dir) -> dict:
    """Write series.csv, report.json and plot/<metric>.dat under out_dir."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"series": out / "series.csv", "report": out / "report.json"}
        rows = [sample_row(s) for s in rep.series]
        header = SERIES_COLUMNS + RESIDUAL_COLUMNS
        with paths["series"].open("w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(v) for v in r) + "\n")
        with paths["report"].open("w") as fh:
            json.dump(report_dict(rep), fh, indent=2, sort_keys=False, allow_nan=False)
            fh.write("\n")
        plot_dir = out / "plot"
        plot_dir.mkdir(exist_ok=True)
        for j, name in enumerate(header[1:], start=1):
            pts = [(r[0], r[j]) for r in rows if math.isfinite(r[j])]
            if not pts:
                continue
            p = plot_dir / f"{name}.dat"
            with p.open("w") as fh:
                fh.write(f"# t {name}\n")
                for t, v in pts:
                    fh.write(f"{_fmt(t)} {_fmt(v)}\n")
            paths[f"plot:{name}"] = p
    except OSError as exc:
        raise OSError(f"cannot write outputs under {out}: {exc}") from exc
    return paths


def read_series(path) -> dict:
    """Parse a series.csv back into column arrays (used by tests and scripts)."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}
