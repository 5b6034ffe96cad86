"""Grid sweeps over (p, q), config loading and CSV/JSON emission."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .metrics import KeyRateReport, Region, raw_rate
from .montecarlo import McConfig, simulate_experiment
from .metrics import evaluate_point
from .states import NoiseParams

CONFIG_SCHEMA_VERSION = 1
RESULT_SCHEMA_VERSION = 1
MAX_GRID_POINTS = 10**7
THREADS_ENV = "QPASIM_THREADS"

CSV_COLUMNS = (
    "p", "q", "e_z_pol", "e_x_pol", "e_z_et", "e_x_et", "k_pol", "k_et", "k_noisy",
    "yield", "e_z_post", "e_x_post", "k_qpa", "gain", "region",
)


class ConfigError(ValueError):
    """Invalid or unreadable sweep configuration."""


@dataclass(frozen=True)
class AxisRange:
    min: float
    max: float
    step: float

    def __post_init__(self):
        for name in ("min", "max", "step"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"range {name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not 0.0 <= self.min <= self.max <= 1.0:
            raise ConfigError(f"range must satisfy 0 <= min <= max <= 1, got [{self.min}, {self.max}]")
        if self.step <= 0:
            raise ConfigError(f"step must be positive, got {self.step}")

    def values(self) -> np.ndarray:
        n = int(math.floor((self.max - self.min) / self.step + 1e-9)) + 1
        return np.round(self.min + self.step * np.arange(n), 12)

    def __len__(self) -> int:
        return int(math.floor((self.max - self.min) / self.step + 1e-9)) + 1


DEFAULT_RANGE = AxisRange(0.0, 0.4, 0.005)


@dataclass(frozen=True)
class SweepConfig:
    p_range: AxisRange = DEFAULT_RANGE
    q_range: AxisRange = DEFAULT_RANGE
    mode: str = "analytic"
    mc: McConfig | None = None
    intrinsic: tuple[float, float] | None = None
    output_dir: str = "qpasim-out"
    emit_plots: bool = False

    def __post_init__(self):
        if self.mode not in ("analytic", "montecarlo"):
            raise ConfigError(f"mode must be 'analytic' or 'montecarlo', got {self.mode!r}")
        if self.mode == "montecarlo" and self.mc is None:
            raise ConfigError("montecarlo mode needs a 'montecarlo' section")
        if self.intrinsic is not None:
            v_pol, v_et = self.intrinsic
            try:
                NoiseParams(v_pol=v_pol, v_et=v_et)
            except ValueError as exc:
                raise ConfigError(f"intrinsic error: {exc}") from None
            object.__setattr__(self, "intrinsic", (float(v_pol), float(v_et)))
        size = len(self.p_range) * len(self.q_range)
        if size > MAX_GRID_POINTS:
            raise ConfigError(f"grid has {size} points, limit is {MAX_GRID_POINTS}")

    @property
    def seed(self) -> int | None:
        return None if self.mc is None else self.mc.seed

    def to_dict(self) -> dict:
        d = {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "grid": {
                "p": {"min": self.p_range.min, "max": self.p_range.max, "step": self.p_range.step},
                "q": {"min": self.q_range.min, "max": self.q_range.max, "step": self.q_range.step},
            },
            "mode": self.mode,
            "output_dir": self.output_dir,
            "emit_plots": self.emit_plots,
        }
        if self.mc is not None:
            d["montecarlo"] = {
                "n_pairs": self.mc.n_pairs,
                "seed": self.mc.seed,
                "apply_franson_loss": self.mc.apply_franson_loss,
            }
        if self.intrinsic is not None:
            d["intrinsic"] = {"v_pol": self.intrinsic[0], "v_et": self.intrinsic[1]}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        """Build a config from a parsed document; unknown keys are rejected."""
        if not isinstance(data, dict):
            raise ConfigError("config document must be a mapping")
        _reject_unknown(data, {"schema_version", "grid", "mode", "montecarlo", "intrinsic", "output_dir", "emit_plots"}, "")
        version = data.get("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}, expected {CONFIG_SCHEMA_VERSION}")
        kwargs: dict = {}
        grid = data.get("grid", {})
        if not isinstance(grid, dict):
            raise ConfigError("'grid' must be a mapping")
        _reject_unknown(grid, {"p", "q"}, "grid.")
        for axis in ("p", "q"):
            if axis in grid:
                kwargs[f"{axis}_range"] = _parse_range(grid[axis], f"grid.{axis}")
        if "mode" in data:
            kwargs["mode"] = data["mode"]
        if data.get("montecarlo") is not None:
            mc = data["montecarlo"]
            if not isinstance(mc, dict):
                raise ConfigError("'montecarlo' must be a mapping")
            _reject_unknown(mc, {"n_pairs", "seed", "apply_franson_loss"}, "montecarlo.")
            try:
                kwargs["mc"] = McConfig(**mc)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"montecarlo: {exc}") from None
        if data.get("intrinsic") is not None:
            intr = data["intrinsic"]
            if not isinstance(intr, dict):
                raise ConfigError("'intrinsic' must be a mapping")
            _reject_unknown(intr, {"v_pol", "v_et"}, "intrinsic.")
            kwargs["intrinsic"] = (intr.get("v_pol", 0.0), intr.get("v_et", 0.0))
        if "output_dir" in data:
            kwargs["output_dir"] = str(data["output_dir"])
        if "emit_plots" in data:
            if not isinstance(data["emit_plots"], bool):
                raise ConfigError("'emit_plots' must be true or false")
            kwargs["emit_plots"] = data["emit_plots"]
        return cls(**kwargs)


def _reject_unknown(section: dict, allowed: set[str], prefix: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")


def _parse_range(node, where: str) -> AxisRange:
    if not isinstance(node, dict):
        raise ConfigError(f"'{where}' must be a mapping with min, max, step")
    _reject_unknown(node, {"min", "max", "step"}, where + ".")
    missing = {"min", "max", "step"} - set(node)
    if missing:
        raise ConfigError(f"'{where}' is missing {', '.join(sorted(missing))}")
    try:
        return AxisRange(node["min"], node["max"], node["step"])
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path: str | os.PathLike) -> SweepConfig:
    """Read a YAML sweep config.

    Raises:
        ConfigError: the file is missing, unparsable or fails validation.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return SweepConfig.from_dict(data or {})


@dataclass
class SweepResult:
    """Reports for every grid point, indexed ``reports[i][j]`` for ``(p[i], q[j])``."""

    config: SweepConfig
    p_values: np.ndarray
    q_values: np.ndarray
    reports: list[list[KeyRateReport]]
    metadata: dict = field(default_factory=dict)

    def iter_points(self):
        """Yield ``(p, q, report)`` in row-major (p outer, q inner) order."""
        for i, p in enumerate(self.p_values):
            for j, q in enumerate(self.q_values):
                yield float(p), float(q), self.reports[i][j]

    def field(self, name: str) -> np.ndarray:
        """2-D array of a report attribute, axis 0 = p, axis 1 = q.

        Besides report attributes, accepts ``raw_pol``/``raw_et``: the unclamped
        Devetak-Winter margins whose zero level marks the noise thresholds.
        """
        def get(r: KeyRateReport):
            if name == "raw_pol":
                return raw_rate(r.pol)
            if name == "raw_et":
                return raw_rate(r.et)
            if name == "region":
                return r.region.value
            return getattr(r, name)

        dtype = object if name == "region" else float
        return np.array([[get(r) for r in row] for row in self.reports], dtype=dtype)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    if threads < 1:
        raise ConfigError(f"thread count must be positive, got {threads}")
    return threads


def _point_params(cfg: SweepConfig, p: float, q: float) -> NoiseParams:
    v_pol, v_et = cfg.intrinsic or (0.0, 0.0)
    return NoiseParams(p=p, q=q, v_pol=v_pol, v_et=v_et)


def _evaluate_row(cfg: SweepConfig, i: int, p: float, q_values) -> list[KeyRateReport]:
    row = []
    for j, q in enumerate(q_values):
        params = _point_params(cfg, float(p), float(q))
        if cfg.mode == "analytic":
            row.append(evaluate_point(params))
        else:
            row.append(simulate_experiment(params, cfg.mc, point_key=(i, j)).report)
    return row


def run_sweep(cfg: SweepConfig, threads: int | None = None) -> SweepResult:
    """Evaluate every grid point; output is independent of the thread count."""
    threads = resolve_threads(threads)
    p_values = cfg.p_range.values()
    q_values = cfg.q_range.values()
    if threads == 1:
        reports = [_evaluate_row(cfg, i, p, q_values) for i, p in enumerate(p_values)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # map keeps submission order, so rows come back row-major
            reports = list(pool.map(lambda ip: _evaluate_row(cfg, ip[0], ip[1], q_values), enumerate(p_values)))
    metadata = {
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }
    return SweepResult(cfg, p_values, q_values, reports, metadata)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def report_row(p: float, q: float, r: KeyRateReport) -> list[str]:
    return [
        _fmt(p), _fmt(q),
        _fmt(r.pol.e_z), _fmt(r.pol.e_x), _fmt(r.et.e_z), _fmt(r.et.e_x),
        _fmt(r.k_pol), _fmt(r.k_et), _fmt(r.k_noisy), _fmt(r.yield_),
        _fmt(r.post_pol.e_z), _fmt(r.post_pol.e_x), _fmt(r.k_qpa), _fmt(r.gain),
        r.region.value,
    ]


def emit_csv(result: SweepResult, path: str | os.PathLike) -> Path:
    """Write one row per grid point with a fixed header; floats to 12 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for p, q, r in result.iter_points():
            writer.writerow(report_row(p, q, r))
    return path


def _json_float(x: float):
    return None if math.isnan(x) else float(x)


def result_to_dict(result: SweepResult) -> dict:
    points = []
    for p, q, r in result.iter_points():
        points.append({
            "p": p, "q": q,
            "e_z_pol": r.pol.e_z, "e_x_pol": r.pol.e_x,
            "e_z_et": r.et.e_z, "e_x_et": r.et.e_x,
            "k_pol": r.k_pol, "k_et": r.k_et, "k_noisy": r.k_noisy,
            "yield": r.yield_,
            "e_z_post": _json_float(r.post_pol.e_z), "e_x_post": _json_float(r.post_pol.e_x),
            "k_qpa": r.k_qpa, "gain": r.gain, "region": r.region.value,
        })
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "metadata": result.metadata,
        "p_values": [float(v) for v in result.p_values],
        "q_values": [float(v) for v in result.q_values],
        "points": points,
    }


def emit_json(result: SweepResult, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result_to_dict(result), indent=1, allow_nan=False) + "\n")
    return path


def positive_gain_components(result: SweepResult) -> int:
    """Number of 4-connected components of grid points with positive gain."""
    from scipy import ndimage

    mask = np.array([[r.region is not Region.NONE for r in row] for row in result.reports])
    _, n = ndimage.label(mask)
    return int(n)


def _bilinear_subsample(f: np.ndarray, s: int) -> np.ndarray:
    t = (np.arange(s) + 0.5) / s
    tp, tq = np.meshgrid(t, t, indexing="ij")
    a, b = f[:-1, :-1, None, None], f[1:, :-1, None, None]
    c, d = f[:-1, 1:, None, None], f[1:, 1:, None, None]
    return a * (1 - tp) * (1 - tq) + b * tp * (1 - tq) + c * (1 - tp) * tq + d * tp * tq


def region_summary(result: SweepResult, subsamples: int = 8) -> dict[str, dict]:
    """Area and bounding box of each positive-gain region.

    Areas (in QBER^2 units) come from bilinear interpolation of the gain and the
    two unclamped pre-QPA rate margins inside each grid cell, sampled on an
    ``subsamples x subsamples`` lattice per cell. Bounding boxes span the grid
    points carrying the label.
    """
    g = result.field("gain")
    mp = result.field("raw_pol")
    me = result.field("raw_et")
    labels = result.field("region")
    out: dict[str, dict] = {}
    if g.shape[0] > 1 and g.shape[1] > 1:
        gi, mpi, mei = (_bilinear_subsample(f, subsamples) for f in (g, mp, me))
        dp = np.diff(result.p_values)[:, None, None, None]
        dq = np.diff(result.q_values)[None, :, None, None]
        cell = dp * dq / subsamples**2
        pos = gi > 0
        pol_ok = mpi > 0
        et_ok = mei > 0
        masks = {
            Region.I: pos & ~pol_ok & ~et_ok,
            Region.II: pos & pol_ok & ~et_ok,
            Region.III: pos & ~pol_ok & et_ok,
            Region.IV: pos & pol_ok & et_ok,
        }
        areas = {reg: float((m * cell).sum()) for reg, m in masks.items()}
    else:
        areas = {reg: 0.0 for reg in (Region.I, Region.II, Region.III, Region.IV)}
    P, Q = np.meshgrid(result.p_values, result.q_values, indexing="ij")
    for reg in (Region.I, Region.II, Region.III, Region.IV):
        sel = labels == reg.value
        bbox = None
        if sel.any():
            bbox = (float(P[sel].min()), float(P[sel].max()), float(Q[sel].min()), float(Q[sel].max()))
        out[reg.value] = {"area": areas[reg], "points": int(sel.sum()), "bbox": bbox}
    return out
