"""Run configuration and on-disk artifacts.

Config and summary files are INI text (``key = value`` with one level of
sections); numeric tables are CSV with 17 significant digits.  Every file is
written atomically through a temporary file in the target directory.
"""

from __future__ import annotations

import configparser
import csv
import io
import os
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .params import FracParams, Grid1D

FLOAT_FMT = "{:.17g}"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    if v is None:
        return ""
    return str(v)


def atomic_write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: str | Path, header: list, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return atomic_write(path, buf.getvalue())


def read_csv(path: str | Path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _ini() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case
    return cp


def write_ini(path: str | Path, sections: dict) -> Path:
    cp = _ini()
    for name, items in sections.items():
        cp[name] = {k: fmt(v) for k, v in items.items()}
    buf = io.StringIO()
    cp.write(buf)
    return atomic_write(path, buf.getvalue())


def read_ini(path: str | Path) -> configparser.ConfigParser:
    cp = _ini()
    if not cp.read(path):
        raise FileNotFoundError(path)
    return cp


# ---------------------------------------------------------------- config

def _floats(text: str) -> tuple:
    text = text.strip()
    return tuple(float(t) for t in text.replace(",", " ").split()) if text else ()


_SECTIONS = {
    "problem": ("s", "k", "x_left", "x_right", "n", "c_gagliardo"),
    "continuation": ("beta0", "ratio", "stages", "betas", "tol", "max_iter", "cubic", "anchored"),
    "run": ("seed", "jitter"),
    "diagnostics": ("diagnostics", "eps_gamma", "segregation_tol", "n_ang", "n_rad", "tau"),
}


@dataclass
class RunConfig:
    s: float = 0.5
    k: int = 2
    x_left: float = -1.0
    x_right: float = 1.0
    n: int = 512
    c_gagliardo: float = 1.0
    beta0: float = 1.0
    ratio: float = 4.0
    stages: int = 10
    betas: tuple = ()
    tol: float = 1e-8
    max_iter: int = 3000
    cubic: tuple = ()
    anchored: str = ""
    seed: int = 0
    jitter: float = 0.0
    diagnostics: bool = True
    eps_gamma: float = 1e-3
    segregation_tol: float = 1e-6
    n_ang: int = 64
    n_rad: int = 32
    tau: float = 1.0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        FracParams(self.s, self.c_gagliardo)
        Grid1D(self.x_left, self.x_right, self.n)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not self.betas and (self.beta0 <= 0 or self.ratio <= 1 or self.stages < 1):
            raise ValueError("need beta0 > 0, ratio > 1 and stages >= 1")
        b = np.asarray(self.betas, float)
        if b.size and (np.any(b <= 0) or np.any(np.diff(b) <= 0)):
            raise ValueError("betas must be positive and strictly increasing")
        if self.cubic and len(self.cubic) not in (1, self.k):
            raise ValueError("cubic needs one weight or k weights")
        if self.tol <= 0 or self.max_iter < 1 or self.eps_gamma <= 0 or self.jitter < 0:
            raise ValueError("tolerances must be positive")

    @property
    def params(self) -> FracParams:
        return FracParams(self.s, self.c_gagliardo)

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.x_left, self.x_right, self.n)

    def beta_list(self) -> tuple:
        if self.betas:
            return tuple(float(b) for b in self.betas)
        return tuple(float(self.beta0 * self.ratio**j) for j in range(self.stages))

    def sections(self) -> dict:
        out = {}
        for sec, keys in _SECTIONS.items():
            items = {}
            for key in keys:
                v = getattr(self, key)
                items[key] = " ".join(fmt(b) for b in v) if isinstance(v, tuple) else v
            out[sec] = items
        out["build"] = {"package": "fracseg", "version": __version__}
        return out

    def save(self, path: str | Path) -> Path:
        return write_ini(path, self.sections())

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            if key not in kinds:
                raise ValueError(f"unknown config key {key!r}")
            kw[key] = _coerce(kinds[key], raw)
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_mapping(read_config_values(path))


def read_config_values(path: str | Path) -> dict:
    """Raw ``key -> text`` values of a config file, checked against the sections."""
    cp = read_ini(path)
    values = {}
    for sec in cp.sections():
        if sec == "build":
            continue
        if sec not in _SECTIONS:
            raise ValueError(f"unknown config section [{sec}]")
        for key, raw in cp[sec].items():
            if key not in _SECTIONS[sec]:
                raise ValueError(f"key {key!r} does not belong to section [{sec}]")
            values[key] = raw
    return values


def _coerce(kind: str, raw):
    if not isinstance(raw, str):
        return raw
    kind = str(kind)
    if kind == "bool":
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("true", "1", "yes", "on")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "tuple":
        return _floats(raw)
    return raw


# ---------------------------------------------------------------- runs

def densities_path(run_dir: str | Path, stage: int) -> Path:
    return Path(run_dir) / f"densities_{stage:02d}.csv"


def write_densities(path: str | Path, x: np.ndarray, u: np.ndarray) -> Path:
    u = np.atleast_2d(u)
    header = ["x"] + [f"u{i}" for i in range(u.shape[0])]
    return write_csv(path, header, zip(x, *u))


def read_densities(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    header, rows = read_csv(path)
    if not header or header[0] != "x":
        raise ValueError(f"{path}: expected a leading x column")
    arr = np.array(rows, dtype=float)
    return arr[:, 0], arr[:, 1:].T


@dataclass
class LoadedRun:
    path: Path
    config: RunConfig
    stages: list
    final_u: np.ndarray

    @property
    def params(self) -> FracParams:
        return self.config.params

    @property
    def grid(self) -> Grid1D:
        return self.config.grid

    @property
    def eps_gamma(self) -> float:
        return self.config.eps_gamma


def load_run(run_dir: str | Path) -> LoadedRun:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory {run_dir} does not exist")
    cfg_path = run_dir / "config"
    if not cfg_path.exists():
        raise FileNotFoundError(f"{cfg_path} missing")
    cfg = RunConfig.load(cfg_path)
    stages = sorted(run_dir.glob("densities_*.csv"))
    if not stages:
        raise FileNotFoundError(f"no densities_*.csv in {run_dir}")
    x, u = read_densities(stages[-1])
    if u.shape != (cfg.k, cfg.n) or not np.allclose(x, cfg.grid.nodes, rtol=0, atol=1e-12):
        raise ValueError(f"{stages[-1]} does not match the run configuration")
    return LoadedRun(path=run_dir, config=cfg, stages=stages, final_u=u)
