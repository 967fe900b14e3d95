"""Benchmark sweeps over (method, mode, size, chi, T) cells, written as CSV.

Modes
-----
``torus``
    ln Z of the ``size x size`` plaquette torus; checked against the exact
    transfer-matrix spin sum when ``size <= 10``.
``thermo-limit``
    Free energy of the infinite lattice by growing the torus until two
    successive estimates differ by less than ``tolerance`` (cap ``size``);
    checked against Onsager.
``strip``
    Free energy per spin of an infinite strip ``size`` tensors wide; checked
    against the dense transfer matrix for ``size <= 10`` and otherwise
    against a CTRG run at ``reference_chi``.

``chi = 0`` stands for exact mode (no truncation). Relative errors are
``|x - x_ref| / |x_ref|``.
"""

from __future__ import annotations

import contextlib
import csv
import io
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import TruncationPolicy, ctrg_step, init_core, logZ_sequence, logZ_torus
from .ising import (
    T_CRITICAL,
    boltzmann_plaquette_tensor,
    onsager_free_energy_density,
    onsager_internal_energy_density,
    strip_free_energy_exact,
    transfer_matrix_logZ,
)
from .strip import StripSpec, ctrg_strip, trg_strip
from .tensor import deterministic
from .trg import init_trg, is_power_of_two, logZ_torus_trg, trg_step

log = logging.getLogger(__name__)

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "RunConfig",
    "BenchRecord",
    "parse_config",
    "load_config",
    "run_sweep",
    "write_csv",
    "read_csv",
    "fit_power_law",
    "median_wall_time",
    "ctrg_step_time",
    "trg_step_time",
    "time_to_target",
    "crossover_chi",
    "Oracle",
    "run_to_csv",
    "sweep_comments",
    "config_lines",
    "parse_overrides",
]

CSV_HEADER = (
    "method,mode,L,chi,T_over_Tc,lnZ,f,u,err_f,err_u,steps,max_eps,wall_seconds"
)
METHODS = ("ctrg", "trg")
MODES = ("torus", "strip", "thermo-limit")
TEMP_UNITS = ("tc", "absolute")
STRIP_BOUNDARIES = ("open", "periodic")
ORACLE_MAX_SIZE = 10
U_STEP = 1e-3


class ConfigError(ValueError):
    """Invalid benchmark configuration (a usage error)."""


def _policy(chi: int) -> TruncationPolicy:
    return TruncationPolicy.exact_mode() if chi == 0 else TruncationPolicy(chi)


@dataclass(frozen=True)
class RunConfig:
    method: str = "ctrg"
    mode: str = "torus"
    chi: tuple[int, ...] = (16,)
    temps: tuple[float, ...] = (1.0,)
    temps_unit: str = "tc"
    size: int = 4
    tolerance: float = 1e-8
    max_steps: int = 10_000
    boundary: str = "periodic"
    reference_chi: int = 0
    with_u: bool = True
    out: str = ""
    deterministic: bool = False
    reps: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.chi or any(c < 0 for c in self.chi):
            raise ConfigError("chi must be a non-empty list of non-negative integers")
        if not self.temps or not all(math.isfinite(t) and t > 0 for t in self.temps):
            raise ConfigError("temps must be a non-empty list of positive finite numbers")
        if self.temps_unit not in TEMP_UNITS:
            raise ConfigError(f"temps_unit must be one of {TEMP_UNITS}")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.max_steps < 1 or self.reps < 1:
            raise ConfigError("max_steps and reps must be >= 1")
        if self.boundary not in STRIP_BOUNDARIES:
            raise ConfigError(f"boundary must be one of {STRIP_BOUNDARIES}")
        if self.reference_chi < 0:
            raise ConfigError("reference_chi must be >= 0")
        min_size = {"torus": 2, "strip": 1, "thermo-limit": 3}[self.mode]
        if self.size < min_size:
            raise ConfigError(f"size must be >= {min_size} in {self.mode} mode")
        if self.method == "trg":
            if self.mode != "thermo-limit" and not is_power_of_two(self.size):
                raise ConfigError("TRG needs a power-of-two size")
            if self.mode == "strip" and self.boundary != "periodic":
                raise ConfigError("TRG strips need boundary = periodic")
        if self.mode != "thermo-limit" and self.steps_needed() > self.max_steps:
            raise ConfigError(f"size {self.size} needs more than max_steps = {self.max_steps}")

    def steps_needed(self) -> int:
        if self.method == "trg":
            return 2 * int(math.log2(self.size))
        return max(self.size - 2, 0) if self.mode == "torus" or self.boundary == "periodic" \
            else self.size - 1

    def temperatures(self) -> list[float]:
        """Absolute temperatures of the sweep."""
        scale = T_CRITICAL if self.temps_unit == "tc" else 1.0
        return [t * scale for t in self.temps]

    def strip_reference_chi(self) -> int:
        return self.reference_chi or 4 * max(self.chi)


@dataclass(frozen=True)
class BenchRecord:
    method: str
    mode: str
    L: int
    chi: int
    T_over_Tc: float
    lnZ: float
    f: float
    u: float | None
    err_f: float | None
    err_u: float | None
    steps: int
    max_eps: float
    wall_seconds: float


# --- config parsing ---------------------------------------------------------


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_chi(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part == "exact":
            out.append(0)
        elif part:
            out.append(int(part))
    return tuple(out)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


_PARSERS: dict[str, Callable[[str], object]] = {
    "method": str.strip,
    "mode": str.strip,
    "chi": _parse_chi,
    "temps": _parse_floats,
    "temps_unit": str.strip,
    "size": int,
    "tolerance": float,
    "max_steps": int,
    "boundary": str.strip,
    "reference_chi": int,
    "with_u": _parse_bool,
    "out": str.strip,
    "deterministic": _parse_bool,
    "reps": int,
}


def parse_overrides(pairs: dict[str, str]) -> dict[str, object]:
    """Typed values for raw ``key -> text`` settings; unknown keys are errors."""
    values = {}
    for key, text in pairs.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
    return values


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """RunConfig from flat ``key = value`` lines (``#`` starts a comment)."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    values = parse_overrides(raw)
    if base is None:
        return RunConfig(**values)
    return replace(base, **values)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_lines(config: RunConfig) -> list[str]:
    """Config echoed as ``key = value`` text that :func:`parse_config` reads back."""
    out = []
    for fld in fields(config):
        value = getattr(config, fld.name)
        if fld.name == "chi":
            text = ",".join("exact" if c == 0 else str(c) for c in value)
        elif isinstance(value, tuple):
            text = ",".join(repr(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        out.append(f"{fld.name} = {text}")
    return out


# --- CSV ----------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(records: Sequence[BenchRecord], stream, comments: Iterable[str] = ()) -> None:
    for line in comments:
        stream.write(f"# {line}\n")
    stream.write(CSV_HEADER + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    for rec in records:
        writer.writerow([_fmt(v) for v in asdict(rec).values()])


def read_csv(stream) -> list[BenchRecord]:
    """Records from CSV text written by :func:`write_csv`."""
    lines = [ln for ln in stream if not ln.startswith("#") and ln.strip()]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError("missing or unexpected CSV header")
    out = []
    for row in csv.reader(lines[1:]):
        m, mode, size, chi, t, lnz, f, u, ef, eu, steps, eps, wall = row

        def opt(x):
            return float(x) if x != "" else None

        out.append(BenchRecord(m, mode, int(size), int(chi), float(t), float(lnz), float(f),
                               opt(u), opt(ef), opt(eu), int(steps), float(eps), float(wall)))
    return out


# --- timing -------------------------------------------------------------------


def median_wall_time(fn: Callable[[], object], reps: int = 5):
    """``(median seconds, last result)`` of ``reps`` calls; the first call is not a warm-up."""
    times, result = [], None
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times), result


def ctrg_step_time(chi: int, temperature: float = T_CRITICAL, reps: int = 5) -> float:
    """Median wall time of one CTRG iteration with every bond at ``chi``."""
    policy = TruncationPolicy(chi)
    state = init_core(boltzmann_plaquette_tensor(1.0 / temperature), 10**9, policy)
    while min(state.a_h.shape[0], state.a_v.shape[1], state.c_l.shape[2]) < chi:
        state, _, _ = ctrg_step(state, policy)
    with deterministic():
        return median_wall_time(lambda: ctrg_step(state, policy), reps)[0]


def trg_step_time(chi: int, temperature: float = T_CRITICAL, reps: int = 5) -> float:
    """Median wall time of one TRG step with every bond at ``chi``."""
    policy = TruncationPolicy(chi)
    state = init_trg(boltzmann_plaquette_tensor(1.0 / temperature), 2**60)
    while state.tensor.shape[0] < chi:
        state = trg_step(state, policy)
    with deterministic():
        return median_wall_time(lambda: trg_step(state, policy), reps)[0]


def time_to_target(records: Sequence[BenchRecord], target: float) -> float:
    """Least wall time among records with ``err_f <= target`` (inf if none)."""
    ok = [r.wall_seconds for r in records if r.err_f is not None and r.err_f <= target]
    return min(ok, default=math.inf)


def crossover_chi(ctrg: Sequence[BenchRecord], trg: Sequence[BenchRecord],
                  target: float = 1e-5) -> int | None:
    """Smallest CTRG ``chi`` from which CTRG is the faster route to any tighter accuracy.

    A CTRG run qualifies when ``err_f <= target`` and, for every accuracy
    level ``e`` at or below its own error that CTRG reaches in the sweep,
    the cheapest CTRG run reaching ``e`` is faster than the cheapest TRG
    run reaching ``e``. Returns ``None`` when no run qualifies.
    """
    levels = sorted({r.err_f for r in ctrg if r.err_f is not None})
    for rec in sorted(ctrg, key=lambda r: r.chi):
        if rec.err_f is None or rec.err_f > target:
            continue
        tighter = [e for e in levels if e <= rec.err_f]
        if all(time_to_target(ctrg, e) < time_to_target(trg, e) for e in tighter):
            return rec.chi
    return None


# --- power-law fit ------------------------------------------------------------


def fit_power_law(points: Sequence[tuple[float, float]]):
    """Least-squares fit of ``y = prefactor * x**exponent`` in log-log coordinates.

    Returns ``(exponent, prefactor, residual)`` with ``residual`` the RMS
    deviation of ``ln y`` from the fitted line.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least three (x, y) points")
    if not np.all(pts > 0):
        raise ValueError("power-law fit needs positive x and y")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), float(math.exp(intercept)), residual


# --- cells --------------------------------------------------------------------


def _rel(value, reference):
    if reference is None:
        return None
    return abs(value - reference) / abs(reference)


@dataclass
class _Cell:
    ln_z: float
    f: float
    steps: int
    max_eps: float
    size: int


def _torus_cell(method, temperature, size, policy) -> _Cell:
    beta = 1.0 / temperature
    if method == "ctrg":
        ln_z, eps = logZ_torus(beta, size, policy)
        steps = size - 2
    else:
        ln_z, eps = logZ_torus_trg(beta, size, policy)
        steps = 2 * int(math.log2(size))
    return _Cell(ln_z, -temperature * ln_z / (2 * size * size), steps, eps, size)


def _thermo_cell(method, temperature, cap, tol, policy, max_steps) -> _Cell:
    beta = 1.0 / temperature
    prev_f = prev = None
    cell = None
    if method == "ctrg":
        cap = min(cap, max_steps + 2)
        sizes = logZ_sequence(boltzmann_plaquette_tensor(beta), cap, policy)
        for size, ln_z, eps in sizes:
            if prev is not None:
                f = -temperature * (ln_z - prev[1]) / (2 * size * size - 2 * prev[0] ** 2)
                cell = _Cell(ln_z, f, size - 2, eps, size)
                if prev_f is not None and abs(f - prev_f) < tol:
                    return cell
                prev_f = f
            prev = (size, ln_z)
        return cell
    size = 2
    while size <= cap and 2 * int(math.log2(size)) <= max_steps:
        ln_z, eps = logZ_torus_trg(beta, size, policy)
        if prev is not None:
            f = -temperature * (ln_z - prev[1]) / (2 * size * size - 2 * prev[0] ** 2)
            cell = _Cell(ln_z, f, 2 * int(math.log2(size)), eps, size)
            if prev_f is not None and abs(f - prev_f) < tol:
                return cell
            prev_f = f
        prev = (size, ln_z)
        size *= 2
    if cell is None:
        raise ConfigError("thermo-limit TRG needs a cap of at least 4")
    return cell


def _strip_cell(method, temperature, width, boundary, policy) -> _Cell:
    spec = StripSpec(width, temperature, boundary)
    res = (ctrg_strip if method == "ctrg" else trg_strip)(spec, policy)
    ln_z_row = -res.free_energy * spec.spins_per_row / temperature
    return _Cell(ln_z_row, res.free_energy, res.steps, res.max_eps, width)


def _evaluate(config: RunConfig, temperature: float, policy) -> _Cell:
    if config.mode == "torus":
        return _torus_cell(config.method, temperature, config.size, policy)
    if config.mode == "thermo-limit":
        return _thermo_cell(config.method, temperature, config.size, config.tolerance,
                            policy, config.max_steps)
    return _strip_cell(config.method, temperature, config.size, config.boundary, policy)


def _internal_energy(f_of_t: Callable[[float], float], temperature: float):
    """``d(beta f)/d(beta)`` by central difference with relative step ``U_STEP``."""
    beta = 1.0 / temperature
    db = U_STEP * beta
    bp, bm = beta + db, beta - db
    return (bp * f_of_t(1.0 / bp) - bm * f_of_t(1.0 / bm)) / (2.0 * db)


class Oracle:
    """Reference f (and u) per temperature for one configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.cache: dict[float, float | None] = {}
        self.provenance = self._describe()

    def _describe(self) -> str:
        c = self.config
        if c.mode == "thermo-limit":
            return "Onsager quadrature (infinite lattice)"
        if c.mode == "torus":
            if c.size <= ORACLE_MAX_SIZE:
                return "exact spin sum by row transfer matrix"
            return "none (size above the exact oracle's reach)"
        if c.size <= ORACLE_MAX_SIZE:
            return f"dense strip transfer matrix, {c.boundary} width"
        return f"CTRG proxy, chi_ref = {c.strip_reference_chi()}, {c.boundary} width"

    def seed(self, temperature: float, free_energy: float) -> None:
        """Use a precomputed reference at ``temperature``."""
        self.cache[temperature] = free_energy

    def free_energy(self, temperature: float) -> float | None:
        if temperature not in self.cache:
            self.cache[temperature] = self._compute(temperature)
        return self.cache[temperature]

    def _compute(self, temperature: float) -> float | None:
        c = self.config
        if c.mode == "thermo-limit":
            return onsager_free_energy_density(temperature)
        if c.mode == "torus":
            if c.size > ORACLE_MAX_SIZE:
                return None
            ln_z = transfer_matrix_logZ(1.0 / temperature, c.size)
            return -temperature * ln_z / (2 * c.size * c.size)
        if c.size <= ORACLE_MAX_SIZE:
            return strip_free_energy_exact(temperature, c.size, c.boundary)
        spec = StripSpec(c.size, temperature, c.boundary)
        return ctrg_strip(spec, TruncationPolicy(c.strip_reference_chi())).free_energy

    def internal_energy(self, temperature: float) -> float | None:
        if self.config.mode == "thermo-limit":
            return onsager_internal_energy_density(temperature)
        f_mid = self.free_energy(temperature)
        if f_mid is None:
            return None
        return _internal_energy(self.free_energy, temperature)


def run_sweep(config: RunConfig, oracle: Oracle | None = None) -> list[BenchRecord]:
    """One record per (chi, T) cell, in config order."""
    ctx = deterministic() if config.deterministic else contextlib.nullcontext()
    oracle = oracle or Oracle(config)
    records = []
    with ctx:
        for chi in config.chi:
            policy = _policy(chi)
            for temperature in config.temperatures():
                wall, cell = median_wall_time(
                    lambda: _evaluate(config, temperature, policy), config.reps
                )
                u = err_u = None
                if config.with_u:
                    u = _internal_energy(
                        lambda t: _evaluate(config, t, policy).f, temperature
                    )
                f_ref = oracle.free_energy(temperature)
                if f_ref is None:
                    log.warning("no oracle for %s cell at T=%g; error fields left blank",
                                config.mode, temperature)
                elif u is not None:
                    err_u = _rel(u, oracle.internal_energy(temperature))
                records.append(BenchRecord(
                    method=config.method,
                    mode=config.mode,
                    L=cell.size,
                    chi=chi,
                    T_over_Tc=temperature / T_CRITICAL,
                    lnZ=cell.ln_z,
                    f=cell.f,
                    u=u,
                    err_f=_rel(cell.f, f_ref),
                    err_u=err_u,
                    steps=cell.steps,
                    max_eps=cell.max_eps,
                    wall_seconds=max(wall, 1e-9),
                ))
    return records


def sweep_comments(config: RunConfig, oracle: Oracle) -> list[str]:
    return ["config: " + line for line in config_lines(config)] + [
        f"oracle: {oracle.provenance}",
        "chi = 0 means exact mode (no truncation); errors are relative",
        "strip lnZ is per row of the strip" if config.mode == "strip" else
        "thermo-limit lnZ is that of the last torus grown" if config.mode == "thermo-limit"
        else "lnZ is that of the whole torus",
    ]


def run_to_csv(config: RunConfig) -> tuple[list[BenchRecord], str]:
    """Run the sweep and render the CSV text (comments, header, rows)."""
    oracle = Oracle(config)
    records = run_sweep(config, oracle)
    buf = io.StringIO()
    write_csv(records, buf, sweep_comments(config, oracle))
    return records, buf.getvalue()
