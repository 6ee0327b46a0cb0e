"""Parameter sweeps over the pump-strength coordinate xi = kappa t alpha_p.

A sweep evolves one initial state through the trilinear interaction and
evaluates the criteria stack at every grid point for every requested
hierarchy level, serializing the results to a plain CSV that downstream
plotting tools can consume. Runs are deterministic: no RNG enters anywhere,
numbers are printed with a fixed format, and files are written atomically.
"""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .criteria import evaluate_criteria, nha_zubairy
from .dynamics import EvolutionConfig, InteractionSpec, build_hamiltonian, evolve
from .fock import (
    ModeLayout,
    QuantumState,
    coherent_state,
    product_state,
    top_level_population,
)

_CSV_COLUMNS = (
    "n,k,l,xi,nu_minus,ineq7,ineq8,lemma1,detC,nz,verdict,truncation_flag,"
    "pop_pump,pop_a,pop_b"
)


@dataclass(frozen=True)
class SweepConfig:
    """Physical and numerical parameters of one sweep.

    dims orders the truncation as (pump, A, B). xi runs from 0 to xi_max in
    steps of xi_step; hierarchy lists the n values evaluated at each point.
    with_nz adds the product-of-variances comparator (k=1, l=2 only).
    """

    k: int = 1
    l: int = 2
    kappa: float = 1.0
    alpha_p: float = 5.0
    dims: tuple[int, int, int] = (60, 26, 52)
    xi_max: float = 1.5
    xi_step: float = 0.02
    hierarchy: tuple[int, ...] = (1, 2, 3)
    with_nz: bool = False
    tol: float = 1e-9
    workers: int = 0
    convergence_step: tuple[int, int, int] = (4, 8, 16)
    out: str | None = None

    def __post_init__(self):
        if self.xi_step <= 0 or self.xi_max < 0:
            raise ValueError("xi grid must have positive step and nonnegative extent")
        if not self.hierarchy or any(n < 1 for n in self.hierarchy):
            raise ValueError("hierarchy levels must be positive integers")
        if len(self.dims) != 3:
            raise ValueError("dims must name (pump, A, B) truncations")
        if self.with_nz and (self.k, self.l) != (1, 2):
            raise ValueError("the variance-product comparator is defined for k=1, l=2")

    def xi_grid(self) -> tuple[float, ...]:
        npoints = int(np.floor(self.xi_max / self.xi_step + 1e-9)) + 1
        return tuple(i * self.xi_step for i in range(npoints))


_INT_KEYS = {"k", "l", "workers"}
_FLOAT_KEYS = {"kappa", "alpha_p", "xi_max", "xi_step", "tol"}
_TUPLE_KEYS = {"dims", "hierarchy", "convergence_step"}
_BOOL_KEYS = {"with_nz"}
_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def load_config(path: str) -> dict:
    """Parse a key=value config file into a typed mapping.

    Blank lines and '#' comments are ignored; keys match SweepConfig fields.
    """
    known = {f.name for f in fields(SweepConfig)}
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lower().replace("-", "_")
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value, f"{path}:{lineno}")
    return out


def _coerce(key: str, value: str, where: str):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _TUPLE_KEYS:
            parts = [p for p in value.replace(",", " ").split() if p]
            return tuple(int(p) for p in parts)
        if key in _BOOL_KEYS:
            low = value.lower()
            if low in _TRUE_WORDS:
                return True
            if low in _FALSE_WORDS:
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return value
    except ValueError as exc:
        raise ValueError(f"{where}: bad value for {key}: {exc}") from exc


def config_from_file(path: str, **overrides) -> SweepConfig:
    """Build a SweepConfig from a file plus explicit overrides."""
    values = load_config(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig(**values)


@dataclass(frozen=True)
class SweepRow:
    """One grid point at one hierarchy level, ready for serialization."""

    n: int
    k: int
    l: int
    xi: float
    nu_minus: float
    ineq7: float
    ineq8: float
    lemma1: float
    det_c: float
    nz: float | None
    verdict: str
    truncation_flag: str
    pop_pump: float
    pop_a: float
    pop_b: float


@dataclass(frozen=True)
class SweepResult:
    """Rows plus the evolved states they were computed from."""

    config: SweepConfig
    xi_grid: tuple
    rows: tuple
    states: tuple

    @property
    def clean(self) -> bool:
        return all(row.truncation_flag == "ok" for row in self.rows)


def _initial_state(config: SweepConfig, layout: ModeLayout) -> QuantumState:
    pump = coherent_state(config.alpha_p, layout.dims[layout.pump],
                          allow_truncation=True)
    ground_a = np.zeros(layout.dims[layout.mode_a], dtype=complex)
    ground_a[0] = 1.0
    ground_b = np.zeros(layout.dims[layout.mode_b], dtype=complex)
    ground_b[0] = 1.0
    return product_state(layout, pump, ground_a, ground_b)


def run_sweep(config: SweepConfig, keep_states: bool = True) -> SweepResult:
    """Evolve from vacuum signal/idler and evaluate every criterion.

    The evolution runs once; criteria evaluations across (grid point,
    hierarchy level) pairs are independent and run on a thread pool when
    config.workers > 0, with results assembled in deterministic order.
    """
    layout = ModeLayout(tuple(config.dims))
    spec = InteractionSpec(layout, config.k, config.l, config.kappa)
    hamiltonian = build_hamiltonian(spec)
    grid = config.xi_grid()
    evo = EvolutionConfig(
        xi_grid=grid,
        kappa=config.kappa,
        alpha_p=config.alpha_p,
        tol=config.tol,
    )
    states = evolve(_initial_state(config, layout), hamiltonian, evo)

    flags = []
    pops = []
    nz_values = []
    for state in states:
        breached = any("truncation guard" in note for note in state.notes)
        flags.append("breach" if breached else "ok")
        pop = top_level_population(state)
        pops.append((pop[layout.pump], pop[layout.mode_a], pop[layout.mode_b]))
        nz_values.append(nha_zubairy(state) if config.with_nz else None)

    tasks = [(i, n) for i in range(len(states)) for n in config.hierarchy]

    def evaluate(task):
        i, n = task
        return evaluate_criteria(states[i], n, config.k, config.l)

    if config.workers > 0:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(evaluate, tasks))
    else:
        reports = [evaluate(task) for task in tasks]

    rows = []
    smallest_n = min(config.hierarchy)
    for (i, n), rep in zip(tasks, reports):
        rows.append(SweepRow(
            n=n,
            k=config.k,
            l=config.l,
            xi=grid[i],
            nu_minus=rep.nu_minus,
            ineq7=rep.ineq7_margin,
            ineq8=rep.ineq8_margin,
            lemma1=rep.lemma1_value,
            det_c=rep.det_c,
            nz=nz_values[i] if n == smallest_n else None,
            verdict=rep.verdict,
            truncation_flag=flags[i],
            pop_pump=pops[i][0],
            pop_a=pops[i][1],
            pop_b=pops[i][2],
        ))
    return SweepResult(
        config=config,
        xi_grid=tuple(grid),
        rows=tuple(rows),
        states=tuple(states) if keep_states else (),
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(result: SweepResult, path: str) -> None:
    """Serialize sweep rows with a parameter header, atomically."""
    cfg = result.config
    lines = [
        "# higher-order covariance sweep",
        "# k={} l={} alpha_p={} kappa={} dims={} xi_step={} xi_max={} "
        "hierarchy={} tol={}".format(
            cfg.k, cfg.l, _fmt(cfg.alpha_p), _fmt(cfg.kappa),
            ",".join(str(d) for d in cfg.dims), _fmt(cfg.xi_step),
            _fmt(cfg.xi_max), ",".join(str(n) for n in cfg.hierarchy),
            _fmt(cfg.tol),
        ),
        _CSV_COLUMNS,
    ]
    for row in result.rows:
        lines.append(",".join([
            str(row.n), str(row.k), str(row.l), _fmt(row.xi),
            _fmt(row.nu_minus), _fmt(row.ineq7), _fmt(row.ineq8),
            _fmt(row.lemma1), _fmt(row.det_c), _fmt(row.nz),
            row.verdict, row.truncation_flag,
            _fmt(row.pop_pump), _fmt(row.pop_a), _fmt(row.pop_b),
        ]))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> list[SweepRow]:
    """Load rows written by write_csv (header lines are skipped)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("n,"):
                continue
            parts = line.split(",")
            if len(parts) != 15:
                raise ValueError(f"malformed sweep row: {line!r}")
            rows.append(SweepRow(
                n=int(parts[0]), k=int(parts[1]), l=int(parts[2]),
                xi=float(parts[3]), nu_minus=float(parts[4]),
                ineq7=float(parts[5]), ineq8=float(parts[6]),
                lemma1=float(parts[7]), det_c=float(parts[8]),
                nz=float(parts[9]) if parts[9] else None,
                verdict=parts[10], truncation_flag=parts[11],
                pop_pump=float(parts[12]), pop_a=float(parts[13]),
                pop_b=float(parts[14]),
            ))
    return rows


def emit_plot_data(rows, path: str, series: tuple = ("nu1", "nu2", "nu3")) -> None:
    """Extract xi-indexed series into a tab-separated file.

    Selectors: nu<n>, ineq7_<n>, ineq8_<n>, lemma1_<n>, detc_<n>, nz.
    Missing values render as 'nan' so column alignment survives.
    """
    by_xi: dict = {}
    for row in rows:
        by_xi.setdefault(row.xi, {})[row.n] = row

    def pick(point: dict, selector: str) -> float:
        sel = selector.lower()
        if sel == "nz":
            for row in point.values():
                if row.nz is not None:
                    return row.nz
            return float("nan")
        if sel.startswith("nu"):
            field, n_str = "nu_minus", sel[2:]
        else:
            field, _, n_str = sel.partition("_")
            field = {"ineq7": "ineq7", "ineq8": "ineq8",
                     "lemma1": "lemma1", "detc": "det_c"}.get(field, "")
        if not field or not n_str.isdigit():
            raise ValueError(f"unknown series selector {selector!r}")
        row = point.get(int(n_str))
        return getattr(row, field) if row is not None else float("nan")

    lines = ["# xi\t" + "\t".join(series)]
    for xi in sorted(by_xi):
        values = [pick(by_xi[xi], sel) for sel in series]
        lines.append("\t".join([_fmt(xi)] + [
            _fmt(v) if v == v else "nan" for v in values
        ]))
    _atomic_write(path, "\n".join(lines) + "\n")


def convergence_check(config: SweepConfig, stride: int = 5,
                      dim_boost: tuple | None = None) -> dict:
    """Estimate the truncation error of the witness values.

    Re-runs a strided subsample of the xi grid with every mode truncation
    enlarged by config.convergence_step (or dim_boost) and reports the
    largest |drift| of nu_minus across grid points and hierarchy levels. The
    evolution itself integrates each grid interval to the configured
    tolerance, so enlarging the truncation is the remaining error axis.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    boost = config.convergence_step if dim_boost is None else dim_boost
    subgrid = config.xi_grid()[::stride]
    sub_max = subgrid[-1]
    base_cfg = replace(config, with_nz=False,
                       xi_step=config.xi_step * stride, xi_max=sub_max)
    boosted_cfg = replace(
        base_cfg,
        dims=tuple(d + b for d, b in zip(config.dims, boost)),
    )
    base = run_sweep(base_cfg, keep_states=False)
    boosted = run_sweep(boosted_cfg, keep_states=False)

    boost_map = {(round(r.xi / base_cfg.xi_step), r.n): r.nu_minus
                 for r in boosted.rows}
    points = []
    max_drift = 0.0
    for row in base.rows:
        key = (round(row.xi / base_cfg.xi_step), row.n)
        if key not in boost_map:
            continue
        drift = abs(row.nu_minus - boost_map[key])
        points.append({"xi": row.xi, "n": row.n, "drift": drift})
        max_drift = max(max_drift, drift)
    threshold = 1e-4
    return {
        "max_drift": max_drift,
        "threshold": threshold,
        "pass": bool(max_drift < threshold),
        "points": points,
        "base_dims": tuple(config.dims),
        "boosted_dims": boosted_cfg.dims,
    }
