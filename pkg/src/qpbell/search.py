"""Maximizing |<B>| over measurement settings and locating violation thresholds.

The optimizer is multi-start Nelder-Mead (scipy) with scrambled-Sobol
starting points, spread over several length scales.  By default the four displacements are searched over the
full complex plane (8 real parameters): for the single-photon state the
phases matter near the violation boundary, so the real-axis search
(``complex_settings=False``) is kept only as a faster option.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from qpbell import fock
from qpbell.bell import (
    BellContext,
    BellValue,
    MeasurementSettings,
    bell_coefficients,
    bell_value,
)
from qpbell.kernels import GenericFock, StateModel, w_marginal, w_pair

log = logging.getLogger(__name__)


class NoViolation(RuntimeError):
    """No violation of the local-realistic bound on the searched interval."""


@dataclass(frozen=True)
class SearchOptions:
    restarts: int = 32
    box: float = 1.0
    simplex_scale: float = 0.2
    fatol: float = 1e-10
    xatol: float = 1e-7
    max_evals: int = 20000
    complex_settings: bool = True
    verify_full: bool = False
    seed: int = 0
    scales: int = 4  # restarts cycle through start/simplex sizes 1, 1/2, ... 2^-(scales-1)

    @property
    def dim(self) -> int:
        return 8 if self.complex_settings else 4


@dataclass
class OptimizationResult:
    best: BellValue
    settings: MeasurementSettings
    restarts_used: int
    evaluations: int
    converged: bool
    full_gain: float | None = None  # improvement found by the 8-parameter pass

    @property
    def magnitude(self) -> float:
        return self.best.magnitude

    @property
    def violated(self) -> bool:
        return self.best.violated


@dataclass
class ThresholdResult:
    axis: str
    threshold: float
    bracket_lo: float
    bracket_hi: float
    tolerance: float
    magnitude_lo: float
    magnitude_hi: float
    settings_hi: MeasurementSettings | None = None
    steps: int = 0


@dataclass
class ScanCell:
    r: float | None
    s: float
    eta: float
    result: OptimizationResult | None
    error: str | None = None

    @property
    def converged(self) -> bool:
        return self.result is not None and self.result.converged


@dataclass
class ScanResult:
    r_grid: list
    s_grid: list
    eta_grid: list
    cells: list = field(default_factory=list)
    audit: list = field(default_factory=list)  # (index, warm magnitude, cold magnitude)

    @property
    def converged_fraction(self) -> float:
        return sum(c.converged for c in self.cells) / len(self.cells) if self.cells else 1.0


# -- objective ---------------------------------------------------------------


def _objective(state: StateModel, ctx: BellContext, complex_settings: bool):
    """x -> -|<B>|, with the coefficients hoisted out of the loop."""
    c_pair, c_marg, c0 = bell_coefficients(ctx.s, ctx.eta)
    sp = ctx.s_eff
    if isinstance(state, GenericFock):
        # oracle-backed: truncation failures far from the origin count as no violation
        def f(x):
            try:
                return -bell_value(state, MeasurementSettings.from_vector(x), ctx).magnitude
            except fock.InadequateCutoff:
                return 0.0

        return f

    def f(x):
        z = x[0::2] + 1j * x[1::2] if complex_settings else x.astype(complex)
        w = w_pair(state, z[[0, 0, 1, 1]], z[[2, 3, 2, 3]], sp)
        m = w_marginal(state, z[0], sp, "a") + w_marginal(state, z[2], sp, "b")
        return -abs(c_pair * (w[0] + w[1] + w[2] - w[3]) + c_marg * m + c0)

    return f


def start_points(opts: SearchOptions, dim: int | None = None) -> np.ndarray:
    dim = dim or opts.dim
    n = max(opts.restarts, 1)
    sobol = qmc.Sobol(dim, scramble=True, seed=opts.seed)
    u = sobol.random(2 ** math.ceil(math.log2(n)))[:n]
    return opts.box * (2.0 * u - 1.0)


def _nelder_mead(f, x0, opts: SearchOptions, scale: float = 1.0):
    simplex = np.vstack([x0, x0 + scale * opts.simplex_scale * np.eye(len(x0))])
    return minimize(
        f, x0, method="Nelder-Mead",
        options=dict(initial_simplex=simplex, fatol=opts.fatol, xatol=opts.xatol,
                     maxfev=opts.max_evals, adaptive=len(x0) > 4),
    )


def maximize_bell(state: StateModel, ctx: BellContext, opts: SearchOptions = SearchOptions(),
                  warm_start: MeasurementSettings | None = None) -> OptimizationResult:
    """Best |<B>| over settings from ``opts.restarts`` simplex runs.

    A ``warm_start`` is tried first, in addition to the quasi-random
    starts.  The result is deterministic for fixed options.
    """
    f = _objective(state, ctx, opts.complex_settings)
    # optima shrink with squeezing, so restarts alternate between length scales
    levels = max(opts.scales, 1)
    starts = [(x * 0.5 ** (i % levels), 0.5 ** (i % levels)) for i, x in enumerate(start_points(opts))]
    if warm_start is not None:
        starts.insert(0, (warm_start.to_vector(opts.complex_settings), 1.0))
    best, evals, converged = None, 0, False
    for x0, scale in starts:
        res = _nelder_mead(f, np.asarray(x0, dtype=float), opts, scale)
        evals += res.nfev
        converged |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    settings = MeasurementSettings.from_vector(best.x)
    value = bell_value(state, settings, ctx)
    full_gain = None
    if opts.verify_full and not opts.complex_settings:
        full = _nelder_mead(_objective(state, ctx, True), settings.to_vector(True), opts)
        evals += full.nfev
        full_gain = max(0.0, -full.fun - value.magnitude)
        if full_gain > 0:
            settings = MeasurementSettings.from_vector(full.x)
            value = bell_value(state, settings, ctx)
    return OptimizationResult(value, settings, len(starts), evals, converged, full_gain)


# -- thresholds --------------------------------------------------------------


def _bisect(axis, evaluate, lo, hi, tol, hi_result, lo_result):
    steps = 0
    while hi - lo > 2.0 * tol:
        mid = 0.5 * (lo + hi)
        res = evaluate(mid, hi_result.settings)
        steps += 1
        log.debug("%s=%.6f -> |B|=%.9f", axis, mid, res.magnitude)
        if res.violated:
            hi, hi_result = mid, res
        else:
            lo, lo_result = mid, res
    return ThresholdResult(axis, 0.5 * (lo + hi), lo, hi, tol, lo_result.magnitude,
                           hi_result.magnitude, hi_result.settings, steps)


def min_eta_threshold(state: StateModel, s: float, tol: float = 1e-3,
                      opts: SearchOptions = SearchOptions(), eta_floor: float = 1e-3) -> ThresholdResult:
    """Smallest efficiency at which the optimized Bell value still exceeds 2.

    The predicate is checked at both bracket ends rather than assumed
    monotone: eta = 1 must violate, and the lower end is walked down until
    it does not.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def evaluate(eta, warm=None):
        return maximize_bell(state, BellContext(s, eta), opts, warm)

    hi, hi_res = 1.0, evaluate(1.0)
    if not hi_res.violated:
        raise NoViolation(f"no violation at eta=1 for s={s} (|B|max={hi_res.magnitude:.6f})")
    lo = 0.5
    while True:
        lo_res = evaluate(lo, hi_res.settings)
        if not lo_res.violated:
            break
        hi, hi_res = lo, lo_res
        if lo <= eta_floor:
            raise NoViolation(f"violation persists down to eta={lo}")
        lo = max(0.5 * lo, eta_floor)
    return _bisect("eta", evaluate, lo, hi, tol, hi_res, lo_res)


def min_s_threshold(state: StateModel, eta: float, tol: float = 1e-3,
                    opts: SearchOptions = SearchOptions(), s_floor: float = -20.0) -> ThresholdResult:
    """Most negative s at which the optimized Bell value still exceeds 2.

    The upper end starts at the Q-function test (s = -1), falling back to
    s = 0 and s = -0.5; the lower end is stepped down by 0.25 until the
    violation disappears.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def evaluate(s, warm=None):
        return maximize_bell(state, BellContext(s, eta), opts, warm)

    hi_res = None
    for hi in (-1.0, 0.0, -0.5):
        hi_res = evaluate(hi)
        if hi_res.violated:
            break
    else:
        raise NoViolation(f"no violation at s in (-1, 0, -0.5) for eta={eta}")
    lo = hi - 0.25
    while True:
        lo_res = evaluate(lo, hi_res.settings)
        if not lo_res.violated:
            break
        hi, hi_res = lo, lo_res
        if lo <= s_floor:
            raise NoViolation(f"violation persists down to s={lo}")
        lo = max(lo - 0.25, s_floor)
    return _bisect("s", evaluate, lo, hi, tol, hi_res, lo_res)


# -- grid scans --------------------------------------------------------------


def _scan_row(args):
    """One s-row of a scan, warm-started along eta.  A self-contained work item."""
    state, r, s, eta_grid, opts = args
    cells, warm = [], None
    for eta in eta_grid:
        try:
            res = maximize_bell(state, BellContext(s, eta), opts, warm)
            cells.append(ScanCell(r, s, eta, res))
            warm = res.settings
        except (fock.InadequateCutoff, ArithmeticError, ValueError) as exc:
            cells.append(ScanCell(r, s, eta, None, f"{type(exc).__name__}: {exc}"))
    return cells


def scan_grid(state: StateModel, s_grid, eta_grid, opts: SearchOptions = SearchOptions(),
              jobs: int = 1, audit_fraction: float = 0.0, r: float | None = None,
              state_for_r=None, r_grid=None) -> ScanResult:
    """Optimized Bell magnitude on an (r,) s x eta grid, rows in (r, s, eta) order.

    ``state_for_r`` with ``r_grid`` scans a family of states (one per r);
    otherwise ``state`` is used for every cell.  Rows along eta reuse the
    previous cell's optimum as an extra start; ``audit_fraction`` of cells
    are re-run cold and recorded in ``ScanResult.audit``.
    """
    s_grid, eta_grid = [float(v) for v in s_grid], [float(v) for v in eta_grid]
    if not s_grid or not eta_grid:
        raise ValueError("grids must be non-empty")
    if r_grid is None:
        family = [(r, state)]
    else:
        family = [(float(rv), state_for_r(rv)) for rv in r_grid]
    work = [(st, rv, s, eta_grid, opts) for rv, st in family for s in s_grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_row, work))
    else:
        rows = [_scan_row(w) for w in work]
    out = ScanResult([rv for rv, _ in family] if r_grid is not None else [], s_grid, eta_grid,
                     [c for row in rows for c in row])
    if audit_fraction > 0 and out.cells:
        n_audit = max(1, round(audit_fraction * len(out.cells)))
        idx = np.unique(np.linspace(0, len(out.cells) - 1, n_audit).round().astype(int))
        states = {rv: st for rv, st in family}
        for i in idx:
            cell = out.cells[i]
            if cell.result is None:
                continue
            cold = maximize_bell(states[cell.r], BellContext(cell.s, cell.eta), opts)
            out.audit.append((int(i), cell.result.magnitude, cold.magnitude))
    return out


def audit_mismatches(scan: ScanResult, tol: float = 1e-6):
    return [a for a in scan.audit if abs(a[1] - a[2]) > tol]
