"""Variance sweeps toward the feedback threshold and critical-exponent fits.

Near threshold <X^2> is modelled as A / |1 - G/G_crit|**alpha + B. The fit
works on log(variance) so the divergent end and the flat end of a sweep carry
comparable weight.
"""
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union
import math

import numpy as np
from scipy import optimize

from .errors import NoThresholdError, NumericalError, ParameterError
from .kernels import FeedbackKernel, PowerLawKernel
from .model import ModelParams
from .spectral import QuadOptions, critical_gain, variance_estimate

ALPHA_STARTS = (0.2, 0.5, 0.8, 1.1, 1.5)
ALPHA_WINDOW = (0.0, 3.0)


@dataclass
class SweepPoint:
    ratio: float
    G: float
    variance: float
    ok: bool = True
    message: str = ""

    def __iter__(self):
        # unpacks as (ratio, variance)
        return iter((self.ratio, self.variance))


@dataclass
class ExponentFit:
    alpha: float
    A: float
    B: float
    residual: float
    g_points: np.ndarray
    converged: bool
    starts: int = 0
    message: str = ""

    def predict(self, ratios: Sequence[float]) -> np.ndarray:
        return model_variance(np.asarray(ratios, dtype=float), self.A, self.B, self.alpha)

    def to_dict(self) -> Dict[str, object]:
        return {"alpha": self.alpha, "A": self.A, "B": self.B, "residual": self.residual,
                "converged": self.converged, "n_points": int(len(self.g_points)),
                "ratio_min": float(np.min(self.g_points)), "ratio_max": float(np.max(self.g_points))}


@dataclass(frozen=True)
class FitOptions:
    alpha_starts: Tuple[float, ...] = ALPHA_STARTS
    min_points: int = 8
    xatol: float = 1e-10
    fatol: float = 1e-14
    maxiter: int = 20000


def model_variance(ratio, A: float, B: float, alpha: float):
    return A / np.abs(1.0 - np.asarray(ratio, dtype=float)) ** alpha + B


def default_ratio_grid(n: int = 30, lo: float = 5e-3, hi: float = 0.5) -> np.ndarray:
    """Ratios G/G_crit with 1 - ratio geometric in [lo, hi], ascending."""
    if not 0 < lo < hi < 1:
        raise ParameterError(f"need 0 < lo < hi < 1, got lo={lo}, hi={hi}")
    return 1.0 - np.geomspace(hi, lo, n)


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    ratios = np.asarray(grid, dtype=float)
    if ratios.ndim != 1 or len(ratios) == 0:
        raise ParameterError("ratio grid must be a non-empty sequence")
    if np.any(ratios <= 0) or np.any(ratios >= 1):
        raise ParameterError("ratios G/G_crit must lie in (0, 1)")
    if np.any(np.diff(ratios) <= 0):
        raise ParameterError("ratios must be strictly increasing")
    return ratios


def _variance_point(args) -> SweepPoint:
    params, kernel, ratio, G, quad_opts = args
    try:
        est = variance_estimate(params.with_gain(G), kernel, quad_opts)
    except NumericalError as e:
        return SweepPoint(ratio, G, float("nan"), ok=False, message=str(e))
    return SweepPoint(ratio, G, est.value, message="; ".join(est.warnings))


def sweep_variance(params: ModelParams, kernel: FeedbackKernel, grid: Sequence[float],
                   quad_opts: Optional[QuadOptions] = None,
                   executor: Optional[Executor] = None) -> List[SweepPoint]:
    """<X^2> at G = ratio * G_crit for each ratio; failed points are flagged, not raised."""
    ratios = _check_grid(grid)
    g_crit = critical_gain(params, kernel)
    if g_crit <= 0:
        raise NoThresholdError(f"system is ordered without feedback (G_crit = {g_crit:.6g})")
    jobs = [(params, kernel, float(r), float(r * g_crit), quad_opts) for r in ratios]
    mapper = executor.map if executor is not None else map
    return list(mapper(_variance_point, jobs))


def monotonicity_violations(values: Sequence[float]) -> List[int]:
    """Indices i with values[i] < values[i - 1]; NaN entries are skipped."""
    out = []
    last = None
    for i, v in enumerate(values):
        v = float(v)
        if math.isnan(v):
            continue
        if last is not None and v < last:
            out.append(i)
        last = v
    return out


def _as_arrays(data) -> Tuple[np.ndarray, np.ndarray]:
    pairs = [(float(r), float(v)) for r, v in (
        d for d in data if not isinstance(d, SweepPoint) or d.ok)]
    if not pairs:
        return np.empty(0), np.empty(0)
    ratios, variances = map(np.array, zip(*pairs))
    return ratios, variances


def _initial_amplitudes(ratios: np.ndarray, variances: np.ndarray, alpha: float) -> Tuple[float, float]:
    """Linear least squares for (A, B) at fixed alpha, clipped to A > 0, B >= 0."""
    basis = np.column_stack([np.abs(1 - ratios) ** -alpha, np.ones_like(ratios)])
    (A, B), *_ = np.linalg.lstsq(basis, variances, rcond=None)
    if A <= 0:
        A = float(np.min(variances) * np.min(np.abs(1 - ratios)) ** alpha)
    return float(A), float(max(B, 0.0))


def fit_exponent(data: Sequence[Union[SweepPoint, Tuple[float, float]]],
                 fit_opts: Optional[FitOptions] = None) -> ExponentFit:
    """Least-squares fit of log(A/|1 - r|**alpha + B) to log(variance).

    Multi-start bounded Nelder-Mead over (log A, B / min(variance), alpha),
    polished by a trust-region least-squares solve from the best start.
    """
    opts = fit_opts or FitOptions()
    ratios, variances = _as_arrays(data)
    if len(ratios) < opts.min_points:
        raise ParameterError(f"exponent fit needs >= {opts.min_points} points, got {len(ratios)}")
    if np.any(ratios <= 0) or np.any(ratios >= 1):
        raise ParameterError("ratios must lie in (0, 1)")
    if np.any(variances <= 0) or not np.all(np.isfinite(variances)):
        raise ParameterError("variances must be finite and positive")

    scale = float(np.min(variances))
    log_v = np.log(variances)
    one_minus = np.abs(1 - ratios)

    def residuals(z: np.ndarray) -> np.ndarray:
        log_a, b, alpha = z
        model = np.exp(log_a) * one_minus ** -alpha + b * scale
        return np.log(model) - log_v

    def objective(z: np.ndarray) -> float:
        r = residuals(z)
        return float(r @ r) if np.all(np.isfinite(r)) else np.inf

    bounds = [(None, None), (0.0, None), (1e-9, None)]
    best = None
    for alpha0 in opts.alpha_starts:
        A0, B0 = _initial_amplitudes(ratios, variances, alpha0)
        z0 = np.array([math.log(A0), B0 / scale, alpha0])
        res = optimize.minimize(objective, z0, method="Nelder-Mead", bounds=bounds,
                                options={"xatol": opts.xatol, "fatol": opts.fatol,
                                         "maxiter": opts.maxiter, "adaptive": True})
        if best is None or res.fun < best.fun:
            best = res

    z = best.x
    notes = []
    try:
        polished = optimize.least_squares(residuals, z, bounds=([-np.inf, 0.0, 1e-9], np.inf),
                                          xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if objective(polished.x) <= best.fun:
            z = polished.x
    except ValueError as e:
        notes.append(f"least-squares polish skipped: {e}")

    log_a, b, alpha = (float(v) for v in z)
    rms = math.sqrt(objective(z) / len(ratios))
    converged = bool(np.isfinite(rms) and ALPHA_WINDOW[0] < alpha < ALPHA_WINDOW[1])
    if not converged:
        notes.insert(0, f"alpha = {alpha:.4g} outside {ALPHA_WINDOW}")
    message = "; ".join(notes)
    return ExponentFit(alpha=alpha, A=math.exp(log_a), B=b * scale, residual=rms,
                       g_points=ratios, converged=converged,
                       starts=len(opts.alpha_starts), message=message)


def fit_window_sensitivity(data: Sequence[Union[SweepPoint, Tuple[float, float]]],
                           fit_opts: Optional[FitOptions] = None) -> Dict[str, float]:
    """alpha refitted without the quarter nearest to threshold and without the farthest quarter."""
    ratios, variances = _as_arrays(data)
    order = np.argsort(ratios)
    ratios, variances = ratios[order], variances[order]
    quarter = len(ratios) // 4
    full = fit_exponent(list(zip(ratios, variances)), fit_opts).alpha
    out = {"alpha_full": full}
    for key, sl in (("alpha_drop_near", slice(0, len(ratios) - quarter)),
                    ("alpha_drop_far", slice(quarter, None))):
        try:
            out[key] = fit_exponent(list(zip(ratios[sl], variances[sl])), fit_opts).alpha
        except ParameterError:
            out[key] = float("nan")
    finite = [v for v in out.values() if np.isfinite(v)]
    out["spread"] = float(max(finite) - min(finite))
    return out


@dataclass
class AlphaPoint:
    s: float
    fit: Optional[ExponentFit]
    points: List[SweepPoint] = field(default_factory=list)
    ok: bool = True
    message: str = ""

    def __iter__(self):
        return iter((self.s, self.fit))


def alpha_vs_s(params: ModelParams, s_grid: Sequence[float], grid: Optional[Sequence[float]] = None,
               fit_opts: Optional[FitOptions] = None, quad_opts: Optional[QuadOptions] = None,
               executor: Optional[Executor] = None, t0: float = 1.0) -> List[AlphaPoint]:
    """Sweep and fit for each exponent s of a power-law kernel with h0 = s."""
    if any(s <= 0 for s in s_grid):
        raise ParameterError("kernel exponents must be positive")
    ratios = default_ratio_grid() if grid is None else grid
    out = []
    for s in s_grid:
        kernel = PowerLawKernel(s=float(s), t0=t0, h0=float(s))
        try:
            points = sweep_variance(params, kernel, ratios, quad_opts, executor)
            fit = fit_exponent(points, fit_opts)
        except (NumericalError, ParameterError) as e:
            out.append(AlphaPoint(float(s), None, ok=False, message=str(e)))
            continue
        out.append(AlphaPoint(float(s), fit, points, ok=fit.converged, message=fit.message))
    return out
