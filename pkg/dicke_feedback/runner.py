"""Experiment runner: config in, CSV/JSON/SVG artifacts and a manifest out."""
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional
import math
import time

import numpy as np
from scipy import optimize

from . import __version__
from .config import ExperimentConfig, ExperimentKind
from .criticality import (alpha_vs_s, default_ratio_grid, fit_exponent, fit_window_sensitivity,
                          monotonicity_violations, sweep_variance)
from .errors import ConfigError, DickeFeedbackError, NoThresholdError, NumericalError
from .hilbert import MatterKind
from .kernels import FeedbackKernel, InstantaneousKernel, PowerLawKernel, TransformMethod
from .logger import RunLogger
from .meanfield import ThresholdScanOptions, bifurcation_scan, meanfield_threshold
from .model import ModelParams
from .plotting import plot_band, plot_curves, plot_points, plot_sweep
from .spectral import (QuadOptions, SpectrumLabel, critical_coupling, critical_gain,
                       peak_frequency, sample_spectrum)
from .storage import ArtifactStore
from .trajectories import (Scheme, TrajectoryConfig, estimate_growth_rate, run_ensemble,
                           run_trajectory, tail_slice)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

COMPONENT = "runner"


@dataclass
class RunResult:
    exit_code: int
    out_dir: Optional[Path]
    run_id: str
    error: Optional[str] = None
    statuses: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def manifest(self) -> Optional[Path]:
        return None if self.out_dir is None else self.out_dir / "manifest.json"


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for the index-th parameter combination."""
    state = np.random.SeedSequence(seed, spawn_key=(1 << 20, index)).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _trajectory_job(args):
    config, index = args
    return index, run_trajectory(config, 0)


def _tag(**values) -> str:
    parts = [f"{k}{v:g}" for k, v in values.items() if v is not None]
    return "_".join(parts) if parts else "base"


def _or_nan(value: Optional[float]) -> float:
    return float("nan") if value is None else float(value)


def _check_kind(config: ExperimentConfig) -> None:
    """Requirements that depend on the experiment kind, checked before any output is written."""
    cfg = config.config
    kind = config.kind
    problems = []
    needs_kernel = (ExperimentKind.VARIANCE_SWEEP, ExperimentKind.EXPONENT, ExperimentKind.MEANFIELD_SCAN)
    if kind in needs_kernel and cfg["kernel"] is None:
        problems.append(f"kind '{kind.value}' needs a feedback kernel")
    if kind is ExperimentKind.EXPONENT and "s" not in cfg["grids"]:
        problems.append("kind 'exponent' needs grids.s")
    labels = cfg["numerics"].get("labels", [])
    known = {label.value for label in SpectrumLabel}
    problems += [f"numerics.labels: unknown spectrum '{v}'" for v in labels if v not in known]
    if problems:
        raise ConfigError(problems)


class ExperimentRunner:
    """Runs one validated configuration.

    Args:
        config: the experiment configuration
        out_dir: overrides ``output_dir`` of the configuration
        seed: overrides ``seed``
        threads: worker processes for the parallel axis (1 runs inline)
        quiet: no console output
    """

    check = staticmethod(_check_kind)

    def __init__(self, config: ExperimentConfig, out_dir: Optional[str] = None,
                 seed: Optional[int] = None, threads: int = 1, quiet: bool = False):
        overrides = {}
        if out_dir is not None:
            overrides["output_dir"] = str(out_dir)
        if seed is not None:
            overrides["seed"] = int(seed)
        if overrides:
            config.update_config(overrides)
        config.validate_config()
        _check_kind(config)
        if threads < 1:
            raise ConfigError(f"threads must be >= 1, got {threads}")
        self.config = config
        self.threads = threads
        self.quiet = quiet
        self.run_id = config.fingerprint()
        cfg = config.config
        self.out_dir = Path(cfg["output_dir"]) / f"{cfg['name']}-{self.run_id[:12]}"
        self.statuses: List[Dict[str, Any]] = []
        self.store: Optional[ArtifactStore] = None
        self.logger: Optional[RunLogger] = None
        self.executor: Optional[Executor] = None

        self._handlers = {
            ExperimentKind.SPECTRUM: self._spectrum,
            ExperimentKind.VARIANCE_SWEEP: self._variance_sweep,
            ExperimentKind.EXPONENT: self._exponent,
            ExperimentKind.GCRIT_SCAN: self._gcrit_scan,
            ExperimentKind.TRAJECTORY: self._trajectory,
            ExperimentKind.ENSEMBLE: self._ensemble,
            ExperimentKind.MEANFIELD_SCAN: self._meanfield_scan,
        }

    # -- shared helpers -------------------------------------------------

    @property
    def params(self) -> ModelParams:
        return self.config.params

    @property
    def numerics(self) -> Dict[str, Any]:
        return self.config.numerics

    def _kernel(self) -> FeedbackKernel:
        kernel = self.config.kernel
        return InstantaneousKernel(0.0) if kernel is None else kernel

    def _kernel_for_s(self, s: Optional[float]) -> FeedbackKernel:
        if s is None:
            return self._kernel()
        base = self.config.kernel
        t0 = base.t0 if isinstance(base, PowerLawKernel) else 1.0
        return PowerLawKernel(s=float(s), t0=t0, h0=float(s))

    def _require_kernel(self) -> FeedbackKernel:
        if self.config.kernel is None:
            raise ConfigError(f"kind '{self.config.kind.value}' needs a feedback kernel")
        return self.config.kernel

    def _quad_options(self) -> QuadOptions:
        n = self.numerics
        return QuadOptions(
            rel_tol=n.get("rel_tol", 1e-8),
            max_omega=n.get("max_omega", 20.0),
            scan_points=n.get("scan_points", 4096),
            method=TransformMethod(n.get("transform_method", "expint")),
        )

    def _metadata(self, **extra) -> Dict[str, Any]:
        meta = {"run_id": self.run_id, "kind": self.config.kind.value, "tool_version": __version__}
        meta.update(extra)
        return meta

    def _status(self, point: str, status: str, message: str = "", **values) -> None:
        self.statuses.append({"point": point, "status": status, "message": message, **values})

    async def _plot(self, name: str, make_figure) -> None:
        if not self.config.config["plots"]:
            return
        await self.store.write_svg(name, make_figure())

    def _combinations(self, *names: str):
        grids = [list(self.config.grid(n, [None])) for n in names]
        return list(product(*grids))

    # -- experiment kinds -----------------------------------------------

    async def _spectrum(self) -> None:
        log = self.logger
        grid = self.config.grid("omega", np.linspace(0.0, 3.0, 601))
        try:
            labels = [SpectrumLabel(v) for v in self.numerics.get("labels", ["VarianceIntegrand"])]
        except ValueError as e:
            raise ConfigError(f"numerics.labels: {e}") from e
        method = TransformMethod(self.numerics.get("transform_method", "expint"))

        peaks = {"kappa": [], "s": [], "g_ratio": [], "gain_ratio": [], "g": [], "G": [], "peak_omega": []}
        curves: Dict[tuple, Dict[str, np.ndarray]] = {}
        peak_groups: Dict[tuple, List[float]] = {}
        failures = 0
        for kappa, s, g_ratio, gain_ratio in self._combinations("kappa", "s", "g_ratios", "gain_ratios"):
            p = self.params
            if kappa is not None:
                p = replace(p, kappa=float(kappa))
            kernel = self._kernel_for_s(s)
            tag = _tag(kappa=kappa, s=s, gr=g_ratio, Gr=gain_ratio)
            try:
                if g_ratio is not None:
                    p = replace(p, g=float(g_ratio) * critical_coupling(p))
                if gain_ratio is not None:
                    p = p.with_gain(float(gain_ratio) * critical_gain(p, kernel))
                columns: Dict[str, np.ndarray] = {"omega": grid}
                for label in labels:
                    series = sample_spectrum(label, p, kernel, grid, method)
                    columns[label.value] = series.values
                peak = peak_frequency(p, kernel, omega_max=float(grid[-1]))
            except NumericalError as e:
                failures += 1
                self._status(tag, "failed", str(e))
                await log.error(COMPONENT, "spectrum", f"{tag}: {e}")
                continue
            await self.store.write_table(f"spectrum_{tag}", columns, self._metadata(
                params=p.to_dict(), kernel=kernel.to_dict()))
            for key, value in (("kappa", p.kappa), ("s", s), ("g_ratio", g_ratio),
                               ("gain_ratio", gain_ratio), ("g", p.g), ("G", p.G), ("peak_omega", peak)):
                peaks[key].append(_or_nan(value))
            ratio_label = g_ratio if g_ratio is not None else gain_ratio
            peak_groups.setdefault((kappa, s), []).append(peak)
            curves.setdefault((kappa, s), {})[f"ratio {_or_nan(ratio_label):g}"] = columns[labels[0].value]
            self._status(tag, "ok", peak_omega=peak)
            await log.info(COMPONENT, "spectrum", f"{tag}: peak at omega = {peak:.6g}")

        await self.store.write_table("peaks", peaks, self._metadata())
        for (kappa, s), series in peak_groups.items():
            # mode softening: the peak moves toward omega = 0 as the ratio grows
            if monotonicity_violations([-w for w in series]):
                await log.warn(COMPONENT, "spectrum", f"peak frequency not decreasing for {_tag(kappa=kappa, s=s)}")
        for (kappa, s), named in curves.items():
            await self._plot(f"spectrum_{_tag(kappa=kappa, s=s)}", lambda named=named: plot_curves(
                grid, named, "omega / omega_r", labels[0].value, logy=True))
        if failures:
            raise NumericalError(f"{failures} spectrum point(s) failed")

    async def _gcrit_scan(self) -> None:
        kappas = self.config.grid("kappa", np.geomspace(0.1, 100.0, 241))
        thetas = self.config.grid("theta", np.array([self.params.theta]))
        kernel = self._kernel()
        columns: Dict[str, np.ndarray] = {"kappa": kappas}
        summary = []
        for j, theta in enumerate(thetas):
            values = []
            for kappa in kappas:
                p = replace(self.params, kappa=float(kappa), theta=float(theta))
                try:
                    values.append(critical_gain(p, kernel))
                except NoThresholdError as e:
                    values.append(float("nan"))
                    self._status(f"theta{theta:g}_kappa{kappa:g}", "flagged", str(e))
            values = np.array(values)
            columns[f"G_crit_{j}"] = values
            summary.append({"theta": float(theta), "sign_changes": self._sign_changes(kappas, float(theta), kernel),
                            "G_crit_last": float(values[-1])})
            await self.logger.info(COMPONENT, "gcrit", f"theta = {theta:.6g}: G_crit(kappa_max) = {values[-1]:.6g}")
        await self.store.write_table("gcrit", columns, self._metadata(
            thetas=[float(t) for t in thetas], params=self.params.to_dict(), kernel=kernel.to_dict()))
        await self.store.write_json("gcrit_summary", summary)
        await self._plot("gcrit", lambda: plot_curves(
            kappas, {f"theta = {t:.4g}": columns[f"G_crit_{j}"] for j, t in enumerate(thetas)},
            "kappa / omega_r", "G_crit", logx=True))

    def _sign_changes(self, kappas: np.ndarray, theta: float, kernel: FeedbackKernel) -> List[float]:
        def gain(kappa: float) -> float:
            p = replace(self.params, kappa=kappa, theta=theta)
            return critical_gain(p, kernel)

        roots = []
        for a, b in zip(kappas[:-1], kappas[1:]):
            try:
                ga, gb = gain(float(a)), gain(float(b))
            except NoThresholdError:
                continue
            if ga == 0:
                roots.append(float(a))
            elif ga * gb < 0:
                roots.append(float(optimize.brentq(gain, float(a), float(b), xtol=1e-12)))
        return roots

    async def _variance_sweep(self) -> None:
        kernel = self._require_kernel()
        ratios = self.config.grid("ratios", default_ratio_grid())
        points = sweep_variance(self.params, kernel, ratios, self._quad_options(), self.executor)
        await self._write_sweep("sweep", points, self.params, kernel)
        usable = [pt for pt in points if pt.ok]
        if len(usable) < 8:
            raise NumericalError(f"only {len(usable)} sweep points succeeded; cannot fit")
        fit = fit_exponent(usable)
        sensitivity = fit_window_sensitivity(usable)
        await self.store.write_json("fit", {"fit": fit.to_dict(), "window_sensitivity": sensitivity})
        await self.logger.info(COMPONENT, "fit", f"alpha = {fit.alpha:.4f}",
                               converged=fit.converged, residual=fit.residual)
        await self._plot("sweep", lambda: plot_sweep(
            [pt.ratio for pt in usable], [pt.variance for pt in usable], fit.predict([pt.ratio for pt in usable])))

    async def _write_sweep(self, name: str, points, params: ModelParams, kernel: FeedbackKernel) -> None:
        await self.store.write_table(name, {
            "ratio": [pt.ratio for pt in points],
            "G": [pt.G for pt in points],
            "variance": [pt.variance for pt in points],
            "ok": [1.0 if pt.ok else 0.0 for pt in points],
        }, self._metadata(params=params.to_dict(), kernel=kernel.to_dict()))
        for pt in points:
            if not pt.ok:
                self._status(f"{name}_ratio{pt.ratio:.6g}", "flagged", pt.message)
                await self.logger.warn(COMPONENT, "sweep", f"ratio {pt.ratio:.6g}: {pt.message}")
        bad = monotonicity_violations([pt.variance for pt in points])
        if bad:
            await self.logger.warn(COMPONENT, "sweep", f"{name}: variance decreases at ratios "
                                   + ", ".join(f"{points[i].ratio:.4g}" for i in bad))

    async def _exponent(self) -> None:
        s_grid = self.config.grid("s")
        if s_grid is None:
            raise ConfigError("kind 'exponent' needs grids.s")
        ratios = self.config.grid("ratios", default_ratio_grid())
        base = self.config.kernel
        t0 = base.t0 if isinstance(base, PowerLawKernel) else 1.0
        results = alpha_vs_s(self.params, list(s_grid), ratios, quad_opts=self._quad_options(),
                             executor=self.executor, t0=t0)

        table = {"s": [], "alpha": [], "A": [], "B": [], "residual": [], "converged": []}
        details = []
        for res in results:
            tag = _tag(s=res.s)
            if res.points:
                await self._write_sweep(f"sweep_{tag}", res.points, self.params,
                                        PowerLawKernel(res.s, t0, res.s))
            if res.fit is None:
                self._status(tag, "failed", res.message)
                await self.logger.error(COMPONENT, "exponent", f"s = {res.s:g}: {res.message}")
                for key in ("alpha", "A", "B", "residual"):
                    table[key].append(float("nan"))
                table["s"].append(res.s)
                table["converged"].append(0.0)
                continue
            fit = res.fit
            sensitivity = fit_window_sensitivity([pt for pt in res.points if pt.ok])
            details.append({"s": res.s, "fit": fit.to_dict(), "window_sensitivity": sensitivity})
            for key, value in (("s", res.s), ("alpha", fit.alpha), ("A", fit.A), ("B", fit.B),
                               ("residual", fit.residual), ("converged", 1.0 if fit.converged else 0.0)):
                table[key].append(value)
            self._status(tag, "ok" if fit.converged else "flagged", fit.message, alpha=fit.alpha)
            await self.logger.info(COMPONENT, "exponent", f"s = {res.s:g}: alpha = {fit.alpha:.4f}",
                                   window_spread=sensitivity["spread"])
            await self._plot(f"sweep_{tag}", lambda res=res, fit=fit: plot_sweep(
                [pt.ratio for pt in res.points if pt.ok], [pt.variance for pt in res.points if pt.ok],
                fit.predict([pt.ratio for pt in res.points if pt.ok]), title=f"s = {res.s:g}"))

        await self.store.write_table("alpha", table, self._metadata(params=self.params.to_dict()))
        await self.store.write_json("fits", details)
        if monotonicity_violations(table["alpha"]):
            await self.logger.warn(COMPONENT, "exponent", "alpha is not increasing with s")
        await self._plot("alpha", lambda: plot_points(table["s"], table["alpha"], "s", "alpha"))
        if any(res.fit is None for res in results):
            raise NumericalError("exponent fit failed for at least one s")

    def _trajectory_config(self, p: ModelParams, kernel: FeedbackKernel, seed: int) -> TrajectoryConfig:
        n = self.numerics
        extra = {k: n[k] for k in ("dt", "total_time", "record_every", "memory_tol", "record_noise_scale",
                                   "initial_matter") if k in n}
        return TrajectoryConfig(
            params=p, kernel=kernel,
            matter_kind=MatterKind(n.get("matter_kind", "spin")),
            cavity_dim=n.get("cavity_dim", 20),
            matter_cutoff=n.get("matter_cutoff"),
            scheme=Scheme(n.get("scheme", "rouchon")),
            seed=seed, **extra)

    def _gain_combinations(self):
        """(tag, params, kernel, s, gain_ratio) for every s x gain-ratio combination."""
        out = []
        for s, gain_ratio in self._combinations("s", "gain_ratios"):
            kernel = self._kernel_for_s(s)
            p = self.params
            if gain_ratio is not None:
                p = p.with_gain(float(gain_ratio) * critical_gain(p, kernel))
            out.append((_tag(s=s, Gr=gain_ratio), p, kernel, s, gain_ratio))
        return out

    async def _trajectory(self) -> None:
        combos = self._gain_combinations()
        jobs = [(self._trajectory_config(p, k, derive_seed(self.config.seed, i)), i)
                for i, (_, p, k, _, _) in enumerate(combos)]
        mapper = self.executor.map if self.executor is not None else map
        outputs = dict(mapper(_trajectory_job, jobs))

        summary = {"s": [], "gain_ratio": [], "G": [], "growth_rate": [], "tail_mean_x": [],
                   "valid": [], "aborted": []}
        for i, (tag, p, kernel, s, gain_ratio) in enumerate(combos):
            out = outputs[i]
            await self.store.write_table(f"trajectory_{tag}", out.columns(), self._metadata(
                params=p.to_dict(), kernel=kernel.to_dict(), **out.summary()))
            growth = float("nan")
            if gain_ratio is not None and gain_ratio > 1:
                try:
                    growth = estimate_growth_rate(out.times, out.matter_x2) / 2
                except ValueError:
                    pass
            tail = tail_slice(out.times, self.numerics.get("tail_fraction", 0.5))
            for key, value in (("s", _or_nan(s)), ("gain_ratio", _or_nan(gain_ratio)), ("G", p.G),
                               ("growth_rate", growth), ("tail_mean_x", float(np.mean(out.matter_x[tail]))),
                               ("valid", 1.0 if out.valid else 0.0), ("aborted", 1.0 if out.aborted else 0.0)):
                summary[key].append(value)
            status = "ok" if out.valid and not out.aborted else "flagged"
            self._status(tag, status, out.error or "", growth_rate=growth)
            level = self.logger.info if status == "ok" else self.logger.warn
            await level(COMPONENT, "trajectory", f"{tag}: valid={out.valid} aborted={out.aborted}",
                        growth_rate=growth)
            await self._plot(f"trajectory_{tag}", lambda out=out: plot_curves(
                out.times, {"<X>": out.matter_x}, "t omega_r", "matter quadrature"))
        await self.store.write_table("trajectories", summary, self._metadata())

    async def _ensemble(self) -> None:
        n_traj = self.numerics.get("n_traj", 100)
        tail_fraction = self.numerics.get("tail_fraction", 0.5)
        rows: Dict[str, List[float]] = {}
        for i, (tag, p, kernel, s, gain_ratio) in enumerate(self._gain_combinations()):
            config = self._trajectory_config(p, kernel, derive_seed(self.config.seed, i))
            stats = run_ensemble(config, n_traj, self.executor, tail_fraction)
            await self.store.write_table(f"ensemble_{tag}", stats.columns(), self._metadata(
                params=p.to_dict(), kernel=kernel.to_dict(), n_traj=n_traj, seed=config.seed))
            signs = np.sign(stats.tail_signed_means)
            row = {"s": _or_nan(s), "gain_ratio": _or_nan(gain_ratio), "G": p.G, **stats.steady(),
                   "n_positive": float(np.sum(signs > 0)), "n_negative": float(np.sum(signs < 0))}
            for key, value in row.items():
                rows.setdefault(key, []).append(float(value))
            status = "ok" if stats.n_invalid == 0 and stats.n_aborted == 0 else "flagged"
            self._status(tag, status, f"{stats.n_invalid} invalid, {stats.n_aborted} aborted",
                         steady_abs_x=stats.steady_abs_x)
            await self.logger.info(COMPONENT, "ensemble", f"{tag}: steady |<X>| = {stats.steady_abs_x:.4g}"
                                   f" +- {stats.steady_abs_x_err:.2g}", n_invalid=stats.n_invalid)
            await self._plot(f"ensemble_{tag}", lambda stats=stats: plot_band(
                stats.times, stats.mean_abs_x, stats.std_abs_x / math.sqrt(max(stats.n_traj, 1)),
                "t omega_r", "|<X>|"))
        await self.store.write_table("ensemble_summary", rows, self._metadata())

    async def _meanfield_scan(self) -> None:
        kernel = self._require_kernel()
        n = self.numerics
        opts = ThresholdScanOptions(dt=n.get("dt", 0.02), total_time=n.get("total_time", 600.0),
                                    tail_fraction=n.get("tail_fraction", 0.25))
        g_crit = critical_gain(self.params, kernel)
        ratios = self.config.grid("gain_ratios", np.linspace(0.5, 4.0, 15))
        points = bifurcation_scan(self.params, kernel, [r * g_crit for r in ratios], opts, self.executor)
        await self.store.write_table("bifurcation", {
            "gain_ratio": ratios,
            "G": [pt.G for pt in points],
            "steady_abs_sx": [pt.steady_abs_sx for pt in points],
            "steady_photons": [pt.steady_photons for pt in points],
            "settled": [1.0 if pt.settled else 0.0 for pt in points],
            "ordered": [1.0 if pt.ordered else 0.0 for pt in points],
        }, self._metadata(params=self.params.to_dict(), kernel=kernel.to_dict(), G_crit=g_crit))
        for r, pt in zip(ratios, points):
            if not pt.settled:
                self._status(f"gain_ratio{r:g}", "flagged", "no steady state in the tail window")
                await self.logger.warn(COMPONENT, "meanfield", f"G/G_crit = {r:g}: not settled")
        await self._plot("bifurcation", lambda: plot_points(
            ratios, [pt.steady_abs_sx for pt in points], "G / G_crit", "steady |s_x|"))

        if n.get("threshold", False):
            result = meanfield_threshold(self.params, kernel, opts)
            await self.store.write_json("threshold", {
                "G": result.G, "lower": result.lower, "upper": result.upper,
                "evaluations": result.evaluations, "closed_form": result.closed_form,
                "relative_deviation": result.relative_deviation})
            await self.logger.info(COMPONENT, "meanfield", f"threshold G = {result.G:.6g}"
                                   f" (closed form {g_crit:.6g})", relative_deviation=result.relative_deviation)

    # -- driver -----------------------------------------------------------

    async def run(self) -> RunResult:
        started = time.perf_counter()
        try:
            self.store = ArtifactStore(self.out_dir)
        except OSError as e:
            return RunResult(EXIT_IO, None, self.run_id, f"cannot create {self.out_dir}: {e}")
        self.logger = RunLogger(self.config.config["name"], self.store, quiet=self.quiet)
        await self.logger.info(COMPONENT, "start", f"{self.config.kind.value} run {self.run_id[:12]}",
                               out_dir=str(self.out_dir), threads=self.threads)

        exit_code, error = EXIT_OK, None
        if self.threads > 1:
            self.executor = ProcessPoolExecutor(max_workers=self.threads)
        computing = time.perf_counter()
        try:
            await self._handlers[self.config.kind]()
        except ConfigError as e:
            exit_code, error = EXIT_CONFIG, str(e)
        except NumericalError as e:
            exit_code, error = EXIT_NUMERICAL, str(e)
        except OSError as e:
            exit_code, error = EXIT_IO, str(e)
        except DickeFeedbackError as e:
            exit_code, error = e.exit_code, str(e)
        finally:
            if self.executor is not None:
                self.executor.shutdown()
                self.executor = None
        await self.logger.metrics.record_timing(self.config.kind.value, time.perf_counter() - computing)
        if error:
            await self.logger.error(COMPONENT, "failed", error, exit_code=exit_code)

        wall = time.perf_counter() - started
        await self.logger.info(COMPONENT, "done", f"finished in {wall:.2f} s", exit_code=exit_code)
        metrics = await self.logger.close()
        try:
            await self.store.write_manifest({
                "run_id": self.run_id,
                "tool_version": __version__,
                "config": self.config.to_dict(),
                "wall_time_seconds": wall,
                "exit_code": exit_code,
                "status": "ok" if exit_code == EXIT_OK else ("partial" if exit_code == EXIT_NUMERICAL else "failed"),
                "error": error,
                "points": self.statuses,
                "metrics": metrics,
            })
        except OSError as e:
            exit_code, error = EXIT_IO, str(e)
        return RunResult(exit_code, self.out_dir, self.run_id, error, self.statuses)
