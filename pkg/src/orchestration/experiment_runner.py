"""
Experiment runner: config parsing, sub-experiment execution and output bundles.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
import orjson
from loguru import logger
from pydantic import Field, ValidationError

from src.core.config import settings
from src.core.exceptions import ConfigurationError, InsufficientDataError
from src.core.models import ConfigModel, ForestConfig, SimDesign, SplitCriterion, VerdictKind
from src.cooccur.cooccurrence import cooccur_rows, decay_fit, estimate_m
from src.inference.ensemble import fit_forest
from src.inference.hajek import hajek_variance
from src.monitoring.metrics import metrics_collector
from src.orchestration.output_bundle import OutputBundle
from src.simulation.coverage import coverage_table
from src.simulation.design import MixtureDesignSampler, sample_design, truth
from src.simulation.sweep import correlation_sweep, heuristic_compare, log_linearity
from src.stability.coupling import coupled_split_tv, coupling_rows, stability_classify
from src.stability.rules import UniformNodeSampler, build_rule

ExperimentName = Literal["simulate", "sweep", "coverage", "stability", "cooccur"]

Point = Tuple[float, ...]

CURVE_HEADER = ("distance", "correlation", "count", "stderr")
COVERAGE_HEADER = ("contrast", "mode", "level", "coverage", "trials")
STABILITY_HEADER = ("rule", "m", "reps", "disagree", "tv_hat", "tv_hist", "depth")
COOCCUR_HEADER = ("s", "delta", "l1_distance", "m_hat", "stderr", "conditional")


class ExperimentConfig(ConfigModel):
    """Flat experiment configuration; unknown keys are rejected."""
    experiments: Tuple[ExperimentName, ...] = ("sweep",)
    seed: Optional[int] = Field(default=None, ge=0)

    # Design and forest
    n: int = Field(default=10000, ge=1)
    s: int = Field(default=500, ge=1)
    trees: int = Field(default_factory=lambda: settings.default_trees, ge=1)
    delta: float = Field(default_factory=lambda: settings.default_delta, ge=0.0, le=1.0)
    alpha: float = Field(default_factory=lambda: settings.default_alpha, gt=0.0, lt=0.5)
    k: int = Field(default_factory=lambda: settings.default_k, ge=1)
    grid_g: int = Field(default_factory=lambda: settings.default_grid, ge=2)
    noise_scale: float = Field(default=0.2, gt=0.0)
    criterion: SplitCriterion = SplitCriterion.CENTROID
    query_points: Tuple[Point, ...] = ((0.5, 0.5),)

    # Sweep
    sizes: Tuple[Tuple[int, int], ...] = ()
    references: Optional[Tuple[Point, ...]] = None
    bucket_width: float = Field(default_factory=lambda: settings.bucket_width, gt=0.0)
    eps: float = Field(default=0.0, ge=0.0)
    log_distance: float = Field(default=0.4, gt=0.0)

    # Coverage
    contrasts: Tuple[Tuple[Point, Point], ...] = (
        ((0.2, 0.2), (0.8, 0.8)),
        ((0.25, 0.75), (0.75, 0.25)),
        ((0.5, 0.5), (0.5, 0.5)),
    )
    level: float = Field(default=0.95, gt=0.0, lt=1.0)
    coverage_trials: int = Field(default=200, ge=100)
    n_anchors: int = Field(default=200, ge=2)
    mc_r: int = Field(default=20, ge=2)
    include_mc: bool = False

    # Stability
    rules: Tuple[str, ...] = ("separated-mean", "argmax-first")
    node_sizes: Tuple[int, ...] = (50, 100, 200, 400, 800)
    stability_reps: int = Field(default=20000, ge=1)
    x1: Point = (0.9, 0.1)
    depth: int = Field(default=1, ge=1, le=2)

    # Co-occurrence
    cooccur_sizes: Tuple[int, ...] = (128, 256, 512, 1024, 2048)
    cooccur_delta: float = Field(default=0.6, ge=0.0, le=1.0)
    cooccur_trees: int = Field(default=2000, ge=1)
    x: Point = (0.25, 0.5)
    x_bar: Point = (0.75, 0.5)
    conditional: bool = False

    def design(self, **changes: Any) -> SimDesign:
        """Simulation design of this config."""
        values = dict(
            noise_scale=self.noise_scale, n=self.n, s=self.s, trees=self.trees,
            delta=self.delta, alpha=self.alpha, k=self.k, grid_g=self.grid_g,
            query_points=self.query_points, seed=self.seed or 0, criterion=self.criterion,
        )
        values.update(changes)
        return SimDesign.build(**values)


def _line_of(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def load_config(path: Optional[Path], **overrides: Any) -> ExperimentConfig:
    """
    Parse a flat JSON config and apply CLI overrides.

    Raises:
        ConfigurationError: with the offending line when it can be located
    """
    text = ""
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        try:
            raw = orjson.loads(text)
        except orjson.JSONDecodeError as e:
            raise ConfigurationError(f"invalid JSON: {e.msg}", line=e.lineno) from e
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object", line=1)

    values = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        err = e.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else ""
        location = ".".join(str(p) for p in err["loc"])
        raise ConfigurationError(f"{location}: {err['msg']}", line=_line_of(text, key) if key else None) from e


@dataclass
class RunReport:
    """Outcome of one run."""
    outputs: List[Path] = field(default_factory=list)
    errors: Dict[str, str] = field(default_factory=dict)
    summaries: Dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 1 if self.errors else 0


def _curve_rows(curve) -> list:
    return [[r.distance, r.correlation, r.count, r.stderr] for r in curve.rows]


def run_simulate(config: ExperimentConfig, bundle: OutputBundle) -> Dict[str, Any]:
    """Fit the design's forest at its query points and estimate the Hajek variance there."""
    design = config.design()
    cfg = design.forest_config()
    est = fit_forest(sample_design(design), design.query_points, cfg)
    sd = np.sqrt(np.diag(est.cov))
    target = truth(est.points)
    rows = [
        [*point, estimate, t, spread]
        for point, estimate, t, spread in zip(est.points.tolist(), est.estimates, target, sd)
    ]
    header = [f"x{i + 1}" for i in range(est.points.shape[1])] + ["estimate", "truth", "tree_sd"]
    bundle.write_csv("estimates.csv", header, rows)
    bundle.write_json("estimate.json", est.model_dump(mode="json"))

    variance = hajek_variance(MixtureDesignSampler(design), est.points, cfg, config.n_anchors, config.mc_r)
    bundle.write_json("hajek.json", variance.model_dump(mode="json"))

    summary: Dict[str, Any] = {
        "status": est.status.value,
        "max_abs_error": float(np.max(np.abs(est.estimates - target))),
        "hajek_variance": np.diag(variance.v_hat_debiased).tolist(),
    }
    if est.q > 1:
        off_diagonal = est.correlation()[~np.eye(est.q, dtype=bool)]
        finite = off_diagonal[np.isfinite(off_diagonal)]
        summary["max_abs_tree_correlation"] = float(np.max(np.abs(finite))) if finite.size else None
    return summary


def run_sweep(config: ExperimentConfig, bundle: OutputBundle) -> Dict[str, Any]:
    """Correlation curve, heuristic comparison and optional extra (n, s) curves."""
    design = config.design()
    curve = correlation_sweep(design, config.references, bucket_width=config.bucket_width)
    bundle.write_csv("curve.csv", CURVE_HEADER, _curve_rows(curve))

    comparison = heuristic_compare(curve, design.s, 2, config.eps)
    bundle.write_csv(
        "heuristic.csv",
        ("distance", "observed", "linear_bound", "exponential_fit", "conservative"),
        [[r.distance, r.observed, r.linear_bound, r.exponential_fit, r.conservative] for r in comparison.rows],
    )
    summary: Dict[str, Any] = {
        "lambda": comparison.lam,
        "excluded": curve.excluded,
        "conservative_beyond_0.05": all(r.conservative for r in comparison.rows if r.distance > 0.05),
    }
    try:
        summary["log_linearity"] = log_linearity(curve, config.log_distance).model_dump()
    except InsufficientDataError as e:
        logger.warning(f"Log-linearity not computed: {e}")

    for n, s in config.sizes:
        extra = correlation_sweep(design.with_updates(n=n, s=s), config.references, bucket_width=config.bucket_width)
        bundle.write_csv(f"curve_n{n}_s{s}.csv", CURVE_HEADER, _curve_rows(extra))
    return summary


def run_coverage(config: ExperimentConfig, bundle: OutputBundle) -> Dict[str, Any]:
    """Coverage of contrast intervals per covariance mode."""
    rows = coverage_table(
        config.design(), config.contrasts, config.level, config.coverage_trials,
        config.n_anchors, config.mc_r, config.eps, config.include_mc,
    )
    bundle.write_csv("coverage.csv", COVERAGE_HEADER, [
        [r.contrast, r.mode, r.level, r.coverage, r.trials] for r in rows
    ])
    return {f"{r.contrast}/{r.mode.value}": r.coverage for r in rows}


def run_stability(config: ExperimentConfig, bundle: OutputBundle) -> Dict[str, Any]:
    """Coupled disagreement rates and verdicts for each configured rule."""
    node = UniformNodeSampler.unit_cube(len(config.x1))
    runs, verdicts = [], {}
    for name in config.rules:
        rule = build_rule(name, node.p, config.grid_g, config.alpha)
        series = [
            coupled_split_tv(rule, node, m, config.x1, config.stability_reps, config.depth, seed=config.seed or 0)
            for m in config.node_sizes
        ]
        runs.extend(series)
        verdict = stability_classify(series)
        verdicts[name] = verdict.model_dump(mode="json")
        logger.info(f"Rule {name}: {verdict.kind.value} (slope {verdict.slope:.3f})")
        if verdict.kind == VerdictKind.STABLE and verdict.bounds_only:
            logger.info(f"Rule {name} never disagreed; verdict rests on upper bounds")
    bundle.write_csv("stability.csv", STABILITY_HEADER, coupling_rows(runs))
    return verdicts


def run_cooccur(config: ExperimentConfig, bundle: OutputBundle) -> Dict[str, Any]:
    """Co-occurrence frequency across subsample sizes and its decay fit."""
    design = config.design()
    sampler = MixtureDesignSampler(design)
    estimates = []
    for s in config.cooccur_sizes:
        cfg = ForestConfig.build(
            n=s, s=s, trees=config.cooccur_trees, delta=config.cooccur_delta, alpha=config.alpha,
            k=config.k, grid_g=config.grid_g, seed=config.seed or 0, criterion=config.criterion,
        )
        estimates.append(estimate_m(sampler, config.x, config.x_bar, cfg, config.conditional))
    bundle.write_csv("cooccur.csv", COOCCUR_HEADER, cooccur_rows(estimates))
    try:
        return {"decay_fit": decay_fit(estimates, delta=config.cooccur_delta).model_dump()}
    except InsufficientDataError as e:
        logger.warning(f"Decay fit not computed: {e}")
        return {"decay_fit": None}


RUNNERS: Dict[str, Callable[[ExperimentConfig, OutputBundle], Dict[str, Any]]] = {
    "simulate": run_simulate,
    "sweep": run_sweep,
    "coverage": run_coverage,
    "stability": run_stability,
    "cooccur": run_cooccur,
}


def run_experiment(config: ExperimentConfig, out_dir: Path) -> RunReport:
    """
    Execute the configured experiments and write the output bundle.

    A failing experiment is logged and recorded; the remaining experiments
    still run and their outputs are kept.

    Args:
        config: Validated configuration with a seed
        out_dir: Bundle directory

    Returns:
        RunReport whose exit_code is 0 on full success and 1 otherwise
    """
    if config.seed is None:
        raise ConfigurationError("a seed is required")

    bundle = OutputBundle(out_dir)
    report = RunReport()
    metrics_collector.reset()

    for name in config.experiments:
        logger.info(f"Running experiment '{name}' (seed {config.seed})")
        try:
            with metrics_collector.track(name):
                report.summaries[name] = RUNNERS[name](config, bundle)
        except Exception as e:
            logger.error(f"Experiment '{name}' failed: {e}")
            report.errors[name] = str(e)

    bundle.write_manifest(
        config=config.model_dump(mode="json"),
        seed=config.seed,
        wall_times=metrics_collector.wall_times(),
        summaries=report.summaries,
        errors=report.errors,
        stages=metrics_collector.get_system_metrics(),
    )
    report.outputs = list(bundle.written)
    return report
