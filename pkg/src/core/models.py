"""
Pydantic models for Honest Forest Lab.

Configuration models are frozen and validated on construction; result models
carry numpy arrays and serialize them as nested lists.
"""

from datetime import datetime, timezone
from enum import Enum
from typing import Annotated, Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    ValidationError,
    field_validator,
    model_validator,
)

from src.core.config import settings
from src.core.exceptions import ConfigurationError


def _as_float_array(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=float)


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class SplitCriterion(str, Enum):
    """Covariate-only split criteria."""
    CENTROID = "centroid"
    BALANCED = "balanced"


class CoinSchedule(str, Enum):
    """How a heads outcome of the coin picks its axis."""
    CYCLIC = "cyclic"
    UNIFORM = "uniform"


class SplitKind(str, Enum):
    """Origin of a realized split."""
    RANDOM_CYCLIC = "random-cyclic"
    CRITERION = "criterion"


class EstimateStatus(str, Enum):
    """Quality flag of a joint estimate."""
    OK = "ok"
    DEGENERATE = "degenerate"


class FunctionalKind(str, Enum):
    """Linear functionals of the joint estimate."""
    POINT = "point"
    CONTRAST = "contrast"
    WEIGHTED = "weighted"


class IntervalMode(str, Enum):
    """Covariance approximation used for an interval."""
    DIAGONAL = "diagonal"
    HEURISTIC = "heuristic"


class CurveScale(str, Enum):
    """Scale of a correlation curve."""
    LINEAR = "linear"
    LOG = "log"


class VerdictKind(str, Enum):
    """Outcome of a stability classification."""
    STABLE = "stable"
    UNSTABLE = "unstable"


class ConfigModel(BaseModel):
    """Frozen base for configuration models with library-level errors."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    @classmethod
    def build(cls, **values: Any):
        """Validate ``values``, raising ConfigurationError on failure."""
        try:
            return cls(**values)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or cls.__name__}: {err['msg']}"
                for err in e.errors()
            )
            raise ConfigurationError(problems) from e

    def with_updates(self, **changes: Any):
        """Return a re-validated copy with ``changes`` applied."""
        return self.build(**{**self.model_dump(), **changes})


class ForestConfig(ConfigModel):
    """All tuning symbols of one forest run."""
    n: int = Field(ge=1, description="Sample size")
    s: int = Field(ge=1, description="Subsample size")
    trees: int = Field(default_factory=lambda: settings.default_trees, ge=1, description="Monte Carlo trees B")
    delta: float = Field(default_factory=lambda: settings.default_delta, ge=0.0, le=1.0, description="Coin probability")
    alpha: float = Field(default_factory=lambda: settings.default_alpha, gt=0.0, lt=0.5, description="Regularity fraction")
    k: int = Field(default_factory=lambda: settings.default_k, ge=1, description="Terminal size parameter")
    grid_g: int = Field(default_factory=lambda: settings.default_grid, ge=2, description="Per-axis grid resolution")
    seed: int = Field(default=0, ge=0, description="Master seed")
    criterion: SplitCriterion = SplitCriterion.CENTROID
    coin_schedule: CoinSchedule = CoinSchedule.CYCLIC

    @model_validator(mode="after")
    def _check_sizes(self) -> "ForestConfig":
        if self.s > self.n:
            raise ValueError(f"subsample size s={self.s} exceeds n={self.n}")
        if self.s < self.k:
            raise ValueError(f"subsample size s={self.s} is below k={self.k}")
        return self

    @property
    def max_terminal(self) -> int:
        """Largest point count of a node that is never split."""
        return 2 * self.k - 1


class ResultModel(BaseModel):
    """Base for result models holding numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class JointEstimate(ResultModel):
    """Forest estimates at q query points with their across-tree covariance."""
    points: FloatArray
    estimates: FloatArray
    cov: FloatArray
    trees_used: int
    status: EstimateStatus = EstimateStatus.OK
    seed: int
    config: ForestConfig
    tree_predictions: Optional[FloatArray] = Field(default=None, exclude=True)

    @property
    def q(self) -> int:
        return int(self.estimates.shape[0])

    def correlation(self) -> np.ndarray:
        """Across-tree correlation matrix; zero-variance rows become NaN."""
        sd = np.sqrt(np.diag(self.cov))
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = self.cov / np.outer(sd, sd)
        return corr


class HajekEstimate(ResultModel):
    """Monte Carlo estimate of the Hajek projection variance."""
    points: FloatArray
    t1_values: FloatArray = Field(description="Per-anchor conditional means, anchors x q")
    v_hat: FloatArray = Field(description="(s^2/n) Var(T1)")
    v_hat_debiased: FloatArray = Field(description="v_hat minus the anchor-mean Monte Carlo noise")
    var_t: FloatArray = Field(description="Covariance of single-tree predictions")
    var_t_ring: FloatArray = Field(description="s Var(T1), the variance of the projected kernel")
    mc_reps: int
    anchors: int
    s: int
    n: int
    seed: int


class FunctionalSpec(ResultModel):
    """Weight vector of a linear functional of the joint estimate."""
    kind: FunctionalKind
    weights: FloatArray
    mass: Optional[float] = Field(default=None, description="Total quadrature mass for weighted functionals")
    label: str = ""

    @field_validator("weights")
    @classmethod
    def _finite(cls, w: np.ndarray) -> np.ndarray:
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        return w

    @model_validator(mode="after")
    def _check_mass(self) -> "FunctionalSpec":
        if self.kind == FunctionalKind.WEIGHTED:
            if self.mass is None:
                raise ValueError("weighted functionals need the quadrature mass")
            total = float(np.sum(self.weights))
            if abs(total - self.mass) > 1e-9 * max(1.0, abs(self.mass)):
                raise ValueError(f"weights sum to {total}, expected mass {self.mass}")
        return self

    @classmethod
    def point(cls, q: int, i: int) -> "FunctionalSpec":
        w = np.zeros(q)
        w[i] = 1.0
        return cls(kind=FunctionalKind.POINT, weights=w, label=f"point[{i}]")

    @classmethod
    def contrast(cls, q: int, i: int, j: int) -> "FunctionalSpec":
        w = np.zeros(q)
        w[i] += 1.0
        w[j] -= 1.0
        return cls(kind=FunctionalKind.CONTRAST, weights=w, label=f"contrast[{i},{j}]")

    @classmethod
    def weighted(cls, weights: Any, mass: Optional[float] = None) -> "FunctionalSpec":
        w = np.asarray(weights, dtype=float)
        return cls(
            kind=FunctionalKind.WEIGHTED,
            weights=w,
            mass=float(np.sum(w)) if mass is None else mass,
            label="weighted",
        )


class ConfidenceInterval(BaseModel):
    """Normal-approximation interval for a linear functional."""
    kind: FunctionalKind
    mode: IntervalMode
    level: float
    center: float
    half_width: float
    lower: float
    upper: float

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


class OrthogonalityReport(ResultModel):
    """
    Cross-order inner products of a Hoeffding decomposition.

    ``residual`` is the largest gap between the kernel and its rebuild from
    symmetric terms; ``asymmetry`` the largest gap between first-order terms
    taken at different argument positions. Both vanish for symmetric kernels.
    ``degeneracy`` (exact runs) is max |E f2(x, X)| over the support and
    both positions. ``f1`` (atoms x q) and ``f2`` (atoms x atoms x q) are
    filled by exact runs.
    """
    arity: int
    exact: bool
    mean: List[float]
    inner_products: Dict[str, float]
    standard_errors: Dict[str, float] = Field(default_factory=dict)
    residual: float
    asymmetry: float
    degeneracy: Optional[float] = None
    f1: Optional[FloatArray] = None
    f2: Optional[FloatArray] = None
    reps: int = 0

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return self.asymmetry <= tol and self.residual <= tol

    def max_z_score(self) -> float:
        """Largest |inner product| in units of its standard error."""
        scores = [
            abs(value) / self.standard_errors[name]
            for name, value in self.inner_products.items()
            if self.standard_errors.get(name, 0.0) > 0.0
        ]
        return max(scores, default=0.0)


class TraceReport(BaseModel):
    """Trace ratio with the conditioning of the inverted matrix."""
    value: float
    condition: float
    s: int
    n: int


class CooccurEstimate(BaseModel):
    """Frequency with which two points share a terminal node."""
    x: List[float]
    x_bar: List[float]
    m_hat: float = Field(ge=0.0, le=1.0)
    trees: int
    shared: int
    conditional: bool
    stderr: float
    cp_upper: float = Field(description="One-sided 95% Clopper-Pearson upper bound")
    s: int
    delta: float

    @property
    def l1_distance(self) -> float:
        return float(np.sum(np.abs(np.asarray(self.x) - np.asarray(self.x_bar))))


class DecayFit(BaseModel):
    """Log-log least-squares slope of a decay series."""
    slope: float
    stderr: float
    intercept: float
    ci_low: float
    ci_high: float
    level: float
    n_points: int
    dropped: List[float] = Field(default_factory=list)
    predicted_exponent: Optional[float] = None

    def slope_below(self, threshold: float) -> bool:
        """Whether the whole confidence band lies below ``threshold``."""
        return self.ci_high < threshold


class MKernelEstimate(BaseModel):
    """Product-of-inclusion-probabilities form of the co-occurrence metric."""
    value: float
    stderr: float
    anchors: int
    trees_per_anchor: int
    inclusion_x: float = Field(description="Mean of E(I | X1) for x over anchors")
    inclusion_x_bar: float = Field(description="Mean of E(I | X1) for x_bar over anchors")


class SeparationProfile(BaseModel):
    """Probability that two points still share a node after l splits."""
    x: List[float]
    x_bar: List[float]
    survival: List[float]
    trees: int


class CouplingRun(BaseModel):
    """Coupled split draws with and without one conditioned point."""
    rule: str
    m: int
    reps: int
    disagree: int
    tv_hat: float = Field(ge=0.0, le=1.0)
    tv_hist: float
    x1: List[float]
    depth: int = 1
    failures: int = 0

    @model_validator(mode="after")
    def _check_counts(self) -> "CouplingRun":
        if self.disagree > self.reps:
            raise ValueError("disagreements exceed repetitions")
        return self


class StabilityVerdict(BaseModel):
    """Classification of a split rule from its disagreement decay."""
    kind: VerdictKind
    delta_hat: Optional[float] = None
    slope: float
    stderr: float
    bounds_only: bool = False
    node_sizes: List[int]


class SimDesign(ConfigModel):
    """Truncated Gaussian mixture design of the correlation study."""
    means: Tuple[Tuple[float, float], ...] = ((0.3, 0.3), (0.3, 0.7), (0.7, 0.3), (0.7, 0.7))
    noise_scale: float = Field(default=0.2, gt=0.0)
    n: int = Field(default=10000, ge=1)
    s: int = Field(default=500, ge=1)
    trees: int = Field(default_factory=lambda: settings.default_trees, ge=1)
    delta: float = Field(default_factory=lambda: settings.default_delta, ge=0.0, le=1.0)
    alpha: float = Field(default_factory=lambda: settings.default_alpha, gt=0.0, lt=0.5)
    k: int = Field(default_factory=lambda: settings.default_k, ge=1)
    grid_g: int = Field(default_factory=lambda: settings.default_grid, ge=2)
    query_points: Tuple[Tuple[float, float], ...] = ((0.5, 0.5),)
    seed: int = Field(default=0, ge=0)
    criterion: SplitCriterion = SplitCriterion.CENTROID

    @field_validator("means")
    @classmethod
    def _interior(cls, means):
        for mu in means:
            if not all(0.0 < c < 1.0 for c in mu):
                raise ValueError(f"mixture mean {mu} lies outside (0,1)^2")
        return means

    def forest_config(self) -> ForestConfig:
        """Forest tuning symbols of this design."""
        return ForestConfig.build(
            n=self.n, s=self.s, trees=self.trees, delta=self.delta,
            alpha=self.alpha, k=self.k, grid_g=self.grid_g, seed=self.seed,
            criterion=self.criterion,
        )


class CurveRow(BaseModel):
    """One distance bucket of a correlation curve."""
    distance: float = Field(ge=0.0)
    correlation: float = Field(ge=-1.0, le=1.0)
    count: int
    stderr: float


class CorrelationCurve(BaseModel):
    """Across-tree correlation against L1 distance."""
    rows: List[CurveRow]
    scale: CurveScale = CurveScale.LINEAR
    excluded: int = 0
    n: int
    s: int
    trees: int

    def distances(self) -> np.ndarray:
        return np.array([r.distance for r in self.rows])

    def correlations(self) -> np.ndarray:
        return np.array([r.correlation for r in self.rows])


class HeuristicRow(BaseModel):
    """Observed correlation against the two heuristics at one distance."""
    distance: float
    observed: float
    linear_bound: float
    exponential_fit: float
    conservative: bool


class HeuristicComparison(BaseModel):
    """Linear bound and exponential fit evaluated on a correlation curve."""
    rows: List[HeuristicRow]
    lam: float
    s: int
    p: int
    eps: float


class CoverageRow(BaseModel):
    """Empirical coverage of one contrast under one covariance mode."""
    contrast: str
    mode: IntervalMode
    level: float
    coverage: float
    trials: int


class ExecutionMetrics(BaseModel):
    """Metrics for one experiment stage."""
    stage: str
    duration_seconds: float
    items: int = 0
    success: bool = True
    error_message: Optional[str] = None
    timestamp: datetime = Field(default_factory=_utcnow)


class LogLinearity(BaseModel):
    """Straight-line fit of log correlation against distance."""
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    max_distance: float
