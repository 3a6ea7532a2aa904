"""
Hoeffding decomposition checks for symmetric kernels of two or three arguments.

Kernels take ``arity`` observations (1-D arrays) and return a q-vector.
Samplers draw observations as rows: ``draw(rng, size) -> (size, d) array``.
"""

import itertools
from typing import Any, Callable, Dict, Sequence, Tuple

import numpy as np
from loguru import logger

from src.core.exceptions import ConfigurationError
from src.core.models import ForestConfig, OrthogonalityReport
from src.core.seeding import Stream, seed_sequence
from src.forest.dataset import Dataset
from src.forest.grid import build_split_grid
from src.forest.tree import grow_tree

Kernel = Callable[..., Any]
Draw = Callable[[np.random.Generator, int], np.ndarray]

ASYMMETRY_TOL = 1e-9


def _metric(m_metric: Any) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m_metric, dtype=float))
    if m.shape[0] != m.shape[1] or not np.allclose(m, m.T):
        raise ConfigurationError("metric matrix must be square and symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as e:
        raise ConfigurationError("metric matrix must be positive definite") from e
    return m


def _check_arity(arity: int) -> None:
    if arity not in (2, 3):
        raise ConfigurationError(f"kernel arity must be 2 or 3, got {arity}")


def _evaluate(kernel: Kernel, *z: np.ndarray) -> np.ndarray:
    return np.atleast_1d(np.asarray(kernel(*z), dtype=float))


class TreeKernel:
    """
    A tree grown on its arguments, evaluated at fixed query points.

    Observations are rows [x_1..x_p, y]. The randomization is averaged over
    a fixed set of coin seeds, which makes the kernel a deterministic
    symmetric function of its arguments.
    """

    def __init__(self, points: Any, cfg: ForestConfig, coin_seeds: Sequence[int] = (0,)):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.cfg = cfg
        self.coin_seeds = tuple(coin_seeds)
        self.grid = build_split_grid(self.points.shape[1], cfg.grid_g, cfg.alpha)

    def __call__(self, *z: np.ndarray) -> np.ndarray:
        rows = np.vstack(z)
        data = Dataset(rows[:, :-1], rows[:, -1])
        everyone = np.arange(data.n)
        predictions = [
            grow_tree(data, everyone, self.cfg, seed, self.grid).predict_many(self.points)
            for seed in self.coin_seeds
        ]
        return np.mean(predictions, axis=0)


def _symmetrize(table: np.ndarray, arity: int) -> np.ndarray:
    """Average of the table over every permutation of its argument axes."""
    perms = list(itertools.permutations(range(arity)))
    return sum(np.transpose(table, perm + (arity,)) for perm in perms) / len(perms)


def _asymmetry(table: np.ndarray, arity: int) -> float:
    return max(
        float(np.max(np.abs(table - np.transpose(table, perm + (arity,)))))
        for perm in itertools.permutations(range(arity))
    )


def _report(
    arity: int,
    exact: bool,
    mean: np.ndarray,
    products: Dict[str, Tuple[np.ndarray, np.ndarray]],
    residual: float,
    asymmetry: float,
    reps: int,
    **terms: Any,
) -> OrthogonalityReport:
    inner, errors = {}, {}
    for name, (values, weights) in products.items():
        value = float(np.sum(weights * values))
        inner[name] = value
        if not exact:
            errors[name] = float(np.std(values, ddof=1) / np.sqrt(values.size))
    if asymmetry > ASYMMETRY_TOL:
        logger.warning(f"Kernel is not symmetric: argument positions differ by up to {asymmetry:.3g}")
    return OrthogonalityReport(
        arity=arity,
        exact=exact,
        mean=mean.tolist(),
        inner_products=inner,
        standard_errors=errors,
        residual=residual,
        asymmetry=asymmetry,
        reps=reps,
        **terms,
    )


def exact_hoeffding(
    kernel: Kernel,
    support: Any,
    probs: Any,
    m_metric: Any,
    arity: int = 2,
) -> OrthogonalityReport:
    """
    Hoeffding terms by exhaustive enumeration over a finite support.

    f1 and f2 follow their definitions with the conditioned observation in the
    first position. The kernel is rebuilt from the mean, f1 and the
    symmetrized higher-order terms; an asymmetric kernel leaves a residual.

    Args:
        kernel: Symmetric kernel of ``arity`` observations
        support: Support points, one row per atom
        probs: Atom probabilities, summing to one
        m_metric: Positive-definite q x q metric
        arity: 2 or 3

    Returns:
        Report of the exact cross-order M-inner products, f1 and f2 on the support
    """
    _check_arity(arity)
    m = _metric(m_metric)
    atoms = np.asarray(support, dtype=float)
    if atoms.ndim == 1:
        atoms = atoms.reshape(-1, 1)
    w = np.asarray(probs, dtype=float)
    if w.shape[0] != atoms.shape[0] or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ConfigurationError("probs must be a distribution over the support")

    a = atoms.shape[0]
    table = np.array([
        _evaluate(kernel, *(atoms[i] for i in idx))
        for idx in itertools.product(range(a), repeat=arity)
    ]).reshape((a,) * arity + (-1,))
    q = table.shape[-1]
    if m.shape[0] != q:
        raise ConfigurationError(f"metric is {m.shape[0]}x{m.shape[0]}, kernel returns {q} values")

    if arity == 2:
        mean = np.einsum("a,b,abq->q", w, w, table)
        f1 = np.einsum("b,abq->aq", w, table) - mean
        f2 = table - f1[:, None, :] - f1[None, :, :] - mean
        joint = np.einsum("a,b->ab", w, w)
        products = {
            "f1.f2": (np.einsum("aq,qr,abr->ab", f1, m, f2), joint),
        }
        rebuilt = mean + f1[:, None, :] + f1[None, :, :] + _symmetrize(f2, 2)
    else:
        mean = np.einsum("a,b,c,abcq->q", w, w, w, table)
        f1 = np.einsum("b,c,abcq->aq", w, w, table) - mean
        g2 = np.einsum("c,abcq->abq", w, table)
        f2 = g2 - f1[:, None, :] - f1[None, :, :] - mean
        f3 = (
            table
            - f2[:, :, None, :] - f2[:, None, :, :] - f2[None, :, :, :]
            - f1[:, None, None, :] - f1[None, :, None, :] - f1[None, None, :, :]
            - mean
        )
        pair = np.einsum("a,b->ab", w, w)
        triple = np.einsum("a,b,c->abc", w, w, w)
        products = {
            "f1.f2": (np.einsum("aq,qr,abr->ab", f1, m, f2), pair),
            "f1.f3": (np.einsum("aq,qr,abcr->abc", f1, m, f3), triple),
            "f2.f3": (np.einsum("abq,qr,abcr->abc", f2, m, f3), triple),
        }
        sym2 = _symmetrize(f2, 2)
        rebuilt = (
            mean
            + f1[:, None, None, :] + f1[None, :, None, :] + f1[None, None, :, :]
            + sym2[:, :, None, :] + sym2[:, None, :, :] + sym2[None, :, :, :]
            + _symmetrize(f3, 3)
        )

    residual = float(np.max(np.abs(table - rebuilt)))
    degeneracy = float(max(
        np.max(np.abs(np.einsum("a,abq->bq", w, f2))),
        np.max(np.abs(np.einsum("b,abq->aq", w, f2))),
    ))
    report = _report(
        arity, True, mean, products, residual, _asymmetry(table, arity), reps=0,
        degeneracy=degeneracy, f1=f1, f2=f2,
    )
    logger.debug(f"Exact Hoeffding check over {a} atoms: {report.inner_products}")
    return report


def hoeffding_check(
    kernel: Kernel,
    draw: Draw,
    m_metric: Any,
    reps: int,
    arity: int = 2,
    inner: int = 200,
    seed: int = 0,
) -> OrthogonalityReport:
    """
    Monte Carlo Hoeffding decomposition of a symmetric kernel.

    f1(x) = E[f | X1=x] - Ef and f2(x1,x2) = E[f | X1,X2] - f1(x1) - f1(x2) - Ef
    (and f3 for arity 3) are estimated with ``inner`` conditional draws each;
    the report holds the average M-inner products between distinct orders
    with their standard errors, the residual of rebuilding each drawn kernel
    value from symmetric terms, and the gap between f1 estimated at each
    argument position on common draws.

    The left factor of every inner product is estimated from draws independent
    of those used for the right factor, so conditional-mean noise does not
    bias the products.

    Args:
        kernel: Symmetric kernel of ``arity`` observations
        draw: Sampler of observations
        m_metric: Positive-definite q x q metric
        reps: Outer repetitions, at least 2
        arity: 2 or 3
        inner: Conditional draws per conditional expectation
        seed: Master seed
    """
    _check_arity(arity)
    if reps < 2 or inner < 1:
        raise ConfigurationError("reps must be at least 2 and inner at least 1")
    m = _metric(m_metric)

    rng = np.random.default_rng(seed_sequence(seed, Stream.HOEFFDING, 0))
    pool = draw(rng, inner * reps * arity)
    mean = np.mean([
        _evaluate(kernel, *pool[j * arity:(j + 1) * arity]) for j in range(inner * reps)
    ], axis=0)

    def f1_by_position(x: np.ndarray) -> np.ndarray:
        """Conditional mean with x in each argument position, on shared draws."""
        others = draw(rng, inner * (arity - 1))
        rows = []
        for position in range(arity):
            values = []
            for j in range(inner):
                args = list(others[j * (arity - 1):(j + 1) * (arity - 1)])
                args.insert(position, x)
                values.append(_evaluate(kernel, *args))
            rows.append(np.mean(values, axis=0) - mean)
        return np.asarray(rows)

    def f1(x: np.ndarray) -> np.ndarray:
        others = draw(rng, inner * (arity - 1))
        return np.mean([
            _evaluate(kernel, x, *others[j * (arity - 1):(j + 1) * (arity - 1)])
            for j in range(inner)
        ], axis=0) - mean

    def symmetric_value(*z: np.ndarray) -> np.ndarray:
        return np.mean([_evaluate(kernel, *perm) for perm in itertools.permutations(z)], axis=0)

    def f2(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        if arity == 2:
            joint = _evaluate(kernel, x1, x2)
        else:
            joint = np.mean([_evaluate(kernel, x1, x2, t) for t in draw(rng, inner)], axis=0)
        return joint - f1(x1) - f1(x2) - mean

    rows: Dict[str, list] = {"f1.f2": []}
    if arity == 3:
        rows.update({"f1.f3": [], "f2.f3": []})
    residuals, gaps = [], []

    for _ in range(reps):
        z = draw(rng, arity)
        value = _evaluate(kernel, *z)
        positions = f1_by_position(z[0])
        left_f1 = positions[0]
        gaps.append(float(np.max(np.abs(positions - left_f1))))

        if arity == 2:
            first = [f1(z[0]), f1(z[1])]
            pair = symmetric_value(z[0], z[1]) - first[0] - first[1] - mean
            rows["f1.f2"].append(left_f1 @ m @ pair)
            rebuilt = mean + first[0] + first[1] + pair
        else:
            first = [f1(z[i]) for i in range(3)]
            g = {}
            for i, j in ((0, 1), (0, 2), (1, 2)):
                ts = draw(rng, inner)
                g[(i, j)] = np.mean(
                    [0.5 * (_evaluate(kernel, z[i], z[j], t) + _evaluate(kernel, z[j], z[i], t)) for t in ts],
                    axis=0,
                )
            pairs = {key: g[key] - first[key[0]] - first[key[1]] - mean for key in g}
            triple = symmetric_value(*z) - sum(pairs.values()) - sum(first) - mean
            left_f2 = f2(z[0], z[1])
            rows["f1.f2"].append(left_f1 @ m @ pairs[(0, 1)])
            rows["f1.f3"].append(left_f1 @ m @ triple)
            rows["f2.f3"].append(left_f2 @ m @ triple)
            rebuilt = mean + sum(first) + sum(pairs.values()) + triple
        residuals.append(float(np.max(np.abs(value - rebuilt))))

    products = {
        name: (np.asarray(values), np.full(len(values), 1.0 / len(values)))
        for name, values in rows.items()
    }
    report = _report(arity, False, mean, products, max(residuals), max(gaps), reps)
    logger.debug(f"Monte Carlo Hoeffding check ({reps} reps): {report.inner_products}")
    return report
