"""Exponential-family GLMs fitted by Fisher scoring (IRLS).

Each candidate model is an ordinary GLM with canonical link on the
subjects observing that pattern's columns.  The log-likelihood kernel is

    l(beta) = sum_i [y_i * theta_i - b(theta_i)] / phi,   theta = X beta,

dropping the c(y, phi) term, which depends on neither beta nor the
averaging weights; absolute likelihood values therefore differ from
textbook ones by a data-only constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import expit

from .errors import NumericalError, RankDeficientError
from .patterns import FragmentaryDataset, Pattern, PatternIndex


@dataclass(frozen=True)
class ExponentialFamily:
    """Cumulant function triplet (b, b', b'') with known dispersion phi."""

    name: str
    b: callable
    b_prime: callable
    b_double_prime: callable
    phi: float = 1.0
    theta_from_mean: callable = None  # canonical link, mean -> theta


def _binomial_b(theta):
    return np.logaddexp(0.0, theta)


def _binomial_var(theta):
    mu = expit(theta)
    return mu * (1.0 - mu)


BINOMIAL = ExponentialFamily(
    name="binomial",
    b=_binomial_b,
    b_prime=expit,
    b_double_prime=_binomial_var,
    phi=1.0,
    theta_from_mean=lambda mu: np.log(mu) - np.log1p(-mu),
)

GAUSSIAN = ExponentialFamily(
    name="gaussian",
    b=lambda theta: 0.5 * np.square(theta),
    b_prime=lambda theta: np.asarray(theta, dtype=float),
    b_double_prime=lambda theta: np.ones_like(np.asarray(theta, dtype=float)),
    phi=1.0,
    theta_from_mean=lambda mu: np.asarray(mu, dtype=float),
)

POISSON = ExponentialFamily(
    name="poisson",
    b=np.exp,
    b_prime=np.exp,
    b_double_prime=np.exp,
    phi=1.0,
    theta_from_mean=np.log,
)

FAMILIES = {f.name: f for f in (BINOMIAL, GAUSSIAN, POISSON)}


def get_family(name) -> ExponentialFamily:
    if isinstance(name, ExponentialFamily):
        return name
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")


@dataclass(frozen=True)
class FitOptions:
    """Knobs for the IRLS fit (exposed as CLI flags)."""

    max_iter: int = 100
    grad_tol: float = 1e-8
    ridge: float = 1e-8
    divergence_norm: float = 1e4
    keep_trace: bool = False


@dataclass
class CandidateModel:
    """A fitted per-pattern GLM."""

    pattern: Pattern
    beta: np.ndarray
    n_k: int
    p_k: int
    loglik: float
    converged: bool
    iterations: int
    ridged: bool = False
    trace: list = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "pattern": list(self.pattern.indices),
            "pattern_id": self.pattern.id,
            "beta": self.beta.tolist(),
            "n_k": self.n_k,
            "p_k": self.p_k,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "ridged": self.ridged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateModel":
        return cls(
            pattern=Pattern(tuple(d["pattern"]), id=d.get("pattern_id", 0)),
            beta=np.asarray(d["beta"], dtype=float),
            n_k=int(d["n_k"]),
            p_k=int(d["p_k"]),
            loglik=float(d["loglik"]),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            ridged=bool(d.get("ridged", False)),
        )


def loglik(family: ExponentialFamily, theta: np.ndarray, y: np.ndarray) -> float:
    """Log-likelihood kernel sum_i [y_i theta_i - b(theta_i)] / phi."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.shape != y.shape:
        raise ValueError("theta and y must have the same length")
    if not np.all(np.isfinite(theta)):
        raise NumericalError("non-finite linear predictor in loglik")
    return float((y @ theta - np.sum(family.b(theta))) / family.phi)


def loglik_gradient(
    family: ExponentialFamily, X: np.ndarray, y: np.ndarray, beta: np.ndarray
) -> np.ndarray:
    """Score vector X^T (y - b'(X beta)) / phi."""
    theta = X @ beta
    return X.T @ (y - family.b_prime(theta)) / family.phi


def check_full_rank(X: np.ndarray, column_names=None, pivot_tol: float = 1e-10):
    """Reject rank-deficient designs, naming the offending columns."""
    if X.shape[0] < X.shape[1]:
        names = list(column_names) if column_names is not None else []
        raise RankDeficientError(
            f"underdetermined design: {X.shape[0]} rows for {X.shape[1]} columns",
            columns=names,
        )
    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > pivot_tol * scale))
    if rank < X.shape[1]:
        bad = piv[rank:]
        names = (
            [column_names[j] for j in bad]
            if column_names is not None
            else [str(j) for j in bad]
        )
        raise RankDeficientError(
            f"rank-deficient design (rank {rank} < {X.shape[1]}); "
            f"dependent columns: {names}",
            columns=names,
        )


def fit_glm(
    X: np.ndarray,
    y: np.ndarray,
    family: ExponentialFamily,
    opts: FitOptions | None = None,
    column_names=None,
) -> tuple[np.ndarray, dict]:
    """Maximize the GLM log-likelihood by Fisher scoring with step halving.

    Returns the coefficient vector and a diagnostics dict (loglik,
    converged, iterations, ridged, trace).  The fit is flagged
    non-converged when the score max-norm stays above ``grad_tol`` after
    ``max_iter`` iterations; a ridge term is added to the weighted normal
    equations once the coefficient norm passes ``divergence_norm``
    (separation guard), and the fit is flagged accordingly.
    """
    opts = opts or FitOptions()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    check_full_rank(X, column_names)

    beta = np.zeros(p)
    theta = X @ beta
    ll = loglik(family, theta, y)
    trace = [ll] if opts.keep_trace else None
    ridged = False
    converged = False
    iterations = 0

    for iterations in range(1, opts.max_iter + 1):
        mu = family.b_prime(theta)
        score = X.T @ (y - mu) / family.phi
        if np.max(np.abs(score)) <= opts.grad_tol:
            converged = True
            iterations -= 1
            break
        w = family.b_double_prime(theta) / family.phi
        h = X.T @ (w[:, None] * X)
        if ridged:
            h = h + opts.ridge * np.eye(p)
        try:
            direction = scipy.linalg.solve(h, score, assume_a="pos")
        except scipy.linalg.LinAlgError:
            direction = np.linalg.lstsq(h, score, rcond=None)[0]

        # Step halving keeps the log-likelihood non-decreasing.
        step = 1.0
        accepted = False
        for _ in range(30):
            beta_try = beta + step * direction
            theta_try = X @ beta_try
            ll_try = loglik(family, theta_try, y) if np.all(np.isfinite(theta_try)) else -np.inf
            if np.isfinite(ll_try) and ll_try >= ll:
                beta, theta, ll = beta_try, theta_try, ll_try
                accepted = True
                break
            step *= 0.5
        if opts.keep_trace:
            trace.append(ll)
        if not accepted:
            break
        if not ridged and np.linalg.norm(beta) > opts.divergence_norm:
            ridged = True
    else:
        iterations = opts.max_iter

    if not converged:
        score = X.T @ (y - family.b_prime(theta)) / family.phi
        converged = np.max(np.abs(score)) <= opts.grad_tol

    info = {
        "loglik": ll,
        "converged": bool(converged),
        "iterations": iterations,
        "ridged": ridged,
        "trace": trace,
    }
    return beta, info


def fit_candidate(
    data: FragmentaryDataset,
    index: PatternIndex,
    k: int,
    family: ExponentialFamily,
    opts: FitOptions | None = None,
) -> CandidateModel:
    """Fit candidate model k (1-based pattern id) on its superset sample S_k."""
    if not 1 <= k <= index.K:
        raise ValueError(f"pattern id {k} outside 1..{index.K}")
    pattern = index.patterns[k - 1]
    rows = index.s_sets[k - 1]
    cols = list(pattern.indices)
    n_k, p_k = rows.size, len(cols)
    if n_k < p_k:
        raise RankDeficientError(
            f"candidate {k}: sample size {n_k} below dimension {p_k}",
            columns=[data.column_names[j] for j in cols],
        )
    X = data.x[np.ix_(rows, cols)]
    y = data.y[rows]
    beta, info = fit_glm(
        X, y, family, opts, column_names=[data.column_names[j] for j in cols]
    )
    return CandidateModel(
        pattern=pattern,
        beta=beta,
        n_k=n_k,
        p_k=p_k,
        loglik=info["loglik"],
        converged=info["converged"],
        iterations=info["iterations"],
        ridged=info["ridged"],
        trace=info["trace"],
    )


def fit_all_candidates(
    data: FragmentaryDataset,
    index: PatternIndex,
    family: ExponentialFamily,
    opts: FitOptions | None = None,
) -> list[CandidateModel]:
    """Fit every candidate model of the index, in pattern order."""
    return [fit_candidate(data, index, k, family, opts) for k in range(1, index.K + 1)]


def linear_predictor(model: CandidateModel, x_full: np.ndarray) -> float:
    """x restricted to the model's pattern, dotted with its coefficients."""
    x_full = np.asarray(x_full, dtype=float)
    vals = x_full[list(model.pattern.indices)]
    if not np.all(np.isfinite(vals)):
        missing = [
            j for j, v in zip(model.pattern.indices, vals) if not np.isfinite(v)
        ]
        raise ValueError(f"covariates {missing} required by the model are unobserved")
    return float(vals @ model.beta)
