"""Simplex-weighted combination of per-pattern GLMs.

Candidates are combined through a weight vector w on the simplex chosen to
minimize, over the complete cases, the penalized criterion

    G(w) = (2/phi) * sum_i [ b(theta_i(w)) - y_i * theta_i(w) ]
           + lambda_n * sum_k w_k * p_k,

where theta(w) stacks the per-candidate linear predictors on the
complete-case rows (so theta(w) is linear in w and G is convex).  The
minimizer is found by projected gradient descent with Euclidean simplex
projection and Armijo backtracking, finished by an active-set Newton
polish that drives the simplex KKT residual to tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DataError, NumericalError
from .glm import (
    CandidateModel,
    ExponentialFamily,
    FitOptions,
    fit_all_candidates,
    get_family,
)
from .patterns import FragmentaryDataset, Pattern, PatternIndex, build_pattern_index, restrict_to

PROB_CLAMP = 1e-12
ACTIVE_TOL = 1e-10


class ClampCounter:
    """Counts probability/mean clamping events (diagnostic, resettable)."""

    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += int(n)

    def reset(self):
        self.count = 0


clamp_counter = ClampCounter()


@dataclass
class WeightVector:
    """Nonnegative weights summing to one (renormalized on construction)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if w.size == 0:
            raise DataError("weight vector is empty")
        if np.min(w) < -1e-9:
            raise DataError(f"negative weight {np.min(w):.3e}")
        w = np.maximum(w, 0.0)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise DataError("weights must have a positive finite sum")
        self.w = w / total

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.w, dtype=dtype)

    def __len__(self):
        return self.w.size

    def __getitem__(self, i):
        return self.w[i]


@dataclass
class CriterionContext:
    """Everything the weight criterion needs, frozen after construction.

    ``theta_matrix`` has one column per candidate: the candidate's linear
    predictor evaluated on the weighting (complete-case) rows, so that
    ``theta_matrix @ w`` is the combined predictor for any weights w.
    """

    theta_matrix: np.ndarray
    y_cc: np.ndarray
    p_sizes: np.ndarray
    family: ExponentialFamily

    def __post_init__(self):
        self.theta_matrix = np.asarray(self.theta_matrix, dtype=float)
        self.y_cc = np.asarray(self.y_cc, dtype=float)
        self.p_sizes = np.asarray(self.p_sizes, dtype=float)
        if self.theta_matrix.ndim != 2:
            raise DataError("theta_matrix must be 2-d")
        if not np.all(np.isfinite(self.theta_matrix)):
            raise NumericalError("theta_matrix contains non-finite entries")
        n, K = self.theta_matrix.shape
        if self.y_cc.shape != (n,) or self.p_sizes.shape != (K,):
            raise DataError("inconsistent criterion context shapes")

    @property
    def K(self) -> int:
        return self.theta_matrix.shape[1]

    @property
    def n_cc(self) -> int:
        return self.theta_matrix.shape[0]


def build_criterion_context(
    data: FragmentaryDataset,
    index: PatternIndex,
    candidates: list[CandidateModel],
    family: ExponentialFamily,
    warn_incomplete: bool = True,
) -> CriterionContext:
    """Per-candidate linear predictors on the weighting sample.

    The weighting sample is S of the leading (maximal) pattern; when that
    pattern covers every column this is the complete-case sample.  Every
    candidate pattern must be contained in the leading pattern, otherwise
    its predictor is undefined on those rows.
    """
    family = get_family(family)
    rows = index.s_sets[0]
    lead = set(index.patterns[0].indices)
    if warn_incomplete and not index.full_first:
        warnings.warn(
            "no subject observes every column; selecting weights on the "
            "maximal pattern's superset sample",
            stacklevel=2,
        )
    cols = []
    for cand in candidates:
        if not set(cand.pattern.indices) <= lead:
            raise DataError(
                f"candidate pattern {cand.pattern.indices} not contained in the "
                f"weighting pattern {tuple(sorted(lead))}"
            )
        cols.append(data.x[np.ix_(rows, list(cand.pattern.indices))] @ cand.beta)
    theta_matrix = np.column_stack(cols)
    p_sizes = np.array([c.p_k for c in candidates], dtype=float)
    return CriterionContext(theta_matrix, data.y[rows], p_sizes, family)


def criterion(ctx: CriterionContext, w, lambda_n: float) -> float:
    """Penalized complete-case criterion G(w)."""
    w = np.asarray(w, dtype=float)
    theta = ctx.theta_matrix @ w
    fam = ctx.family
    fit_term = 2.0 / fam.phi * (np.sum(fam.b(theta)) - ctx.y_cc @ theta)
    return float(fit_term + lambda_n * (ctx.p_sizes @ w))


def criterion_gradient(ctx: CriterionContext, w, lambda_n: float) -> np.ndarray:
    """Exact gradient of :func:`criterion` at w."""
    w = np.asarray(w, dtype=float)
    theta = ctx.theta_matrix @ w
    fam = ctx.family
    resid = fam.b_prime(theta) - ctx.y_cc
    return 2.0 / fam.phi * (ctx.theta_matrix.T @ resid) + lambda_n * ctx.p_sizes


def _criterion_hessian(ctx: CriterionContext, w) -> np.ndarray:
    theta = ctx.theta_matrix @ np.asarray(w, dtype=float)
    d = ctx.family.b_double_prime(theta)
    return 2.0 / ctx.family.phi * (ctx.theta_matrix.T @ (d[:, None] * ctx.theta_matrix))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sort-based algorithm)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u * ks > css)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def kkt_residual(w, grad) -> float:
    """Distance from the simplex first-order conditions.

    Zero iff all active (w_k > 0) gradient components equal the smallest
    gradient component, i.e. no mass can be moved to decrease the
    objective to first order.
    """
    w = np.asarray(w, dtype=float)
    grad = np.asarray(grad, dtype=float)
    active = w > ACTIVE_TOL
    return float(np.max(grad[active]) - np.min(grad))


@dataclass(frozen=True)
class OptOptions:
    """Knobs for the simplex weight optimizer."""

    max_iter: int = 5000
    kkt_tol: float = 1e-7
    obj_tol: float = 1e-9
    pgd_iters: int = 400
    armijo_shrink: float = 0.5
    step_grow: float = 1.3


@dataclass
class WeightFit:
    """Result of the weight optimization."""

    weights: WeightVector
    criterion_value: float
    kkt_residual: float
    converged: bool
    iterations: int


def _pgd(ctx, lambda_n, w, opts):
    """Projected gradient descent with Armijo-type backtracking."""
    f = criterion(ctx, w, lambda_n)
    theta0 = ctx.theta_matrix @ w
    bpp = float(np.max(ctx.family.b_double_prime(theta0)))
    lip = 2.0 / ctx.family.phi * max(bpp, 1e-8) * np.linalg.norm(ctx.theta_matrix, 2) ** 2
    t = 1.0 / max(lip, 1e-12)
    iters = 0
    for iters in range(1, opts.pgd_iters + 1):
        g = criterion_gradient(ctx, w, lambda_n)
        if kkt_residual(w, g) <= opts.kkt_tol:
            return w, f, iters
        accepted = False
        for _ in range(60):
            w_new = project_to_simplex(w - t * g)
            d = w_new - w
            dn = float(d @ d)
            if dn == 0.0:
                break
            f_new = criterion(ctx, w_new, lambda_n)
            if np.isfinite(f_new) and f_new <= f + g @ d + dn / (2.0 * t) + 1e-12:
                accepted = True
                break
            t *= opts.armijo_shrink
        if not accepted:
            break
        w, f = w_new, f_new
        t *= opts.step_grow
    return w, f, iters


def _face_newton(ctx, lambda_n, w, opts, max_rounds=60):
    """Active-set Newton refinement on the simplex.

    Newton steps on the current face (equality constraint sum w = 1, the
    inactive coordinates pinned at zero) with step clipping at the
    boundary; coordinates whose gradient violates the KKT conditions are
    released back into the face.  G is smooth and convex, so every
    accepted step decreases it and the loop terminates at a KKT point up
    to numerical precision.
    """
    K = w.size
    f = criterion(ctx, w, lambda_n)
    for _ in range(max_rounds):
        g = criterion_gradient(ctx, w, lambda_n)
        if kkt_residual(w, g) <= opts.kkt_tol * 0.5:
            break
        active = w > ACTIVE_TOL
        # Release the most violated inactive coordinate, if any.
        mu = float(np.min(g[active]))
        violated = np.flatnonzero(~active & (g < mu - 1e-14))
        if violated.size:
            active[violated[np.argmin(g[violated])]] = True
        A = np.flatnonzero(active)
        wA = w[A].copy()
        wA /= wA.sum()

        improved = False
        for _ in range(30):
            w_full = np.zeros(K)
            w_full[A] = wA
            gA = criterion_gradient(ctx, w_full, lambda_n)[A]
            if wA.size == 1 or np.max(gA) - np.min(gA) <= opts.kkt_tol * 0.25:
                break
            HA = _criterion_hessian(ctx, w_full)[np.ix_(A, A)]
            reg = 1e-12 * max(np.trace(HA) / wA.size, 1.0)
            m = wA.size
            kkt_mat = np.zeros((m + 1, m + 1))
            kkt_mat[:m, :m] = HA + reg * np.eye(m)
            kkt_mat[:m, m] = 1.0
            kkt_mat[m, :m] = 1.0
            rhs = np.concatenate([-gA, [0.0]])
            try:
                sol = scipy.linalg.solve(kkt_mat, rhs)
            except scipy.linalg.LinAlgError:
                break
            d = sol[:m]
            if not np.all(np.isfinite(d)):
                break
            # Clip the step at the nonnegativity boundary.
            neg = d < 0
            a_max = 1.0
            if neg.any():
                a_max = min(1.0, float(np.min(-wA[neg] / d[neg])))
            a = a_max
            f_cur = criterion(ctx, w_full, lambda_n)
            stepped = False
            for _ in range(40):
                w_try = wA + a * d
                w_try = np.maximum(w_try, 0.0)
                s = w_try.sum()
                if s > 0:
                    w_try /= s
                w_tf = np.zeros(K)
                w_tf[A] = w_try
                f_try = criterion(ctx, w_tf, lambda_n)
                if np.isfinite(f_try) and f_try <= f_cur + 1e-14:
                    wA = w_try
                    stepped = True
                    improved = improved or f_try < f_cur
                    break
                a *= 0.5
            if not stepped:
                break
            if np.any(wA <= ACTIVE_TOL):
                wA = np.where(wA <= ACTIVE_TOL, 0.0, wA)
                wA /= wA.sum()
                keep = wA > 0
                A = A[keep]
                wA = wA[keep]

        w_new = np.zeros(K)
        w_new[A] = wA
        f_new = criterion(ctx, w_new, lambda_n)
        if f_new <= f + 1e-14:
            w, f = w_new, f_new
        if not improved and not violated.size:
            break
    return w, f


def optimize_weights(
    ctx: CriterionContext, lambda_n: float, opts: OptOptions | None = None
) -> WeightFit:
    """Minimize the criterion over the weight simplex.

    Projected gradient descent from uniform weights, followed by an
    active-set Newton polish; the criterion is convex in w (b convex,
    theta linear in w), so any KKT point is a global minimum.  Returns
    the best iterate with ``converged=False`` when the KKT residual is
    still above tolerance after ``max_iter`` total iterations.
    """
    opts = opts or OptOptions()
    K = ctx.K
    if K == 1:
        w = np.ones(1)
        return WeightFit(
            weights=WeightVector(w),
            criterion_value=criterion(ctx, w, lambda_n),
            kkt_residual=0.0,
            converged=True,
            iterations=0,
        )

    w = np.full(K, 1.0 / K)
    f0 = criterion(ctx, w, lambda_n)
    if not np.isfinite(f0):
        raise NumericalError("criterion is not finite at the uniform weights")

    total_iters = 0
    pgd_budget = min(opts.pgd_iters, opts.max_iter)
    w, f, used = _pgd(ctx, lambda_n, w, opts)
    total_iters += used

    g = criterion_gradient(ctx, w, lambda_n)
    if kkt_residual(w, g) > opts.kkt_tol:
        w, f = _face_newton(ctx, lambda_n, w, opts)
        total_iters += 1

    # Safeguard: a vertex or the uniform point may still dominate if the
    # polish stalled; restart from the best such point once.
    probes = [np.full(K, 1.0 / K)] + [np.eye(K)[k] for k in range(K)]
    probe_vals = [criterion(ctx, p, lambda_n) for p in probes]
    best_probe = int(np.argmin(probe_vals))
    if probe_vals[best_probe] < f - opts.obj_tol:
        w2, f2 = _face_newton(ctx, lambda_n, probes[best_probe], opts)
        if f2 < f:
            w, f = w2, f2
        total_iters += 1

    # Run remaining PGD budget only if KKT is still unmet.
    g = criterion_gradient(ctx, w, lambda_n)
    res = kkt_residual(w, g)
    while res > opts.kkt_tol and total_iters < opts.max_iter:
        extra = OptOptions(
            max_iter=opts.max_iter,
            kkt_tol=opts.kkt_tol,
            obj_tol=opts.obj_tol,
            pgd_iters=min(pgd_budget, opts.max_iter - total_iters),
        )
        w, f, used = _pgd(ctx, lambda_n, w, extra)
        total_iters += max(used, 1)
        w, f = _face_newton(ctx, lambda_n, w, opts)
        g = criterion_gradient(ctx, w, lambda_n)
        new_res = kkt_residual(w, g)
        if new_res >= res - 1e-16:
            res = new_res
            break
        res = new_res

    return WeightFit(
        weights=WeightVector(w),
        criterion_value=f,
        kkt_residual=res,
        converged=bool(res <= opts.kkt_tol),
        iterations=total_iters,
    )


@dataclass
class AveragedModel:
    """Candidate set, selected weights and the combined coefficient vector."""

    candidates: list[CandidateModel]
    weights: WeightVector
    beta_combined: np.ndarray
    lambda_n: float
    criterion_value: float
    family: ExponentialFamily
    column_names: list[str]
    diagnostics: dict = field(default_factory=dict)

    @property
    def support(self) -> list[int]:
        """Columns that can carry nonzero combined coefficients."""
        cols = set()
        for c in self.candidates:
            cols.update(c.pattern.indices)
        return sorted(cols)

    def to_dict(self) -> dict:
        return {
            "family": self.family.name,
            "column_names": list(self.column_names),
            "lambda_n": self.lambda_n,
            "criterion_value": self.criterion_value,
            "weights": np.asarray(self.weights).tolist(),
            "beta_combined": self.beta_combined.tolist(),
            "candidates": [c.to_dict() for c in self.candidates],
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AveragedModel":
        return cls(
            candidates=[CandidateModel.from_dict(c) for c in d["candidates"]],
            weights=WeightVector(np.asarray(d["weights"], dtype=float)),
            beta_combined=np.asarray(d["beta_combined"], dtype=float),
            lambda_n=float(d["lambda_n"]),
            criterion_value=float(d["criterion_value"]),
            family=get_family(d["family"]),
            column_names=list(d["column_names"]),
            diagnostics=dict(d.get("diagnostics", {})),
        )


def combine_coefficients(
    candidates: list[CandidateModel], weights, p: int
) -> np.ndarray:
    """Weighted embed-and-sum of candidate coefficient vectors."""
    w = np.asarray(weights, dtype=float)
    beta = np.zeros(p)
    for wk, cand in zip(w, candidates):
        beta[list(cand.pattern.indices)] += wk * cand.beta
    return beta


def lambda_default(mode: str, n_1: int) -> float:
    """Penalty level: 2 for ``opt1``, log(n_1) for ``opt2``."""
    if n_1 < 1:
        raise ValueError("n_1 must be at least 1")
    if mode == "opt1":
        return 2.0
    if mode == "opt2":
        return float(np.log(n_1))
    raise ValueError(f"unknown lambda mode {mode!r}")


def resolve_lambda(lambda_n, n_1: int) -> float:
    """Accept a float or one of the named modes."""
    if isinstance(lambda_n, str):
        return lambda_default(lambda_n, n_1)
    value = float(lambda_n)
    if value < 0:
        raise ValueError("lambda_n must be nonnegative")
    return value


def fit_averaged(
    data: FragmentaryDataset,
    family,
    lambda_n="opt1",
    fit_opts: FitOptions | None = None,
    opt_opts: OptOptions | None = None,
    index: PatternIndex | None = None,
    candidates: list[CandidateModel] | None = None,
) -> AveragedModel:
    """Full pipeline: pattern index, per-pattern fits, weight selection.

    ``lambda_n`` may be a float or the mode strings ``"opt1"`` (2) /
    ``"opt2"`` (log of the weighting sample size).  Precomputed ``index``
    and ``candidates`` may be supplied to share fits across penalty
    settings.
    """
    family = get_family(family)
    if index is None:
        index = build_pattern_index(data)
    if candidates is None:
        candidates = fit_all_candidates(data, index, family, fit_opts)

    lead = set(index.patterns[0].indices)
    usable = [c for c in candidates if set(c.pattern.indices) <= lead]
    if len(usable) < len(candidates):
        dropped = [c.pattern.indices for c in candidates if set(c.pattern.indices) - lead]
        warnings.warn(
            f"dropping {len(dropped)} candidate(s) not contained in the weighting "
            f"pattern: {dropped}",
            stacklevel=2,
        )
    if not usable:
        raise NumericalError("no usable candidate model")

    ctx = build_criterion_context(data, index, usable, family)
    lam = resolve_lambda(lambda_n, ctx.n_cc)
    wfit = optimize_weights(ctx, lam, opt_opts)
    beta = combine_coefficients(usable, wfit.weights, data.p)
    return AveragedModel(
        candidates=usable,
        weights=wfit.weights,
        beta_combined=beta,
        lambda_n=lam,
        criterion_value=wfit.criterion_value,
        family=family,
        column_names=list(data.column_names),
        diagnostics={
            "n_weighting": ctx.n_cc,
            "kkt_residual": wfit.kkt_residual,
            "optimizer_converged": wfit.converged,
            "optimizer_iterations": wfit.iterations,
            "K": index.K,
            "weighting_pattern_is_full": index.full_first,
        },
    )


def predict(model: AveragedModel, x_full) -> tuple[float, float]:
    """Averaged prediction for a query observing the leading pattern.

    Returns ``(theta_hat, mean_hat)`` with ``mean_hat = b'(theta_hat)``.
    """
    x = np.asarray(x_full, dtype=float)
    lead = list(model.candidates[0].pattern.indices)
    vals = x[lead]
    if not np.all(np.isfinite(vals)):
        missing = [j for j, v in zip(lead, vals) if not np.isfinite(v)]
        names = [model.column_names[j] for j in missing]
        raise ValueError(f"required covariates unobserved in query: {names}")
    support = model.support
    theta = float(x[support] @ model.beta_combined[support])
    mean = float(model.family.b_prime(theta))
    return theta, mean


def predict_for_pattern(
    data: FragmentaryDataset,
    family,
    lambda_n,
    x_star,
    fit_opts: FitOptions | None = None,
    opt_opts: OptOptions | None = None,
    return_model: bool = False,
):
    """Predict for a query observing only a sub-pattern of the columns.

    The query pattern is read off the finite entries of ``x_star``
    (length p, NaN marking unobserved).  The data are restricted to those
    columns, the candidate universe is rebuilt (only patterns contained
    in the query pattern survive), weights are reselected on the
    restricted complete cases, and the query is scored.  When the query
    observes everything this reduces to the unrestricted pipeline.
    """
    x_star = np.asarray(x_star, dtype=float)
    if x_star.shape != (data.p,):
        raise DataError(f"query vector must have length {data.p}")
    observed = np.flatnonzero(np.isfinite(x_star))
    if observed.size == 0:
        raise DataError("query observes no covariate")
    target = Pattern(tuple(int(j) for j in observed))
    restricted = restrict_to(data, target)
    model = fit_averaged(restricted, family, lambda_n, fit_opts, opt_opts)
    theta, mean = predict(model, x_star[observed])
    if return_model:
        return theta, mean, model
    return theta, mean


def kl_loss(theta_hat, theta_true_or_mu, family, per_obs: bool = False) -> float:
    """Twice the summed KL divergence between true and fitted distributions.

    The second argument is the true mean vector (for the gaussian family
    the mean and the canonical parameter coincide, so the true theta is
    accepted unchanged).  Binomial means are clamped to
    ``[1e-12, 1 - 1e-12]`` before taking the canonical link; clamping
    events increment :data:`clamp_counter`.

    With ``per_obs=True`` the value is divided by the number of
    observations (the per-observation evaluation metric).
    """
    family = get_family(family)
    th = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    mu = np.atleast_1d(np.asarray(theta_true_or_mu, dtype=float))
    if th.shape != mu.shape:
        raise ValueError("theta_hat and the true mean must have equal length")
    if family.name == "binomial":
        clamped = np.clip(mu, PROB_CLAMP, 1.0 - PROB_CLAMP)
        n_clamped = int(np.sum(clamped != mu))
        if n_clamped:
            clamp_counter.add(n_clamped)
        mu = clamped
    theta0 = family.theta_from_mean(mu)
    val = 2.0 / family.phi * np.sum(family.b(th) - family.b(theta0) - mu * (th - theta0))
    if per_obs:
        val /= th.size
    return float(val)
