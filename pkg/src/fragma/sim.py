"""Monte Carlo comparison of the averaging method against its baselines.

One replication draws equicorrelated covariates, a Bernoulli response
from a logistic truth, then imposes group-wise availability: the last
covariate is withheld from every subject (so every candidate model is
misspecified) and each of three 4-covariate groups is observed exactly
when its leading covariate falls below 1.  Methods are scored by the
per-observation KL-type loss between the true and fitted response
distributions on the complete cases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .averaging import (
    build_criterion_context,
    kl_loss,
    optimize_weights,
)
from .baselines import fit_glasso, fit_imp, fit_smoothed_ic
from .errors import NumericalError
from .glm import BINOMIAL, FitOptions, fit_all_candidates
from .patterns import FragmentaryDataset, build_pattern_index

BETA_CASES = ("decay", "flat", "rise")
ALL_METHODS = ("opt1", "opt2", "cc", "saic", "sbic", "imp1", "imp2", "glasso")

N_GROUPS = 3
GROUP_WIDTH = 4


def beta_vector(case: str, p: int) -> np.ndarray:
    """True coefficient vectors of the three signal shapes."""
    j = np.arange(1, p + 1)
    if case == "decay":
        return 0.4 / j
    if case == "flat":
        return 0.1 * np.ones(p)
    if case == "rise":
        return 0.2 / (p - j + 1)
    raise ValueError(f"unknown beta case {case!r}; choose from {BETA_CASES}")


@dataclass(frozen=True)
class SimConfig:
    """One simulation cell."""

    n: int = 400
    p: int = 14
    beta_case: str = "decay"
    rho: float = 0.3
    reps: int = 50
    seed: int = 0
    methods: tuple = ("opt1", "opt2", "cc", "saic", "sbic", "imp1", "imp2")

    def __post_init__(self):
        if self.n < self.p:
            raise ValueError("n must be at least p")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.beta_case not in BETA_CASES:
            raise ValueError(f"unknown beta case {self.beta_case!r}")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "beta_case": self.beta_case,
            "rho": self.rho,
            "reps": self.reps,
            "seed": self.seed,
            "methods": list(self.methods),
        }


@dataclass
class TrueSignal:
    """Per-subject true linear predictor and response mean.

    ``x_full`` keeps the unmasked covariate draw so invariants of the
    missingness mechanism can be checked exhaustively.
    """

    theta: np.ndarray
    mean: np.ndarray
    x_full: np.ndarray = None


@dataclass
class SimResult:
    """Replication-level losses plus per-method summaries."""

    methods: list[str]
    per_rep_kl: np.ndarray
    cc_fraction_per_rep: np.ndarray
    summary: dict
    diagnostics: dict = field(default_factory=dict)


def _rep_rng(seed: int, rep: int, attempt: int = 0) -> np.random.Generator:
    """Counter-based per-replication stream (Philox keyed on seed/rep/attempt)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=(int(seed), int(rep), int(attempt))))
    )


def sim_groups(p: int = 14) -> dict[str, list[int]]:
    """The three availability groups as 0-based column index lists."""
    groups = {}
    for s in range(N_GROUPS):
        start = 1 + s * GROUP_WIDTH
        groups[f"group{s + 1}"] = list(range(start, start + GROUP_WIDTH))
    return groups


def generate_replication(
    cfg: SimConfig, rep: int, attempt: int = 0
) -> tuple[FragmentaryDataset, TrueSignal]:
    """Draw one replication of the design.

    Covariates beyond the intercept share mean 1, variance 1 and pairwise
    covariance rho (one-factor construction, exact for equicorrelation).
    The last covariate is deleted from every subject; group s of four
    covariates is observed exactly when its leading covariate is below 1.
    """
    rng = _rep_rng(cfg.seed, rep, attempt)
    n, p = cfg.n, cfg.p
    beta = beta_vector(cfg.beta_case, p)

    z0 = rng.standard_normal(n)
    z = rng.standard_normal((n, p - 1))
    x = np.empty((n, p))
    x[:, 0] = 1.0
    x[:, 1:] = 1.0 + np.sqrt(cfg.rho) * z0[:, None] + np.sqrt(1.0 - cfg.rho) * z

    theta = x @ beta
    mean = expit(theta)
    y = (rng.random(n) < mean).astype(float)

    mask = np.zeros((n, p), dtype=bool)
    mask[:, 0] = True
    for s in range(N_GROUPS):
        lead = 1 + s * GROUP_WIDTH
        avail = x[:, lead] < 1.0
        mask[:, lead : lead + GROUP_WIDTH] = avail[:, None]
    mask[:, p - 1] = False

    data = FragmentaryDataset(
        y=y,
        x=np.where(mask, x, np.nan),
        mask=mask,
        column_names=[f"X{j}" for j in range(1, p + 1)],
    )
    return data, TrueSignal(theta=theta, mean=mean, x_full=x)


@dataclass
class _RepFits:
    """Shared per-replication pipeline pieces reused across methods."""

    index: object
    candidates: list
    ctx: object
    cc_rows: np.ndarray


def _shared_fits(
    data: FragmentaryDataset,
    fit_opts: FitOptions | None = None,
    index=None,
) -> _RepFits:
    if index is None:
        index = build_pattern_index(data)
    candidates = fit_all_candidates(data, index, BINOMIAL, fit_opts)
    # The withheld last covariate makes the leading pattern non-full by design.
    ctx = build_criterion_context(data, index, candidates, BINOMIAL, warn_incomplete=False)
    return _RepFits(index=index, candidates=candidates, ctx=ctx, cc_rows=index.s_sets[0])


def evaluate_method(
    data: FragmentaryDataset,
    truth: TrueSignal,
    method: str,
    shared: _RepFits | None = None,
    seed: int = 0,
    diagnostics: dict | None = None,
) -> float:
    """Per-observation KL loss of one method's complete-case predictions."""
    if shared is None:
        shared = _shared_fits(data)
    ctx = shared.ctx
    mu_cc = truth.mean[shared.cc_rows]

    if method in ("opt1", "opt2"):
        lam = 2.0 if method == "opt1" else float(np.log(ctx.n_cc))
        wfit = optimize_weights(ctx, lam)
        theta_cc = ctx.theta_matrix @ np.asarray(wfit.weights)
        if diagnostics is not None:
            diagnostics.setdefault("kkt_residuals", []).append(wfit.kkt_residual)
    elif method == "cc":
        theta_cc = ctx.theta_matrix[:, 0]
    elif method in ("saic", "sbic"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit_smoothed_ic(
                data,
                BINOMIAL,
                flavor=method[1:],
                index=shared.index,
                candidates=shared.candidates,
            )
        theta_cc = ctx.theta_matrix @ np.asarray(res.weights)
    elif method in ("imp1", "imp2"):
        res = fit_imp(data, BINOMIAL, lambda_mode="opt1" if method == "imp1" else "opt2",
                      index=shared.index)
        x0 = data.filled(0.0)[shared.cc_rows]
        theta_cc = x0[:, res.support] @ res.beta_effective[res.support]
    elif method == "glasso":
        res = fit_glasso(data, BINOMIAL, sim_groups(data.p), seed=seed, path_tol=1e-6)
        theta_cc = data.x[np.ix_(shared.cc_rows, res.support)] @ res.beta_effective[res.support]
    else:
        raise ValueError(f"unknown method {method!r}")

    return kl_loss(theta_cc, mu_cc, BINOMIAL, per_obs=True)


def run_study(cfg: SimConfig, fit_opts: FitOptions | None = None) -> SimResult:
    """Run all replications of one cell; deterministic given cfg.seed."""
    methods = list(cfg.methods)
    per_rep = np.full((cfg.reps, len(methods)), np.nan)
    cc_frac = np.zeros(cfg.reps)
    diagnostics: dict = {"regenerated": 0, "failures": []}

    min_cc = cfg.p - 1  # leading pattern has p - 1 columns
    for rep in range(cfg.reps):
        attempt = 0
        while True:
            data, truth = generate_replication(cfg, rep, attempt)
            index = build_pattern_index(data)
            # Degenerate draws (some candidate with fewer subjects than
            # columns) are regenerated from the next sub-stream, before
            # any fitting happens.
            sizes_ok = index.patterns[0].size == min_cc and all(
                index.s_sets[k].size >= index.patterns[k].size
                for k in range(index.K)
            )
            if sizes_ok:
                break
            attempt += 1
            diagnostics["regenerated"] += 1
            if attempt > 20:
                raise NumericalError(f"replication {rep}: no usable draw in 20 attempts")
        shared = _shared_fits(data, fit_opts, index=index)
        cc_frac[rep] = shared.cc_rows.size / data.n
        for m, method in enumerate(methods):
            try:
                per_rep[rep, m] = evaluate_method(
                    data, truth, method, shared=shared, seed=cfg.seed + rep,
                    diagnostics=diagnostics,
                )
            except NumericalError as exc:
                diagnostics["failures"].append({"rep": rep, "method": method, "error": str(exc)})

    summary = {}
    for m, method in enumerate(methods):
        col = per_rep[:, m]
        ok = np.isfinite(col)
        summary[method] = {
            "median": float(np.median(col[ok])) if ok.any() else float("nan"),
            "q25": float(np.percentile(col[ok], 25)) if ok.any() else float("nan"),
            "q75": float(np.percentile(col[ok], 75)) if ok.any() else float("nan"),
            "mean": float(np.mean(col[ok])) if ok.any() else float("nan"),
            "failures": int((~ok).sum()),
        }
    return SimResult(
        methods=methods,
        per_rep_kl=per_rep,
        cc_fraction_per_rep=cc_frac,
        summary=summary,
        diagnostics=diagnostics,
    )
