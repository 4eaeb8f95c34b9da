"""Outcome-association statistics for conversation-level alignment scores.

Three estimators per (outcome, model, score-type) cell: ordinary least
squares (unadjusted), OLS with demographic covariates (adjusted), and a
clinician random-intercept linear mixed model fit by REML, profiled down to
a one-dimensional search over the variance ratio lambda = sigma_u^2 /
sigma_e^2. Benjamini-Hochberg step-up correction runs over the mixed-model
p-values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, stats as spstats

from .errors import (InvalidP, NonConvergence, RankDeficient, Singular,
                     TooFewRows)

# Reference levels for one-hot encoding; a missing category becomes its own
# explicit level rather than dropping the row.
REFERENCE_LEVELS = {"sex": "male", "race": "white", "arm": "usual-care"}
MISSING_LEVEL = "missing"

TRANSFORMS = ("identity", "log_shift", "rank_inverse_normal")


@dataclass(frozen=True)
class RegressionSpec:
    outcome: str                       # "option12" | "dcs"
    model_id: str
    ca_type: str                       # "max" | "min" | "absmax" | "absmin"
    covariates: tuple = ()             # subset of ("age", "sex", "race", "arm")
    cluster: str | None = None         # "clinician_id" or None
    transform: str = "identity"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")


@dataclass(frozen=True)
class FitResult:
    estimate: float
    se: float
    p: float
    n_used: int
    method: str                        # "OLS" | "LMM"
    degenerate: bool = False
    lambda_: float | None = None       # variance ratio at the REML optimum
    sigma_e2: float | None = None
    sigma_u2: float | None = None


@dataclass(frozen=True)
class MultipleTestReport:
    m: int
    q: float
    sorted_pvalues: tuple
    rejected: tuple                    # flags aligned with the input order
    n_rejected: int


@dataclass
class DesignMatrix:
    y: np.ndarray
    X: np.ndarray
    columns: list
    cluster_ids: list | None
    n_used: int
    predictor_column: int = 1          # intercept first, predictor second


def build_design(rows: Sequence[Mapping], spec: RegressionSpec) -> DesignMatrix:
    """Assemble y and X for one regression cell.

    Rows lacking the outcome, the predictor (blank alignment score), a
    numeric covariate, or — for mixed models — the cluster id are dropped.
    Missing categorical levels become an explicit "missing" category.
    """
    usable = []
    for row in rows:
        if row.get(spec.outcome) is None or row.get("predictor") is None:
            continue
        if "age" in spec.covariates and row.get("age") is None:
            continue
        if spec.cluster is not None and row.get(spec.cluster) is None:
            continue
        usable.append(row)
    n = len(usable)
    if n == 0:
        raise TooFewRows("no usable rows after dropping missing values")

    columns = ["intercept", "predictor"]
    data = [np.ones(n), np.array([float(r["predictor"]) for r in usable])]
    for cov in spec.covariates:
        if cov == "age":
            columns.append("age")
            data.append(np.array([float(r["age"]) for r in usable]))
            continue
        levels = sorted({(r.get(cov) or MISSING_LEVEL) for r in usable})
        reference = REFERENCE_LEVELS.get(cov, levels[0])
        if reference not in levels:
            reference = levels[0]
        for level in levels:
            if level == reference:
                continue
            columns.append(f"{cov}[{level}]")
            data.append(np.array(
                [1.0 if (r.get(cov) or MISSING_LEVEL) == level else 0.0
                 for r in usable]))

    X = np.column_stack(data)
    y = np.array([float(r[spec.outcome]) for r in usable])
    clusters = ([str(r[spec.cluster]) for r in usable]
                if spec.cluster is not None else None)
    return DesignMatrix(y=y, X=X, columns=columns, cluster_ids=clusters, n_used=n)


def _check_rank(X: np.ndarray) -> None:
    n, p = X.shape
    if n <= p:
        raise TooFewRows(f"n={n} rows <= p={p} parameters")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficient("design matrix is rank deficient")


def fit_linear(spec: RegressionSpec, rows: Sequence[Mapping]) -> FitResult:
    """OLS estimate, SE and two-sided t-test p for the predictor coefficient.

    SE uses sigma^2 (X'X)^-1 with the n-p denominator. An (essentially)
    exact fit is flagged degenerate with SE 0 and p 0.
    """
    design = build_design(rows, spec)
    y, X = design.y, design.X
    _check_rank(X)
    n, p = X.shape
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = n - p
    sigma2 = rss / dof
    degenerate = rss <= 1e-12 * max(1.0, float(y @ y))
    xtx_inv = np.linalg.inv(X.T @ X)
    j = design.predictor_column
    se = float(np.sqrt(max(sigma2 * xtx_inv[j, j], 0.0)))
    if degenerate or se == 0.0:
        return FitResult(estimate=float(beta[j]), se=0.0, p=0.0,
                         n_used=n, method="OLS", degenerate=True)
    tstat = beta[j] / se
    pval = 2.0 * float(spstats.t.sf(abs(tstat), dof))
    return FitResult(estimate=float(beta[j]), se=se, p=pval,
                     n_used=n, method="OLS")


def _cluster_blocks(cluster_ids: Sequence[str]) -> list:
    order: dict = {}
    for i, cid in enumerate(cluster_ids):
        order.setdefault(cid, []).append(i)
    return [np.array(idx) for idx in order.values()]


def _gls_pieces(y, X, blocks, lam):
    """X'V0^-1 X, X'V0^-1 y, and the REML quadratic/log-det terms.

    V0 = I + lam * Z Z' is block diagonal with blocks I + lam*J, whose
    inverse is I - (lam / (1 + lam*n_j)) J and whose determinant is
    1 + lam*n_j — everything reduces to per-cluster sums.
    """
    p = X.shape[1]
    A = np.zeros((p, p))
    b = np.zeros(p)
    logdet_v = 0.0
    for idx in blocks:
        nj = len(idx)
        Xj, yj = X[idx], y[idx]
        w = lam / (1.0 + lam * nj)
        sx = Xj.sum(axis=0)
        sy = float(yj.sum())
        A += Xj.T @ Xj - w * np.outer(sx, sx)
        b += Xj.T @ yj - w * sx * sy
        logdet_v += np.log1p(lam * nj)
    return A, b, logdet_v


def _reml_deviance(y, X, blocks, lam):
    n, p = X.shape
    A, b, logdet_v = _gls_pieces(y, X, blocks, lam)
    try:
        beta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise Singular(f"GLS normal equations singular at lambda={lam}") from exc
    quad = 0.0
    resid = y - X @ beta
    for idx in blocks:
        rj = resid[idx]
        nj = len(idx)
        w = lam / (1.0 + lam * nj)
        quad += float(rj @ rj) - w * float(rj.sum()) ** 2
    quad = max(quad, np.finfo(float).tiny)
    sign, logdet_a = np.linalg.slogdet(A)
    if sign <= 0:
        raise Singular(f"X'V^-1X not positive definite at lambda={lam}")
    return logdet_v + logdet_a + (n - p) * np.log(quad), beta, quad, A


LAMBDA_UPPER = 1e6


def fit_random_intercept(spec: RegressionSpec, rows: Sequence[Mapping],
                         cluster: str | None = None,
                         lambda_fixed: float | None = None) -> FitResult:
    """Random-intercept linear mixed model fit by profiled REML.

    The variance ratio lambda is found by bounded scalar minimization of the
    REML deviance (tolerance 1e-8); beta and its SEs come from the GLS solve
    at the optimum, with Wald t-tests on n-p residual degrees of freedom.
    lambda_fixed skips the search (lambda_fixed=0 reproduces OLS exactly).
    """
    if cluster is not None and spec.cluster != cluster:
        spec = replace(spec, cluster=cluster)
    if spec.cluster is None:
        raise ValueError("fit_random_intercept requires a cluster column")
    design = build_design(rows, spec)
    y, X = design.y, design.X
    _check_rank(X)
    n, p = X.shape
    blocks = _cluster_blocks(design.cluster_ids)
    if len(blocks) < 2:
        raise ValueError("random-intercept model needs at least 2 clusters")

    trace: list = []
    if lambda_fixed is not None:
        lam = float(lambda_fixed)
    else:
        def objective(lam):
            dev = _reml_deviance(y, X, blocks, lam)[0]
            trace.append((lam, dev))
            return dev

        result = optimize.minimize_scalar(
            objective, bounds=(0.0, LAMBDA_UPPER), method="bounded",
            options={"xatol": 1e-8})
        if not result.success:
            raise NonConvergence("REML lambda search did not converge",
                                 trace=trace)
        lam = float(result.x)
        # The bounded search cannot land exactly on the boundary; snap to 0
        # when the deviance there is no worse.
        if lam < 1e-7 and _reml_deviance(y, X, blocks, 0.0)[0] <= \
                _reml_deviance(y, X, blocks, lam)[0]:
            lam = 0.0

    _, beta, quad, A = _reml_deviance(y, X, blocks, lam)
    dof = n - p
    sigma_e2 = quad / dof
    cov_beta = sigma_e2 * np.linalg.inv(A)
    j = design.predictor_column
    se = float(np.sqrt(max(cov_beta[j, j], 0.0)))
    degenerate = se == 0.0
    if degenerate:
        pval = 0.0
    else:
        tstat = beta[j] / se
        pval = 2.0 * float(spstats.t.sf(abs(tstat), dof))
    return FitResult(estimate=float(beta[j]), se=se, p=pval, n_used=n,
                     method="LMM", degenerate=degenerate, lambda_=lam,
                     sigma_e2=float(sigma_e2), sigma_u2=float(lam * sigma_e2))


def bh_adjust(pvalues: Sequence[float], q: float = 0.2) -> MultipleTestReport:
    """Benjamini-Hochberg step-up: reject the largest prefix of the sorted
    p-values with p_(i) <= (i/m)*q. Tied p-values stand or fall together."""
    ps = [float(p) for p in pvalues]
    if not ps:
        raise InvalidP("need at least one p-value")
    for p in ps:
        if not (0.0 <= p <= 1.0) or not np.isfinite(p):
            raise InvalidP(f"p-value {p} outside [0, 1]")
    m = len(ps)
    order = sorted(range(m), key=lambda i: ps[i])
    cutoff = 0
    for rank, idx in enumerate(order, start=1):
        if ps[idx] <= rank / m * q:
            cutoff = rank
    threshold = ps[order[cutoff - 1]] if cutoff else -1.0
    rejected = tuple(p <= threshold for p in ps)
    return MultipleTestReport(m=m, q=q,
                              sorted_pvalues=tuple(ps[i] for i in order),
                              rejected=rejected, n_rejected=sum(rejected))


LOG_SHIFT_EPS = 1e-6


def normalize_scores(values: Sequence, method: str = "identity",
                     eps: float = LOG_SHIFT_EPS) -> tuple:
    """Deterministic monotone transform; blanks (None) pass through.

    log_shift maps x to log(x - min + eps); rank_inverse_normal maps average
    ranks r through the Blom plotting position Phi^-1((r - 3/8)/(n + 1/4)).
    Returns (transformed values, metadata describing the transform).
    """
    if method not in TRANSFORMS:
        raise ValueError(f"unknown transform {method!r}")
    present_idx = [i for i, v in enumerate(values) if v is not None]
    out: list = list(values)
    meta: dict = {"method": method}
    if method == "identity" or not present_idx:
        return out, meta
    present = np.array([float(values[i]) for i in present_idx])
    if method == "log_shift":
        shift = float(present.min())
        meta.update({"shift": shift, "eps": eps})
        transformed = np.log(present - shift + eps)
    else:
        ranks = spstats.rankdata(present, method="average")
        n = len(present)
        transformed = spstats.norm.ppf((ranks - 3.0 / 8.0) / (n + 0.25))
        meta.update({"n": n})
    for i, value in zip(present_idx, transformed):
        out[i] = float(value)
    return out, meta


def skewness_report(values: Sequence) -> dict:
    """Sample skewness of the non-blank values, to inform transform choice."""
    present = np.array([float(v) for v in values if v is not None])
    if len(present) < 3 or float(present.std(ddof=1)) == 0.0:
        return {"n": int(len(present)), "skewness": 0.0}
    return {"n": int(len(present)),
            "skewness": float(spstats.skew(present, bias=False))}
