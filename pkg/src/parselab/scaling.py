"""Regression layer for relative-error scaling.

OLS, Gaussian random-intercept mixed models (ML or REML, profiled over the
variance ratio), likelihood-ratio tests, Spearman correlation, crossover
points and partial regression.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ScalingObservation:
    language: str
    log_train: float
    rer: float
    mattr_z: float = 0.0
    metric: str = "LAS"
    model: str = ""
    seed: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.log_train > 0:
            raise ValueError("log_train must be positive")
        for v in (self.log_train, self.rer, self.mattr_z):
            if not math.isfinite(v):
                raise ValueError("observation fields must be finite")

    def value(self, name: str) -> float:
        if name in self.extra:
            return float(self.extra[name])
        return float(getattr(self, name))


@dataclass
class OlsFit:
    names: list[str]
    coefficients: np.ndarray
    residuals: np.ndarray
    log_likelihood: float
    sigma2: float

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.coefficients)))


@dataclass
class MixedModelFit:
    names: list[str]
    fixed_effects: np.ndarray
    std_errors: np.ndarray
    random_intercept_variance: float
    residual_variance: float
    log_likelihood: float
    n_obs: int
    n_groups: int
    fitted_by: str
    iterations: int = 0
    converged: bool = True
    degenerate: bool = False

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.fixed_effects)))

    @property
    def z_values(self) -> np.ndarray:
        return self.fixed_effects / self.std_errors

    @property
    def p_values(self) -> np.ndarray:
        # Wald test against a standard normal; approximate by design
        return 2.0 * stats.norm.sf(np.abs(self.z_values))

    def predict(self, **predictors: float) -> float:
        total = 0.0
        for name, coef in zip(self.names, self.fixed_effects):
            total += coef * (1.0 if name == "intercept" else predictors.get(name, 0.0))
        return float(total)

    def summary(self) -> str:
        lines = [
            f"fitted_by: {self.fitted_by}",
            f"n_obs: {self.n_obs}",
            f"n_groups: {self.n_groups}",
            f"log_likelihood: {self.log_likelihood:.6f}",
            f"random_intercept_variance: {self.random_intercept_variance:.6g}",
            f"residual_variance: {self.residual_variance:.6g}",
        ]
        for name, b, se, p in zip(self.names, self.fixed_effects, self.std_errors, self.p_values):
            lines.append(f"beta.{name}: {b:.6f} (se {se:.6f}, p {p:.4g})")
        return "\n".join(lines)


@dataclass(frozen=True)
class LrtResult:
    chi2: float
    df: int
    p_value: float


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int


@dataclass(frozen=True)
class CrossoverEstimate:
    log10_sentences: float
    sentences: int


@dataclass
class PartialRegression:
    x_residuals: np.ndarray
    y_residuals: np.ndarray
    slope: float

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(map(float, self.x_residuals), map(float, self.y_residuals)))


def design(observations: Sequence[ScalingObservation], predictors: Sequence[str], outcome: str = "rer"):
    """Design matrix with a leading intercept, outcome vector and group labels."""
    names = ["intercept", *predictors]
    X = np.ones((len(observations), len(names)))
    for j, name in enumerate(predictors, start=1):
        X[:, j] = [o.value(name) for o in observations]
    y = np.array([o.value(outcome) for o in observations])
    groups = [o.language for o in observations]
    return X, y, groups, names


def ols(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None) -> OlsFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more observations ({n}) than coefficients ({p})")
    if np.linalg.matrix_rank(X) < p:
        raise ValueError("design matrix is rank deficient")
    Q, R = np.linalg.qr(X)
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    sigma2 = rss / n
    if sigma2 > 0:
        loglik = -0.5 * n * (LOG2PI + math.log(sigma2) + 1.0)
    else:
        loglik = math.inf
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    return OlsFit(names, beta, resid, loglik, sigma2)


def fit_ols(observations: Sequence[ScalingObservation], predictors: Sequence[str] = ("log_train",),
            outcome: str = "rer") -> OlsFit:
    X, y, _, names = design(observations, predictors, outcome)
    return ols(X, y, names)


class _RandomInterceptProfile:
    """Profiled likelihood of y = X b + a_group + e as a function of
    ratio = var(a) / var(e)."""

    def __init__(self, X, y, groups, method):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.method = method
        labels = sorted(set(groups), key=list(groups).index)
        idx = np.array([labels.index(g) for g in groups])
        self.n_groups = len(labels)
        self.sizes = np.bincount(idx, minlength=self.n_groups).astype(float)
        self.XtX = self.X.T @ self.X
        self.Xty = self.X.T @ self.y
        self.yty = float(self.y @ self.y)
        G = np.zeros((self.n_groups, len(self.y)))
        G[idx, np.arange(len(self.y))] = 1.0
        self.Xsum = G @ self.X  # per-group column sums
        self.ysum = G @ self.y

    def solve(self, ratio: float):
        c = ratio / (1.0 + ratio * self.sizes)
        XHX = self.XtX - (self.Xsum.T * c) @ self.Xsum
        XHy = self.Xty - (self.Xsum.T * c) @ self.ysum
        yHy = self.yty - float(c @ self.ysum**2)
        beta = np.linalg.solve(XHX, XHy)
        rss = max(yHy - float(beta @ XHy), 0.0)
        return beta, rss, XHX

    def loglik(self, ratio: float) -> float:
        beta, rss, XHX = self.solve(ratio)
        n, p = self.X.shape
        logdet_h = float(np.sum(np.log1p(ratio * self.sizes)))
        if rss <= 0:
            return math.inf
        if self.method == "ML":
            return -0.5 * n * (LOG2PI + math.log(rss / n) + 1.0) - 0.5 * logdet_h
        _, logdet_xhx = np.linalg.slogdet(XHX)
        m = n - p
        return -0.5 * m * (LOG2PI + math.log(rss / m) + 1.0) - 0.5 * logdet_h - 0.5 * logdet_xhx


def _maximize_log_ratio(f, lo=-25.0, hi=12.0, grid=75, tol=1e-10, max_iter=500):
    """Maximise f over exp(t) for t in [lo, hi], plus the boundary ratio 0.

    Grid bracketing followed by golden-section search; stops once an
    iteration improves the objective by less than ``tol`` and the bracket
    is narrow.
    """
    ts = np.linspace(lo, hi, grid)
    vals = [f(math.exp(t)) for t in ts]
    k = int(np.argmax(vals))
    a = ts[max(k - 1, 0)]
    b = ts[min(k + 1, grid - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    best = max(vals[k], fc, fd)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(math.exp(d))
        new_best = max(best, fc, fd)
        improvement = new_best - best
        best = new_best
        if improvement < tol and (b - a) < 1e-6:
            converged = True
            break
    t_opt = c if fc >= fd else d
    f_opt = max(fc, fd)
    if vals[k] > f_opt:
        t_opt, f_opt = ts[k], vals[k]
    f_zero = f(0.0)
    if f_zero >= f_opt:
        return 0.0, f_zero, it, converged
    return math.exp(t_opt), f_opt, it, converged


def fit_random_intercept(X, y, groups, names=None, method: str = "REML",
                         ratio: float | None = None, tol: float = 1e-10, max_iter: int = 500) -> MixedModelFit:
    """Random-intercept linear model on raw arrays.

    ``ratio`` pins var(intercept)/var(residual); ratio=0 reproduces OLS
    fixed effects. Falls back to OLS (with a warning) when no group has
    two or more observations.
    """
    method = method.upper()
    if method not in ("ML", "REML"):
        raise ValueError("method must be 'ML' or 'REML'")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    groups = list(groups)
    n, p = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if len(set(groups)) < 2:
        raise ValueError("mixed model needs at least two groups")
    if n <= p or np.linalg.matrix_rank(X) < p:
        raise ValueError("design matrix is rank deficient or too small")
    prof = _RandomInterceptProfile(X, y, groups, method)
    degenerate = False
    iterations = 0
    converged = True
    if ratio is None:
        if prof.sizes.max() < 2:
            warnings.warn("one observation per group: random intercept unidentifiable, fitting OLS",
                          stacklevel=2)
            ratio, degenerate = 0.0, True
            ll = prof.loglik(0.0)
        else:
            ratio, ll, iterations, converged = _maximize_log_ratio(prof.loglik, tol=tol, max_iter=max_iter)
            if not converged:
                raise RuntimeError(
                    f"variance-ratio search did not converge in {max_iter} iterations "
                    f"(last ratio {ratio:.6g}, loglik {ll:.10f})"
                )
    else:
        if ratio < 0:
            raise ValueError("variance ratio must be nonnegative")
        ll = prof.loglik(ratio)
    beta, rss, XHX = prof.solve(ratio)
    sigma2 = rss / (n if method == "ML" else n - p)
    cov = sigma2 * np.linalg.inv(XHX)
    return MixedModelFit(
        names=names,
        fixed_effects=beta,
        std_errors=np.sqrt(np.diag(cov)),
        random_intercept_variance=ratio * sigma2,
        residual_variance=sigma2,
        log_likelihood=float(ll),
        n_obs=n,
        n_groups=prof.n_groups,
        fitted_by=method,
        iterations=iterations,
        converged=converged,
        degenerate=degenerate,
    )


def fit_mixed_model(observations: Sequence[ScalingObservation], predictors: Sequence[str] = ("log_train",),
                    method: str = "REML", outcome: str = "rer", **kwargs) -> MixedModelFit:
    X, y, groups, names = design(observations, predictors, outcome)
    return fit_random_intercept(X, y, groups, names, method=method, **kwargs)


def chi2_sf(x: float, df: int) -> float:
    return float(stats.chi2.sf(x, df))


def likelihood_ratio_test(fit_null: MixedModelFit, fit_alt: MixedModelFit) -> LrtResult:
    if fit_null.fitted_by != "ML" or fit_alt.fitted_by != "ML":
        raise ValueError("likelihood-ratio tests on fixed effects need ML fits, not REML")
    if fit_null.n_obs != fit_alt.n_obs:
        raise ValueError("models were fitted to different observations")
    if not set(fit_null.names) < set(fit_alt.names):
        raise ValueError("null model predictors must be a strict subset of the alternative's")
    df = len(fit_alt.names) - len(fit_null.names)
    chi2 = max(0.0, 2.0 * (fit_alt.log_likelihood - fit_null.log_likelihood))
    return LrtResult(chi2=chi2, df=df, p_value=chi2_sf(chi2, df))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    if len(x) != len(y):
        raise ValueError("inputs differ in length")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 pairs")
    rx, ry = average_ranks(x), average_ranks(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise ValueError("correlation undefined for a constant input")
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return CorrelationResult(rho=rho, p_value=p, n=n)


def crossover_from_log10(log10_sentences: float) -> CrossoverEstimate:
    return CrossoverEstimate(float(log10_sentences), int(round(10.0 ** log10_sentences)))


def crossover(fit, predictor: str = "log_train") -> CrossoverEstimate:
    """Training size where the fitted curve crosses zero.

    Other predictors are held at 0 (their standardized mean).
    """
    params = fit.params
    slope = params[predictor]
    if not slope < 0:
        raise ValueError(f"slope on {predictor} is {slope:.4g}; the curve never crosses zero from above")
    return crossover_from_log10(-params["intercept"] / slope)


def partial_regression(observations: Sequence[ScalingObservation], focal: str = "mattr_z",
                       controls: Sequence[str] = ("log_train",), outcome: str = "rer") -> PartialRegression:
    """Residualize outcome and focal predictor on the controls, then regress."""
    Xc, y, _, _ = design(observations, controls, outcome)
    x = np.array([o.value(focal) for o in observations])
    return partial_regression_arrays(Xc, x, y)


def partial_regression_arrays(controls: np.ndarray, x: np.ndarray, y: np.ndarray) -> PartialRegression:
    ex = ols(controls, x).residuals
    ey = ols(controls, y).residuals
    scale = max(float(np.abs(x).max()), 1.0)
    if float(np.sqrt(ex @ ex)) <= 1e-10 * scale * math.sqrt(len(x)):
        raise ValueError("focal predictor is collinear with the controls")
    slope = float(ex @ ey / (ex @ ex))
    return PartialRegression(ex, ey, slope)
