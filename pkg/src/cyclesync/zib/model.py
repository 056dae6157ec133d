"""Zero-inflated beta mixture model with dyad random effects.

Outcome for dyad g, year t: exactly zero with probability pi, otherwise
Beta(mu*phi, (1-mu)*phi) on (0,1), with logit links for mu and pi and a log
link for phi. The mean and zero equations carry covariate blocks plus year
dummies; the precision equation carries an intercept, year dummies, and a
dyad random intercept only.

Each dyad owns three correlated random intercepts (mean, zero, precision
equations), parameterized non-centered: u_g = diag(sd) L z_g with z standard
normal and L the Cholesky factor of the effect correlation, which carries an
LKJ prior. Positive scales are sampled on the log axis and the correlation
factor through tanh canonical partial correlations, with the usual Jacobian
corrections, so the sampler sees a fully unconstrained vector.

Three prior regimes are supported for population-level coefficients:
strong Normal(0, 0.5), moderate Normal(0, 1), and an unregularized flat
regime; intercepts, scale, and correlation priors follow the regime table.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaln, expit

from ..panel import RegressionDataset
from . import kernels

N_EFFECTS = 3  # one random intercept per equation: mu, zi, phi
_EQ = ("mu", "zi", "phi")


# ---------------------------------------------------------------------------
# Prior regimes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorRegime:
    """One column of the prior-structure table."""

    name: str
    coef: tuple | None              # None = improper flat
    mu_intercept: tuple
    phi_intercept: tuple
    zi_intercept: tuple
    sd: tuple
    lkj_eta: float


PRIOR_REGIMES = {
    "strong": PriorRegime(
        name="strong",
        coef=("normal", 0.5),
        mu_intercept=("student_t", 3.0, 2.5),
        phi_intercept=("normal", 1.0),
        zi_intercept=("normal", 1.5),
        sd=("exponential", 1.0),
        lkj_eta=2.0,
    ),
    "moderate": PriorRegime(
        name="moderate",
        coef=("normal", 1.0),
        mu_intercept=("student_t", 3.0, 2.5),
        phi_intercept=("normal", 1.0),
        zi_intercept=("normal", 1.5),
        sd=("exponential", 1.0),
        lkj_eta=2.0,
    ),
    "none": PriorRegime(
        name="none",
        coef=None,
        mu_intercept=("student_t", 3.0, 2.5),
        phi_intercept=("student_t", 3.0, 2.5),
        zi_intercept=("logistic",),
        sd=("half_t", 3.0, 2.5),
        lkj_eta=1.0,
    ),
}


_ZERO = np.zeros(1)


def _prior_lp_grad(kind: tuple | None, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Log density (up to a constant) and gradient of one prior family.

    ``x`` must already be a 1-d float array (a view into the flat vector).
    """
    if kind is None:
        return 0.0, _ZERO
    name = kind[0]
    if name == "normal":
        inv_var = 1.0 / kind[1] ** 2
        g = -inv_var * x
        return 0.5 * float(np.dot(g, x)), g
    if name in ("student_t", "half_t"):
        df, scale = kind[1], kind[2]
        q = x**2 / (df * scale**2)
        lp = float(-0.5 * (df + 1.0) * np.sum(np.log1p(q)))
        grad = -(df + 1.0) * x / (df * scale**2 + x**2)
        return lp, grad
    if name == "logistic":
        ax = np.abs(x)
        lp = float(np.sum(-ax - 2.0 * np.log1p(np.exp(-ax))))
        return lp, 1.0 - 2.0 * expit(x)
    if name == "exponential":
        rate = kind[1]
        return float(-rate * np.sum(x)), np.full_like(x, -rate)
    raise ValueError(f"unknown prior kind {kind!r}")


# ---------------------------------------------------------------------------
# Correlation Cholesky transform (tanh canonical partial correlations)
# ---------------------------------------------------------------------------

def chol_corr_forward(raw: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    """Unconstrained vector -> Cholesky factor of a correlation matrix.

    Returns (L, log Jacobian of the map). L has unit rows in the sense that
    L L^T has a unit diagonal.
    """
    w = np.tanh(raw)
    L = np.zeros((k, k))
    L[0, 0] = 1.0
    with np.errstate(divide="ignore"):
        logjac = float(np.sum(np.log1p(-(w**2))))
    idx = 0
    for i in range(1, k):
        rem = 1.0
        for j in range(i):
            if rem <= 0.0:  # saturated partial correlation; caller rejects
                return L, -np.inf
            logjac += 0.5 * math.log(rem)
            L[i, j] = w[idx] * math.sqrt(rem)
            rem = max(rem - L[i, j] ** 2, 0.0)
            idx += 1
        L[i, i] = math.sqrt(rem)
    return L, logjac


def chol_corr_backward(raw: np.ndarray, k: int, dL: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`chol_corr_forward`.

    ``dL`` holds the adjoints of every L entry (diagonal included). The log
    Jacobian is assumed to enter the objective with unit weight, so its
    partials are folded in here.
    """
    w = np.tanh(raw)
    draw = np.zeros_like(raw)
    idx = 0
    for i in range(1, k):
        rems = np.empty(i + 1)
        rems[0] = 1.0
        row = np.empty(i)
        for j in range(i):
            row[j] = w[idx + j] * math.sqrt(rems[j])
            rems[j + 1] = max(rems[j] - row[j] ** 2, 0.0)
        if rems.min() <= 0.0:  # degenerate point, density is -inf anyway
            return draw
        g_rem = dL[i, i] * 0.5 / math.sqrt(rems[i])
        for j in range(i - 1, -1, -1):
            gl = dL[i, j] + g_rem * (-2.0 * row[j])
            g_w = gl * math.sqrt(rems[j])
            g_rem = g_rem + gl * w[idx + j] * 0.5 / math.sqrt(rems[j]) + 0.5 / rems[j]
            draw[idx + j] = g_w * (1.0 - w[idx + j] ** 2) - 2.0 * w[idx + j]
        idx += i
    return draw


@lru_cache(maxsize=None)
def _lkj_coeffs(k: int, eta: float) -> np.ndarray:
    """Per-row coefficients of log L_ii in the LKJ Cholesky density."""
    i = np.arange(k)
    c = k - i + 2.0 * eta - 3.0
    c[0] = 0.0
    return c


# ---------------------------------------------------------------------------
# Design, layout, parameters
# ---------------------------------------------------------------------------

@dataclass
class ZibDesign:
    """Fixed data for one fit: outcome, three design blocks, dyad grouping."""

    y: np.ndarray
    is_zero: np.ndarray
    X_mu: np.ndarray
    X_zi: np.ndarray
    X_phi: np.ndarray
    dyad_index: np.ndarray
    n_dyads: int
    mu_names: list[str]
    zi_names: list[str]
    phi_names: list[str]
    n_clamped_ones: int = 0

    @property
    def n_rows(self) -> int:
        return self.y.size

    @property
    def layout(self) -> "ParamLayout":
        cached = getattr(self, "_layout", None)
        if cached is None:
            cached = ParamLayout(len(self.mu_names), len(self.zi_names),
                                 len(self.phi_names), self.n_dyads)
            object.__setattr__(self, "_layout", cached)
        return cached


class ParamLayout:
    """Offsets of the flat unconstrained parameter vector."""

    def __init__(self, p_mu: int, p_zi: int, p_phi: int, n_dyads: int):
        self.p_mu, self.p_zi, self.p_phi, self.n_dyads = p_mu, p_zi, p_phi, n_dyads
        n_corr = N_EFFECTS * (N_EFFECTS - 1) // 2
        sizes = {
            "alpha_mu": 1, "beta_mu": p_mu,
            "alpha_zi": 1, "beta_zi": p_zi,
            "alpha_phi": 1, "beta_phi": p_phi,
            "log_sd": N_EFFECTS, "corr_raw": n_corr,
            "z": N_EFFECTS * n_dyads,
        }
        self.slices: dict[str, slice] = {}
        off = 0
        for key, size in sizes.items():
            self.slices[key] = slice(off, off + size)
            off += size
        self.dim = off

    def view(self, theta: np.ndarray, key: str) -> np.ndarray:
        return theta[self.slices[key]]

    def names(self, design: ZibDesign) -> list[str]:
        out = ["alpha_mu"]
        out += [f"beta_mu[{c}]" for c in design.mu_names]
        out.append("alpha_zi")
        out += [f"beta_zi[{c}]" for c in design.zi_names]
        out.append("alpha_phi")
        out += [f"beta_phi[{c}]" for c in design.phi_names]
        out += [f"log_sd_u[{e}]" for e in _EQ]
        pairs = [(i, j) for i in range(1, N_EFFECTS) for j in range(i)]
        out += [f"corr_raw[{_EQ[i]},{_EQ[j]}]" for i, j in pairs]
        out += [f"z[{g},{e}]" for g in range(self.n_dyads) for e in _EQ]
        return out

    def population_level(self, design: ZibDesign) -> list[str]:
        """Names of intercepts and coefficients (the table rows)."""
        names = self.names(design)
        keep = 3 + self.p_mu + self.p_zi + self.p_phi
        return names[:keep]


@dataclass
class ZibParams:
    """Constrained parameter view used by predictors and generators."""

    alpha_mu: float
    alpha_zi: float
    alpha_phi: float
    beta_mu: np.ndarray
    beta_zi: np.ndarray
    beta_phi: np.ndarray
    sd_u: np.ndarray            # (3,)
    L_u: np.ndarray             # (3,3) correlation Cholesky factor
    u: np.ndarray               # (n_dyads, 3) realized effects

    @classmethod
    def from_unconstrained(cls, theta: np.ndarray, layout: ParamLayout) -> "ZibParams":
        sd = np.exp(layout.view(theta, "log_sd"))
        L, _ = chol_corr_forward(layout.view(theta, "corr_raw"), N_EFFECTS)
        z = layout.view(theta, "z").reshape(layout.n_dyads, N_EFFECTS)
        return cls(
            alpha_mu=float(layout.view(theta, "alpha_mu")[0]),
            alpha_zi=float(layout.view(theta, "alpha_zi")[0]),
            alpha_phi=float(layout.view(theta, "alpha_phi")[0]),
            beta_mu=layout.view(theta, "beta_mu").copy(),
            beta_zi=layout.view(theta, "beta_zi").copy(),
            beta_phi=layout.view(theta, "beta_phi").copy(),
            sd_u=sd,
            L_u=L,
            u=(z @ L.T) * sd,
        )


def build_design(
    dataset: RegressionDataset,
    mu_cols: list[str],
    zi_cols: list[str],
    phi_cols: list[str] | None = None,
    outcome: str | None = None,
) -> ZibDesign:
    """Assemble design blocks from dataset columns.

    Exact outcome ones are clamped to 1 - 1e-6 (counted, warned); the beta
    component has open-interval support and ones cannot occur in the index
    construction except through float coincidence.
    """
    frame = dataset.frame
    outcome = outcome or dataset.meta.get("outcome", "sync")
    if phi_cols is None:
        phi_cols = list(dataset.year_dummies)
    y = frame[outcome].to_numpy(dtype=float).copy()
    bad = (y < 0) | (y > 1)
    if bad.any():
        raise ValueError(f"{int(bad.sum())} outcome values outside [0, 1]")
    ones = y == 1.0
    if ones.any():
        warnings.warn(f"clamping {int(ones.sum())} outcome value(s) at 1 to 1 - 1e-6")
        y[ones] = 1.0 - 1e-6

    def block(cols):
        if not cols:
            return np.empty((len(frame), 0))
        missing = [c for c in cols if c not in frame.columns]
        if missing:
            raise KeyError(f"design columns missing: {missing}")
        return frame[list(cols)].to_numpy(dtype=float)

    return ZibDesign(
        y=y,
        is_zero=(y == 0.0).astype(np.uint8),
        X_mu=block(mu_cols),
        X_zi=block(zi_cols),
        X_phi=block(phi_cols),
        dyad_index=np.asarray(dataset.dyad_index, dtype=np.int64),
        n_dyads=dataset.n_dyads,
        mu_names=list(mu_cols),
        zi_names=list(zi_cols),
        phi_names=list(phi_cols),
        n_clamped_ones=int(ones.sum()),
    )


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def zib_logdensity(y: float, pi: float, mu: float, phi: float) -> float:
    """Log density of the zero-inflated beta mixture at one point.

    y must lie in [0, 1); exact ones are rejected here and clamped upstream.
    """
    if not (0.0 < pi < 1.0 and 0.0 < mu < 1.0 and phi > 0.0):
        raise ValueError(f"parameters outside domain: pi={pi}, mu={mu}, phi={phi}")
    if not 0.0 <= y < 1.0:
        raise ValueError(f"y={y} outside [0, 1)")
    if y == 0.0:
        return math.log(pi)
    a = mu * phi
    b = (1.0 - mu) * phi
    return (
        math.log1p(-pi)
        + (a - 1.0) * math.log(y)
        + (b - 1.0) * math.log1p(-y)
        - float(betaln(a, b))
    )


def linear_predictors(theta: np.ndarray, design: ZibDesign) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise (eta_mu, eta_zi, eta_phi) for an unconstrained vector."""
    lay = design.layout
    sd = np.exp(lay.view(theta, "log_sd"))
    L, _ = chol_corr_forward(lay.view(theta, "corr_raw"), N_EFFECTS)
    z = lay.view(theta, "z").reshape(design.n_dyads, N_EFFECTS)
    u = (z @ L.T) * sd
    g = design.dyad_index
    eta_mu = lay.view(theta, "alpha_mu")[0] + design.X_mu @ lay.view(theta, "beta_mu") + u[g, 0]
    eta_zi = lay.view(theta, "alpha_zi")[0] + design.X_zi @ lay.view(theta, "beta_zi") + u[g, 1]
    eta_phi = lay.view(theta, "alpha_phi")[0] + design.X_phi @ lay.view(theta, "beta_phi") + u[g, 2]
    return eta_mu, eta_zi, eta_phi


def predictors(params: ZibParams, design: ZibDesign, row: int) -> tuple[float, float, float]:
    """(mu, pi, phi) for one dataset row under constrained parameters."""
    g = int(design.dyad_index[row])
    eta_mu = params.alpha_mu + design.X_mu[row] @ params.beta_mu + params.u[g, 0]
    eta_zi = params.alpha_zi + design.X_zi[row] @ params.beta_zi + params.u[g, 1]
    eta_phi = params.alpha_phi + design.X_phi[row] @ params.beta_phi + params.u[g, 2]
    return float(expit(eta_mu)), float(expit(eta_zi)), float(np.exp(eta_phi))


def log_posterior_and_grad(
    theta: np.ndarray,
    design: ZibDesign,
    regime: PriorRegime,
) -> tuple[float, np.ndarray]:
    """Unnormalized log posterior and its analytic gradient.

    Non-finite density (e.g. extreme linear predictors) returns -inf with a
    zero gradient; the sampler treats this as a rejected proposal.
    """
    lay = design.layout
    grad = np.zeros(lay.dim)
    g_idx = design.dyad_index

    with np.errstate(all="ignore"):
        log_sd = lay.view(theta, "log_sd")
        sd = np.exp(log_sd)
        corr_raw = lay.view(theta, "corr_raw")
        L, logjac = chol_corr_forward(corr_raw, N_EFFECTS)
        z = lay.view(theta, "z").reshape(design.n_dyads, N_EFFECTS)
        zl = z @ L.T
        u = zl * sd

        eta_mu = lay.view(theta, "alpha_mu")[0] + design.X_mu @ lay.view(theta, "beta_mu") + u[g_idx, 0]
        eta_zi = lay.view(theta, "alpha_zi")[0] + design.X_zi @ lay.view(theta, "beta_zi") + u[g_idx, 1]
        eta_phi = lay.view(theta, "alpha_phi")[0] + design.X_phi @ lay.view(theta, "beta_phi") + u[g_idx, 2]

        ll, g_mu, g_zi, g_phi = kernels.zib_terms(
            design.y, design.is_zero, eta_mu, eta_zi, eta_phi
        )
        if not np.isfinite(ll):
            return -np.inf, grad

        lp = ll + logjac + float(log_sd.sum())  # log-scale Jacobian for sd

        # likelihood gradient into the blocks
        grad[lay.slices["alpha_mu"]] = g_mu.sum()
        grad[lay.slices["beta_mu"]] = design.X_mu.T @ g_mu
        grad[lay.slices["alpha_zi"]] = g_zi.sum()
        grad[lay.slices["beta_zi"]] = design.X_zi.T @ g_zi
        grad[lay.slices["alpha_phi"]] = g_phi.sum()
        grad[lay.slices["beta_phi"]] = design.X_phi.T @ g_phi

        du = np.empty((design.n_dyads, N_EFFECTS))
        du[:, 0] = np.bincount(g_idx, weights=g_mu, minlength=design.n_dyads)
        du[:, 1] = np.bincount(g_idx, weights=g_zi, minlength=design.n_dyads)
        du[:, 2] = np.bincount(g_idx, weights=g_phi, minlength=design.n_dyads)
        du_sd = du * sd
        dz = du_sd @ L
        d_sd = (du * zl).sum(axis=0)
        dL = du_sd.T @ z
        dL[0, 1] = dL[0, 2] = dL[1, 2] = 0.0

        # priors -----------------------------------------------------------
        def add(kind, key):
            nonlocal lp
            lp_k, g_k = _prior_lp_grad(kind, lay.view(theta, key))
            lp += lp_k
            grad[lay.slices[key]] += g_k

        add(regime.mu_intercept, "alpha_mu")
        add(regime.zi_intercept, "alpha_zi")
        add(regime.phi_intercept, "alpha_phi")
        add(regime.coef, "beta_mu")
        add(regime.coef, "beta_zi")
        add(regime.coef, "beta_phi")

        lp_sd, g_sd_prior = _prior_lp_grad(regime.sd, sd)
        lp += lp_sd
        grad[lay.slices["log_sd"]] = (d_sd + g_sd_prior) * sd + 1.0

        coeffs = _lkj_coeffs(N_EFFECTS, regime.lkj_eta)
        diag = np.diag(L)
        lp += float(np.sum(coeffs[1:] * np.log(diag[1:])))
        dL[1, 1] += coeffs[1] / diag[1]
        dL[2, 2] += coeffs[2] / diag[2]
        grad[lay.slices["corr_raw"]] = chol_corr_backward(corr_raw, N_EFFECTS, dL)

        lp += float(-0.5 * np.sum(z * z))
        grad[lay.slices["z"]] = (dz - z).ravel()

    if not np.isfinite(lp):
        return -np.inf, np.zeros(lay.dim)
    return lp, grad


def log_posterior(theta: np.ndarray, design: ZibDesign, regime: PriorRegime) -> float:
    return log_posterior_and_grad(theta, design, regime)[0]


def pointwise_loglik(theta: np.ndarray, design: ZibDesign) -> np.ndarray:
    """Per-row log likelihood for one unconstrained draw (LOO input)."""
    eta_mu, eta_zi, eta_phi = linear_predictors(theta, design)
    return kernels.zib_pointwise(design.y, design.is_zero, eta_mu, eta_zi, eta_phi)
