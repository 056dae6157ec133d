"""NumPy implementation of the zero-inflated beta likelihood kernels.

Twin of the compiled extension in ``_zibkern.pyx``; semantics must match
bit-for-bit up to floating point reassociation. ``zib_terms`` returns the
total log likelihood and its gradient with respect to the three linear
predictors, which is the hot inner loop of the sampler.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, expit, gammaln, log_expit


def zib_terms(
    y: np.ndarray,
    is_zero: np.ndarray,
    eta_mu: np.ndarray,
    eta_zi: np.ndarray,
    eta_phi: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Total log likelihood and d(loglik)/d(eta) arrays.

    y == 0 rows contribute log(pi); positive rows contribute
    log(1 - pi) + Beta(y | mu*phi, (1-mu)*phi) under logit/logit/log links.
    Non-finite results are returned as-is; the caller treats them as a
    rejected proposal.
    """
    zero = is_zero.astype(bool)
    pos = ~zero
    g_mu = np.zeros_like(eta_mu)
    g_phi = np.zeros_like(eta_phi)
    with np.errstate(all="ignore"):
        pi_ = expit(eta_zi)
        g_zi = np.where(zero, 1.0 - pi_, -pi_)
        total = float(log_expit(eta_zi[zero]).sum() + log_expit(-eta_zi[pos]).sum())
        if pos.any():
            mu = expit(eta_mu[pos])
            phi = np.exp(eta_phi[pos])
            a = mu * phi
            b = (1.0 - mu) * phi
            yp = y[pos]
            log_y = np.log(yp)
            log_1my = np.log1p(-yp)
            total += float(
                np.sum(
                    (a - 1.0) * log_y
                    + (b - 1.0) * log_1my
                    - gammaln(a)
                    - gammaln(b)
                    + gammaln(phi)
                )
            )
            dphi = digamma(phi)
            da = log_y - digamma(a) + dphi
            db = log_1my - digamma(b) + dphi
            g_mu[pos] = phi * mu * (1.0 - mu) * (da - db)
            g_phi[pos] = phi * (mu * da + (1.0 - mu) * db)
    return total, g_mu, g_zi, g_phi


def zib_pointwise(
    y: np.ndarray,
    is_zero: np.ndarray,
    eta_mu: np.ndarray,
    eta_zi: np.ndarray,
    eta_phi: np.ndarray,
) -> np.ndarray:
    """Per-row log likelihood, used for the LOO matrix."""
    zero = is_zero.astype(bool)
    out = np.empty(y.shape, dtype=float)
    pos = ~zero
    with np.errstate(all="ignore"):
        out[zero] = log_expit(eta_zi[zero])
        if pos.any():
            mu = expit(eta_mu[pos])
            phi = np.exp(eta_phi[pos])
            a = mu * phi
            b = (1.0 - mu) * phi
            yp = y[pos]
            out[pos] = (
                log_expit(-eta_zi[pos])
                + (a - 1.0) * np.log(yp)
                + (b - 1.0) * np.log1p(-yp)
                - gammaln(a)
                - gammaln(b)
                + gammaln(phi)
            )
    return out
