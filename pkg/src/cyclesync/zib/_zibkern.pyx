# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled zero-inflated beta likelihood kernels.

Fused single-pass versions of the functions in ``_kernels_py``; selected at
import by ``cyclesync.zib.kernels`` when the extension built successfully.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p
from scipy.special.cython_special cimport gammaln as c_gammaln, psi as c_psi

cnp.import_array()


cdef inline double _log_expit(double x) noexcept nogil:
    if x >= 0.0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


cdef inline double _expit(double x) noexcept nogil:
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


def zib_terms(
    cnp.ndarray[cnp.float64_t, ndim=1] y,
    cnp.ndarray[cnp.uint8_t, ndim=1] is_zero,
    cnp.ndarray[cnp.float64_t, ndim=1] eta_mu,
    cnp.ndarray[cnp.float64_t, ndim=1] eta_zi,
    cnp.ndarray[cnp.float64_t, ndim=1] eta_phi,
):
    cdef Py_ssize_t n = y.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_mu = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_zi = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_phi = np.zeros(n)
    cdef double total = 0.0
    cdef double pi_, mu, phi, a, b, log_y, log_1my, da, db, dphi
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            pi_ = _expit(eta_zi[i])
            if is_zero[i]:
                total += _log_expit(eta_zi[i])
                g_zi[i] = 1.0 - pi_
            else:
                total += _log_expit(-eta_zi[i])
                g_zi[i] = -pi_
                mu = _expit(eta_mu[i])
                phi = exp(eta_phi[i])
                a = mu * phi
                b = (1.0 - mu) * phi
                log_y = log(y[i])
                log_1my = log1p(-y[i])
                dphi = c_psi(phi)
                total += (
                    (a - 1.0) * log_y
                    + (b - 1.0) * log_1my
                    - c_gammaln(a)
                    - c_gammaln(b)
                    + c_gammaln(phi)
                )
                da = log_y - c_psi(a) + dphi
                db = log_1my - c_psi(b) + dphi
                g_mu[i] = phi * mu * (1.0 - mu) * (da - db)
                g_phi[i] = phi * (mu * da + (1.0 - mu) * db)
    return total, g_mu, g_zi, g_phi


def zib_pointwise(
    cnp.ndarray[cnp.float64_t, ndim=1] y,
    cnp.ndarray[cnp.uint8_t, ndim=1] is_zero,
    cnp.ndarray[cnp.float64_t, ndim=1] eta_mu,
    cnp.ndarray[cnp.float64_t, ndim=1] eta_zi,
    cnp.ndarray[cnp.float64_t, ndim=1] eta_phi,
):
    cdef Py_ssize_t n = y.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double mu, phi, a, b
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            if is_zero[i]:
                out[i] = _log_expit(eta_zi[i])
            else:
                mu = _expit(eta_mu[i])
                phi = exp(eta_phi[i])
                a = mu * phi
                b = (1.0 - mu) * phi
                out[i] = (
                    _log_expit(-eta_zi[i])
                    + (a - 1.0) * log(y[i])
                    + (b - 1.0) * log1p(-y[i])
                    - c_gammaln(a)
                    - c_gammaln(b)
                    + c_gammaln(phi)
                )
    return out
