"""Independent reference computations used as test oracles.

Everything here works from dense inverses and determinants or from finite
differences, never from the Cholesky path under test.
"""

import numpy as np


def se_kernel_loop(A, B, sf2, ell):
    K = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            K[i, j] = sf2 * np.exp(-np.sum((a - b) ** 2) / (2 * ell**2))
    return K


def dense_posterior(Xn, R, Xs, M_star, sf2, ell, sn2, jitter=0.0):
    """Posterior mean and variance with an explicit matrix inverse."""
    K = se_kernel_loop(Xn, Xn, sf2, ell) + (sn2 + jitter) * np.eye(len(Xn))
    Kinv = np.linalg.inv(K)
    Ks = se_kernel_loop(Xs, Xn, sf2, ell)
    mean = M_star + Ks @ Kinv @ R
    var = sf2 - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)
    return mean, var


def dense_lml(Xn, R, sf2, ell, sn2, jitter=0.0):
    """Sum over output columns of the Gaussian log density, via inv and slogdet."""
    m, z = R.shape
    K = se_kernel_loop(Xn, Xn, sf2, ell) + (sn2 + jitter) * np.eye(m)
    Kinv = np.linalg.inv(K)
    _, logdet = np.linalg.slogdet(K)
    total = 0.0
    for c in range(z):
        y = R[:, c]
        total += -0.5 * y @ Kinv @ y - 0.5 * logdet - 0.5 * m * np.log(2 * np.pi)
    return total


def central_diff(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))
