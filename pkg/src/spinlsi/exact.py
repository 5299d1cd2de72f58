"""Exact spin-system expectations by enumeration of all 2^n configurations.

Weights live in the log domain: w(sigma) = -(t/2)(sigma, A sigma) + (f, sigma)
and logZ = logsumexp(w), so large inverse temperatures and fields are safe.
Configuration index i carries spin x in bit x (bit 0 -> sigma_x = +1, bit
1 -> sigma_x = -1); enumeration is vectorized over blocks of configurations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .model import CouplingMatrix, spectral_radius

#: cap for operations that hold one 2^n vector (log-weights, probabilities)
SCALAR_CAP = 20
#: cap for operations that materialize 2^n x n or n x n two-point data
MATRIX_CAP = 14

_BLOCK = 1 << 16


def coupling_array(A) -> np.ndarray:
    if isinstance(A, CouplingMatrix):
        return A.matrix
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("coupling must be a square matrix")
    return M


def resolve_cap(n: int, cap: int | None, default: int) -> None:
    limit = default if cap is None else int(cap)
    if cap is not None and limit > default:
        warnings.warn(
            f"enumeration cap {limit} exceeds the default {default}; "
            "memory and time grow as 2^n",
            RuntimeWarning, stacklevel=3)
    if n > limit:
        raise ValueError(f"n={n} exceeds the enumeration cap {limit}")


def sign_block(n: int, start: int, stop: int) -> np.ndarray:
    """Configurations with indices [start, stop) as a (stop-start, n) +/-1 array."""
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
    return 1.0 - 2.0 * bits


def iter_sign_blocks(n: int, block: int = _BLOCK):
    total = 1 << n
    for start in range(0, total, block):
        yield start, sign_block(n, start, min(start + block, total))


@dataclass(eq=False)
class ExactEnsemble:
    """Boltzmann ensemble on {-1,+1}^n at inverse temperature t and field f."""

    matrix: np.ndarray
    t: float
    field: np.ndarray
    log_weights: np.ndarray
    log_z: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_z)


def build_ensemble(A, t: float, f=None, cap: int | None = None) -> ExactEnsemble:
    M = coupling_array(A)
    n = M.shape[0]
    resolve_cap(n, cap, SCALAR_CAP)
    if not (float(t) >= 0.0):
        raise ValueError("inverse temperature t must be >= 0")
    fv = np.zeros(n) if f is None else np.array(np.broadcast_to(np.asarray(f, dtype=float), (n,)))
    if not np.all(np.isfinite(fv)):
        raise ValueError("field has non-finite entries")
    w = np.empty(1 << n)
    for start, S in iter_sign_blocks(n):
        q = ((S @ M) * S).sum(axis=1)
        w[start:start + S.shape[0]] = -0.5 * t * q + S @ fv
    return ExactEnsemble(M, float(t), fv, w, float(logsumexp(w)))


def expectation(ens: ExactEnsemble, obs) -> float:
    """E[obs] under the ensemble.

    `obs` is either a length-2^n value array or a callable mapping a block of
    +/-1 configurations with shape (m, n) to m values.
    """
    p = ens.probabilities
    if callable(obs):
        total = 0.0
        for start, S in iter_sign_blocks(ens.n):
            vals = np.asarray(obs(S), dtype=float)
            total += float(p[start:start + S.shape[0]] @ vals)
        return total
    vals = np.asarray(obs, dtype=float)
    if vals.shape != p.shape:
        raise ValueError("observable must have one value per configuration")
    return float(p @ vals)


def magnetization(ens: ExactEnsemble) -> np.ndarray:
    """E[sigma_x] for every site."""
    p = ens.probabilities
    m = np.zeros(ens.n)
    for start, S in iter_sign_blocks(ens.n):
        m += S.T @ p[start:start + S.shape[0]]
    return m


def two_point_matrix(ens: ExactEnsemble, cap: int | None = None) -> np.ndarray:
    """E[sigma_x sigma_y] as an n x n matrix."""
    resolve_cap(ens.n, cap, MATRIX_CAP)
    p = ens.probabilities
    M2 = np.zeros((ens.n, ens.n))
    for start, S in iter_sign_blocks(ens.n):
        M2 += (S * p[start:start + S.shape[0], None]).T @ S
    return 0.5 * (M2 + M2.T)


def truncated_correlation(A, t: float, f=None, cap: int | None = None) -> np.ndarray:
    """Covariance matrix E[sigma_x sigma_y] - E[sigma_x] E[sigma_y]."""
    M = coupling_array(A)
    resolve_cap(M.shape[0], cap, MATRIX_CAP)
    ens = build_ensemble(M, t, f)
    m = magnetization(ens)
    sigma = two_point_matrix(ens, cap=cap) - np.outer(m, m)
    return 0.5 * (sigma + sigma.T)


def correlation_batch(A, t: float, fields: np.ndarray, cap: int | None = None) -> np.ndarray:
    """Truncated correlations for a batch of fields at once: (k, n, n)."""
    M = coupling_array(A)
    n = M.shape[0]
    resolve_cap(n, cap, MATRIX_CAP)
    fields = np.atleast_2d(np.asarray(fields, dtype=float))
    if fields.shape[1] != n:
        raise ValueError("field batch must have one column per site")
    S = sign_block(n, 0, 1 << n)
    q = ((S @ M) * S).sum(axis=1)
    W = fields @ S.T - 0.5 * t * q[None, :]
    W -= W.max(axis=1, keepdims=True)
    P = np.exp(W)
    P /= P.sum(axis=1, keepdims=True)
    second = np.einsum("kc,cx,cy->kxy", P, S, S, optimize=True)
    first = P @ S
    sigma = second - first[:, :, None] * first[:, None, :]
    return 0.5 * (sigma + np.transpose(sigma, (0, 2, 1)))


def susceptibility_rows(A, t: float, cap: int | None = None) -> np.ndarray:
    """Row sums sum_y E[sigma_x sigma_y] of the zero-field two-point function."""
    M = coupling_array(A)
    n = M.shape[0]
    resolve_cap(n, cap, SCALAR_CAP)
    ens = build_ensemble(M, t, None, cap=cap)
    p = ens.probabilities
    rows = np.zeros(n)
    for start, S in iter_sign_blocks(n):
        block = p[start:start + S.shape[0]] * S.sum(axis=1)
        rows += S.T @ block
    return rows


def susceptibility(A, t: float, cap: int | None = None) -> float:
    """Zero-field susceptibility: max over x of sum_y E[sigma_x sigma_y]."""
    return float(np.max(susceptibility_rows(A, t, cap=cap)))


def two_point_spectral_radius(A, t: float, cap: int | None = None) -> float:
    """Spectral radius of the zero-field two-point matrix.

    Never exceeds the susceptibility: the matrix has nonnegative entries, so
    its radius is bounded by the largest row sum. Violations signal numerical
    failure and raise.
    """
    M = coupling_array(A)
    resolve_cap(M.shape[0], cap, MATRIX_CAP)
    ens = build_ensemble(M, t, None)
    M2 = two_point_matrix(ens, cap=cap)
    radius = spectral_radius(M2)
    row_bound = float(np.max(M2.sum(axis=1)))
    if radius > row_bound + 1e-10:
        raise RuntimeError(
            "two-point spectral radius exceeds its row-sum bound; numerical failure")
    return radius


class SusceptibilityEvaluator:
    """Zero-field susceptibility as a reusable function of inverse temperature.

    Precomputes the per-configuration quadratic forms once; each temperature
    then costs a softmax over the 2^n weights plus one row-sum projection.
    """

    def __init__(self, A, cap: int | None = None):
        M = coupling_array(A)
        self.n = M.shape[0]
        resolve_cap(self.n, cap, SCALAR_CAP)
        total = 1 << self.n
        self.quadratic = np.empty(total)
        self.spin_sum = np.empty(total)
        for start, S in iter_sign_blocks(self.n):
            stop = start + S.shape[0]
            self.quadratic[start:stop] = ((S @ M) * S).sum(axis=1)
            self.spin_sum[start:stop] = S.sum(axis=1)
        self._signs = sign_block(self.n, 0, total) if self.n <= MATRIX_CAP else None

    def __call__(self, t: float) -> float:
        return float(self.grid([t])[0])

    def grid(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if ts.ndim != 1:
            ts = ts.reshape(-1)
        if not np.all(ts >= 0.0):
            raise ValueError("inverse temperatures must be >= 0")
        total = 1 << self.n
        out = np.empty(ts.size)
        chunk = max(1, (1 << 24) // total)
        for lo in range(0, ts.size, chunk):
            tc = ts[lo:lo + chunk]
            W = -0.5 * np.outer(tc, self.quadratic)
            W -= W.max(axis=1, keepdims=True)
            P = np.exp(W)
            P /= P.sum(axis=1, keepdims=True)
            weighted = P * self.spin_sum[None, :]
            if self._signs is not None:
                rows = weighted @ self._signs
            else:
                rows = np.zeros((tc.size, self.n))
                for start, S in iter_sign_blocks(self.n):
                    rows += weighted[:, start:start + S.shape[0]] @ S
            out[lo:lo + chunk] = rows.max(axis=1)
        return out
