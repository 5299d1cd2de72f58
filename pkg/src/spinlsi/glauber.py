"""Single-flip Glauber generator with Dirichlet form, spectral gap, entropy
functionals, and a multistart lower-bound search for the inverse log-Sobolev
constant.

The flip rates are c_x(sigma) = (1 + e^{-dH_x(sigma)}) / 2 with
dH_x = H(sigma^x) - H(sigma) and H(sigma) = (beta/2)(sigma, A sigma) - (h, sigma).
This is the unique reversible single-flip choice satisfying
mu(sigma) c_x(sigma) = (mu(sigma) + mu(sigma^x)) / 2, so the generator
quadratic form -<F, LF>_mu equals the plain flip energy
D(F) = (1/2) sum_x E_mu[(F(sigma) - F(sigma^x))^2] with no rate factor, and
every single-site conditional two-state chain has spectral gap >= 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.special import xlogy

from ._parallel import parallel_map
from .exact import (MATRIX_CAP, ExactEnsemble, build_ensemble, coupling_array,
                    resolve_cap, sign_block)

_DENSE_STATES = 1 << 12


@dataclass(eq=False)
class GeneratorMatrix:
    """Sparse Glauber rate matrix together with its stationary ensemble."""

    ensemble: ExactEnsemble
    rates: np.ndarray              # (2^n, n); rates[i, x] flips spin x of config i
    generator: sparse.csr_matrix   # row sums zero; off-diagonal entries >= 1/2
    delta_h: np.ndarray            # (2^n, n) energy increments, reused by the solvers

    @property
    def n(self) -> int:
        return self.ensemble.n

    @property
    def states(self) -> int:
        return 1 << self.n

    @property
    def mu(self) -> np.ndarray:
        return self.ensemble.probabilities


def build_generator(A, beta: float, h=None, cap: int | None = None) -> GeneratorMatrix:
    M = coupling_array(A)
    n = M.shape[0]
    resolve_cap(n, cap, MATRIX_CAP)
    ens = build_ensemble(M, beta, h)
    S = sign_block(n, 0, 1 << n)
    # dH_x(sigma) = -2 beta sigma_x (A sigma)_x + 2 beta A_xx + 2 h_x sigma_x
    G = S @ M
    dH = -2.0 * beta * (S * G) + 2.0 * beta * np.diag(M)[None, :] \
        + 2.0 * (S * ens.field[None, :])
    rates = 0.5 * (1.0 + np.exp(-dH))
    m = 1 << n
    rows = np.repeat(np.arange(m), n)
    cols = (np.arange(m)[:, None] ^ (1 << np.arange(n))[None, :]).ravel()
    off = sparse.coo_matrix((rates.ravel(), (rows, cols)), shape=(m, m))
    L = (off + sparse.diags(-rates.sum(axis=1))).tocsr()
    return GeneratorMatrix(ens, rates, L, dH)


def _flip(n: int, x: int) -> np.ndarray:
    return np.arange(1 << n) ^ (1 << x)


def dirichlet_form(g: GeneratorMatrix, F, check: bool = True) -> float:
    """D(F) = (1/2) sum_x E_mu[(F(sigma) - F(sigma^x))^2].

    With `check`, also evaluates the generator quadratic form -<F, LF>_mu and
    raises if the two disagree beyond relative 1e-10.
    """
    F = np.asarray(F, dtype=float)
    if F.shape != (g.states,):
        raise ValueError("F must have one value per configuration")
    if not np.all(np.isfinite(F)):
        raise ValueError("F has non-finite entries")
    mu = g.mu
    total = 0.0
    for x in range(g.n):
        d = F - F[_flip(g.n, x)]
        total += float(mu @ (d * d))
    value = 0.5 * total
    if check:
        quad = -float((mu * F) @ (g.generator @ F))
        scale = max(1.0, float(np.max(np.abs(F))) ** 2)
        if not np.isclose(value, quad, rtol=1e-10, atol=1e-12 * scale):
            raise RuntimeError(
                "Dirichlet form and generator quadratic form disagree "
                f"({value!r} vs {quad!r})")
    return value


def entropy(mu: np.ndarray, F) -> float:
    """Ent(F) = E[Phi(F)] - Phi(E[F]) with Phi(x) = x log x and 0 log 0 = 0."""
    F = np.asarray(F, dtype=float)
    scale = max(1.0, float(np.max(np.abs(F))))
    if float(np.min(F)) < -1e-12 * scale:
        raise ValueError("F must be nonnegative")
    F = np.maximum(F, 0.0)
    mean = float(mu @ F)
    if mean <= 0.0:
        raise ValueError("E[F] must be positive")
    return float(mu @ xlogy(F, F) - xlogy(mean, mean))


def _symmetrized(g: GeneratorMatrix) -> sparse.csr_matrix:
    # Pi^{1/2} (-L) Pi^{-1/2}: the off-diagonal entry toward sigma^x is
    # -rate * sqrt(mu(sigma)/mu(sigma^x)) = -cosh(dH_x/2), stable in any regime.
    n, m = g.n, g.states
    rows = np.repeat(np.arange(m), n)
    cols = (np.arange(m)[:, None] ^ (1 << np.arange(n))[None, :]).ravel()
    off = sparse.coo_matrix((-np.cosh(0.5 * g.delta_h).ravel(), (rows, cols)),
                            shape=(m, m))
    return (off + sparse.diags(g.rates.sum(axis=1))).tocsr()


def _check_reversible(g: GeneratorMatrix) -> None:
    flow = sparse.diags(g.mu) @ g.generator
    gap = sparse.linalg.norm(flow - flow.T, ord=np.inf)
    scale = sparse.linalg.norm(flow, ord=np.inf)
    if gap > 1e-10 * max(scale, 1e-300):
        raise ValueError("generator is not numerically reversible")


def spectral_gap(g: GeneratorMatrix, dense_states: int = _DENSE_STATES) -> float:
    """Second-smallest eigenvalue of -L, via the mu^(1/2) symmetrization.

    Dense solve below `dense_states` states; above, a Krylov solve on the
    symmetrized operator with the stationary direction deflated upward.
    """
    _check_reversible(g)
    S = _symmetrized(g)
    m = g.states
    if m <= dense_states:
        vals = np.linalg.eigvalsh(S.toarray())
        return float(vals[1])
    sqrt_mu = np.sqrt(g.mu)
    shift = 2.0 * float(g.rates.sum(axis=1).max()) + 1.0
    op = LinearOperator(
        (m, m), matvec=lambda x: S @ x + shift * sqrt_mu * (sqrt_mu @ x))
    v0 = np.random.default_rng(7).standard_normal(m)
    vals = eigsh(op, k=1, which="SA", v0=v0, maxiter=50 * m,
                 return_eigenvectors=False)
    return float(vals[0])


def _gap_eigenfunction(g: GeneratorMatrix, dense_states: int = _DENSE_STATES):
    """(gap, eigenfunction) of the generator; the eigenfunction is centered
    under mu and scaled to unit sup norm."""
    S = _symmetrized(g)
    m = g.states
    sqrt_mu = np.sqrt(g.mu)
    if m <= dense_states:
        vals, vecs = scipy.linalg.eigh(S.toarray(), subset_by_index=(0, 1))
        gap, vec = float(vals[1]), vecs[:, 1]
    else:
        shift = 2.0 * float(g.rates.sum(axis=1).max()) + 1.0
        op = LinearOperator(
            (m, m), matvec=lambda x: S @ x + shift * sqrt_mu * (sqrt_mu @ x))
        v0 = np.random.default_rng(7).standard_normal(m)
        vals, vecs = eigsh(op, k=1, which="SA", v0=v0, maxiter=50 * m)
        gap, vec = float(vals[0]), vecs[:, 0]
    fun = vec / sqrt_mu
    fun -= float(g.mu @ fun)
    return gap, fun / float(np.max(np.abs(fun)))


def lsi_ratio(g: GeneratorMatrix, F) -> float:
    """Ent(F) / (2 D(sqrt F)): a certified lower bound on the inverse
    log-Sobolev constant for any admissible F."""
    F = np.asarray(F, dtype=float)
    scale = max(1.0, float(np.max(np.abs(F))))
    if float(np.max(F) - np.min(F)) <= 1e-15 * scale:
        raise ValueError("F must be nonconstant")
    ent = entropy(g.mu, F)
    dsq = dirichlet_form(g, np.sqrt(np.maximum(F, 0.0)))
    if dsq <= 0.0:
        raise RuntimeError(
            "zero Dirichlet form with nonzero entropy; numerical failure")
    return ent / (2.0 * dsq)


@dataclass
class LsiEstimate:
    """Best ratio found by the multistart ascent (a lower bound, not claimed
    exact), the density achieving it, and the search trace."""

    ratio: float
    density: np.ndarray
    converged: bool
    candidates: int
    trace: list = field(default_factory=list)   # (iteration, running best ratio)


# Ent and D(sqrt F) both vanish quadratically at constant F while their
# roundoff stays near machine epsilon, so ratios with D below this floor are
# noise-dominated and cannot be certified; the ascent refuses to go there.
_DIRICHLET_FLOOR = 5e-7


def _ratio_quadform(g: GeneratorMatrix, u: np.ndarray, mu: np.ndarray):
    F = u * u
    ef = float(mu @ F)
    if ef <= 0.0:
        return None
    ent = float(mu @ xlogy(F, F) - xlogy(ef, ef))
    Lu = g.generator @ u
    dval = -float((mu * u) @ Lu)
    if dval <= _DIRICHLET_FLOOR:
        return None
    return ent, dval, Lu


def _ascend(g: GeneratorMatrix, u0: np.ndarray, iters: int, tol: float):
    mu = g.mu
    u = np.maximum(np.asarray(u0, dtype=float), 0.0)
    nrm = float(mu @ (u * u))
    if nrm <= 0.0:
        return None
    u /= math.sqrt(nrm)
    parts = _ratio_quadform(g, u, mu)
    if parts is None:
        return None
    ent, dval, Lu = parts
    ratio = ent / (2.0 * dval)
    step = 0.5
    converged = False
    history = [(0, ratio)]
    for it in range(1, iters + 1):
        ef = float(mu @ (u * u))
        log_f = np.zeros_like(u)
        pos = u > 0.0
        log_f[pos] = 2.0 * np.log(u[pos])
        grad_ent = 2.0 * mu * u * (log_f - math.log(ef))
        grad_ent[~pos] = 0.0
        grad_d = -2.0 * (mu * Lu)
        grad = (grad_ent - (ent / dval) * grad_d) / (2.0 * dval)
        accepted = False
        trial = step
        for _ in range(40):
            v = np.maximum(u + trial * grad, 0.0)
            nrm = float(mu @ (v * v))
            if nrm > 0.0:
                v /= math.sqrt(nrm)
                parts = _ratio_quadform(g, v, mu)
                if parts is not None:
                    ent_v, dval_v, Lu_v = parts
                    ratio_v = ent_v / (2.0 * dval_v)
                    if ratio_v > ratio:
                        improvement = (ratio_v - ratio) / max(ratio_v, 1e-300)
                        u, ent, dval, Lu, ratio = v, ent_v, dval_v, Lu_v, ratio_v
                        step = min(trial * 2.0, 1e3)
                        accepted = True
                        break
            trial *= 0.5
        if not accepted:
            converged = True
            break
        history.append((it, ratio))
        if improvement < tol:
            converged = True
            break
    return ratio, u, converged, history


def _candidate_densities(g: GeneratorMatrix, restarts: int, seed) -> list[np.ndarray]:
    m = g.states
    cands: list[np.ndarray] = []
    # near-constant perturbations along the spectral-gap eigenfunction
    _, gap_fun = _gap_eigenfunction(g)
    for eps in (0.5, 0.2, 0.05):
        cands.append(1.0 + eps * gap_fun)
    # indicators of magnetization level sets (largest-mass levels first)
    spin_sum = sign_block(g.n, 0, m).sum(axis=1)
    levels = sorted(np.unique(spin_sum), key=abs)[:8]
    for level in levels:
        ind = (spin_sum == level).astype(float)
        if 0 < ind.sum() < m:
            cands.append(ind)
    half = (spin_sum > 0).astype(float)
    if 0 < half.sum() < m:
        cands.append(half)
    # random positive densities
    for k in range(restarts):
        rng = np.random.default_rng([int(seed), 7, k])
        cands.append(rng.random(m) + 0.05)
    return cands


def estimate_inverse_lsi(g: GeneratorMatrix, restarts: int = 4, iters: int = 300,
                         tol: float = 1e-9, seed=0, threads: int = 1) -> LsiEstimate:
    """Maximize Ent(F) / (2 D(sqrt F)) over densities by projected gradient
    ascent (F = u^2 on the positive orthant, E_mu[F] = 1), multistarted from
    gap-eigenfunction perturbations, magnetization level sets, and random
    positive vectors. Returns the best certified ratio found. Restarts run
    concurrently when threads > 1; results are order-reduced, so the outcome
    is thread-count independent."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best_ratio = -np.inf
    best_u = None
    best_trace: list = []
    all_converged = True
    cands = _candidate_densities(g, restarts, seed)
    outcomes = parallel_map(
        lambda F0: _ascend(g, np.sqrt(np.maximum(F0, 0.0)), iters, tol),
        cands, threads)
    for out in outcomes:
        if out is None:
            continue
        _, u, conv, history = out
        all_converged = all_converged and conv
        try:
            # certify with the exact flip-sum Dirichlet form
            if dirichlet_form(g, u, check=False) <= _DIRICHLET_FLOOR:
                continue
            ratio = lsi_ratio(g, u * u)
        except ValueError:
            continue
        if ratio > best_ratio:
            best_ratio, best_u, best_trace = ratio, u, history
    if best_u is None:
        raise RuntimeError("no admissible density found")
    return LsiEstimate(ratio=float(best_ratio), density=best_u * best_u,
                       converged=all_converged, candidates=len(cands),
                       trace=best_trace)


def conditional_gap_min(g: GeneratorMatrix) -> float:
    """Smallest spectral gap among the single-site conditional two-state
    chains: min over (sigma, x) of c_x(sigma) + c_x(sigma^x). Always >= 2."""
    worst = np.inf
    for x in range(g.n):
        total = g.rates[:, x] + g.rates[_flip(g.n, x), x]
        worst = min(worst, float(total.min()))
    return worst


def entropy_decay_trace(g: GeneratorMatrix, F0, times) -> np.ndarray:
    """Entropy of the evolved density dF/dt = L F at the requested times.

    F0 is normalized to mean one; the evolution uses adaptive 4th/5th-order
    integration at relative tolerance 1e-10. Returns rows (t, Ent(F_t)) and
    raises if the trace fails to decay monotonically.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a strictly increasing grid")
    if times[0] < 0:
        raise ValueError("times must be nonnegative")
    mu = g.mu
    F0 = np.asarray(F0, dtype=float)
    mean = float(mu @ F0)
    if float(np.min(F0)) < -1e-12 or mean <= 0:
        raise ValueError("F0 must be nonnegative with positive mean")
    F0 = np.maximum(F0, 0.0) / mean
    t_eval = times if times[0] > 0 else times[1:]
    sol = solve_ivp(lambda _, y: g.generator @ y, (0.0, float(times[-1])), F0,
                    t_eval=t_eval, method="RK45", rtol=1e-10, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"density evolution failed: {sol.message}")
    columns = sol.y.T if times[0] > 0 else np.vstack([F0, sol.y.T])
    ents = []
    for col in columns:
        if float(col.min()) < -1e-9 * max(1.0, float(col.max())):
            raise RuntimeError("negative density persisted during integration")
        ents.append(entropy(mu, np.maximum(col, 0.0)))
    ents = np.asarray(ents)
    slack = 1e-12 + 1e-10 * max(1.0, float(ents[0]))
    if np.any(np.diff(ents) > slack):
        raise RuntimeError("entropy failed to decay monotonically")
    return np.column_stack([times, ents])
