"""Covariance flow for the spin measure: the schedule C_t = (tA + (alpha-t))^{-1},
the renormalized potential and its derivatives, Gaussian-quadrature checks of
the measure/entropy decompositions and the convolution identity, the
quadratic-form criterion, and the susceptibility-integral bound with certified
monotone Riemann enclosures.

Eigendirections of A with eigenvalue 1 do not move under the flow
(C_beta - C_t vanishes there), so the tilting measure over fields is a point
mass in those directions; the quadrature integrates only over the moving ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, xlogy

from .exact import (SusceptibilityEvaluator, build_ensemble, correlation_batch,
                    coupling_array, magnetization, sign_block, susceptibility,
                    truncated_correlation)
from .glauber import entropy

_DEG_TOL = 1e-12
_MAX_NODES = 6_000_000


class NonConvergenceError(RuntimeError):
    """A requested numerical tolerance could not be certified."""


@dataclass(eq=False)
class CovarianceSchedule:
    """Covariance flow C_t = (t A + (alpha - t) I)^{-1} for t in [0, beta],
    with first and second t-derivatives. All members commute with A."""

    coupling: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        self.coupling = coupling_array(self.coupling)
        self.alpha = float(self.alpha)
        self.beta = float(self.beta)
        if not (self.beta >= 0.0):
            raise ValueError("beta must be >= 0")
        if not (self.alpha > self.beta):
            raise ValueError("alpha must exceed beta")
        vals, vecs = np.linalg.eigh(self.coupling)
        if vals[0] <= 0.0 or vals[-1] > 1.0 + 1e-12:
            raise ValueError("coupling must be positive definite with norm <= 1")
        self.eigenvalues = vals
        self.eigenvectors = vecs

    @property
    def n(self) -> int:
        return self.coupling.shape[0]

    def _check_t(self, t: float, *, end_open: bool = False, start_open: bool = False) -> float:
        t = float(t)
        if not (0.0 <= t <= self.beta):
            raise ValueError(f"t={t} outside [0, {self.beta}]")
        if end_open and t >= self.beta:
            raise ValueError(f"t={t} must be strictly below beta={self.beta}")
        if start_open and t <= 0.0:
            raise ValueError("t must be strictly positive")
        return t

    def eigen_covariance(self, t: float) -> np.ndarray:
        return 1.0 / (t * self.eigenvalues + (self.alpha - t))

    def covariance(self, t: float) -> np.ndarray:
        t = self._check_t(t)
        return (self.eigenvectors * self.eigen_covariance(t)) @ self.eigenvectors.T

    def dot_covariance(self, t: float) -> np.ndarray:
        t = self._check_t(t)
        c = self.eigen_covariance(t)
        scal = (1.0 - self.eigenvalues) * c * c
        return (self.eigenvectors * scal) @ self.eigenvectors.T

    def ddot_covariance(self, t: float) -> np.ndarray:
        t = self._check_t(t)
        c = self.eigen_covariance(t)
        scal = 2.0 * (1.0 - self.eigenvalues) ** 2 * c ** 3
        return (self.eigenvectors * scal) @ self.eigenvectors.T

    def inverse_covariance(self, t: float) -> np.ndarray:
        t = self._check_t(t)
        return t * self.coupling + (self.alpha - t) * np.eye(self.n)

    def increment_basis(self, t: float, s: float | None = None):
        """Moving directions of C_s - C_t (s defaults to beta) and the square
        roots of the increment eigenvalues there."""
        s = self.beta if s is None else self._check_t(s)
        k = self.eigen_covariance(s) - self.eigen_covariance(t)
        mask = k > _DEG_TOL
        return self.eigenvectors[:, mask], np.sqrt(k[mask])


def _resolve_field(n: int, h) -> np.ndarray:
    if h is None:
        return np.zeros(n)
    hv = np.array(np.broadcast_to(np.asarray(h, dtype=float), (n,)))
    if not np.all(np.isfinite(hv)):
        raise ValueError("field has non-finite entries")
    return hv


def _resolve_values(n: int, F) -> np.ndarray:
    if callable(F):
        vals = np.asarray(F(sign_block(n, 0, 1 << n)), dtype=float)
    else:
        vals = np.asarray(F, dtype=float)
    if vals.shape != (1 << n,):
        raise ValueError("test function must supply one value per configuration")
    if not np.all(np.isfinite(vals)):
        raise ValueError("test function has non-finite values")
    return vals


def renormalized_potential(sched: CovarianceSchedule, t: float, h, phi) -> float:
    """V_t(phi) = (1/2)(phi, C_t^{-1} phi) + (alpha - t) n / 2 - logZ(t, h + C_t^{-1} phi).

    The constant keeps absolute values (not just differences) reproducible:
    the diagonal (alpha - t) part of C_t^{-1} contributes exactly
    (alpha - t) n / 2 on the hypercube.
    """
    t = sched._check_t(t, end_open=True)
    phi = np.asarray(phi, dtype=float)
    cinv = sched.inverse_covariance(t)
    f = _resolve_field(sched.n, h) + cinv @ phi
    ens = build_ensemble(sched.coupling, t, f)
    return float(0.5 * phi @ (cinv @ phi) + 0.5 * (sched.alpha - t) * sched.n
                 - ens.log_z)


def potential_gradient(sched: CovarianceSchedule, t: float, h, phi) -> np.ndarray:
    """grad V_t(phi) = C_t^{-1} (phi - m(t, h + C_t^{-1} phi))."""
    t = sched._check_t(t, end_open=True)
    phi = np.asarray(phi, dtype=float)
    cinv = sched.inverse_covariance(t)
    f = _resolve_field(sched.n, h) + cinv @ phi
    m = magnetization(build_ensemble(sched.coupling, t, f))
    return cinv @ (phi - m)


def potential_hessian(sched: CovarianceSchedule, t: float, h, phi) -> np.ndarray:
    """He V_t(phi) = C_t^{-1} - C_t^{-1} Sigma_t(h + C_t^{-1} phi) C_t^{-1}."""
    t = sched._check_t(t, end_open=True)
    phi = np.asarray(phi, dtype=float)
    cinv = sched.inverse_covariance(t)
    f = _resolve_field(sched.n, h) + cinv @ phi
    sigma = truncated_correlation(sched.coupling, t, f)
    hess = cinv - cinv @ sigma @ cinv
    return 0.5 * (hess + hess.T)


def _hermite_nodes(order: int, dim: int):
    """Tensor Gauss-Hermite rule for the weight exp(-|x|^2/2): points and log
    weights. dim = 0 degenerates to the single point 0."""
    if dim == 0:
        return np.zeros((1, 0)), np.zeros(1)
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if order ** dim > _MAX_NODES:
        raise ValueError("quadrature tensor grid too large")
    x, w = np.polynomial.hermite_e.hermegauss(order)
    logw = np.log(w)
    pts = np.stack([g.ravel() for g in np.meshgrid(*([x] * dim), indexing="ij")],
                   axis=1)
    lw = np.add.reduce(np.meshgrid(*([logw] * dim), indexing="ij")).ravel()
    return pts, lw


def _nu_nodes(sched: CovarianceSchedule, t: float, order: int):
    """Quadrature nodes phi for the field-tilting measure between t and beta,
    with the Gaussian log weights."""
    basis, scale = sched.increment_basis(t)
    pts, lw = _hermite_nodes(order, scale.size)
    return (pts * scale[None, :]) @ basis.T, lw


def _potential_batch(sched: CovarianceSchedule, t: float, h: np.ndarray,
                     phis: np.ndarray):
    """V_t over a batch of phi rows, plus the tilted spin probabilities."""
    n = sched.n
    cinv = sched.inverse_covariance(t)
    fields = h[None, :] + phis @ cinv
    quad = 0.5 * np.einsum("ki,ij,kj->k", phis, cinv, phis)
    S = sign_block(n, 0, 1 << n)
    qforms = ((S @ sched.coupling) * S).sum(axis=1)
    W = fields @ S.T - 0.5 * t * qforms[None, :]
    log_z = logsumexp(W, axis=1)
    P = np.exp(W - log_z[:, None])
    V = quad + 0.5 * (sched.alpha - t) * n - log_z
    return V, P


@dataclass
class DecompositionCheck:
    """Result of a quadrature identity check (relative residual plus the
    settings that produced it)."""

    residual: float
    order: int
    certified: bool = True
    convolution_residual: float | None = None
    mc_std_error: float | None = None


def _nu_weights(sched, t, h, order):
    phis, lw = _nu_nodes(sched, t, order)
    V, P = _potential_batch(sched, t, h, phis)
    logw = lw - V
    logw -= logw.max()
    w = np.exp(logw)
    return phis, w / w.sum(), P


def verify_decomposition(sched: CovarianceSchedule, t: float, h=None, F=None,
                         order: int = 48, order_step: int = 10,
                         quad_tol: float = 1e-9, convolution_samples: int = 100,
                         seed=0, mc_samples: int = 0) -> DecompositionCheck:
    """Relative residual of E_{mu_beta,h} F against the two-stage average
    E_nu E_{mu_t, h + C_t^{-1} phi} F, by tensor Gauss-Hermite quadrature over
    the moving directions (n <= 3), plus a pointwise check of the Gaussian
    convolution identity behind it.

    For n > 3 pass mc_samples > 0: the outer average switches to
    self-normalized importance sampling and the result is flagged uncertified.
    """
    n = sched.n
    t = sched._check_t(t, end_open=True)
    hv = _resolve_field(n, h)
    fvals = _resolve_values(n, F if F is not None else np.ones(1 << n))
    ens_beta = build_ensemble(sched.coupling, sched.beta, hv)
    lhs = float(ens_beta.probabilities @ fvals)
    scale = max(abs(lhs), float(ens_beta.probabilities @ np.abs(fvals)), 1e-300)

    if n > 3:
        if mc_samples <= 0:
            raise ValueError(
                "tensor quadrature is limited to n <= 3; pass mc_samples for a "
                "Monte Carlo check")
        rng = np.random.default_rng(seed)
        basis, scl = sched.increment_basis(t)
        z = rng.standard_normal((mc_samples, scl.size))
        phis = (z * scl[None, :]) @ basis.T
        V, P = _potential_batch(sched, t, hv, phis)
        logw = V.min() - V
        w = np.exp(logw)
        g = P @ fvals
        rhs = float((w @ g) / w.sum())
        resid = abs(rhs - lhs) / scale
        wn = w / w.sum()
        se = float(np.sqrt(np.sum((wn * (g - rhs)) ** 2))) / scale
        return DecompositionCheck(residual=resid, order=0, certified=False,
                                  mc_std_error=se)

    rhs = {}
    for o in (order, order + order_step):
        _, w, P = _nu_weights(sched, t, hv, o)
        rhs[o] = float(w @ (P @ fvals))
    o_hi = order + order_step
    if abs(rhs[order] - rhs[o_hi]) > quad_tol * max(1.0, scale):
        raise NonConvergenceError(
            f"quadrature orders {order} and {o_hi} disagree by "
            f"{abs(rhs[order] - rhs[o_hi]):.3e}")
    conv = None
    if convolution_samples > 0 and sched.beta > 0:
        conv = verify_convolution(sched, samples=convolution_samples,
                                  seed=seed, order=order)
    return DecompositionCheck(residual=abs(rhs[o_hi] - lhs) / scale,
                              order=o_hi, convolution_residual=conv)


def verify_convolution(sched: CovarianceSchedule, samples: int = 100, seed=0,
                       order: int = 48, sigma_scale: float = 1.5) -> float:
    """Pointwise check of the Gaussian convolution identity across the flow:
    for sampled pairs t < s, the log-ratio of exp(-(sigma, C_s^{-1} sigma)/2)
    to the quadrature of the two-stage Gaussian must not depend on sigma.
    Returns the worst deviation of the log-ratio from its per-pair mean."""
    if sched.beta <= 0:
        raise ValueError("convolution check needs beta > 0")
    rng = np.random.default_rng(seed)
    n = sched.n
    pairs = max(1, samples // 10)
    per = max(1, samples // pairs)
    worst = 0.0
    for _ in range(pairs):
        t, s = np.sort(rng.uniform(0.0, sched.beta, size=2))
        if s - t < 1e-3 * sched.beta:
            s = min(sched.beta, t + 0.1 * sched.beta + 1e-6)
        basis, scl = sched.increment_basis(t, s)
        pts, lw = _hermite_nodes(order, scl.size)
        phis = (pts * scl[None, :]) @ basis.T
        cinv_t = sched.inverse_covariance(t)
        cinv_s = sched.inverse_covariance(s)
        sigmas = sigma_scale * rng.standard_normal((per, n))
        diff = sigmas[:, None, :] - phis[None, :, :]
        quad = np.einsum("kpi,ij,kpj->kp", diff, cinv_t, diff, optimize=True)
        log_rhs = logsumexp(lw[None, :] - 0.5 * quad, axis=1)
        log_lhs = -0.5 * np.einsum("ki,ij,kj->k", sigmas, cinv_s, sigmas)
        dev = log_rhs - log_lhs
        worst = max(worst, float(np.max(np.abs(dev - dev.mean()))))
    return worst


def verify_entropy_decomposition(sched: CovarianceSchedule, h=None, F=None,
                                 order: int = 48, order_step: int = 10,
                                 quad_tol: float = 1e-9) -> DecompositionCheck:
    """Relative residual of Ent_{mu_beta,h}(F) against
    E_nu[Ent_{mu_0, h + alpha phi}(F)] + Ent_nu(G) with G(phi) the tilted
    product-measure mean of F. Only the start of the flow (t = 0) is checked;
    that is the only case the entropy split is used for."""
    n = sched.n
    hv = _resolve_field(n, h)
    fvals = _resolve_values(n, F)
    if float(np.min(fvals)) < -1e-12 * max(1.0, float(np.max(np.abs(fvals)))):
        raise ValueError("F must be nonnegative for entropy checks")
    fvals = np.maximum(fvals, 0.0)
    ens_beta = build_ensemble(sched.coupling, sched.beta, hv)
    lhs = entropy(ens_beta.probabilities, fvals)
    phi_f = xlogy(fvals, fvals)
    scale = max(abs(lhs),
                float(ens_beta.probabilities @ np.abs(phi_f)), 1e-300)
    if n > 3:
        raise ValueError("tensor quadrature is limited to n <= 3")
    rhs = {}
    for o in (order, order + order_step):
        _, w, P = _nu_weights(sched, 0.0, hv, o)
        g = P @ fvals
        ent_inner = P @ phi_f - xlogy(g, g)
        mean_g = float(w @ g)
        ent_outer = float(w @ xlogy(g, g) - xlogy(mean_g, mean_g))
        rhs[o] = float(w @ ent_inner) + ent_outer
    o_hi = order + order_step
    if abs(rhs[order] - rhs[o_hi]) > quad_tol * max(1.0, scale):
        raise NonConvergenceError(
            f"quadrature orders {order} and {o_hi} disagree by "
            f"{abs(rhs[order] - rhs[o_hi]):.3e}")
    return DecompositionCheck(residual=abs(rhs[o_hi] - lhs) / scale, order=o_hi)


def verify_criterion_matrix_inequality(sched: CovarianceSchedule, t: float,
                                       h=None, phi=None) -> float:
    """Smallest eigenvalue of the criterion slack
    Cdot_t He V_t(phi) Cdot_t - (1/2) Cddot_t + chi_t Cdot_t; nonnegative up
    to roundoff whenever the correlation chain holds."""
    t = sched._check_t(t, end_open=True, start_open=True)
    phi = np.zeros(sched.n) if phi is None else np.asarray(phi, dtype=float)
    cdot = sched.dot_covariance(t)
    cddot = sched.ddot_covariance(t)
    hess = potential_hessian(sched, t, h, phi)
    chi = susceptibility(sched.coupling, t)
    slack = cdot @ hess @ cdot - 0.5 * cddot + chi * cdot
    return float(np.linalg.eigvalsh(0.5 * (slack + slack.T))[0])


def criterion_slack_batch(sched: CovarianceSchedule, t: float,
                          h_batch: np.ndarray, phi_batch: np.ndarray) -> np.ndarray:
    """Smallest slack eigenvalue for a batch of (h, phi) pairs at one t."""
    t = sched._check_t(t, end_open=True, start_open=True)
    h_batch = np.atleast_2d(np.asarray(h_batch, dtype=float))
    phi_batch = np.atleast_2d(np.asarray(phi_batch, dtype=float))
    cinv = sched.inverse_covariance(t)
    fields = h_batch + phi_batch @ cinv
    sigmas = correlation_batch(sched.coupling, t, fields)
    cdot = sched.dot_covariance(t)
    cddot = sched.ddot_covariance(t)
    chi = susceptibility(sched.coupling, t)
    base = cdot @ cinv @ cdot - 0.5 * cddot + chi * cdot
    mixer = cdot @ cinv
    slack = base[None, :, :] - np.einsum(
        "ab,kbc,dc->kad", mixer, sigmas, mixer, optimize=True)
    slack = 0.5 * (slack + np.transpose(slack, (0, 2, 1)))
    return np.linalg.eigvalsh(slack)[:, 0]


def _monotone_integral(beta: float, chi: np.ndarray):
    """Certified enclosure and trapezoid value of int_0^beta exp(2 int_0^t chi).

    chi is sampled on the uniform grid 0..beta (inclusive) and must be
    nondecreasing; lower/upper Riemann brackets of the inner integral feed
    monotone brackets of the outer one.
    """
    npts = chi.size
    if npts < 2:
        return 0.0, 0.0, 0.0
    N = npts - 1
    step = beta / N
    if np.any(np.diff(chi) < -1e-10):
        raise ValueError("susceptibility grid is not nondecreasing")
    inner_low = step * np.concatenate([[0.0], np.cumsum(chi[:-1])])
    inner_up = step * np.concatenate([[0.0], np.cumsum(chi[1:])])
    inner_tr = step * np.concatenate([[0.0], np.cumsum(0.5 * (chi[1:] + chi[:-1]))])
    lower = step * float(np.exp(2.0 * inner_low[:-1]).sum())
    upper = step * float(np.exp(2.0 * inner_up[1:]).sum())
    value = float(np.trapezoid(np.exp(2.0 * inner_tr), dx=step))
    return lower, upper, value


@dataclass
class BoundReport:
    """Certified enclosure of the susceptibility-integral bound on the inverse
    log-Sobolev constant, with everything needed to audit it."""

    beta: float
    alpha: float
    grid_size: int
    t_grid: np.ndarray
    chi_values: np.ndarray
    bound_lower: float
    bound_upper: float
    bound_value: float
    coarse_bound: float
    criterion_lower: float
    criterion_upper: float
    criterion_value: float
    settings: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.bound_upper - self.bound_lower

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "alpha": self.alpha,
            "grid": self.grid_size,
            "t_grid": np.asarray(self.t_grid).tolist(),
            "chi_values": np.asarray(self.chi_values).tolist(),
            "bound_lower": self.bound_lower,
            "bound_upper": self.bound_upper,
            "bound_value": self.bound_value,
            "coarse_bound": self.coarse_bound,
            "criterion_intermediate": {
                "lower": self.criterion_lower,
                "upper": self.criterion_upper,
                "value": self.criterion_value,
            },
            "settings": dict(self.settings),
            "flags": list(self.flags),
        }


def _chi_fetcher(A, chi_fn, cap):
    if chi_fn is None:
        if A is None:
            raise ValueError("either a coupling matrix or chi_fn is required")
        ev = SusceptibilityEvaluator(A, cap=cap)
        return ev.grid, "exact"

    def fetch(ts):
        ts = np.asarray(ts, dtype=float)
        try:
            vals = np.asarray(chi_fn(ts), dtype=float)
            if vals.shape != ts.shape:
                raise TypeError
        except TypeError:
            vals = np.asarray([chi_fn(float(t)) for t in ts], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("chi_fn returned non-finite values")
        return vals

    return fetch, "synthetic"


def lsi_bound(A, beta: float, grid: int = 256, tol: float = 1e-6,
              alpha: float | None = None, chi_fn=None,
              max_grid: int = 1 << 18, cap: int | None = None) -> BoundReport:
    """Certified enclosure of 1/2 + int_0^beta exp(2 int_0^t chi_s ds) dt.

    chi is evaluated exactly on a uniform grid (or supplied synthetically via
    chi_fn); its monotonicity in t turns left/right Riemann sums into a true
    bracket of the bound, refined by grid doubling until the requested width
    or max_grid. The trapezoid value converges one order faster and is the
    reported point estimate. Also reports the coarse bound
    1/2 + beta exp(2 beta chi_beta) and the alpha-dependent intermediate.
    """
    beta = float(beta)
    if not (beta >= 0.0):
        raise ValueError("beta must be >= 0")
    alpha = beta + 1.0 if alpha is None else float(alpha)
    if not (alpha > beta):
        raise ValueError("alpha must exceed beta")
    fetch, source = _chi_fetcher(A, chi_fn, cap)
    if beta == 0.0:
        chi0 = float(fetch(np.array([0.0]))[0])
        return BoundReport(
            beta=0.0, alpha=alpha, grid_size=1, t_grid=np.array([0.0]),
            chi_values=np.array([chi0]), bound_lower=0.5, bound_upper=0.5,
            bound_value=0.5, coarse_bound=0.5, criterion_lower=0.0,
            criterion_upper=0.0, criterion_value=0.0,
            settings={"tol": tol, "refinements": 0, "chi_source": source},
            flags=[])

    N = max(1, int(grid))
    cache: dict[float, float] = {}

    def chi_on(tg: np.ndarray) -> np.ndarray:
        missing = [t for t in tg if t not in cache]
        if missing:
            vals = fetch(np.asarray(missing))
            cache.update(zip(missing, map(float, vals)))
        return np.asarray([cache[t] for t in tg])

    flags: list[str] = []
    refinements = 0
    while True:
        t_grid = beta * (np.arange(N + 1) / N)
        chi = chi_on(t_grid)
        lower, upper, value = _monotone_integral(beta, chi)
        if upper - lower <= tol:
            break
        if 2 * N > max_grid:
            flags.append("enclosure_tolerance_unreached")
            break
        N *= 2
        refinements += 1

    coarse = 0.5 + beta * math.exp(2.0 * beta * float(chi[-1]))
    a2 = alpha * alpha
    report = BoundReport(
        beta=beta, alpha=alpha, grid_size=N, t_grid=t_grid, chi_values=chi,
        bound_lower=0.5 + lower, bound_upper=0.5 + upper,
        bound_value=0.5 + value, coarse_bound=coarse,
        criterion_lower=lower / a2, criterion_upper=upper / a2,
        criterion_value=value / a2,
        settings={"tol": tol, "refinements": refinements, "chi_source": source},
        flags=flags)
    # assembly identity: 1/2 + alpha^2 * intermediate reproduces the bound
    assembled = 0.5 + a2 * report.criterion_value
    if abs(assembled - report.bound_value) > 1e-12 * max(1.0, report.bound_value):
        raise RuntimeError("alpha-assembly identity violated")
    return report


def criterion_bound(sched: CovarianceSchedule, t_grid, chi_values) -> float:
    """Alpha-dependent intermediate bound on 1/gamma for the field-tilting
    measure: (1/alpha^2) int_0^beta exp(2 int_0^t chi_s ds) dt on the given
    uniform susceptibility grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    chi_values = np.asarray(chi_values, dtype=float)
    if t_grid.size != chi_values.size:
        raise ValueError("grid and susceptibility arrays must align")
    if t_grid.size < 2:
        return 0.0
    expected = sched.beta * (np.arange(t_grid.size) / (t_grid.size - 1))
    if not np.allclose(t_grid, expected, rtol=0.0, atol=1e-12 * max(1.0, sched.beta)):
        raise ValueError("t_grid must be uniform from 0 to beta")
    _, _, value = _monotone_integral(sched.beta, chi_values)
    return value / sched.alpha ** 2


def meanfield_chi(D: float, beta_c: float):
    """Synthetic susceptibility chi_s = D / (beta_c - s), monotone on [0, beta_c)."""
    if D <= 0 or beta_c <= 0:
        raise ValueError("D and beta_c must be positive")

    def chi(ts):
        ts = np.asarray(ts, dtype=float)
        if np.any(ts >= beta_c):
            raise ValueError("chi diverges at beta_c")
        return D / (beta_c - ts)

    return chi


def meanfield_corollary(D: float, beta_c: float, beta: float | None = None,
                        L: float | None = None) -> float:
    """Closed-form bound under the mean-field susceptibility assumption.

    Without L: 1/2 + beta_c/(2D-1) [(1 - beta/beta_c)^{1-2D} - 1] for
    0 <= beta < beta_c. With L (finite volume, evaluated at beta_c):
    1/2 + (beta_c + L^{-2})/(2D-1) [(L^2 beta_c + 1)^{2D-1} - 1].
    """
    D = float(D)
    beta_c = float(beta_c)
    if D <= 0.5:
        raise ValueError("the mean-field exponent D must exceed 1/2")
    if beta_c <= 0:
        raise ValueError("beta_c must be positive")
    if L is None:
        if beta is None:
            raise ValueError("beta is required for the infinite-volume form")
        beta = float(beta)
        if not (0.0 <= beta < beta_c):
            raise ValueError("need 0 <= beta < beta_c in the infinite-volume form")
        return 0.5 + beta_c / (2.0 * D - 1.0) * ((1.0 - beta / beta_c) ** (1.0 - 2.0 * D) - 1.0)
    L = float(L)
    if L < 1:
        raise ValueError("L must be >= 1")
    if beta is not None and not math.isclose(float(beta), beta_c, rel_tol=1e-12):
        raise ValueError("the finite-volume form is evaluated at beta = beta_c")
    return 0.5 + (beta_c + L ** -2) / (2.0 * D - 1.0) * ((L * L * beta_c + 1.0) ** (2.0 * D - 1.0) - 1.0)
