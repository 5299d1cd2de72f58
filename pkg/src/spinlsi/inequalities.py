"""Batch verification of the correlation-inequality chain on exact models:
FKG positivity of truncated correlations, their entrywise monotonicity in the
external field, the Perron/spectral-radius comparison against the
susceptibility, and the bound-versus-optimizer battery.

Samplers are seeded and deterministic: identical seeds reproduce reports
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .exact import correlation_batch, coupling_array, susceptibility, truncated_correlation
from .flow import lsi_bound
from .glauber import build_generator, estimate_inverse_lsi

DEFAULT_SCALES = (0.1, 1.0, 10.0)


def field_battery(n: int, count: int, seed=0,
                  scales=DEFAULT_SCALES, spike: float = 50.0) -> np.ndarray:
    """Deterministic extremes (zero field, uniform +/-5, axis spikes) followed
    by isotropic Gaussians with cycled scales."""
    if count < 1:
        raise ValueError("count must be >= 1")
    head = [np.zeros(n), np.full(n, 5.0), np.full(n, -5.0)]
    for x in range(n):
        e = np.zeros(n)
        e[x] = spike
        head.append(e.copy())
        head.append(-e)
    head = np.asarray(head)[:count]
    extra = count - head.shape[0]
    if extra <= 0:
        return head
    rng = np.random.default_rng(seed)
    cycle = np.asarray(scales)[np.arange(extra) % len(scales)]
    tail = rng.standard_normal((extra, n)) * cycle[:, None]
    return np.vstack([head, tail])


@dataclass
class ViolationReport:
    """Worst observed slack for one check at one inverse temperature.

    Slack is the signed margin (nonnegative means the inequality holds);
    samples dipping below zero but within tolerance are numerical noise and
    counted separately from violations.
    """

    check: str
    model: str
    t: float
    samples: int
    tolerance: float
    violations: int
    worst_slack: float
    worst_witness: dict
    noise_count: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "model": self.model,
            "t": self.t,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "violations": self.violations,
            "worst_slack": self.worst_slack,
            "worst_witness": self.worst_witness,
            "noise_count": self.noise_count,
        }


def _classify(slacks: np.ndarray, tolerance: float) -> tuple[int, int]:
    violations = int(np.sum(slacks < -tolerance))
    noise = int(np.sum((slacks < 0.0) & (slacks >= -tolerance)))
    return violations, noise


def check_fkg(A, t: float, count: int = 2000, seed=0, tolerance: float = 1e-10,
              scales=DEFAULT_SCALES, model: str = "") -> ViolationReport:
    """Entrywise nonnegativity of the truncated correlations at sampled fields."""
    M = coupling_array(A)
    n = M.shape[0]
    fields = field_battery(n, count, seed, scales)
    sigmas = correlation_batch(M, t, fields)
    flat = sigmas.reshape(fields.shape[0], -1)
    per_sample = flat.min(axis=1)
    k = int(np.argmin(per_sample))
    x, y = np.unravel_index(int(np.argmin(flat[k])), (n, n))
    violations, noise = _classify(per_sample, tolerance)
    witness = {"field": fields[k].tolist(), "x": int(x), "y": int(y),
               "value": float(flat[k].min())}
    return ViolationReport("fkg", model, float(t), fields.shape[0], tolerance,
                           violations, float(per_sample.min()), witness, noise)


def check_field_monotonicity(A, t: float, count: int = 2000, seed=0,
                             tolerance: float = 1e-10, scales=DEFAULT_SCALES,
                             model: str = "") -> ViolationReport:
    """Entrywise domination of field-tilted truncated correlations by the
    zero-field ones."""
    M = coupling_array(A)
    n = M.shape[0]
    fields = field_battery(n, count, seed, scales)
    sigmas = correlation_batch(M, t, fields)
    sigma0 = truncated_correlation(M, t)
    diff = (sigma0[None, :, :] - sigmas).reshape(fields.shape[0], -1)
    per_sample = diff.min(axis=1)
    k = int(np.argmin(per_sample))
    x, y = np.unravel_index(int(np.argmin(diff[k])), (n, n))
    violations, noise = _classify(per_sample, tolerance)
    witness = {"field": fields[k].tolist(), "x": int(x), "y": int(y),
               "value": float(diff[k].min())}
    return ViolationReport("field-monotonicity", model, float(t),
                           fields.shape[0], tolerance, violations,
                           float(per_sample.min()), witness, noise)


def _perron_minima(sigmas: np.ndarray, iters: int = 200) -> np.ndarray:
    """Signed Perron slack per sample: the most negative entry of the top
    eigenvector (power iteration from a positive start, sup-normalized),
    measured in correlation-entry units. Saturated fields shrink a matrix to
    roundoff scale; rescaling by its sup keeps the slack commensurate with the
    entrywise checks instead of amplifying eigenvector noise."""
    k, n, _ = sigmas.shape
    v = np.ones((k, n)) / np.sqrt(n)
    for _ in range(iters):
        w = np.einsum("kij,kj->ki", sigmas, v)
        norms = np.linalg.norm(w, axis=1)
        alive = norms > 1e-300
        v = np.where(alive[:, None], w / np.maximum(norms, 1e-300)[:, None], v)
    sup = np.max(np.abs(v), axis=1)
    minima = v.min(axis=1) / np.maximum(sup, 1e-300)
    scale = np.max(np.abs(sigmas), axis=(1, 2))
    return minima * np.minimum(scale, 1.0)


def check_pf_chain(A, t: float, count: int = 2000, seed=0,
                   tolerance: float = 1e-10, scales=DEFAULT_SCALES,
                   model: str = "") -> ViolationReport:
    """Spectral-radius chain: each tilted correlation norm stays below the
    zero-field norm, which stays below the susceptibility; the top eigenvector
    is entrywise nonnegative up to sign."""
    M = coupling_array(A)
    n = M.shape[0]
    fields = field_battery(n, count, seed, scales)
    sigmas = correlation_batch(M, t, fields)
    eigs = np.linalg.eigvalsh(sigmas)
    radii = np.maximum(np.abs(eigs[:, 0]), np.abs(eigs[:, -1]))
    sigma0 = truncated_correlation(M, t)
    eig0 = np.linalg.eigvalsh(sigma0)
    radius0 = float(max(abs(eig0[0]), abs(eig0[-1])))
    chi = susceptibility(M, t)
    slack_norm = radius0 - radii
    slack_chi = chi - radius0
    slack_perron = _perron_minima(sigmas)
    per_sample = np.minimum(np.minimum(slack_norm, slack_chi), slack_perron)
    k = int(np.argmin(per_sample))
    kinds = ["norm-vs-zero-field", "zero-field-vs-chi", "perron-positivity"]
    which = int(np.argmin([slack_norm[k], slack_chi, slack_perron[k]]))
    violations, noise = _classify(per_sample, tolerance)
    witness = {"field": fields[k].tolist(), "kind": kinds[which],
               "radius": float(radii[k]), "radius0": radius0, "chi": float(chi)}
    return ViolationReport("pf-chain", model, float(t), fields.shape[0],
                           tolerance, violations, float(per_sample.min()),
                           witness, noise)


@dataclass
class TheoremCheck:
    """Bound-versus-optimizer battery: for every inverse temperature the best
    candidate ratio must stay below the certified upper enclosure, uniformly
    over all sampled fields."""

    model: str
    tolerance: float
    rows: list = field(default_factory=list)
    violations: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"check": "theorem", "model": self.model,
                "tolerance": self.tolerance, "violations": self.violations,
                "rows": list(self.rows)}


def check_theorem(A, betas, field_count: int = 10, field_scale: float = 1.0,
                  restarts: int = 2, iters: int = 200, seed=0,
                  tolerance: float = 1e-8, bound_grid: int = 256,
                  bound_tol: float = 1e-3, model: str = "",
                  threads: int = 1) -> TheoremCheck:
    M = coupling_array(A)
    n = M.shape[0]
    out = TheoremCheck(model=model, tolerance=tolerance)

    def one_beta(item):
        i, beta = item
        report = lsi_bound(M, float(beta), grid=bound_grid, tol=bound_tol)
        upper = report.bound_upper
        rng = np.random.default_rng([int(seed), 11, i])
        hs = np.vstack([np.zeros(n),
                        field_scale * rng.standard_normal((max(field_count - 1, 0), n))])
        best = -np.inf
        row_viol = 0
        for h in hs[:max(field_count, 1)]:
            gen = build_generator(M, float(beta), h)
            est = estimate_inverse_lsi(gen, restarts=restarts, iters=iters,
                                       seed=seed)
            best = max(best, est.ratio)
            if est.ratio > upper + tolerance:
                row_viol += 1
        return {
            "beta": float(beta),
            "bound_upper": float(upper),
            "best_ratio": float(best),
            "tightness_gap": float(upper - best),
            "fields": int(hs[:max(field_count, 1)].shape[0]),
            "violations": row_viol,
        }

    rows = parallel_map(one_beta,
                        list(enumerate(np.asarray(betas, dtype=float))), threads)
    for row in rows:
        out.violations += row["violations"]
        out.rows.append(row)
    return out
