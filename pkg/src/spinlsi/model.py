"""Coupling matrices for ferromagnetic spin models on named lattices and custom graphs.

The working convention used everywhere downstream: a coupling matrix is
symmetric, has nonpositive off-diagonal entries, is positive definite, and has
spectral norm 1. Raw couplings (graph adjacency scaled by -J, or a
user-supplied matrix) are brought into that form by a diagonal shift plus a
global rescale. The shift never changes the spin measure (sigma_x^2 = 1); the
rescale does change the meaning of the inverse temperature, so both are
recorded so reports can relate working temperatures back to raw couplings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

KINDS = ("path", "cycle", "grid2d", "complete", "custom")

#: diagonal margin added beyond bare positive definiteness; keeps the flow
#: covariances well conditioned near the end of the schedule
SHIFT_MARGIN = 0.5

_EIG_TOL = 1e-12


def _require_symmetric(M: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{what} has non-finite entries")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and float(np.max(np.abs(M - M.T))) > 1e-12 * scale:
        raise ValueError(f"{what} must be symmetric")


def _require_ferromagnetic(M: np.ndarray, what: str) -> None:
    off = M - np.diag(np.diag(M))
    if off.size and float(np.max(off)) > _EIG_TOL:
        raise ValueError(f"{what} has a positive off-diagonal entry")


def spectral_radius(M, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest absolute eigenvalue of a symmetric matrix.

    Dense eigendecomposition for n <= 64; power iteration on M^2 above (robust
    against +/- eigenvalue pairs), iterated until the Rayleigh quotient moves
    by less than `tol`.
    """
    M = np.asarray(M, dtype=float)
    _require_symmetric(M, "matrix")
    n = M.shape[0]
    if n == 0:
        raise ValueError("matrix is empty")
    if n <= 64:
        return float(np.max(np.abs(np.linalg.eigvalsh(M))))
    v = np.ones(n) + 1e-3 * np.sin(np.arange(n))
    v /= np.linalg.norm(v)
    lam2 = 0.0
    for _ in range(max_iter):
        w = M @ (M @ v)
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        new = float(v @ (M @ (M @ v)))
        if abs(new - lam2) <= tol * max(1.0, abs(new)):
            lam2 = new
            break
        lam2 = new
    return math.sqrt(max(lam2, 0.0))


@dataclass(frozen=True)
class NormalizationRecord:
    """How a raw coupling matrix was turned into the working one.

    A working inverse temperature beta corresponds to beta * scale on the raw
    couplings; the shift is invisible to the spin measure.
    """

    shift: float
    scale: float
    min_eigenvalue: float
    max_eigenvalue: float

    def to_dict(self) -> dict:
        return {
            "shift": self.shift,
            "scale": self.scale,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationRecord":
        return cls(
            shift=float(d["shift"]),
            scale=float(d["scale"]),
            min_eigenvalue=float(d["min_eigenvalue"]),
            max_eigenvalue=float(d["max_eigenvalue"]),
        )


@dataclass(eq=False)
class CouplingMatrix:
    """Validated working coupling: symmetric, ferromagnetic off-diagonal,
    positive definite, spectral norm at most 1."""

    matrix: np.ndarray
    normalization: NormalizationRecord | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        _require_symmetric(self.matrix, "coupling matrix")
        if self.matrix.shape[0] == 0:
            raise ValueError("coupling matrix is empty")
        _require_ferromagnetic(self.matrix, "coupling matrix")
        eigs = np.linalg.eigvalsh(self.matrix)
        if eigs[0] <= 0.0:
            raise ValueError("coupling matrix must be positive definite")
        if eigs[-1] > 1.0 + 1e-12:
            raise ValueError("coupling matrix must have spectral norm <= 1")
        self.eigenvalues = eigs

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def adjacency(kind: str, params: dict) -> np.ndarray:
    """0/1 adjacency matrix of a named lattice (free boundary unless stated)."""
    if kind == "path":
        length = int(params["length"])
        if length < 1:
            raise ValueError("path needs length >= 1")
        adj = np.zeros((length, length))
        for i in range(length - 1):
            adj[i, i + 1] = adj[i + 1, i] = 1.0
        return adj
    if kind == "cycle":
        length = int(params["length"])
        if length < 3:
            raise ValueError("cycle needs length >= 3")
        adj = np.zeros((length, length))
        for i in range(length):
            j = (i + 1) % length
            adj[i, j] = adj[j, i] = 1.0
        return adj
    if kind == "grid2d":
        width = int(params["width"])
        height = int(params["height"])
        periodic = bool(params.get("periodic", False))
        if width < 1 or height < 1:
            raise ValueError("grid2d needs width, height >= 1")
        if periodic and (width < 3 or height < 3):
            raise ValueError("periodic grid2d needs width, height >= 3")
        n = width * height
        adj = np.zeros((n, n))
        for r in range(height):
            for c in range(width):
                site = r * width + c
                if c + 1 < width or periodic:
                    right = r * width + (c + 1) % width
                    adj[site, right] = adj[right, site] = 1.0
                if r + 1 < height or periodic:
                    down = ((r + 1) % height) * width + c
                    adj[site, down] = adj[down, site] = 1.0
        return adj
    if kind == "complete":
        n = int(params["n"])
        if n < 1:
            raise ValueError("complete graph needs n >= 1")
        return np.ones((n, n)) - np.eye(n)
    raise ValueError(f"unknown lattice kind {kind!r}")


@dataclass
class ModelSpec:
    """Model description: lattice (or custom couplings), coupling strength,
    inverse temperature, external field, and the flow shift parameter alpha."""

    kind: str
    params: dict = field(default_factory=dict)
    J: float = 1.0
    beta: float = 0.0
    h: Any = 0.0
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.J = float(self.J)
        self.beta = float(self.beta)
        if not (self.J >= 0.0):
            raise ValueError("coupling strength J must be >= 0")
        if not (self.beta >= 0.0):
            raise ValueError("inverse temperature beta must be >= 0")
        if self.alpha is not None:
            self.alpha = float(self.alpha)
            if not (self.alpha > self.beta):
                raise ValueError("alpha must exceed beta")

    @property
    def n(self) -> int:
        if self.kind == "path" or self.kind == "cycle":
            return int(self.params["length"])
        if self.kind == "grid2d":
            return int(self.params["width"]) * int(self.params["height"])
        if self.kind == "complete":
            return int(self.params["n"])
        return np.asarray(self.params["matrix"]).shape[0]

    @property
    def alpha_value(self) -> float:
        return self.alpha if self.alpha is not None else self.beta + 1.0

    def field_vector(self) -> np.ndarray:
        h = np.asarray(self.h, dtype=float)
        if h.ndim == 0:
            h = np.full(self.n, float(h))
        if h.shape != (self.n,):
            raise ValueError(f"field must be a scalar or length-{self.n} vector")
        if not np.all(np.isfinite(h)):
            raise ValueError("field has non-finite entries")
        return h

    def label(self) -> str:
        if self.kind == "grid2d":
            tag = f"{self.params['width']}x{self.params['height']}"
            if self.params.get("periodic"):
                tag += "p"
            return f"grid{tag}"
        return f"{self.kind}{self.n}"

    def to_dict(self) -> dict:
        params = dict(self.params)
        if "matrix" in params:
            params["matrix"] = np.asarray(params["matrix"], dtype=float).tolist()
        h = self.h.tolist() if isinstance(self.h, np.ndarray) else self.h
        out = {"kind": self.kind, "params": params, "J": self.J,
               "beta": self.beta, "h": h}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        if "kind" not in d:
            raise ValueError("model spec needs a 'kind' key")
        return cls(
            kind=d["kind"],
            params=dict(d.get("params", {})),
            J=d.get("J", 1.0),
            beta=d.get("beta", 0.0),
            h=d.get("h", 0.0),
            alpha=d.get("alpha"),
        )


def load_model_spec(path) -> ModelSpec:
    with open(Path(path)) as fh:
        return ModelSpec.from_dict(json.load(fh))


def save_model_spec(spec: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def normalize_coupling(raw: np.ndarray) -> tuple[np.ndarray, NormalizationRecord]:
    """Shift the diagonal until positive definite (margin SHIFT_MARGIN), then
    rescale to unit spectral norm. Idempotent on already-normalized input."""
    raw = np.asarray(raw, dtype=float)
    _require_symmetric(raw, "raw coupling matrix")
    _require_ferromagnetic(raw, "raw coupling matrix")
    n = raw.shape[0]
    if n == 0:
        raise ValueError("raw coupling matrix is empty")
    eigs = np.linalg.eigvalsh(raw)
    lam_min = float(eigs[0])
    lam_max = float(eigs[-1])
    shift = abs(lam_min) + SHIFT_MARGIN if lam_min <= _EIG_TOL else 0.0
    top = lam_max + shift
    scale = 1.0 if abs(top - 1.0) <= _EIG_TOL else 1.0 / top
    working = scale * (raw + shift * np.eye(n))
    record = NormalizationRecord(
        shift=shift,
        scale=scale,
        min_eigenvalue=scale * (lam_min + shift),
        max_eigenvalue=scale * top,
    )
    return working, record


def build_coupling(spec: ModelSpec) -> CouplingMatrix:
    """Working coupling matrix for a model spec.

    Named lattices get -J on each edge; custom matrices are taken as provided
    (J is ignored). Both are then normalized.
    """
    if spec.kind == "custom":
        if "matrix" not in spec.params:
            raise ValueError("custom model needs params['matrix']")
        raw = np.asarray(spec.params["matrix"], dtype=float)
        _require_symmetric(raw, "custom coupling matrix")
        _require_ferromagnetic(raw, "custom coupling matrix")
    else:
        raw = -spec.J * adjacency(spec.kind, spec.params)
    working, record = normalize_coupling(raw)
    return CouplingMatrix(matrix=working, normalization=record)
