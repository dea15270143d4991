"""Weighted least-squares DC state estimation.

Measurement model: z = H x + e, with e_i ~ N(0, sigma_i^2) independent.
The WLS estimate solves the normal equations

    x_hat = (H' R^-1 H)^-1 H' R^-1 z,      R = diag(sigma_i^2),

and the goodness-of-fit objective is J = sum_i (r_i / sigma_i)^2 with
r = z - H x_hat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, SingularGainMatrix, ValidationError
from .network import MeasurementMatrix


@dataclass(frozen=True)
class WeightModel:
    """Per-meter standard deviations (per-unit). All strictly positive."""

    sigmas: np.ndarray

    def __post_init__(self):
        sig = np.atleast_1d(np.asarray(self.sigmas, dtype=float))
        if sig.ndim != 1:
            raise ValidationError("sigmas must be a 1-D vector")
        if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
            raise ValidationError("all sigmas must be finite and > 0")
        object.__setattr__(self, "sigmas", sig)

    def __len__(self) -> int:
        return len(self.sigmas)


@dataclass(frozen=True)
class EstimationResult:
    state: np.ndarray       # x_hat, radians, non-slack buses
    fitted: np.ndarray      # H x_hat
    residual: np.ndarray    # z - H x_hat
    objective: float        # J = sum((r_i / sigma_i)^2)
    sigmas: np.ndarray


def _h_values(H) -> np.ndarray:
    if isinstance(H, MeasurementMatrix):
        return H.values
    return np.asarray(H, dtype=float)


def _sigma_values(w, m: int, allow_zero: bool = False) -> np.ndarray:
    sig = w.sigmas if isinstance(w, WeightModel) else np.atleast_1d(np.asarray(w, dtype=float))
    if sig.shape != (m,):
        raise DimensionMismatch(f"expected {m} sigmas, got shape {sig.shape}")
    if not allow_zero and np.any(sig <= 0):
        raise ValidationError("all sigmas must be > 0")
    if np.any(sig < 0):
        raise ValidationError("sigmas must be >= 0")
    return sig


def wls_estimate(H, z, w) -> EstimationResult:
    """Solve the weighted normal equations for the state estimate.

    ``H`` may be a MeasurementMatrix or a plain (m, n) array; ``w`` a
    WeightModel or a sigma vector. Raises SingularGainMatrix when
    H' R^-1 H is not invertible (unobservable configuration).
    """
    Hv = _h_values(H)
    z = np.asarray(z, dtype=float).reshape(-1)
    m, n = Hv.shape
    if z.shape[0] != m:
        raise DimensionMismatch(f"z has {z.shape[0]} entries, H has {m} rows")
    sig = _sigma_values(w, m)

    Hw = Hv / sig[:, None]          # R^-1/2 H
    zw = z / sig
    gain = Hw.T @ Hw                # H' R^-1 H
    try:
        cho = scipy.linalg.cho_factor(gain)
        state = scipy.linalg.cho_solve(cho, Hw.T @ zw)
    except scipy.linalg.LinAlgError as exc:
        raise SingularGainMatrix(f"gain matrix is singular: {exc}") from exc
    fitted = Hv @ state
    residual = z - fitted
    objective = float(np.sum((residual / sig) ** 2))
    return EstimationResult(
        state=state, fitted=fitted, residual=residual, objective=objective, sigmas=sig
    )


def simulate_measurements(H, x_true, w, seed=None) -> np.ndarray:
    """Draw z = H x_true + e with e_i ~ N(0, sigma_i^2), deterministic per seed.

    ``w`` may contain zeros here (noiseless meters); ``seed`` is anything
    ``numpy.random.default_rng`` accepts, including a Generator.
    """
    Hv = _h_values(H)
    x_true = np.asarray(x_true, dtype=float).reshape(-1)
    m, n = Hv.shape
    if x_true.shape[0] != n:
        raise DimensionMismatch(f"x_true has {x_true.shape[0]} entries, H has {n} columns")
    sig = _sigma_values(w, m, allow_zero=True)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Hv @ x_true + rng.standard_normal(m) * sig


def residual_norm(res: EstimationResult) -> float:
    """L2 norm of the weighted residual (r_i / sigma_i); equals sqrt(J)."""
    return float(np.linalg.norm(res.residual / res.sigmas))
