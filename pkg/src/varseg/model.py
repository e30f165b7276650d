"""Core types for piecewise-stationary VAR models and tuning schedules.

A piecewise VAR(d) over T observations y_1, ..., y_T (rows of a T x p
matrix) is parameterized by break points t_1 < ... < t_m and one
coefficient matrix per segment.  A break at time t means y_t is the first
observation generated under the next segment's coefficients.  Each
segment coefficient is stored as a single p x (p*d) block
[Phi_1 | ... | Phi_d] acting on the stacked lag vector
(y_{t-1}', ..., y_{t-d}')'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# A segment counts as stationary only if its companion spectral radius is
# strictly below 1 - STATIONARITY_TOL.
STATIONARITY_TOL = 1e-8


def effective_sample_size(T: int, d: int) -> int:
    """Sample size n = T - d + 1 entering every tuning-parameter formula."""
    return T - d + 1


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(a, dtype=dtype))
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SegmentedVarModel:
    """Ground-truth description of a piecewise VAR(d) process.

    Attributes
    ----------
    p, d, T : int
        Dimension, lag order, series length.
    break_points : tuple of int
        Strictly increasing times in (d, T].
    segments : tuple of ndarray
        One p x (p*d) coefficient block per segment, len(break_points) + 1
        of them.
    noise_cov : ndarray
        p x p innovation covariance, shared across segments.
    """

    p: int
    d: int
    T: int
    break_points: tuple[int, ...]
    segments: tuple[np.ndarray, ...]
    noise_cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "break_points",
                           tuple(int(b) for b in self.break_points))
        object.__setattr__(self, "segments",
                           tuple(_frozen_array(s) for s in self.segments))
        object.__setattr__(self, "noise_cov", _frozen_array(self.noise_cov))

    @property
    def m0(self) -> int:
        return len(self.break_points)


@dataclass(frozen=True)
class TuningSchedule:
    """Penalty levels used by the two estimation stages.

    lambda_n drives the first-stage fused estimate, eta_n the per-segment
    refits, omega_n the per-break charge in the screening criterion;
    gamma_n is the localization rate used for coverage radii.
    """

    lambda_constant: float
    lambda_n: float
    eta_n: float
    omega_n: float
    gamma_n: float
    v_exponent: float


@dataclass
class ValidationReport:
    ok: bool
    issues: list[tuple[str, str]]

    def messages(self) -> list[str]:
        return [msg for _, msg in self.issues]


def companion_spectral_radius(segment: np.ndarray, p: int, d: int) -> float:
    """Spectral radius of the (p*d) x (p*d) companion matrix of one segment."""
    seg = np.asarray(segment, dtype=float)
    if seg.shape != (p, p * d):
        raise ValueError(f"segment must be {p} x {p * d}, got {seg.shape}")
    if d == 1:
        comp = seg
    else:
        comp = np.zeros((p * d, p * d))
        comp[:p, :] = seg
        comp[p:, : p * (d - 1)] = np.eye(p * (d - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def validate_model(model: SegmentedVarModel) -> ValidationReport:
    """Collect structural and stationarity issues; never raises on bad input."""
    issues: list[tuple[str, str]] = []

    if model.p < 1 or model.d < 1 or model.T < 1:
        issues.append(("bad_dims", f"p={model.p}, d={model.d}, T={model.T} "
                       "must all be positive"))
        return ValidationReport(False, issues)

    breaks = model.break_points
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        issues.append(("breaks_not_increasing", "breaks not increasing"))
    for b in breaks:
        if not (model.d < b <= model.T):
            issues.append(("break_out_of_range",
                           f"break {b} outside ({model.d}, {model.T}]"))

    if len(model.segments) != len(breaks) + 1:
        issues.append(("segment_count",
                       f"{len(model.segments)} segments for {len(breaks)} breaks"))

    want = (model.p, model.p * model.d)
    for j, seg in enumerate(model.segments, start=1):
        if seg.shape != want:
            issues.append(("segment_shape",
                           f"segment {j} has shape {seg.shape}, want {want}"))
            continue
        if not np.all(np.isfinite(seg)):
            issues.append(("segment_not_finite", f"segment {j} not finite"))
            continue
        rho = companion_spectral_radius(seg, model.p, model.d)
        if rho >= 1.0 - STATIONARITY_TOL:
            issues.append(("nonstationary_segment",
                           f"segment {j} nonstationary (spectral radius {rho:.6f})"))

    cov = model.noise_cov
    if cov.shape != (model.p, model.p):
        issues.append(("noise_cov_shape",
                       f"noise_cov has shape {cov.shape}, want {(model.p, model.p)}"))
    elif not np.all(np.isfinite(cov)):
        issues.append(("noise_cov_not_finite", "noise_cov not finite"))
    else:
        asym = float(np.max(np.abs(cov - cov.T)))
        if asym > 1e-12 * max(1.0, float(np.max(np.abs(cov)))):
            issues.append(("noise_cov_not_symmetric",
                           f"noise_cov asymmetry {asym:.3e}"))
        else:
            try:
                np.linalg.cholesky(0.5 * (cov + cov.T))
            except np.linalg.LinAlgError:
                issues.append(("noise_cov_not_positive_definite",
                               "noise_cov is not positive definite"))

    return ValidationReport(not issues, issues)


def default_schedule(n, p: int, d: int, C: float, v: float = 0.5) -> TuningSchedule:
    """Rate-based penalty levels for sample size n, dimension p, lag d.

    lambda_n = 2 C sqrt((log n + 2 log p + log d) / n)
    gamma_n  = (log n * log p) / n,   eta_n = gamma_n
    omega_n  = (log n * log p)^(1 + v)

    log p is floored at 1 inside gamma_n and omega_n so every level stays
    strictly positive for p <= 2.
    """
    if n <= max(2, d):
        raise ValueError(f"n={n} too small for d={d}")
    if p < 1 or d < 1:
        raise ValueError("p and d must be >= 1")
    if C <= 0:
        raise ValueError("C must be positive")
    if v <= 0:
        raise ValueError("v must be positive")
    log_n = math.log(n)
    lam = 2.0 * C * math.sqrt((log_n + 2.0 * math.log(p) + math.log(d)) / n)
    log_p = max(math.log(p), 1.0)
    gamma = log_n * log_p / n
    omega = (log_n * log_p) ** (1.0 + v)
    return TuningSchedule(lambda_constant=float(C), lambda_n=float(lam),
                          eta_n=float(gamma), omega_n=float(omega),
                          gamma_n=float(gamma), v_exponent=float(v))
