"""Seeded simulation of piecewise VAR processes and the benchmark scenarios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SegmentedVarModel, companion_spectral_radius, validate_model

# Spawn key for model generation so random coefficient draws never consume
# from the same stream as the noise (which is seeded with the bare seed).
_MODEL_STREAM = 1


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    model: SegmentedVarModel
    seed: int
    burn_in: int = 200


@dataclass(frozen=True)
class ScenarioPreset:
    """Fixed benchmark setup: T=300, p=20, d=1, two breaks, noise 0.01 * I."""

    name: str
    breaks: tuple[int, ...]
    T: int = 300
    p: int = 20
    d: int = 1
    noise_scale: float = 0.01
    # S1/S2: diagonal plus one off-diagonal band, same support in every
    # segment with segment-specific values.
    diag_values: tuple[float, float, float] = (0.6, -0.4, 0.5)
    band_values: tuple[float, float, float] = (0.1, -0.1, 0.1)
    # S3: random support with 2 nonzeros per row, |value| in [0.2, 0.4].
    random_structure: bool = False
    nnz_per_row: int = 2
    value_low: float = 0.2
    value_high: float = 0.4
    max_spectral_radius: float = 0.9


_PRESETS = {
    1: ScenarioPreset(name="S1_center", breaks=(100, 200)),
    2: ScenarioPreset(name="S2_boundary", breaks=(30, 250)),
    3: ScenarioPreset(name="S3_random", breaks=(100, 200), random_structure=True),
}


def scenario_preset(which: int | str) -> ScenarioPreset:
    if isinstance(which, str):
        for preset in _PRESETS.values():
            if preset.name == which:
                return preset
        which = int(which)
    try:
        return _PRESETS[which]
    except KeyError:
        raise ValueError(f"unknown scenario {which!r}; choose 1, 2 or 3") from None


def _banded(p: int, diag: float, band: float) -> np.ndarray:
    mat = diag * np.eye(p)
    idx = np.arange(p - 1)
    mat[idx, idx + 1] = band
    return mat


def _random_sparse_stable(rng: np.random.Generator, preset: ScenarioPreset) -> np.ndarray:
    p = preset.p
    for _ in range(1000):
        mat = np.zeros((p, p))
        for row in range(p):
            cols = rng.choice(p, size=preset.nnz_per_row, replace=False)
            vals = rng.uniform(preset.value_low, preset.value_high,
                               size=preset.nnz_per_row)
            signs = rng.choice([-1.0, 1.0], size=preset.nnz_per_row)
            mat[row, cols] = signs * vals
        rho = companion_spectral_radius(mat, p, 1)
        if rho <= preset.max_spectral_radius:
            return mat
    # Rejection is astronomically unlikely to run this long; rescale so the
    # routine still terminates.
    return mat * (preset.max_spectral_radius / rho) * 0.98


def make_scenario(preset: ScenarioPreset, seed: int) -> SimulationConfig:
    """Build the seeded simulation config for one benchmark replicate."""
    n_seg = len(preset.breaks) + 1
    if preset.random_structure:
        rng = np.random.default_rng([_MODEL_STREAM, seed])
        while True:
            segments = [_random_sparse_stable(rng, preset) for _ in range(n_seg)]
            if all(np.any(a != b) for a, b in zip(segments, segments[1:])):
                break
    else:
        segments = [_banded(preset.p, dv, bv)
                    for dv, bv in zip(preset.diag_values[:n_seg],
                                      preset.band_values[:n_seg])]
    model = SegmentedVarModel(
        p=preset.p, d=preset.d, T=preset.T,
        break_points=preset.breaks,
        segments=tuple(segments),
        noise_cov=preset.noise_scale * np.eye(preset.p),
    )
    return SimulationConfig(model=model, seed=seed)


def simulate(config: SimulationConfig) -> np.ndarray:
    """Generate the T x p series for a validated model.

    The recursion starts from zero lags, runs `burn_in` steps under the
    first segment's coefficients, then continues through every segment
    without re-initializing, so the state carries across breaks.  The main
    T noise rows are drawn before the burn-in rows: with all-zero
    coefficients the output equals the noise sequence regardless of
    burn_in.
    """
    model = config.model
    report = validate_model(model)
    if not report.ok:
        raise ValueError("invalid model: " + "; ".join(report.messages()))
    if config.burn_in < 0:
        raise ValueError("burn_in must be >= 0")

    p, d, T = model.p, model.d, model.T
    rng = np.random.default_rng(config.seed)
    chol = np.linalg.cholesky(0.5 * (model.noise_cov + model.noise_cov.T))
    eps_main = rng.standard_normal((T, p)) @ chol.T
    eps_burn = rng.standard_normal((config.burn_in, p)) @ chol.T

    # state holds (y_{t-1}', ..., y_{t-d}')'.
    state = np.zeros(p * d)
    first = model.segments[0]
    for t in range(config.burn_in):
        y = first @ state + eps_burn[t]
        state = np.concatenate([y, state[: p * (d - 1)]])

    out = np.empty((T, p))
    boundaries = list(model.break_points) + [T + 1]
    seg_idx = 0
    for t in range(1, T + 1):
        while t >= boundaries[seg_idx]:
            seg_idx += 1
        y = model.segments[seg_idx] @ state + eps_main[t - 1]
        out[t - 1] = y
        state = np.concatenate([y, state[: p * (d - 1)]])
    return out
