"""Seeded desk-scale data generators for the experiment harness.

All generators are deterministic functions of (name, params, seed).  The
alternative families are Gaussian: a mean shift along the first
coordinate for two-sample and goodness-of-fit data, a per-coordinate
correlation for paired data, and a scale change as a second two-sample
alternative.  Their null settings are shift=0, rho=0 and scale=1.
"""

from __future__ import annotations

import numpy as np

from ..kernels import standard_gaussian_score, student_t_score
from ..resampling import TAG_DATA, stream
from ..statistics import ModelSampleData, PairedData, TwoSampleData

GENERATOR_NAMES = (
    "gaussian_mean_shift",
    "gaussian_scale",
    "correlated_gaussian_pairs",
    "gaussian_model_sample",
    "student_t_model_sample",
)


def _check_params(name: str, params: dict, allowed: dict) -> dict:
    unknown = set(params) - set(allowed)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)} for generator {name!r}")
    merged = {**allowed, **params}
    missing = [k for k, v in merged.items() if v is None]
    if missing:
        raise ValueError(f"generator {name!r} requires parameters {missing}")
    return merged


def _shifted(rng: np.random.Generator, n: int, dim: int, shift: float) -> np.ndarray:
    out = rng.normal(size=(n, dim))
    out[:, 0] += shift
    return out


def builtin_generator(name: str, params: dict, seed: int):
    """Build a dataset from a named generator; see GENERATOR_NAMES."""
    rng = stream(seed, TAG_DATA, 0)
    if name == "gaussian_mean_shift":
        p = _check_params(name, params, {"m": None, "n": None, "dim": 1, "shift": 0.0})
        return TwoSampleData(
            rng.normal(size=(int(p["m"]), int(p["dim"]))),
            _shifted(rng, int(p["n"]), int(p["dim"]), float(p["shift"])),
        )
    if name == "gaussian_scale":
        p = _check_params(name, params, {"m": None, "n": None, "dim": 1, "scale": 1.0})
        if p["scale"] <= 0:
            raise ValueError("scale must be positive")
        return TwoSampleData(
            rng.normal(size=(int(p["m"]), int(p["dim"]))),
            float(p["scale"]) * rng.normal(size=(int(p["n"]), int(p["dim"]))),
        )
    if name == "correlated_gaussian_pairs":
        p = _check_params(name, params, {"n": None, "dim": 1, "rho": 0.0})
        rho = float(p["rho"])
        if not (-1.0 < rho < 1.0):
            raise ValueError("rho must lie in (-1, 1)")
        n, dim = int(p["n"]), int(p["dim"])
        x = rng.normal(size=(n, dim))
        y = rho * x + np.sqrt(1.0 - rho**2) * rng.normal(size=(n, dim))
        return PairedData.from_parts(x, y)
    if name == "gaussian_model_sample":
        p = _check_params(name, params, {"n": None, "dim": 1, "shift": 0.0})
        x = _shifted(rng, int(p["n"]), int(p["dim"]), float(p["shift"]))
        return ModelSampleData.from_score_field(x, standard_gaussian_score())
    if name == "student_t_model_sample":
        p = _check_params(name, params, {"n": None, "dim": 1, "df": 5.0, "shift": 0.0})
        n, dim, df = int(p["n"]), int(p["dim"]), float(p["df"])
        z = rng.normal(size=(n, dim))
        g = rng.chisquare(df, size=(n, 1))
        x = z / np.sqrt(g / df)
        x[:, 0] += float(p["shift"])
        return ModelSampleData.from_score_field(x, student_t_score(df, dim))
    raise ValueError(f"unknown generator {name!r}; choose from {GENERATOR_NAMES}")
