"""Numerical tolerance constants shared by every module."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    classify: float = 1e-10
    probability: float = 1e-10
    impossible: float = 1e-12  # conditioning below this is treated as a zero-probability branch
    state: float = 1e-12
    unit_norm: float = 1e-9
    direction_norm: float = 1e-12
    weights: float = 1e-12
    lightlike: float = 1e-12
    simultaneity: float = 1e-12
    beta_margin: float = 1e-12
    rank: float = 1e-10
    feasibility: float = 1e-9
    marginals: float = 1e-10


TOL = Tolerances()
