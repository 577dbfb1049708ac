"""Parameters of the Weinstein operator.

L_a u = u_rr + (a/r) u_r + Delta_y u  on the half space r > 0, y in R^k.

The pair (a, k) fixes the weighted geometry: the natural measure is
|r|^a dr dy and the operator behaves like a Laplacian in effective
dimension a + 1 + k.  All solvers and quadratures in this package take a
WeinsteinParams instance.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class WeinsteinParams:
    a: float
    k: int

    def __post_init__(self):
        if not isinstance(self.k, int):
            raise ConfigError(f"k must be an integer, got {self.k!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not (self.a >= 0.0):
            raise ConfigError(f"a must be >= 0, got {self.a}")

    @property
    def dim_eff(self) -> float:
        """Effective dimension a + 1 + k of the weighted space."""
        return self.a + 1.0 + self.k
