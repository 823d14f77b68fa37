"""Error draws and SAR responses via a truncated Neumann series."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np

from .errors import ConfigError, DomainError
from .netcore import WeightMatrix, spmv

__all__ = [
    "ErrorDist",
    "DgpConfig",
    "ResponseVector",
    "draw_errors",
    "gen_response",
    "neumann_terms_needed",
    "write_response",
    "load_response",
]


class ErrorDist(str, enum.Enum):
    NORM = "norm"
    EXP = "exp"

    @classmethod
    def parse(cls, value) -> "ErrorDist":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown error distribution {value!r}") from None


@dataclass(frozen=True)
class DgpConfig:
    rho: float
    error_dist: ErrorDist = ErrorDist.EXP
    neumann_tol: float = 1e-10
    m_cap: int = 500
    seed: Optional[int] = None

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ConfigError("|rho| must be < 1")
        if not self.neumann_tol > 0:
            raise ConfigError("neumann_tol must be positive")
        object.__setattr__(self, "error_dist", ErrorDist.parse(self.error_dist))


@dataclass(frozen=True)
class ResponseVector:
    y: np.ndarray
    truncation_m: int
    capped: bool = False


def draw_errors(dist, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. errors with mean 0 and variance 1.

    ``EXP`` is a standard exponential shifted by -1 (fourth moment 9).
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    dist = ErrorDist.parse(dist)
    if dist is ErrorDist.NORM:
        return rng.standard_normal(n)
    return rng.standard_exponential(n) - 1.0


def _tail_ok(m, r, e_inf, tol):
    # |rho|^(m+1) / (1 - |rho|) * ||E||_inf bounds the dropped terms
    return r ** (m + 1) / (1.0 - r) * e_inf < tol


def neumann_terms_needed(rho: float, e_inf: float, tol: float) -> int:
    """Smallest ``m`` whose geometric tail bound falls below ``tol``."""
    r = abs(rho)
    if r == 0.0 or e_inf == 0.0:
        return 0
    m = max(int(math.floor(math.log(tol * (1 - r) / e_inf) / math.log(r))) - 2, 0)
    while not _tail_ok(m, r, e_inf, tol):
        m += 1
    return m


def gen_response(
    W: WeightMatrix, cfg: DgpConfig, errors: np.ndarray
) -> ResponseVector:
    """Approximate ``(I - rho W)^{-1} errors`` by ``sum_{k<=m} rho^k W^k errors``.

    ``m`` is the first order at which the geometric tail bound drops below
    ``cfg.neumann_tol``; at ``cfg.m_cap`` the series is cut with a warning.
    """
    e = np.asarray(errors, dtype=float)
    if e.shape != (W.n_nodes,):
        raise DomainError(f"errors must have length {W.n_nodes}")
    r = abs(cfg.rho)
    e_inf = float(np.max(np.abs(e))) if e.size else 0.0
    y = e.copy()
    term = e
    m = 0
    capped = False
    while not (r == 0.0 or e_inf == 0.0 or _tail_ok(m, r, e_inf, cfg.neumann_tol)):
        if m >= cfg.m_cap:
            capped = True
            warnings.warn(
                f"Neumann series cut at m_cap={cfg.m_cap} before reaching "
                f"tolerance {cfg.neumann_tol:g}",
                RuntimeWarning,
                stacklevel=2,
            )
            break
        term = cfg.rho * spmv(W, term)
        y += term
        m += 1
    return ResponseVector(y, m, capped)


def write_response(y, fh: IO[str]) -> None:
    for v in np.asarray(y, dtype=float).tolist():
        fh.write(f"{v:.17g}\n")


def load_response(fh: IO[str]) -> np.ndarray:
    vals = [float(line) for line in fh if line.strip() and not line.startswith("#")]
    return np.asarray(vals, dtype=float)
