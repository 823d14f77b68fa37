"""Plug-in standard errors, normal confidence intervals and the sampling bootstrap."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import ndtri

from .errors import (
    BootstrapError,
    ConfigError,
    DegenerateCurvatureError,
    DomainError,
    SingularityError,
    SubnetSARError,
)
from .netcore import extract_selection
from .qmle import FitOptions, fit

__all__ = [
    "SeVariant",
    "SeIngredients",
    "IntervalResult",
    "BootstrapResult",
    "se_ingredients",
    "variance_components",
    "plugin_se",
    "confidence_interval",
    "bootstrap_se",
]


class SeVariant(str, enum.Enum):
    LEMMA2 = "lemma2"
    THM1_LITERAL = "thm1_literal"

    @classmethod
    def parse(cls, value) -> "SeVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown SE variant {value!r}") from None


@dataclass(frozen=True)
class SeIngredients:
    m_s: np.ndarray
    tr_m: float
    tr_m2: float
    tr_mtm: float
    tr_diag2: float
    mu4_hat: float
    sigma2_hat: float

    @property
    def n(self) -> int:
        return self.m_s.shape[0]


@dataclass(frozen=True)
class IntervalResult:
    se: float
    ci_lo: float
    ci_hi: float
    level: float


@dataclass
class BootstrapResult:
    se_bt: float
    estimates: List[float]
    n_success: int
    n_dropped: int = 0
    errors: List[str] = field(default_factory=list)


def se_ingredients(rho_hat, sigma2_hat, y1, w11) -> SeIngredients:
    """Dense ``M_S = W11 (I - rho W11)^{-1}``, its traces and the residual
    fourth moment ``mean(e^4)`` with ``e = (I - rho W11) y1``.
    """
    if not abs(rho_hat) < 1:
        raise DomainError("|rho_hat| must be < 1")
    w11 = np.asarray(w11, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    n = y1.size
    a = np.eye(n) - rho_hat * w11
    try:
        m = np.linalg.solve(a.T, w11.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularityError(str(exc)) from exc
    if not np.all(np.isfinite(m)):
        raise SingularityError("M_S is not finite")
    resid = a @ y1
    diag = np.diag(m)
    return SeIngredients(
        m_s=m,
        tr_m=float(diag.sum()),
        tr_m2=float(np.sum(m * m.T)),
        tr_mtm=float(np.sum(m * m)),
        tr_diag2=float(diag @ diag),
        mu4_hat=float(np.mean(resid ** 4)),
        sigma2_hat=float(sigma2_hat),
    )


def variance_components(ing: SeIngredients, n: Optional[int] = None, variant=SeVariant.LEMMA2):
    """Return ``(sigma2_1, sigma2_2)``, the score variance and curvature.

    ``LEMMA2`` is the variance of ``e' (M - tr(M) I / n) e / (sqrt(n) sigma^2)``::

        (mu4/sigma^4 - 3) sum_i (M_ii - tr M / n)^2 / n
            + tr(M^2)/n + tr(M'M)/n - 2 tr(M)^2 / n^2

    ``THM1_LITERAL`` keeps the alternative printed form with ``mu4/sigma^2``
    and an unscaled ``tr(diag^2 M)``.  The curvature is
    ``|tr(M'M)/n + tr(M^2)/n - 2 tr(M)^2/n^2|`` for both.
    """
    variant = SeVariant.parse(variant)
    n = ing.n if n is None else n
    tr_sq = ing.tr_m ** 2
    s2 = ing.sigma2_hat
    base = ing.tr_mtm / n + ing.tr_m2 / n
    sigma2_2 = abs(base - 2.0 * tr_sq / n ** 2)
    if variant is SeVariant.LEMMA2:
        kurt = ing.mu4_hat / s2 ** 2 - 3.0
        centred = ing.tr_diag2 - tr_sq / n  # sum (M_ii - trM/n)^2
        sigma2_1 = kurt * centred / n + base - 2.0 * tr_sq / n ** 2
    else:
        r = ing.mu4_hat / s2
        sigma2_1 = (1.0 - r) * tr_sq / n ** 2 + base + (r - 3.0) * ing.tr_diag2
    return sigma2_1, sigma2_2


def plugin_se(ing: SeIngredients, n: Optional[int] = None, variant=SeVariant.LEMMA2) -> float:
    """Asymptotic standard error ``sigma_1 / (sigma2_2 sqrt(n))``.

    Raises
    ------
    DegenerateCurvatureError
        The curvature is below ``1e-12`` or the score variance is not
        positive.
    """
    n = ing.n if n is None else n
    s1, s2 = variance_components(ing, n, variant)
    if s2 < 1e-12:
        raise DegenerateCurvatureError(f"curvature {s2:.3g} too small")
    if not s1 > 0:
        raise DegenerateCurvatureError(f"score variance {s1:.3g} not positive")
    return math.sqrt(s1) / (s2 * math.sqrt(n))


def confidence_interval(rho_hat: float, se: float, level: float = 0.95) -> IntervalResult:
    """Normal interval ``rho_hat +/- z_{(1+level)/2} se``."""
    if se < 0:
        raise DomainError("se must be non-negative")
    if not 0 < level < 1:
        raise DomainError("level must be in (0, 1)")
    z = float(ndtri(0.5 + 0.5 * level))
    return IntervalResult(se, rho_hat - z * se, rho_hat + z * se, level)


def bootstrap_se(adjacency, W, y, spec, B: int, rng=None, fit_opts: Optional[FitOptions] = None) -> BootstrapResult:
    """Re-sample the subnetwork ``B`` times from the same network and
    response, refit each time and return the spread of the estimates.

    The standard deviation uses divisor ``B``.  Replicates whose fit fails
    are dropped and counted; fewer than two successes is an error.
    """
    from .sampler import sample  # local import keeps module graph acyclic

    if B < 2:
        raise ConfigError("B must be >= 2")
    rng = np.random.default_rng(rng)
    y = np.asarray(y, dtype=float)
    estimates, errs = [], []
    for _ in range(B):
        s1 = sample(adjacency, spec, rng=rng)
        sel = extract_selection(W, s1)
        try:
            res = fit(y[sel.nodes], sel.w11, fit_opts)
        except SubnetSARError as exc:
            errs.append(f"{type(exc).__name__}: {exc}")
            continue
        estimates.append(res.rho_hat)
    if errs:
        warnings.warn(f"{len(errs)} of {B} bootstrap replicates dropped", RuntimeWarning, stacklevel=2)
    if len(estimates) < 2:
        raise BootstrapError(f"only {len(estimates)} bootstrap replicates succeeded")
    est = np.asarray(estimates)
    se_bt = float(np.sqrt(np.mean((est - est.mean()) ** 2)))
    return BootstrapResult(se_bt, estimates, len(estimates), len(errs), errs)
