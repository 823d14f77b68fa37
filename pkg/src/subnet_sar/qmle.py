"""Profiled quasi-maximum likelihood for the SAR model on a (sub)network.

With ``u = W y`` the profiled variance is a quadratic in ``rho``::

    sigma2(rho) = (y'y - 2 rho u'y + rho^2 u'u) / n

and the determinant and trace terms reduce to sums over the eigenvalues of
``W``.  After one eigen-decomposition every likelihood, score and Hessian
evaluation costs ``O(n)``.  For large ``n`` an LU path evaluates the same
quantities directly at ``O(n^3)`` per call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateDataError, DomainError, FitError, SingularityError

__all__ = [
    "LikelihoodWorkspace",
    "FitOptions",
    "FitResult",
    "profile_sigma2",
    "log_det",
    "loglik",
    "score",
    "hessian",
    "fit",
    "golden_section_max",
]

_SING_TOL = 1e-14
_LOG_2PI_1 = math.log(2.0 * math.pi) + 1.0


class LikelihoodWorkspace:
    """Cached quantities for one ``(y1, W11)`` pair.

    Parameters
    ----------
    y1 : array, shape (n,)
    w11 : array, shape (n, n)
    method : {"auto", "eig", "lu"}
        ``"auto"`` uses the eigenvalue path up to ``lu_threshold`` nodes.
    """

    def __init__(self, y1, w11, method: str = "auto", lu_threshold: int = 4096):
        y1 = np.asarray(y1, dtype=float).ravel()
        w11 = np.asarray(w11, dtype=float)
        n = y1.size
        if w11.shape != (n, n):
            raise DomainError(f"w11 shape {w11.shape} does not match len(y1)={n}")
        if method == "auto":
            method = "eig" if n <= lu_threshold else "lu"
        if method not in ("eig", "lu"):
            raise DomainError(f"unknown method {method!r}")
        self.n = n
        self.y1 = y1
        self.w11 = w11
        self.method = method
        self.wy = w11 @ y1
        self.wtwy = w11.T @ self.wy
        self.yy = float(y1 @ y1)
        self.uy = float(self.wy @ y1)
        self.uu = float(self.wy @ self.wy)
        self.trace = float(np.trace(w11))
        self.eigvals = None
        if method == "eig":
            self.eigvals = np.linalg.eigvals(w11) if n else np.empty(0, complex)
            drift = abs(self.eigvals.sum().real - self.trace)
            if drift > 1e-8 * max(n, 1):
                raise FitError(f"eigenvalue trace drift {drift:.3g}")

    # determinant and trace terms --------------------------------------
    def _check_rho(self, rho):
        if not abs(rho) < 1:
            raise DomainError(f"|rho| must be < 1, got {rho}")

    def _eig_factors(self, rho):
        f = 1.0 - rho * self.eigvals
        if f.size and np.min(np.abs(f)) < _SING_TOL:
            raise SingularityError(f"I - rho W11 singular at rho={rho}")
        return f

    def log_det(self, rho):
        self._check_rho(rho)
        if self.method == "eig":
            return float(np.sum(np.log(np.abs(self._eig_factors(rho)))))
        lu, _ = self._lu(rho)
        return float(np.sum(np.log(np.abs(np.diag(lu)))))

    def trace_terms(self, rho):
        """Return ``(tr M, tr M^2)`` for ``M = W11 (I - rho W11)^{-1}``."""
        self._check_rho(rho)
        if self.method == "eig":
            g = self.eigvals / self._eig_factors(rho)
            return float(g.sum().real), float((g * g).sum().real)
        m = self.m_matrix(rho)
        return float(np.trace(m)), float(np.sum(m * m.T))

    def _lu(self, rho):
        a = np.eye(self.n) - rho * self.w11
        lu, piv = sla.lu_factor(a, check_finite=False)
        if np.min(np.abs(np.diag(lu))) < _SING_TOL:
            raise SingularityError(f"I - rho W11 singular at rho={rho}")
        return lu, piv

    def m_matrix(self, rho):
        """Dense ``W11 (I - rho W11)^{-1}``."""
        a = np.eye(self.n) - rho * self.w11
        try:
            # M = W (I - rho W)^{-1} solves M^T = (I - rho W)^{-T} W^T
            return sla.solve(a.T, self.w11.T, check_finite=False).T
        except (sla.LinAlgError, ValueError) as exc:
            raise SingularityError(str(exc)) from exc

    # quadratic terms --------------------------------------------------
    def sigma2(self, rho):
        return (self.yy - 2.0 * rho * self.uy + rho * rho * self.uu) / self.n

    def q(self, rho):
        """``y' W' (I - rho W) y``."""
        return self.uy - rho * self.uu


@dataclass(frozen=True)
class FitOptions:
    rho0: float = 0.0
    tol: float = 1e-8
    score_tol: float = 1e-10
    max_iter: int = 100
    clamp: float = 0.99
    max_halvings: int = 20
    fallback_bound: float = 0.999
    fallback_tol: float = 1e-10
    method: str = "auto"
    lu_threshold: int = 4096


@dataclass(frozen=True)
class FitResult:
    rho_hat: float
    sigma2_hat: float
    loglik: float
    iterations: int
    converged: bool
    used_fallback: bool
    score: float = float("nan")
    hessian: float = float("nan")


def profile_sigma2(rho: float, ws: LikelihoodWorkspace) -> float:
    """``n^{-1} ||(I - rho W11) y1||^2``."""
    ws._check_rho(rho)
    s2 = ws.sigma2(rho)
    if not s2 > 0:
        raise DegenerateDataError("profiled variance is not positive")
    return s2


def log_det(rho: float, ws: LikelihoodWorkspace) -> float:
    """``ln |det(I - rho W11)|``."""
    return ws.log_det(rho)


def loglik(rho: float, ws: LikelihoodWorkspace) -> float:
    n = ws.n
    s2 = profile_sigma2(rho, ws)
    return -0.5 * n * _LOG_2PI_1 - 0.5 * n * math.log(s2) + ws.log_det(rho)


def score(rho: float, ws: LikelihoodWorkspace) -> float:
    s2 = profile_sigma2(rho, ws)
    tr_m, _ = ws.trace_terms(rho)
    return ws.q(rho) / s2 - tr_m


def hessian(rho: float, ws: LikelihoodWorkspace) -> float:
    s2 = profile_sigma2(rho, ws)
    _, tr_m2 = ws.trace_terms(rho)
    q = ws.q(rho)
    return 2.0 * q * q / (ws.n * s2 * s2) - ws.uu / s2 - tr_m2


def golden_section_max(f, lo, hi, tol=1e-10, max_iter=500):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x), iters)``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        it += 1
    x = 0.5 * (a + b)
    return x, f(x), it


def _safe_loglik(ws):
    def f(r):
        try:
            v = loglik(r, ws)
        except (SingularityError, DegenerateDataError):
            return -math.inf
        return v if math.isfinite(v) else -math.inf

    return f


def fit(y1, w11, opts: Optional[FitOptions] = None, workspace=None) -> FitResult:
    """Maximise the profiled likelihood over ``rho``.

    Newton-Raphson from ``opts.rho0`` with iterates clamped to
    ``[-clamp, clamp]`` and step halving whenever a step does not increase
    the likelihood.  A non-negative Hessian, exhausted halvings or too many
    iterations hand over to golden-section search on
    ``(-fallback_bound, fallback_bound)``.
    """
    opts = opts or FitOptions()
    ws = workspace or LikelihoodWorkspace(
        y1, w11, method=opts.method, lu_threshold=opts.lu_threshold
    )
    n = ws.n
    if n < 2:
        raise DomainError("need at least two nodes")
    if not ws.yy > 0:
        raise DegenerateDataError("y1 is identically zero")

    rho = float(np.clip(opts.rho0, -opts.clamp, opts.clamp))
    ll = loglik(rho, ws)
    converged = False
    need_fallback = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = score(rho, ws)
        if abs(g) <= opts.score_tol * n:
            converged = True
            break
        h = hessian(rho, ws)
        if not h < 0:
            need_fallback = True
            break
        step = -g / h
        accepted = False
        for _ in range(opts.max_halvings + 1):
            cand = float(np.clip(rho + step, -opts.clamp, opts.clamp))
            try:
                ll_c = loglik(cand, ws)
            except SingularityError:
                ll_c = -math.inf
            # allow rounding noise so steps right at the peak are not halved away
            if ll_c >= ll - 16 * np.finfo(float).eps * max(1.0, abs(ll)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            need_fallback = True
            break
        delta = cand - rho
        rho, ll = cand, ll_c
        if abs(delta) <= opts.tol:
            converged = True
            break
    else:
        need_fallback = True

    used_fallback = False
    if need_fallback or not converged:
        used_fallback = True
        b = opts.fallback_bound
        x, fx, gi = golden_section_max(_safe_loglik(ws), -b, b, tol=opts.fallback_tol)
        if not math.isfinite(fx):
            raise FitError("likelihood is not finite anywhere on the search box")
        it += gi
        rho, ll = x, fx
        # golden section only resolves rho to about sqrt(eps); a few guarded
        # Newton steps recover full precision on a concave peak
        for _ in range(5):
            h = hessian(rho, ws)
            if not h < 0:
                break
            step = -score(rho, ws) / h
            if not abs(step) <= 1e-4 or abs(rho + step) >= b:
                break
            rho += step
            it += 1
            if abs(step) <= 1e-14:
                break
        ll = loglik(rho, ws)
        converged = abs(abs(rho) - b) > 10 * opts.fallback_tol

    return FitResult(
        rho_hat=rho,
        sigma2_hat=profile_sigma2(rho, ws),
        loglik=ll,
        iterations=it,
        converged=converged,
        used_fallback=used_fallback,
        score=score(rho, ws),
        hessian=hessian(rho, ws),
    )
