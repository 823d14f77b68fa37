"""Numerical diagnostics for the network regularity conditions.

``Pi`` measures how concentrated the stationary distribution of ``W`` is,
``||A||_max`` is the largest in-degree, and ``Delta1`` / ``Delta2`` measure
how strongly the sampled block is coupled to the rest of the network.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import ConfigError, DomainError
from .netcore import AdjacencyMatrix, SubnetSelection, WeightMatrix, extract_selection

__all__ = [
    "ConditionReport",
    "StationaryResult",
    "stationary_dist",
    "check_c1",
    "check_c2",
    "check_c3",
    "lambda_max_gram",
    "verify_conditions",
]

# above this many nodes the W22 factor of c_min uses the (1 - |rho|)^2 bound
DENSE_W22_LIMIT = 4000
# Gram matrices up to this order are diagonalised densely
_DENSE_GRAM_LIMIT = 2000


@dataclass(frozen=True)
class StationaryResult:
    pi: np.ndarray
    iterations: int
    converged: bool
    support: np.ndarray
    outside_fraction: float
    retained: float = 1.0


@dataclass(frozen=True)
class ConditionReport:
    pi_stat: float
    a_max: float
    delta1: float
    delta2: float
    power_iters: int
    converged: bool
    c_min: float = float("nan")
    c_min_approx: bool = False
    outside_fraction: float = 0.0
    retained_mass: float = 1.0
    n: int = 0
    n_nodes: int = 0

    def to_dict(self):
        return asdict(self)


def _csr(W):
    if isinstance(W, (WeightMatrix, AdjacencyMatrix)):
        return W.matrix
    return sp.csr_matrix(W)


def stationary_dist(
    W, tol=1e-12, max_iters=100_000, damping=0.5, start=None, restrict=False
) -> StationaryResult:
    """Left Perron vector of ``W`` by damped power iteration.

    Iterates ``pi <- (1 - damping) Wt pi + damping pi`` from the uniform
    vector (or ``start``) until the L1 change is at most ``tol``.  With
    ``damping=0`` this is the plain power method, which cycles forever on
    periodic chains.

    ``pi`` is renormalised every step.  On a graph that is not strongly
    connected the limit is a stationary vector concentrated on the closed
    classes the uniform start drains into; mass that runs into zero rows is
    dropped, and ``retained`` reports how much of the start survived.  With
    ``restrict`` the iteration instead runs on the largest strongly
    connected component alone; ``outside_fraction`` is the share of nodes
    left out, and those nodes get ``pi = 0``.
    """
    mat = _csr(W).astype(float)
    n_nodes = mat.shape[0]
    if n_nodes == 0:
        raise DomainError("empty matrix")
    if not 0 <= damping < 1:
        raise DomainError("damping must lie in [0, 1)")
    support = np.arange(n_nodes)
    if restrict and n_nodes > 1:
        n_comp, comp = csgraph.connected_components(mat, directed=True, connection="strong")
        if n_comp > 1:
            big = np.argmax(np.bincount(comp))
            support = np.flatnonzero(comp == big)
            mat = mat[support][:, support]
    wt = mat.T.tocsr()
    m = support.size
    if start is None:
        pi = np.full(m, 1.0 / m)
    else:
        pi = np.asarray(start, dtype=float)[support]
        if pi.sum() <= 0:
            raise DomainError("start vector has no mass on the support")
        pi = pi / pi.sum()

    converged = False
    log_mass = 0.0
    it = 0
    for it in range(1, max_iters + 1):
        nxt = (1.0 - damping) * (wt @ pi) + damping * pi
        total = nxt.sum()
        if not total > 0:
            log_mass = -math.inf
            break
        log_mass += math.log(total)
        nxt /= total
        diff = np.abs(nxt - pi).sum()
        pi = nxt
        if diff <= tol:
            converged = True
            break

    full = np.zeros(n_nodes)
    full[support] = pi
    return StationaryResult(
        full, it, converged, support, 1.0 - m / n_nodes, math.exp(log_mass)
    )


def check_c1(pi, N: Optional[int] = None) -> float:
    """``Pi = sqrt(N) * sum(pi**2)``."""
    pi = np.asarray(pi, dtype=float)
    N = pi.size if N is None else N
    return math.sqrt(N) * float(pi @ pi)


def check_c2(A) -> float:
    """Largest absolute column sum of ``A`` (the maximum in-degree)."""
    mat = _csr(A)
    if mat.shape[1] == 0:
        return 0.0
    return float(np.max(np.asarray(abs(mat).sum(axis=0)).ravel()))


def lambda_max_gram(B, tol=1e-12, max_iters=10_000) -> float:
    """Largest eigenvalue of ``B' B`` for a sparse or dense ``B``.

    Small Gram matrices are formed and diagonalised; otherwise power
    iteration on ``x -> B' (B x)``.
    """
    B = sp.csr_matrix(B)
    if B.nnz == 0:
        return 0.0
    cols = B.shape[1]
    if cols <= _DENSE_GRAM_LIMIT:
        g = (B.T @ B).toarray()
        return float(max(sla.eigvalsh(g)[-1], 0.0))
    x = np.asarray(abs(B).sum(axis=0)).ravel() + 1.0
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iters):
        y = B.T @ (B @ x)
        new = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
        if abs(new - lam) <= tol * max(new, 1.0):
            return new
        lam = new
    return lam


def _sigma_min_sq(block, rho) -> float:
    m = block.shape[0]
    if m == 0:
        return math.inf
    a = np.eye(m) - rho * (block.toarray() if sp.issparse(block) else block)
    return float(sla.svdvals(a)[-1] ** 2)


def check_c3(sel: SubnetSelection, rho: float, dense_limit: int = DENSE_W22_LIMIT):
    """Return ``(delta1, delta2, c_min, approx)`` for a selection with blocks.

    ``Delta1 = rho^2 c_min^-2 lmax(W12 W12') lmax(W21' W21)`` with ``c_min``
    the smaller of ``sigma_min(I - rho W_ii)^2`` over both diagonal blocks.
    When ``W22`` has more than ``dense_limit`` rows its factor is replaced by
    ``(1 - |rho|)^2`` and ``approx`` is set.  ``Delta2`` is
    ``(||W12||_F^2 + ||W21||_F^2) / sqrt(n)``.
    """
    if not sel.has_blocks:
        raise ConfigError("selection was extracted without blocks")
    if not abs(rho) < 1:
        raise DomainError("|rho| must be < 1")
    n = sel.n
    delta2 = (sel.w12_frobenius_sq + sel.w21_frobenius_sq) / math.sqrt(n)
    c1 = _sigma_min_sq(sel.w11, rho)
    approx = sel.w22.shape[0] > dense_limit
    c2 = (1.0 - abs(rho)) ** 2 if approx else _sigma_min_sq(sel.w22, rho)
    c_min = min(c1, c2)
    if rho == 0.0:
        return 0.0, delta2, c_min, approx
    lam12 = lambda_max_gram(sel.w12.T)  # W12 W12' is n x n
    lam21 = lambda_max_gram(sel.w21)
    delta1 = rho * rho * lam12 * lam21 / (c_min * c_min)
    return delta1, delta2, c_min, approx


def verify_conditions(
    adjacency: AdjacencyMatrix,
    W: WeightMatrix,
    s1,
    rho: float,
    tol=1e-12,
    max_iters=100_000,
    dense_limit: int = DENSE_W22_LIMIT,
    restrict: bool = False,
) -> ConditionReport:
    """Compute every diagnostic for one network, sample and ``rho``."""
    st = stationary_dist(W, tol=tol, max_iters=max_iters, restrict=restrict)
    sel = extract_selection(W, s1, keep_blocks=True)
    d1, d2, c_min, approx = check_c3(sel, rho, dense_limit=dense_limit)
    return ConditionReport(
        pi_stat=check_c1(st.pi, W.n_nodes),
        a_max=check_c2(adjacency),
        delta1=d1,
        delta2=d2,
        power_iters=st.iterations,
        converged=st.converged,
        c_min=c_min,
        c_min_approx=approx,
        outside_fraction=st.outside_fraction,
        retained_mass=st.retained,
        n=sel.n,
        n_nodes=W.n_nodes,
    )
