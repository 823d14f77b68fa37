import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph, sar_instance
from subnet_sar.dgp import DgpConfig, draw_errors, gen_response
from subnet_sar.errors import ConfigError, DegenerateCurvatureError, DomainError
from subnet_sar.inference import (
    SeIngredients,
    SeVariant,
    bootstrap_se,
    confidence_interval,
    plugin_se,
    se_ingredients,
    variance_components,
)
from subnet_sar.netcore import row_normalize
from subnet_sar.qmle import fit
from subnet_sar.sampler import SamplerSpec


def _ingredients(seed, n=20, rho=0.4):
    y, W = sar_instance(np.random.default_rng(seed), n, rho)
    res = fit(y, W)
    return se_ingredients(res.rho_hat, res.sigma2_hat, y, W), y, W, res


def test_traces_brute_force():
    ing, y, W, res = _ingredients(0)
    n = y.size
    M = W @ np.linalg.inv(np.eye(n) - res.rho_hat * W)
    assert np.allclose(ing.m_s, M, atol=1e-12)
    assert ing.tr_m == pytest.approx(np.trace(M), abs=1e-12)
    assert ing.tr_m2 == pytest.approx(np.trace(M @ M), abs=1e-12)
    assert ing.tr_mtm == pytest.approx(np.trace(M.T @ M), abs=1e-12)
    assert ing.tr_diag2 == pytest.approx(sum(M[i, i] ** 2 for i in range(n)), abs=1e-12)
    e = (np.eye(n) - res.rho_hat * W) @ y
    assert ing.mu4_hat == pytest.approx(np.mean(e ** 4), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.9, 0.9), st.integers(3, 40))
def test_trace_inequalities(seed, rho, n):
    rng = np.random.default_rng(seed)
    W = row_normalize(random_graph(rng, n, 0.3)).toarray()
    y = rng.standard_normal(n)
    ing = se_ingredients(rho, 1.0, y, W)
    slack = 1e-10 * max(1.0, ing.tr_mtm)
    assert ing.tr_mtm >= 0
    assert ing.tr_diag2 <= ing.tr_mtm + slack
    assert ing.tr_m2 <= ing.tr_mtm + slack
    assert ing.tr_m ** 2 <= n * ing.tr_diag2 + slack


def test_ci_examples():
    ci = confidence_interval(0.2, 0.1)
    z = NormalDist().inv_cdf(0.975)
    assert ci.ci_lo == pytest.approx(0.2 - z * 0.1, abs=1e-12)
    assert ci.ci_hi == pytest.approx(0.2 + z * 0.1, abs=1e-12)
    assert round(ci.ci_lo, 5) == 0.00400 and round(ci.ci_hi, 5) == 0.39600
    half = confidence_interval(0.0, 2.0, level=0.5)
    assert half.ci_hi == pytest.approx(2.0 * NormalDist().inv_cdf(0.75), rel=1e-12)
    assert round(half.ci_hi / 2.0, 5) == 0.67449


def test_ci_degenerate_and_bad():
    ci = confidence_interval(0.3, 0.0)
    assert ci.ci_lo == ci.ci_hi == 0.3
    with pytest.raises(DomainError):
        confidence_interval(0.3, -1.0)
    with pytest.raises(DomainError):
        confidence_interval(0.3, 0.1, level=1.0)


def _manual(M, mu4, s2=1.0):
    d = np.diag(M)
    return SeIngredients(
        m_s=M, tr_m=float(d.sum()), tr_m2=float(np.sum(M * M.T)),
        tr_mtm=float(np.sum(M * M)), tr_diag2=float(d @ d), mu4_hat=mu4, sigma2_hat=s2,
    )


@pytest.mark.parametrize("dist,mu4", [("norm", 3.0), ("exp", 9.0)])
def test_score_variance_matches_monte_carlo(dist, mu4):
    # the score variance is var(e' Mc e) / n with Mc = M - tr(M) I / n
    n = 30
    rng = np.random.default_rng(11)
    W = row_normalize(random_graph(rng, n, 0.15)).toarray()
    M = W @ np.linalg.inv(np.eye(n) - 0.4 * W)
    Mc = M - np.trace(M) / n * np.eye(n)
    q = []
    for _ in range(10):
        E = draw_errors(dist, 100_000 * n, rng).reshape(-1, n)
        q.append(np.einsum("ij,jk,ik->i", E, Mc, E))
    q = np.concatenate(q) / math.sqrt(n)
    s1, _ = variance_components(_manual(M, mu4), n)
    assert abs(q.var() / s1 - 1) <= 0.02


def test_curvature_formula():
    ing, *_ = _ingredients(1)
    n = ing.n
    _, s2 = variance_components(ing)
    assert s2 == pytest.approx(abs(ing.tr_mtm / n + ing.tr_m2 / n - 2 * ing.tr_m ** 2 / n ** 2))
    se = plugin_se(ing)
    s1, _ = variance_components(ing)
    assert se == pytest.approx(math.sqrt(s1) / (s2 * math.sqrt(n)), rel=1e-14)


def test_norm_kurtosis_drops_diag_term():
    ing, *_ = _ingredients(2)
    n = ing.n
    normal = SeIngredients(ing.m_s, ing.tr_m, ing.tr_m2, ing.tr_mtm, ing.tr_diag2,
                           3.0 * ing.sigma2_hat ** 2, ing.sigma2_hat)
    s1, _ = variance_components(normal)
    expect = ing.tr_m2 / n + ing.tr_mtm / n - 2 * ing.tr_m ** 2 / n ** 2
    assert s1 == pytest.approx(expect, rel=1e-12)


def test_plugin_se_invariant_to_scale():
    _, y, W, res = _ingredients(3)
    a = plugin_se(se_ingredients(res.rho_hat, res.sigma2_hat, y, W))
    c = 7.5
    b = plugin_se(se_ingredients(res.rho_hat, c * c * res.sigma2_hat, c * y, W))
    assert a == pytest.approx(b, rel=1e-10)


def test_thm1_literal_runs():
    ing, *_ = _ingredients(4)
    s1, s2 = variance_components(ing, variant="thm1_literal")
    assert math.isfinite(s1) and s2 > 0
    assert SeVariant.parse("LEMMA2") is SeVariant.LEMMA2
    with pytest.raises(ConfigError):
        SeVariant.parse("other")


def test_zero_matrix_curvature():
    M = np.zeros((5, 5))
    with pytest.raises(DegenerateCurvatureError):
        plugin_se(_manual(M, 3.0))


def test_bootstrap_full_sample_is_degenerate():
    rng = np.random.default_rng(5)
    A = random_graph(rng, 40, 0.1)
    W = row_normalize(A)
    y = gen_response(W, DgpConfig(0.3), rng.standard_normal(40)).y
    bt = bootstrap_se(A, W, y, SamplerSpec("cs", 40, cluster_labels=np.zeros(40, int)), B=5, rng=1)
    assert bt.n_success == 5 and bt.n_dropped == 0
    assert bt.se_bt <= 1e-10


def test_bootstrap_spread_and_determinism():
    rng = np.random.default_rng(6)
    A = random_graph(rng, 300, 0.02)
    W = row_normalize(A)
    y = gen_response(W, DgpConfig(0.3), rng.standard_normal(300)).y
    spec = SamplerSpec("snow", 60)
    a = bootstrap_se(A, W, y, spec, B=10, rng=9)
    b = bootstrap_se(A, W, y, spec, B=10, rng=9)
    assert a.estimates == b.estimates
    est = np.array(a.estimates)
    assert a.se_bt == pytest.approx(np.std(est), rel=1e-12)
    assert a.se_bt > 0
    with pytest.raises(ConfigError):
        bootstrap_se(A, W, y, spec, B=1)
