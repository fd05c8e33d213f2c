import io
import math

import numpy as np
import pytest
from scipy import integrate

from deterrence import estimation as est
from deterrence.distributions import weighting_pi


def _resp(rid, delays=(None,) * 4, fines=(None,) * 9, salary=5000.0, detention=None):
    return est.SurveyResponse(str(rid), salary, tuple(delays), tuple(fines), detention)


# ------------------------------------------------------------------ parsing

def test_empty_file_parses_to_nothing():
    assert est.parse_survey(io.StringIO("")) == []


def test_truncation_rule_violation_is_reported_with_row():
    text = ",".join(est.HEADER) + "\n" + "a,100,inf,5,,," + "," * 9 + "\n"
    with pytest.raises(est.SurveyFormatError) as exc:
        est.parse_survey(io.StringIO(text))
    assert exc.value.errors[0][0] == 1
    assert "monotone truncation" in exc.value.errors[0][1]


def test_write_parse_round_trip():
    responses, _ = est.synthetic_survey(25, seed=3)
    responses.append(_resp("x", delays=(12.5, math.inf, None, None), salary=None))
    buf = io.StringIO()
    est.write_survey(responses, buf)
    buf.seek(0)
    assert est.parse_survey(buf) == responses


# ------------------------------------------------------------ discount rate

def test_equal_ratios_give_exact_rate():
    r = _resp(1, delays=(50, 200, 800, 1800))
    k = est.estimate_k(r)
    assert k.value == pytest.approx(0.005, rel=1e-14)
    assert k.se == pytest.approx(0.0, abs=1e-12)
    assert k.n_used == 4


def test_infinite_first_answer_means_zero_rate():
    k = est.estimate_k(_resp(1, delays=(math.inf, math.inf, math.inf, math.inf)))
    assert (k.value, k.se) == (0.0, 0.0)


def test_rate_never_negative_and_unbiased():
    rng = np.random.default_rng(0)
    k_true, sigma = 0.004, 0.2
    vals = []
    for _ in range(10_000):
        eps = rng.normal(0, sigma, 4)
        delays = [(tau / 2 - 1) / (k_true * (1 + e)) for tau, e in zip(est.TAUS, eps)]
        if min(delays) <= 0:
            continue
        v = est.estimate_k(_resp(0, delays=delays)).value
        assert v >= 0
        vals.append(v)
    vals = np.array(vals)
    assert abs(vals.mean() - k_true) < 3 * vals.std(ddof=1) / math.sqrt(vals.size)


# ------------------------------------------------------ ratio distribution

@pytest.mark.parametrize("m", [2, 3, 4])
@pytest.mark.parametrize("sigma", [0.05, 0.1, 0.2])
def test_ratio_density_normalization(m, sigma):
    c = (m - 1) / m
    edges = [-np.inf, -1 / m, 0.0, c, np.inf]
    total = sum(integrate.quad(lambda x: est.ratio_normal_pdf(x, m, sigma), a, b, limit=400,
                               epsabs=1e-13, epsrel=1e-12)[0] for a, b in zip(edges, edges[1:]))
    assert abs(total - 1) < 1e-6


def test_ratio_density_concentrates():
    m, c = 3, 2 / 3
    near = integrate.quad(lambda x: est.ratio_normal_pdf(x, m, 0.005), c - 0.05, c + 0.05,
                          points=[c], limit=200)[0]
    assert near > 1 - 1e-9


def test_ratio_density_against_monte_carlo():
    m, sigma, n = 4, 0.1, 1_000_000
    rng = np.random.default_rng(11)
    e = rng.normal(0, sigma, (n, m))
    x = np.sort((m - 1 + e[:, 1:].sum(axis=1)) / (m * (1 + e[:, 0])))
    grid = np.linspace(-0.5, 3.0, 40_001)
    pdf = est.ratio_normal_pdf(grid, m, sigma)
    cdf = integrate.cumulative_trapezoid(pdf, grid, initial=0.0)
    emp = np.searchsorted(x, grid, side="right") / n
    assert np.max(np.abs(emp - cdf)) < 0.01


def test_sigma_table():
    assert est.expected_J(0.2, 4) / 0.04 == pytest.approx(0.77, abs=0.01)
    assert est.sigma_from_J(0.0, 3) == 0.0
    for m in (2, 3, 4):
        js, _ = est.sigma_table(m)
        assert np.all(np.diff(js) > 0)
    worst = 0.0
    for sigma in np.linspace(0.01, 0.5, 50):
        for m in (2, 3, 4):
            worst = max(worst, abs(est.sigma_from_J(est.expected_J(sigma, m), m) - sigma))
    assert worst < 1e-4


def test_sigma_estimate_zero_for_exact_answers():
    r = _resp(1, delays=(50, 200, 800, 1800))
    assert est.estimate_sigma(r, 0.005) == 0.0


# ------------------------------------------------------------- population

def test_published_zero_share_standard_error():
    zeros = [_resp(i, delays=(math.inf,) * 4) for i in range(56)]
    rest = [_resp(100 + i, delays=(50, 200, 800, 1800)) for i in range(108)]
    rho, _ = est.estimate_rho_beta(zeros + rest)
    assert round(rho.value, 4) == 0.6585
    assert round(rho.se, 4) == 0.0370


def test_all_zero_sample_flags_rate_as_undefined():
    rho, beta = est.estimate_rho_beta([_resp(i, delays=(math.inf,) * 4) for i in range(10)])
    assert rho.value == 0.0
    assert math.isnan(beta.value) and beta.flags


# ------------------------------------------------------- weighting factor

def test_noiseless_weighting_fit_is_exact():
    B = [float(weighting_pi(p, 0.61)) * 568 for p in est.PRICE_POINTS]
    g, c = est.estimate_gamma(_resp(1, fines=B))
    assert g.value == pytest.approx(0.61, abs=1e-6)
    assert c.value == pytest.approx(568, rel=1e-6)


def test_identity_weighting_hits_boundary():
    g, _ = est.estimate_gamma(_resp(1, fines=[568 * p for p in est.PRICE_POINTS]))
    assert g.value == pytest.approx(0.99, abs=1e-6)
    assert "boundary" in g.flags


def test_weighting_fit_unbiased_under_noise():
    rng = np.random.default_rng(5)
    B = weighting_pi(np.broadcast_to(est.PRICE_POINTS, (1000, 9)), 0.61) * 568
    B = B + rng.normal(0, 20, B.shape)
    fit = est.fit_gamma_batch(B)
    assert abs(fit.gamma.mean() - 0.61) < 3 * fit.gamma.std(ddof=1) / math.sqrt(1000)


def test_population_spread_zero_when_identical():
    mu, sd, var = est.estimate_gamma_population([0.6] * 20, [0.0] * 20)
    assert mu.value == pytest.approx(0.6) and sd.value == 0.0 and var.value == 0.0


def test_population_spread_recovery():
    rng = np.random.default_rng(7)
    hits = 0
    for _ in range(200):
        true = rng.normal(0.61, 0.07, 97)
        obs = true + rng.normal(0, 0.03, 97)
        mu, sd, _ = est.estimate_gamma_population(obs, np.full(97, 0.03))
        hits += abs(mu.value - 0.61) < 3 * mu.se and abs(sd.value - 0.07) < 3 * sd.se
    assert hits >= 190


def test_sample_variance_variance():
    assert est.var_S2([0.3] * 11) == pytest.approx(2 * 0.3 ** 4 / 10, rel=1e-13)
    # X1 - X2 with one degenerate component: S^2 = (X1 - X2)^2 / 2, variance 1/2
    assert est.var_S2([1.0, 0.0]) == pytest.approx(0.5, rel=1e-14)
    rng = np.random.default_rng(3)
    sig = np.array([0.2, 0.5, 1.0, 1.5, 0.1, 0.8])
    x = rng.normal(0, 1, (1_000_000, sig.size)) * sig
    emp = np.var(np.var(x, axis=1, ddof=1))
    assert emp == pytest.approx(est.var_S2(sig), rel=0.05)


# ---------------------------------------------------------------- harshness

def test_harshness():
    assert est.harshness(0.0, 5000, 2) == pytest.approx(0.05)
    assert est.harshness(1e-8, 5000, 2) == pytest.approx(0.05, rel=1e-6)
    r = _resp(1, detention=2.0)
    assert est.estimate_harshness(r, 0.0) == pytest.approx(0.05)
    assert est.estimate_harshness(_resp(1), 0.0) is None


# ------------------------------------------------------------- independence

def _weighting_fitter(items):
    fit = est.fit_gamma_batch(np.array(items))
    mu, sd, _ = est.estimate_gamma_population(fit.gamma, fit.gamma_se)
    return {"mu_gamma": mu, "sigma_gamma": sd}


def test_independent_halves_rarely_look_different():
    rng = np.random.default_rng(21)
    passed = 0
    for _ in range(1000):
        g = rng.normal(0.61, 0.07, 200)
        B = weighting_pi(np.broadcast_to(est.PRICE_POINTS, (200, 9)), g[:, None]) * 568
        B = B + rng.normal(0, 20, B.shape)
        salary = rng.lognormal(8.5, 0.5, 200)
        out = est.independence_split(salary, list(B), _weighting_fitter)
        passed += all(v["z"] < 3 for v in out.values())
    assert passed >= 990


def test_dependent_halves_stand_out():
    responses, truth = est.synthetic_survey(200, seed=4)
    k_hat = [est.estimate_k(r).value for r in responses]

    def fitter(items):
        rho, beta = est.estimate_rho_beta(items)
        return {"rho": rho, "beta": beta}

    out = est.independence_split(k_hat, responses, fitter)
    assert out["rho"]["z"] > 5 and out["beta"]["z"] > 5


def test_median_ties_keep_input_order():
    seen = []

    def fitter(items):
        seen.append(list(items))
        return {"x": est.EstimateWithSE(float(np.mean(items)), 1.0, len(items))}

    est.independence_split([1, 1, 1, 1], [10, 20, 30, 40], fitter)
    assert seen == [[10, 20], [30, 40]]
