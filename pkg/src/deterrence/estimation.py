"""Survey ingestion and estimators for the trait distributions.

Discount rates come from delay-preference questions, the probability weighting
factor from certainty-equivalent questions, and harshness from a paired
fine/detention question.  Every estimator returns a value with a standard
error so the population-level fits can propagate both sampling and
per-respondent measurement error.
"""
import csv
import io
import math
import statistics
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .distributions import weighting_pi

TAUS = (2.5, 4.0, 10.0, 20.0)
PRICE_POINTS = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.98, 1.0)
SURVEY_FINE = 500.0
SIGMA_NODES = np.round(np.arange(1, 201) * 0.005, 10)
GAMMA_RANGE = (0.01, 0.99)

HEADER = (["id", "salary"] + [f"t_{_fmt}" for _fmt in ("2.5", "4", "10", "20")]
          + [f"B_{_fmt}" for _fmt in ("0.05", "0.1", "0.25", "0.5", "0.75", "0.9", "0.95",
                                       "0.98", "1")]
          + ["detention_hours"])


class SurveyFormatError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"row {r}: {m}" for r, m in self.errors))


@dataclass(frozen=True)
class SurveyResponse:
    respondent_id: str
    salary: float = None
    delays: tuple = (None,) * 4        # hours, math.inf, or None when unanswered
    fine_answers: tuple = (None,) * 9  # certainty equivalents B_j, None when unanswered
    detention: float = None            # hours

    def validate(self):
        if len(self.delays) != len(TAUS) or len(self.fine_answers) != len(PRICE_POINTS):
            raise ValueError("wrong number of answers")
        seen_inf = False
        for tau, t in zip(TAUS, self.delays):
            if t is None:
                continue
            if math.isinf(t):
                seen_inf = True
            elif seen_inf:
                raise ValueError(f"monotone truncation violated: finite delay at tau={tau} "
                                 "after an infinite answer")
            elif not t > 0:
                raise ValueError(f"delay at tau={tau} must be > 0")
        if self.salary is not None and not self.salary > 0:
            raise ValueError("salary must be > 0")
        if self.detention is not None and not self.detention > 0:
            raise ValueError("detention_hours must be > 0")
        return self


@dataclass(frozen=True)
class EstimateWithSE:
    value: float
    se: float
    n_used: int
    flags: tuple = ()

    def as_dict(self):
        return {"value": self.value, "se": self.se, "n_used": self.n_used,
                "flags": list(self.flags)}


# ------------------------------------------------------------------ CSV I/O

def _parse_cell(text, allow_inf=False):
    text = text.strip()
    if text == "":
        return None
    if text.lower() == "inf":
        if not allow_inf:
            raise ValueError("'inf' is only allowed in delay columns")
        return math.inf
    return float(text)


def parse_survey(source):
    """Read survey rows from a path or file object.

    Raises SurveyFormatError listing every malformed row (1-based data rows).
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="") as fh:
            return parse_survey(fh)
    text = source.read()
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    if header != HEADER:
        raise SurveyFormatError([(0, f"unexpected header {header}")])
    out, errors = [], []
    for i, row in enumerate(reader, start=1):
        if not any(cell.strip() for cell in row):
            continue
        try:
            if len(row) != len(HEADER):
                raise ValueError(f"expected {len(HEADER)} fields, got {len(row)}")
            resp = SurveyResponse(
                respondent_id=row[0].strip(),
                salary=_parse_cell(row[1]),
                delays=tuple(_parse_cell(c, allow_inf=True) for c in row[2:6]),
                fine_answers=tuple(_parse_cell(c) for c in row[6:15]),
                detention=_parse_cell(row[15]),
            ).validate()
            out.append(resp)
        except ValueError as exc:
            errors.append((i, str(exc)))
    if errors:
        raise SurveyFormatError(errors)
    return out


def _fmt_cell(x):
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def write_survey(responses, target):
    """Write responses as CSV to a path or file object (inverse of parse_survey)."""
    if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
        with open(target, "w", newline="") as fh:
            return write_survey(responses, fh)
    w = csv.writer(target, lineterminator="\n")
    w.writerow(HEADER)
    for r in responses:
        w.writerow([r.respondent_id, _fmt_cell(r.salary)] + [_fmt_cell(x) for x in r.delays]
                   + [_fmt_cell(x) for x in r.fine_answers] + [_fmt_cell(r.detention)])


# ------------------------------------------------------------ discount rate

def ratio_normal_pdf(x, m, sigma):
    """Density of X = sum_{j>=2}(1+e_j) / (m (1+e_1)) with iid e_j ~ N(0, sigma^2).

    This is the closed form obtained by ignoring the sign of the denominator,
    so its total mass is 1 - 2 Phi(-1/sigma) rather than exactly 1.
    """
    x = np.asarray(x, dtype=float)
    q = -1.0 + m + m * m * x * x
    out = (m * (m - 1.0) * (1.0 + m * x) / (math.sqrt(2.0 * math.pi) * q ** 1.5 * sigma)
           * np.exp(-(1.0 - m + m * x) ** 2 / (2.0 * q * sigma * sigma)))
    return float(out) if out.ndim == 0 else out


def expected_J(sigma, m):
    """E[(1/m) sum_j (r_j / mean(r) - 1)^2] for multiplicative errors of size sigma.

    The dispersion equals m^2 / (1 + m X)^2 - 1 in terms of X.  Delays are
    positive, so X >= 0 and the expectation is taken over that range.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if sigma == 0:
        return 0.0
    c = (m - 1.0) / m
    half = 14.0 * sigma * (1.0 + c)
    cuts = [0.0, max(c - half, 0.0), c, c + half]
    cuts = sorted(set(cuts))
    f = lambda x: (m * m / (1.0 + m * x) ** 2 - 1.0) * ratio_normal_pdf(x, m, sigma)  # noqa: E731
    g = lambda x: ratio_normal_pdf(x, m, sigma)  # noqa: E731
    num = den = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(cuts[:-1], cuts[1:]):
            num += integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
            den += integrate.quad(g, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
        num += integrate.quad(f, cuts[-1], np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
        den += integrate.quad(g, cuts[-1], np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    return num / den


@lru_cache(maxsize=None)
def sigma_table(m):
    """(J values, sigma^2 values) on the fixed sigma grid, with a leading zero node."""
    js = np.array([expected_J(float(s), m) for s in SIGMA_NODES])
    if not np.all(np.diff(js) > 0):
        raise ArithmeticError(f"sigma lookup table is not monotone for m={m}")
    return np.concatenate([[0.0], js]), np.concatenate([[0.0], SIGMA_NODES ** 2])


def sigma_from_J(J, m):
    """Invert E[J](sigma) by linear interpolation in (J, sigma^2)."""
    js, s2 = sigma_table(m)
    if J <= 0:
        return 0.0
    return math.sqrt(float(np.interp(J, js, s2)))


@dataclass(frozen=True)
class DiscountDetail:
    k: float
    se: float
    m: int
    sigma: float   # nan when m < 2
    ratio_sum: float


def _delay_ratios(resp):
    answered = [(tau, t) for tau, t in zip(TAUS, resp.delays) if t is not None]
    ratios = []
    for tau, t in answered:
        if math.isinf(t):
            ratios.append(0.0)
            break
        ratios.append((tau / 2.0 - 1.0) / t)
    return ratios


def discount_detail(resp):
    ratios = _delay_ratios(resp)
    m = len(ratios)
    if m == 0:
        raise ValueError(f"respondent {resp.respondent_id} answered no delay question")
    total = sum(ratios)
    k = total / m
    if k == 0:
        return DiscountDetail(0.0, 0.0, m, 0.0 if m >= 2 else math.nan, 0.0)
    if m < 2:
        return DiscountDetail(k, 0.0, m, math.nan, total)
    sigma = estimate_sigma(resp, k)
    return DiscountDetail(k, k * sigma / math.sqrt(m), m, sigma, total)


def estimate_k(resp):
    d = discount_detail(resp)
    flags = ("single-answer",) if d.m < 2 and d.k > 0 else ()
    return EstimateWithSE(d.k, d.se, d.m, flags)


def estimate_sigma(resp, k_hat):
    ratios = _delay_ratios(resp)
    m = len(ratios)
    if m < 2:
        raise ValueError("sigma needs at least two answers")
    J = sum((r / k_hat - 1.0) ** 2 for r in ratios) / m
    return sigma_from_J(J, min(m, 4))


def estimate_rho_beta(responses):
    details = [discount_detail(r) for r in responses
               if any(t is not None for t in r.delays)]
    n = len(details)
    if n < 2:
        raise ValueError("need at least two respondents with delay answers")
    nonzero = [d for d in details if d.k > 0]
    rho = len(nonzero) / n
    rho_est = EstimateWithSE(rho, math.sqrt(rho * (1.0 - rho) / n), n)
    if not nonzero:
        return rho_est, EstimateWithSE(math.nan, math.nan, 0, ("undefined: no non-zero rates",))
    ms = np.array([d.m for d in nonzero], dtype=float)
    sig = np.array([d.sigma for d in nonzero])
    if np.any(np.isnan(sig)):
        # single-answer respondents borrow the pooled dispersion
        fill = np.nanmean(sig) if np.any(~np.isnan(sig)) else 0.0
        sig = np.where(np.isnan(sig), fill, sig)
    M = ms.sum()
    beta = sum(d.ratio_sum for d in nonzero) / M
    sbar2 = float(np.sum(ms * sig ** 2)) / M ** 2
    se = beta * math.sqrt(float(np.sum((ms / M) ** 2)) + 2.0 * sbar2)
    return rho_est, EstimateWithSE(beta, se, len(nonzero))


# ------------------------------------------------------- weighting factor

def _pi_and_slope(p, gamma):
    """weighting_pi and its derivative in gamma, broadcasting p (..., k) with gamma (..., 1)."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    pg = p ** gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        qg = np.where(q > 0, q ** gamma, 0.0)
        S = pg + qg
        pi = pg / S ** (1.0 / gamma)
        qlog = np.where(q > 0, qg * np.log(np.where(q > 0, q, 1.0)), 0.0)
        dlog = np.log(p) + np.log(S) / gamma ** 2 - (pg * np.log(p) + qlog) / (gamma * S)
    return pi, pi * dlog


def _rss(B, W, gamma):
    pi, _ = _pi_and_slope(PRICE_POINTS, gamma)
    sbp = np.sum(W * B * pi, axis=-1)
    spp = np.sum(W * pi * pi, axis=-1)
    return np.sum(W * B * B, axis=-1) - sbp * sbp / spp, sbp / spp


@dataclass(frozen=True)
class GammaFit:
    gamma: np.ndarray
    gamma_se: np.ndarray
    scale: np.ndarray
    scale_se: np.ndarray
    boundary: np.ndarray
    n_obs: np.ndarray


def _linearized(g, scale, s2, W):
    """Gauss-Newton variances and second-order (Box) biases of (gamma, scale)."""
    pi, dpi = _pi_and_slope(PRICE_POINTS, g[:, None])
    j_g = scale[:, None] * dpi
    j_c = pi
    a11 = np.sum(W * j_g * j_g, axis=1)
    a12 = np.sum(W * j_g * j_c, axis=1)
    a22 = np.sum(W * j_c * j_c, axis=1)
    det = a11 * a22 - a12 * a12
    i11, i12, i22 = a22 / det, -a12 / det, a11 / det
    h = 1e-5
    d2 = (_pi_and_slope(PRICE_POINTS, g[:, None] + h)[1]
          - _pi_and_slope(PRICE_POINTS, g[:, None] - h)[1]) / (2.0 * h)
    # trace of inverse information times each observation's Hessian
    tr = i11[:, None] * scale[:, None] * d2 + 2.0 * i12[:, None] * dpi
    u1 = np.sum(W * j_g * tr, axis=1)
    u2 = np.sum(W * j_c * tr, axis=1)
    return (s2 * i11, s2 * i22, -0.5 * s2 * (i11 * u1 + i12 * u2),
            -0.5 * s2 * (i12 * u1 + i22 * u2))


def fit_gamma_batch(B, grid_points=99, iterations=80, bias_correct=True):
    """Least-squares fit of B_j = pi(p_j, gamma) * C for many respondents at once.

    B is (n, 9) with NaN for unanswered items.  For fixed gamma the best C is
    a linear projection, so only gamma is searched: a grid scan on
    (0.01, 0.99) followed by a vectorized golden-section refinement.

    With bias_correct the second-order bias of nonlinear least squares
    (Box's formula) is subtracted; at survey noise levels the raw gamma
    estimate sits about 0.002 high, which is visible in population means.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    W = (~np.isnan(B)).astype(float)
    B = np.nan_to_num(B)
    n = B.shape[0]
    lo_g, hi_g = GAMMA_RANGE
    grid = np.linspace(lo_g, hi_g, grid_points)
    rss_grid = np.stack([_rss(B, W, g)[0] for g in grid], axis=1)
    best = np.argmin(rss_grid, axis=1)
    step = grid[1] - grid[0]
    a = np.clip(grid[best] - step, lo_g, hi_g)
    b = np.clip(grid[best] + step, lo_g, hi_g)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _rss(B, W, c[:, None])[0]
    fd = _rss(B, W, d[:, None])[0]
    for _ in range(iterations):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - invphi * (b - a)
        new_d = a + invphi * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        f_new = _rss(B, W, np.where(left, new_c, new_d)[:, None])[0]
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_next, d_next
    g = 0.5 * (a + b)
    # compare against the grid node and the range edges
    cands = np.stack([g, grid[best], np.full(n, lo_g), np.full(n, hi_g)], axis=1)
    rss_c = np.stack([_rss(B, W, cands[:, i:i + 1])[0] for i in range(4)], axis=1)
    g = cands[np.arange(n), np.argmin(rss_c, axis=1)]
    rss, scale = _rss(B, W, g[:, None])
    n_obs = W.sum(axis=1)
    edge = 1e-6
    boundary = (g - lo_g < edge) | (hi_g - g < edge)
    with np.errstate(divide="ignore", invalid="ignore"):
        s2 = np.maximum(rss, 0.0) / np.maximum(n_obs - 2.0, 1.0)
        var_g, var_c, bias_g, bias_c = _linearized(g, scale, s2, W)
        if bias_correct:
            # the corrected estimate is g - bias(g); its spread shrinks by |1 - bias'(g)|
            h = 1e-4
            slope = (_linearized(g + h, scale, s2, W)[2] - _linearized(g - h, scale, s2, W)[2]) / (2 * h)
            # the expansion is meaningless for fits pinned to the range edge
            ok = np.isfinite(bias_g) & np.isfinite(bias_c) & np.isfinite(slope) & ~boundary
            g = np.where(ok, np.clip(g - np.where(ok, bias_g, 0.0), lo_g, hi_g), g)
            scale = np.where(ok, scale - np.where(ok, bias_c, 0.0), scale)
            var_g = np.where(ok, var_g * (1.0 - np.where(ok, slope, 0.0)) ** 2, var_g)
    return GammaFit(gamma=g, gamma_se=np.sqrt(var_g), scale=scale, scale_se=np.sqrt(var_c),
                    boundary=boundary, n_obs=n_obs.astype(int))


def estimate_gamma(resp):
    """Weighting factor and stigma-plus-disutility scale for one respondent."""
    B = np.array([np.nan if x is None else x for x in resp.fine_answers], dtype=float)
    used = int(np.sum(~np.isnan(B)))
    if used < 3:
        raise ValueError("need at least three certainty-equivalent answers")
    if np.all(np.nan_to_num(B) == 0):
        raise ValueError("degenerate design: every answer is zero")
    fit = fit_gamma_batch(B[None, :])
    flags = ("boundary",) if fit.boundary[0] else ()
    return (EstimateWithSE(float(fit.gamma[0]), float(fit.gamma_se[0]), used, flags),
            EstimateWithSE(float(fit.scale[0]), float(fit.scale_se[0]), used))


def var_S2(sigmas):
    """Variance of the sample variance of independent normals with variances sigma_i^2.

    2((n-2) mean(sigma^4) + mean(sigma^2)^2) / (n-1)^2, which reduces to the
    classical 2 sigma^4 / (n-1) when all sigma_i are equal.
    """
    s2 = np.asarray(sigmas, dtype=float) ** 2
    n = s2.size
    if n < 2:
        raise ValueError("need n >= 2")
    return 2.0 * ((n - 2) * np.mean(s2 * s2) + np.mean(s2) ** 2) / (n - 1) ** 2


def estimate_gamma_population(values, ses):
    """Mean and spread of the weighting factor corrected for per-respondent error."""
    g = np.asarray(values, dtype=float)
    s = np.asarray(ses, dtype=float)
    n = g.size
    if n < 2:
        raise ValueError("need n >= 2")
    noise = float(np.mean(s ** 2))
    # statistics.variance is exact for floats, so identical estimates give exactly zero
    raw = statistics.variance(g.tolist()) - noise
    flags = ()
    if raw < 0:
        warnings.warn("negative spread estimate clamped to zero")
        flags = ("clamped",)
    var = max(raw, 0.0)
    mu = EstimateWithSE(statistics.fmean(g.tolist()), math.sqrt((var + noise) / n), n)
    se_var = math.sqrt(var_S2(np.sqrt(var + s ** 2)))
    sd = math.sqrt(var)
    se_sd = se_var / (2.0 * sd) if sd > 0 else math.sqrt(se_var)
    return mu, EstimateWithSE(sd, se_sd, n, flags), EstimateWithSE(var, se_var, n, flags)


# ---------------------------------------------------------------- harshness

def harshness(k, salary, detention, fine=SURVEY_FINE):
    if k == 0:
        return fine / (salary * detention)
    return k * fine / (salary * math.log1p(k * detention))


def estimate_harshness(resp, k_hat, fine=SURVEY_FINE):
    if resp.detention is None or resp.salary is None:
        return None
    return harshness(k_hat, resp.salary, resp.detention, fine)


# ------------------------------------------------------ independence check

def independence_split(a_values, b_items, fitter):
    """Fit B on the halves of the sample below and above the median of A.

    fitter maps a list of B items to {name: EstimateWithSE}.  Returns
    {name: {"low": ..., "high": ..., "z": ...}}.
    """
    n = len(a_values)
    if n < 4 or len(b_items) != n:
        raise ValueError("need at least four paired samples")
    order = np.argsort(np.asarray(a_values, dtype=float), kind="stable")
    half = n // 2
    low = fitter([b_items[i] for i in order[:half]])
    high = fitter([b_items[i] for i in order[half:]])
    out = {}
    for name in low:
        lo, hi = low[name], high[name]
        denom = math.sqrt(lo.se ** 2 + hi.se ** 2)
        z = abs(lo.value - hi.value) / denom if denom > 0 else (
            0.0 if lo.value == hi.value else math.inf)
        out[name] = {"low": lo.as_dict(), "high": hi.as_dict(), "z": z}
    return out


# --------------------------------------------------------------- histograms

def histogram_rows(values, width, cdf, start=0.0):
    """Rows (bin_left, bin_right, count, fitted_density) covering the data."""
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not width > 0:
        return []
    top = start + width * (math.floor((values.max() - start) / width) + 1)
    edges = np.arange(start, top + width / 2, width)
    counts, _ = np.histogram(values, bins=edges)
    rows = []
    for left, right, c in zip(edges[:-1], edges[1:], counts):
        rows.append((float(left), float(right), int(c), (cdf(right) - cdf(left)) / width))
    return rows


# --------------------------------------------------------- synthetic data

@dataclass
class SyntheticTruth:
    k: np.ndarray
    gamma: np.ndarray
    m: np.ndarray
    extra: dict = field(default_factory=dict)


def synthetic_survey(n, seed, rho=0.66, beta=0.00431, sigma=0.2, m_choices=(2, 3, 4),
                     mu_gamma=0.61, sigma_gamma=0.07, scale=568.0, noise=20.0,
                     salary_median=5000.0, harshness_median=0.0505):
    """Survey responses drawn from known parameters, plus the truth used."""
    rng = np.random.default_rng(seed)
    k = np.where(rng.random(n) < rho, rng.exponential(beta, n), 0.0)
    m = rng.choice(np.asarray(m_choices), n)
    eps = rng.normal(0.0, sigma, (n, 4))
    while np.any(eps <= -1.0):
        bad = eps <= -1.0
        eps[bad] = rng.normal(0.0, sigma, int(bad.sum()))
    g = rng.normal(mu_gamma, sigma_gamma, n)
    while np.any((g <= GAMMA_RANGE[0]) | (g >= GAMMA_RANGE[1])):
        bad = (g <= GAMMA_RANGE[0]) | (g >= GAMMA_RANGE[1])
        g[bad] = rng.normal(mu_gamma, sigma_gamma, int(bad.sum()))
    B = weighting_pi(np.broadcast_to(PRICE_POINTS, (n, 9)), g[:, None]) * scale
    B = B + rng.normal(0.0, noise, B.shape)
    salary = salary_median * np.exp(rng.normal(0.0, 0.5, n))
    r = harshness_median * np.exp(rng.normal(0.0, 0.3, n))
    out = []
    for i in range(n):
        if k[i] == 0:
            delays = (math.inf,) * 4
        else:
            delays = tuple((TAUS[j] / 2.0 - 1.0) / (k[i] * (1.0 + eps[i, j])) if j < m[i]
                           else None for j in range(4))
        # detention hours at which the fine and the detention feel equally bad
        x = r[i] * salary[i] / SURVEY_FINE
        det = 1.0 / x if k[i] == 0 else math.expm1(min(k[i] / x, 700.0)) / k[i]
        out.append(SurveyResponse(str(i), float(salary[i]), delays,
                                  tuple(float(b) for b in B[i]), float(det)))
    return out, SyntheticTruth(k=k, gamma=g, m=m, extra={"harshness": r})
