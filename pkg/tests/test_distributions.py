import math

import numpy as np
import pytest

from deterrence.distributions import (DiscountDist, GammaDist, WealthDist, is_monotone,
                                      pareto_pdf_cdf, pi_fixed_point, sample_discount,
                                      sample_gamma, sample_wealth, weighting_pi,
                                      weighting_pi_inverse, zie_pdf_cdf)
from deterrence.errors import NonMonotoneError


def test_pareto_cdf_values():
    d = WealthDist(2.0, 100.0)
    assert pareto_pdf_cdf(d, 100.0)[1] == 0.0
    assert pareto_pdf_cdf(d, 200.0)[1] == pytest.approx(0.75, abs=1e-15)
    assert pareto_pdf_cdf(d, 1e12)[1] == pytest.approx(1.0, abs=1e-15)


def test_pareto_rejects_bad_shape():
    with pytest.raises(ValueError):
        WealthDist(1.0, 100.0)
    with pytest.raises(ValueError):
        WealthDist(2.0, 0.0)


def test_zero_inflated_exponential():
    d = DiscountDist(0.66, 0.00431)
    at0 = zie_pdf_cdf(d, 0.0)
    assert at0.atom == pytest.approx(0.34) and at0.cdf == pytest.approx(0.34)
    assert zie_pdf_cdf(d, 0.00431).cdf == pytest.approx(0.34 + 0.66 * (1 - math.exp(-1)), abs=1e-12)
    assert zie_pdf_cdf(d, 0.00431).cdf == pytest.approx(0.7572, abs=5e-5)
    pure = DiscountDist(1.0, 0.01)
    assert zie_pdf_cdf(pure, 0.02).cdf == pytest.approx(1 - math.exp(-2), abs=1e-14)


def test_samplers():
    assert np.all(sample_discount(DiscountDist(0.0, 0.3), 10_000, 4) == 0.0)
    w = sample_wealth(WealthDist(2.0, 100.0), 100_000, 1)
    assert abs(np.median(w) / (100 * math.sqrt(2)) - 1) < 0.01
    assert np.array_equal(sample_wealth(WealthDist(2.0, 100.0), 50, 9),
                          sample_wealth(WealthDist(2.0, 100.0), 50, 9))
    g = sample_gamma(GammaDist(0.61, 0.3), 20_000, 3)
    assert g.min() > 0.01 and g.max() < 0.99


def test_weighting_values():
    assert weighting_pi(0.5, 1.0) == pytest.approx(0.5)
    assert weighting_pi(0.0, 0.61) == 0.0
    assert weighting_pi(1.0, 0.61) == 1.0
    g = 0.61
    assert weighting_pi(0.5, g) == pytest.approx(2 ** (1 - g - 1 / g), rel=1e-14)
    assert weighting_pi(0.5, g) == pytest.approx(0.4206, abs=5e-5)
    arr = weighting_pi(np.array([0.0, 0.5, 1.0]), g)
    assert arr[1] == pytest.approx(weighting_pi(0.5, g))


def test_weighting_inverse():
    assert weighting_pi_inverse(0.0, 0.61) == 0.0
    assert weighting_pi_inverse(1.0, 0.61) == 1.0
    assert weighting_pi_inverse(0.5, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert weighting_pi_inverse(0.4206, 0.61) == pytest.approx(0.5, abs=1e-3)
    y = 2 ** (1 - 0.61 - 1 / 0.61)
    assert weighting_pi_inverse(y, 0.61) == pytest.approx(0.5, abs=1e-6)


def test_inverse_refuses_non_monotone_gamma():
    assert is_monotone(0.61)
    assert not is_monotone(0.2)
    with pytest.raises(NonMonotoneError):
        weighting_pi_inverse(0.3, 0.2)


@pytest.mark.parametrize("gamma", [0.3, 0.5, 0.61, 0.7, 0.9])
def test_fixed_point(gamma):
    p = pi_fixed_point(gamma)
    assert 0 < p < 0.5
    assert abs(weighting_pi(p, gamma) - p) < 1e-10
    # (pi(p)/p)^gamma at one half sits below one, so the crossing lies left of one half
    ratio = (weighting_pi(0.5, gamma) / 0.5) ** gamma
    assert ratio == pytest.approx(2 ** (-(1 - gamma) ** 2), rel=1e-13)
    assert ratio < 1


def test_fixed_point_rejects_identity():
    with pytest.raises(ValueError):
        pi_fixed_point(1.0)
