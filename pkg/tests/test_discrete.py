"""Discrete-state branching: offspring laws, the pgf flow, and the QSD recursion."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsdflow.discrete import (
    DiscreteBranching,
    FinitePmfOffspring,
    SibuyaOffspring,
    discrete_from_config,
    dsbp_F,
    dsbp_classify,
    dsbp_phi,
    dsbp_qsd_pmf,
    offspring_sampling_table,
)
from qsdflow.errors import ContractError, NoQsdError

SIB = DiscreteBranching(c=1.0, xi=SibuyaOffspring(alpha=0.5))

# Frozen oracles: 50-digit quadrature of 1/(c (pgf(q) - q)) from r to 1
SIB_PHI = {
    0.1: 5.93947801145817933,
    0.5: 2.45589435459903136,
    0.75: 1.38629436111989062,
    0.9: 0.760260816132343188,
}


class TestOffspring:
    def test_sibuya_exact_coefficients(self):
        # p_k = (-1)^{k+1} binom(alpha, k); alpha = 1/2 gives dyadic rationals
        got = SibuyaOffspring(alpha=0.5).coefficients(6)
        want = [1 / 2, 1 / 8, 1 / 16, 5 / 128, 7 / 256, 21 / 1024]
        assert np.allclose(got, want, rtol=0.0, atol=1e-15)

    def test_sibuya_pgf(self):
        xi = SibuyaOffspring(alpha=0.5)
        for r in (0.0, 0.3, 0.9, 1.0):
            assert math.isclose(xi.pgf(r), 1.0 - math.sqrt(1.0 - r), abs_tol=1e-15)

    @given(alpha=st.floats(min_value=0.05, max_value=0.95))
    def test_sibuya_coefficients_sum_to_pgf(self, alpha):
        xi = SibuyaOffspring(alpha=alpha)
        coeff = xi.coefficients(200)
        r = 0.5
        series = sum(c * r ** (k + 1) for k, c in enumerate(coeff))
        assert math.isclose(series, xi.pgf(r), rel_tol=1e-10)

    def test_sibuya_validation(self):
        with pytest.raises(ContractError):
            SibuyaOffspring(alpha=1.0)

    def test_finite_pmf(self):
        xi = FinitePmfOffspring(probs=(0.25, 0.0, 0.75))  # P(0)=1/4, P(2)=3/4
        assert math.isclose(xi.pgf(0.5), 0.25 + 0.75 * 0.25, rel_tol=1e-15)
        with pytest.raises(ContractError):
            FinitePmfOffspring(probs=(0.5, 0.6))


class TestClassification:
    def test_sibuya_explodes(self):
        cls = dsbp_classify(SIB)
        assert cls.explosive_as
        assert math.isclose(cls.beta0, 0.5, rel_tol=1e-14)

    def test_beta0_scales_with_rate(self):
        d = DiscreteBranching(c=3.0, xi=SibuyaOffspring(alpha=0.5))
        assert math.isclose(dsbp_classify(d).beta0, 1.5, rel_tol=1e-14)

    def test_finite_mean_is_conservative(self):
        d = DiscreteBranching(c=1.0, xi=FinitePmfOffspring(probs=(0.0, 0.0, 1.0)))
        assert not dsbp_classify(d).explosive_as


class TestFlow:
    def test_phi_oracles(self):
        for r, want in SIB_PHI.items():
            assert math.isclose(dsbp_phi(SIB, r), want, rel_tol=1e-11)

    def test_survival_decreasing(self):
        surv = [dsbp_F(SIB, t, 1.0) for t in (0.5, 1.0, 5.0, 30.0)]
        assert all(0.0 < v <= 1.0 for v in surv)
        assert all(b < a for a, b in zip(surv, surv[1:]))

    @given(
        r=st.floats(min_value=0.05, max_value=0.95),
        t=st.floats(min_value=0.1, max_value=5.0),
        s=st.floats(min_value=0.1, max_value=5.0),
    )
    def test_semigroup(self, r, t, s):
        whole = dsbp_F(SIB, t + s, r)
        nested = dsbp_F(SIB, t, dsbp_F(SIB, s, r))
        assert math.isclose(whole, nested, rel_tol=1e-8, abs_tol=1e-12)

    def test_flow_time_identity(self):
        # Phi(F(t, r)) = t + Phi(r)
        for t in (0.5, 2.0):
            for r in (0.25, 0.75):
                val = dsbp_phi(SIB, dsbp_F(SIB, t, r))
                assert math.isclose(val, t + dsbp_phi(SIB, r), rel_tol=1e-9)

    def test_domain(self):
        with pytest.raises(ContractError):
            dsbp_F(SIB, 1.0, 1.5)
        with pytest.raises(ContractError):
            dsbp_F(SIB, -1.0, 0.5)


class TestQsdRecursion:
    def test_ground_state_is_offspring_law(self):
        q = dsbp_qsd_pmf(SIB, n=1)
        exact = SibuyaOffspring(alpha=0.5).coefficients(20)
        assert np.max(np.abs(q.pmf[:20] - exact)) <= 1e-10

    def test_excited_state(self):
        q = dsbp_qsd_pmf(SIB, n=2)
        assert q.n == 2
        assert q.pmf[0] == 0.0  # states below the spectrum index carry no mass
        assert q.pmf[1] > 0.0
        assert abs(q.pmf.sum() + q.truncation_residual - 1.0) < 1e-12

    def test_off_spectrum_rejected(self):
        with pytest.raises(NoQsdError, match="no QSD"):
            dsbp_qsd_pmf(SIB, beta=1.5 * SIB.beta0())
        with pytest.raises(NoQsdError):
            dsbp_qsd_pmf(SIB, beta=0.7)

    def test_beta_on_spectrum_matches_n(self):
        a = dsbp_qsd_pmf(SIB, n=1).pmf
        b = dsbp_qsd_pmf(SIB, beta=SIB.beta0()).pmf
        assert np.array_equal(a, b)

    def test_argument_validation(self):
        with pytest.raises(ContractError):
            dsbp_qsd_pmf(SIB)  # neither n nor beta
        with pytest.raises(ContractError):
            dsbp_qsd_pmf(SIB, n=1, beta=0.5)  # both
        with pytest.raises(ContractError):
            dsbp_qsd_pmf(SIB, n=0)
        with pytest.raises(ContractError):
            dsbp_qsd_pmf(SIB, n=4, K=2)  # K below the spectrum index

    def test_conservative_model_rejected(self):
        d = DiscreteBranching(c=1.0, xi=FinitePmfOffspring(probs=(0.0, 0.0, 1.0)))
        with pytest.raises(ContractError):
            dsbp_qsd_pmf(d, n=1)

    def test_conditional_pgf_converges(self):
        # F(t, r)/F(t, 1) approaches the ground-state pgf, here xi's own pgf
        surv = dsbp_F(SIB, 30.0, 1.0)
        for r in (0.1, 0.5, 0.9):
            got = dsbp_F(SIB, 30.0, r) / surv
            assert math.isclose(got, SIB.xi.pgf(r), abs_tol=1e-4)


class TestSamplingTable:
    def test_cdf_matches_coefficients(self):
        cdf, tail_coef, tail_inv_alpha = offspring_sampling_table(SIB.xi)
        coeff = SIB.xi.coefficients(len(cdf))
        # cdf[j] = P(offspring <= j); offspring of 0 has probability 0 here
        assert cdf[0] == 0.0
        assert math.isclose(cdf[1], 0.5, abs_tol=1e-15)
        assert math.isclose(cdf[3], 0.5 + 0.125 + 0.0625, abs_tol=1e-14)
        assert np.all(np.diff(cdf) >= 0.0)
        assert tail_inv_alpha == pytest.approx(2.0)  # 1/alpha

    def test_finite_pmf_table_saturates(self):
        xi = FinitePmfOffspring(probs=(0.25, 0.0, 0.75))
        cdf, _, _ = offspring_sampling_table(xi)
        assert math.isclose(cdf[-1], 1.0, abs_tol=1e-15)


class TestConfig:
    def test_round_trip(self):
        back = discrete_from_config(SIB.to_config())
        assert isinstance(back, DiscreteBranching)
        assert back.c == SIB.c and back.xi == SIB.xi

    def test_finite_pmf_round_trip(self):
        d = DiscreteBranching(c=2.0, xi=FinitePmfOffspring(probs=(0.1, 0.2, 0.7)))
        back = discrete_from_config(d.to_config())
        assert back == d

    def test_bad_config(self):
        with pytest.raises(ContractError):
            discrete_from_config({"family": "csbp"})
        with pytest.raises(ContractError):
            discrete_from_config({"family": "dsbp", "c": 1.0, "xi": {"kind": "nope"}})
