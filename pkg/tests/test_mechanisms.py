"""Mechanism evaluation, classification, and the event-simulation decomposition."""

import math

import pytest
from hypothesis import given, strategies as st

from qsdflow.errors import ContractError, UnsupportedClassificationError
from qsdflow.mechanisms import (
    FiniteAtom,
    General,
    LinearDrift,
    LinearStableMinus,
    ParetoTail,
    StableMinus,
    StablePlus,
    TruncatedPareto,
    classify,
    jump_decomposition,
    mechanism_from_config,
    psi_derivatives,
    psi_eval,
    truncated_mechanism,
)

TP = TruncatedPareto(rho=1.0, alpha=0.5, h0=1.0)
SM = StableMinus(k=1.0, alpha=0.5)
LSM = LinearStableMinus(c=1.0, k=1.0, alpha=0.5)
SP = StablePlus(c=1.0, alpha=0.5)
FELLER = StablePlus(c=1.0, alpha=1.0)

# Frozen oracles, independently derived with 50-digit arithmetic from the
# defining integrals (incomplete gamma for the Pareto tail).
TP_PSI = {
    0.5: -0.79115908571071802443,
    1.0: -0.9109261441092196549,
    2.0: -0.97871696474917140466,
}
TP_PSI_PRIME_1 = -0.13940279264033098825
TP_PSI_SECOND_1 = 0.25364111690588665492
TP_ALPHA1_PSI_1 = -0.85150449322407795208


class TestClosedForms:
    def test_truncated_pareto_oracles(self):
        for u, want in TP_PSI.items():
            assert math.isclose(psi_eval(TP, u), want, rel_tol=1e-13)

    def test_truncated_pareto_derivative_oracles(self):
        d1, d2 = psi_derivatives(TP, 1.0)
        assert math.isclose(d1, TP_PSI_PRIME_1, rel_tol=1e-13)
        assert math.isclose(d2, TP_PSI_SECOND_1, rel_tol=1e-13)

    def test_truncated_pareto_alpha_one(self):
        m = TruncatedPareto(rho=1.0, alpha=1.0, h0=1.0)
        assert math.isclose(psi_eval(m, 1.0), TP_ALPHA1_PSI_1, rel_tol=1e-13)

    def test_power_families_exact(self):
        assert psi_eval(SM, 4.0) == -2.0
        assert psi_eval(SP, 4.0) == 8.0
        assert psi_eval(FELLER, 3.0) == 9.0
        assert psi_eval(LSM, 4.0) == -6.0
        assert psi_eval(LinearDrift(D=-2.0), 3.0) == -6.0

    def test_psi_at_zero(self):
        for m in (TP, SM, LSM, SP, FELLER, LinearDrift(D=1.0)):
            assert psi_eval(m, 0.0) == 0.0

    def test_nu_mass(self):
        # total jump rate per unit mass: rho for the Pareto tail
        assert math.isclose(TP.nu_mass(), 1.0, rel_tol=1e-14)
        assert math.isclose(TruncatedPareto(rho=2.5, alpha=0.3, h0=0.7).nu_mass(), 2.5, rel_tol=1e-14)
        assert math.isinf(SM.nu_mass())


_PARAM = st.floats(min_value=0.1, max_value=5.0)
_ALPHA = st.floats(min_value=0.05, max_value=0.95)


def _central_diff_matches(mech, u: float):
    d1, d2 = psi_derivatives(mech, u)
    f = lambda v: psi_eval(mech, v)
    h1 = u * 1e-5
    num1 = (f(u + h1) - f(u - h1)) / (2.0 * h1)
    assert math.isclose(d1, num1, rel_tol=1e-5, abs_tol=1e-10)
    # second difference needs a wider step or cancellation noise dominates
    h2 = u * 1e-3
    num2 = (f(u + h2) - 2.0 * f(u) + f(u - h2)) / (h2 * h2)
    assert math.isclose(d2, num2, rel_tol=1e-3, abs_tol=1e-8)


class TestProperties:
    @given(rho=_PARAM, alpha=st.floats(min_value=0.05, max_value=1.0), h0=_PARAM)
    def test_truncated_pareto_shape(self, rho, alpha, h0):
        m = TruncatedPareto(rho=rho, alpha=alpha, h0=h0)
        grid = (1e-4, 1e-2, 1.0, 1e2, 1e4)
        vals = [psi_eval(m, u) for u in grid]
        # decreasing toward -rho; equality allowed once e^{-u h0} saturates,
        # and the bound itself only up to a couple of ulps of roundoff
        assert all(v >= -rho * (1.0 + 1e-12) for v in vals)
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        assert vals[2] < vals[1] < vals[0] < 0.0
        for u in (1e-4, 1e-2, 1.0):
            assert psi_derivatives(m, u)[1] > 0.0

    @given(k=_PARAM, alpha=_ALPHA)
    def test_stable_minus_derivatives(self, k, alpha):
        m = StableMinus(k=k, alpha=alpha)
        for u in (0.5, 1.0, 3.0):
            _central_diff_matches(m, u)

    @given(c=_PARAM, k=_PARAM, alpha=_ALPHA)
    def test_linear_stable_minus_derivatives(self, c, k, alpha):
        m = LinearStableMinus(c=c, k=k, alpha=alpha)
        for u in (0.5, 1.0, 3.0):
            _central_diff_matches(m, u)

    @given(rho=_PARAM, alpha=st.floats(min_value=0.05, max_value=1.0), h0=_PARAM)
    def test_truncated_pareto_derivatives(self, rho, alpha, h0):
        m = TruncatedPareto(rho=rho, alpha=alpha, h0=h0)
        for u in (0.5, 1.0, 3.0):
            _central_diff_matches(m, u)

    @given(c=_PARAM, alpha=st.floats(min_value=0.05, max_value=1.0))
    def test_stable_plus_convex(self, c, alpha):
        m = StablePlus(c=c, alpha=alpha)
        for u in (1e-3, 0.1, 1.0, 10.0):
            assert psi_eval(m, u) > 0.0
            assert psi_derivatives(m, u)[1] > 0.0


class TestClassification:
    def test_truncated_pareto(self):
        cls = classify(TP)
        assert cls.criticality == "supercritical"
        assert cls.finite_variation and cls.D == 0.0
        assert cls.almost_sure_explosion and cls.explosion_time_finite
        assert not cls.extinction_time_finite
        assert cls.psi_infinity == -1.0
        assert math.isinf(cls.q)

    def test_stable_minus(self):
        cls = classify(SM)
        assert cls.criticality == "supercritical"
        assert cls.finite_variation and cls.D == 0.0
        assert cls.almost_sure_explosion
        assert math.isinf(cls.psi_infinity) and cls.psi_infinity < 0

    def test_linear_stable_minus(self):
        cls = classify(LSM)
        assert cls.almost_sure_explosion
        assert cls.finite_variation and cls.D == -1.0

    def test_critical_extinction_side(self):
        for m in (SP, FELLER):
            cls = classify(m)
            assert cls.criticality == "critical"
            assert cls.extinction_time_finite
            assert not cls.explosion_time_finite
            assert not cls.finite_variation
            assert cls.q == 0.0

    def test_feller_second_derivative(self):
        assert classify(FELLER).psi_second_zero == 2.0

    def test_conservative_drift(self):
        cls = classify(LinearDrift(D=-1.0))
        assert not cls.explosion_time_finite
        assert not cls.extinction_time_finite
        assert not cls.almost_sure_explosion

    def test_explosion_requires_finite_time(self):
        for m in (TP, SM, LSM, SP, FELLER, LinearDrift(D=1.0), LinearDrift(D=-1.0)):
            cls = classify(m)
            assert cls.explosion_time_finite or not cls.almost_sure_explosion

    def test_truncated_pareto_alpha1_not_explosive(self):
        # boundary index: the explosion-side integral diverges logarithmically
        cls = classify(TruncatedPareto(rho=1.0, alpha=1.0, h0=1.0))
        assert not cls.explosion_time_finite

    def test_general_subcritical(self):
        m = General(gamma=2.0, nu=(FiniteAtom(h=1.0, mass=1.0),))
        cls = classify(m)
        assert cls.criticality == "subcritical"
        assert cls.psi_prime_zero == 1.0


class TestValidation:
    def test_bad_params(self):
        with pytest.raises(ContractError):
            TruncatedPareto(rho=-1.0, alpha=0.5, h0=1.0)
        with pytest.raises(ContractError):
            StableMinus(k=1.0, alpha=1.0)
        with pytest.raises(ContractError):
            StablePlus(c=1.0, alpha=1.5)
        with pytest.raises(ContractError):
            LinearStableMinus(c=0.0, k=1.0, alpha=0.5)
        with pytest.raises(ContractError):
            General(sigma2=-1.0)

    def test_unsupported_component(self):
        with pytest.raises(UnsupportedClassificationError):
            General(nu=(object(),))


class TestJumpDecomposition:
    def test_truncated_pareto_exact(self):
        deco = jump_decomposition(TP)
        assert deco.eps is None
        assert deco.drift_defect == 0.0
        assert math.isclose(deco.total_rate, 1.0, rel_tol=1e-14)

    def test_stable_minus_truncation(self):
        # nu has infinite activity below any cutoff: mass above eps=1e-4 is
        # eps^{-1/2}/sqrt(pi), dropped linear dust is eps^{1/2}/sqrt(pi)
        deco = jump_decomposition(SM, eps=1e-4)
        assert math.isclose(deco.total_rate, 56.418958354775626, rel_tol=1e-12)
        assert math.isclose(deco.drift_defect, 0.005641895835477563, rel_tol=1e-12)

    def test_stable_minus_needs_eps(self):
        with pytest.raises(ContractError):
            jump_decomposition(SM)

    def test_quadratic_rejected(self):
        with pytest.raises(ContractError):
            jump_decomposition(FELLER, eps=1e-4)

    def test_drift_only(self):
        deco = jump_decomposition(LinearDrift(D=-0.5))
        assert deco.total_rate == 0.0 and deco.D == -0.5

    def test_truncated_mechanism_oracle(self):
        trunc = truncated_mechanism(SM, eps=1e-4)
        assert math.isclose(psi_eval(trunc, 1.0), -0.99435819819423909673, rel_tol=1e-12)

    def test_truncated_mechanism_converges(self):
        # the truncated transform approaches the full one as eps shrinks
        errs = []
        for eps in (1e-2, 1e-3, 1e-4):
            trunc = truncated_mechanism(SM, eps=eps)
            errs.append(abs(psi_eval(trunc, 1.0) - psi_eval(SM, 1.0)))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-2


class TestConfigRoundTrip:
    @pytest.mark.parametrize(
        "mech",
        [
            TP,
            SM,
            LSM,
            SP,
            FELLER,
            LinearDrift(D=-1.5),
            General(
                gamma=0.25,
                sigma2=0.5,
                nu=(FiniteAtom(h=2.0, mass=0.3), ParetoTail(scale=1.0, exponent=0.5, cutoff=1.0)),
            ),
        ],
        ids=lambda m: type(m).__name__,
    )
    def test_round_trip(self, mech):
        back = mechanism_from_config(mech.to_config())
        for u in (0.1, 1.0, 10.0):
            assert psi_eval(back, u) == psi_eval(mech, u)

    def test_unknown_family(self):
        with pytest.raises(ContractError):
            mechanism_from_config({"family": "nope"})
