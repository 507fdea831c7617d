"""Flow evaluation: closed forms, the time integral Phi, and boundary orbits."""

import math

import pytest
from hypothesis import given, strategies as st

from qsdflow.errors import ContractError
from qsdflow.fixtures import load_fixture
from qsdflow.flows import (
    FlowConfig,
    a_of_t,
    drift_dt,
    phi_explosive,
    phi_extinction,
    scaling_f,
    u_flow,
    v_of_t,
)

FELLER = load_fixture("feller")
SP = load_fixture("stable_plus_half")
SM = load_fixture("stable_minus_half")
LSM = load_fixture("linear_stable_minus")
TP = load_fixture("truncated_pareto_half")

ODE = FlowConfig(backend="ode")
INV = FlowConfig(backend="phi_inversion")
CROSS = FlowConfig(backend="cross_check")

# Frozen oracles, independently derived with 50-digit quadrature of
# 1/(-Psi) (explosive side) and inversion of the resulting Phi.
TP_PHI = {
    0.5: 1.0048205880287667599,
    1.0: 1.5862211444300556622,
    2.0: 2.6354232860134305745,
    4.0: 4.6508505471389444743,
}
TP_A1 = 0.49618981316585262024
TP_A5 = 4.3486541551968723111
TP_U11 = 1.9518795847588600228


def _feller_u(t, lam):
    return lam / (1.0 + lam * t)


def _sm_u(t, lam):
    return (math.sqrt(lam) + 0.5 * t) ** 2


class TestClosedForms:
    @pytest.mark.parametrize("cfg", [ODE, INV], ids=["ode", "phi_inversion"])
    def test_feller(self, cfg):
        for t in (0.1, 1.0, 5.0):
            for lam in (0.1, 1.0, 5.0):
                got = u_flow(FELLER, t, lam, cfg).value
                assert math.isclose(got, _feller_u(t, lam), rel_tol=1e-9)

    @pytest.mark.parametrize("cfg", [ODE, INV], ids=["ode", "phi_inversion"])
    def test_stable_minus(self, cfg):
        for t in (0.1, 1.0, 5.0):
            for lam in (0.1, 1.0, 5.0):
                got = u_flow(SM, t, lam, cfg).value
                assert math.isclose(got, _sm_u(t, lam), rel_tol=1e-9)

    def test_stable_plus(self):
        # u(t, lam) = (lam^{-alpha} + c alpha t)^{-1/alpha}
        got = u_flow(SP, 2.0, 1.0).value
        assert math.isclose(got, (1.0 + 0.5 * 2.0) ** -2.0, rel_tol=1e-10)

    def test_truncated_pareto_oracle(self):
        assert math.isclose(u_flow(TP, 1.0, 1.0).value, TP_U11, rel_tol=1e-10)

    def test_t_zero_is_identity(self):
        res = u_flow(TP, 0.0, 3.5)
        assert res.value == 3.5 and res.achieved_error_estimate == 0.0


class TestPhi:
    def test_truncated_pareto_oracles(self):
        for lam, want in TP_PHI.items():
            assert math.isclose(phi_explosive(TP, lam), want, rel_tol=1e-11)

    def test_linear_stable_minus_closed_form(self):
        # Phi(lam) = log(1 + (c/k) lam^alpha) / (alpha c): 2 log 2 at lam = 1
        assert math.isclose(phi_explosive(LSM, 1.0), 2.0 * math.log(2.0), rel_tol=1e-12)

    def test_stable_minus_closed_form(self):
        for lam in (0.25, 1.0, 4.0):
            assert math.isclose(phi_explosive(SM, lam), 2.0 * math.sqrt(lam), rel_tol=1e-12)

    def test_extinction_side_closed_form(self):
        # feller: Phi_ext(lam) = 1/(c lam); stable_plus: lam^{-alpha}/(c alpha)
        assert math.isclose(phi_extinction(FELLER, 2.0), 0.5, rel_tol=1e-12)
        assert math.isclose(phi_extinction(SP, 4.0), 1.0, rel_tol=1e-12)

    def test_wrong_side_rejected(self):
        with pytest.raises(ContractError):
            phi_explosive(FELLER, 1.0)
        with pytest.raises(ContractError):
            phi_extinction(TP, 1.0)

    @given(lam=st.floats(min_value=0.01, max_value=100.0), t=st.floats(min_value=0.01, max_value=20.0))
    def test_flow_time_identity_explosive(self, lam, t):
        u = u_flow(TP, t, lam).value
        assert math.isclose(phi_explosive(TP, u), t + phi_explosive(TP, lam), rel_tol=1e-9)

    @given(lam=st.floats(min_value=0.01, max_value=100.0), t=st.floats(min_value=0.01, max_value=20.0))
    def test_flow_time_identity_extinction(self, lam, t):
        u = u_flow(FELLER, t, lam).value
        assert math.isclose(phi_extinction(FELLER, u), t + phi_extinction(FELLER, lam), rel_tol=1e-9)


class TestBoundaryOrbits:
    def test_survival_exponent_oracles(self):
        assert math.isclose(a_of_t(TP, 1.0), TP_A1, rel_tol=1e-10)
        assert math.isclose(a_of_t(TP, 5.0), TP_A5, rel_tol=1e-10)

    def test_survival_exponent_closed_form(self):
        # stable_minus: a_t = (alpha k t)^{1/alpha} = (t/2)^2
        for t in (0.5, 1.0, 3.0):
            assert math.isclose(a_of_t(SM, t), (0.5 * t) ** 2, rel_tol=1e-11)

    def test_lambda_zero_orbit(self):
        assert math.isclose(u_flow(TP, 2.0, 0.0).value, a_of_t(TP, 2.0), rel_tol=1e-12)
        with pytest.raises(ContractError):
            u_flow(FELLER, 2.0, 0.0)

    def test_extinction_exponent_closed_form(self):
        # stable_plus: v(t) = (c alpha t)^{-1/alpha}; feller: 1/(c t)
        for t in (0.5, 1.0, 4.0):
            assert math.isclose(v_of_t(SP, t), (0.5 * t) ** -2.0, rel_tol=1e-11)
            assert math.isclose(v_of_t(FELLER, t), 1.0 / t, rel_tol=1e-11)

    def test_infinite_lambda_rejected(self):
        with pytest.raises(ContractError):
            u_flow(FELLER, 1.0, math.inf)

    def test_survival_exponent_monotone(self):
        grid = [a_of_t(TP, t) for t in (0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(a < b for a, b in zip(grid, grid[1:]))


class TestSemigroup:
    @given(
        lam=st.floats(min_value=0.05, max_value=20.0),
        t=st.floats(min_value=0.05, max_value=5.0),
        s=st.floats(min_value=0.05, max_value=5.0),
    )
    def test_nesting(self, lam, t, s):
        whole = u_flow(TP, t + s, lam).value
        nested = u_flow(TP, t, u_flow(TP, s, lam).value).value
        assert math.isclose(whole, nested, rel_tol=1e-9)

    def test_monotone_in_lambda(self):
        vals = [u_flow(TP, 1.0, lam).value for lam in (0.1, 0.5, 1.0, 2.0, 10.0)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestDriftCoefficient:
    def test_values(self):
        assert drift_dt(TP, 3.0) == 1.0  # D = 0
        assert math.isclose(drift_dt(LSM, 2.0), math.exp(2.0), rel_tol=1e-14)

    def test_multiplicative(self):
        whole = drift_dt(LSM, 2.0)
        split = drift_dt(LSM, 0.7) * drift_dt(LSM, 1.3)
        assert math.isclose(whole, split, rel_tol=1e-14)

    def test_scaling_function_positive_increasing(self):
        vals = [scaling_f(SM, t) for t in (1.0, 10.0, 100.0)]
        assert all(v > 0.0 for v in vals)
        assert vals[0] < vals[1] < vals[2]


class TestBackends:
    def test_cross_check_reports_gap(self):
        res = u_flow(TP, 1.0, 1.0, CROSS)
        assert res.backend_used == "cross_check"
        assert res.agreement_gap is not None and res.agreement_gap < 1e-9

    def test_single_backends_report_none(self):
        assert u_flow(TP, 1.0, 1.0, INV).agreement_gap is None

    def test_config_validation(self):
        with pytest.raises(ContractError):
            FlowConfig(rel_tol=0.0)
        with pytest.raises(ContractError):
            FlowConfig(backend="nope")
        with pytest.raises(ContractError):
            FlowConfig(max_steps=10)

    def test_negative_inputs_rejected(self):
        with pytest.raises(ContractError):
            u_flow(TP, -1.0, 1.0)
        with pytest.raises(ContractError):
            u_flow(TP, 1.0, -1.0)
