"""Release gate: twelve end-to-end criteria, one test per criterion.

Each test is self-contained and pins the tolerance it must meet, so a
verbose run gives a single pass/fail line per criterion.  Criteria 1-10
are deterministic closed-form and asymptotic checks; criterion 11 runs
the seeded Monte Carlo verification suites; criterion 12 checks that
verification reports are byte-identical across reruns and thread counts.
"""

import math
import time

import pytest

from qsdflow.cli import main as cli_main
from qsdflow.discrete import dsbp_F, dsbp_classify, dsbp_qsd_pmf
from qsdflow.errors import NoQsdError
from qsdflow.fixtures import load_fixture
from qsdflow.flows import FlowConfig, drift_dt, phi_explosive, phi_extinction, u_flow, v_of_t
from qsdflow.mechanisms import classify, psi_eval
from qsdflow.montecarlo import kernel_backend
from qsdflow.qsd import (
    conditional_laplace_explosive,
    limit_prop4,
    limit_thm1i,
    thm3_f_ratio,
    thm3_scaled_gap,
    thm3_scaled_gap_log10,
)
from qsdflow.verify import run_suites

GRID = (0.1, 0.5, 1.0, 2.0, 5.0)

SM = load_fixture("stable_minus_half")
LSM = load_fixture("linear_stable_minus")
TP = load_fixture("truncated_pareto_half")
SP = load_fixture("stable_plus_half")
FELLER = load_fixture("feller")
SIB = load_fixture("sibuya_half")

CONTINUOUS = (SM, LSM, TP, SP, FELLER)
EXPLOSIVE = (SM, LSM, TP)


def test_criterion_01_closed_form_flows():
    start = time.perf_counter()
    for backend in ("ode", "phi_inversion"):
        cfg = FlowConfig(backend=backend)
        for t in GRID:
            for lam in GRID:
                got = u_flow(FELLER, t, lam, cfg).value
                assert got == pytest.approx(lam / (1.0 + lam * t), rel=1e-8)
                got = u_flow(SM, t, lam, cfg).value
                assert got == pytest.approx((math.sqrt(lam) + 0.5 * t) ** 2, rel=1e-8)
    assert time.perf_counter() - start < 1.0


def test_criterion_02_semigroup_and_flow_time_identities():
    start = time.perf_counter()
    for mech in CONTINUOUS:
        phi = phi_explosive if classify(mech).almost_sure_explosion else phi_extinction
        for t, s in ((0.5, 0.7), (1.0, 2.0)):
            for lam in (0.5, 2.0):
                inner = u_flow(mech, s, lam).value
                nested = u_flow(mech, t, inner).value
                direct = u_flow(mech, t + s, lam).value
                assert nested == pytest.approx(direct, rel=1e-8)
                shifted = phi(mech, u_flow(mech, t, lam).value)
                assert shifted == pytest.approx(t + phi(mech, lam), rel=1e-8)
    assert time.perf_counter() - start < 10.0


def test_criterion_03_qsd_stationarity():
    for mech in EXPLOSIVE:
        for beta in (0.5, 1.0, 3.0):
            for t in (0.5, 1.0, 2.0):
                for lam in (0.5, 1.0, 2.0):
                    shifted = phi_explosive(mech, u_flow(mech, t, lam).value) - t
                    lhs = math.exp(-beta * shifted)
                    rhs = math.exp(-beta * phi_explosive(mech, lam))
                    assert abs(lhs - rhs) <= 1e-8


def test_criterion_04_conditional_limit_convergence():
    for lam in (0.5, 1.0, 2.0):
        limit = limit_thm1i(TP, 1.0, lam)
        gaps = [
            abs(conditional_laplace_explosive(TP, 1.0, t, lam) - limit)
            for t in (1.0, 2.0, 5.0, 10.0, 20.0)
        ]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] <= 1e-3


def test_criterion_05_conditional_transform_vanishes():
    assert conditional_laplace_explosive(SM, 1.0, 1e3, 1.0) <= 1e-6


def test_criterion_06_scaled_entrance_limit():
    for mech in (SM, LSM):
        for lam in (0.5, 1.0, 2.0):
            logs = [thm3_scaled_gap_log10(mech, 1.0, t, lam) for t in (1e2, 1e3, 1e4)]
            assert all(a > b for a, b in zip(logs, logs[1:]))
            assert thm3_scaled_gap(mech, 1.0, 1e4, lam) <= 1e-2
    assert abs(thm3_f_ratio(SM, 1e6) - 1.0) <= 1e-3
    assert abs(thm3_f_ratio(LSM, 50.0) - 1.0) <= 1e-3


def test_criterion_07_extinction_side_limit():
    for mech, alpha in ((SP, 0.5), (FELLER, 1.0)):
        for lam in (0.5, 1.0, 2.0):
            v = v_of_t(mech, 1e4)
            u = u_flow(mech, 1e4, lam * v).value
            pre = (math.expm1(-u) - math.expm1(-v)) / (-math.expm1(-v))
            assert abs(pre - limit_prop4(alpha, lam)) <= 1e-2
    for lam in (0.25, 0.5, 1.0, 2.0, 8.0):
        assert abs(limit_prop4(1.0, lam) - 1.0 / (1.0 + lam)) <= 1e-12


def test_criterion_08_short_time_drift():
    for mech, t in ((SM, 0.05), (LSM, 0.05), (TP, 1.0)):
        lam = 1e8
        assert abs(u_flow(mech, t, lam).value / lam - drift_dt(mech, t)) <= 1e-5
        prod = drift_dt(mech, 0.7) * drift_dt(mech, 1.3)
        assert drift_dt(mech, 2.0) == pytest.approx(prod, rel=1e-14)


def test_criterion_09_phi_small_argument_asymptotics():
    u = 1e-6
    ratio_sm = phi_explosive(SM, u) * (-0.5 * psi_eval(SM, u)) / u
    assert abs(ratio_sm - 1.0) <= 1e-12
    ratio_lsm = phi_explosive(LSM, u) * (-0.5 * psi_eval(LSM, u)) / u
    assert abs(ratio_lsm - 1.0) <= 1e-3


def test_criterion_10_discrete_qsd():
    q = dsbp_qsd_pmf(SIB, n=1, K=256)
    coeffs = SIB.xi.coefficients(256)
    for k in range(21):
        assert abs(q.pmf[k] - coeffs[k]) <= 1e-10
    beta0 = dsbp_classify(SIB).beta0
    with pytest.raises(NoQsdError, match="no QSD"):
        dsbp_qsd_pmf(SIB, beta=1.5 * beta0, K=256)
    for r in (0.1, 0.3, 0.5, 0.7, 0.9):
        conditional = dsbp_F(SIB, 30.0, r) / dsbp_F(SIB, 30.0, 1.0)
        assert abs(conditional - SIB.xi.pgf(r)) <= 1e-4


def test_criterion_11_monte_carlo_suite():
    # the compiled kernels must be active or the runtime budget is meaningless
    assert kernel_backend() == "cython"
    start = time.perf_counter()
    report = run_suites(
        ["mc-acceptance", "mc-feller", "mc-yaglom", "mc-thm1i", "mc-thm2", "mc-thm5"],
        seed=7,
        threads=4,
    )
    elapsed = time.perf_counter() - start
    assert report["passed"] is True
    for suite in report["suites"]:
        assert suite["passed"] is True, suite["suite"]
    assert elapsed <= 900.0


def test_criterion_12_verify_determinism(tmp_path):
    a = tmp_path / "report_a.json"
    b = tmp_path / "report_b.json"
    base = ["verify", "--suite", "all", "--seed", "7"]
    assert cli_main(base + ["--threads", "4", "--out", str(a)]) == 0
    assert cli_main(base + ["--threads", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
