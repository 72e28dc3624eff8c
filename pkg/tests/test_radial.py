"""Radial integrator checks against closed-form solutions and identities."""

import io

import numpy as np
import pytest

from todalab.cartan import CartanMatrix, cartan_su
from todalab.radial import (
    BlowUpError,
    asymptotic_slopes,
    ball_pohozaev,
    check_mass_relation,
    flux_residuals,
    integrate_radial,
    masses_and_exponents,
    sweep_shooting,
    write_solution_csv,
)

PI = np.pi
EIGHT_PI = 8.0 * np.pi


# Symmetric ansatz: with u1 = u2 = w the coupled system collapses to
# w'' + w'/r = -e^w (row sums 2 - 1 = 1), whose radial solutions are
# w = log(8 lam^2 / (1 + lam^2 r^2)^2).  Central value 0 forces
# 8 lam^2 = 1.  Substitution: d/dr log(1 + lam^2 r^2) = 2 lam^2 r / (1
# + lam^2 r^2), so Delta w = -8 lam^2 / (1 + lam^2 r^2)^2 = -e^w.
LAM2 = 0.125


def symmetric_exact(r):
    r = np.asarray(r, dtype=float)
    u = np.log(8 * LAM2) - 2 * np.log1p(LAM2 * r * r)
    du = -4 * LAM2 * r / (1 + LAM2 * r * r)
    alpha = EIGHT_PI * LAM2 * r * r / (1 + LAM2 * r * r)
    return u, du, alpha


def test_symmetric_profile_matches_closed_form():
    sol = integrate_radial((0.0, 0.0))
    r = sol.r_nodes[1:]
    u_exact, du_exact, alpha_exact = symmetric_exact(r)
    for j in range(2):
        assert np.max(np.abs(sol.u[j, 1:] - u_exact)) < 1e-7
        assert np.max(np.abs(sol.du[j, 1:] - du_exact)) < 1e-7
        assert np.max(np.abs(sol.alpha[j, 1:] - alpha_exact)) < 1e-7
    # origin row carries the initial data
    assert sol.r_nodes[0] == 0.0
    assert tuple(sol.u[:, 0]) == (0.0, 0.0)
    assert tuple(sol.du[:, 0]) == (0.0, 0.0)


def test_symmetric_masses_reach_eight_pi():
    sol = integrate_radial((0.0, 0.0))
    report = masses_and_exponents(sol)
    for a, b in zip(report.alpha, report.beta):
        assert abs(a - EIGHT_PI) / EIGHT_PI < 1e-4
        assert abs(b - EIGHT_PI) / EIGHT_PI < 1e-4
    assert report.alpha_above_4pi == (True, True)
    assert report.beta_above_4pi == (True, True)


def test_single_component_mass_is_four_pi():
    # with coupling (2): u'' + u'/r = -2 e^u and u(0) = 0 has the
    # closed form u = log(4 mu^2 / (1 + mu^2 r^2)^2) with mu = 1/2,
    # whose total mass integrates to 4 pi
    sol = integrate_radial((0.0,), cartan=cartan_su(1))
    mu2 = 0.25
    r = sol.r_nodes[1:]
    u_exact = np.log(4 * mu2) - 2 * np.log1p(mu2 * r * r)
    assert np.max(np.abs(sol.u[0, 1:] - u_exact)) < 1e-7
    report = masses_and_exponents(sol)
    assert abs(report.alpha[0] - 4 * PI) / (4 * PI) < 1e-4
    assert report.beta[0] == pytest.approx(2 * report.alpha[0])


def test_flux_identity_holds_at_every_node():
    sol = integrate_radial((0.0, -1.0))
    assert float(flux_residuals(sol).max()) < 1e-6


def test_running_masses_never_decrease():
    sol = integrate_radial((0.5, -1.5))
    assert np.all(np.diff(sol.alpha, axis=1) > -1e-12)


def test_asymptotic_slope_matches_flux_prediction():
    sol = integrate_radial((0.0, 0.0))
    checks = asymptotic_slopes(sol)
    for check in checks:
        # closed form: r u' = -4 lam^2 r^2 / (1 + lam^2 r^2) -> -4
        assert abs(check.measured + 4.0) < 1e-3
        assert check.rel_dev < 1e-8


def test_ball_identity_against_closed_form():
    sol = integrate_radial((0.0, 0.0))
    for R in (1.0, 10.0, 100.0):
        balance = ball_pohozaev(sol, R)
        # both sides evaluate to -96 pi lam^4 R^4 / (1 + lam^2 R^2)^2
        # on the symmetric solution (substitute and simplify)
        exact = -96 * PI * LAM2**2 * R**4 / (1 + LAM2 * R * R) ** 2
        assert balance.lhs == pytest.approx(exact, rel=1e-8)
        assert balance.rhs == pytest.approx(exact, rel=1e-8)
        assert abs(balance.residual) / abs(balance.lhs) < 1e-5


def test_ball_identity_vanishes_at_tiny_radius():
    sol = integrate_radial((0.0, 0.0))
    balance = ball_pohozaev(sol, 1e-3)
    assert abs(balance.lhs) < 1e-8
    assert abs(balance.rhs) < 1e-8
    assert abs(balance.residual) < 1e-8


def test_ball_identity_input_validation():
    sol = integrate_radial((0.0, 0.0))
    with pytest.raises(ValueError, match="out of range"):
        ball_pohozaev(sol, 0.0)
    with pytest.raises(ValueError, match="out of range"):
        ball_pohozaev(sol, 2000.0)
    single = integrate_radial((0.0,), cartan=cartan_su(1))
    with pytest.raises(ValueError, match="two components"):
        ball_pohozaev(single, 1.0)


def test_mass_relation_closed_cases():
    zero = check_mass_relation(EIGHT_PI, EIGHT_PI)
    assert zero.residual == 0.0
    assert zero.relative == 0.0
    off = check_mass_relation(4 * PI, 4 * PI)
    # 16 pi^2 + 16 pi^2 - 16 pi^2 - 32 pi^2
    assert off.residual == pytest.approx(-16 * PI * PI, rel=1e-12)
    assert off.relative == pytest.approx(-0.5, rel=1e-12)
    with pytest.raises(ValueError, match="positive"):
        check_mass_relation(0.0, 1.0)


def test_mass_report_rejects_unsettled_tail():
    sol = integrate_radial((0.0, 0.0), r_max=10.0)
    with pytest.raises(ValueError, match="larger r_max"):
        masses_and_exponents(sol)


def test_scaling_covariance():
    # u(x) -> u(sx) + 2 log s maps solutions to solutions and preserves
    # the mass inside the correspondingly shrunk ball exactly
    s = 2.0
    base = integrate_radial((0.3, -0.7), r_max=1000.0)
    scaled = integrate_radial(
        (0.3 + 2 * np.log(s), -0.7 + 2 * np.log(s)), r_max=1000.0 / s
    )
    for j in range(2):
        assert abs(base.alpha[j, -1] - scaled.alpha[j, -1]) < 1e-4


def test_blow_up_guard_reports_radius():
    # an anti-damped single component u'' + u'/r = +2 e^u has no global
    # solution; the guard must stop the run and report where
    bad = CartanMatrix(1, np.array([[-2.0]]), np.array([[-0.5]]))
    with pytest.raises(BlowUpError) as excinfo:
        integrate_radial((0.0,), cartan=bad)
    assert 1e-4 < excinfo.value.radius < 1000.0


def test_shooting_family_masses_satisfy_relation():
    rows = sweep_shooting(np.linspace(-2.0, 0.5, 6))
    converged = [row for row in rows if row.outcome == "converged"]
    assert len(converged) >= 5
    for row in converged:
        assert row.relation_rel < 1e-3
        assert all(a > 4 * PI for a in row.alpha)
        assert all(b > 4 * PI for b in row.beta)
    # unsettled tails are reported, not raised
    assert all(row.outcome in ("converged", "tail", "blow-up") for row in rows)


def test_integrate_validations():
    with pytest.raises(ValueError, match="at least 10"):
        integrate_radial((0.0, 0.0), r_max=5.0)
    with pytest.raises(ValueError, match="tol"):
        integrate_radial((0.0, 0.0), tol=1e-5)
    with pytest.raises(ValueError, match="tol"):
        integrate_radial((0.0, 0.0), tol=1e-13)
    with pytest.raises(ValueError, match="finite"):
        integrate_radial((np.nan, 0.0))
    with pytest.raises(ValueError, match="rank"):
        integrate_radial((0.0, 0.0), cartan=cartan_su(3))
    with pytest.raises(ValueError, match="nodes"):
        integrate_radial((0.0, 0.0), nodes=8)


def test_solution_csv_layout():
    sol = integrate_radial((0.0, 0.0), nodes=32)
    buf = io.StringIO()
    write_solution_csv(sol, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "r,u1,u2,du1,du2,alpha1,alpha2"
    assert len(lines) == 1 + 33  # origin row plus the log-spaced nodes
    first = [float(x) for x in lines[1].split(",")]
    assert first == [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    last = [float(x) for x in lines[-1].split(",")]
    assert last[0] == pytest.approx(1000.0)
