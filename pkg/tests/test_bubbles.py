"""Concentrating-profile quantities against closed-form antiderivatives."""

import numpy as np
import pytest
import sympy

from todalab.bubbles import (
    BubbleParams,
    QUANTITY_KEYS,
    asymptotic_slope_table,
    bubble_quantities,
    fit_slopes,
    liouville_derivative,
    liouville_mass,
    liouville_pde_residual,
    liouville_value,
    standard_bubble,
)
from todalab.functional import energy_u
from todalab.grid import GridSpec


# Closed-form values of the tracked quantities, worked out by hand from
# the antiderivatives of the radial integrands.  With a = scale^2 pi and
# d = flat_radius:
#   (u1')^2 2 pi r  integrates to  16 pi [log(1+a d^2) + 1/(1+a d^2) - 1]
#   u1 2 pi r       integrates to  2 log(scale) pi d^2
#                                  - (2 pi / a)[(1+a d^2) log(1+a d^2) - a d^2]
#   e^{u1} 2 pi r   integrates to  a d^2 / (1 + a d^2)
#   e^{u2} 2 pi r   integrates to  (pi / scale)(d^2 + a d^4 / 2)
# plus, for the last three, the constant outside value times 1 - pi d^2.


def exact_grad1_sq(scale, d):
    a = scale**2 * np.pi
    s = a * d**2
    return 16.0 * np.pi * (np.log1p(s) + 1.0 / (1.0 + s) - 1.0)


def exact_int_u1(scale, d):
    a = scale**2 * np.pi
    s = a * d**2
    inside = 2.0 * np.log(scale) * np.pi * d**2
    inside -= (2.0 * np.pi / a) * ((1.0 + s) * np.log1p(s) - s)
    edge = 2.0 * np.log(scale) - 2.0 * np.log1p(s)
    return inside + edge * (1.0 - np.pi * d**2)


def exact_mass_u1(scale, d):
    a = scale**2 * np.pi
    s = a * d**2
    return s / (1.0 + s) + scale**2 / (1.0 + s) ** 2 * (1.0 - np.pi * d**2)


def exact_mass_u2(scale, d):
    a = scale**2 * np.pi
    s = a * d**2
    inside = (np.pi / scale) * (d**2 + a * d**4 / 2.0)
    return inside + (1.0 + s) / scale * (1.0 - np.pi * d**2)


def exact_quantities(scale, m, d=0.25):
    g11 = exact_grad1_sq(scale, d)
    i1 = exact_int_u1(scale, d)
    lm1 = np.log(exact_mass_u1(scale, d))
    lm2 = np.log(exact_mass_u2(scale, d))
    # quadratic part collapses to g11 / 4 for the (u1, -u1/2) pair
    energy = g11 / 4.0 + m[0] * i1 - 0.5 * m[1] * i1 - m[0] * lm1 - m[1] * lm2
    return {
        "grad1_sq": g11,
        "grad2_sq": g11 / 4.0,
        "grad_cross": -g11 / 2.0,
        "int_u1": i1,
        "int_u2": -0.5 * i1,
        "log_mass_u1": lm1,
        "log_mass_u2": lm2,
        "energy": energy,
    }


def test_params_validation():
    with pytest.raises(ValueError):
        BubbleParams(scale=-1.0)
    with pytest.raises(ValueError):
        BubbleParams(scale=1.0)
    with pytest.raises(ValueError):
        BubbleParams(scale=4.0, flat_radius=0.7)
    with pytest.raises(ValueError):
        BubbleParams(scale=np.inf)


def test_sampled_profile_values():
    spec = GridSpec(64)
    params = BubbleParams(scale=4.0)
    u = standard_bubble(params, spec)
    vals = u.components[0].values
    center_idx = 32  # x = 0.5 exactly on this grid
    assert vals[center_idx, center_idx] == pytest.approx(2.0 * np.log(4.0))
    # far corner sits beyond the truncation radius, so the profile is flat
    a = 16.0 * np.pi
    edge = 2.0 * np.log(4.0) - 2.0 * np.log1p(a * 0.25**2)
    assert vals[0, 0] == pytest.approx(edge)
    np.testing.assert_allclose(
        u.components[1].values, -0.5 * vals, rtol=0, atol=1e-15
    )


def test_resolution_guard():
    spec = GridSpec(16)
    params = BubbleParams(scale=64.0)
    with pytest.raises(ValueError, match="too coarse"):
        standard_bubble(params, spec)
    u = standard_bubble(params, spec, allow_unresolved=True)
    assert np.isfinite(u.components[0].values).all()


def test_quantities_match_closed_forms():
    m = (3.0 * np.pi, 2.0 * np.pi)
    for scale in (3.0, 10.0, 40.0):
        got = bubble_quantities(scale, m)
        want = exact_quantities(scale, m)
        for key in QUANTITY_KEYS:
            assert got[key] == pytest.approx(want[key], rel=1e-9), key


def test_quantities_other_truncation_radius():
    m = (np.pi, np.pi)
    got = bubble_quantities(12.0, m, flat_radius=0.1)
    want = exact_quantities(12.0, m, d=0.1)
    for key in QUANTITY_KEYS:
        assert got[key] == pytest.approx(want[key], rel=1e-9), key


def test_quantities_validate_couplings():
    with pytest.raises(ValueError):
        bubble_quantities(4.0, (np.pi,))
    with pytest.raises(ValueError):
        bubble_quantities(4.0, (np.pi, -1.0))


def test_grid_energy_agrees_with_quadrature():
    m = (3.0 * np.pi, 3.0 * np.pi)
    spec = GridSpec(256)
    params = BubbleParams(scale=8.0)
    u = standard_bubble(params, spec)
    grid_energy = energy_u(u, m).total
    quad_energy = bubble_quantities(8.0, m)["energy"]
    assert grid_energy == pytest.approx(quad_energy, rel=1e-2, abs=0.05)


def test_fitted_slopes_match_asymptotic_table():
    m = (3.0 * np.pi, np.pi)
    scales = [np.e**2, np.e**3, np.e**4, np.e**5]
    report = fit_slopes(scales, m)
    table = asymptotic_slope_table(m)
    for key, expected in table.items():
        got = report.fits[key].slope
        if expected == 0.0:
            assert abs(got) < 0.05, key
        else:
            assert got == pytest.approx(expected, rel=0.02), key
    # the smallest scale is pre-asymptotic at this span and gets dropped
    assert report.used_scales == tuple(scales[1:])


def test_fit_keeps_all_scales_when_already_asymptotic():
    m = (3.0 * np.pi, np.pi)
    scales = [np.e**4, np.e**5, np.e**6, np.e**7]
    report = fit_slopes(scales, m)
    assert report.used_scales == tuple(scales)
    assert report.fits["energy"].slope == pytest.approx(2.0 * np.pi, rel=0.02)


def test_energy_slope_flips_sign_at_threshold():
    scales = [np.e**2, np.e**3, np.e**4, np.e**5]
    below = fit_slopes(scales, (3.0 * np.pi, np.pi)).fits["energy"].slope
    above = fit_slopes(scales, (5.0 * np.pi, np.pi)).fits["energy"].slope
    assert below > 0
    assert above < 0


def test_fit_discards_preasymptotic_scale():
    m = (3.0 * np.pi, np.pi)
    scales = [2.0, np.e**2, np.e**3, np.e**4, np.e**5]
    report = fit_slopes(scales, m)
    assert report.used_scales == tuple(sorted(scales)[1:])
    assert report.fits["grad1_sq"].slope == pytest.approx(32.0 * np.pi, rel=0.02)
    assert report.fits["energy"].slope == pytest.approx(2.0 * np.pi, rel=0.02)


def test_fit_slopes_validation():
    m = (np.pi, np.pi)
    with pytest.raises(ValueError, match="four scales"):
        fit_slopes([4.0, 8.0, 16.0], m)
    with pytest.raises(ValueError, match="factor"):
        fit_slopes([4.0, 5.0, 6.0, 7.0], m)


def test_liouville_pde_residual_vanishes():
    r = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 61)])
    assert np.max(liouville_pde_residual(r)) < 1e-12


def test_liouville_derivatives_against_sympy():
    rs = sympy.symbols("r", positive=True)
    phi = -2 * sympy.log(1 + sympy.pi * rs**2)
    dphi = sympy.lambdify(rs, sympy.diff(phi, rs), "numpy")
    r = np.geomspace(0.01, 50.0, 40)
    np.testing.assert_allclose(liouville_derivative(r), dphi(r), rtol=1e-12)
    lap = sympy.diff(phi, rs, 2) + sympy.diff(phi, rs) / rs
    defect = sympy.simplify(-lap - 8 * sympy.pi * sympy.exp(phi))
    assert defect == 0


def test_liouville_mass_is_one():
    assert liouville_mass() == pytest.approx(1.0, abs=1e-6)
    # truncated mass has the closed form 1 - 1/(1 + pi R^2)
    assert liouville_mass(2.0) == pytest.approx(1.0 - 1.0 / (1.0 + 4.0 * np.pi), rel=1e-9)


def test_family_energy_trend_across_threshold():
    def energies(m, exponents):
        return [bubble_quantities(np.e**x, m)["energy"] for x in exponents]

    sup = energies((5.0 * np.pi, 3.0 * np.pi), (2, 3, 4, 5))
    assert all(b < a for a, b in zip(sup, sup[1:]))
    # mildly supercritical: decrease sets in once past the transient range
    mild = energies((4.5 * np.pi, 3.0 * np.pi), (3, 4, 5))
    assert all(b < a for a, b in zip(mild, mild[1:]))
    sub = energies((3.0 * np.pi, 3.0 * np.pi), (2, 3, 4, 5))
    assert all(b > a for a, b in zip(sub, sub[1:]))
