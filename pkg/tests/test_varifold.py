import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expanderlab.expanders import make_fixture
from expanderlab.monotonicity import verify_theorem13
from expanderlab.varifold import (
    RectifiableVarifold,
    VarifoldError,
    blow_down_pipeline,
    cone_deviation,
    cone_report,
    density_ratio,
    fit_rays,
    flow_scales,
    hypothesis_holds,
    mass_in_ball,
    monotonicity_check,
    rescale,
    sample_synthetic,
    transverse_energy,
    varifold_from_curve,
)

from conftest import expander


def rotation3(a, b):
    ca, sa, cb, sb = math.cos(a), math.sin(a), math.cos(b), math.sin(b)
    rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    rx = np.array([[1, 0, 0], [0, cb, -sb], [0, sb, cb]])
    return rz @ rx


def test_line_varifold_mass():
    c = make_fixture("line_through_origin", n=101, extent=5.0)
    T = varifold_from_curve(c)
    assert T.n == 1 and T.ambient_dim == 2
    assert len(T.weights) == 100
    assert T.mass == pytest.approx(10.0, abs=1e-12)


def test_cone_varifold_is_tangential():
    T = varifold_from_curve(make_fixture("two_ray_cone", n=201))
    assert np.abs(T.transverse_sq()).max() <= 1e-24


def test_circle_varifold_mass():
    T = varifold_from_curve(make_fixture("circle", n=360))
    assert abs(T.mass - 2 * math.pi) <= 1e-4


def test_split_radii_make_ball_masses_exact():
    T = varifold_from_curve(make_fixture("offset_line", n=101, extent=5.0), split_radii=(2.0,))
    assert mass_in_ball(T, 2.0) == pytest.approx(2 * math.sqrt(3), abs=1e-12)


def test_synthetic_masses():
    assert abs(sample_synthetic("plane", radius=2.0).mass - 4 * math.pi) <= 1e-3
    beta = math.pi / 5
    cone = sample_synthetic("cone", beta=beta, extent=1.5)
    assert abs(cone.mass - math.pi * 1.5**2 * math.sin(beta)) <= 1e-3
    assert abs(sample_synthetic("sphere").mass - 4 * math.pi) <= 1e-2


@pytest.mark.parametrize("beta", [0.0, math.pi / 2, 2.0])
def test_cone_half_angle_range(beta):
    with pytest.raises(VarifoldError):
        sample_synthetic("cone", beta=beta)


def test_sampling_is_reproducible():
    a = sample_synthetic("plane", resolution=20, seed=3)
    b = sample_synthetic("plane", resolution=20, seed=3)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_density_ratio_examples():
    cone = varifold_from_curve(make_fixture("two_ray_cone", n=2001, extent=10.0), split_radii=(0.5, 1, 3))
    for t in (0.5, 1.0, 3.0):
        assert density_ratio(cone, t) == pytest.approx(2.0, abs=1e-12)
    plane = sample_synthetic("plane", resolution=100, seed=None)
    for t in (0.5, 1.0, 1.5):
        assert abs(density_ratio(plane, t) - math.pi) <= 2e-2
    sph = sample_synthetic("sphere")
    r15, r2 = density_ratio(sph, 1.5), density_ratio(sph, 2.0)
    assert r15 == pytest.approx(4 * math.pi / 2.25, rel=1e-12)
    assert r2 == pytest.approx(math.pi, rel=1e-12)
    assert r15 > r2


def test_monotonicity_check_examples():
    cone = varifold_from_curve(make_fixture("two_ray_cone", n=2001), split_radii=(1.0, 2.0))
    assert abs(monotonicity_check(cone, 1.0, 2.0)) <= 1e-12
    off = make_fixture("offset_line", n=20001, extent=50.0)
    T = varifold_from_curve(off, split_radii=(1.0, 2.0))
    assert abs(density_ratio(T, 2.0) - density_ratio(T, 1.0) - math.sqrt(3)) <= 1e-9
    assert abs(monotonicity_check(T, 1.0, 2.0)) <= 1e-5
    sph = sample_synthetic("sphere")
    assert monotonicity_check(sph, 1.5, 2.0) < 0
    assert transverse_energy(sph, 1.5, 2.0) == 0.0
    assert hypothesis_holds(sph, 2.0) is False
    with pytest.raises(VarifoldError):
        monotonicity_check(sph, 2.0, 1.0)


def test_varifold_and_curve_slacks_agree():
    off = make_fixture("offset_line", n=20001, extent=50.0)
    grid = [1.0, 1.25, 1.5, 2.0]
    T = varifold_from_curve(off, split_radii=grid)
    rep = verify_theorem13(off, 1.0, grid)
    for row in rep.rows:
        assert abs(monotonicity_check(T, row.R1, row.R2) - row.slack) <= 1e-6


def test_transverse_weight_matches_curve_form():
    # |P_{omega perp} x|^2 / |x|^2 equals the curve's |x^perp|^2 / |x|^2 at edge midpoints
    c = make_fixture("circle", n=50, center=(2.0, 0.5))
    T = varifold_from_curve(c)
    mids = c.edge_starts + 0.5 * c.edges
    t = c.edges / c.edge_lengths[:, None]
    perp = mids - np.einsum("ij,ij->i", mids, t)[:, None] * t
    np.testing.assert_allclose(T.transverse_sq(), np.einsum("ij,ij->i", perp, perp), rtol=1e-12)


def test_cone_deviation_examples():
    assert cone_deviation(varifold_from_curve(make_fixture("two_ray_cone", n=201)), 1.0, 2.0) <= 1e-24
    assert cone_deviation(sample_synthetic("cone"), 0.5, 1.5) <= 1e-10
    base = varifold_from_curve(make_fixture("offset_line", n=20001, extent=50.0))
    devs = [cone_deviation(rescale(base, lam), 1.0, 2.0) for lam in (0.2, 0.1, 0.05)]
    assert all(3.5 < a / b < 4.5 for a, b in zip(devs, devs[1:]))
    with pytest.raises(VarifoldError):
        cone_deviation(base, 100.0, 200.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.5, 1.5))
def test_rescale_pushforward(lam, t):
    # jittered plane atoms, so no atom sits on the sphere |x| = t
    T = sample_synthetic("plane", resolution=20)
    S = rescale(T, lam)
    assert mass_in_ball(S, lam * t) == pytest.approx(lam**T.n * mass_in_ball(T, t), rel=1e-12)
    assert density_ratio(S, lam * t) == pytest.approx(density_ratio(T, t), rel=1e-12)


def test_rescale_identity():
    T = sample_synthetic("plane", resolution=10)
    S = rescale(T, 1.0)
    np.testing.assert_array_equal(S.positions, T.positions)
    np.testing.assert_array_equal(S.weights, T.weights)


def test_report_scale_and_rotation_equivariance():
    T = sample_synthetic("cone", beta=0.6, resolution=60)
    ref = cone_report(T, 0.5, 1.5)
    lam = 3.0
    scaled = cone_report(rescale(T, lam), lam * 0.5, lam * 1.5)
    rotated = cone_report(T.rotate(rotation3(0.7, 1.1)), 0.5, 1.5)
    for rep in (scaled, rotated):
        assert rep.ratio_t == pytest.approx(ref.ratio_t, rel=1e-12)
        assert rep.deviation == pytest.approx(ref.deviation, abs=1e-12)
        assert rep.is_cone == ref.is_cone


def test_fit_rays_on_cone_and_line():
    cone = varifold_from_curve(make_fixture("two_ray_cone", n=401, angle1=0.5, angle2=2.5))
    rays = fit_rays(cone, 1.0, 2.0)
    np.testing.assert_allclose(rays, [0.5, 2.5], atol=1e-12)
    off = varifold_from_curve(make_fixture("offset_line", n=4001, extent=400.0))
    rays = fit_rays(rescale(off, 0.01), 1.0, 2.0)
    assert len(rays) == 2 and abs(rays[0]) < 1e-2 and abs(rays[1] - math.pi) < 1e-2


def test_blow_down_two_ray_cone():
    c = make_fixture("two_ray_cone", n=4001, extent=200.0, angle1=0.3, angle2=2.0)
    res = blow_down_pipeline(c, [2.0**-j for j in range(4)])
    assert np.abs(res.deviations).max() <= 1e-24
    np.testing.assert_allclose(res.limit_rays, [0.3, 2.0], atol=1e-12)


def test_blow_down_offset_line():
    # the fitted ray angle is O(lam b), so go down to lam = 1/128
    c = make_fixture("offset_line", n=60001, extent=300.0)
    res = blow_down_pipeline(c, [2.0**-j for j in range(8)])
    d = res.deviations
    assert np.all(d[1:] < d[:-1])
    assert np.all(np.abs(d[1:] / d[:-1] - 0.25) < 0.05)
    assert len(res.limit_rays) == 2 and abs(res.limit_rays[0]) < 1e-2 and abs(res.limit_rays[1] - math.pi) < 1e-2


def test_blow_down_errors():
    c = make_fixture("offset_line", n=101, extent=5.0)
    with pytest.raises(VarifoldError):
        blow_down_pipeline(c, [1.0, 0.1])
    with pytest.raises(VarifoldError):
        blow_down_pipeline(c, [0.5, 1.0])


def test_expander_blow_down_rays():
    from expanderlab.expanders import asymptotic_angle

    c = expander(1.0, 1.0, 1e-2, 140.0)
    theta, unc = asymptotic_angle(c)
    res = blow_down_pipeline(c, [2.0**-j for j in range(7)])
    np.testing.assert_allclose(res.limit_rays, [theta, math.pi - theta], atol=1e-2 + unc)
    assert all(r.hypothesis_ok for r in res.reports)
    assert all(r.slack >= -1e-6 for r in res.reports)


def test_expander_blow_down_decay_down_to_round_off():
    # deviation decays like exp(-1/lam^2); beyond lam = 1/4 it sits at the double-precision floor
    c = expander(1.0, 1.0, 1e-2, 140.0)
    d = blow_down_pipeline(c, [2.0**-j for j in range(7)]).deviations
    assert d[0] > d[1] > d[2]
    assert d[2] < 1e-8
    assert np.all(d[3:] < 1e-20)


def test_flow_scales():
    assert flow_scales(1.0, [0.5, 2.0]) == pytest.approx([1.0, 2.0])


def test_csv_round_trip():
    T = sample_synthetic("cone", resolution=5)
    S = RectifiableVarifold.from_csv(T.to_csv())
    np.testing.assert_array_equal(S.positions, T.positions)
    np.testing.assert_array_equal(S.frames, T.frames)
    np.testing.assert_array_equal(S.weights, T.weights)


def test_validation():
    with pytest.raises(VarifoldError):
        RectifiableVarifold(np.zeros((2, 2)), np.array([[[1.0, 1.0]], [[1.0, 0.0]]]), np.ones(2))
    with pytest.raises(VarifoldError):
        RectifiableVarifold(np.zeros((1, 2)), np.array([[[1.0, 0.0]]]), np.array([-1.0]))
