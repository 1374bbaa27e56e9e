import numpy as np
import pytest

from conewalk.cone_geometry import (METRIC_FORMS, ConePath, ConePoint, CoverPath, CoverPoint, appendix_b_check,
                                    cone_action, cone_path_to_cover, cone_to_cover, cover_path_to_cone,
                                    cover_to_cone, lorentz, metric_quadratic, polar_action, sheet_of)
from conewalk.errors import OriginHit, OutsideCone, StepTooCoarse
from conewalk.grid_paths import TimeGrid


def test_points_and_isometry_roundtrip():
    p = ConePoint.from_polar(2.0, 0.7)
    assert p.r == pytest.approx(2.0) and p.theta == pytest.approx(0.7)
    q = cone_to_cover(p)
    assert (q.r, q.theta) == pytest.approx((2.0, 0.7))
    back = cover_to_cone(q)
    assert (back.x0, back.x1) == pytest.approx((p.x0, p.x1))
    xp, xm = p.lightcone
    assert xp * xm == pytest.approx(2.0)


@pytest.mark.parametrize("x", [(1.0, 1.0), (1.0, -2.0), (-1.0, 0.0), (np.nan, 0.0)])
def test_outside_cone(x):
    with pytest.raises(OutsideCone):
        ConePoint(*x)


def test_cover_point_sheet_and_origin():
    assert CoverPoint(1.0, 7.0).sheet == 1
    assert CoverPoint(1.0, -0.1).sheet == -1
    assert sheet_of(np.array([0.0, 2 * np.pi, -2 * np.pi])).tolist() == [0, 1, -1]
    with pytest.raises(OriginHit):
        CoverPoint(0.0, 1.0)


def test_lorentz_boost_shifts_rapidity():
    p = lorentz(np.log(2.0), ConePoint(1.0, 0.0))
    assert (p.x0, p.x1) == pytest.approx((1.25, 0.75))
    q = lorentz(8.0, ConePoint.from_polar(1.0, -8.0))
    assert q.theta == pytest.approx(0.0, abs=1e-6) and q.r == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(TypeError):
        lorentz(1.0, (1.0, 0.0))


def test_metric_forms_agree_and_are_invariant():
    rng = np.random.default_rng(1)
    th = rng.uniform(-2, 2, 500)
    r = rng.uniform(0.2, 5, 500)
    x0, x1 = r * np.cosh(th), r * np.sinh(th)
    v0, v1 = rng.standard_normal((2, 500))
    vals = [f(x0, x1, v0, v1) for f in METRIC_FORMS.values()]
    for v in vals[1:]:
        assert np.allclose(v, vals[0], rtol=1e-12)
    assert np.all(vals[0] > 0)
    # radial velocity gives dr^2; boosts are isometries
    p = ConePoint.from_polar(2.0, 0.5)
    assert metric_quadratic(p, (np.cosh(0.5), np.sinh(0.5))) == pytest.approx(1.0)
    g = 0.9
    c, s = np.cosh(g), np.sinh(g)
    v = np.array([0.3, -1.1])
    pb = lorentz(g, p)
    vb = (c * v[0] + s * v[1], s * v[0] + c * v[1])
    assert metric_quadratic(pb, vb, "loglight") == pytest.approx(metric_quadratic(p, v, "cartesian"))
    with pytest.raises(ValueError):
        metric_quadratic(p, v, "polar")


def test_paths_and_actions():
    g = TimeGrid(0.0, 1.0, 2000)
    t = g.nodes
    path = ConePath(g, np.column_stack([np.cosh(t), np.sinh(t)]))
    assert cone_action(path) == pytest.approx(1.0, abs=1e-6)
    cov = cone_path_to_cover(path)
    assert np.allclose(cov.theta, t) and np.all(cov.sheets == 0)
    assert polar_action(cov.r, cov.theta, g.dt) == pytest.approx(cone_action(path), rel=1e-6)
    assert np.allclose(cover_path_to_cone(cov).values, path.values)
    assert cov.planar().values.shape == (2001, 2)
    lhs, rhs, rel = appendix_b_check(ConePath.from_polar(g, 1 + 0.3 * np.sin(3 * t), np.sin(2 * t)))
    assert rel < 1e-5


def test_path_errors():
    g = TimeGrid(0.0, 1.0, 2)
    with pytest.raises(OutsideCone):
        ConePath(g, [[1, 0], [1, 1], [2, 0]])
    with pytest.raises(StepTooCoarse):
        CoverPath(g, [1, 1, 1], [0, 2, 4])
    with pytest.raises(OriginHit):
        CoverPath(g, [1, 0, 1], [0, 0.1, 0.2])
