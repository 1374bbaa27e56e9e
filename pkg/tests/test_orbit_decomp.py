import numpy as np
import pytest

from conewalk.cone_geometry import ConePath
from conewalk.diffgroup import Diffeo, act_1d, act_2d, act_cone
from conewalk.errors import BadSplitPoint, NonPositivePath
from conewalk.grid_paths import Path1D, Path2D, PositivePath, TimeGrid
from conewalk.orbit_decomp import (DecompCone, decompose_1d, decompose_2d, decompose_cone, join_1d, join_2d, join_cone,
                                   joined_rho, max_decomp_deviation, reconstruct_1d, reconstruct_2d,
                                   reconstruct_cone, split_1d, split_2d, split_cone)


def grid(N=512):
    return TimeGrid(0.0, 1.0, N)


def wiggly_planar(g, turns=2.3):
    t = g.nodes
    r = 1.5 + 0.4 * np.sin(7 * t)
    th = 0.4 + 2 * np.pi * turns * t + 0.3 * np.cos(5 * t)
    return Path2D(g, np.column_stack([r * np.cos(th), r * np.sin(th)]))


def wiggly_cone(g):
    t = g.nodes
    return ConePath.from_polar(g, 2 + np.sin(4 * t), 1.5 * np.sin(6 * t) - 0.3)


def test_exponential_radius():
    g = grid(2048)
    c = decompose_1d(PositivePath(g, np.exp(g.nodes)))
    # 1/rho^2 = int e^{-2t} dt
    assert 1 / c.rho**2 == pytest.approx(0.5 * (1 - np.exp(-2)), rel=1e-6)
    assert np.allclose(reconstruct_1d(c).values, np.exp(g.nodes), rtol=1e-14)


def test_constant_path_has_identity_phi():
    g = grid(64)
    c = decompose_1d(Path1D(g, np.full(65, 3.0)))
    assert c.rho == pytest.approx(3.0)
    assert np.allclose(c.phi.values, g.nodes)


def test_reconstruction_roundtrip_all_geometries():
    g = grid()
    p2 = wiggly_planar(g)
    c2 = decompose_2d(p2)
    assert np.max(np.abs(reconstruct_2d(c2).values - p2.values)) < 1e-12
    pc = wiggly_cone(g)
    cc = decompose_cone(pc)
    assert np.max(np.abs(reconstruct_cone(cc).values - pc.values)) < 1e-12


def test_orbit_coordinates_invariant_under_action():
    g = grid(1024)
    phi = Diffeo.named(g, "sine", {"eps": 0.3})
    xi = PositivePath(g, 1 + 0.5 * np.sin(3 * g.nodes))
    a, b = decompose_1d(xi), decompose_1d(act_1d(phi, xi))
    assert b.rho == pytest.approx(a.rho, rel=1e-5)
    p = wiggly_planar(g)
    a2, b2 = decompose_2d(p), decompose_2d(act_2d(phi, p))
    assert b2.rho == pytest.approx(a2.rho, rel=1e-5)
    assert b2.alpha == pytest.approx(a2.alpha)
    pc = wiggly_cone(g)
    assert decompose_cone(act_cone(phi, pc)).rho == pytest.approx(decompose_cone(pc).rho, rel=1e-5)


def test_planar_alpha_and_psi():
    g = grid()
    c = decompose_2d(wiggly_planar(g))
    assert c.psi_knots[0] == 0.0
    assert c.alpha == pytest.approx(0.4 + 0.3)
    assert c.psi_knots[-1] == pytest.approx(2 * np.pi * 2.3 + 0.3 * (np.cos(5) - 1))
    assert c.psi.values.shape == (g.N + 1,)


def test_nonpositive_rejected():
    g = grid(8)
    with pytest.raises(NonPositivePath):
        decompose_1d(Path1D(g, np.linspace(-1, 1, 9)))


def test_split_join_roundtrip_and_rho_relation():
    g = grid(512)
    u = 0.25
    c = decompose_1d(PositivePath(g, np.exp(np.sin(5 * g.nodes))))
    a, b = split_1d(c, u)
    assert max_decomp_deviation(c, join_1d(a, b, u)) < 1e-13
    assert c.rho == pytest.approx(joined_rho(a.rho, b.rho, u, 0.0, 1.0), rel=1e-14)
    # pieces are the decompositions of the sub-paths
    sub = decompose_1d(PositivePath(g.sub(0, 128), np.exp(np.sin(5 * g.nodes[:129]))))
    assert max_decomp_deviation(sub, a) < 1e-12


def test_planar_split_records_winding():
    g = grid(512)
    c = decompose_2d(wiggly_planar(g, turns=3.0))
    sp = split_2d(c, 0.5)
    total = c.alpha + c.psi_knots[256]
    assert sp.second.alpha == pytest.approx(total % (2 * np.pi))
    assert sp.n == int(np.floor(total / (2 * np.pi)))
    assert max_decomp_deviation(c, join_2d(sp.first, sp.second, 0.5, sp.n)) < 1e-13
    assert max_decomp_deviation(c, join_2d(sp.first, sp.second)) < 1e-13


def test_cone_split_and_continuity_check():
    g = grid(256)
    c = decompose_cone(wiggly_cone(g))
    a, b = split_cone(c, 0.5)
    assert max_decomp_deviation(c, join_cone(a, b, 0.5)) < 1e-13
    jumped = DecompCone(b.rho, b.psi_knots + 0.1, b.phi)
    with pytest.raises(ValueError, match="rapidity jumps"):
        join_cone(a, jumped)


@pytest.mark.parametrize("t", [0.0, 1.0, 1 / 512, 0.3001])
def test_bad_split_points(t):
    c = decompose_1d(PositivePath(grid(512), np.ones(513)))
    with pytest.raises(BadSplitPoint):
        split_1d(c, t)


def test_join_rejects_wrong_tstar():
    c = decompose_1d(PositivePath(grid(64), np.ones(65)))
    a, b = split_1d(c, 0.5)
    with pytest.raises(BadSplitPoint):
        join_1d(a, b, 0.25)
