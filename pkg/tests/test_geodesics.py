import numpy as np
import pytest

from conewalk.cone_geometry import CoverPoint
from conewalk.errors import MeshTooCoarse
from conewalk.geodesics import ORIGIN, chord_points, geodesic_case, geodesic_distance, mesh_distance_oracle


def test_three_cases():
    A = CoverPoint(1.0, 0.0)
    g1 = geodesic_distance(A, CoverPoint(1.0, np.pi / 2))
    assert g1.case == 1 and g1.distance == pytest.approx(np.sqrt(2))
    g2 = geodesic_distance(A, CoverPoint(2.0, 3 * np.pi / 2))
    assert g2.case == 2 and g2.distance == 3.0 and g2.polyline[1] is ORIGIN
    g3 = geodesic_distance(A, CoverPoint(2.0, 7.0))
    assert g3.case == 3 and g3.distance == 3.0
    assert geodesic_case(-np.pi) == 1 and geodesic_case(2 * np.pi) == 3


def test_continuous_at_pi_and_symmetric():
    A = CoverPoint(1.0, 0.2)
    B = CoverPoint(2.5, 0.2 + np.pi)
    B2 = CoverPoint(2.5, 0.2 + np.pi + 1e-9)
    assert geodesic_distance(A, B).distance == pytest.approx(geodesic_distance(A, B2).distance, abs=1e-9)
    assert geodesic_distance(A, B).distance == pytest.approx(geodesic_distance(B, A).distance)


def test_rotation_invariance():
    A, B = CoverPoint(1.2, 0.3), CoverPoint(0.7, 4.0)
    d = geodesic_distance(A, B).distance
    assert geodesic_distance(A.rotated(5.0), B.rotated(5.0)).distance == pytest.approx(d)


def test_json_and_chord():
    doc = geodesic_distance(CoverPoint(1.0, 0.0), CoverPoint(2.0, 7.0)).to_json()
    assert doc["polyline"][1]["origin"] is True and doc["polyline"][2]["sheet"] == 1
    pts = chord_points(CoverPoint(1.0, 0.0), CoverPoint(1.0, 2.0), 11)
    assert pts[-1][0] == pytest.approx(1.0) and pts[-1][1] == pytest.approx(2.0)
    assert min(r for r, _ in pts) == pytest.approx(np.cos(1.0), abs=1e-2)


@pytest.mark.parametrize("B", [(1.0, np.pi / 2), (2.0, 3 * np.pi / 2), (1.5, np.pi), (2.0, 0.0)])
def test_mesh_oracle_bounds_from_above(B):
    A = CoverPoint(1.0, 0.0)
    Bp = CoverPoint(*B)
    exact = geodesic_distance(A, Bp).distance
    m = mesh_distance_oracle(A, Bp, resolution=80, stencil=12)
    assert exact - 1e-12 <= m < exact + 5e-3


def test_mesh_oracle_errors():
    A, B = CoverPoint(1.0, 0.0), CoverPoint(2.0, 1.0)
    with pytest.raises(MeshTooCoarse):
        mesh_distance_oracle(A, B, resolution=2)
    with pytest.raises(MeshTooCoarse):
        mesh_distance_oracle(A, B, r_max=1.5)
    with pytest.raises(MeshTooCoarse):
        mesh_distance_oracle(A, B, theta_range=(0.0, 0.5))
    assert mesh_distance_oracle(A, A) == 0.0
