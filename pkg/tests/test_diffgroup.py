import numpy as np
import pytest

from conewalk.diffgroup import (Diffeo, act_1d, act_2d, exponential_family, image_knots, log_mu_density,
                                log_radon_nikodym, log_rn_discrete, mu_log_density_ratio, power_family, sine_family)
from conewalk.errors import DerivativeUnavailable, NonMonotone
from conewalk.grid_paths import Path1D, Path2D, PositivePath, TimeGrid


def grid(N=512, T=1.0):
    return TimeGrid(0.0, T, N)


def smooth(g):
    t = g.nodes / g.T
    return Path1D(g, 1 + 0.5 * np.sin(3 * t) + t * t)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_exponential_schwarzian_is_constant(a):
    phi = Diffeo.named(grid(T=2.0), "exponential", {"a": a})
    assert np.allclose(phi.schwarzian_nodes(), -a * a / 8)
    assert phi.schwarzian(1.0) == pytest.approx(-a * a / 8)


def test_fd_schwarzian_close_to_analytic_in_interior():
    g = grid(2048)
    an = Diffeo.named(g, "sine", {"eps": 0.4})
    fd = Diffeo.named(g, "sine", {"eps": 0.4}, mode="fd")
    s_an, s_fd = an.schwarzian_nodes(), fd.schwarzian_nodes()
    assert np.max(np.abs(s_an - s_fd)[3:-3]) < 1e-3
    with pytest.raises(DerivativeUnavailable):
        fd.schwarzian(0.0)
    assert fd.schwarzian(0.5) == pytest.approx(an.schwarzian(0.5), abs=1e-4)


def test_inverse_tables_are_consistent():
    g = grid()
    phi = Diffeo.named(g, "exponential", {"a": 1.3})
    assert np.allclose(phi(phi.inv_values), g.nodes, atol=1e-13)
    inv = phi.inverse()
    assert inv.family.name == "log"
    assert np.allclose(inv.values, phi.inv_values)
    assert np.allclose(phi.compose(inv).values, g.nodes, atol=1e-12)


def test_power_inversion_by_tables():
    g = grid(1024)
    phi = Diffeo.from_values(g, g.nodes**2)
    assert np.max(np.abs(phi.inv_values - np.sqrt(g.nodes))) < 2e-2
    assert np.max(np.abs(phi.inv_values[10:] - np.sqrt(g.nodes[10:]))) < 1e-5


def test_schwarzian_cocycle_of_composition():
    g = grid(256)
    f = Diffeo.named(g, "sine", {"eps": 0.3, "k": 2})
    h = Diffeo.named(g, "exponential", {"a": 0.8})
    lhs = f.compose(h).schwarzian_nodes()
    x = h.values
    fam = f.family
    sf = fam.d3f(x) / fam.df(x) - 1.5 * (fam.d2f(x) / fam.df(x)) ** 2
    rhs = sf * h.derivatives()[0] ** 2 + h.schwarzian_nodes()
    assert np.allclose(lhs, rhs)


def test_validation_errors():
    g = grid(8)
    with pytest.raises(NonMonotone):
        Diffeo.from_values(g, g.nodes[::-1])
    with pytest.raises(NonMonotone):
        Diffeo.from_values(g, g.nodes + 0.1)
    with pytest.raises(ValueError):
        Diffeo.named(g, "nope")
    with pytest.raises(NonMonotone):
        Diffeo.from_family(g, power_family(2.0)).derivatives()
    with pytest.raises(ValueError):
        sine_family(1.5)


def test_action_of_identity_and_group_law():
    g = grid(400)
    xi = smooth(g)
    assert np.allclose(act_1d(Diffeo.identity(g), xi).values, xi.values)
    a = Diffeo.named(g, "exponential", {"a": 0.7})
    b = Diffeo.named(g, "sine", {"eps": 0.2})
    two_step = act_1d(a, act_1d(b, xi)).values
    direct = act_1d(a.compose(b), xi).values
    assert np.max(np.abs(two_step - direct)) < 1e-4


def test_action_on_power_law_with_guard():
    g = grid(400)
    phi = Diffeo.from_family(g, power_family(0.5))  # phi^-1 = tau^2
    xi = PositivePath(g, np.ones(g.N + 1))
    out = act_1d(phi, xi, guard_endpoints=True).values
    assert np.allclose(out[1:], 1 / np.sqrt(2 * g.nodes[1:]))
    with pytest.raises(NonMonotone):
        act_1d(phi, xi)


def test_action_on_circle_keeps_angles():
    g = grid(400)
    th = 2 * np.pi * g.nodes
    p = Path2D(g, np.column_stack([np.cos(th), np.sin(th)]))
    phi = Diffeo.named(g, "exponential", {"a": 1.0})
    q = act_2d(phi, p).values
    ang = np.unwrap(np.arctan2(q[:, 1], q[:, 0]))
    assert np.allclose(ang, np.interp(phi.inv_values, g.nodes, th), atol=1e-12)


@pytest.mark.parametrize("family,params", [("exponential", {"a": 1.0}), ("sine", {"eps": 0.3})])
def test_discrete_density_ratio_converges(family, params):
    errs = []
    for N in (512, 4096):
        g = grid(N)
        phi = Diffeo.named(g, family, params)
        xi = smooth(g)
        errs.append(abs(log_rn_discrete(phi, xi.values) - log_radon_nikodym(phi, xi)))
    assert errs[1] < 2e-5 and errs[1] < errs[0] / 4


def test_discrete_ratio_is_batched_and_fd_agrees():
    g = grid(1024)
    phi = Diffeo.named(g, "exponential", {"a": 1.0})
    xi = smooth(g)
    batch = np.stack([xi.values, 2 * xi.values])
    out = log_rn_discrete(phi, batch)
    assert out.shape == (2,)
    assert out[0] == pytest.approx(log_rn_discrete(phi, xi.values))
    fd = Diffeo.named(g, "exponential", {"a": 1.0}, mode="fd")
    assert log_radon_nikodym(fd, xi) == pytest.approx(log_radon_nikodym(phi, xi), abs=1e-4)
    t, y = image_knots(phi, xi.values)
    assert np.allclose(t, phi.values) and y[0] == pytest.approx(xi.values[0] * np.sqrt(1 / np.expm1(1.0)))


def test_mu_density():
    g = grid(256)
    ident = Diffeo.identity(g)
    assert log_mu_density(ident, 1.0) == 0.0
    phi = Diffeo.named(g, "exponential", {"a": 1.0})
    expected = -0.5 * np.log(np.e / np.expm1(1.0) ** 2) + (1 - 1) / 1.0 - 0.5
    assert log_mu_density(phi, 1.0) == pytest.approx(expected, abs=1e-12)
    assert mu_log_density_ratio(phi, ident, 1.0) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        mu_log_density_ratio(phi, Diffeo.identity(grid(128)), 1.0)


def test_manifest_names_family():
    m = Diffeo.named(grid(16), "exponential", {"a": 2.0}).manifest()
    assert m["family"] == "exponential" and m["params"]["a"] == 2.0
    assert exponential_family(0.0).name == "identity"


def test_density_factor_cocycle():
    g = grid(4096)
    p1 = Diffeo.named(g, "exponential", {"a": 1.0})
    p2 = Diffeo.named(g, "sine", {"eps": 0.3})
    xi = smooth(g)
    for a, b in ((p1, p2), (p2, p1)):
        lhs = log_radon_nikodym(a.compose(b), xi)
        rhs = log_radon_nikodym(a, act_1d(b, xi)) + log_radon_nikodym(b, xi)
        assert abs(np.expm1(lhs - rhs)) < 1e-2


def test_density_factor_trivial_cases():
    g = grid(256)
    xi = smooth(g)
    assert log_radon_nikodym(Diffeo.identity(g), xi) == 0.0
    phi = Diffeo.named(g, "sine", {"eps": 0.3, "k": 2})
    zero = Path1D(g, np.zeros(g.N + 1))
    d1 = phi.derivatives()[0]
    assert np.exp(log_radon_nikodym(phi, zero)) == pytest.approx((d1[0] * d1[-1]) ** 0.25)


def test_fd_schwarzian_second_order():
    errs = []
    for N in (256, 512, 1024, 2048):
        g = grid(N)
        a = Diffeo.named(g, "sine", {"eps": 0.4})
        f = Diffeo.named(g, "sine", {"eps": 0.4}, mode="fd")
        errs.append(abs(a.schwarzian(0.5) - f.schwarzian(0.5)))
    order = -np.polyfit(np.log([256, 512, 1024, 2048]), np.log(errs), 1)[0]
    assert order >= 1.9


def test_mu_ratio_affine_in_inverse_variance():
    g = grid(256)
    a, b = Diffeo.named(g, "exponential", {"a": 1.0}), Diffeo.named(g, "sine", {"eps": 0.2})
    vals = [mu_log_density_ratio(a, b, s) for s in (0.5, 1.0, 2.0)]
    x = [4.0, 1.0, 0.25]
    slope = (vals[0] - vals[1]) / (x[0] - x[1])
    assert vals[2] == pytest.approx(vals[1] + slope * (x[2] - x[1]), abs=1e-12)
    assert mu_log_density_ratio(b, a, 1.0) == pytest.approx(-vals[1])
