import numpy as np
import pytest

from nonradial.applications import (MetricSpec, christoffel,
                                    divergence_form_residual, euclidean_metric,
                                    harmonic_coordinates_system,
                                    harmonic_map_system, inverse_metric,
                                    mean_curvature_system, metric_from_entries,
                                    preset_by_name, preset_catalog)
from nonradial.expr import Const, zero_env
from nonradial.fields import GridField
from nonradial.grid import BallDomain, build_grid


def _ev(ast, **env):
    return float(ast.eval(env))


# ---------------------------------------------------------------------------
# metrics, inverses, Christoffel symbols


def test_metric_from_entries_validation():
    with pytest.raises(ValueError):
        metric_from_entries(2, {"h11": "1"})
    with pytest.raises(ValueError):
        metric_from_entries(2, {"g13": "1"})
    with pytest.raises(ValueError):
        metric_from_entries(2, {"g11": "-1"})      # not SPD at 0
    with pytest.raises(ValueError):
        MetricSpec(2, [[Const(1.0)]])              # bad shape


def test_inverse_metric_2d():
    m = metric_from_entries(2, {"g11": "1 + x1^2"})
    ginv, det = inverse_metric(m)
    assert _ev(det, x1=1.0, x2=0.0) == pytest.approx(2.0)
    assert _ev(ginv[0][0], x1=1.0, x2=0.0) == pytest.approx(0.5)
    assert _ev(ginv[1][1], x1=1.0, x2=0.0) == pytest.approx(1.0)
    assert _ev(ginv[0][1], x1=1.0, x2=0.0) == 0.0


def test_inverse_metric_3d_against_numpy():
    m = metric_from_entries(
        3, {"g11": "2", "g12": "x1", "g22": "3", "g33": "1 + x2^2"})
    ginv, _ = inverse_metric(m)
    pt = {"x1": 0.4, "x2": -0.3, "x3": 0.7}
    G = m.eval_at([[0.4, -0.3, 0.7]])[0]
    want = np.linalg.inv(G)
    got = np.array([[_ev(ginv[i][j], **pt) for j in range(3)]
                    for i in range(3)])
    assert np.allclose(got, want, atol=1e-12)


def test_christoffel_euclidean_vanishes():
    gam = christoffel(euclidean_metric(2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                assert _ev(gam[i][j][k], x1=0.3, x2=-0.7) == 0.0


def test_christoffel_polar_like():
    # g = diag(1, x1^2), the polar metric written in (r, theta); degenerate
    # at 0, so the SPD check is opted out.  Gamma^1_22 = -x1, Gamma^2_12 = 1/x1
    m = metric_from_entries(2, {"g22": "x1^2"}, require_spd=False)
    gam = christoffel(m)
    assert _ev(gam[0][1][1], x1=2.0, x2=0.0) == pytest.approx(-2.0)
    assert _ev(gam[1][0][1], x1=2.0, x2=0.0) == pytest.approx(0.5)
    assert _ev(gam[0][0][0], x1=2.0, x2=0.0) == 0.0


def test_christoffel_conformal():
    # g = exp(2 x1) delta: Gamma^i_jk = d_ij phi_k + d_ik phi_j - d_jk phi_i
    # with phi = x1, so Gamma^1_11 = 1, Gamma^1_22 = -1, Gamma^2_12 = 1
    m = metric_from_entries(2, {"g11": "exp(2*x1)", "g22": "exp(2*x1)"})
    gam = christoffel(m)
    pt = {"x1": 0.37, "x2": -0.9}
    assert _ev(gam[0][0][0], **pt) == pytest.approx(1.0)
    assert _ev(gam[0][1][1], **pt) == pytest.approx(-1.0)
    assert _ev(gam[1][0][1], **pt) == pytest.approx(1.0)
    assert _ev(gam[1][0][0], **pt) == pytest.approx(0.0, abs=1e-14)


def test_christoffel_symmetry():
    m = metric_from_entries(2, {"g11": "1 + x2^2", "g12": "x1*x2/4"})
    gam = christoffel(m)
    for i in range(2):
        assert gam[i][0][1] is gam[i][1][0]


# ---------------------------------------------------------------------------
# harmonic maps


def test_harmonic_map_flat_is_exactly_zero():
    p = harmonic_map_system(2, euclidean_metric(2, "flat"), np.eye(2))
    assert p.mode == "thm12"
    assert all(isinstance(a, Const) and a.value == 0.0 for a in p.spec.asts)
    assert np.array_equal(p.c1, np.eye(2))


def test_harmonic_map_conformal_components():
    # target g = exp(2 u1) delta gives
    # a^1 = -sum_alpha (q1a^2 - q2a^2),  a^2 = -2 sum_alpha q1a q2a
    m = metric_from_entries(2, {"g11": "exp(2*x1)", "g22": "exp(2*x1)"},
                            "conformal")
    p = harmonic_map_system(2, m, np.eye(2))
    env = zero_env(2, 2)
    q = {"q1_1": 0.3, "q1_2": -0.2, "q2_1": 0.5, "q2_2": 0.1}
    env.update(q)
    env["p1"] = 0.4   # the symbols depend on the map value
    a1 = float(p.spec.asts[0].eval(env))
    a2 = float(p.spec.asts[1].eval(env))
    want1 = -((q["q1_1"] ** 2 - q["q2_1"] ** 2)
              + (q["q1_2"] ** 2 - q["q2_2"] ** 2))
    want2 = -2.0 * (q["q1_1"] * q["q2_1"] + q["q1_2"] * q["q2_2"])
    assert a1 == pytest.approx(want1, rel=1e-12)
    assert a2 == pytest.approx(want2, rel=1e-12)


def test_harmonic_map_rejects_curved_domain():
    curved = metric_from_entries(2, {"g11": "1 + x1^2"})
    with pytest.raises(ValueError):
        harmonic_map_system(2, euclidean_metric(2), np.eye(2),
                            domain_metric=curved)


# ---------------------------------------------------------------------------
# harmonic coordinates


def test_harmonic_coordinates_bump_metric():
    p = harmonic_coordinates_system(
        metric_from_entries(2, {"g11": "1 + x1^2"}, "bump"))
    assert p.mode == "thm12" and p.components == 2
    assert p.transform is None                     # g(0) is already I
    assert np.array_equal(p.c1, np.eye(2))
    # at x = 0 the coefficients (1 - g^ii) and b^j vanish for this metric
    env = zero_env(2, 2)
    for a in p.spec.asts:
        assert float(a.eval(env)) == pytest.approx(0.0, abs=1e-14)
    # away from 0: a^k = (1 - 1/(1+x1^2)) r_k11 - b^1 q_k1 with known b
    env["x1"] = 0.5
    env["r1_11"] = 1.0
    coef = 1.0 - 1.0 / 1.25
    x1 = 0.5
    # b^1 = (1/sqrt(g)) d/dx1 (sqrt(g) g^11), g = 1 + x1^2
    b1 = (1.0 / np.sqrt(1 + x1**2)) * (-x1 / (1 + x1**2) ** 1.5)
    env["q1_1"] = 0.7
    want = coef * 1.0 - b1 * 0.7
    assert float(p.spec.asts[0].eval(env)) == pytest.approx(want, rel=1e-12)


def test_harmonic_coordinates_constant_metric_is_normalized():
    p = harmonic_coordinates_system(
        metric_from_entries(2, {"g11": "4"}, "stretched"))
    assert p.transform is not None
    assert np.allclose(p.transform, np.diag([0.5, 1.0]))
    # the normalized metric is identically I, so the nonlinearity vanishes
    env = zero_env(2, 2)
    env.update({"x1": 0.3, "x2": -0.2, "r1_11": 1.0, "q1_1": 0.5})
    for a in p.spec.asts:
        assert float(a.eval(env)) == pytest.approx(0.0, abs=1e-12)


def test_divergence_form_residual():
    grid = build_grid(BallDomain(2, 1.0), 16)
    u = GridField(grid, (grid.nodes[:, 0] * grid.nodes[:, 1])[:, None])
    assert divergence_form_residual(euclidean_metric(2), u) <= 1e-9
    with pytest.raises(ValueError):
        divergence_form_residual(euclidean_metric(3), u)


# ---------------------------------------------------------------------------
# mean curvature and the preset catalog


def test_mean_curvature_zero_H():
    p = mean_curvature_system("0", 2)
    assert p.mode == "thm11"
    env = zero_env(2, 1)
    assert float(p.spec.asts[0].eval(env)) == 0.0
    # a = (sum q_i q_j r_ij)/(1+|q|^2) + n H (1+|q|^2)^(1/2) with H = 0
    env.update({"q1_1": 0.4, "q1_2": -0.3, "r1_11": 1.0, "r1_12": 2.0,
                "r1_22": -1.0})
    num = (0.4**2 * 1.0 + 2 * 0.4 * (-0.3) * 2.0 + 0.3**2 * (-1.0))
    want = num / (1.0 + 0.25)
    assert float(p.spec.asts[0].eval(env)) == pytest.approx(want, rel=1e-12)


def test_mean_curvature_nonzero_H_flagged():
    p = mean_curvature_system("1/2", 2)
    assert p.expected["a0_nonzero"] == pytest.approx(1.0)
    assert float(p.spec.asts[0].eval(zero_env(2, 1))) == pytest.approx(1.0)


def test_preset_catalog():
    cat = preset_catalog(2)
    names = [p.name.split("[")[0] for p in cat]
    assert len(cat) >= 5
    for want in ("zero", "quadratic", "osserman", "eigenvalue",
                 "critical_exponent", "mean_curvature", "harmonic_map",
                 "harmonic_coordinates"):
        assert want in names


def test_critical_exponent_preset():
    p = preset_by_name("critical_exponent")
    assert p.dim == 3
    # the critical power is (n + 2) / (n - 2) = 5 in dimension 3
    env = zero_env(3, 1)
    env["p1"] = 2.0
    assert float(p.spec.asts[0].eval(env)) == 32.0


def test_preset_by_name():
    assert preset_by_name("quadratic").name == "quadratic"
    assert preset_by_name("harmonic_map").name.startswith("harmonic_map[")
    with pytest.raises(KeyError):
        preset_by_name("no_such_preset")
