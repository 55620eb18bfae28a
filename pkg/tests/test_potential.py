import numpy as np
import pytest
from scipy import integrate

from nonradial.fields import GridField, from_function, hoelder_norm
from nonradial.grid import BallDomain, build_grid
from nonradial.potential import (PotentialField, full_cell_gamma_integral,
                                 laplacian_identity_residual, newtonian,
                                 operator_norm_probe, set_threads,
                                 singular_cell_integral)


@pytest.fixture(scope="module")
def grid2():
    return build_grid(BallDomain(2, 1.0), 16)


@pytest.fixture(scope="module")
def grid3():
    return build_grid(BallDomain(3, 1.0), 16)


# ---------------------------------------------------------------------------
# cell integrals against independent quadrature oracles


def test_singular_cell_integral_oracle_2d():
    w = 0.0371
    rho = np.sqrt(w / np.pi)
    oracle, _ = integrate.quad(
        lambda r: np.log(r) / (2.0 * np.pi) * 2.0 * np.pi * r, 0.0, rho)
    assert singular_cell_integral(w, 2) == pytest.approx(oracle, rel=1e-8)


def test_singular_cell_integral_oracle_3d():
    w = 0.0371
    rho = (3.0 * w / (4.0 * np.pi)) ** (1.0 / 3.0)
    oracle, _ = integrate.quad(
        lambda r: -1.0 / (4.0 * np.pi * r) * 4.0 * np.pi * r * r, 0.0, rho)
    assert singular_cell_integral(w, 3) == pytest.approx(oracle, rel=1e-10)


def test_full_cell_gamma_integral_oracle_2d():
    h = 0.2
    # one quadrant puts the singularity at a corner, where adaptive
    # quadrature of the integrable log handles it well
    quadrant, _ = integrate.dblquad(
        lambda y, x: np.log(np.hypot(x, y)) / (2.0 * np.pi),
        0.0, h / 2.0, 0.0, h / 2.0)
    assert full_cell_gamma_integral(h, 2) == pytest.approx(
        4.0 * quadrant, rel=1e-8)


def test_full_cell_gamma_integral_oracle_3d():
    h = 0.2
    octant, _ = integrate.tplquad(
        lambda z, y, x: -1.0 / (4.0 * np.pi * np.sqrt(x * x + y * y + z * z)),
        0.0, h / 2.0, 0.0, h / 2.0, 0.0, h / 2.0)
    assert full_cell_gamma_integral(h, 3) == pytest.approx(
        8.0 * octant, rel=1e-6)


def test_full_cell_gamma_integral_scaling():
    # n=3 value scales like h^2; n=2 picks up the log term
    assert full_cell_gamma_integral(0.4, 3) == pytest.approx(
        4.0 * full_cell_gamma_integral(0.2, 3), rel=1e-14)


# ---------------------------------------------------------------------------
# closed forms of the potential of the constant field


def test_closed_form_constant_2d(grid2):
    pot = newtonian(from_function(grid2, lambda x: 1.0), hessian=False)
    r2 = np.sum(grid2.nodes**2, axis=1)
    exact = r2 / 4.0 + 0.5 * (np.log(1.0) - 0.5)
    err = np.max(np.abs(pot.base.values[:, 0] - exact))
    assert err <= 1e-3 * np.max(np.abs(exact))
    assert pot.hess is None


def test_closed_form_constant_3d(grid3):
    pot = newtonian(from_function(grid3, lambda x: 1.0), hessian=False)
    r2 = np.sum(grid3.nodes**2, axis=1)
    exact = r2 / 6.0 - 0.5
    err = np.max(np.abs(pot.base.values[:, 0] - exact))
    assert err <= 1e-3 * np.max(np.abs(exact))


def test_closed_form_scales_with_radius():
    grid = build_grid(BallDomain(2, 0.5), 16)
    pot = newtonian(from_function(grid, lambda x: 1.0), hessian=False)
    r2 = np.sum(grid.nodes**2, axis=1)
    exact = r2 / 4.0 + 0.125 * (np.log(0.5) - 0.5)
    err = np.max(np.abs(pot.base.values[:, 0] - exact))
    assert err <= 1e-3 * np.max(np.abs(exact))


# ---------------------------------------------------------------------------
# Hessian properties


@pytest.mark.parametrize("dim", [2, 3])
def test_constant_field_hessian_is_identity_over_n(dim, grid2, grid3):
    grid = grid2 if dim == 2 else grid3
    c = 2.5
    pot = newtonian(from_function(grid, lambda x: c))
    mask = grid.interior_mask
    H = pot.hess[mask, 0]
    expect = np.eye(dim) * c / dim
    assert np.max(np.abs(H - expect)) <= 5e-3 * c


def test_trace_identity_residual(grid2):
    f = from_function(grid2, lambda x: np.sin(x[0]))
    pot = newtonian(f)
    assert laplacian_identity_residual(f, pot) <= 5e-2


def test_residual_requires_hessian(grid2):
    f = from_function(grid2, lambda x: 1.0)
    pot = newtonian(f, hessian=False)
    with pytest.raises(ValueError):
        laplacian_identity_residual(f, pot)
    other = from_function(build_grid(BallDomain(2, 1.0), 20), lambda x: 1.0)
    with pytest.raises(ValueError):
        laplacian_identity_residual(other, newtonian(f))


def test_hessian_symmetry_and_component_field(grid2):
    f = from_function(grid2, lambda x: x[0] * np.cos(x[1]))
    pot = newtonian(f)
    assert np.array_equal(pot.hess, np.swapaxes(pot.hess, 2, 3))
    comp = pot.hess_component_field(0, 1)
    assert np.array_equal(comp.values[:, 0], pot.hess[:, 0, 0, 1])
    assert pot.hess_norm2() > 0.0


def test_linearity(grid2):
    f = from_function(grid2, lambda x: x[0] ** 2)
    g = from_function(grid2, lambda x: np.sin(3.0 * x[1]))
    fg = GridField(grid2, f.values + g.values)
    pf, pg, pfg = newtonian(f), newtonian(g), newtonian(fg)
    scale = np.max(np.abs(pfg.base.values))
    assert np.allclose(pfg.base.values, pf.base.values + pg.base.values,
                       atol=1e-12 * scale)
    hscale = np.max(np.abs(pfg.hess))
    assert np.allclose(pfg.hess, pf.hess + pg.hess, atol=1e-12 * hscale)


def test_vector_components_independent(grid2):
    f = from_function(grid2, lambda x: [x[0], np.sin(x[1])])
    f1 = from_function(grid2, lambda x: x[0])
    f2 = from_function(grid2, lambda x: np.sin(x[1]))
    pot = newtonian(f)
    assert np.allclose(pot.base.values[:, 0], newtonian(f1).base.values[:, 0],
                       atol=1e-14)
    assert np.allclose(pot.base.values[:, 1], newtonian(f2).base.values[:, 0],
                       atol=1e-14)


def test_hessian_matches_finite_differences_of_base(grid2):
    from nonradial.fields import derivative
    f = from_function(grid2, lambda x: np.sin(x[0]) * x[1])
    pot = newtonian(f)
    mask = grid2.interior_mask
    for (i, j), beta in [((0, 0), (2, 0)), ((0, 1), (1, 1)), ((1, 1), (0, 2))]:
        fd = derivative(pot.base, beta).values[mask, 0]
        direct = pot.hess[mask, 0, i, j]
        assert np.max(np.abs(fd - direct)) <= 5e-3


# ---------------------------------------------------------------------------
# determinism and the operator-norm probe


def test_thread_count_does_not_change_bytes(grid2):
    f = from_function(grid2, lambda x: np.sin(x[0]) + x[1] ** 2)
    set_threads(1)
    a = newtonian(f)
    set_threads(4)
    b = newtonian(f)
    set_threads(1)
    assert np.array_equal(a.base.values, b.base.values)
    assert np.array_equal(a.hess, b.hess)


def test_operator_norm_probe(grid2):
    with pytest.raises(ValueError):
        operator_norm_probe(0, grid2)
    c = operator_norm_probe(2, grid2)
    # f = 1 is always included and its exact ratio ||N(1)||^(2)/||1|| is 1/n
    assert c >= 1.0 / grid2.dim - 1e-6
    assert np.isfinite(c) and c < 10.0
    assert operator_norm_probe(2, grid2) == c
