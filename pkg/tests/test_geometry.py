import math

import numpy as np
import pytest

from capflow.geometry import (
    RadialField,
    build_grid,
    conormal_derivative,
    double_grid,
    gradient_values,
    quad_integrate,
    reflect_field,
    tangential_gradient,
)


def test_hemisphere_endpoints_and_mask():
    g = build_grid(1, 9, "hemisphere")
    assert g.size == 9
    assert np.allclose(g.phi, np.arange(9) * math.pi / 8)
    assert list(np.flatnonzero(g.boundary_mask)) == [0, 8]
    assert np.allclose(g.nodes[0], [1.0, 0.0])
    assert np.allclose(g.nodes[-1], [-1.0, 0.0], atol=1e-15)


def test_nodes_are_unit_vectors():
    for n, topo in [(1, "hemisphere"), (1, "full-sphere"), (2, "hemisphere"), (2, "full-sphere")]:
        g = build_grid(n, 16, topo)
        assert np.max(np.abs(np.linalg.norm(g.nodes, axis=1) - 1.0)) < 1e-12


def test_weight_sums():
    assert abs(sum(build_grid(1, 513, "hemisphere").weights) - math.pi) < 1e-6
    assert abs(sum(build_grid(1, 512, "full-sphere").weights) - 2 * math.pi) < 1e-10
    assert abs(sum(build_grid(2, 16, "hemisphere").weights) - 2 * math.pi) < 1e-12
    assert abs(sum(build_grid(2, 16, "full-sphere").weights) - 4 * math.pi) < 1e-12


def test_weight_positivity():
    for n, topo in [(1, "hemisphere"), (1, "full-sphere"), (2, "hemisphere"), (2, "full-sphere")]:
        g = build_grid(n, 12, topo)
        assert np.all(g.weights > 0)


def test_chord_symmetric_zero_diagonal():
    g = build_grid(1, 32, "full-sphere")
    assert np.allclose(g.chord, g.chord.T)
    assert np.all(np.diag(g.chord) == 0.0)
    # spot value: antipodal nodes two apart
    assert abs(g.chord[0, 16] - 2.0) < 1e-12


def test_build_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        build_grid(1, 7, "hemisphere")
    with pytest.raises(ValueError):
        build_grid(3, 16, "hemisphere")
    with pytest.raises(ValueError):
        build_grid(1, 16, "torus")


def test_quad_constant_and_zero():
    g = build_grid(1, 129, "hemisphere")
    assert abs(quad_integrate(g, np.ones(g.size)) - math.pi) < 1e-12
    assert quad_integrate(g, np.zeros(g.size)) == 0.0
    with pytest.raises(ValueError):
        quad_integrate(g, np.ones(g.size - 1))


def test_quad_sin_phi():
    g = build_grid(1, 129, "hemisphere")
    val = quad_integrate(g, np.sin(g.phi))
    assert abs(val - 2.0) < 1e-3


@pytest.mark.parametrize(
    "f,exact",
    [
        (lambda phi: np.sin(phi), 2.0),
        (lambda phi: phi * np.sin(phi), math.pi),
        (lambda phi: np.exp(np.sin(phi)), 6.20875803571111),  # adaptive quadrature
    ],
)
def test_quad_refinement_order(f, exact):
    errs = []
    for N in (65, 129, 257):
        g = build_grid(1, N, "hemisphere")
        errs.append(abs(quad_integrate(g, f(g.phi)) - exact))
    # trapezoid rule: error drops by about 4x per doubling
    assert errs[1] < errs[0] / 2.5
    assert errs[2] < errs[1] / 2.5


def test_gradient_constant_field():
    for topo in ("hemisphere", "full-sphere"):
        g = build_grid(1, 64, topo)
        rho = RadialField(g, np.full(g.size, 2.3))
        assert np.max(np.abs(tangential_gradient(rho))) < 1e-13


def test_gradient_linear_in_phi():
    g = build_grid(1, 64, "hemisphere")
    grad = gradient_values(g, g.phi.copy())
    mags = np.linalg.norm(grad, axis=1)
    # the stencils are exact on linear functions
    assert np.max(np.abs(mags - 1.0)) < 1e-10


def test_gradient_cos_phi_accuracy():
    errs = []
    for N in (65, 129):
        g = build_grid(1, N, "hemisphere")
        grad = gradient_values(g, np.cos(g.phi))
        err = np.max(np.abs(np.linalg.norm(grad, axis=1) - np.abs(np.sin(g.phi))))
        errs.append(err)
    assert errs[0] < 5e-3
    assert errs[1] < errs[0] / 3.0  # second order


def test_gradient_tangency():
    g = build_grid(1, 64, "hemisphere")
    rho = RadialField(g, 1.0 + 0.2 * np.sin(g.phi) ** 2)
    grad = tangential_gradient(rho)
    assert np.max(np.abs(np.sum(grad * g.nodes, axis=1))) < 1e-10
    g2 = build_grid(2, 12, "hemisphere")
    rho2 = RadialField(g2, 1.0 + 0.1 * g2.nodes[:, 2])
    grad2 = tangential_gradient(rho2)
    assert np.max(np.abs(np.sum(grad2 * g2.nodes, axis=1))) < 1e-10


def test_gradient_sphere2_height_field():
    g = build_grid(2, 24, "hemisphere")
    grad = gradient_values(g, g.nodes[:, 2].copy())
    # grad of x3 on the sphere is -sin(beta) e_beta, magnitude sin(beta)
    sinbeta = np.sqrt(1.0 - g.nodes[:, 2] ** 2)
    mags = np.linalg.norm(grad, axis=1)
    assert np.max(np.abs(mags - sinbeta)) < 5e-3


def test_conormal_derivative_values():
    g = build_grid(1, 129, "hemisphere")
    const = RadialField(g, np.full(g.size, 1.7))
    assert abs(conormal_derivative(const, 0)) < 1e-12
    sin_field = RadialField(g, 1.5 + np.sin(g.phi))
    # rho grows moving inward from phi=0, so the outward derivative is -1
    assert abs(conormal_derivative(sin_field, 0) - (-1.0)) < 1e-3
    cos_field = RadialField(g, 2.0 + np.cos(g.phi))
    assert abs(conormal_derivative(cos_field, 0)) < 1e-3
    with pytest.raises(ValueError):
        conormal_derivative(sin_field, 5)


def test_conormal_derivative_sphere2():
    g = build_grid(2, 24, "hemisphere")
    rho = RadialField(g, 1.5 + g.nodes[:, 2])
    b = g.boundary_indices()[0]
    # d(cos beta)/d beta = -sin beta = -1 at the equator; eta = +e_beta
    assert abs(conormal_derivative(rho, b) - (-1.0)) < 5e-3


def test_reflect_constant_and_sin():
    g = build_grid(1, 65, "hemisphere")
    ref = reflect_field(RadialField(g, np.ones(g.size)))
    assert ref.grid.topology == "full-sphere"
    assert ref.grid.size == 2 * (g.size - 1)
    assert np.all(ref.values == 1.0)

    rho = RadialField(g, 1.5 + np.sin(g.phi))
    ref = reflect_field(rho)
    # mirrored node k <-> hemisphere node 2(N-1)-k carries the same value
    N = g.size
    for k in range(N, ref.grid.size):
        assert ref.values[k] == rho.values[2 * (N - 1) - k]
    # equator values shared, not duplicated
    assert ref.values[0] == rho.values[0]
    assert ref.values[N - 1] == rho.values[N - 1]
    with pytest.raises(ValueError):
        reflect_field(ref)


def test_reflect_conormal_jump():
    g = build_grid(1, 129, "hemisphere")
    rho = RadialField(g, 1.5 + np.sin(g.phi) + 0.3 * np.cos(g.phi))
    ref = reflect_field(rho)
    u = ref.values
    h = ref.grid.h
    d_up = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    d_down = (3.0 * u[0] - 4.0 * u[-1] + u[-2]) / (2.0 * h)
    jump = d_up - d_down
    eta_deriv = conormal_derivative(rho, 0)
    assert abs(abs(jump) - 2.0 * abs(eta_deriv)) < 1e-3


def test_reflect_field_sphere2():
    g = build_grid(2, 12, "hemisphere")
    rho = RadialField(g, 1.0 + 0.2 * g.nodes[:, 2] ** 2)
    ref = reflect_field(rho)
    full = ref.grid
    # even in x3: reflected node (x, y, -z) carries the value at (x, y, z)
    for k in range(full.size):
        x, y, z = full.nodes[k]
        partner = np.argmin(np.linalg.norm(g.nodes - np.array([x, y, abs(z)]), axis=1))
        assert abs(ref.values[k] - rho.values[partner]) < 1e-12


def test_double_grid_cached():
    g = build_grid(1, 33, "hemisphere")
    d1, m1 = double_grid(g)
    d2, m2 = double_grid(g)
    assert d1 is d2 and m1 is m2


def test_radial_field_validation():
    g = build_grid(1, 16, "hemisphere")
    with pytest.raises(ValueError):
        RadialField(g, np.zeros(g.size))
    with pytest.raises(ValueError):
        RadialField(g, np.ones(g.size + 1))
