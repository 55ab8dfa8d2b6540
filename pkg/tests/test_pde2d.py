import numpy as np
import pytest

from rockrisk.pde2d import (INNER_HALF_WIDTH, AdvectionControl2D, AdvectionField,
                            assemble, assemble_matrices, build_mesh, element_matrices,
                            jacobians, objective_and_gradient, refinement_for_dofs,
                            solve_forward, write_nodal_csv)
from rockrisk.sampling import DensitySpec, quadrature_scenarios


@pytest.fixture(scope="module")
def mesh3():
    return build_mesh(3)


@pytest.fixture(scope="module")
def mats3(mesh3):
    return assemble_matrices(mesh3)


def manufactured_l2_error(r, xi=7.0):
    """L2 error for u = (1 - x^2 - y^2) e^x, which vanishes on the circle."""
    mesh = build_mesh(r)
    mats = assemble_matrices(mesh)
    adv = AdvectionField()
    x, y = mesh.nodes.T
    q = 1 - x * x - y * y
    e = np.exp(x)
    u = q * e
    ux, uy = (q - 2 * x) * e, -2 * y * e
    uxx, uyy = (q - 4 * x - 2) * e, -2 * e
    vx, vy = adv(xi)
    z = -(uxx + uyy) + vx * ux + vy * uy
    d = solve_forward(mesh, adv, xi, z, mats=mats) - u
    return np.sqrt(d @ (mats.mass @ d))


def test_node_counts():
    assert build_mesh(4).dof_count == 1313
    assert build_mesh(5).dof_count == 5185
    assert refinement_for_dofs(1300) == 4
    assert refinement_for_dofs(5185) == 5


def test_mesh_geometry(mesh3):
    r = np.linalg.norm(mesh3.nodes[mesh3.boundary_nodes], axis=1)
    np.testing.assert_allclose(r, 1.0, rtol=1e-14)
    assert np.all(np.linalg.norm(mesh3.nodes, axis=1) <= 1 + 1e-14)
    assert np.all(jacobians(mesh3) > 0)
    assert len(np.unique(mesh3.quads)) == mesh3.dof_count
    assert mesh3.interior_nodes.size + mesh3.boundary_nodes.size == mesh3.dof_count
    assert INNER_HALF_WIDTH == pytest.approx(1 / (np.sqrt(2) * (1 + np.sqrt(2))))


def test_area_converges_to_pi():
    gaps = []
    for r in (2, 3, 4):
        M = assemble_matrices(build_mesh(r)).mass
        gaps.append(np.pi - M.sum())
    assert all(g > 0 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 2e-2


def test_element_matrices_unit_square():
    xy = np.array([[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]])
    Ke, Me, Cx, Cy = element_matrices(xy)
    np.testing.assert_allclose(Ke[0].sum(axis=1), 0.0, atol=1e-15)
    np.testing.assert_allclose(Ke[0].diagonal(), 2 / 3)
    assert Me.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(Me[0, 0, 0], 1 / 9)
    # derivative of a constant vanishes; of x integrates to the area
    np.testing.assert_allclose(Cx[0] @ np.ones(4), 0.0, atol=1e-15)
    assert np.ones(4) @ Cx[0] @ xy[0, :, 0] == pytest.approx(1.0)
    assert np.ones(4) @ Cy[0] @ xy[0, :, 1] == pytest.approx(1.0)


def test_inverted_element_rejected():
    xy = np.array([[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]])
    with pytest.raises(ValueError):
        element_matrices(xy)


def test_advection_field():
    adv = AdvectionField()
    np.testing.assert_allclose(adv(10.0), [10.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(adv(20.0), [0.0, 20.0], atol=1e-12)
    np.testing.assert_allclose(adv(0.0), [0.0, 0.0])
    xs = np.linspace(0, 20, 7)
    np.testing.assert_allclose(np.linalg.norm(adv(xs), axis=1), xs, atol=1e-12)


def test_assemble_rejects_out_of_range(mesh3, mats3):
    with pytest.raises(ValueError):
        assemble(mesh3, AdvectionField(), 21.0, mats3)


def test_control_validation(mesh3, mats3):
    with pytest.raises(ValueError):
        solve_forward(mesh3, AdvectionField(), 1.0, np.zeros(5), mats=mats3)
    z = np.zeros(mesh3.dof_count)
    z[0] = np.nan
    with pytest.raises(ValueError):
        objective_and_gradient(mesh3, AdvectionField(), 1.0, z, mats=mats3)


def test_manufactured_second_order():
    errs = [manufactured_l2_error(r) for r in (2, 3, 4, 5)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 3.6) & (ratios <= 4.4)), ratios


def test_gradient_against_differences(mesh3, mats3):
    adv = AdvectionField()
    rng = np.random.default_rng(17)
    eps = 1e-6
    for _ in range(10):
        xi = rng.uniform(0, 20)
        z = rng.normal(size=mesh3.dof_count)
        v = rng.normal(size=mesh3.dof_count)
        _, g = objective_and_gradient(mesh3, adv, xi, z, mats=mats3)
        jp, _ = objective_and_gradient(mesh3, adv, xi, z + eps * v, mats=mats3)
        jm, _ = objective_and_gradient(mesh3, adv, xi, z - eps * v, mats=mats3)
        fd = (jp - jm) / (2 * eps)
        assert abs(g @ v - fd) <= 1e-5 * abs(fd)


def test_batched_problem_consistency(mesh3, mats3):
    adv = AdvectionField()
    s = quadrature_scenarios(5, DensitySpec())
    prob = AdvectionControl2D(mesh3, adv, s, mats=mats3)
    z = np.cos(mesh3.nodes[:, 0])
    J, G = prob.evaluate(z)
    for i, xi in enumerate(s.points):
        j1, g1 = objective_and_gradient(mesh3, adv, float(xi), z, mats=mats3)
        assert J[i] == pytest.approx(j1, rel=1e-12)
        np.testing.assert_allclose(G[i], g1, rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(prob.sample_values(s.points, z), J, rtol=1e-12)
    assert prob.lumped_mass.sum() == pytest.approx(mats3.mass.sum())
    assert prob.norm_sq(z) == pytest.approx(z @ (mats3.mass @ z))
    U = prob.states(z)
    assert np.all(U[:, mesh3.boundary_nodes] == 0.0)


def test_write_nodal(tmp_path, mesh3):
    write_nodal_csv(tmp_path / "n.csv", mesh3, {"z": np.zeros(mesh3.dof_count)})
    lines = (tmp_path / "n.csv").read_text().splitlines()
    assert lines[0] == "x,y,z" and len(lines) == mesh3.dof_count + 1


def test_source_term_shifts_control(mesh3, mats3):
    s = quadrature_scenarios(3, DensitySpec())
    adv = AdvectionField()
    f = np.full(mesh3.dof_count, 0.7)
    z = np.sin(mesh3.nodes[:, 1])
    with_f = AdvectionControl2D(mesh3, adv, s, f=f, mats=mats3).evaluate(z)
    shifted = AdvectionControl2D(mesh3, adv, s, mats=mats3).evaluate(z + f)
    np.testing.assert_allclose(with_f[0], shifted[0], rtol=1e-13)
    np.testing.assert_allclose(with_f[1], shifted[1], rtol=1e-10, atol=1e-15)


def test_zero_control_objective():
    adv = AdvectionField()
    gaps = []
    for r in (2, 3, 4):
        mesh = build_mesh(r)
        j, g = objective_and_gradient(mesh, adv, 5.0, np.zeros(mesh.dof_count))
        gaps.append(abs(j - np.pi / 2))
    assert gaps[0] / gaps[1] > 3.0 and gaps[1] / gaps[2] > 3.0


def test_pure_diffusion_paraboloid():
    # -Laplace(1 - r^2) = 4
    errs = []
    for r in (2, 3, 4):
        mesh = build_mesh(r)
        u = solve_forward(mesh, AdvectionField(), 0.0, np.full(mesh.dof_count, 4.0))
        errs.append(np.max(np.abs(u - (1 - np.sum(mesh.nodes ** 2, axis=1)))))
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_operator_structure(mesh3, mats3):
    adv = AdvectionField()
    K0 = assemble(mesh3, adv, 0.0, mats3)
    assert abs(K0 - K0.T).max() <= 1e-12
    # matrix-linear in v: pick xi3 with |v3| = |v1 + v2| along the same direction
    v = adv(4.0) + adv(6.0)
    K1, K2 = assemble(mesh3, adv, 4.0, mats3), assemble(mesh3, adv, 6.0, mats3)
    I = mesh3.interior_nodes
    Kv = (mats3.stiffness + v[0] * mats3.adv_x + v[1] * mats3.adv_y)[I][:, I]
    assert abs(K1 + K2 - K0 - Kv).max() <= 1e-12
