"""Two-dimensional advection-diffusion control testbed on the unit disk.

``-Lap u + v(xi) . grad u = f + z`` in the unit disk, ``u = 0`` on the circle,
discretized with bilinear (Q1) elements on a five-patch quadrilateral mesh.
The advection field is spatially constant, so
``K(xi) = A + v_x(xi) C_x + v_y(xi) C_y`` is assembled from three matrices that
are built once per mesh.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .sampling import ScenarioSet

# inner square half-width; balances cell sizes across the patch interfaces
INNER_HALF_WIDTH = 1.0 / (np.sqrt(2.0) * (1.0 + np.sqrt(2.0)))


@dataclass
class DiskMesh:
    refinement: int
    nodes: np.ndarray
    quads: np.ndarray
    boundary_nodes: np.ndarray

    @property
    def dof_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.dof_count, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)


def build_mesh(refinement: int, inner: float = INNER_HALF_WIDTH) -> DiskMesh:
    """Five-patch quadrilateral mesh of the unit disk.

    A central square and four patches bounded by the square's edges and quarter
    arcs. Each patch is split into ``2**refinement`` cells per side through its
    transfinite (linear-blend) map, so boundary nodes lie on the circle.
    """
    if refinement < 0:
        raise ValueError("refinement must be nonnegative")
    n = 2 ** refinement
    s = np.linspace(0.0, 1.0, n + 1)
    patches = []

    # central square, x index i, y index j
    X, Y = np.meshgrid(-inner + 2 * inner * s, -inner + 2 * inner * s, indexing="ij")
    patches.append(np.stack([X, Y], axis=-1))

    # east patch in local coordinates, then rotated by multiples of 90 degrees
    r, t = np.meshgrid(s, s, indexing="ij")
    ang = -np.pi / 4 + t * np.pi / 2
    p_in = np.stack([np.full_like(t, inner), -inner + 2 * inner * t], axis=-1)
    p_out = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    east = (1 - r)[..., None] * p_in + r[..., None] * p_out
    for k in range(4):
        c, sn = np.cos(k * np.pi / 2), np.sin(k * np.pi / 2)
        rot = np.array([[c, -sn], [sn, c]])
        patches.append(east @ rot.T)

    index = {}
    coords = []
    quads = []
    boundary = set()
    for pi, P in enumerate(patches):
        ids = np.empty((n + 1, n + 1), dtype=np.int64)
        for i in range(n + 1):
            for j in range(n + 1):
                key = (round(P[i, j, 0], 9) + 0.0, round(P[i, j, 1], 9) + 0.0)
                if key not in index:
                    index[key] = len(coords)
                    coords.append(P[i, j])
                ids[i, j] = index[key]
                if pi > 0 and i == n:
                    boundary.add(int(ids[i, j]))
        for i in range(n):
            for j in range(n):
                quads.append([ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]])
    nodes = np.array(coords)
    b = np.array(sorted(boundary), dtype=np.int64)
    nodes[b] /= np.linalg.norm(nodes[b], axis=1)[:, None]
    return DiskMesh(refinement, nodes, np.array(quads, dtype=np.int64), b)


def refinement_for_dofs(target: int) -> int:
    """Refinement level whose node count is closest to ``target``."""
    # node count (n+1)^2 + 4n(n+1) - 4n with n = 2^r
    counts = {r: (2 ** r + 1) ** 2 + 4 * 2 ** r * (2 ** r + 1) - 4 * 2 ** r for r in range(10)}
    return min(counts, key=lambda r: abs(np.log(counts[r] / target)))


# --------------------------------------------------------------------------
# Q1 element integrals
# --------------------------------------------------------------------------

_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_GP = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) / np.sqrt(3.0)


def _shape(gp):
    xi, eta = gp
    N = 0.25 * (1 + _REF[:, 0] * xi) * (1 + _REF[:, 1] * eta)
    dN = 0.25 * np.stack([_REF[:, 0] * (1 + _REF[:, 1] * eta),
                          _REF[:, 1] * (1 + _REF[:, 0] * xi)], axis=1)
    return N, dN


def element_matrices(xy):
    """Local stiffness, mass and advection matrices for quads ``xy`` (E, 4, 2).

    Advection entries are ``C_x[a, b] = int N_a dN_b/dx`` (test index first).
    2x2 Gauss quadrature.
    """
    xy = np.asarray(xy, dtype=float)
    E = xy.shape[0]
    Ke = np.zeros((E, 4, 4))
    Me = np.zeros((E, 4, 4))
    Cx = np.zeros((E, 4, 4))
    Cy = np.zeros((E, 4, 4))
    for gp in _GP:
        N, dN = _shape(gp)
        J = np.einsum("eai,aj->eij", xy, dN)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(det <= 0):
            raise ValueError("non-positive Jacobian: inverted or degenerate quad")
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1] / det
        inv[:, 1, 1] = J[:, 0, 0] / det
        inv[:, 0, 1] = -J[:, 0, 1] / det
        inv[:, 1, 0] = -J[:, 1, 0] / det
        grad = np.einsum("aj,eji->eai", dN, inv)
        Ke += det[:, None, None] * np.einsum("eai,ebi->eab", grad, grad)
        Me += det[:, None, None] * np.outer(N, N)[None]
        Cx += det[:, None, None] * N[None, :, None] * grad[:, None, :, 0]
        Cy += det[:, None, None] * N[None, :, None] * grad[:, None, :, 1]
    return Ke, Me, Cx, Cy


def jacobians(mesh: DiskMesh) -> np.ndarray:
    xy = mesh.nodes[mesh.quads]
    out = []
    for gp in _GP:
        _, dN = _shape(gp)
        J = np.einsum("eai,aj->eij", xy, dN)
        out.append(J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
    return np.stack(out, axis=1)


@dataclass
class FemMatrices:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    adv_x: sp.csr_matrix
    adv_y: sp.csr_matrix


def assemble_matrices(mesh: DiskMesh) -> FemMatrices:
    Ke, Me, Cx, Cy = element_matrices(mesh.nodes[mesh.quads])
    rows = np.repeat(mesh.quads, 4, axis=1).ravel()
    cols = np.tile(mesh.quads, (1, 4)).ravel()
    n = mesh.dof_count

    def build(local):
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))

    return FemMatrices(build(Ke), build(Me), build(Cx), build(Cy))


@dataclass(frozen=True)
class AdvectionField:
    v_max: float = 20.0

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        ang = xi * np.pi / self.v_max - np.pi / 2
        return np.stack([xi * np.cos(ang), xi * np.sin(ang)], axis=-1)


def assemble(mesh: DiskMesh, adv: AdvectionField, xi: float,
             mats: FemMatrices | None = None) -> sp.csc_matrix:
    """Interior-interior block of ``K(xi)`` (Dirichlet rows and columns eliminated)."""
    if not 0.0 <= xi <= adv.v_max:
        raise ValueError(f"xi = {xi} outside [0, {adv.v_max}]")
    mats = mats or assemble_matrices(mesh)
    vx, vy = adv(xi)
    K = mats.stiffness + vx * mats.adv_x + vy * mats.adv_y
    I = mesh.interior_nodes
    return sp.csc_matrix(K[I][:, I])


def _check_control(mesh: DiskMesh, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (mesh.dof_count,):
        raise ValueError(f"control must hold {mesh.dof_count} nodal values, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("control has non-finite entries")
    return z


def solve_forward(mesh: DiskMesh, adv: AdvectionField, xi: float, z, f=None,
                  mats: FemMatrices | None = None) -> np.ndarray:
    mats = mats or assemble_matrices(mesh)
    z = _check_control(mesh, z)
    rhs_full = z if f is None else z + f
    I = mesh.interior_nodes
    u = np.zeros(mesh.dof_count)
    K = assemble(mesh, adv, xi, mats)
    u[I] = splu(K).solve((mats.mass @ rhs_full)[I])
    return u


def objective_and_gradient(mesh: DiskMesh, adv: AdvectionField, xi: float, z, f=None,
                           target: float = 1.0, mats: FemMatrices | None = None):
    """Tracking objective and its gradient as a dual vector (pairs with nodal perturbations)."""
    mats = mats or assemble_matrices(mesh)
    z = _check_control(mesh, z)
    rhs_full = z if f is None else z + f
    I = mesh.interior_nodes
    lu = splu(assemble(mesh, adv, xi, mats))
    u = np.zeros(mesh.dof_count)
    u[I] = lu.solve((mats.mass @ rhs_full)[I])
    r = u - target
    Mr = mats.mass @ r
    p = np.zeros(mesh.dof_count)
    p[I] = lu.solve(Mr[I], trans="T")
    return 0.5 * float(r @ Mr), mats.mass @ p


class AdvectionControl2D:
    """Per-scenario tracking objectives on the disk, one LU factorization per scenario."""

    def __init__(self, mesh: DiskMesh, adv: AdvectionField, scenarios: ScenarioSet,
                 f=None, target: float = 1.0, mats: FemMatrices | None = None):
        self.mesh = mesh
        self.adv = adv
        self.scenarios = scenarios
        self.target = target
        self.mats = mats or assemble_matrices(mesh)
        self.f = np.zeros(mesh.dof_count) if f is None else np.asarray(f, dtype=float)
        self.mass = self.mats.mass
        self._interior = mesh.interior_nodes
        self._lus = [splu(assemble(mesh, adv, float(x), self.mats)) for x in scenarios.points]
        self.lumped_mass = np.asarray(self.mass.sum(axis=1)).ravel()

    @property
    def n_controls(self) -> int:
        return self.mesh.dof_count

    def mass_matvec(self, z):
        return self.mass @ z

    def norm_sq(self, z) -> float:
        return float(z @ (self.mass @ z))

    def with_scenarios(self, scenarios: ScenarioSet) -> "AdvectionControl2D":
        return AdvectionControl2D(self.mesh, self.adv, scenarios, self.f, self.target, self.mats)

    def states(self, z) -> np.ndarray:
        I = self._interior
        b = (self.mass @ (np.asarray(z, dtype=float) + self.f))[I]
        U = np.zeros((len(self._lus), self.n_controls))
        for i, lu in enumerate(self._lus):
            U[i, I] = lu.solve(b)
        return U

    def evaluate(self, z, with_grad: bool = True):
        U = self.states(z)
        R = U - self.target
        MR = (self.mass @ R.T).T
        J = 0.5 * np.einsum("ij,ij->i", R, MR)
        if not with_grad:
            return J, None
        I = self._interior
        P = np.zeros_like(U)
        for i, lu in enumerate(self._lus):
            P[i, I] = lu.solve(MR[i, I], trans="T")
        return J, (self.mass @ P.T).T

    def sample_values(self, xis, z) -> np.ndarray:
        """Objective at arbitrary parameter values (factorizes one system per value)."""
        I = self._interior
        b = (self.mass @ (np.asarray(z, dtype=float) + self.f))[I]
        out = np.empty(len(xis))
        u = np.zeros(self.n_controls)
        for k, x in enumerate(xis):
            try:
                u[I] = splu(assemble(self.mesh, self.adv, float(x), self.mats)).solve(b)
            except Exception as exc:
                raise RuntimeError(f"state solve failed at sample {k} (xi={x})") from exc
            r = u - self.target
            out[k] = 0.5 * float(r @ (self.mass @ r))
        return out


def write_nodal_csv(path, mesh: DiskMesh, columns: dict):
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"] + names)
        for i, (x, y) in enumerate(mesh.nodes):
            w.writerow([repr(float(x)), repr(float(y))] + [repr(float(columns[n][i])) for n in names])
