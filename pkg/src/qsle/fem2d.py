"""Linear triangular finite elements for stationary heat conduction
-div(kappa grad u) = 0 on a rectangle, with piecewise-constant conductivity
on circular inclusions, a Dirichlet top edge and flux data elsewhere.

The mesh is a structured grid triangulation with nodes snapped onto the
inclusion circles, which keeps meshing dependency-free and deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

__all__ = [
    "ConductivityField",
    "HeatProblem",
    "Mesh",
    "NodalSolution",
    "Observations",
    "build_mesh",
    "solve",
    "ForwardMap",
    "forward_map",
    "make_synthetic_data",
    "reference_problem",
    "reference_field",
    "default_observation_points",
    "solution_to_csv",
    "mesh_to_csv",
    "observations_to_json",
]


@dataclass(frozen=True)
class ConductivityField:
    """Background conductivity plus disjoint circular inclusions, each a
    ((cx, cy), radius, kappa) triple."""

    background: float
    inclusions: tuple[tuple[tuple[float, float], float, float], ...] = ()

    def __post_init__(self):
        if self.background <= 0:
            raise ValueError("background conductivity must be positive")
        incs = tuple((tuple(c), float(r), float(k)) for c, r, k in self.inclusions)
        object.__setattr__(self, "inclusions", incs)
        for (_, r, k) in incs:
            if r <= 0 or k <= 0:
                raise ValueError("inclusion radius and conductivity must be positive")
        for a in range(len(incs)):
            for b in range(a + 1, len(incs)):
                (ca, ra, _), (cb, rb, _) = incs[a], incs[b]
                if math.dist(ca, cb) <= ra + rb:
                    raise ValueError("inclusions must be pairwise disjoint")

    def kappas(self) -> np.ndarray:
        """Conductivity per region label: [background, inclusion 1, ...]."""
        return np.array([self.background] + [k for (_, _, k) in self.inclusions])

    def with_kappas(self, values) -> "ConductivityField":
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if len(values) != len(self.inclusions):
            raise ValueError("one conductivity per inclusion is required")
        incs = tuple((c, r, float(v))
                     for (c, r, _), v in zip(self.inclusions, values))
        return ConductivityField(background=self.background, inclusions=incs)


def _default_neumann(x: float, y: float) -> float:
    """Flux datum on the non-Dirichlet boundary: 2000 on the bottom edge,
    0 on the vertical sides."""
    return 2000.0 if y < 1e-12 else 0.0


@dataclass(frozen=True)
class HeatProblem:
    """Rectangle (0, width) x (0, height) with Dirichlet data on the top
    edge and flux data -kappa du/dnu = h on the remaining three edges."""

    width: float = 1.0
    height: float = 0.6
    dirichlet: object = 200.0  # constant or callable (x, y) -> value
    neumann: object = _default_neumann  # callable (x, y) -> flux
    resolution: int = 32

    def dirichlet_value(self, x: float, y: float) -> float:
        return self.dirichlet(x, y) if callable(self.dirichlet) else float(self.dirichlet)


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray          # (V, 2)
    triangles: np.ndarray      # (T, 3) node indices, counterclockwise
    labels: np.ndarray         # (T,) region ids: 0 background, 1.. inclusions
    dirichlet_nodes: np.ndarray
    neumann_edges: np.ndarray  # (E, 2) node index pairs on the flux boundary
    nx: int
    ny: int
    hx: float
    hy: float

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def locate(self, point) -> tuple[int, np.ndarray]:
        """Containing triangle and barycentric coordinates of a point."""
        x, y = float(point[0]), float(point[1])
        i0 = min(max(int(x / self.hx), 0), self.nx - 1)
        j0 = min(max(int(y / self.hy), 0), self.ny - 1)
        for radius in (1, 2, 3):
            for j in range(max(0, j0 - radius), min(self.ny, j0 + radius + 1)):
                for i in range(max(0, i0 - radius), min(self.nx, i0 + radius + 1)):
                    for t in (2 * (j * self.nx + i), 2 * (j * self.nx + i) + 1):
                        bary = self._barycentric(t, x, y)
                        if np.all(bary >= -1e-9):
                            return t, bary
        raise ValueError(f"point ({x}, {y}) lies outside the mesh")

    def _barycentric(self, tri: int, x: float, y: float) -> np.ndarray:
        p = self.nodes[self.triangles[tri]]
        mat = np.array([[p[1, 0] - p[0, 0], p[2, 0] - p[0, 0]],
                        [p[1, 1] - p[0, 1], p[2, 1] - p[0, 1]]])
        try:
            lam = np.linalg.solve(mat, np.array([x - p[0, 0], y - p[0, 1]]))
        except np.linalg.LinAlgError:
            return np.array([-1.0, -1.0, -1.0])
        return np.array([1.0 - lam[0] - lam[1], lam[0], lam[1]])


def build_mesh(problem: HeatProblem, resolution: int | None = None,
               inclusions: tuple = ()) -> Mesh:
    """Structured triangulation with nodes snapped to inclusion circles and
    elements labeled by a centroid-in-disk test.

    ``inclusions`` is a tuple of ((cx, cy), radius) pairs; conductivity
    values are irrelevant to the geometry.
    """
    res = int(resolution if resolution is not None else problem.resolution)
    if res < 8:
        raise ValueError("resolution must be at least 8 elements per unit length")
    nx = round(problem.width * res)
    ny = max(1, round(problem.height * res))
    hx = problem.width / nx
    hy = problem.height / ny

    # accepts both ((cx, cy), r) pairs and ((cx, cy), r, kappa) triples
    geo = [(np.asarray(inc[0], dtype=float), float(inc[1])) for inc in inclusions]
    for center, radius in geo:
        if not (radius < center[0] < problem.width - radius
                and radius < center[1] < problem.height - radius):
            raise ValueError(f"inclusion at {tuple(center)} intersects the boundary")

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    base = np.stack([ii.ravel() * hx, jj.ravel() * hy], axis=-1)
    interior = ((ii.ravel() > 0) & (ii.ravel() < nx)
                & (jj.ravel() > 0) & (jj.ravel() < ny))
    node_ids = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)

    tris = []
    for j in range(ny):
        for i in range(nx):
            n00 = j * (nx + 1) + i
            n10 = n00 + 1
            n01 = n00 + (nx + 1)
            n11 = n01 + 1
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    triangles = np.asarray(tris, dtype=int)

    grid_edges = np.concatenate([
        np.stack([node_ids[:, :-1].ravel(), node_ids[:, 1:].ravel()], axis=1),
        np.stack([node_ids[:-1, :].ravel(), node_ids[1:, :].ravel()], axis=1),
        np.stack([node_ids[:-1, :-1].ravel(), node_ids[1:, 1:].ravel()], axis=1),
    ])

    snap_tol = 0.35 * min(hx, hy)
    for _ in range(6):
        nodes = base.copy()
        for center, radius in geo:
            delta = nodes - center
            dist = np.hypot(delta[:, 0], delta[:, 1])
            mask = interior & (np.abs(dist - radius) < snap_tol) & (dist > 1e-12)
            nodes[mask] = center + delta[mask] * (radius / dist[mask])[:, None]
            # pull the closer endpoint of every interface-crossing grid edge
            # onto the circle so elements do not straddle the conductivity jump
            for _pass in range(2):
                signed = np.hypot(*(nodes - center).T) - radius
                a, b = grid_edges[:, 0], grid_edges[:, 1]
                for ea, eb in grid_edges[signed[a] * signed[b] < 0.0]:
                    pick = ea if abs(signed[ea]) <= abs(signed[eb]) else eb
                    if not interior[pick]:
                        continue
                    d = nodes[pick] - center
                    norm = math.hypot(*d)
                    if norm > 1e-12:
                        nodes[pick] = center + d * (radius / norm)
                        signed[pick] = 0.0
        p = nodes[triangles]
        areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                       - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        if np.all(areas > 1e-14):
            break
        snap_tol *= 0.7
    else:
        raise RuntimeError("could not snap mesh nodes without degenerate elements")

    centroids = nodes[triangles].mean(axis=1)
    labels = np.zeros(len(triangles), dtype=int)
    for k, (center, radius) in enumerate(geo):
        inside = np.hypot(*(centroids - center).T) <= radius
        labels[inside] = k + 1

    dirichlet_nodes = node_ids[ny, :]
    edges = []
    for i in range(nx):  # bottom edge, y = 0
        edges.append((node_ids[0, i], node_ids[0, i + 1]))
    for j in range(ny):  # vertical sides
        edges.append((node_ids[j, 0], node_ids[j + 1, 0]))
        edges.append((node_ids[j, nx], node_ids[j + 1, nx]))
    return Mesh(nodes=nodes, triangles=triangles, labels=labels,
                dirichlet_nodes=np.asarray(dirichlet_nodes, dtype=int),
                neumann_edges=np.asarray(edges, dtype=int),
                nx=nx, ny=ny, hx=hx, hy=hy)


def _region_stiffness(mesh: Mesh) -> list[sparse.csr_matrix]:
    """Unit-conductivity stiffness matrices, one per region label."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    areas = mesh.areas()
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * areas)[:, None, None]
    rows = np.repeat(mesh.triangles[:, :, None], 3, axis=2)
    cols = np.repeat(mesh.triangles[:, None, :], 3, axis=1)
    n = len(mesh.nodes)
    out = []
    for label in range(mesh.labels.max() + 1):
        sel = mesh.labels == label
        mat = sparse.coo_matrix(
            (ke[sel].ravel(), (rows[sel].ravel(), cols[sel].ravel())),
            shape=(n, n)).tocsr()
        out.append(mat)
    return out


def _neumann_load(mesh: Mesh, problem: HeatProblem) -> np.ndarray:
    """Boundary load from the flux datum: b_i = -integral h phi_i ds."""
    load = np.zeros(len(mesh.nodes))
    for a, b in mesh.neumann_edges:
        pa, pb = mesh.nodes[a], mesh.nodes[b]
        length = math.dist(pa, pb)
        mid = 0.5 * (pa + pb)
        h = float(problem.neumann(mid[0], mid[1]))
        load[a] -= 0.5 * h * length
        load[b] -= 0.5 * h * length
    return load


@dataclass(frozen=True)
class NodalSolution:
    mesh: Mesh
    values: np.ndarray

    def interpolate(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(points.shape[0])
        for i, pt in enumerate(points):
            tri, bary = self.mesh.locate(pt)
            out[i] = float(bary @ self.values[self.mesh.triangles[tri]])
        return out


class _ReducedSystem:
    """Dirichlet-eliminated operators, cached so only the conductivities
    change between solves on a fixed mesh."""

    def __init__(self, mesh: Mesh, problem: HeatProblem):
        if len(mesh.dirichlet_nodes) == 0:
            raise ValueError("no Dirichlet data: the system would be singular")
        self.mesh = mesh
        n = len(mesh.nodes)
        fixed = np.zeros(n, dtype=bool)
        fixed[mesh.dirichlet_nodes] = True
        self.free = np.flatnonzero(~fixed)
        self.fixed = np.flatnonzero(fixed)
        self.g = np.array([problem.dirichlet_value(*mesh.nodes[i]) for i in self.fixed])
        mats = _region_stiffness(mesh)
        self.k_ff = [m[self.free][:, self.free].tocsc() for m in mats]
        self.k_fd_g = [m[self.free][:, self.fixed] @ self.g for m in mats]
        self.load_f = _neumann_load(mesh, problem)[self.free]

    def solve(self, kappas: np.ndarray) -> np.ndarray:
        if len(kappas) != len(self.k_ff):
            raise ValueError("one conductivity per region is required")
        if np.any(np.asarray(kappas) <= 0):
            raise ValueError("conductivities must be positive")
        k = kappas[0] * self.k_ff[0]
        rhs = self.load_f - kappas[0] * self.k_fd_g[0]
        for kap, mat, cpl in zip(kappas[1:], self.k_ff[1:], self.k_fd_g[1:]):
            k = k + kap * mat
            rhs = rhs - kap * cpl
        lu = splu(k.tocsc())
        u_free = lu.solve(rhs)
        resid = np.linalg.norm(k @ u_free - rhs) / max(np.linalg.norm(rhs), 1e-30)
        if resid > 1e-10:
            raise RuntimeError(f"linear solve failed: relative residual {resid:.2e}")
        full = np.empty(len(self.mesh.nodes))
        full[self.free] = u_free
        full[self.fixed] = self.g
        return full


def solve(problem: HeatProblem, fld: ConductivityField,
          resolution: int | None = None) -> NodalSolution:
    """Galerkin solution of the conduction problem on the snapped mesh."""
    geometry = tuple((c, r) for c, r, _ in fld.inclusions)
    mesh = build_mesh(problem, resolution, geometry)
    system = _ReducedSystem(mesh, problem)
    return NodalSolution(mesh=mesh, values=system.solve(fld.kappas()))


class ForwardMap:
    """Observation operator (kappa_1, ..., kappa_n) -> u at fixed points.

    The mesh, Dirichlet reduction, per-region stiffness and the point
    interpolation stencils are built once; each call only recombines the
    region matrices with new conductivities and refactorizes.
    """

    name = "heat2d_forward"

    def __init__(self, problem: HeatProblem, points, fld: ConductivityField,
                 resolution: int | None = None):
        self.problem = problem
        self.fld = fld
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        geometry = tuple((c, r) for c, r, _ in fld.inclusions)
        self.mesh = build_mesh(problem, resolution, geometry)
        self.system = _ReducedSystem(self.mesh, problem)
        self._stencil = []
        for pt in self.points:
            tri, bary = self.mesh.locate(pt)  # raises for outside points
            self._stencil.append((self.mesh.triangles[tri], bary))

    def _observe(self, u: np.ndarray) -> np.ndarray:
        return np.array([float(bary @ u[nodes]) for nodes, bary in self._stencil])

    def __call__(self, kappas) -> np.ndarray:
        kappas = np.asarray(kappas, dtype=float)
        if kappas.ndim == 2:
            return np.stack([self(row) for row in kappas])
        full = np.concatenate([[self.fld.background], np.atleast_1d(kappas)])
        return self._observe(self.system.solve(full))


def forward_map(problem: HeatProblem, points, fld: ConductivityField | None = None,
                resolution: int | None = None) -> ForwardMap:
    return ForwardMap(problem, points, fld if fld is not None else reference_field(),
                      resolution)


@dataclass(frozen=True)
class Observations:
    points: np.ndarray
    values: np.ndarray
    noise_level: float

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, float)))
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, float)))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("observation values must be finite")


def make_synthetic_data(problem: HeatProblem, true_field: ConductivityField,
                        points, delta: float, seed=0) -> Observations:
    """Noisy data from a forward solve on a 2x finer mesh than the
    inversion mesh (inverse-crime guard)."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    fm = ForwardMap(problem, points, true_field,
                    resolution=2 * problem.resolution)
    clean = fm(np.array([k for (_, _, k) in true_field.inclusions]))
    noise = delta * np.random.default_rng(seed).standard_normal(len(clean))
    return Observations(points=points, values=clean + noise, noise_level=delta)


def reference_field(kappa1: float = 32.0, kappa2: float = 28.0,
                    background: float = 15.0) -> ConductivityField:
    """Two-disk benchmark field: disks of radius 0.1 at (0.3, 0.3) and
    (0.7, 0.3) in the 1.0 x 0.6 rectangle."""
    return ConductivityField(background=background, inclusions=(
        ((0.3, 0.3), 0.1, kappa1),
        ((0.7, 0.3), 0.1, kappa2),
    ))


def reference_problem(resolution: int = 32) -> HeatProblem:
    return HeatProblem(resolution=resolution)


def default_observation_points() -> np.ndarray:
    """Ten measurement locations on a jittered 5 x 2 grid (fixed jitter
    from seed 0).

    The rows at y = 0.15 and 0.45 stay clear of the inclusion band
    y in [0.2, 0.4], where the conductivity jump concentrates the
    discretization error of coarse meshes.
    """
    xs = np.linspace(0.1, 0.9, 5)
    ys = np.array([0.15, 0.45])
    grid = np.array([(x, y) for y in ys for x in xs])
    jitter = np.random.default_rng(0).uniform(-0.03, 0.03, size=grid.shape)
    return grid + jitter


def solution_to_csv(solution: NodalSolution, path) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,u\n")
        for (x, y), u in zip(solution.mesh.nodes, solution.values):
            fh.write(f"{x!r},{y!r},{u!r}\n")


def mesh_to_csv(mesh: Mesh, nodes_path, elements_path) -> None:
    with open(nodes_path, "w") as fh:
        fh.write("x,y\n")
        for x, y in mesh.nodes:
            fh.write(f"{x!r},{y!r}\n")
    with open(elements_path, "w") as fh:
        fh.write("n1,n2,n3,label\n")
        for (a, b, c), lab in zip(mesh.triangles, mesh.labels):
            fh.write(f"{a},{b},{c},{lab}\n")


def observations_to_json(obs: Observations) -> str:
    return json.dumps({
        "points": [[float(x), float(y)] for x, y in obs.points],
        "values": [float(v) for v in obs.values],
        "noise_level": float(obs.noise_level),
    })
