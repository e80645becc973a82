import json
import math

import numpy as np
import pytest

from qsle import fem2d
from qsle.fem2d import (ConductivityField, ForwardMap, HeatProblem, build_mesh,
                        default_observation_points, make_synthetic_data,
                        observations_to_json, reference_field,
                        reference_problem, solve)


def harmonic_problem(resolution=16):
    """Uniform-conductivity problem with the harmonic solution
    u = cos(pi x) cosh(pi y); the flux datum vanishes on all three
    non-Dirichlet edges."""
    g = lambda x, y: math.cos(math.pi * x) * math.cosh(math.pi * y)
    return HeatProblem(dirichlet=g, neumann=lambda x, y: 0.0,
                       resolution=resolution), g


def l2_error(solution, exact_fn):
    mesh = solution.mesh
    exact = np.array([exact_fn(x, y) for x, y in mesh.nodes])
    diff = solution.values - exact
    return math.sqrt(float(np.sum(mesh.areas()
                                  * np.mean(diff[mesh.triangles] ** 2, axis=1))))


class TestConductivityField:
    def test_validation(self):
        with pytest.raises(ValueError):
            ConductivityField(background=0.0)
        with pytest.raises(ValueError):
            ConductivityField(background=1.0,
                              inclusions=(((0.3, 0.3), 0.1, -2.0),))
        with pytest.raises(ValueError):
            ConductivityField(background=1.0, inclusions=(
                ((0.3, 0.3), 0.1, 1.0), ((0.35, 0.3), 0.1, 1.0)))

    def test_kappas_and_update(self):
        fld = reference_field(32.0, 28.0)
        assert np.allclose(fld.kappas(), [15.0, 32.0, 28.0])
        new = fld.with_kappas([40.0, 20.0])
        assert np.allclose(new.kappas(), [15.0, 40.0, 20.0])
        assert np.allclose(fld.kappas(), [15.0, 32.0, 28.0])


class TestMesh:
    def test_plain_grid_counts_and_euler(self):
        mesh = build_mesh(reference_problem(), resolution=16)
        nx, ny = mesh.nx, mesh.ny
        assert len(mesh.nodes) == (nx + 1) * (ny + 1)
        assert len(mesh.triangles) == 2 * nx * ny
        edges = set()
        for tri in mesh.triangles:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                edges.add(frozenset((tri[a], tri[b])))
        # V - E + F = 2 counting the outer face
        assert len(mesh.nodes) - len(edges) + len(mesh.triangles) + 1 == 2

    def test_region_labels_match_centroids(self):
        geometry = tuple((c, r) for c, r, _ in reference_field().inclusions)
        mesh = build_mesh(reference_problem(), resolution=32,
                          inclusions=geometry)
        centroids = mesh.nodes[mesh.triangles].mean(axis=1)
        for k, (center, radius) in enumerate(geometry):
            inside = np.hypot(*(centroids - np.asarray(center)).T) <= radius
            assert np.all(mesh.labels[inside] == k + 1)
            assert np.all(mesh.labels[~inside & (mesh.labels == k + 1)] == 0)

    def test_label_areas_approximate_disks(self):
        geometry = tuple((c, r) for c, r, _ in reference_field().inclusions)
        mesh = build_mesh(reference_problem(), resolution=64,
                          inclusions=geometry)
        areas = mesh.areas()
        for k in (1, 2):
            region = float(np.sum(areas[mesh.labels == k]))
            assert region == pytest.approx(math.pi * 0.1**2, rel=5e-3)

    def test_refinement_scales_elements(self):
        coarse = build_mesh(reference_problem(), resolution=16)
        fine = build_mesh(reference_problem(), resolution=32)
        ratio = len(fine.triangles) / len(coarse.triangles)
        assert 3.5 <= ratio <= 4.5

    def test_all_areas_positive(self):
        geometry = tuple((c, r) for c, r, _ in reference_field().inclusions)
        for res in (16, 32):
            mesh = build_mesh(reference_problem(), resolution=res,
                              inclusions=geometry)
            assert np.all(mesh.areas() > 0.0)

    def test_boundary_classification(self):
        mesh = build_mesh(reference_problem(), resolution=16)
        assert np.allclose(mesh.nodes[mesh.dirichlet_nodes][:, 1], 0.6)
        for a, b in mesh.neumann_edges:
            pa, pb = mesh.nodes[a], mesh.nodes[b]
            on_bottom = pa[1] == 0.0 and pb[1] == 0.0
            on_side = (pa[0] == pb[0]) and pa[0] in (0.0, 1.0)
            assert on_bottom or on_side

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            build_mesh(reference_problem(), resolution=4)

    def test_inclusion_boundary_collision(self):
        with pytest.raises(ValueError):
            build_mesh(reference_problem(), resolution=16,
                       inclusions=(((0.05, 0.3), 0.1),))


class TestSolve:
    def test_linear_profile_reproduced(self):
        # the exact solution is linear, so P1 elements reproduce it to
        # solver precision on any conforming mesh
        fld = reference_field(15.0, 15.0)
        for res in (16, 32):
            sol = solve(reference_problem(), fld, resolution=res)
            exact = 200.0 + (2000.0 / 15.0) * (sol.mesh.nodes[:, 1] - 0.6)
            assert np.max(np.abs(sol.values - exact)) < 1e-8

    def test_constant_state_zero_flux(self):
        prob = HeatProblem(dirichlet=200.0, neumann=lambda x, y: 0.0,
                           resolution=16)
        sol = solve(prob, reference_field(37.0, 5.0), resolution=16)
        assert np.max(np.abs(sol.values - 200.0)) < 1e-9

    def test_harmonic_convergence_order(self):
        errs = []
        for res in (16, 32, 64):
            prob, g = harmonic_problem(res)
            sol = solve(prob, ConductivityField(background=15.0),
                        resolution=res)
            errs.append(l2_error(sol, g))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(1.8 <= o <= 2.2 for o in orders)

    def test_reference_solution_shape(self):
        sol = solve(reference_problem(), reference_field(), resolution=32)
        mesh = sol.mesh
        # monotone in y away from the inclusions (x near the left wall)
        column = np.where(np.abs(mesh.nodes[:, 0] - 0.0) < 1e-12)[0]
        order = column[np.argsort(mesh.nodes[column, 1])]
        assert np.all(np.diff(sol.values[order]) > 0)
        # inclusions perturb the field relative to the uniform solution
        uniform = 200.0 + (2000.0 / 15.0) * (mesh.nodes[:, 1] - 0.6)
        assert np.max(np.abs(sol.values - uniform)) > 1.0

    def test_stiffness_spd_after_elimination(self):
        from qsle.fem2d import _ReducedSystem

        mesh = build_mesh(reference_problem(), resolution=8)
        system = _ReducedSystem(mesh, reference_problem())
        k = (15.0 * system.k_ff[0]).toarray()
        assert np.allclose(k, k.T, atol=1e-12)
        np.linalg.cholesky(k)  # raises if not positive definite

    def test_missing_dirichlet_rejected(self):
        from qsle.fem2d import _ReducedSystem

        mesh = build_mesh(reference_problem(), resolution=8)
        broken = fem2d.Mesh(nodes=mesh.nodes, triangles=mesh.triangles,
                            labels=mesh.labels,
                            dirichlet_nodes=np.array([], dtype=int),
                            neumann_edges=mesh.neumann_edges,
                            nx=mesh.nx, ny=mesh.ny, hx=mesh.hx, hy=mesh.hy)
        with pytest.raises(ValueError):
            _ReducedSystem(broken, reference_problem())


class TestForwardMap:
    def test_uniform_matches_linear_profile(self):
        pts = default_observation_points()
        fm = ForwardMap(reference_problem(), pts, reference_field(),
                        resolution=32)
        vals = fm((15.0, 15.0))
        exact = 200.0 + (2000.0 / 15.0) * (pts[:, 1] - 0.6)
        assert np.max(np.abs(vals - exact)) < 1e-8

    def test_lipschitz_smoke(self):
        pts = default_observation_points()
        fm = ForwardMap(reference_problem(), pts, reference_field(),
                        resolution=16)
        base = fm((32.0, 28.0))
        bumped = fm((32.0 + 1e-6, 28.0))
        assert np.max(np.abs(bumped - base)) < 1e-5
        assert np.max(np.abs(bumped - base)) > 0.0

    def test_monotone_response_no_jumps(self):
        pts = default_observation_points()
        fm = ForwardMap(reference_problem(), pts, reference_field(),
                        resolution=16)
        kappas = np.arange(30.0, 34.0, 1e-1)
        vals = np.stack([fm((k, 28.0)) for k in kappas])
        diffs = np.abs(np.diff(vals, axis=0))
        typical = np.median(diffs, axis=0) + 1e-12
        assert np.all(diffs <= 10.0 * typical)

    def test_point_outside_rejected(self):
        with pytest.raises(ValueError):
            ForwardMap(reference_problem(), np.array([[1.5, 0.3]]),
                       reference_field(), resolution=16)

    def test_kappa_validation(self):
        pts = default_observation_points()
        fm = ForwardMap(reference_problem(), pts, reference_field(),
                        resolution=16)
        with pytest.raises(ValueError):
            fm((-1.0, 28.0))

    def test_batch_and_repeat_consistency(self):
        pts = default_observation_points()
        fm = ForwardMap(reference_problem(), pts, reference_field(),
                        resolution=16)
        single = fm((32.0, 28.0))
        again = fm((32.0, 28.0))
        batch = fm(np.array([[32.0, 28.0], [30.0, 25.0]]))
        assert np.array_equal(single, again)
        assert np.array_equal(batch[0], single)


class TestSyntheticData:
    def test_noise_free_roundtrip(self):
        prob = reference_problem(16)
        truth = reference_field()
        pts = default_observation_points()
        obs = make_synthetic_data(prob, truth, pts, 0.0, seed=0)
        fm_fine = ForwardMap(prob, pts, truth, resolution=32)
        assert np.array_equal(obs.values, fm_fine((32.0, 28.0)))

    def test_zero_misfit_at_truth_same_mesh(self):
        prob = reference_problem(16)
        truth = reference_field()
        pts = default_observation_points()
        fm_fine = ForwardMap(prob, pts, truth, resolution=32)
        obs = make_synthetic_data(prob, truth, pts, 0.0, seed=0)
        assert np.sum((fm_fine((32.0, 28.0)) - obs.values) ** 2) == 0.0

    def test_noise_magnitude_and_seeding(self):
        prob = reference_problem(16)
        truth = reference_field()
        pts = default_observation_points()
        clean = make_synthetic_data(prob, truth, pts, 0.0, seed=1)
        noisy = make_synthetic_data(prob, truth, pts, 0.1, seed=1)
        again = make_synthetic_data(prob, truth, pts, 0.1, seed=1)
        diff = noisy.values - clean.values
        assert np.max(np.abs(diff)) <= 0.5  # 5 sigma at delta = 0.1
        assert np.max(np.abs(diff)) > 0.0
        assert np.array_equal(noisy.values, again.values)

    def test_negative_delta_rejected(self):
        with pytest.raises(ValueError):
            make_synthetic_data(reference_problem(16), reference_field(),
                                default_observation_points(), -0.1, seed=0)


class TestExports:
    def test_solution_and_mesh_csv(self, tmp_path):
        sol = solve(reference_problem(), reference_field(), resolution=16)
        fem2d.solution_to_csv(sol, tmp_path / "sol.csv")
        fem2d.mesh_to_csv(sol.mesh, tmp_path / "nodes.csv",
                          tmp_path / "elems.csv")
        assert (tmp_path / "sol.csv").read_text().splitlines()[0] == "x,y,u"
        elems = (tmp_path / "elems.csv").read_text().splitlines()
        assert elems[0] == "n1,n2,n3,label"
        assert len(elems) == 1 + len(sol.mesh.triangles)

    def test_observation_json(self):
        obs = make_synthetic_data(reference_problem(16), reference_field(),
                                  default_observation_points(), 0.1, seed=2)
        payload = json.loads(observations_to_json(obs))
        assert payload["noise_level"] == 0.1
        assert len(payload["points"]) == 10
        assert len(payload["values"]) == 10
