from dataclasses import replace

import numpy as np
import pytest

from smtpcps.controller import (ControllableFamily, CostId, SwitchingPolicy, TerminalGain, check_family_matches,
                                feasible_interval, is_robust_invariant, load_family, mrpi, one_step_controllable, phi,
                                save_family, set_index, solve_control, verify_family)
from smtpcps.dynamics import LinearModel, UncertainModel
from smtpcps.errors import (CacheError, ContractViolation, ErosionEmptyError, InfeasibleStateError,
                            InternalInconsistencyError, NonContractiveError)
from smtpcps.geometry import Polytope, Tolerance
from smtpcps.verification import check_closed_loop
from tests.conftest import make_family


def random_states_in(fam, rng, count):
    """Uniform samples of T_N by rejection from its bounding box."""
    target = fam.sets[-1]
    lo, hi = target.vertices.min(axis=0), target.vertices.max(axis=0)
    out = []
    while len(out) < count:
        x = rng.uniform(lo, hi)
        if target.contains(x):
            out.append(x)
    return out


class TestMRPI:

    def test_deadbeat_gives_disturbance_set(self):
        d_c = Polytope.symmetric_box(0.12)
        result = mrpi(np.zeros((2, 2)), d_c, 0.05)
        assert result.same_vertices(d_c, atol=1e-15)

    def test_scalar_geometric_series(self):
        result = mrpi([[0.5]], Polytope.interval(-1, 1), 0.01)
        assert result.is_subset(Polytope.interval(-2.03, 2.03))
        assert Polytope.interval(-2, 2).is_subset(result)

    def test_reference_terminal_set_is_invariant(self, reference_family):
        a_k = reference_family.gain.closed_loop(reference_family.model)
        assert is_robust_invariant(reference_family.sets[0], a_k, reference_family.model.disturbance)

    def test_non_contractive(self):
        with pytest.raises(NonContractiveError):
            mrpi([[1.0]], Polytope.interval(-1, 1), 0.05, max_iter=10)

    def test_alpha_max_range(self):
        with pytest.raises(ContractViolation):
            mrpi([[0.5]], Polytope.interval(-1, 1), 1.0)


class TestOneStep:

    def test_identity_dynamics_widen_along_b(self):
        mc = UncertainModel(LinearModel(np.eye(2), [1.0, 0.0]), Polytope.singleton([0, 0]))
        result = one_step_controllable(Polytope.symmetric_box(1.0), mc, Polytope.interval(-1, 1))
        lower, upper = result.as_box()
        np.testing.assert_allclose(lower, [-2, -1], atol=1e-9)
        np.testing.assert_allclose(upper, [2, 1], atol=1e-9)

    def test_over_erosion(self, reference_config):
        with pytest.raises(ErosionEmptyError):
            one_step_controllable(Polytope.symmetric_box(0.1), reference_config.controller_model(),
                                  reference_config.input_set())

    def test_grid_oracle(self, reference_family, rng):
        fam = reference_family
        model = fam.model.model
        t1, target = fam.sets[1], fam.eroded[0]
        grid = np.linspace(-fam.u_max, fam.u_max, 2001)
        lo, hi = t1.vertices.min(axis=0) - 0.2, t1.vertices.max(axis=0) + 0.2
        agree = 0
        for _ in range(1000):
            x = rng.uniform(lo, hi)
            successors = (model.A @ x)[None, :] + grid[:, None] * model.B[:, 0][None, :]
            slack = target.normals @ successors.T - target.offsets[:, None]
            found = bool(np.any(np.all(slack <= 1e-9, axis=0)))
            agree += found == t1.contains(x)
        assert agree / 1000 >= 0.99


class TestFamily:

    def test_single_step_family(self, reference_config):
        fam = make_family(replace(reference_config, N=1))
        assert len(fam.sets) == 2 and len(fam.eroded) == 1
        assert fam.sets[0].is_subset(fam.sets[1])

    def test_reference_family(self, reference_family):
        assert reference_family.N == 250
        assert len(reference_family.sets) == 251
        assert len(reference_family.eroded) == 250
        assert all(verify_family(reference_family).values())
        k = reference_family.gain.K[0]
        assert reference_family.sets[0].support(k) <= 6 and reference_family.sets[0].support(-k) <= 6

    def test_cache_restores_sets_exactly(self, small_family, small_config, tmp_path):
        path = str(tmp_path / "family.ctrlfam")
        save_family(small_family, path)
        loaded = load_family(path, small_config.controller_model())
        assert loaded.N == small_family.N
        assert loaded.u_max == small_family.u_max
        np.testing.assert_array_equal(loaded.gain.K, small_family.gain.K)
        for a, b in zip(loaded.sets + loaded.eroded, small_family.sets + small_family.eroded):
            np.testing.assert_array_equal(a.vertices, b.vertices)
            np.testing.assert_array_equal(a.normals, b.normals)
            np.testing.assert_array_equal(a.offsets, b.offsets)

    def test_tampered_cache(self, small_family, small_config, tmp_path):
        path = tmp_path / "family.ctrlfam"
        save_family(small_family, str(path))
        lines = path.read_text().splitlines()
        row = lines[3]
        pos = next(i for i, c in enumerate(row) if c.isdigit())
        lines[3] = row[:pos] + ("7" if row[pos] != "7" else "3") + row[pos + 1:]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CacheError):
            load_family(str(path), small_config.controller_model())

    def test_truncated_cache(self, small_family, small_config, tmp_path):
        path = tmp_path / "family.ctrlfam"
        save_family(small_family, str(path))
        path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
        with pytest.raises(CacheError):
            load_family(str(path), small_config.controller_model())

    def test_cache_matches_its_configuration(self, small_family, small_config, tmp_path):
        path = str(tmp_path / "family.ctrlfam")
        save_family(small_family, path)
        cfg = small_config
        check_family_matches(load_family(path, cfg.controller_model()), cfg.gain(), cfg.input_set(), cfg.N,
                             cfg.alpha_max, cfg.tolerance())

    @pytest.mark.parametrize("changes", [dict(controller_bound=0.2), dict(controller_bound=0.11), dict(N=20),
                                         dict(alpha_max=0.1), dict(u_max=5.0),
                                         dict(A=(1.0, 0.0975, 0.0, 0.95))])
    def test_cache_for_other_configuration(self, small_family, small_config, tmp_path, changes):
        path = str(tmp_path / "family.ctrlfam")
        save_family(small_family, path)
        cfg = replace(small_config, **changes)
        with pytest.raises(CacheError, match="another configuration"):
            check_family_matches(load_family(path, cfg.controller_model()), cfg.gain(), cfg.input_set(), cfg.N,
                                 cfg.alpha_max, cfg.tolerance())

    def test_open_loop_gain_is_rejected(self, reference_config):
        with pytest.raises(NonContractiveError):
            TerminalGain(np.zeros((1, 2))).check(reference_config.controller_model())


class TestOnlineControl:

    def test_set_index(self, reference_family, rng):
        fam = reference_family
        assert set_index([0, 0], fam) == 0
        with pytest.raises(InfeasibleStateError):
            set_index([1e3, 1e3], fam)
        for x in random_states_in(fam, rng, 200):
            linear = next(i for i, t in enumerate(fam.sets) if t.contains(x))
            assert set_index(x, fam) == linear

    def test_terminal_branch(self, reference_family):
        x = np.array([0.1, 0.0])
        assert set_index(x, reference_family) == 0
        assert solve_control(x, reference_family, CostId.MIN_DISTANCE) == pytest.approx(-1.327)
        assert phi(x, 0, reference_family) == phi(x, 1, reference_family) == pytest.approx(-1.327)

    def test_min_effort_prefers_zero(self, reference_family, rng):
        found = 0
        for x in random_states_in(reference_family, rng, 300):
            index = set_index(x, reference_family)
            if index == 0:
                continue
            lo, hi = feasible_interval(x, reference_family, index)
            if lo <= 0 <= hi:
                found += 1
                assert solve_control(x, reference_family, CostId.MIN_EFFORT) == 0.0
        assert found > 0

    def test_phi_matches_policy(self, reference_family, rng):
        policy = SwitchingPolicy(reference_family)
        for x in random_states_in(reference_family, rng, 50):
            u0, u1 = policy.inputs(x)
            assert u0 == phi(x, 0, reference_family) == solve_control(x, reference_family, CostId.MIN_DISTANCE)
            assert u1 == phi(x, 1, reference_family) == solve_control(x, reference_family, CostId.MIN_EFFORT)
            assert policy(x, 0) == u0 and policy(x, 1) == u1
            assert abs(u0) <= 6 and abs(u1) <= 6

    @pytest.mark.parametrize("cost", [CostId.MIN_DISTANCE, CostId.MIN_EFFORT])
    def test_grid_search_oracle(self, reference_family, rng, cost):
        fam = reference_family
        model = fam.model.model
        checked = 0
        while checked < 1000:
            x = random_states_in(fam, rng, 1)[0]
            index = set_index(x, fam)
            if index == 0:
                continue
            lo, hi = feasible_interval(x, fam, index)
            grid = np.linspace(lo, hi, 10_000)
            if cost is CostId.MIN_DISTANCE:
                nxt = (model.A @ x)[None, :] + grid[:, None] * model.B[:, 0][None, :]
                j_grid = float(np.min(np.sum(nxt ** 2, axis=1)))
            else:
                j_grid = float(np.min(grid ** 2))
            j_star = cost.evaluate(fam.model, x, solve_control(x, fam, cost, index=index))
            assert j_star <= j_grid + 1e-9
            assert j_grid - j_star <= 1e-6
            checked += 1

    def test_flat_rows_use_the_configured_tolerance(self):
        # rows with normal (1, 0) do not depend on u for B = (0, 1)
        box = Polytope.symmetric_box(1.0)
        mc = UncertainModel(LinearModel(np.eye(2), [0.0, 1.0]), Polytope.symmetric_box(0.1))
        fam = ControllableFamily(sets=(box, box), eroded=(box,), gain=TerminalGain(np.zeros((1, 2))),
                                 input_set=Polytope.interval(-6, 6), model=mc, alpha_max=0.05)
        x = np.array([1 + 5e-7, 0.0])
        loose = Tolerance(cert_eps=1e-6)
        lo, hi = feasible_interval(x, fam, 1)
        assert lo > hi
        assert feasible_interval(x, fam, 1, loose) == pytest.approx((-1.0, 1.0))
        assert solve_control(x, fam, CostId.MIN_EFFORT, loose, index=1) == 0.0
        with pytest.raises(InternalInconsistencyError):
            solve_control(x, fam, CostId.MIN_EFFORT, index=1)

    def test_successor_stays_in_lower_set(self, reference_family, rng):
        fam = reference_family
        loose = Tolerance(geom_eps=1e-7)
        for x in random_states_in(fam, rng, 200):
            index = set_index(x, fam)
            u = solve_control(x, fam, CostId.MIN_DISTANCE)
            assert fam.model.reach(x, u).is_subset(fam.sets[max(index - 1, 0)], loose)

    def test_closed_loop_certificates(self, reference_config, reference_family, reference_x0):
        results = check_closed_loop(reference_config, reference_family, reference_x0, seeds=20)
        assert all(r.passed for r in results), [str(r) for r in results]
