import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from builders import shared_routes
from smcr.evaluation import (BenchmarkConfig, MCRInstance, brute_force_mcr, child_seed, clopper_pearson,
                             execute_path, monte_carlo_success, random_mcr_instance, reduction_check,
                             run_benchmark)
from smcr.geometry import Disc, DiscRobot, Placement, Polygon, Pose2
from smcr.planner import PLANNER_NAMES, PlanResult, max_success_exact
from smcr.scene import BeliefScene, GroundTruthScene, Hypothesis, ObjectBelief, TrueObject

ROBOT = DiscRobot(0.5)
TOL = (0.2, math.radians(30))


def _gt(target_xy=(10.0, 0.0), others=()):
    objs = [TrueObject(0, Disc(0.3), Pose2(*target_xy))]
    objs += [TrueObject(i + 1, Disc(0.5), Pose2(x, y)) for i, (x, y) in enumerate(others)]
    return GroundTruthScene((), tuple(objs), 0)


class TestExecutePath:
    def test_clear_path_reaches(self):
        out = execute_path([[0, 0], [10, 0]], ROBOT, _gt(), tolerance=TOL, count_target=False)
        assert out.success and out.reached_target and out.num_collided == 0
        assert out.path_cost == pytest.approx(10.0)

    def test_one_collision(self):
        out = execute_path([[0, 0], [10, 0]], ROBOT, _gt(others=[(5, 0.5), (5, 5)]), tolerance=TOL,
                           count_target=False)
        assert out.collided == {1} and not out.success and out.reached_target

    def test_wrong_hypothesis_fails_without_collision(self):
        out = execute_path([[0, 0], [10, 0]], ROBOT, _gt(target_xy=(10, 3)), tolerance=TOL)
        assert out.num_collided == 0 and not out.reached_target and not out.success

    def test_target_counted_when_clipped(self):
        gt = _gt(target_xy=(5, 0.4))
        assert execute_path([[0, 0], [10, 0]], ROBOT, gt, tolerance=TOL).collided == {0}
        assert execute_path([[0, 0], [10, 0]], ROBOT, gt, tolerance=TOL, count_target=False).num_collided == 0

    def test_each_object_counted_once(self):
        out = execute_path([[0, 0], [10, 0], [0, 0.1]], ROBOT, _gt(others=[(5, 0)]), tolerance=TOL,
                           count_target=False)
        assert out.num_collided == 1

    def test_static_obstacles_ignored(self):
        gt = GroundTruthScene((Placement(Polygon.box(1, 1), Pose2(5, 0)),), (TrueObject(0, Disc(0.3), Pose2(10, 0)),), 0)
        assert execute_path([[0, 0], [10, 0]], ROBOT, gt, tolerance=TOL, count_target=False).success

    def test_empty_path_rejected(self):
        with pytest.raises(ValueError):
            execute_path(np.zeros((0, 2)), ROBOT, _gt())


def _plan_through(configs, succ):
    return PlanResult("test", list(range(len(configs))), np.asarray(configs, float), set(), succ, 1.0, succ,
                      0.0, None, {})


class TestMonteCarlo:
    def _scene(self, blocker_prob):
        # the grasp frame sits one unit in front of the target, so the goal itself is clear
        t = ObjectBelief(0, Disc(0.3), 1.0, (Hypothesis(Pose2(11, 0), 1.0),))
        o = ObjectBelief(1, Disc(0.5), blocker_prob, (Hypothesis(Pose2(5, 0), blocker_prob),)) \
            if blocker_prob > 0 else ObjectBelief(1, Disc(0.5), 0.0, ())
        return BeliefScene((), (t, o), 0, Pose2(-1, 0, 0))

    def test_certain_success(self):
        rep = monte_carlo_success(_plan_through([[0, 0], [10, 0]], 1.0), self._scene(0.0), ROBOT, 500, 0,
                                  tolerance=TOL)
        assert rep.successes == 500 and rep.agrees

    def test_certain_failure(self):
        rep = monte_carlo_success(_plan_through([[0, 0], [10, 0]], 0.0), self._scene(1.0), ROBOT, 500, 0,
                                  tolerance=TOL)
        assert rep.successes == 0 and rep.agrees

    def test_partial_blocker(self):
        rep = monte_carlo_success(_plan_through([[0, 0], [10, 0]], 0.6), self._scene(0.4), ROBOT, 20_000, 5,
                                  tolerance=TOL)
        assert rep.agrees

    def test_trials_positive(self):
        with pytest.raises(ValueError):
            monte_carlo_success(_plan_through([[0, 0], [10, 0]], 1.0), self._scene(0.0), ROBOT, 0, 0)


class TestClopperPearson:
    def test_extremes(self):
        assert clopper_pearson(0, 100)[0] == 0.0
        assert clopper_pearson(100, 100)[1] == 1.0

    def test_zero_successes_upper(self):
        # closed form at k = 0: 1 - (alpha/2)^(1/n)
        assert clopper_pearson(0, 50)[1] == pytest.approx(1 - 0.005 ** (1 / 50))

    @given(st.integers(1, 2000), st.floats(0, 1))
    def test_contains_estimate(self, n, frac):
        k = int(frac * n)
        lo, hi = clopper_pearson(k, n)
        assert 0.0 <= lo <= k / n <= hi <= 1.0

    def test_narrower_with_more_trials(self):
        a = clopper_pearson(50, 100)
        b = clopper_pearson(5000, 10_000)
        assert b[1] - b[0] < a[1] - a[0]


class TestBenchmarkConfig:
    def test_defaults(self):
        cfg = BenchmarkConfig()
        assert cfg.ks == (1, 4, 7) and cfg.levels == (1, 4, 7) and cfg.n_samples == 1000
        assert cfg.planners == PLANNER_NAMES

    def test_from_text(self):
        cfg = BenchmarkConfig.from_text("""
            # tiny
            scenarios = clutter
            ks = 2, 3
            levels = 5
            roadmaps-per-gt = 2
            n_samples = 150
            audit = yes
            grasp_tolerance = 1.0, 20
        """)
        assert cfg.scenarios == ("clutter",) and cfg.ks == (2, 3) and cfg.levels == (5,)
        assert cfg.roadmaps_per_gt == 2 and cfg.n_samples == 150 and cfg.audit
        assert cfg.grasp_tolerance == pytest.approx((1.0, math.radians(20)))

    @pytest.mark.parametrize("text", ["ks = 8", "levels = 0", "planners = astar", "bogus = 1",
                                      "no equals sign", "audit = maybe", "roadmaps_per_gt = 0"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            BenchmarkConfig.from_text(text)


class TestSeeds:
    def test_stable_and_distinct(self):
        a = np.random.default_rng(child_seed(0, "belief", "clutter", 4, 1, 0)).random()
        b = np.random.default_rng(child_seed(0, "belief", "clutter", 4, 1, 0)).random()
        c = np.random.default_rng(child_seed(0, "belief", "clutter", 4, 1, 1)).random()
        assert a == b != c


@pytest.fixture(scope="module")
def tiny_bench():
    cfg = BenchmarkConfig(scenarios=("clutter",), ks=(1, 3), levels=(2,), roadmaps_per_gt=2, n_samples=250,
                          audit=True)
    return cfg, run_benchmark(cfg)


class TestBenchmark:
    def test_one_row_per_planner_and_cell(self, tiny_bench):
        cfg, res = tiny_bench
        assert len(res.rows) == 2 * len(PLANNER_NAMES)
        assert len(res.trials) == 2 * 2 * len(PLANNER_NAMES)
        assert all(r.trials == 2 for r in res.rows)

    def test_csv_layout(self, tiny_bench):
        lines = tiny_bench[1].metrics_csv().splitlines()
        assert lines[0].split(",")[:4] == ["planner", "scenario", "K", "level"]
        assert len(lines) == 1 + len(tiny_bench[1].rows)
        assert all(line.endswith(",") for line in lines[1:])  # timing column left empty

    def test_trials_audited_and_normalized(self, tiny_bench):
        for t in tiny_bench[1].trials:
            assert t.belief_norm_error <= 1e-9
            if t.planner.startswith("max-success") and t.solved:
                assert t.records_audited > 0

    def test_parallel_matches_serial(self, tiny_bench):
        cfg, res = tiny_bench
        assert run_benchmark(cfg, jobs=2).metrics_csv() == res.metrics_csv()

    def test_success_rates_in_range(self, tiny_bench):
        for r in tiny_bench[1].rows:
            assert 0.0 <= r.success_rate <= 1.0
            assert r.failures <= r.trials


def test_single_cell_six_rows():
    cfg = BenchmarkConfig(scenarios=("arch",), ks=(4,), levels=(4,), roadmaps_per_gt=5, n_samples=300)
    rows = run_benchmark(cfg).rows
    assert [r.planner for r in rows] == list(PLANNER_NAMES)
    assert all(r.trials == 5 for r in rows)


class TestReduction:
    def test_label_free_path(self):
        inst = MCRInstance(3, ((0, 1, frozenset()), (1, 2, frozenset({1}))), 0, 1, 0, (1,))
        rep = reduction_check(inst, 0.3)
        assert rep.m == 0 and rep.succ == pytest.approx(0.3, abs=1e-12) and rep.agrees

    def test_all_paths_cross_target(self):
        inst = MCRInstance(3, ((0, 1, frozenset({0})), (1, 2, frozenset())), 0, 2, 0, (1,))
        rep = reduction_check(inst, 0.5)
        assert not rep.solvable and rep.m_bruteforce is None and rep.agrees

    def test_two_obstacles(self):
        inst = MCRInstance(4, ((0, 1, frozenset({1, 2})), (1, 3, frozenset({2})), (0, 2, frozenset({1, 2, 3})),
                               (2, 3, frozenset())), 0, 3, 0, (1, 2, 3))
        rep = reduction_check(inst, 0.2)
        assert rep.m == 2 and rep.succ == pytest.approx(0.8 ** 2 * 0.2, abs=1e-12) and rep.agrees

    def test_xi_range(self):
        with pytest.raises(ValueError):
            reduction_check(random_mcr_instance(0), 1.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_brute_force_matches_oracle(self, seed):
        inst = random_mcr_instance(seed, n_nodes=8)
        probs = {o: [0.5] for o in (inst.target, *inst.objects)}
        o_inst = oracles.Instance(inst.n_nodes, [(u, v, {(o, 0) for o in c}) for u, v, c in inst.edges],
                                  inst.start, {inst.goal: frozenset({0})}, probs, inst.target)
        clean = oracles.Instance(o_inst.n_nodes, [e for e in o_inst.edges if (inst.target, 0) not in e[2]],
                                 o_inst.start, o_inst.goals, probs, inst.target)
        assert brute_force_mcr(inst) == oracles.min_constraints(clean)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.2, 0.5]))
    def test_random_agree(self, seed, xi):
        assert reduction_check(random_mcr_instance(seed), xi).agrees

    def test_round_trip(self):
        inst = random_mcr_instance(3)
        assert MCRInstance.from_dict(inst.to_dict()) == inst


def test_exact_plan_on_fixture_keeps_value():
    rm, sc = shared_routes()
    assert max_success_exact(rm, sc).succ == pytest.approx(0.42, abs=1e-12)
