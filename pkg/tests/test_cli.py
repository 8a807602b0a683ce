import subprocess
import sys

import pytest

from smcr import io as sio
from smcr.cli import main
from smcr.planner import PLANNER_NAMES
from smcr.roadmap import GoalSpec, roadmap_from_graph
from builders import abstract_scene

TINY_BENCH = """
scenarios = narrow-passage
ks = 2
levels = 1, 3
roadmaps_per_gt = 2
n_samples = 200
"""


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    assert main(["gen-scene", "--scenario", "narrow-passage", "--k", "3", "--level", "3", "--seed", "1",
                 "--out", str(d / "scene.json"), "--gt-out", str(d / "gt.json")]) == 0
    assert main(["build-roadmap", "--scene", str(d / "scene.json"), "--samples", "300",
                 "--out", str(d / "rm.json")]) == 0
    return d


class TestPipeline:
    def test_plan_osp(self, pipeline, capsys):
        d = pipeline
        code = main(["plan", "--roadmap", str(d / "rm.json"), "--scene", str(d / "scene.json"),
                     "--planner", "osp", "--out", str(d / "osp.json")])
        assert code == 0 and sio.load(d / "osp.json")["kind"] == "plan"
        out = capsys.readouterr().out
        for field in ("S ", "reach", "succ", "labels", "cost"):
            assert field in out

    def test_exec_and_validate(self, pipeline, capsys):
        d = pipeline
        assert main(["plan", "--roadmap", str(d / "rm.json"), "--scene", str(d / "scene.json"),
                     "--planner", "max-success-exact", "--out", str(d / "mse.json")]) == 0
        assert main(["exec", "--plan", str(d / "mse.json"), "--gt", str(d / "gt.json"),
                     "--out", str(d / "outcome.json")]) == 0
        assert sio.load(d / "outcome.json")["kind"] == "outcome"
        assert main(["validate", "--plan", str(d / "mse.json"), "--scene", str(d / "scene.json"),
                     "--samples", "20000", "--out", str(d / "mc.json")]) == 0
        assert sio.load(d / "mc.json")["agrees"]
        capsys.readouterr()


class TestExitCodes:
    def test_no_solution(self, tmp_path, capsys):
        rm = roadmap_from_graph(2, [(0, 1, [(1, 0)])], 0, [GoalSpec(1, {0})])
        sio.save(sio.roadmap_to(rm), tmp_path / "rm.json")
        sio.save(sio.belief_to(abstract_scene({1: [1.0]})), tmp_path / "scene.json")
        code = main(["plan", "--roadmap", str(tmp_path / "rm.json"), "--scene", str(tmp_path / "scene.json"),
                     "--planner", "max-success-exact"])
        assert code == 1
        assert "no solution" in capsys.readouterr().err

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["plan", "--frobnicate"])
        assert exc.value.code == 2

    def test_missing_option(self, capsys):
        assert main(["plan", "--planner", "osp"]) == 2
        assert "--roadmap" in capsys.readouterr().err

    def test_wrong_document_kind(self, pipeline, capsys):
        d = pipeline
        assert main(["plan", "--roadmap", str(d / "scene.json"), "--scene", str(d / "scene.json"),
                     "--planner", "osp"]) == 2

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "smcr", "bench", "--bogus"], capture_output=True, text=True)
        assert r.returncode == 2


class TestBenchAndReduce:
    def test_bench_deterministic(self, tmp_path):
        cfg = tmp_path / "bench.cfg"
        cfg.write_text(TINY_BENCH)
        for name in ("a", "b"):
            assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        for f in ("metrics.csv", "trials.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        assert len((tmp_path / "a" / "metrics.csv").read_text().splitlines()) == 1 + 2 * len(PLANNER_NAMES)

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "bench.cfg"
        cfg.write_text("ks = 9\n")
        assert main(["bench", "--config", str(cfg)]) == 2

    def test_reduce_check(self, tmp_path, capsys):
        assert main(["reduce-check", "--seed", "4", "--xi", "0.2", "0.5", "--out", str(tmp_path / "r.json")]) == 0
        assert len(sio.load(tmp_path / "r.json")["reports"]) == 2
        assert capsys.readouterr().out.count("agrees=True") == 2
