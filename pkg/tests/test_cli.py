import json
import pathlib

import pytest

from pcnflow.cli import (
    InfeasibleShape,
    generate_instance,
    main,
    verify_artifacts,
)
from pcnflow.model import build_instance, ChannelConstraint, instance_from_json_dict
from pcnflow.solver import circulation_to_json_dict, solve_rebalancing


def write_triangle(path: pathlib.Path, caps=(4, 4, 4)) -> pathlib.Path:
    inst = build_instance(
        ["A", "B", "C"],
        [
            ChannelConstraint("A", "B", caps[0]),
            ChannelConstraint("B", "C", caps[1]),
            ChannelConstraint("C", "A", caps[2]),
        ],
        capacity_bound=max(caps),
        weight_bound=1,
    )
    from pcnflow.model import dump_instance

    target = path / "triangle.json"
    target.write_text(dump_instance(inst))
    return target


def read(path: pathlib.Path) -> dict:
    return json.loads(path.read_text())


class TestGen:
    def test_generates_valid_instances(self):
        inst = generate_instance(3, 3, cap_max=4, weight_max=1, seed=7)
        assert inst.n == 3 and inst.m == 3

    def test_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out1, out2):
            assert main(["gen", "-n", "5", "-m", "6", "--seed", "3", "-o", str(out)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        instance_from_json_dict(read(out1))  # parses and validates

    def test_infeasible_shape(self):
        with pytest.raises(InfeasibleShape):
            generate_instance(2, 2, cap_max=1, weight_max=1, seed=0)

    def test_infeasible_shape_exit_code(self, capsys):
        assert main(["gen", "-n", "2", "-m", "2"]) == 1
        assert "error" in capsys.readouterr().err


class TestRun:
    def test_honest_triangle(self, tmp_path, capsys):
        instance = write_triangle(tmp_path)
        outdir = tmp_path / "out"
        assert main(["run", str(instance), "--outdir", str(outdir), "--seed", "1"]) == 0
        report = read(outdir / "report.json")
        assert report["objective"] == 12
        dec = read(outdir / "decomposition.json")
        assert len(dec["cycles"]) == 1
        execs = read(outdir / "executions.json")
        assert [e["status"] for e in execs] == ["completed"]
        ledger = read(outdir / "ledger.json")
        for node, channels in ledger["deltas"].items():
            assert sum(channels.values()) == 0

    def test_mpc_matches_plaintext(self, tmp_path):
        instance = write_triangle(tmp_path)
        plain_dir, mpc_dir = tmp_path / "plain", tmp_path / "mpc"
        assert main(["run", str(instance), "--outdir", str(plain_dir), "--seed", "1"]) == 0
        assert (
            main(
                ["run", str(instance), "--outdir", str(mpc_dir), "--seed", "1",
                 "--mpc", "--k", "3"]
            )
            == 0
        )
        plain = read(plain_dir / "circulation.json")
        private = read(mpc_dir / "circulation.json")
        assert plain["objective"] == private["objective"]
        assert (mpc_dir / "mpc_transcript.txt").exists()
        assert read(mpc_dir / "delegates.json")["k"] == 3

    def test_withholding_adversary_aborts_only_cycle(self, tmp_path):
        instance = write_triangle(tmp_path)
        adversary = tmp_path / "adv.json"
        # Corrupt every node: whoever is picked as initiator withholds.
        adversary.write_text(
            json.dumps(
                {"policies": {v: "withhold_preimage" for v in ("A", "B", "C")}}
            )
        )
        outdir = tmp_path / "out"
        code = main(
            ["run", str(instance), "--outdir", str(outdir), "--seed", "1",
             "--adversary", str(adversary)]
        )
        assert code == 0
        execs = read(outdir / "executions.json")
        assert [e["status"] for e in execs] == ["aborted"]
        ledger = read(outdir / "ledger.json")
        assert all(
            sum(channels.values()) == 0 for channels in ledger["deltas"].values()
        )

    def test_iter_bound_zero(self, tmp_path):
        instance = write_triangle(tmp_path)
        outdir = tmp_path / "out"
        assert main(
            ["run", str(instance), "--outdir", str(outdir), "--iter-bound", "0"]
        ) == 0
        assert read(outdir / "report.json") == {
            "objective": 0,
            "iterations": 0,
            "terminated_early": True,
        }

    def test_dot_output(self, tmp_path):
        instance = write_triangle(tmp_path)
        dot = tmp_path / "viz.dot"
        assert main(
            ["run", str(instance), "--outdir", str(tmp_path / "o"), "--dot", str(dot)]
        ) == 0
        assert dot.read_text().startswith("digraph")

    def test_malformed_instance_exit_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"nodes": ["A"], "edges": [], "surprise": 1}')
        assert main(["run", str(bad), "--outdir", str(tmp_path / "o")]) == 1

    def test_invalid_json_exit_one(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("not json at all")
        assert main(["run", str(bad), "--outdir", str(tmp_path / "o")]) == 1

    def test_missing_file_exit_one(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.json"), "--outdir", str(tmp_path)]) == 1

    def test_acyclic_instance_runs_with_no_cycles(self, tmp_path, capsys):
        from pcnflow.model import dump_instance

        inst = build_instance(
            ["A", "B", "C"],
            [ChannelConstraint("A", "B", 2), ChannelConstraint("B", "C", 2)],
        )
        path = tmp_path / "dag.json"
        path.write_text(dump_instance(inst))
        outdir = tmp_path / "out"
        assert main(["run", str(path), "--outdir", str(outdir)]) == 0
        assert read(outdir / "decomposition.json") == {"cycles": []}
        assert read(outdir / "report.json")["objective"] == 0
        assert main(["verify", str(path), "--outdir", str(outdir)]) == 0


class TestVerify:
    def test_accepts_run_output(self, tmp_path, capsys):
        instance = write_triangle(tmp_path)
        outdir = tmp_path / "out"
        main(["run", str(instance), "--outdir", str(outdir)])
        assert main(["verify", str(instance), "--outdir", str(outdir)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_rejects_tampered_flow(self, tmp_path, capsys):
        instance = write_triangle(tmp_path)
        outdir = tmp_path / "out"
        main(["run", str(instance), "--outdir", str(outdir)])
        doc = read(outdir / "circulation.json")
        doc["flows"][0]["amount"] += 1
        (outdir / "circulation.json").write_text(json.dumps(doc))
        assert main(["verify", str(instance), "--outdir", str(outdir)]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_flags_suboptimal_objective(self):
        inst = build_instance(
            ["A", "B", "C"],
            [
                ChannelConstraint("A", "B", 4),
                ChannelConstraint("B", "C", 4),
                ChannelConstraint("C", "A", 4),
            ],
        )
        reasons = verify_artifacts(
            inst, {"flows": [], "objective": 0}, None, None
        )
        assert any("below oracle optimum" in r for r in reasons)

    def test_large_capacities_skip_oracle(self):
        inst = build_instance(
            ["A", "B", "C"],
            [
                ChannelConstraint("A", "B", 100),
                ChannelConstraint("B", "C", 100),
                ChannelConstraint("C", "A", 100),
            ],
        )
        # Feasible but suboptimal: out of oracle range, so it passes.
        assert verify_artifacts(inst, {"flows": [], "objective": 0}, None, None) == []


class TestDecomposeExecute:
    def test_round_trip(self, tmp_path, capsys):
        instance = write_triangle(tmp_path)
        inst = instance_from_json_dict(read(instance))
        circ_path = tmp_path / "circ.json"
        circ_path.write_text(
            json.dumps(circulation_to_json_dict(solve_rebalancing(inst).circulation))
        )
        dec_path = tmp_path / "dec.json"
        assert main(
            ["decompose", str(instance), "--circulation", str(circ_path),
             "-o", str(dec_path)]
        ) == 0
        outdir = tmp_path / "exec"
        assert main(
            ["execute", "--decomposition", str(dec_path), "--outdir", str(outdir),
             "--seed", "9"]
        ) == 0
        assert read(outdir / "executions.json")[0]["status"] == "completed"
        events = read(outdir / "events.json")
        assert events[0]["event"] == "reveal"


class TestDeterminism:
    def test_repeated_runs_are_byte_identical(self, tmp_path):
        instance = write_triangle(tmp_path)
        dirs = (tmp_path / "r1", tmp_path / "r2")
        for d in dirs:
            assert main(
                ["run", str(instance), "--outdir", str(d), "--seed", "77", "--mpc"]
            ) == 0
        files = sorted(p.name for p in dirs[0].iterdir())
        assert files == sorted(p.name for p in dirs[1].iterdir())
        for name in files:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
