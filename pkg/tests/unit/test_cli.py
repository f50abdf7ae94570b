"""Tests for the command-line interface and its file formats."""

import importlib
import json
import logging
from unittest.mock import patch

import numpy as np
import pytest

from phaseseg.cli import main
from phaseseg.cli.config import RunConfig, build_config, load_config_file, parse_sweep
from phaseseg.cli.export import bic_frame, forward_frame, tidy, trace_frame
from phaseseg.cli.ingest import (
    ingest,
    read_labels,
    truth_path,
    write_demo,
    write_labels,
)
from phaseseg.cli.persistence import (
    load_model,
    model_to_dict,
    save_model,
    write_json,
)
from phaseseg.core import Demonstration
from phaseseg.exceptions import SchemaError, ValidationError
from phaseseg.selection import BicResult, SweepResult
from phaseseg.simulate import ReproductionTrace, TraceStep

HEADER = "t,x,y,z,fx,fy,fz\n"

# the package re-exports main(), which shadows the submodule attribute
cli_main = importlib.import_module("phaseseg.cli.main")


@pytest.fixture(autouse=True)
def quiet_logging(request):
    """Keep main() from reconfiguring the root logger under pytest."""
    if request.cls is not None and request.cls.__name__ == "TestLogging":
        # these tests exercise configure_logging itself
        yield
        return
    with patch.object(cli_main, "configure_logging"):
        yield


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _rows(n, dt=0.01):
    return "".join(f"{k * dt!r},0.0,0.0,{0.1 - k * 1e-3!r},0.0,0.0,-1.5\n" for k in range(n))


class TestConfig:
    """Test run configuration."""

    def test_parse_sweep(self):
        assert parse_sweep("1..5") == (1, 5)
        for bad in ("3", "a..b", "1-3"):
            with pytest.raises(ValueError, match="MIN..MAX"):
                parse_sweep(bad)

    def test_defaults(self):
        config = RunConfig()
        assert config.world == "valley"
        assert config.em_config().seed == 0
        assert config.controller().damping_value == pytest.approx(2.0 * np.sqrt(500.0))
        assert config.contact_world().friction_mu == 0.2

    def test_sweep_string(self):
        assert RunConfig(sweep="2..4").sweep == (2, 4)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_phases": 2, "sweep": (1, 3)},
            {"n_phases": 0},
            {"sweep": (3, 1)},
            {"feature": "torque"},
            {"world": "moon"},
            {"dt": 0.0},
            {"dwell": -1.0},
            {"max_iters": 0},
            {"lr": -1.0},
            {"plate_angle_deg": 95.0},
            {"stiffness_trans": -1.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            RunConfig(**kwargs)

    def test_feature_modes(self):
        assert RunConfig(feature="state").em_config().feature_fn.value == "relative_position"
        assert RunConfig().em_config().feature_fn.value == "identity"

    def test_flags_override_file(self):
        config = build_config(
            {"seed": 3, "sweep": [1, 4], "max_iters": 9},
            {"n_phases": 2, "max_iters": None, "out": "runs"},
        )
        assert config.n_phases == 2
        assert config.sweep is None
        assert config.seed == 3
        assert config.max_iters == 9
        assert config.out == "runs"

    def test_list_values_become_tuples(self):
        config = build_config({"start": [0.0, 0.0, 0.1], "sweep": [1, 3]})
        assert config.start == (0.0, 0.0, 0.1)
        assert config.sweep == (1, 3)

    def test_load_config_file(self, tmp_path):
        path = _write(tmp_path / "run.json", json.dumps({"seed": 4, "world": "hose"}))
        assert load_config_file(str(path)) == {"seed": 4, "world": "hose"}

    def test_unknown_field(self, tmp_path):
        path = _write(tmp_path / "run.json", json.dumps({"seed": 4, "colour": "red"}))
        with pytest.raises(SchemaError, match="colour") as info:
            load_config_file(str(path))
        assert info.value.path == str(path)

    @pytest.mark.parametrize("text", ["[1, 2]", "{not json"])
    def test_bad_file(self, tmp_path, text):
        path = _write(tmp_path / "run.json", text)
        with pytest.raises(SchemaError):
            load_config_file(str(path))

    def test_missing_file(self, tmp_path):
        path = str(tmp_path / "nope.json")
        with pytest.raises(SchemaError, match="cannot read") as info:
            load_config_file(path)
        assert info.value.path == path


class TestIngest:
    """Test reading demonstration files."""

    def test_csv(self, tmp_path):
        path = _write(tmp_path / "demo.csv", HEADER + _rows(5))
        demo = ingest(path)
        assert (len(demo), demo.m, demo.d_w) == (5, 3, 3)
        assert demo.dt == pytest.approx(0.01)
        assert demo.label == "demo"
        np.testing.assert_array_equal(demo.wrenches[:, 2], -1.5)

    def test_column_order_is_free(self, tmp_path):
        text = "fz,t,fy,x,fx,y,z\n-1.0,0.0,0,1,0,2,3\n-1.0,0.01,0,1,0,2,3\n"
        demo = ingest(_write(tmp_path / "demo.csv", text))
        np.testing.assert_array_equal(demo.states[0], [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(demo.wrenches[0], [0.0, 0.0, -1.0])

    def test_hose_columns(self, tmp_path):
        header = "t,x,y,z,rx,ry,rz,fx,fy,fz,tx,ty,tz\n"
        rows = "".join(f"{k * 0.01!r}" + ",0.0" * 12 + "\n" for k in range(4))
        demo = ingest(_write(tmp_path / "hose.csv", header + rows))
        assert (demo.m, demo.d_w) == (6, 6)

    def test_missing_value_names_row(self, tmp_path):
        text = HEADER + "0.0,0,0,0,0,0,0\n0.01,0,0,0,0,0,\n"
        with pytest.raises(SchemaError, match="missing value for 'fz' at row 2") as info:
            ingest(_write(tmp_path / "demo.csv", text))
        assert info.value.row == 2
        assert info.value.context()["row"] == 2

    def test_non_numeric(self, tmp_path):
        text = HEADER + "0.0,0,0,0,0,0,0\n0.01,abc,0,0,0,0,0\n"
        with pytest.raises(SchemaError, match="non-numeric value for 'x' at row 2"):
            ingest(_write(tmp_path / "demo.csv", text))

    @pytest.mark.parametrize(
        "header, match",
        [
            ("t,x,y,z,fx,fy\n", "missing columns: fz"),
            ("t,x,y,z,rx,fx,fy,fz\n", "must appear together"),
            ("t,x,y,z,fx,fy,fz,temp\n", "unknown columns: temp"),
        ],
    )
    def test_bad_header(self, tmp_path, header, match):
        with pytest.raises(SchemaError, match=match):
            ingest(_write(tmp_path / "demo.csv", header))

    def test_invariants_checked(self, tmp_path):
        text = HEADER + "0.0,0,0,0,0,0,0\n0.01,0,0,0,0,0,0\n0.02,0,0,0,0,0,0\n0.02,0,0,0,0,0,0\n"
        with pytest.raises(ValidationError) as info:
            ingest(_write(tmp_path / "demo.csv", text))
        assert "timestamp not increasing at index 3" in info.value.violations

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            ingest(tmp_path / "nope.csv")

    def test_jsonl(self, tmp_path):
        lines = [
            json.dumps({"t": 0.01 * k, "s": [0.0, 0.0, 0.1], "a": [0.0, 0.0, 1.0]})
            for k in range(4)
        ]
        demo = ingest(_write(tmp_path / "demo.jsonl", "\n".join(lines) + "\n"))
        assert (len(demo), demo.m, demo.d_w) == (4, 3, 3)

    def test_jsonl_bad_record(self, tmp_path):
        lines = [
            json.dumps({"t": 0.0, "s": [0.0], "a": [0.0]}),
            json.dumps({"t": 0.01, "s": [0.0]}),
        ]
        with pytest.raises(SchemaError, match="row 2") as info:
            ingest(_write(tmp_path / "demo.jsonl", "\n".join(lines)))
        assert info.value.row == 2

    def test_jsonl_inconsistent(self, tmp_path):
        lines = [
            json.dumps({"t": 0.0, "s": [0.0], "a": [0.0]}),
            json.dumps({"t": 0.01, "s": [0.0, 1.0], "a": [0.0]}),
        ]
        with pytest.raises(SchemaError, match="inconsistent lengths at row 2"):
            ingest(_write(tmp_path / "demo.jsonl", "\n".join(lines)))

    def test_explicit_format(self, tmp_path):
        line = json.dumps({"t": 0.0, "s": [0.0], "a": [0.0]})
        line2 = json.dumps({"t": 0.5, "s": [1.0], "a": [0.0]})
        demo = ingest(_write(tmp_path / "demo.txt", f"{line}\n{line2}\n"), fmt="jsonl")
        assert demo.dt == 0.5


class TestWriteDemo:
    def test_round_trip_is_bit_exact(self, tmp_path, valley_demos):
        demo = valley_demos[0].demo
        back = ingest(write_demo(tmp_path / "valley.csv", demo))
        np.testing.assert_array_equal(back.states, demo.states)
        np.testing.assert_array_equal(back.wrenches, demo.wrenches)
        np.testing.assert_array_equal(back.times, demo.times)

    def test_no_schema(self, tmp_path):
        demo = Demonstration.from_arrays(np.zeros((3, 2)), np.zeros((3, 2)), 0.01)
        with pytest.raises(SchemaError, match="no CSV schema"):
            write_demo(tmp_path / "d.csv", demo)

    def test_labels_are_one_based_on_disk(self, tmp_path):
        path = write_labels(tmp_path / "l.csv", np.array([0.0, 0.01, 0.02]), [0, 2, 1])
        lines = path.read_text().splitlines()
        assert lines[0] == "t,phase"
        assert [line.split(",")[1] for line in lines[1:]] == ["1", "3", "2"]
        np.testing.assert_array_equal(read_labels(path), [0, 2, 1])

    def test_labels_need_phase_column(self, tmp_path):
        path = _write(tmp_path / "l.csv", "t,label\n0.0,1\n")
        with pytest.raises(SchemaError, match="phase"):
            read_labels(path)

    def test_truth_path(self, tmp_path):
        assert truth_path(tmp_path / "demo_0.csv") == tmp_path / "demo_0_truth.csv"


class TestModelFiles:
    """Test model persistence."""

    def test_round_trip_is_bit_exact(self, tmp_path, reference_model):
        loaded = load_model(save_model(tmp_path / "model.json", reference_model))
        assert loaded.n_phases == reference_model.n_phases
        assert loaded.feature_name == reference_model.feature_name
        for a, b in zip(loaded.dynamics, reference_model.dynamics):
            np.testing.assert_array_equal(a.A, b.A)
            np.testing.assert_array_equal(a.B, b.B)
            np.testing.assert_array_equal(a.Sigma, b.Sigma)
        np.testing.assert_array_equal(loaded.weights.w, reference_model.weights.w)
        np.testing.assert_array_equal(loaded.weights.w0, reference_model.weights.w0)

    def test_feature_params_survive(self, tmp_path, make_model):
        model = make_model(np.random.default_rng(0), 2, 2, 2)
        model = type(model)(
            model.dynamics,
            type(model.weights)(np.zeros((2, 3)), np.zeros((2, 2, 3))),
            feature_fn="relative_position",
            feature_params={"target": [0.1, 0.2]},
        )
        loaded = load_model(save_model(tmp_path / "model.json", model))
        np.testing.assert_array_equal(loaded.feature_params["target"], [0.1, 0.2])

    def test_bad_version(self, tmp_path, reference_model):
        data = model_to_dict(reference_model)
        data["format_version"] = 99
        path = write_json(tmp_path / "model.json", data)
        with pytest.raises(SchemaError, match="version 99"):
            load_model(path)

    def test_missing_key(self, tmp_path, reference_model):
        data = model_to_dict(reference_model)
        del data["weights"]
        with pytest.raises(SchemaError, match="missing"):
            load_model(write_json(tmp_path / "model.json", data))

    def test_inconsistent(self, tmp_path, reference_model):
        data = model_to_dict(reference_model)
        data["phases"][0]["Sigma"] = [[1.0, 0.0], [0.0, -1.0]]
        with pytest.raises(SchemaError, match="inconsistent"):
            load_model(write_json(tmp_path / "model.json", data))

    def test_header_mismatch(self, tmp_path, reference_model):
        data = model_to_dict(reference_model)
        data["m"] = 5
        with pytest.raises(SchemaError, match="header"):
            load_model(write_json(tmp_path / "model.json", data))

    def test_not_found(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            load_model(tmp_path / "missing.json")

    def test_json_is_deterministic(self, tmp_path):
        path = write_json(tmp_path / "x.json", {"b": np.float64(0.1), "a": np.arange(2)})
        assert path.read_text() == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": 0.1\n}\n'


class TestExport:
    """Test tidy CSV frames."""

    def test_tidy_is_time_major(self):
        frame = tidy(np.array([0.0, 1.0]), {"b": np.array([1, 2]), "a": np.array([3, 4])})
        assert list(frame.columns) == ["t", "series", "value"]
        assert frame["series"].tolist() == ["b", "a", "b", "a"]
        assert frame["value"].tolist() == [1, 3, 2, 4]

    def test_forward_frame(self):
        alpha = np.array([[0.9, 0.1], [0.2, 0.8]])
        frame = forward_frame(np.array([0.0, 0.01]), alpha)
        assert frame["series"].tolist() == ["phase_1", "phase_2"] * 2
        np.testing.assert_array_equal(frame["value"], alpha.ravel())

    def test_trace_frame(self):
        steps = tuple(
            TraceStep(0.01 * (k + 1), np.zeros(3), np.full(3, k), np.zeros(3), k, 0, 0)
            for k in range(2)
        )
        frame = trace_frame(ReproductionTrace(steps, 0.01, False))
        series = frame["series"].unique().tolist()
        assert series[:3] == ["x_star_1", "x_star_2", "x_star_3"]
        assert series[-2:] == ["phase", "primitive"]
        phases = frame.loc[frame["series"] == "phase", "value"].tolist()
        assert phases == [1, 2]

    def test_bic_frame(self):
        sweep = SweepResult(
            results=(BicResult(1, -10.0, 2, 100, 29.2), BicResult(2, -5.0, 7, 100, 42.2)),
            selected=1,
            count_mode="transitions",
        )
        frame = bic_frame(sweep)
        assert list(frame.columns) == ["n_phases", "loglik", "n_params", "n_obs", "bic"]
        assert frame["n_phases"].tolist() == [1, 2]


def _summary(capsys):
    return json.loads(capsys.readouterr().out)


class TestMain:
    """Test commands end to end through main()."""

    @pytest.fixture
    def generated(self, tmp_path, capsys):
        out = tmp_path / "data"
        assert main(["generate", "--out", str(out), "--seed", "0", "--n-demos", "1"]) == 0
        summary = _summary(capsys)
        assert summary["command"] == "generate"
        return out / "demo_0.csv"

    def _train(self, demo, out, capsys):
        argv = ["train", "--demos", str(demo), "--n-phases", "2", "--max-iters", "2"]
        assert main([*argv, "--out", str(out), "--seed", "1"]) == 0
        return _summary(capsys)

    def test_generate_writes_sidecar(self, generated):
        assert generated.exists()
        assert truth_path(generated).exists()
        labels = read_labels(truth_path(generated))
        assert labels.shape == (900,)

    def test_ingest(self, generated, capsys):
        assert main(["ingest", str(generated)]) == 0
        summary = _summary(capsys)
        assert (summary["T"], summary["m"], summary["d_w"]) == (900, 3, 3)

    def test_train_and_segment(self, generated, tmp_path, capsys):
        summary = self._train(generated, tmp_path / "fit", capsys)
        assert summary["n_phases"] == 2
        for name in ("model.json", "em_report.json", "demo_0_labels.csv", "demo_0_forward.csv"):
            assert (tmp_path / "fit" / name).exists()

        seg = tmp_path / "seg"
        argv = ["segment", "--model", str(tmp_path / "fit" / "model.json")]
        assert main([*argv, "--demo", str(generated), "--out", str(seg)]) == 0
        summary = _summary(capsys)
        labels = read_labels(summary["labels"])
        assert labels.shape == (899,)
        assert set(np.unique(labels)) <= {0, 1}
        assert (seg / "demo_0_labels.csv").read_bytes() == (
            tmp_path / "fit" / "demo_0_labels.csv"
        ).read_bytes()

    def test_shared_stem_keeps_both_outputs(self, generated, tmp_path, capsys):
        copy = tmp_path / "other" / generated.name
        copy.parent.mkdir()
        copy.write_bytes(generated.read_bytes())
        out = tmp_path / "fit"
        argv = ["train", "--demos", str(generated), str(copy), "--n-phases", "2"]
        assert main([*argv, "--max-iters", "2", "--out", str(out)]) == 0
        capsys.readouterr()
        for k in (0, 1):
            assert (out / f"{k}_demo_0_labels.csv").exists()
            assert (out / f"{k}_demo_0_forward.csv").exists()
        assert not (out / "demo_0_labels.csv").exists()

    def test_train_is_deterministic(self, generated, tmp_path, capsys):
        self._train(generated, tmp_path / "a", capsys)
        self._train(generated, tmp_path / "b", capsys)
        for name in ("model.json", "demo_0_forward.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_reproduce(self, generated, tmp_path, capsys):
        self._train(generated, tmp_path / "fit", capsys)
        model = str(tmp_path / "fit" / "model.json")
        out = tmp_path / "rep"
        argv = ["reproduce", "--model", model, "--demos", str(generated)]
        assert main([*argv, "--max-steps", "20", "--out", str(out)]) == 0
        summary = _summary(capsys)
        assert summary["steps"] <= 20
        assert summary["phase_sequence"][0] in (1, 2)
        assert (out / "trace.csv").exists()
        assert json.loads((out / "summary.json").read_text()) == summary

    def test_compare(self, generated, tmp_path, capsys):
        out = tmp_path / "cmp"
        argv = ["compare", "--demos", str(generated), "--max-iters", "2"]
        assert main([*argv, "--out", str(out)]) == 0
        summary = _summary(capsys)
        assert summary["n_phases"] == 3
        assert summary["wrench"]["feature_fn"] == "identity"
        assert summary["state"]["feature_fn"] == "relative_position"

    def test_compare_needs_sidecar(self, generated, tmp_path, capsys):
        copy = tmp_path / "bare.csv"
        copy.write_bytes(generated.read_bytes())
        assert main(["compare", "--demos", str(copy), "--out", str(tmp_path)]) == 1
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "SchemaError"
        assert record["path"].endswith("bare_truth.csv")

    def test_missing_n_phases(self, tmp_path, capsys):
        assert main(["train", "--demos", "x.csv", "--out", str(tmp_path)]) == 1
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "ConfigError"
        assert record["command"] == "train"
        assert "--n-phases" in record["message"]

    def test_missing_demo_file(self, tmp_path, capsys):
        argv = ["train", "--demos", str(tmp_path / "x.csv"), "--n-phases", "2"]
        assert main([*argv, "--out", str(tmp_path)]) == 1
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "SchemaError"
        assert record["path"] == str(tmp_path / "x.csv")

    def test_conflicting_config_file(self, tmp_path, capsys):
        config = _write(tmp_path / "run.json", json.dumps({"n_phases": 2, "sweep": "1..3"}))
        assert main(["train", "--config", str(config)]) == 1
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "ConfigError"
        assert "not both" in record["message"]

    def test_flag_resolves_file_conflict(self, tmp_path, capsys):
        config = _write(tmp_path / "run.json", json.dumps({"sweep": "1..3"}))
        argv = ["train", "--config", str(config), "--n-phases", "2"]
        assert main([*argv, "--out", str(tmp_path)]) == 1
        # the remaining error is the missing demos, not the sweep
        record = json.loads(capsys.readouterr().err)
        assert "--demos" in record["message"]

    @pytest.mark.parametrize(
        "flags, match",
        [(["--max-iters", "0"], "max_iters"), (["--lr", "-1"], "lr_lambda")],
    )
    def test_invalid_em_setting(self, tmp_path, capsys, flags, match):
        argv = ["train", "--demos", "x.csv", "--n-phases", "2", *flags]
        assert main([*argv, "--out", str(tmp_path)]) == 1
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "ConfigError"
        assert record["command"] == "train"
        assert match in record["message"]

    def test_invalid_world_in_config_file(self, tmp_path, capsys):
        config = _write(tmp_path / "run.json", json.dumps({"plate_angle_deg": 95}))
        assert main(["generate", "--config", str(config), "--out", str(tmp_path)]) == 1
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "ConfigError"
        assert "plate_angle_deg" in record["message"]
        assert not list(tmp_path.glob("demo_*.csv"))

    def test_missing_config_file(self, tmp_path, capsys):
        missing = str(tmp_path / "nope.json")
        assert main(["train", "--config", missing]) == 1
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "SchemaError"
        assert record["path"] == missing

    def test_reproduce_needs_model(self, tmp_path, capsys):
        assert main(["reproduce", "--out", str(tmp_path)]) == 1
        assert "--model" in json.loads(capsys.readouterr().err)["message"]

    def test_bad_sweep_argument(self):
        with pytest.raises(SystemExit) as info:
            main(["select", "--sweep", "3"])
        assert info.value.code == 2


class TestLogging:
    def test_level_from_environment(self, monkeypatch):
        monkeypatch.setenv("PHASESEG_LOG", "debug")
        with patch.object(logging, "basicConfig") as basic:
            cli_main.configure_logging()
        assert basic.call_args.kwargs["level"] == logging.DEBUG

    def test_unknown_level_falls_back(self, monkeypatch):
        monkeypatch.setenv("PHASESEG_LOG", "chatty")
        with patch.object(logging, "basicConfig") as basic:
            cli_main.configure_logging()
        assert basic.call_args.kwargs["level"] == logging.WARNING
