import json

import pytest

from toih.cli import EXIT_FAIL, EXIT_IO, EXIT_OK, main
from toih.datamodel import parse_records, parse_samples
from toih.moe import ModelConfig, MoEParams, init_params
from toih.seeding import derive_seed


def run(argv, capsys):
    rc = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


@pytest.fixture
def samples_file(tmp_path, capsys):
    path = tmp_path / "samples.jsonl"
    assert run(["make-samples", "--n-groups", 30, "--seed", 1, "--out", path], capsys)[0] == EXIT_OK
    return path


class TestValidate:
    def test_clean(self, samples_file, capsys):
        rc, out, _ = run(["validate", "--samples", samples_file], capsys)
        assert rc == EXIT_OK and "90 samples OK" in out

    def test_bad_enum(self, samples_file, tmp_path, capsys):
        lines = samples_file.read_text().splitlines()
        obj = json.loads(lines[3])
        obj["dimension"] = "colour"
        lines[3] = json.dumps(obj)
        bad = tmp_path / "bad.jsonl"
        bad.write_text("\n".join(lines) + "\n")
        rc, _, err = run(["validate", "--samples", bad], capsys)
        assert rc == EXIT_FAIL
        assert "line 4" in err and "dimension" in err

    def test_missing_file(self, tmp_path, capsys):
        rc, _, err = run(["validate", "--samples", tmp_path / "nope.jsonl"], capsys)
        assert rc == EXIT_IO and "cannot read" in err


class TestSimulateAndEval:
    def test_all_correct(self, samples_file, tmp_path, capsys):
        resp = tmp_path / "r.jsonl"
        assert run(["simulate", "--samples", samples_file, "--p-correct", 1, "--out", resp], capsys)[0] == EXIT_OK
        samples = {s.sample_id: s for s in parse_samples(samples_file.read_text())}
        assert all(r.prediction == samples[r.sample_id].ground_truth for r in parse_records(resp.read_text()))
        rc, out, _ = run(["eval", "--samples", samples_file, "--responses", resp, "--format", "table"], capsys)
        assert rc == EXIT_OK
        header, row = out.splitlines()[:2]
        assert dict(zip(header.split(), row.split()))["HRR"] == "100.0"

    def test_deterministic(self, samples_file, tmp_path, capsys):
        paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
        for p in paths:
            run(["simulate", "--samples", samples_file, "--seed", 5, "--with-probs", "--out", p], capsys)
        assert paths[0].read_bytes() == paths[1].read_bytes()
        reports = [tmp_path / "ra.json", tmp_path / "rb.json"]
        for p, r in zip(paths, reports):
            run(["eval", "--samples", samples_file, "--responses", p, "--out", r], capsys)
        assert reports[0].read_bytes() == reports[1].read_bytes()

    def test_empty_responses_warns(self, samples_file, tmp_path, capsys, caplog):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        rc, out, _ = run(["eval", "--samples", samples_file, "--responses", empty], capsys)
        assert rc == EXIT_OK and "undefined" in caplog.text
        report = json.loads(out)
        assert report["layer1"]["HRR"]["value"] is None and report["layer1"]["HRR"]["undefined"]

    def test_invalid_probability_flag(self, samples_file, capsys):
        with pytest.raises(SystemExit) as e:
            main(["simulate", "--samples", str(samples_file), "--p-correct", "1.5"])
        assert e.value.code == 2

    def test_contra_correctness_clamped(self, samples_file, tmp_path, capsys):
        resp = tmp_path / "r.jsonl"
        rc, _, _ = run(["simulate", "--samples", samples_file, "--p-correct", 0.8, "--p-halluc", 1, "--out", resp], capsys)
        assert rc == EXIT_OK
        samples = {s.sample_id: s for s in parse_samples(samples_file.read_text())}
        for r in parse_records(resp.read_text()):
            s = samples[r.sample_id]
            if s.is_contradictory:
                assert r.prediction == s.hallucination_option

    def test_dangling_response(self, samples_file, tmp_path, capsys):
        resp = tmp_path / "r.jsonl"
        resp.write_text(json.dumps({"schema_version": "1", "sample_id": "ghost", "model_id": "m", "prediction": "A"}))
        rc, _, err = run(["eval", "--samples", samples_file, "--responses", resp], capsys)
        assert rc == EXIT_FAIL and "ghost" in err


class TestMoEDemo:
    def test_no_conflict(self, capsys):
        rc, out, _ = run(["moe-demo", "--conflict", "none", "--format", "json"], capsys)
        s = json.loads(out)
        assert rc == EXIT_OK and s["all_consistent"] and s["gate_only"]
        assert all(c == 1.0 for c in s["patch_consistency"])

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_shares_sum_to_one(self, seed, capsys):
        _, out, _ = run(["moe-demo", "--conflict", "action", "--seed", seed, "--format", "json"], capsys)
        s = json.loads(out)
        assert sum(s["expert_shares"].values()) == pytest.approx(1.0, abs=1e-12)
        assert sum(s["expert_counts"].values()) == s["tokens"]
        assert not s["all_consistent"]

    def test_table(self, capsys):
        rc, out, _ = run(["moe-demo"], capsys)
        assert rc == EXIT_OK and "gate-only routing: yes" in out

    def test_bad_checkpoint(self, tmp_path, capsys):
        bad = tmp_path / "ck.json"
        bad.write_text("{}")
        assert run(["moe-demo", "--checkpoint", bad], capsys)[0] == EXIT_IO


SMALL_TOY = ["--n-train", 20, "--n-heldout", 8, "--batch-size", 5]


class TestTrainToy:
    def test_zero_steps_is_init(self, tmp_path, capsys):
        rc, _, _ = run(["train-toy", "--out", tmp_path, "--steps", 0, *SMALL_TOY], capsys)
        assert rc == EXIT_OK
        ck = MoEParams.from_checkpoint((tmp_path / "checkpoint.json").read_text())
        assert ck.equal(init_params(ModelConfig(seed=derive_seed(42, "init"))))
        assert (tmp_path / "history.jsonl").read_text() == ""

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            run(["train-toy", "--out", out, "--steps", 6, *SMALL_TOY], capsys)
        for name in ("checkpoint.json", "history.jsonl", "report.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        hist = [json.loads(x) for x in (a / "history.jsonl").read_text().splitlines()]
        assert [h["step"] for h in hist] == list(range(6))

    def test_seed_changes_output(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run(["train-toy", "--out", a, "--steps", 2, *SMALL_TOY], capsys)
        run(["train-toy", "--out", b, "--steps", 2, "--seed", 7, *SMALL_TOY], capsys)
        assert (a / "checkpoint.json").read_bytes() != (b / "checkpoint.json").read_bytes()

    def test_check_flag_fails_untrained(self, tmp_path, capsys):
        rc, _, err = run(["train-toy", "--out", tmp_path, "--steps", 0, "--check", *SMALL_TOY], capsys)
        assert rc == EXIT_FAIL and "thresholds not met" in err

    def test_usage_errors(self, tmp_path, capsys):
        assert run(["train-toy", "--out", tmp_path, "--steps", -1], capsys)[0] == EXIT_IO
        assert run(["train-toy", "--out", tmp_path, "--lambda-aux", -1], capsys)[0] == EXIT_IO
        assert run(["train-toy", "--out", tmp_path, "--k", 99], capsys)[0] == EXIT_IO
        f = tmp_path / "file"
        f.write_text("x")
        assert run(["train-toy", "--out", f, "--steps", 0], capsys)[0] == EXIT_IO


class TestGradcheck:
    def test_pass(self, capsys):
        rc, out, _ = run(["gradcheck", "--n-examples", 1], capsys)
        assert rc == EXIT_OK and "PASS" in out

    def test_corrupt_group_named(self, capsys):
        rc, _, err = run(["gradcheck", "--n-examples", 1, "--corrupt-group", "gate"], capsys)
        assert rc == EXIT_FAIL and "failing groups: gate" in err

    def test_coarse_step_reported(self, capsys):
        _, out, _ = run(["gradcheck", "--n-examples", 1, "--h", "1e-3", "--tol-rel", 1.0], capsys)
        assert "h=0.001" in out and "worst" in out

    def test_unknown_group(self, capsys):
        assert run(["gradcheck", "--n-examples", 1, "--corrupt-group", "nope"], capsys)[0] == EXIT_IO
