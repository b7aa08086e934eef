from pathlib import Path

import pytest

from reprel import data_path
from reprel.cli import main
from reprel.experiments import ExperimentManifest, ManifestError, parse_kv

DATA = Path(str(data_path("taxi.dfoci"))).parent


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def small_manifest(tmp_path, instance="task1.taxi", task="task1", extra=""):
    text = (
        f"dfoci = {DATA / 'taxi.dfoci'}\noperators = {DATA / 'taxi.ops'}\n"
        f"instance = {DATA / instance}\ntask = {task}\nseeds = 0, 1\n"
        f"alpha = 0.2\ntotal_env_steps = 2000\neval_every = 500\neval_episodes = 3\n{extra}"
    )
    p = tmp_path / f"{task}.manifest"
    p.write_text(text, encoding="utf-8")
    return p


def test_abstract_pickup(capsys):
    code, out, _ = run(capsys, "abstract", str(DATA / "taxi.dfoci"), "pickup")
    assert code == 0
    assert out.splitlines() == ["at(P,L)", "in-taxi(P)", "taxi-at(L)", "wall(L,D)"]


def test_abstract_depth_zero(capsys):
    code, out, _ = run(capsys, "abstract", str(DATA / "taxi.dfoci"), "drop", "--depth", "0")
    assert code == 0 and out == ""


def test_abstract_unknown_subtask(capsys):
    code, _, err = run(capsys, "abstract", str(DATA / "taxi.dfoci"), "refuel")
    assert code == 2 and "refuel" in err


def test_abstract_bad_file(capsys, tmp_path):
    bad = tmp_path / "bad.dfoci"
    bad.write_text("pickup(P): {A} => R\n", encoding="utf-8")
    code, _, err = run(capsys, "abstract", str(bad), "pickup")
    assert code == 1 and "line 1" in err
    code, _, _ = run(capsys, "abstract", str(tmp_path / "missing.dfoci"), "pickup")
    assert code == 1


def test_plan(capsys):
    code, out, _ = run(capsys, "plan", str(DATA / "taxi.ops"), str(DATA / "task2.taxi"), "--seed", "3")
    assert code == 0 and out == "pickup(p1)\ndrop(p1)\npickup(p2)\ndrop(p2)\n"


def test_verify_shipped(capsys):
    code, out, _ = run(capsys, "verify", str(DATA / "verify.manifest"))
    assert code == 0 and out.endswith("summary passed=4 failed=0\n")
    code, _, _ = run(capsys, "verify", str(DATA / "verify.manifest"), "--tol", "1e-2")
    assert code == 0


def test_verify_corrupt(capsys):
    code, out, _ = run(capsys, "verify", str(DATA / "verify_corrupt.manifest"))
    assert code == 3
    assert "FAIL value-equivalence drop(p1)" in out and "witness" in out


def test_verify_missing_manifest(capsys, tmp_path):
    code, _, err = run(capsys, "verify", str(tmp_path / "nope.manifest"))
    assert code == 1 and "not found" in err


def test_train_outputs(capsys, tmp_path):
    m = small_manifest(tmp_path)
    out = tmp_path / "out"
    assert run(capsys, "train", str(m), "--out", str(out))[0] == 0
    a = (out / "task1_reprel.csv").read_text().splitlines()
    b = (out / "task1_hrl.csv").read_text().splitlines()
    assert a[0] == "env_steps,mean_reward,std_reward,seeds"
    assert [r.split(",")[0] for r in a[1:]] == [r.split(",")[0] for r in b[1:]] == ["0", "500", "1000", "1500", "2000"]
    assert all(r.endswith(",2") for r in a[1:])
    summary = (out / "summary.txt").read_text().splitlines()
    assert summary[0].startswith("task=task1 variant=reprel steps_to_optimal=0:")
    assert (out / "tables" / "reprel" / "seed1" / "pickup.qtable").is_file()


def test_train_rerun_byte_identical(capsys, tmp_path):
    m = small_manifest(tmp_path)
    for k in (1, 2):
        assert run(capsys, "train", str(m), "--out", str(tmp_path / f"o{k}"))[0] == 0
    for name in ("task1_reprel.csv", "task1_hrl.csv", "summary.txt"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()


def test_single_seed_flag(capsys, tmp_path):
    m = small_manifest(tmp_path)
    assert run(capsys, "train", str(m), "--out", str(tmp_path / "o"), "--seed", "4")[0] == 0
    assert (tmp_path / "o" / "task1_reprel.csv").read_text().splitlines()[1].endswith(",1")
    assert (tmp_path / "o" / "tables" / "reprel" / "seed4").is_dir()


def test_transfer_labels(capsys, tmp_path):
    t1 = small_manifest(tmp_path)
    assert run(capsys, "train", str(t1), "--out", str(tmp_path / "t1"))[0] == 0
    t2 = small_manifest(tmp_path, "task2.taxi", "task2")
    code, _, err = run(capsys, "transfer", str(t2), "--out", str(tmp_path / "t2"))
    assert code == 1 and "load" in err
    assert run(capsys, "transfer", str(t2), "--load", str(tmp_path / "t1"), "--out", str(tmp_path / "t2"))[0] == 0
    names = sorted(p.name for p in (tmp_path / "t2").glob("*.csv"))
    assert names == ["task2_hrl+T.csv", "task2_reprel+T.csv"]


def test_transfer_missing_tables(capsys, tmp_path):
    t2 = small_manifest(tmp_path, "task2.taxi", "task2")
    (tmp_path / "empty").mkdir()
    code, _, err = run(capsys, "transfer", str(t2), "--load", str(tmp_path / "empty"), "--out", str(tmp_path / "x"))
    assert code == 1 and "no saved tables" in err
    assert not (tmp_path / "x").exists()


def test_manifest_errors(tmp_path):
    p = tmp_path / "m.manifest"
    p.write_text("dfoci = nope.dfoci\n", encoding="utf-8")
    with pytest.raises(ManifestError):
        ExperimentManifest.from_file(p)
    p.write_text(f"dfoci = {DATA / 'taxi.dfoci'}\noperators = {DATA / 'taxi.ops'}\ninstance = {DATA / 'task1.taxi'}\nvariants = deep\n")
    with pytest.raises(ManifestError):
        ExperimentManifest.from_file(p)
    with pytest.raises(ManifestError):
        parse_kv("just words\n")


def test_shipped_manifests_parse():
    for name in ("task1", "task2", "transfer", "verify", "verify_corrupt"):
        m = ExperimentManifest.from_file(data_path(f"{name}.manifest"))
        assert m.dfoci.is_file()
    assert ExperimentManifest.from_file(data_path("task1.manifest")).config.alpha == 0.2
