import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from encoder_di.cli import main
from encoder_di.repio import RepresentationSet, read_representations, write_representations

SMALL = ["--dim", "16", "--n-p1", "1000", "--n-p2", "1000", "--n-n", "1000"]


def schema(name):
    return json.loads(resources.files("encoder_di").joinpath(f"schemas/{name}.schema.json").read_text())


def run(argv, capsys=None):
    code = main(argv)
    out = capsys.readouterr().out if capsys else None
    return code, out


def load_report(path):
    report = json.loads(path.read_text())
    return report


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("world")
    assert main(["synth-gen", *SMALL, "--seed", "1", "--out", str(d / "w"), "--report", str(d / "r.json")]) == 0
    return d / "w"


def test_synth_gen_files(world_dir, tmp_path):
    names = sorted(p.name for p in world_dir.iterdir())
    assert len(names) == 10 and "manifest.json" in names
    report = load_report(world_dir.parent / "r.json")
    jsonschema.validate(report, schema("synth-gen"))
    assert report["manifest"]["seed"] == 1 and len(report["world"]["files"]) == 9


def test_synth_gen_deterministic(world_dir, tmp_path):
    assert main(["synth-gen", *SMALL, "--seed", "1", "--out", str(tmp_path / "w"),
                 "--report", str(tmp_path / "r.json")]) == 0
    for p in world_dir.iterdir():
        assert (tmp_path / "w" / p.name).read_bytes() == p.read_bytes()


@pytest.mark.parametrize("flags, name", [(["--rho", "0"], "--rho"), (["--rho", "1.5"], "--rho"),
                                         (["--n-p1", "1"], "--n-p1"), (["--steal-noise", "-1"], "--steal-noise")])
def test_synth_gen_bad_flags(tmp_path, capsys, flags, name):
    with pytest.raises(SystemExit) as exc:
        main(["synth-gen", *flags, "--out", str(tmp_path / "w")])
    assert exc.value.code == 2
    assert name in capsys.readouterr().err


def infer_args(world_dir, role):
    return ["infer", "--p1", str(world_dir / f"{role}_P1.repr"), "--p2", str(world_dir / f"{role}_P2.repr"),
            "--n", str(world_dir / f"{role}_N.repr"), "--k", "4"]


@pytest.mark.parametrize("role, decision", [("victim", "stolen"), ("stolen", "stolen"),
                                            ("independent", "inconclusive")])
def test_infer(world_dir, capsys, role, decision):
    code, out = run(infer_args(world_dir, role), capsys)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, schema("infer"))
    assert report["verdict"]["decision"] == decision
    assert report["verdict"]["label"] == role
    assert [i["path"] for i in report["manifest"]["inputs"]][0].endswith(f"{role}_P1.repr")


def test_infer_options(world_dir, tmp_path):
    out = tmp_path / "v.json"
    args = infer_args(world_dir, "victim") + ["--cov", "diag", "--standardize", "--label", "x", "--out", str(out)]
    assert main(args) == 0
    verdict = load_report(out)["verdict"]
    assert verdict["covariance_kind"] == "diagonal" and verdict["label"] == "x"


def test_infer_missing_file(world_dir, tmp_path, capsys):
    args = infer_args(world_dir, "victim")
    args[2] = str(tmp_path / "nope.repr")
    assert main(args) == 3
    assert "nope.repr" in capsys.readouterr().err


def test_infer_bad_alpha(world_dir, capsys):
    with pytest.raises(SystemExit) as exc:
        main(infer_args(world_dir, "victim") + ["--alpha", "1.5"])
    assert exc.value.code == 2 and "--alpha" in capsys.readouterr().err


def test_infer_dimension_mismatch(world_dir, tmp_path, capsys):
    write_representations(RepresentationSet(np.ones((20, 3))), tmp_path / "n.repr")
    args = infer_args(world_dir, "victim")
    args[6] = str(tmp_path / "n.repr")
    assert main(args) == 2
    assert "DimensionMismatch" in capsys.readouterr().err


def test_similarity(world_dir, tmp_path, capsys):
    a = str(world_dir / "victim_P1.repr")
    hist = tmp_path / "h.csv"
    code, out = run(["similarity", "--a", a, "--b", a, "--hist-out", str(hist), "--hist-bins", "5"], capsys)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, schema("similarity"))
    assert report["similarity"]["cosine_score"] == pytest.approx(1.0)
    assert hist.read_text().splitlines()[0] == "bin_left,bin_right,count"
    assert hist.read_text().splitlines()[-1].endswith(",1000")


def test_similarity_misaligned(world_dir, tmp_path, capsys):
    write_representations(RepresentationSet(np.random.default_rng(0).normal(size=(10, 16))), tmp_path / "s.repr")
    assert main(["similarity", "--a", str(world_dir / "victim_P1.repr"), "--b", str(tmp_path / "s.repr")]) == 2
    assert "RowCountMismatch" in capsys.readouterr().err


def test_entropy_modes(world_dir, capsys):
    a, b = str(world_dir / "victim_P1.repr"), str(world_dir / "stolen_P1.repr")
    indep = str(world_dir / "independent_P1.repr")
    code, out = run(["entropy", "--a", a], capsys)
    report = json.loads(out)
    jsonschema.validate(report, schema("entropy"))
    assert code == 0 and report["entropy"]["entropy_a"]["n_points"] == 1000

    code, out = run(["entropy", "--a", a, "--b", b], capsys)
    body = json.loads(out)["entropy"]
    jsonschema.validate(json.loads(out), schema("entropy"))
    assert body["mutual_information"] > 0 and body["joint_entropy"]["dim"] == 32

    code, out = run(["entropy", "--a", a, "--b", b, "--baseline", indep], capsys)
    report = json.loads(out)
    jsonschema.validate(report, schema("entropy"))
    assert 0 <= report["entropy"]["mi_score"]["s"] <= 1


def test_entropy_baseline_needs_b(world_dir, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["entropy", "--a", str(world_dir / "victim_P1.repr"), "--baseline", str(world_dir / "victim_N.repr")])
    assert exc.value.code == 2


def test_obfuscate(world_dir, tmp_path, capsys):
    src = world_dir / "victim_P1.repr"
    out = tmp_path / "o.repr"
    code, text = run(["obfuscate", "--in", str(src), "--kind", "pad", "--pad-dim", "24",
                      "--pad-mode", "random_positions", "--seed", "3", "--out", str(out)], capsys)
    assert code == 0
    report = json.loads(text)
    jsonschema.validate(report, schema("obfuscate"))
    assert read_representations(out).dim == 24 and report["obfuscation"]["dim"] == 24

    code, _ = run(["obfuscate", "--in", str(src), "--kind", "transform", "--scale", "2", "--offset", "1",
                   "--out", str(out)], capsys)
    np.testing.assert_allclose(read_representations(out).data, 2 * read_representations(src).data + 1, rtol=1e-6)


def test_obfuscate_bad_pad(world_dir, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["obfuscate", "--in", str(world_dir / "victim_P1.repr"), "--kind", "pad", "--pad-dim", "16",
              "--out", str(tmp_path / "o.repr")])
    assert exc.value.code == 2 and "--pad-dim" in capsys.readouterr().err


def strip_timing(text):
    report = json.loads(text)
    report.pop("timing")
    return json.dumps(report, sort_keys=True)


def test_thread_count_does_not_change_results(world_dir, capsys):
    base = infer_args(world_dir, "stolen")
    _, one = run(base + ["--threads", "1"], capsys)
    _, eight = run(base + ["--threads", "8"], capsys)
    assert strip_timing(one) == strip_timing(eight)
    a, b = str(world_dir / "victim_P1.repr"), str(world_dir / "stolen_P1.repr")
    _, one = run(["entropy", "--a", a, "--b", b, "--threads", "1"], capsys)
    _, eight = run(["entropy", "--a", a, "--b", b, "--threads", "8"], capsys)
    assert strip_timing(one) == strip_timing(eight)


def test_env_thread_fallback(world_dir, capsys, monkeypatch):
    monkeypatch.setenv("ENCODER_DI_THREADS", "3")
    _, out = run(["entropy", "--a", str(world_dir / "victim_P1.repr")], capsys)
    assert json.loads(out)["timing"]["threads"] == 3


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "encoder_di", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
