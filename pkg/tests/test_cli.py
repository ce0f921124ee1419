import json
import subprocess
import sys

import numpy as np
import pytest

from hodgekit import Cochain, OperatorSet, cli, harmonic_basis, meshgen
from hodgekit.cli import RunConfig, cmd_verify, main
from hodgekit.mesh import write_off


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def octa_off(tmp_path):
    path = tmp_path / "octa.off"
    path.write_text(write_off(meshgen.octahedron()))
    return str(path)


@pytest.mark.parametrize("mesh, expected", [
    ("builtin:octahedron", [1, 0, 1]),
    ("builtin:torus3", [1, 2, 1]),
    ("builtin:triangle", [1, 0, 0]),
])
def test_info(mesh, expected, capsys):
    code, out, _ = run(["info", "--mesh", mesh], capsys)
    data = json.loads(out)
    assert code == 0
    assert data["betti"] == expected == data["harmonic_dims"]
    assert data["agree"] is True


def test_info_from_file_all_schemes(octa_off, capsys):
    for scheme in ("combinatorial", "lumped-barycentric", "lumped-circumcentric"):
        code, out, _ = run(["info", "--mesh", octa_off, "--scheme", scheme], capsys)
        assert code == 0
        assert json.loads(out)["counts"] == [6, 12, 8]


def test_info_disagreement_exit_3(capsys, monkeypatch):
    monkeypatch.setattr(cli, "betti", lambda K, p: 7)
    code, out, _ = run(["info", "--mesh", "builtin:c4"], capsys)
    assert code == 3
    assert json.loads(out)["agree"] is False


def test_ambiguous_threshold_exit_4(capsys):
    # C4 spectrum is (0, 2, 2, 4): a cut at 3 leaves no clear gap
    code, _, err = run(["info", "--mesh", "builtin:c4", "--threshold", "0.75"], capsys)
    assert code == 4 and "spectral gap" in err


def test_genmesh_round_trip(tmp_path, capsys):
    path = tmp_path / "t.off"
    assert main(["genmesh", "torus8", "--out", str(path)]) == 0
    code, out, _ = run(["info", "--mesh", str(path), "--scheme", "lumped-circumcentric"], capsys)
    assert code == 0 and json.loads(out)["counts"] == [64, 192, 128]


@pytest.mark.parametrize("argv", [
    ["info", "--mesh", "missing.off"],
    ["info", "--mesh", "builtin:nothing"],
    ["info", "--mesh", "builtin:c4", "--degree", "2"],
    ["info", "--mesh", "builtin:c4", "--threshold", "1.5"],
    ["spectrum", "--mesh", "builtin:c4", "--modes", "-1"],
    ["spectrum", "--mesh", "builtin:c4", "--degree", "0", "--modes", "4"],
    ["info"],
])
def test_input_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err.startswith("hodgekit:")


def test_malformed_off_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 2\n")
    code, _, err = run(["info", "--mesh", str(path)], capsys)
    assert code == 2 and "line 6" in err


def test_circumcentric_on_bad_mesh_exit_2(tmp_path, capsys):
    path = tmp_path / "grid.off"
    path.write_text(write_off(meshgen.torus(8)))
    code, _, err = run(["info", "--mesh", str(path), "--scheme", "lumped-circumcentric"], capsys)
    assert code == 2 and "well-centered" in err


def test_decompose_zero_cochain(tmp_path, capsys):
    path = tmp_path / "z.json"
    path.write_text(Cochain(1, np.zeros(12)).to_json())
    code, out, _ = run(["decompose", "--mesh", "builtin:octahedron", "--cochain", str(path)], capsys)
    data = json.loads(out)
    assert code == 0
    assert data["residual"] == 0
    assert not any(data["exact"] + data["coexact"] + data["harmonic"])


def test_decompose_harmonic_torus(tmp_path, capsys):
    ops = OperatorSet.build(meshgen.torus3())
    h = harmonic_basis(ops, 1).vectors @ [1.0, 2.0]
    path = tmp_path / "h.json"
    path.write_text(Cochain(1, h).to_json())
    code, out, _ = run(["decompose", "--mesh", "builtin:torus3", "--cochain", str(path)], capsys)
    data = json.loads(out)
    assert code == 0
    n = np.linalg.norm(h)
    assert np.linalg.norm(data["exact"]) <= 1e-9 * n
    assert np.linalg.norm(data["coexact"]) <= 1e-9 * n


def test_decompose_random_and_degree_mismatch(tmp_path, capsys):
    code, out, _ = run(["decompose", "--mesh", "builtin:torus8", "--degree", "1", "--seed", "4"], capsys)
    data = json.loads(out)
    assert code == 0 and data["residual"] <= 1e-9 and data["orthogonality"] <= 1e-9
    x = np.array(data["exact"]) + data["coexact"] + np.array(data["harmonic"])
    np.testing.assert_allclose(x, np.random.default_rng(4).standard_normal(192), atol=1e-12)
    path = tmp_path / "c.json"
    path.write_text(Cochain(1, np.ones(12)).to_json())
    code, _, _ = run(["decompose", "--mesh", "builtin:octahedron", "--degree", "0", "--cochain", str(path)], capsys)
    assert code == 2
    path.write_text(Cochain(1, np.ones(11)).to_json())
    code, _, err = run(["decompose", "--mesh", "builtin:octahedron", "--cochain", str(path)], capsys)
    assert code == 2 and "11 values" in err
    path.write_text(Cochain(5, np.ones(1)).to_json())
    assert run(["decompose", "--mesh", "builtin:octahedron", "--cochain", str(path)], capsys)[0] == 2


def test_green_command(capsys):
    code, out, _ = run(["green", "--mesh", "builtin:torus3", "--degree", "2"], capsys)
    data = json.loads(out)
    assert code == 0 and data["degree"] == 2 and data["residual"] <= 1e-8


def test_spectrum_c4(capsys):
    code, out, _ = run(["spectrum", "--mesh", "builtin:c4", "--degree", "0", "--modes", "3"], capsys)
    data = json.loads(out)
    assert code == 0
    np.testing.assert_allclose(data["eigenvalues"], [2, 2, 4], atol=1e-12)
    assert data["harmonic_dim"] == 1
    assert set(data) == {"degree", "harmonic_dim", "eigenvalues", "residuals"}


def test_spectrum_multiple_degrees_in_order(capsys, monkeypatch):
    monkeypatch.setenv("HODGEKIT_THREADS", "3")
    code, out, _ = run(["spectrum", "--mesh", "builtin:octahedron", "--modes", "2"], capsys)
    data = json.loads(out)
    assert code == 0 and [d["degree"] for d in data] == [0, 1, 2]
    monkeypatch.setenv("HODGEKIT_THREADS", "1")
    assert run(["spectrum", "--mesh", "builtin:octahedron", "--modes", "2"], capsys)[1] == out


def test_spectrum_expansion_csv(tmp_path, capsys):
    csv = tmp_path / "trace.csv"
    code, _, _ = run(["spectrum", "--mesh", "builtin:torus8", "--degree", "1", "--expansion-csv", str(csv),
                      "--scheme", "lumped-circumcentric"], capsys)
    assert code == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "n,residual,bound"
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert rows.shape == (193, 3)
    assert np.all(rows[:, 2] >= rows[:, 1])
    norm = rows[0, 1]  # residual at n = 0 is the norm of the cochain
    assert rows[-1, 1] <= 1e-8 * norm


def test_expand_matches_spectrum_csv(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    main(["spectrum", "--mesh", "builtin:c12", "--degree", "1", "--seed", "2", "--expansion-csv", str(a)])
    capsys.readouterr()
    main(["expand", "--mesh", "builtin:c12", "--degree", "1", "--seed", "2", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["info", "--mesh", "builtin:torus8", "--scheme", "lumped-barycentric"],
    ["decompose", "--mesh", "builtin:torus8", "--degree", "1", "--seed", "9"],
    ["spectrum", "--mesh", "builtin:torus3"],
    ["expand", "--mesh", "builtin:octahedron", "--degree", "2", "--seed", "1"],
    ["green", "--mesh", "builtin:octahedron", "--degree", "1", "--seed", "1"],
])
def test_outputs_are_byte_identical(argv, capsys):
    first = run(argv, capsys)
    second = run(argv, capsys)
    assert first == second and first[0] == 0


def test_verify_octahedron_all_schemes(capsys):
    code, out, _ = run(["verify", "--mesh", "builtin:octahedron", "--samples", "20"], capsys)
    report = json.loads(out)
    assert code == 0 and report["ok"] and report["failed"] == 0
    assert {r["scheme"] for r in report["properties"]} == {"combinatorial", "lumped-barycentric",
                                                           "lumped-circumcentric"}
    for r in report["properties"]:
        assert r["anchor"] and float(r["worst"]) <= float(r["tol"])


def test_verify_torus_combinatorial(capsys):
    code, out, _ = run(["verify", "--mesh", "builtin:torus8", "--scheme", "combinatorial", "--samples", "20"],
                       capsys)
    assert code == 0 and json.loads(out)["ok"]


def test_verify_corrupted_mass_fails_adjointness(capsys):
    code, out, _ = run(["verify", "--mesh", "builtin:c4", "--scheme", "combinatorial", "--corrupt-mass"], capsys)
    report = json.loads(out)
    assert code == 1 and not report["ok"]
    failed = {r["property"] for r in report["properties"] if not r["passed"]}
    assert "adjointness" in failed


def test_cmd_verify_seeded_determinism(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        cfg = RunConfig(mesh="builtin:torus3", seed=5, out=str(path))
        assert cmd_verify(cfg, samples=10) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hodgekit", "info", "--mesh", "builtin:c12"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["betti"] == [1, 1]
