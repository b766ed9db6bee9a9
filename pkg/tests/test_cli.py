import json

import pytest
from click.testing import CliRunner

from qcadec import cli, config, io
from qcadec import qca as Q
from qcadec.cli import EXIT_FAIL, EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE, fixture_path


@pytest.fixture(autouse=True)
def _restore_settings():
    from dataclasses import asdict

    before = asdict(config.get_settings())
    yield
    config.set_settings(**before)


def fx(name):
    return str(fixture_path(name))


def invoke(*args, env=None):
    return CliRunner().invoke(cli.main, list(args), env=env)


# -- decompose / verify -------------------------------------------------


def test_decompose_then_verify(tmp_path):
    out = tmp_path / "dec.json"
    r = invoke("decompose", fx("brick_r05_N5_seed7.json"), str(out))
    assert r.exit_code == EXIT_OK, r.output
    assert "layers: 1" in r.output
    assert cli.run(["verify", fx("brick_r05_N5_seed7.json"), str(out)]) == EXIT_OK


def test_tampered_gate_is_named(tmp_path, capsys):
    out = tmp_path / "dec.json"
    assert cli.run(["decompose", fx("brick_r05_N5_seed7.json"), str(out)]) == EXIT_OK
    data = io.load(out)
    target = data["gates"][3]
    m = io.matrix_from_json(target["matrix"])
    target["matrix"] = io.matrix_to_json(m * 1.5)
    io.save(data, out)
    capsys.readouterr()
    assert cli.run(["verify", fx("brick_r05_N5_seed7.json"), str(out)]) == EXIT_FAIL
    captured = capsys.readouterr()
    gate_id = f"L{target['layer']}.{target['position']}"
    assert f"gate {gate_id}" in captured.out
    assert f"verification failed at gate {gate_id}" in captured.err


def test_verify_dimension_mismatch(tmp_path):
    out = tmp_path / "dec.json"
    cli.run(["decompose", fx("brick_r05_N5_seed7.json"), str(out)])
    other = tmp_path / "q.json"
    io.save(io.qca_to_json(Q.shift_qca(5, 3)), other)
    assert cli.run(["verify", str(other), str(out)]) == EXIT_PRECONDITION


def test_identity_has_no_layers(tmp_path):
    out = tmp_path / "dec.json"
    r = invoke("decompose", fx("identity_N5.json"), str(out))
    assert r.exit_code == EXIT_OK
    assert io.load(out)["n_layers"] == 0


def test_small_ring_is_refused(tmp_path, capsys):
    code = cli.run(["decompose", fx("brick_r1_N4_seed3.json"), str(tmp_path / "x.json")])
    assert code == EXIT_PRECONDITION
    assert "requires N > 4r" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_json_errors(tmp_path, capsys):
    code = cli.run(["--json-errors", "decompose", fx("brick_r1_N4_seed3.json"), str(tmp_path / "x.json")])
    assert code == EXIT_PRECONDITION
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "SizeTooSmall"
    assert payload["exit_code"] == EXIT_PRECONDITION


def test_translation_invariant_option(tmp_path):
    out = tmp_path / "dec.json"
    assert cli.run(["decompose", "--ti", fx("ti_brick_r05_N5_seed5.json"), str(out)]) == EXIT_OK
    assert cli.run(["decompose", "--ti", fx("brick_r05_N5_seed7.json"), str(out)]) == EXIT_PRECONDITION


def test_intermediates_are_written(tmp_path):
    out = tmp_path / "dec.json"
    plain = tmp_path / "plain.json"
    inter = tmp_path / "inter"
    assert cli.run(["decompose", "--emit-intermediates", str(inter), fx("shift_N4_d2.json"), str(out)]) == EXIT_OK
    assert cli.run(["decompose", fx("shift_N4_d2.json"), str(plain)]) == EXIT_OK
    names = sorted(p.name for p in inter.iterdir())
    assert names == ["00_fine_0.json", "01_coarse_1.json"]
    assert out.read_bytes() == plain.read_bytes()
    assert cli.run(["validate", "--check", "connected", str(inter / names[0])]) == EXIT_OK


# -- radius -------------------------------------------------------------


def test_radius_pass_and_witness(capsys):
    assert cli.run(["radius", fx("shift_N4_d2.json"), "--r", "1/2"]) == EXIT_OK
    capsys.readouterr()
    assert cli.run(["radius", fx("shift_N4_d2.json"), "--r", "0"]) == EXIT_FAIL
    assert "input 0 influences output 1" in capsys.readouterr().out


@pytest.mark.parametrize("method", ["algebraic", "channel"])
def test_radius_single_method(method):
    assert cli.run(["radius", fx("cz_ring_N6.json"), "--method", method]) == EXIT_OK
    assert cli.run(["radius", fx("cz_ring_N6.json"), "--method", method, "--r", "1/2"]) == EXIT_FAIL


# -- validate -----------------------------------------------------------


@pytest.mark.parametrize("check,code", [
    ("partition", EXIT_OK),
    ("connected", EXIT_OK),
    ("strong", EXIT_FAIL),
    ("corr-length=0", EXIT_FAIL),
    ("corr-length=1", EXIT_OK),
])
def test_validate_checks(check, code):
    assert cli.run(["validate", fx("connected_not_strong_partition.json"), "--check", check]) == code


def test_validate_factorisation():
    assert cli.run(["validate", fx("factorisation_N3_d2.json"), "--check", "corr-length=0"]) == EXIT_OK


def test_validate_unknown_check():
    assert cli.run(["validate", fx("factorisation_N3_d2.json"), "--check", "bogus"]) == EXIT_USAGE


# -- gen ----------------------------------------------------------------


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert cli.run(["gen", "--kind", "brick", "--N", "5", "--seed", "3", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert cli.run(["gen", "--kind", "brick", "--N", "5", "--seed", "4", str(b)]) == EXIT_OK
    assert a.read_bytes() != b.read_bytes()


def test_gen_uses_the_global_seed(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.run(["--seed", "9", "gen", "--kind", "random-ti", str(a)])
    cli.run(["gen", "--kind", "random-ti", "--seed", "9", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert Q.is_translation_invariant(io.qca_from_json(io.load(a)))


def test_gen_shift_and_mixed_dims(tmp_path):
    s = tmp_path / "s.json"
    assert cli.run(["gen", "--kind", "shift", "--N", "4", "--dims", "2", str(s)]) == EXIT_OK
    assert io.qca_from_json(io.load(s)).dim == 16
    m = tmp_path / "m.json"
    assert cli.run(["gen", "--kind", "brick", "--N", "3", "--dims", "2,3,2", str(m)]) == EXIT_OK
    assert io.qca_from_json(io.load(m)).in_dims == [2, 3, 2]


def test_generated_deep_brick_on_small_ring_is_refused(tmp_path):
    q = tmp_path / "q.json"
    assert cli.run(["gen", "--kind", "brick", "--N", "4", "--layers", "3", str(q)]) == EXIT_OK
    assert cli.run(["decompose", str(q), str(tmp_path / "d.json")]) == EXIT_PRECONDITION


# -- settings -----------------------------------------------------------


def test_tolerance_from_environment():
    r = invoke("selftest", env={"QCD_TOL": "1e-7"})
    assert r.exit_code == EXIT_OK
    assert config.get_settings().tol == pytest.approx(1e-7)


def test_non_positive_tolerance_is_rejected():
    assert cli.run(["--tol", "0", "selftest"]) == EXIT_USAGE


def test_selftest_passes():
    r = invoke("selftest")
    assert r.exit_code == EXIT_OK
    lines = r.output.strip().splitlines()
    assert len(lines) == 7 and all(line.startswith("PASS") for line in lines)
