import pytest

from qtwist.cli import main
from qtwist.config import (MalformedValueError, MomentOrderError, ParityError, UnknownKeyError, parse_config,
                           read_config_file)
from qtwist.errors import ConfigurationError
from qtwist.suites import run_suite


def test_defaults_and_resolution():
    cfg = parse_config()
    assert cfg.weight == 18 and cfg.resolved_quantity == "derivative" and cfg.resolved_alpha == 1.0
    assert "weight" in cfg.defaults_used
    cfg = parse_config(overrides={"weight": "12", "k": "0.75"})
    assert cfg.resolved_quantity == "value" and cfg.resolved_alpha == 0.5
    assert "weight" not in cfg.defaults_used
    assert any(line.endswith("(default)") for line in cfg.as_lines())


def test_file_and_override_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nkappa = 12\nX = 2e4   # trailing comment\nx_grid = 4096, 8192\n\n")
    assert read_config_file(path)["X"] == "2e4"
    cfg = parse_config(path, {"X": "5000"})
    assert cfg.weight == 12 and cfg.X == 5000.0 and cfg.x_grid == (4096.0, 8192.0)


@pytest.mark.parametrize("overrides,error", [
    ({"bogus": "1"}, UnknownKeyError),
    ({"weight": "twelve"}, MalformedValueError),
    ({"weight": "14"}, MalformedValueError),
    ({"weight": "12", "quantity": "derivative"}, ParityError),
    ({"weight": "18", "quantity": "value"}, ParityError),
    ({"k": "0.5"}, MomentOrderError),
    ({"ell1": "7"}, MalformedValueError),
    ({"mode": "fast"}, MalformedValueError),
    ({"twists": "1,2"}, MalformedValueError),
    ({"mollifier": "maybe"}, MalformedValueError),
    ({"X": "8"}, MalformedValueError),
])
def test_config_errors(overrides, error):
    with pytest.raises(error):
        parse_config(overrides=overrides)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        parse_config(tmp_path / "missing.cfg")
    bad = tmp_path / "bad.cfg"
    bad.write_text("weight 12\n")
    with pytest.raises(MalformedValueError):
        parse_config(bad)


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["verify-charsum", "--X", "4000", "--out-dir", out]) == 0
    assert "[PASS] char average n=1" in capsys.readouterr().out
    assert (tmp_path / "out" / "verify-charsum.txt").exists()
    assert main(["verify-afe", "--set", "bogus=1"]) == 2
    assert main(["verify-afe", "--weight", "12", "--set", "quantity=derivative"]) == 2
    assert main(["verify-afe", "--set", "novalue"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["verify-afe", "--cache-dir", str(blocker / "sub"), "--out-dir", out]) == 3
    err = capsys.readouterr().err
    assert "configuration error" in err and "resource error" in err


def test_cli_failed_check_exit_code(tmp_path, monkeypatch, capsys):
    from qtwist import suites
    from qtwist.errors import NumericalError

    def failing(ctx):
        return [suites.Check("always fails", False, "forced")]

    def diverging(ctx):
        raise NumericalError("no convergence", {"step": 1})

    monkeypatch.setitem(suites.SUITES, "verify-charsum", failing)
    assert main(["verify-charsum", "--out-dir", str(tmp_path)]) == 1
    assert "[FAIL] always fails: forced" in capsys.readouterr().out
    monkeypatch.setitem(suites.SUITES, "verify-charsum", diverging)
    assert main(["verify-charsum", "--out-dir", str(tmp_path)]) == 1
    assert "numerical failure" in capsys.readouterr().err


def test_cli_dump_family(tmp_path):
    path = tmp_path / "fam.txt"
    assert main(["verify-charsum", "--X", "100", "--set", "charsum_n=1", "--dump-family", str(path),
                 "--out-dir", str(tmp_path)]) == 0
    ds = [int(x) for x in path.read_text().split()]
    assert ds[:6] == [1, 3, 5, 7, 11, 13] and 9 not in ds and max(ds) < 100


def test_report_digest_ignores_threads(tmp_path):
    base = {"X": "3000", "out_dir": str(tmp_path)}
    _, text1, d1 = run_suite(parse_config(overrides={**base, "threads": "1"}), ["sweep"])
    _, text4, d4 = run_suite(parse_config(overrides={**base, "threads": "4"}), ["sweep"])
    assert d1 == d4
    assert "threads = 1" in text1 and "threads = 4" in text4
