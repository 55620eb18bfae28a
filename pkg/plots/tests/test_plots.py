import numpy as np
import pytest

from nonradial_plots import SchemaError, main
from nonradial_plots.cli import _solution_shape

SOLUTION = "x1,x2,u1\n0.5,0,0.1\n-0.5,0,0.2\n0,0.5,-0.3\n0,-0.5,0\n0,0,0\n"
SOLUTION3 = ("x1,x2,x3,u1\n0.5,0,0,0.1\n-0.5,0,0,0.2\n"
             "0,0.5,0,-0.3\n0,0,0.5,0.4\n0,0,0,0\n")
HISTORY = "iter,delta_norm2,ratio\n1,0.5,0\n2,0.1,0.2\n3,0.001,0.01\n"
SWEEP = ("R,gamma,delta,eta,verdict,binding_constraint\n"
         "1,1,2,3,not_admissible,delta >= 1\n"
         "1,0.5,0.5,0.1,admissible,\n")


def _png(path):
    data = path.read_bytes()
    assert len(data) > 0
    assert data[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("kind,text", [
    ("heatmap", SOLUTION), ("heatmap", SOLUTION3), ("slice", SOLUTION),
    ("convergence", HISTORY), ("region", SWEEP),
])
def test_each_kind_renders_nonempty_png(tmp_path, kind, text):
    src = tmp_path / "in.csv"
    src.write_text(text)
    out = tmp_path / "out.png"
    assert main([kind, str(src), str(out)]) == 0
    _png(out)


def test_solution_header_shapes():
    assert _solution_shape(["x1", "x2", "u1"], "p") == (2, 1)
    assert _solution_shape(["x1", "x2", "x3", "u1", "u2"], "p") == (3, 2)
    for bad in (["x1", "u1"],                      # n = 1
                ["x1", "x2"],                      # no components
                ["x1", "x2", "u2"],                # gap in components
                ["x1", "x2", "u1", "x3"],          # x after u
                ["u1", "x1", "x2"]):               # wrong order
        with pytest.raises(SchemaError):
            _solution_shape(bad, "p")


@pytest.mark.parametrize("kind,text", [
    ("heatmap", SOLUTION), ("slice", SOLUTION),
    ("convergence", HISTORY), ("region", SWEEP),
])
def test_mutated_header_exits_1_and_names_it(tmp_path, capsys, kind, text):
    lines = text.splitlines()
    lines[0] = lines[0].replace(lines[0].split(",")[0],
                                lines[0].split(",")[0] + "_oops", 1)
    src = tmp_path / "in.csv"
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "out.png"
    assert main([kind, str(src), str(out)]) == 1
    err = capsys.readouterr().err
    assert "error:" in err
    assert lines[0].split(",")[0] in err           # names the offending header
    assert not out.exists()


def test_missing_file_and_bad_kind(tmp_path, capsys):
    assert main(["convergence", str(tmp_path / "nope.csv"),
                 str(tmp_path / "o.png")]) == 1
    assert main(["pie", str(tmp_path / "nope.csv"),
                 str(tmp_path / "o.png")]) == 1
    assert "error:" in capsys.readouterr().err


def test_non_numeric_rows_rejected(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text("iter,delta_norm2,ratio\n1,abc,0\n")
    assert main(["convergence", str(src), str(tmp_path / "o.png")]) == 1
    assert "error:" in capsys.readouterr().err


def test_empty_file_rejected(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("")
    assert main(["region", str(src), str(tmp_path / "o.png")]) == 1


# ---------------------------------------------------------------------------
# end-to-end against the solver CLI's real artifacts


@pytest.fixture(scope="module")
def quadratic_artifacts(tmp_path_factory):
    from nonradial import cli as solver_cli
    out = tmp_path_factory.mktemp("artifacts")
    cfg = out / "quadratic.cfg"
    cfg.write_text("a1 = p1^2\ngamma_sweep = true\nresolution = 16\n"
                   f"c_op = 0.8\nout = {out}\n")
    assert solver_cli.main(["solve", str(cfg)]) == 0
    assert solver_cli.main(["sweep", str(cfg)]) == 0
    return out


def test_quadratic_run_end_to_end(tmp_path, quadratic_artifacts):
    art = quadratic_artifacts
    for kind, name in (("heatmap", "solution.csv"), ("slice", "solution.csv"),
                       ("convergence", "history.csv"), ("region", "sweep.csv")):
        out = tmp_path / f"{kind}.png"
        assert main([kind, str(art / name), str(out)]) == 0
        _png(out)


def test_quadratic_history_is_monotone_decreasing(quadratic_artifacts):
    # sanity of the artifact the convergence plot displays
    lines = (quadratic_artifacts / "history.csv").read_text().splitlines()[1:]
    norms = [float(l.split(",")[1]) for l in lines]
    assert all(b <= a for a, b in zip(norms, norms[1:]))


def test_quadratic_sweep_region_contains_small_gamma(quadratic_artifacts):
    rows = (quadratic_artifacts / "sweep.csv").read_text().splitlines()[1:]
    verdicts = {float(r.split(",")[1]): r.split(",")[4] for r in rows}
    gammas = sorted(verdicts)
    assert verdicts[gammas[0]] == "admissible"
