import json
import random
import shutil

import pytest

from toeplitz_forge.cli import run
from toeplitz_forge.io import BLOCKS_FILE, BUNDLE_FILES, CHAIN_FILE, MATRICES_FILE


@pytest.fixture
def example_dir(tmp_path):
    out = tmp_path / "example"
    assert run(["example", "--out", str(out)]) == 0
    return out


def test_realize_writes_a_verified_bundle(tmp_path, capsys):
    out = tmp_path / "run1"
    code = run(["realize-simplex", "--extremes", "2", "--group-dim", "1", "--depth", "4", "--out", str(out)])
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == sorted(BUNDLE_FILES)
    assert "checks passed" in capsys.readouterr().out
    assert run(["verify", "--bundle", str(out)]) == 0
    assert run(["z-to-zd", "--from-bundle", str(out), "--group-dim", "2", "--out", str(tmp_path / "run2")]) == 0


def test_realize_rejects_zero_extremes(tmp_path, capsys):
    assert run(["realize-simplex", "--extremes", "0", "--out", str(tmp_path / "x")]) == 2
    assert "--extremes" in capsys.readouterr().err


def test_realize_needs_a_target(tmp_path):
    assert run(["realize-simplex", "--out", str(tmp_path / "x")]) == 2


def test_usage_errors_exit_with_two(capsys):
    assert run([]) == 2
    assert run(["bogus"]) == 2
    assert run(["verify"]) == 2
    assert run(["verify", "--bundle", "missing-dir"]) == 2


def test_verify_detects_tampering(example_dir, capsys):
    """A single edited entry in matrices.json flips verify to exit 1"""
    assert run(["verify", "--bundle", str(example_dir)]) == 0
    data = json.loads((example_dir / MATRICES_FILE).read_text())
    data["augmented"][0][1][0] = str(int(data["augmented"][0][1][0]) + 1)
    (example_dir / MATRICES_FILE).write_text(json.dumps(data))
    capsys.readouterr()
    assert run(["verify", "--bundle", str(example_dir)]) == 1
    assert "augmented" in capsys.readouterr().err


def _entries(data, *path):
    """Paths to every integer leaf below data[path]"""
    node = data
    for key in path:
        node = node[key]
    if isinstance(node, list):
        return [p for i in range(len(node)) for p in _entries(data, *path, i)]
    if isinstance(node, dict):
        return [p for key, child in node.items() if child is not None for p in _entries(data, *path, key)]
    return [path]


def _integer_entries(directory):
    chain = json.loads((directory / CHAIN_FILE).read_text())
    matrices = json.loads((directory / MATRICES_FILE).read_text())
    blocks = json.loads((directory / BLOCKS_FILE).read_text())
    entries = [(CHAIN_FILE, p) for p in _entries(chain, "levels")]
    entries += [(MATRICES_FILE, p) for key in ("p", "managed", "augmented") for p in _entries(matrices, key)]
    entries += [(BLOCKS_FILE, p) for p in _entries(blocks, "arrangements")]
    return entries


def test_verify_rejects_random_single_entry_edits(example_dir, tmp_path, capsys):
    rng = random.Random(20)
    entries = _integer_entries(example_dir)
    for i, (name, path) in enumerate(rng.sample(entries, 20)):
        copy = shutil.copytree(example_dir, tmp_path / f"edit{i}")
        data = json.loads((copy / name).read_text())
        parent = data
        for key in path[:-1]:
            parent = parent[key]
        value = parent[path[-1]]
        edited = int(value) + rng.randint(1, 3)
        parent[path[-1]] = edited if isinstance(value, int) else str(edited)
        (copy / name).write_text(json.dumps(data))
        capsys.readouterr()
        assert run(["verify", "--bundle", str(copy)]) == 1, (name, path)
        err = capsys.readouterr().err
        assert "✗" in err and "reports failed" in err, (name, path)


def test_window_command(example_dir):
    assert run(["window", "--bundle", str(example_dir), "--radius", "40"]) == 0
    rows = (example_dir / "window.csv").read_text().splitlines()
    assert len(rows) == 82
    assert rows[1 + 40 + 36] == "36,4"
    assert run(["window", "--bundle", str(example_dir), "--radius", "400"]) == 2
    assert run(["window", "--bundle", str(example_dir), "--radius", "2", "--format", "pgm"]) == 2


def test_example_on_the_square_with_window(tmp_path):
    out = tmp_path / "square"
    assert run(["example", "--group-dim", "2", "--levels", "2", "--window", "13", "--out", str(out)]) == 0
    assert (out / "window.pgm").read_text().splitlines()[2] == "27 27"


def test_vertices_and_states(example_dir, capsys):
    capsys.readouterr()
    assert run(["vertices", "--bundle", str(example_dir), "--stage", "0"]) == 0
    out = capsys.readouterr().out
    assert "stage 0:" in out
    assert "v1 = (1/3, 2/9, 4/9)" in out
    assert run(["states", "--bundle", str(example_dir), "--stage", "0", "--vertex", "1"]) == 0
    assert "z_0 = (1/27, 2/81, 4/81)" in capsys.readouterr().out
    assert run(["states", "--bundle", str(example_dir), "--stage", "0", "--vertex", "9"]) == 2
    assert run(["states", "--bundle", str(example_dir), "--stage", "5", "--vertex", "1"]) == 2


def test_z_to_zd_from_file(tmp_path):
    source = tmp_path / "seq.json"
    source.write_text(json.dumps({"p": [1, 2, 4, 8, 16], "matrices": [[[1, 1], [1, 1]]] * 4}))
    out = tmp_path / "zd"
    assert run(["z-to-zd", "--input", str(source), "--out", str(out)]) == 2
    assert run(["z-to-zd", "--input", str(source), "--pre-telescope", "--out", str(out)]) == 0


def test_invalid_environment_is_a_usage_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TOEPLITZ_FORGE_THREADS", "0")
    assert run(["example", "--out", str(tmp_path / "x")]) == 2
    assert "TOEPLITZ_FORGE_THREADS" in capsys.readouterr().err


def test_config_command(monkeypatch, capsys):
    assert run(["config"]) == 0
    assert "TOEPLITZ_FORGE_THREADS" in capsys.readouterr().out
    monkeypatch.setenv("TOEPLITZ_FORGE_THREADS", "0")
    assert run(["config"]) == 1
