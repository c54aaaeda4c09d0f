from pathlib import Path

import numpy as np
import pytest

from anonattack.dataset import Schema, Table

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str = "") -> None:
    prev = _ACCEPTANCE.get(criterion)
    if prev is not None:
        passed = passed and prev[0]
        detail = "; ".join(d for d in (prev[1], detail) if d)
    _ACCEPTANCE[criterion] = (passed, detail)


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def toy_schema():
    return Schema(attributes=("a", "b", "s"), qi=("a", "b"), sa="s")


@pytest.fixture
def toy_table(toy_schema):
    rows = [
        {"a": "x", "b": "p", "s": "u"},
        {"a": "x", "b": "q", "s": "u"},
        {"a": "y", "b": "p", "s": "w"},
        {"a": "y", "b": "q", "s": "w"},
        {"a": "x", "b": "p", "s": "w"},
        {"a": "y", "b": "p", "s": "u"},
    ]
    return Table.from_rows(toy_schema, rows)


@pytest.fixture
def experiment(tmp_path):
    rng = np.random.default_rng(0)
    lines = []
    for _ in range(400):
        s = int(rng.integers(0, 5))
        a = (s + int(rng.integers(0, 2))) % 4
        h = int(rng.integers(1, 80))
        lines.append(f"a{a},{h},b{rng.integers(3)},s{s}")
    (tmp_path / "d.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "d.yaml").write_text(
        "path: d.csv\nattributes: [a, h, b, s]\nqi: [a, h, b]\nsa: s\nbuckets: {h: [25, 40, 60]}\n"
    )
    (tmp_path / "exp.yaml").write_text(
        "dataset: d.yaml\nepsilons: [0.1, 10]\nrepetitions: 3\nl_values: [2, 3]\n"
        "merge_factors: [1, 2]\ndefinetti_repetitions: 2\niterations: 20\nwindow: 5\nseed: 4\n"
    )
    return tmp_path / "exp.yaml"
