import numpy as np
import pytest
from hypothesis import given, strategies as st

from anonattack.dataset import (
    MISSING,
    DatasetConfig,
    Schema,
    Table,
    attribute_domain,
    bucket_labels,
    bucketize,
    drop_missing_sa,
    encode,
    load_csv,
    load_dataset,
    load_dataset_config,
    split_train_test,
)
from anonattack.errors import ConfigError, DataError


def test_schema_rejects_sa_in_qi():
    with pytest.raises(ConfigError):
        Schema(("a", "s"), ("a", "s"), "s")


def test_schema_rejects_unknown_names():
    with pytest.raises(ConfigError):
        Schema(("a", "s"), ("b",), "s")


def test_schema_needs_qi():
    with pytest.raises(ConfigError):
        Schema(("a", "s"), (), "s")


def test_with_target_swaps_roles():
    s = Schema(("a", "b", "s"), ("a", "b"), "s").with_target("b")
    assert s.sa == "b" and s.qi == ("a", "s")


def test_load_csv_missing_and_rstrip(tmp_path, toy_schema):
    p = tmp_path / "d.csv"
    p.write_text("|header junk\nx, p, u.\n\ny, ?, w.\n")
    t = load_csv(p, toy_schema, comment="|", rstrip=".")
    assert t.n == 2
    assert list(t.column("s")) == ["u", "w"]
    assert t.column("b")[1] == MISSING


def test_load_csv_header_selects_columns(tmp_path, toy_schema):
    p = tmp_path / "d.tsv"
    p.write_text("s\tjunk\tb\ta\nu\t1\tp\tx\n")
    t = load_csv(p, toy_schema, header=True, delimiter="\t")
    assert t.row(0) == {"a": "x", "b": "p", "s": "u"}


def test_load_csv_header_missing_column(tmp_path, toy_schema):
    p = tmp_path / "d.tsv"
    p.write_text("a\tb\nx\tp\n")
    with pytest.raises(ConfigError):
        load_csv(p, toy_schema, header=True, delimiter="\t")


def test_load_csv_bad_arity_names_line(tmp_path, toy_schema):
    p = tmp_path / "d.csv"
    p.write_text("x,p,u\nx,p\n")
    with pytest.raises(DataError, match=":2:"):
        load_csv(p, toy_schema)


def test_load_csv_absent_file(tmp_path, toy_schema):
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv", toy_schema)


def test_drop_missing_sa(toy_schema):
    t = Table.from_rows(toy_schema, [{"a": "x", "b": "p", "s": MISSING}, {"a": MISSING, "b": "p", "s": "u"}])
    kept = drop_missing_sa(t)
    assert kept.n == 1 and kept.column("a")[0] == MISSING


def test_bucket_labels():
    assert bucket_labels([25, 40, 60]) == ["[0-25]", "[26-40]", "[41-60]", "60+"]


def test_bucketize_edges():
    s = Schema(("h", "s"), ("h",), "s")
    t = Table.from_rows(s, [{"h": v, "s": "u"} for v in ["0", "25", "26", "40", "41", "60", "61", "99", MISSING]])
    out = bucketize(t, "h", [25, 40, 60]).column("h").tolist()
    assert out == ["[0-25]", "[0-25]", "[26-40]", "[26-40]", "[41-60]", "[41-60]", "60+", "60+", MISSING]


def test_bucketize_non_numeric():
    s = Schema(("h", "s"), ("h",), "s")
    t = Table.from_rows(s, [{"h": "lots", "s": "u"}])
    with pytest.raises(DataError, match="'h'"):
        bucketize(t, "h", [25])


@given(st.integers(0, 500), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_split_partitions(n, frac, seed):
    s = Schema(("a", "s"), ("a",), "s")
    t = Table.from_rows(s, [{"a": str(i), "s": "u"} for i in range(n)])
    train, test = split_train_test(t, frac, seed)
    ids = np.concatenate([train.row_ids, test.row_ids])
    assert sorted(ids.tolist()) == list(range(n))
    assert test.n == int(np.floor(n * frac + 0.5))
    again = split_train_test(t, frac, seed)
    assert np.array_equal(again[1].row_ids, test.row_ids)


def test_encode_and_domain(toy_table):
    dom = attribute_domain(toy_table, "a")
    assert dom == ("x", "y")
    assert encode(np.array(["y", "z", "x"], dtype=object), dom).tolist() == [1, -1, 0]


def test_dataset_config_roundtrip(tmp_path):
    (tmp_path / "d.csv").write_text("1,x,u\n30,y,w\n50,x,w\n70,y,u\n")
    (tmp_path / "d.yaml").write_text(
        "path: d.csv\nattributes: [h, a, s]\nqi: [h, a]\nsa: s\nbuckets: {h: [25, 40]}\ntest_fraction: 0.25\n"
    )
    cfg = load_dataset_config(tmp_path / "d.yaml")
    assert isinstance(cfg, DatasetConfig)
    train, test = load_dataset(cfg, seed=1)
    assert train.n == 3 and test.n == 1
    assert set(train.column("h")) | set(test.column("h")) == {"[0-25]", "[26-40]", "40+"}


def test_dataset_config_missing_key(tmp_path):
    (tmp_path / "d.yaml").write_text("path: d.csv\nqi: [a]\nsa: s\n")
    with pytest.raises(ConfigError):
        load_dataset_config(tmp_path / "d.yaml")
