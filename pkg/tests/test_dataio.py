import numpy as np
import pytest

from dpgls.dataio import (
    ChainArchive, config_hash, export_histogram, load_archive, load_csv, parse_kv, read_table, save_archive,
    summarize_chains, write_table,
)
from dpgls.errors import MissingColumn, NonFiniteValue, UnbalancedPanel, ValidationError
from dpgls.mcmc import Chains


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_panel_load_small(tmp_path):
    p = _write(tmp_path / "p.csv", "id,t,y,x\n1,1,0.5,1\n1,2,0.6,2\n2,1,0.7,3\n2,2,0.8,4\n")
    d = load_csv(p, "panel")
    assert d.y.shape == (2, 2) and d.X.shape == (2, 2, 1)
    assert d.y[1, 0] == 0.7 and d.names == ["x"]


def test_panel_rows_in_any_order(tmp_path):
    p = _write(tmp_path / "p.csv", "id,t,y,x\n2,2,0.8,4\n1,1,0.5,1\n2,1,0.7,3\n1,2,0.6,2\n")
    d = load_csv(p, "panel")
    np.testing.assert_array_equal(d.y, [[0.5, 0.6], [0.7, 0.8]])


def test_unbalanced_and_duplicate(tmp_path):
    p = _write(tmp_path / "p.csv", "id,t,y,x\n1,1,0.5,1\n1,2,0.6,2\n2,1,0.7,3\n")
    with pytest.raises(UnbalancedPanel, match="id=2, t=2"):
        load_csv(p, "panel")
    q = _write(tmp_path / "q.csv", "id,t,y,x\n1,1,0.5,1\n1,1,0.6,2\n")
    with pytest.raises(UnbalancedPanel, match="row 2"):
        load_csv(q, "panel")


def test_missing_column_and_nonfinite(tmp_path):
    p = _write(tmp_path / "p.csv", "id,y,x\n1,1,1\n")
    with pytest.raises(MissingColumn, match="'t'"):
        load_csv(p, "panel")
    q = _write(tmp_path / "q.csv", "y1,x\n1,2\nnan,3\n")
    with pytest.raises(NonFiniteValue, match="row 2, column 'y1'"):
        read_table(q)
    r = _write(tmp_path / "r.csv", "y1,x\n1,abc\n")
    with pytest.raises(NonFiniteValue, match="column 'x'"):
        read_table(r)


def test_system_load_with_equations(tmp_path):
    p = _write(tmp_path / "s.csv", "a,b,c,d\n1,2,3,4\n5,6,7,8\n9,10,11,13\n")
    d = load_csv(p, "system", {"eq.first": "a ~ b", "eq.second": "c ~ b + d"})
    assert d.equations == ["first", "second"]
    assert d.names == [["const", "b"], ["const", "b", "d"]]
    with pytest.raises(MissingColumn):
        load_csv(p, "system", {"eq.x": "a ~ zz"})
    with pytest.raises(ValidationError):
        load_csv(p, "other")


def test_round_trip_bit_exact(tmp_path):
    g = np.random.default_rng(0)
    cols = {"y": g.normal(size=50) * 1e-7, "x": g.standard_t(1, 50) * 1e12, "z": np.array([0.1 + 0.2] * 50)}
    write_table(tmp_path / "t.csv", cols)
    back = read_table(tmp_path / "t.csv")
    for k in cols:
        assert np.array_equal(back[k], cols[k])


def test_archive_round_trip(tmp_path):
    ch = Chains(np.random.default_rng(1).normal(size=(20, 2)), ["a", "b"], {"K": np.arange(20.0)})
    arc = ChainArchive.from_chains(ch, {"config_hash": "abc", "seed": 3})
    save_archive(tmp_path / "c.csv", arc)
    back = load_archive(tmp_path / "c.csv")
    assert back.names == ["a", "b", "K"]
    assert back.meta == {"config_hash": "abc", "seed": "3"}
    assert np.array_equal(back.draws, arc.draws)
    with pytest.raises(ValidationError):
        ChainArchive(["a", "a"], np.zeros((2, 2)))


def test_kv_parsing_and_hash():
    cfg = parse_kv("# comment\na = 1\n\nb=two # trailing\n")
    assert cfg == {"a": "1", "b": "two"}
    assert config_hash(cfg) == config_hash({"b": "two", "a": "1"})
    assert config_hash(cfg) != config_hash({"a": "2", "b": "two"})
    with pytest.raises(ValidationError):
        parse_kv("novalue\n")
    with pytest.raises(ValidationError):
        parse_kv("a=1\na=2\n")


def test_summarize_constant_and_linear():
    arc = ChainArchive(["c", "lin"], np.column_stack([np.full(100, 3.0), np.arange(1.0, 101.0)]))
    rows = {r["name"]: r for r in summarize_chains(arc)}
    assert rows["c"]["mean"] == 3.0 and rows["c"]["sd"] == 0.0
    assert rows["c"]["q0.025"] == rows["c"]["q0.975"] == 3.0
    assert rows["lin"]["q0.5"] == 50.5
    assert rows["lin"]["mode"] == 1.0  # all values tie; the smallest wins


def test_summarize_normal_quantile_and_mode():
    g = np.random.default_rng(0)
    K = np.array([1, 2, 2, 3, 2, 5] * 10, dtype=float)
    arc = ChainArchive(["z"], g.standard_normal(100_000)[:, None])
    assert abs(summarize_chains(arc, [0.975])[0]["q0.975"] - 1.96) < 0.03
    assert summarize_chains(ChainArchive(["K"], K[:, None]))[0]["mode"] == 2.0
    assert np.isnan(summarize_chains(arc)[0]["mode"])
    with pytest.raises(ValidationError):
        summarize_chains(arc, [1.5])


def test_histogram():
    arc = ChainArchive(["c", "u"], np.column_stack([np.full(10, 1.0), np.linspace(0, 1, 10)]))
    rows = export_histogram(arc, "c", 3)
    assert sum(r["count"] for r in rows) == 10
    assert max(r["count"] for r in rows) == 10
    u = ChainArchive(["u"], np.random.default_rng(0).uniform(size=(100_000, 1)))
    counts = [r["count"] for r in export_histogram(u, "u", 10)]
    assert sum(counts) == 100_000 and max(counts) / min(counts) < 1.2
    with pytest.raises(ValidationError):
        export_histogram(arc, "c", 0)
    with pytest.raises(MissingColumn):
        export_histogram(arc, "nope", 2)
