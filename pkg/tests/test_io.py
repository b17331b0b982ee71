import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bglsff.ensemble import SffCurve
from bglsff.io import (
    CsvParseError,
    atomic_write_text,
    fmt,
    metrics_row,
    read_curve,
    read_matrix,
    read_metrics,
    read_trajectory,
    sniff_kind,
    split_sections,
    write_curve,
    write_matrix,
    write_metrics,
    write_trajectory,
)

finite = st.floats(allow_nan=False, allow_infinity=False)


def curve_of(mean, stderr=None, meta=None):
    n = len(mean)
    return SffCurve(
        times=np.logspace(-1, 3, n),
        mean=np.asarray(mean, dtype=float),
        stderr=np.zeros(n) if stderr is None else np.asarray(stderr, dtype=float),
        n_ok=7,
        metadata=meta or {},
    )


@given(finite)
def test_fmt_round_trips_every_double(x):
    assert float(fmt(x)) == x


def test_fmt_types():
    assert fmt(True) == "true" and fmt(np.int64(3)) == "3" and fmt(None) == ""
    assert fmt(0.1) == "0.10000000000000001"


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(0, 1)))
def test_curve_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("io") / "c.csv"
    curve = curve_of(values, values / 3, {"beta": 5.0})
    write_curve(path, curve, {"seed": 42})
    back, meta = read_curve(path)
    assert np.array_equal(back.times, curve.times)
    assert np.array_equal(back.mean, curve.mean)
    assert np.array_equal(back.stderr, curve.stderr)
    assert back.n_ok == 7
    assert meta["seed"] == "42" and meta["meta.beta"] == "5"
    assert back.metadata == {"beta": "5"}


def test_curve_layout(tmp_path):
    path = write_curve(tmp_path / "c.csv", curve_of([0.5, 0.25]), {"model": "syk"})
    text = path.read_text()
    head, data = split_sections(text)
    assert head == "# model=syk\n"
    assert data.splitlines()[0] == "t,f_mean,f_stderr,n_ok"
    assert len(data.splitlines()) == 3


def test_metrics_round_trip(tmp_path):
    class M:
        t_d, f_d, t_p, f_p, ratio, warnings = 75.0, 0.006, 1.7e5, 0.03, 2371.3, ["dip_at_boundary"]

    rows = [metrics_row("gamma", 1e-3, M), metrics_row("gamma", 1e-1, None, "not saturated")]
    write_metrics(tmp_path / "m.csv", rows, {"beta": 5.0})
    back, meta = read_metrics(tmp_path / "m.csv")
    assert back[0]["ratio"] == 2371.3 and back[0]["warnings"] == "dip_at_boundary"
    assert math.isnan(back[1]["ratio"]) and back[1]["warnings"] == "not saturated"
    assert meta == {"beta": "5"}


def test_trajectory_round_trip(tmp_path, rng):
    cols = {c: rng.normal(size=5) for c in ("t", "fidelity", "purity", "mean_energy", "trace_drift")}
    write_trajectory(tmp_path / "t.csv", cols)
    back, _ = read_trajectory(tmp_path / "t.csv")
    for c in cols:
        assert np.array_equal(back[c], cols[c])


def test_matrix_round_trip(tmp_path, rng):
    m = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    write_matrix(tmp_path / "m.csv", m)
    assert np.array_equal(read_matrix(tmp_path / "m.csv"), m)


def test_matrix_missing_shape(tmp_path):
    (tmp_path / "m.csv").write_text("row,col,re,im\n0,0,1,0\n")
    with pytest.raises(CsvParseError):
        read_matrix(tmp_path / "m.csv")


@pytest.mark.parametrize(
    "body,line",
    [
        ("# a=1\nt,f_mean,f_stderr,n_ok\n1,0.5,0,3\n2,oops,0,3\n", 4),
        ("t,f_mean,f_stderr,n_ok\n1,0.5,0\n", 2),
        ("# a=1\n# no equals sign\nt,f_mean,f_stderr,n_ok\n", 2),
        ("t,f,g\n1,2,3\n", 1),
        ("t,f_mean,f_stderr,n_ok\n1,0.5,0,3\n# late comment\n", 3),
    ],
)
def test_parse_errors_name_the_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(CsvParseError) as info:
        read_curve(path)
    assert info.value.line == line
    assert f"bad.csv:{line}:" in str(info.value)


def test_empty_file(tmp_path):
    (tmp_path / "e.csv").write_text("# only=preamble\n")
    with pytest.raises(CsvParseError):
        read_curve(tmp_path / "e.csv")
    with pytest.raises(CsvParseError):
        sniff_kind(tmp_path / "e.csv")


def test_sniff(tmp_path):
    write_curve(tmp_path / "c.csv", curve_of([0.5]))
    write_metrics(tmp_path / "m.csv", [])
    write_trajectory(tmp_path / "t.csv", {c: [0.0] for c in ("t", "fidelity", "purity", "mean_energy", "trace_drift")})
    assert [sniff_kind(tmp_path / f) for f in ("c.csv", "m.csv", "t.csv")] == ["curve", "metrics", "trajectory"]
    (tmp_path / "x.csv").write_text("a,b\n")
    with pytest.raises(CsvParseError):
        sniff_kind(tmp_path / "x.csv")


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write_text(tmp_path / "sub" / "f.txt", "hello")
    atomic_write_text(tmp_path / "sub" / "f.txt", "again")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
    assert (tmp_path / "sub" / "f.txt").read_text() == "again"
