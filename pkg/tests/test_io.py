import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relpimc.estimators import ObservableSeries
from relpimc.io import (SERIES_HEADER, ConfigError, emit_series, parse_config, read_series, read_table,
                        write_table)

MINIMAL = {"mass": 1, "alpha": 1, "a_reg": 0.1, "n_slices": 128, "dt": 0.125, "seed": 42}


def test_minimal_config():
    cfg, section, values = parse_config(json.dumps(MINIMAL))
    assert cfg.lattice.beta == 16.0
    assert cfg.seed == 42 and cfg.model.alpha == 1.0
    assert values["beta"] == 16.0
    assert values["n_therm_sweeps"] == 1280
    assert section == {}


def test_beta_instead_of_dt():
    cfg, _, _ = parse_config(json.dumps({"n_slices": 64, "beta": 8}))
    assert cfg.lattice.dt == 0.125
    cfg, _, _ = parse_config("{}")
    assert cfg.lattice.beta == 16.0
    with pytest.raises(ConfigError, match="disagrees"):
        parse_config(json.dumps({"n_slices": 64, "beta": 8, "dt": 0.1}))


@pytest.mark.parametrize("doc,match", [
    ({**MINIMAL, "a_reg": 0}, "a_reg must be > 0"),
    ({**MINIMAL, "colour": 1}, "unknown keys: colour"),
    ({**MINIMAL, "n_slices": 1.5}, "n_slices must be an integer"),
    ({**MINIMAL, "mass": "heavy"}, "mass must be a number"),
    ({**MINIMAL, "mass": -1}, "mass"),
    ({**MINIMAL, "seed": [1]}, "scalar"),
    ({**MINIMAL, "threads": 0}, "threads"),
    ({**MINIMAL, "measure_every": 0}, "measure_every"),
    ({**MINIMAL, "run": {"x": 1}}, "unknown keys in 'run'"),
])
def test_invalid_configs(doc, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(json.dumps(doc))


def test_duplicate_key_and_malformed():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config('{"mass": 1, "mass": 2}')
    with pytest.raises(ConfigError, match="malformed"):
        parse_config('{"mass": 1,')
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")
    with pytest.raises(ConfigError, match="unknown command"):
        parse_config("{}", "fly")


def test_command_sections():
    _, sec, _ = parse_config(json.dumps({"scan-mass": {"masses": [1, 10], "rel_tol": 0.2}}), "scan-mass")
    assert sec["masses"] == [1, 10] and sec["rel_tol"] == 0.2 and sec["alpha_lo"] == 0.001
    with pytest.raises(ConfigError, match="list of numbers"):
        parse_config(json.dumps({"scan-mass": {"masses": [[1]]}}), "scan-mass")
    with pytest.raises(ConfigError, match="must be an object"):
        parse_config(json.dumps({"virial": 3}), "virial")


def _series(n, rng):
    cols = rng.normal(size=(5, n))
    return ObservableSeries(np.arange(1, n + 1) * 3, *cols, metadata={"mass": 1.0, "seed": 7})


def test_emit_one_record():
    buf = io.StringIO()
    emit_series(_series(1, np.random.default_rng(0)), buf, timestamp=False)
    lines = [l for l in buf.getvalue().splitlines() if not l.startswith("#")]
    assert lines[0] == ",".join(SERIES_HEADER)
    assert len(lines) == 2


def test_emit_empty_rejected():
    empty = ObservableSeries(np.array([], dtype=int), *[np.array([])] * 5)
    with pytest.raises(ValueError):
        emit_series(empty, io.StringIO())


@given(st.integers(1, 30), st.integers(0, 2 ** 32))
def test_round_trip_bit_exact(n, seed):
    s = _series(n, np.random.default_rng(seed))
    s.q2[0] = 1e-300
    s.kinetic[-1] = 0.1 + 0.2
    buf = io.StringIO()
    emit_series(s, buf)
    buf.seek(0)
    back = read_series(buf)
    for f in SERIES_HEADER:
        assert np.array_equal(getattr(back, f), getattr(s, f))
        assert getattr(back, f).tobytes() == getattr(s, f).tobytes()
    assert back.metadata["seed"] == 7


def test_timestamp_suppression():
    s = _series(3, np.random.default_rng(1))
    a, b = io.StringIO(), io.StringIO()
    emit_series(s, a, timestamp=False)
    emit_series(s, b, timestamp=False)
    assert a.getvalue() == b.getvalue()
    assert "timestamp" not in a.getvalue()
    c = io.StringIO()
    emit_series(s, c)
    assert "# timestamp:" in c.getvalue()


def test_table_round_trip():
    buf = io.StringIO()
    write_table(buf, ("mass", "ok"), [(1.0, "True"), (2, "False")], {"k": [1, 2]}, timestamp=False)
    buf.seek(0)
    meta, header, rows = read_table(buf)
    assert meta["k"] == [1, 2] and "version" in meta
    assert header == ["mass", "ok"] and rows == [["1.0", "True"], ["2", "False"]]
