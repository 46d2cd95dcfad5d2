import numpy as np
import pytest

from hdqtest import dataio
from hdqtest.dataio import (
    ColumnMapping,
    SubsampleProtocol,
    ingest_csv,
    power_table,
    read_csv_rows,
    run_dataset_test,
    run_subsample_study,
    wilson_interval,
    write_dataset_csv,
)
from hdqtest.errors import BadValue, DataError, InconsistentConfigs, MissingColumn, SubsampleTooLarge
from hdqtest.sim import ExperimentConfig, ExperimentReport, Simulator

WILSON_UPPER_0_OF_1000 = 0.00382675848555512322  # z^2 / (n + z^2), mpmath


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_ingest_small_file(tmp_path):
    path = write(tmp_path, "y,z1,x1,x2\n1,2,3,4\n5,6,7,8\n9,1e-3,2.5,-1\n")
    data, rep = ingest_csv(path, ColumnMapping("y", ["z1"], ["x1", "x2"]))
    assert (data.n, data.q, data.p) == (3, 2, 2)
    np.testing.assert_array_equal(data.Z[:, 0], 1.0)
    assert data.Z[2, 1] == 1e-3
    assert rep.rows_kept == 3 and rep.rejected_rows == []


def test_ingest_bad_value(tmp_path):
    path = write(tmp_path, "y,z1,x1,x2\n1,2,3,4\n5,6,oops,8\n9,1,2,\n2,7,1,1\n4,3,0,2\n")
    mapping = ColumnMapping("y", ["z1"], ["x1", "x2"])
    with pytest.raises(BadValue) as exc:
        ingest_csv(path, mapping)
    assert (exc.value.row, exc.value.column) == (2, "x1")
    assert exc.value.bad_rows == [2, 3]
    data, rep = ingest_csv(path, mapping, drop_bad_rows=True)
    assert data.n == 3 and rep.rejected_rows == [2, 3]


def test_ingest_missing_column_and_file(tmp_path):
    path = write(tmp_path, "y,x1\n1,2\n3,4\n")
    with pytest.raises(MissingColumn):
        ingest_csv(path, ColumnMapping("y", ["z9"], ["x1"]))
    with pytest.raises(FileNotFoundError):
        ingest_csv(str(tmp_path / "nope.csv"), ColumnMapping("y", [], ["x1"]))


def test_mapping_must_be_disjoint():
    with pytest.raises(DataError):
        ColumnMapping("y", ["a"], ["a", "b"])
    with pytest.raises(DataError):
        ColumnMapping("y", [], [])


@pytest.fixture
def synthetic(tmp_path):
    cfg = ExperimentConfig(n=120, p_dim=25, q=2, master_seed=5)
    data = Simulator(cfg).dataset(0)
    mapping = ColumnMapping("y", ["z1"], [f"x{j}" for j in range(1, 26)])
    path = str(tmp_path / "syn.csv")
    write_dataset_csv(path, data, mapping)
    return data, mapping, path


def test_ingest_roundtrip(synthetic, tmp_path):
    data, mapping, path = synthetic
    back, _ = ingest_csv(path, mapping)
    np.testing.assert_array_equal(back.Y, data.Y)
    np.testing.assert_array_equal(back.Z, data.Z)
    np.testing.assert_array_equal(back.X, data.X)
    path2 = str(tmp_path / "again.csv")
    write_dataset_csv(path2, back, mapping)
    assert open(path).read() == open(path2).read()


def test_dataset_test_row(synthetic):
    data, mapping, path = synthetic
    text = run_dataset_test(data, 0.5)
    rows = read_csv_rows(text)
    assert len(rows) == 1 and tuple(rows[0]) == dataio.RESULT_HEADER
    row = rows[0]
    for k in ("p_sum", "p_max", "p_cc"):
        assert 0 < float(row[k]) < 1
    assert int(row["n"]) == 120 and int(row["p"]) == 25 and int(row["q"]) == 2
    # re-rendering the parsed values reproduces the row exactly
    rerender = [dataio.fmt(float(row[k])) if k not in ("n", "p", "q", "rule") else row[k]
                for k in dataio.RESULT_HEADER]
    assert ",".join(rerender) == text.splitlines()[1]
    assert run_dataset_test(data, 0.5) == text


def test_wilson_interval():
    lo, hi = wilson_interval(0, 1000)
    assert lo == 0.0
    assert hi == pytest.approx(WILSON_UPPER_0_OF_1000, rel=1e-12)
    lo, hi = wilson_interval(50, 1000)
    assert lo < 0.05 < hi


def test_subsample_full_size_is_degenerate(synthetic):
    data, _, _ = synthetic
    proto = SubsampleProtocol(subsample_size=data.n, replications=2, tau_grid=[0.5])
    rows = run_subsample_study(data, proto)
    assert all(r.rate in (0.0, 1.0) for r in rows)
    with pytest.raises(SubsampleTooLarge):
        run_subsample_study(data, SubsampleProtocol(subsample_size=data.n + 1, replications=1))


def test_subsample_protocol_validation():
    with pytest.raises(DataError):
        SubsampleProtocol(tau_grid=[0.5, 0.25])
    with pytest.raises(DataError):
        SubsampleProtocol(tau_grid=[0.0, 0.5])


def test_subsample_study_csv_and_threads(synthetic):
    data, _, _ = synthetic
    proto = SubsampleProtocol(subsample_size=80, replications=6, tau_grid=[0.25, 0.75])
    a = dataio.study_csv(run_subsample_study(data, proto))
    b = dataio.study_csv(run_subsample_study(data, proto, threads=3))
    assert a == b
    rows = read_csv_rows(a)
    assert len(rows) == 6
    assert {r["test_name"] for r in rows} == {"t_cc", "t_max", "t_sum"}


def _report(s, n=100, rates=(1, 2, 3)):
    cfg = ExperimentConfig(n=n, p_dim=20, s=s).to_dict()
    return ExperimentReport(cfg, 10, 0, dict(zip(("t_cc", "t_max", "t_sum"), rates)))


def test_power_table_shapes():
    text = power_table([_report(9), _report(1)])
    rows = read_csv_rows(text)
    assert len(rows) == 6
    assert [(r["s"], r["test_name"]) for r in rows][:3] == [("1", "t_cc"), ("1", "t_max"), ("1", "t_sum")]
    assert len(read_csv_rows(power_table([_report(1)]))) == 3
    with pytest.raises(InconsistentConfigs):
        power_table([_report(1), _report(9, n=150)])


def test_emit_power_table(tmp_path):
    path = tmp_path / "pw.csv"
    dataio.emit_power_table([_report(1)], path)
    assert path.read_text().splitlines()[0] == "s,test_name,power,se"
