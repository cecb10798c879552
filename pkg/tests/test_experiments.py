import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epdq.experiments import (
    CSV_HEADER,
    CSVFormatError,
    ExperimentRecord,
    emit_csv,
    format_float,
    loglog_regression,
    parse_csv,
    per_n_means,
    quantization_runs,
    read_csv,
    run_convergence_torus,
    run_convergence_triangles,
    run_quantization_comparison,
    write_csv,
)
from epdq.generators import TorusParams, make_rng, sample_torus_diagram
from epdq.measures import GridSpec
from oracles import ols


def record(n=10, rep=0, value=0.5, method="OT_2", kind="ot_p_pow_p", experiment="convergence-triangles"):
    return ExperimentRecord(experiment, method, n, rep, 0, value, kind)


def test_record_validation():
    with pytest.raises(ValueError):
        record(experiment="nope")
    with pytest.raises(ValueError):
        record(kind="nope")
    with pytest.raises(ValueError):
        record(value=-1.0)
    with pytest.raises(ValueError):
        record(value=math.nan)


def test_format_float_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 12345.678901234567, 0.0):
        assert float(format_float(x)) == x


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=20))
def test_csv_round_trip(values):
    recs = [record(n=i + 1, value=v) for i, v in enumerate(values)]
    text = emit_csv(recs)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert parse_csv(text) == recs
    assert emit_csv(parse_csv(text)) == text


def test_csv_rejects_duplicates_and_bad_input(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([record(), record()])
    with pytest.raises(CSVFormatError):
        parse_csv("")
    with pytest.raises(CSVFormatError):
        parse_csv("a,b\n")
    header = ",".join(CSV_HEADER)
    with pytest.raises(CSVFormatError):
        parse_csv(header + "\nconvergence-triangles,OT_2,10,0,0\n")
    with pytest.raises(CSVFormatError):
        parse_csv(header + "\nconvergence-triangles,OT_2,ten,0,0,0.5,ot_p_pow_p\n")
    path = tmp_path / "r.csv"
    write_csv(path, [record()])
    assert read_csv(path) == [record()]


def test_regression_matches_textbook_ols():
    rng = np.random.default_rng(0)
    ns = np.repeat([10, 20, 40, 80, 160], 4)
    values = 3.0 * ns**-0.7 * np.exp(rng.normal(scale=0.1, size=len(ns)))
    summary = loglog_regression(ns, values)
    xs, means = per_n_means(ns, values)
    slope, intercept = ols(np.log(xs), np.log(means))
    assert summary.slope == pytest.approx(slope, abs=1e-12)
    assert summary.intercept == pytest.approx(intercept, abs=1e-12)
    assert summary.n_points == 5 and 0 < summary.r2 <= 1


def test_regression_exact_power_law():
    ns = np.array([10, 100, 1000])
    summary = loglog_regression(ns, 2.0 * ns**-0.5)
    assert summary.slope == pytest.approx(-0.5, abs=1e-12)
    assert summary.r2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        loglog_regression([10, 10], [1.0, 2.0])
    with pytest.raises(ValueError):
        loglog_regression([10, 20], [0.0, 1.0])


def test_triangles_small_run_is_deterministic():
    kwargs = dict(n_list=(5, 20), reps=2, grid=GridSpec(bins=(10, 10)), seed=3)
    a, sa = run_convergence_triangles(**kwargs)
    b, sb = run_convergence_triangles(**kwargs, threads=2)
    assert a == b and sa == sb
    assert len(a) == 4 and {r.n_or_k for r in a} == {5, 20}
    assert all(r.method == "OT_2" and r.value_kind == "ot_p_pow_p" for r in a)
    c, _ = run_convergence_triangles(**{**kwargs, "seed": 4})
    assert c != a


def test_triangles_argument_checks():
    with pytest.raises(ValueError):
        run_convergence_triangles(n_list=(10,))
    with pytest.raises(ValueError):
        run_convergence_triangles(n_list=(20, 10))
    with pytest.raises(ValueError):
        run_convergence_triangles(n_list=(5, 10), reps=0)


def test_torus_guard_and_small_run():
    with pytest.raises(ValueError):
        run_convergence_torus(n_list=(2, 8), n_max=4)
    kwargs = dict(n_list=(1, 2), n_max=2, reps=1, cloud_size=40, bins=10, seed=1)
    a, _ = run_convergence_torus(**kwargs)
    b, _ = run_convergence_torus(**kwargs)
    assert a == b and [r.n_or_k for r in a] == [1, 2]
    raw, _ = run_convergence_torus(**{**kwargs, "bins": None})
    assert all(r.value > 0 for r in raw)


def test_quantization_records_and_shared_init():
    rng = make_rng(0)
    dgms = [sample_torus_diagram(TorusParams(mean_points=60, epsilon=0.1), rng) for _ in range(6)]
    runs = quantization_runs(dgms, (1, 2), rep=0, batch_size=2)
    assert len(runs) == 8
    assert all(r.distortion_inf >= 0 and r.distortion_2 >= 0 for r in runs)
    records = run_quantization_comparison(k_list=(1, 2), n=4, reps=1, batch_size=2, cloud_size=60)
    kinds = {(r.method, r.value_kind) for r in records}
    assert ("OT_2", "distortion_p") in kinds and ("W_2@inf", "distortion_inf") in kinds
    assert len(records) == 16
    emit_csv(records)  # keys are unique
    with pytest.raises(ValueError):
        run_quantization_comparison(k_list=(0,), n=4, reps=1)
