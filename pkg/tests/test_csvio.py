"""Delimited-text and JSON persistence round-trips."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisycycles import (
    AcvEstimate,
    ConfigError,
    FitProblem,
    FitTarget,
    HopfParams,
    IntegratorConfig,
    Trajectory,
    acv_formula,
    build_frame,
    find_limit_cycle,
    fit,
    hopf_system,
    sigma_for_nsr,
    simulate_hopf_linear,
)
from noisycycles.csvio import (
    load_json_config,
    read_column,
    read_curve,
    read_trajectory,
    write_curve,
    write_cycle_frame,
    write_fit_json,
    write_phase_path,
    write_trajectory,
)

TAU = 2.0 * np.pi


def _params():
    return HopfParams(
        alpha=TAU, alpha0=TAU, lambda_=TAU, r=1.0, sigma=sigma_for_nsr(0.1, TAU, 1.0)
    )


def test_trajectory_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    tr = Trajectory(
        dt=0.25, values=rng.normal(size=(7, 3)), channel_labels=("x", "y", "w"), seed=9
    )
    p = tmp_path / "tr.csv"
    write_trajectory(p, tr)
    assert p.read_text().splitlines()[0] == "t,x,y,w"
    back = read_trajectory(p)
    assert back.channel_labels == ("x", "y", "w")
    assert back.dt == 0.25
    # %.17g is enough digits to reproduce any double exactly
    assert np.array_equal(back.values, tr.values)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.floats(allow_nan=False, allow_infinity=False, width=64),
        min_size=1,
        max_size=40,
    )
)
def test_any_finite_doubles_survive_the_text_format(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("prop") / "curve.csv"
    x = np.arange(len(values), dtype=float)
    write_curve(p, "x", "y", x, np.array(values))
    _, back, _ = read_curve(p)
    assert np.array_equal(back, np.array(values))


def test_curve_round_trip_and_column_reads(tmp_path):
    p = tmp_path / "curve.csv"
    x = np.linspace(0.0, 5.0, 11)
    y = np.cos(x) * 1e-17
    write_curve(p, "lag", "acv", x, y)
    x2, y2, labels = read_curve(p)
    assert labels == ("lag", "acv")
    assert np.array_equal(x2, x)
    assert np.array_equal(y2, y)
    _, y3, _ = read_curve(p, xlabel="lag", ylabel="acv")
    assert np.array_equal(y3, y)
    vals, dt = read_column(p, column="acv")
    assert np.array_equal(vals, y)
    assert dt is None  # no t column to infer from


def test_read_column_infers_dt_from_t(tmp_path):
    tr = Trajectory(
        dt=0.25,
        values=np.arange(12.0).reshape(4, 3),
        channel_labels=("x", "y", "w"),
    )
    p = tmp_path / "tr.csv"
    write_trajectory(p, tr)
    vals, dt = read_column(p, column="y")
    assert dt == 0.25
    assert np.array_equal(vals, tr.values[:, 1])
    first, _ = read_column(p)
    assert np.array_equal(first, tr.values[:, 0])


def test_phase_path_layout(tmp_path):
    lp = simulate_hopf_linear(_params(), IntegratorConfig(dt=1e-3, n_steps=50, seed=3))
    p = tmp_path / "phase.csv"
    write_phase_path(p, lp)
    assert p.read_text().splitlines()[0] == "t,tau,z,x,y"
    vals, dt = read_column(p, column="tau")
    assert dt == pytest.approx(1e-3, abs=1e-15)
    assert np.array_equal(vals, lp.tau)


def test_cycle_frame_layout(tmp_path):
    quiet = HopfParams(alpha=TAU, alpha0=TAU, lambda_=TAU, r=1.0, sigma=0.0)
    cyc = find_limit_cycle(hopf_system(quiet), (0.3, 0.0), grid_size=256)
    fr = build_frame(cyc)
    p = tmp_path / "frame.csv"
    write_cycle_frame(p, cyc, fr)
    assert p.read_text().splitlines()[0] == "t,L1,L2,T1,T2,U11,U12,U21,U22"
    u11, _ = read_column(p, column="U11")
    assert np.array_equal(u11, fr.U[:, 0, 0])


def test_fit_json_schema(tmp_path):
    lags = np.linspace(0.0, 5.0, 400)
    est = AcvEstimate(lags=lags, values=acv_formula(_params(), lags))
    res = fit(FitProblem(target=FitTarget.ACV, curve=est))
    p = tmp_path / "fit.json"
    write_fit_json(p, res)
    doc = json.loads(p.read_text())
    assert set(doc) == {"params", "residual", "derived", "target", "n_points"}
    assert set(doc["params"]) == {"r", "alpha", "lambda", "sigma"}
    assert doc["params"]["alpha"] == pytest.approx(TAU, rel=1e-6)


def test_json_config_validation(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"dt": 0.001, "seed": 4}')
    assert load_json_config(p) == {"dt": 0.001, "seed": 4}
    for bad in ('["x"]', '{"dt": '):
        p.write_text(bad)
        with pytest.raises(ConfigError):
            load_json_config(p)


def test_malformed_rows_report_location(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x\n0.0,1.0\n0.1,oops\n")
    with pytest.raises(ConfigError, match="row 1"):
        read_curve(p)
    p.write_text("t,x\n0.0,1.0\n0.1\n")
    with pytest.raises(ConfigError):
        read_curve(p)
    p.write_text("")
    with pytest.raises(ConfigError):
        read_curve(p)


def test_trajectory_needs_uniform_times(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("t,x\n0.0,1.0\n0.1,2.0\n0.3,3.0\n")
    with pytest.raises(ConfigError):
        read_trajectory(p)


def test_failed_write_leaves_nothing_behind(tmp_path):
    class Boom:
        dt = 0.1
        values = np.array([["a"]], dtype=object)
        channel_labels = ("x",)
        seed = 0

    target = tmp_path / "atomic.csv"
    with pytest.raises(Exception):
        write_trajectory(target, Boom())
    assert not target.exists()
    assert list(tmp_path.iterdir()) == []
