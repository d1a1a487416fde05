import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipkakeya import experiments as ex
from lipkakeya.experiments import (ConfigError, ExperimentConfig, dump_config, fit_slope,
                                   holder_probe, lambda_grid, parse_config, rows_to_csv,
                                   run_campaign, stability, weak_type_quantity, weak_type_sweep)
from lipkakeya.maximal import ScalarField, disc_indicator

SMALL = """
grid.n = 64
grid.pitch = 0.0003125
field.kind = sinusoidal
field.theta = 0.3
field.lip = 1.0
field.periods = 1.0
sweep.deltas = 0.5, 0.25, 0.125
sweep.radii = 4.0
enum.m_max = 3
"""


def small(extra=""):
    return parse_config(SMALL + extra)


# ----------------------------------------------------------------- config

def test_parse_config_round_trip():
    cfg = small("kappa = 64\nseed = 7  # trailing comment\n")
    assert cfg.grid.n == 64 and cfg.kappa == 64 and cfg.seed == 7
    assert cfg.sweep.deltas == (0.5, 0.25, 0.125)
    assert cfg.field.params == {"theta": 0.3, "lip": 1.0, "periods": 1.0}
    again = parse_config(dump_config(cfg))
    assert dump_config(again) == dump_config(cfg)


@pytest.mark.parametrize("text", [
    "grid.size = 3", "nosuch.key = 1", "grid = 3", "kappa = 4", "sweep.deltas = 0.5, 1.5",
    "grid.n = -4", "justtext", "campaign.seeds = 0", "grid.pitch = nan", "threads = 0",
])
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_sinusoidal_lip_parametrization():
    v = ex.build_field(small())
    assert v.lip == pytest.approx(1.0)
    assert v.nu == pytest.approx(0.01)


# ----------------------------------------------------------- quantities

def test_weak_type_quantity_by_hand():
    f = ScalarField((0, 0), 0.5, np.array([[1.0, 0.0], [0.0, 0.0]]))
    vals = np.array([[1.0, 0.5], [0.25, 0.0]])
    lams = np.array([0.2, 0.4, 0.8])
    q, lam = weak_type_quantity(vals, f, lams)
    # |{>0.2}| = 3 cells, |{>0.4}| = 2, |{>0.8}| = 1, cell area 1/4, ||f||^2 = 1/4
    expect = [0.04 * 3, 0.16 * 2, 0.64 * 1]
    assert q == pytest.approx(max(expect)) and lam == 0.8


def test_lambda_grid_geometric():
    f = disc_indicator(64, 1 / 64, 8.0)
    lams = lambda_grid(f, ExperimentConfig().sweep)
    r = lams[1:] / lams[:-1]
    assert np.allclose(r, math.sqrt(2))
    assert lambda_grid(ScalarField((0, 0), 1.0, np.zeros((4, 4))), ExperimentConfig().sweep).size == 0


def test_fit_slope():
    d = [0.5, 0.25, 0.125]
    assert fit_slope(d, [1.0 / x for x in d]) == pytest.approx(1.0)
    assert fit_slope(d, [3.0, 3.0, 3.0]) == pytest.approx(0.0, abs=1e-12)
    assert math.isnan(fit_slope(d, [0.0, 0.0, 1.0]))


def test_stability_rule():
    assert stability([0.0, 0.0]) == 1.0
    assert stability([1.0, 2.0, 3.0]) == 1.5
    assert stability([0.0, 0.0, 5.0]) == math.inf


def test_csv_rejects_non_finite():
    row = ex.SweepRow(0.5, 4.0, math.nan, 1.0, 3)
    with pytest.raises(ValueError):
        rows_to_csv([row], ex.CSV_COLUMNS)


# ------------------------------------------------------------------ sweep

@pytest.fixture(scope="module")
def sweep_small():
    return weak_type_sweep(small())


def test_sweep_rows_and_monotone(sweep_small):
    rows, slopes = sweep_small
    assert [r.delta for r in rows] == [0.5, 0.25, 0.125]
    q = [r.quantity for r in rows]
    assert all(x >= 0 for x in q)
    # families shrink as delta grows, so the quantity cannot grow with delta
    assert all(a <= b + 1e-15 for a, b in zip(q, q[1:]))
    sizes = [r.family_size for r in rows]
    assert sizes == sorted(sizes)
    assert math.isfinite(slopes[4.0])
    text = rows_to_csv(rows, ex.CSV_COLUMNS)
    assert text.splitlines()[0] == ",".join(ex.CSV_COLUMNS)


def test_sweep_constant_field_flat():
    cfg = small("field.kind = constant\nenum.max_length = 0.005\n")
    cfg.field.params = {"theta": 0.3}
    rows, slopes = weak_type_sweep(cfg)
    assert len({r.quantity for r in rows}) == 1
    assert len({r.family_size for r in rows}) == 1
    assert slopes[4.0] == pytest.approx(0.0, abs=1e-12)


def test_sweep_zero_function(monkeypatch):
    monkeypatch.setattr(ex, "disc_indicator",
                        lambda n, pitch, r: ScalarField((0, 0), pitch, np.zeros((n, n))))
    rows, slopes = weak_type_sweep(small())
    assert all(r.quantity == 0.0 and r.flagged for r in rows)
    assert math.isnan(slopes[4.0])


# ------------------------------------------------------------ holder probe

HOLDER_SMALL = """
holder.n = 64
holder.pitch = 0.0078125
holder.scales = 0.015625, 0.0078125
holder.m_max = 2
holder.radius = 3.0
"""


def test_holder_probe_small():
    res = holder_probe(parse_config(HOLDER_SMALL))
    rows = res["rows"]
    assert [r.field for r in rows] == ["holder", "control"] * 2
    assert [r.n_terms for r in rows if r.field == "holder"] == [7, 8]
    assert all(r.n_terms == 1 for r in rows if r.field == "control")
    assert res["control_ratio"] == 1.0
    assert isinstance(res["nondecreasing"], bool)


def test_holder_probe_rejects_alpha_one():
    with pytest.raises(ConfigError):
        holder_probe(parse_config(HOLDER_SMALL), alpha=1.0)


def test_holder_constant_baseline_matches_sweep():
    cfg = parse_config(HOLDER_SMALL + """
field.kind = constant
field.theta = 0.3
grid.n = 64
grid.pitch = 0.0078125
enum.max_length = 0.125
enum.m_max = 2
sweep.deltas = 0.25
sweep.radii = 3.0
""")
    v = ex.build_field(cfg)
    res = holder_probe(cfg, field_override=v)
    rows, _ = weak_type_sweep(cfg)
    assert {r.quantity for r in res["rows"]} == {rows[0].quantity}
    assert res["rows"][0].family_size == rows[0].family_size


# -------------------------------------------------------------- campaign

def test_campaign_singleton():
    cfg = parse_config("campaign.n = 1\ncampaign.seeds = 1\ncampaign.min_rects = 1\n"
                       "campaign.max_rects = 1\n")
    out = run_campaign(cfg)
    inst, = out["instances"]
    assert "error" not in inst and inst["n_rects"] == 1
    for name, rep in inst["reports"].items():
        assert rep["ratio"] <= 1.0 and rep["violations"] == 0, name
    assert out["summary"]["lemmas_ok"] and out["summary"]["stable"]


def test_campaign_deterministic_and_records_errors(monkeypatch):
    cfg = parse_config("campaign.n = 2\ncampaign.seeds = 2\ncampaign.min_rects = 20\n"
                       "campaign.max_rects = 40\n")
    a = ex.cov.dumps(run_campaign(cfg))
    assert a == ex.cov.dumps(run_campaign(cfg))

    def boom(*args, **kw):
        raise RuntimeError("injected")
    monkeypatch.setattr(ex.cov, "run_pipeline", boom)
    out = run_campaign(cfg)
    assert out["summary"]["n_errors"] == 2
    assert all("injected" in r["error"] for r in out["instances"])
