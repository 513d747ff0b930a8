"""Parameter containers, derived rates and grid plumbing."""

import math

import numpy as np
import pytest

from catmem.model import (CatParams, GridAxis, GridField, ProtocolSchedule,
                          SystemParams, WeightedSample, derive_rates,
                          mechanical_rate_from_hz, parse_storage_time)

GM = 17.5 / 170e3


def test_system_params_closure():
    p = SystemParams.make(0.95, 0.05, gamma_m=GM, g_eff=0.6)
    assert p.gamma_o == pytest.approx(1.0)
    assert p.gamma_ext == 0.95 and p.gamma_int == 0.05


@pytest.mark.parametrize("kwargs", [
    dict(gamma_o=1.0, gamma_ext=0.8, gamma_int=0.1, gamma_m=GM, g_eff=0.6),
    dict(gamma_o=1.0, gamma_ext=1.0, gamma_int=0.0, gamma_m=1.5, g_eff=0.6),
    dict(gamma_o=1.0, gamma_ext=1.0, gamma_int=0.0, gamma_m=GM, g_eff=-0.1),
    dict(gamma_o=1.0, gamma_ext=1.0, gamma_int=0.0, gamma_m=GM, g_eff=0.6,
         n_th_mech=-1.0),
])
def test_system_params_rejects_inconsistent(kwargs):
    with pytest.raises(ValueError):
        SystemParams(**kwargs)


def test_derived_rates_identities():
    p = SystemParams.make(1.0, gamma_m=GM, g_eff=0.6)
    d = derive_rates(p)
    assert d.gamma_plus + d.gamma_minus == pytest.approx(p.gamma_o)
    assert d.gamma_plus - d.gamma_minus == pytest.approx(p.gamma_m)
    assert d.m_rate ** 2 == pytest.approx(d.gamma_minus ** 2 - p.g_eff ** 2)
    assert d.gamma_bar == pytest.approx(d.gamma_plus - d.m_rate)


def test_derived_rates_oscillatory_branch():
    # strong coupling: m purely imaginary with positive imaginary part
    p = SystemParams.make(1.0, gamma_m=GM, g_eff=0.6)
    m = derive_rates(p).m_rate
    assert m.real == 0.0
    assert m.imag == pytest.approx(0.3317400607991, rel=1e-12)


def test_derived_rates_overdamped_branch():
    # weak coupling: m real non-negative
    p = SystemParams.make(1.0, gamma_m=0.0, g_eff=0.3)
    m = derive_rates(p).m_rate
    assert m.imag == 0.0
    assert m.real == pytest.approx(math.sqrt(0.25 - 0.09))


def test_cat_params_norm():
    c = CatParams.make(2.0)
    assert c.norm == pytest.approx(2.0 * (1.0 + math.exp(-8.0)))
    with pytest.raises(ValueError):
        CatParams(alpha0=2.0, norm=2.0)
    with pytest.raises(ValueError):
        CatParams.make(0.0)


def test_schedule_snapping():
    s = ProtocolSchedule.make(1.97, 0.33, 0.1)
    assert s.t_write == pytest.approx(2.0)
    assert s.t_store == pytest.approx(0.3)
    assert s.t_read == s.t_write
    assert (s.n_write, s.n_store, s.n_read) == (20, 3, 20)
    assert s.t_final == pytest.approx(s.t_store + s.t_read)


def test_schedule_rejects_bad_grids():
    with pytest.raises(ValueError):
        ProtocolSchedule(t_write=1.0, t_store=0.0, t_read=1.0, dt=0.6)
    with pytest.raises(ValueError):
        ProtocolSchedule(t_write=1.0, t_store=0.0, t_read=2.0, dt=0.1)
    with pytest.raises(ValueError):
        ProtocolSchedule(t_write=1.05, t_store=0.0, t_read=1.05, dt=0.1)


def test_weighted_sample_validation():
    WeightedSample(alpha_in=2.0, alpha_in_plus=2.0, weight=1.0, branch="++")
    with pytest.raises(ValueError):
        WeightedSample(alpha_in=2.0, alpha_in_plus=2.0, weight=0.0, branch="++")
    with pytest.raises(ValueError):
        WeightedSample(alpha_in=2.0, alpha_in_plus=2.0, weight=1.0, branch="xx")


def test_grid_axis_points():
    ax = GridAxis(start=-1.0, stop=1.0, step=0.25, tag="x")
    pts = ax.points()
    assert ax.size == 9 and pts.size == 9
    assert pts[0] == -1.0 and pts[-1] == 1.0
    assert np.allclose(np.diff(pts), 0.25)


def test_grid_field_shape_checked():
    ax = GridAxis(0.0, 1.0, 0.5, "x")
    with pytest.raises(ValueError):
        GridField(axes=(ax,), values=np.zeros(4))


def test_grid_field_json_round_trip(tmp_path):
    ax = GridAxis(0.0, 1.0, 0.5, "x")
    ay = GridAxis(-1.0, 1.0, 1.0, "y")
    fld = GridField(axes=(ax, ay), values=np.arange(9.0).reshape(3, 3),
                    meta={"kind": "demo", "norm": 1.25})
    path = tmp_path / "field.json"
    fld.to_json(path)
    back = GridField.from_json(path)
    assert back.axes == fld.axes
    assert np.array_equal(back.values, fld.values)
    assert back.meta == fld.meta


def test_grid_field_csv_layout(tmp_path):
    ax = GridAxis(0.0, 1.0, 0.5, "x")
    fld = GridField(axes=(ax,), values=np.array([1.0, 2.0, 3.0]),
                    meta={"manifest_sha256": "abc123"})
    path = tmp_path / "field.csv"
    fld.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest_sha256 = abc123"
    assert lines[1] == "x,value"
    assert len(lines) == 5
    assert lines[2].split(",") == ["0.0", "1.0"]


def test_mechanical_rate_from_hz():
    assert mechanical_rate_from_hz(17.5, 170e3) == pytest.approx(GM)
    with pytest.raises(ValueError):
        mechanical_rate_from_hz(17.5, 0.0)


def test_parse_storage_time_forms():
    assert parse_storage_time("0.02/Gm", GM) == pytest.approx(0.02 / GM)
    assert parse_storage_time("0.3466/gamma_m", GM) == pytest.approx(0.3466 / GM)
    assert parse_storage_time("12.5", GM) == 12.5
    with pytest.raises(ValueError):
        parse_storage_time("0.02/Gm", 0.0)
    with pytest.raises(ValueError):
        parse_storage_time("abc", GM)
