import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from offgrid_p2h.errors import HorizonExceedsData, IncompatibleStep, IrregularStep, MissingColumn, NegativeValue, NonMonotonicTime
from offgrid_p2h.ingest import (
    MeteoSeries,
    PowerSeries,
    load_meteo_series,
    make_forecast,
    pv_power,
    resample,
    to_power_series,
    wind_power,
    write_meteo_csv,
)
from offgrid_p2h.plant import PVArray, WindTurbine


def _csv(tmp_path, rows, header="epoch_s,wind_ms,ghi_wm2,temp_c"):
    p = tmp_path / "m.csv"
    p.write_text(header + "\n" + "\n".join(rows) + "\n")
    return p


def _power(values, step=60.0):
    v = np.asarray(values, float)
    return PowerSeries(0.0, step, v[None, :], np.zeros_like(v), (6.25,), 5.0)


class TestLoad:
    def test_three_rows(self, tmp_path):
        s = load_meteo_series(_csv(tmp_path, ["0,5,0,10", "60,6,0,10", "120,7,0,10"]))
        assert len(s) == 3 and s.step == 60.0
        assert s.wind_speed.tolist() == [[5.0, 6.0, 7.0]]

    def test_gap_reports_row(self, tmp_path):
        with pytest.raises(IrregularStep) as exc:
            load_meteo_series(_csv(tmp_path, ["0,5,0,10", "60,6,0,10", "180,7,0,10"]))
        assert exc.value.context["row"] == 3

    def test_negative_irradiance(self, tmp_path):
        with pytest.raises(NegativeValue):
            load_meteo_series(_csv(tmp_path, ["0,5,-5,10", "60,6,0,10"]))

    def test_time_going_backwards(self, tmp_path):
        with pytest.raises(NonMonotonicTime):
            load_meteo_series(_csv(tmp_path, ["0,5,0,10", "60,6,0,10", "30,7,0,10"]))

    def test_missing_column(self, tmp_path):
        with pytest.raises(MissingColumn):
            load_meteo_series(_csv(tmp_path, ["0,5,10"], header="epoch_s,wind_ms,temp_c"))

    def test_schema_override_and_per_turbine_columns(self, tmp_path):
        p = _csv(tmp_path, ["0,5,6,0,1", "10,5,7,0,1"], header="t,v_1,v_2,g,T")
        s = load_meteo_series(p, {"epoch": "t", "wind": "v", "ghi": "g", "temp": "T"})
        assert s.wind_speed.shape == (2, 2)
        assert s.wind_for(1).tolist() == [6.0, 7.0]

    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        s = MeteoSeries(100.0, 30.0, rng.uniform(0, 20, (3, 8)), rng.uniform(0, 900, 8), rng.normal(10, 5, 8))
        write_meteo_csv(s, tmp_path / "rt.csv")
        back = load_meteo_series(tmp_path / "rt.csv")
        assert back.start_epoch == s.start_epoch and back.step == s.step
        assert np.array_equal(back.wind_speed, s.wind_speed)
        assert np.array_equal(back.ghi, s.ghi) and np.array_equal(back.ambient_temp, s.ambient_temp)

    def test_bundled_week(self):
        from offgrid_p2h.runconfig import RunConfig

        s = RunConfig().load_meteo()
        assert s.duration == 7 * 86400 and s.wind_speed.shape[0] == 3


class TestResample:
    def test_mean(self):
        out = resample(_power([1, 2, 3, 4, 5]), 300.0)
        assert out.per_wt.tolist() == [[3.0]]

    def test_identity(self):
        p = _power([1, 2, 3])
        out = resample(p, 60.0)
        assert np.array_equal(out.per_wt, p.per_wt) and out.step == 60.0

    def test_hold_upsample(self):
        out = resample(_power([4]), 20.0, "hold")
        assert out.per_wt.tolist() == [[4.0, 4.0, 4.0]]

    def test_incompatible(self):
        with pytest.raises(IncompatibleStep):
            resample(_power([1, 2, 3]), 90.0)

    def test_meteo_series(self):
        s = MeteoSeries(0.0, 60.0, [[1, 3, 5, 7]], [0, 0, 100, 100], [1, 1, 1, 1])
        out = resample(s, 120.0)
        assert out.wind_speed.tolist() == [[2.0, 6.0]] and out.ghi.tolist() == [0.0, 100.0]

    @given(st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=12), st.integers(1, 6))
    def test_mean_preserves_energy(self, blocks, k):
        values = np.repeat(np.asarray(blocks), k) + np.tile(np.linspace(0, 1, k), len(blocks))
        p = _power(values, 10.0)
        out = resample(p, 10.0 * k)
        before, after = p.per_wt.sum() * p.step, out.per_wt.sum() * out.step
        assert after == pytest.approx(before, rel=1e-9, abs=1e-12)

    @given(st.integers(1, 20), st.integers(1, 6))
    def test_round_trip_length(self, n_blocks, k):
        p = _power(np.arange(n_blocks * k, dtype=float), 5.0)
        back = resample(resample(p, 5.0 * k, "mean"), 5.0, "hold")
        assert len(back) == len(p)


class TestConversion:
    def test_wind_below_cut_in(self):
        assert wind_power(2.0, WindTurbine()) == 0.0

    def test_wind_rated(self):
        assert wind_power(12.0, WindTurbine()) == 6.25

    def test_wind_cubic(self):
        assert wind_power(9.0, WindTurbine()) == pytest.approx(6.25 * 702 / 1701, rel=1e-12)

    def test_wind_cut_out(self):
        assert wind_power(26.0, WindTurbine()) == 0.0

    @given(st.floats(3.0, 12.0), st.floats(3.0, 12.0))
    def test_wind_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert wind_power(lo, WindTurbine()) <= wind_power(hi, WindTurbine())

    def test_pv_dark(self):
        assert pv_power(0.0, 20.0, PVArray()) == 0.0

    def test_pv_standard_conditions(self):
        # NOCT 20 makes cell temperature equal ambient
        assert pv_power(1000.0, 25.0, PVArray(5.0, noct=20.0)) == pytest.approx(5.0)

    def test_pv_derated(self):
        assert pv_power(800.0, 35.0, PVArray(5.0, -0.004, noct=20.0)) == pytest.approx(3.84, rel=1e-12)

    @given(st.lists(st.floats(0, 30), min_size=1, max_size=20), st.lists(st.floats(0, 1300), min_size=1, max_size=20),
           st.floats(-30, 45))
    def test_outputs_within_rating(self, wind, ghi, temp):
        n = min(len(wind), len(ghi))
        m = MeteoSeries(0.0, 60.0, [wind[:n]], ghi[:n], [temp] * n)
        p = to_power_series(m, (WindTurbine(), WindTurbine(4.0)), PVArray(5.0))
        assert (p.per_wt >= 0).all() and (p.per_wt[0] <= 6.25).all() and (p.per_wt[1] <= 4.0).all()
        assert (p.pv >= 0).all() and (p.pv <= 5.0).all()


class TestForecast:
    def test_perfect_is_actual(self):
        p = _power(np.linspace(0, 5, 10), 300.0)
        fc = make_forecast(p, 600.0, 1800.0, 300.0, "perfect")
        assert np.array_equal(fc.per_wt, p.per_wt[:, 2:8])

    def test_persistence(self):
        p = _power([1.0, 2.0, 4.0, 9.0, 9.0], 300.0)
        fc = make_forecast(p, 900.0, 600.0, 300.0, "persistence")
        assert fc.per_wt.tolist() == [[4.0, 4.0]]

    def test_noisy_seeded(self):
        p = _power(np.full(12, 3.0), 300.0)
        a = make_forecast(p, 0.0, 1800.0, 300.0, "noisy", seed=7)
        b = make_forecast(p, 0.0, 1800.0, 300.0, "noisy", seed=7)
        c = make_forecast(p, 0.0, 1800.0, 300.0, "noisy", seed=8)
        assert np.array_equal(a.per_wt, b.per_wt) and not np.array_equal(a.per_wt, c.per_wt)

    def test_beyond_data(self):
        with pytest.raises(HorizonExceedsData):
            make_forecast(_power(np.ones(4), 300.0), 600.0, 900.0, 300.0)
