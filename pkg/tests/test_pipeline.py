import dataclasses
import datetime as dt
import json
import math
import re

import numpy as np
import pytest

from mesgencov.covariance import ResidualMatrix, sample_covariance
from mesgencov.exceptions import ConfigError, DataError, NumericError
from mesgencov.pipeline import (
    CONFIG_FIELDS,
    Dataset,
    GetCovConfig,
    default_config,
    dumps_json,
    get_cov,
    load_config,
    write_outputs,
)
from mesgencov.plots import plot_multivariate_qq, plot_series, qq_points
from mesgencov.siteselect import DEFAULT_36_SITES
from mesgencov.synth import generate_fixture

SITES = list(DEFAULT_36_SITES[:6])


def cfg_for(sites=SITES, **kw):
    return GetCovConfig(use36=False, site_add=list(sites), **kw).validate()


@pytest.fixture(scope="module")
def gappy():
    """Six sites where about 6% of months have no valid week."""
    return generate_fixture(seed=5, n_sites=6, n_months=48, missing_rate=0.5)


@pytest.fixture(scope="module")
def data(gappy):
    return Dataset(gappy.weekly, gappy.daily, gappy.meta)


@pytest.fixture(scope="module")
def base(data):
    return get_cov(cfg_for(), data)


class TestConfig:
    def test_defaults(self):
        c = default_config()
        assert c.startdate == dt.datetime(1983, 1, 1) and c.enddate == dt.datetime(1986, 12, 31)
        assert c.comp == "SO4" and c.use36 and c.r == 1 and c.k == 1 and c.rng_seed == 0
        assert not (c.write_mat or c.plot_multi or c.plot_all)
        assert c.site_add == c.outlier_dates_by_site == c.site_outliers == c.remove_outliers == c.site_plot == []
        assert c.sites() == list(DEFAULT_36_SITES)
        assert set(c.to_dict()) == set(CONFIG_FIELDS)

    def test_site_union_dedup(self):
        c = GetCovConfig(site_add=["TN11", "OH71", "TN11"])
        assert c.sites() == list(DEFAULT_36_SITES) + ["TN11"]

    def test_json_round_trip(self, tmp_path):
        p = tmp_path / "c.json"
        c = cfg_for(r=2, k=3, outlier_dates_by_site=[("NY08", 25)], rng_seed=7)
        p.write_text(json.dumps(c.to_dict()))
        assert load_config(p) == c

    def test_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('startdateStr = "01/01/84 00:00"\nuse36 = false\nsiteAdd = ["NY52", "TN11"]\nr = 2\n')
        c = load_config(p)
        assert c.startdate == dt.datetime(1984, 1, 1) and c.sites() == ["NY52", "TN11"] and c.r == 2 and c.k == 1

    @pytest.mark.parametrize(
        "val, expected",
        [
            (["IN41", 25], [("IN41", 25)]),
            (["IN41", 25, "AL10", 3], [("IN41", 25), ("AL10", 3)]),
            ([["IN41", 25], ["IN41", 30]], [("IN41", 25), ("IN41", 30)]),
            ({"IN41": [25, 30]}, [("IN41", 25), ("IN41", 30)]),
            ({"IN41": 25}, [("IN41", 25)]),
        ],
    )
    def test_outlier_date_forms(self, val, expected):
        c = GetCovConfig.from_dict({"outlierDatesbySite": val})
        assert c.outlier_dates_by_site == expected

    @pytest.mark.parametrize(
        "d",
        [
            {"r": 7},
            {"k": -1},
            {"r": 1.5},
            {"comp": "XYZ"},
            {"startdateStr": "01/01/87 00:00"},
            {"startdateStr": "not a date"},
            {"bogus": 1},
            {"outlierDatesbySite": ["IN41"]},
            {"outlierDatesbySite": ["IN41", 2.5]},
            {"outlierDatesbySite": ["IN41", -1]},
            {"use36": "maybe"},
            {"siteAdd": ["not a site"]},
        ],
    )
    def test_invalid(self, d):
        with pytest.raises(ConfigError):
            GetCovConfig.from_dict(d)

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        (tmp_path / "bad.json").write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.json")
        (tmp_path / "list.json").write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "list.json")
        (tmp_path / "r.json").write_text('{"r": 7}')
        with pytest.raises(ConfigError, match="Integer <= 5"):
            load_config(tmp_path / "r.json")


class TestGetCov:
    def test_shapes_and_cov(self, base):
        m = len(SITES)
        assert base.cov.shape == (m, m)
        assert base.labels == [s + "SO4" for s in SITES]
        np.testing.assert_array_equal(base.cov, sample_covariance(base.residualData))
        assert np.array_equal(base.cov, base.cov.T) and np.all(np.diag(base.cov) >= 0)
        assert base.residualData.shape == (48, m)
        assert len(base.listMod) == len(base.pred) == len(base.rosnerTest) == m
        assert all(r is None for r in base.rosnerTest)
        for f, p in zip(base.listMod, base.pred):
            np.testing.assert_array_equal(p, f.fitted)
        assert base.start_month == 198301 and base.files == []

    def test_na_variant_consistent(self, base):
        raw, full = base.residualDataNA.values, base.residualData.values
        obs = ~np.isnan(raw)
        assert (~obs).any()
        np.testing.assert_array_equal(full[obs], raw[obs])
        assert not np.isnan(full).any()

    def test_no_missing_data(self):
        fx = generate_fixture(seed=2, n_sites=3, n_months=48)
        out = get_cov(cfg_for(fx.truth["sites"]), Dataset(fx.weekly, fx.daily, fx.meta))
        np.testing.assert_array_equal(out.residualData.values, out.residualDataNA.values)

    def test_outlier_dates_remove_month(self, data, base):
        site = SITES[1]
        out = get_cov(cfg_for(outlier_dates_by_site=[(site, 25)]), data)
        j = SITES.index(site)
        fit_new, fit_old = out.listMod[j], base.listMod[j]
        assert math.isnan(out.residualDataNA.values[25, j])
        assert not fit_new.observed[25]
        assert fit_new.n_obs == fit_old.n_obs - int(fit_old.observed[25])
        keep = fit_new.observed
        assert fit_new.rss <= float((fit_old.residuals[keep] ** 2).sum()) + 1e-12
        assert out.to_dict()["removedMonths"] == {site: [25]}
        # other sites untouched
        np.testing.assert_array_equal(out.listMod[0].coeffs, base.listMod[0].coeffs)

    def test_outlier_month_outside_window_warns(self, data):
        with pytest.warns(UserWarning, match="outside the window"):
            get_cov(cfg_for(outlier_dates_by_site=[(SITES[0], 99)]), data)

    def test_site_order_invariance(self, data, base):
        rev = get_cov(cfg_for(SITES[::-1]), data)
        for j, s in enumerate(SITES):
            k = SITES[::-1].index(s)
            np.testing.assert_array_equal(rev.listMod[k].coeffs, base.listMod[j].coeffs)
            np.testing.assert_array_equal(rev.residualData.values[:, k], base.residualData.values[:, j])
        P = [SITES.index(s) for s in SITES[::-1]]
        np.testing.assert_allclose(rev.cov, base.cov[np.ix_(P, P)], rtol=1e-12, atol=1e-16)

    def test_deterministic_and_seed_dependent(self, data, base):
        again = get_cov(cfg_for(), data)
        assert dumps_json(again.to_dict()) == dumps_json(base.to_dict())
        other = get_cov(cfg_for(rng_seed=1), data)
        assert not np.array_equal(other.residualData.values, base.residualData.values)
        np.testing.assert_array_equal(other.residualDataNA.values, base.residualDataNA.values)

    def test_rosner_and_remove_outliers(self, gappy):
        site = SITES[3]
        bumped = [
            dataclasses.replace(r, conc={**r.conc, "SO4": r.conc["SO4"] * math.e**2})
            if r.site == site and r.yrmonth == 198406 and r.conc.get("SO4") is not None
            else r
            for r in gappy.weekly
        ]
        d = Dataset(bumped, gappy.daily, gappy.meta)
        j = SITES.index(site)
        analysed = get_cov(cfg_for(site_outliers=[site]), d)
        rep = analysed.rosnerTest[j]
        assert rep is not None and 17 in rep.outliers
        assert all(r is None for i, r in enumerate(analysed.rosnerTest) if i != j)
        removed = get_cov(cfg_for(remove_outliers=[site]), d)
        assert 17 in removed.site_results[j].removed_months
        assert math.isnan(removed.residualDataNA.values[17, j])
        assert removed.listMod[j].residual_std_error < analysed.listMod[j].residual_std_error

    def test_insufficient_data_names_site(self, data):
        with pytest.raises(DataError, match=r"ZZ99.*0 observed"):
            get_cov(cfg_for(SITES[:2] + ["ZZ99"]), data)

    def test_config_errors(self, data):
        with pytest.raises(ConfigError, match="no sites"):
            get_cov(GetCovConfig(use36=False), data)
        short = GetCovConfig(use36=False, site_add=SITES[:2], startdate=dt.datetime(1983, 1, 1),
                             enddate=dt.datetime(1983, 3, 1), r=2, k=2)
        with pytest.raises(ConfigError, match="too short"):
            get_cov(short, data)

    def test_dataset_from_dir(self, small_data_dir, tmp_path):
        d = Dataset.from_dir(small_data_dir)
        assert len(d.weekly) > 0 and set(d.meta) == set(SITES)
        with pytest.raises(DataError):
            Dataset.from_dir(tmp_path)


class TestOutputs:
    def test_plots_and_mat(self, data, tmp_path):
        out = get_cov(cfg_for(plot_all=True, plot_multi=True, write_mat=True), data, tmp_path)
        svgs = sorted(p.name for p in tmp_path.glob("*.svg"))
        assert svgs == sorted([f"site_{s}SO4.svg" for s in SITES] + ["mvn_qq.svg"])
        assert (tmp_path / "covSites.mat").exists() and "covSites.mat" in out.files

    def test_site_plot_subset(self, data, tmp_path):
        get_cov(cfg_for(site_plot=[SITES[2], "ZZ99"]), data, tmp_path)
        assert [p.name for p in tmp_path.iterdir()] == [f"site_{SITES[2]}SO4.svg"]

    def test_no_flags_no_files(self, data, tmp_path):
        get_cov(cfg_for(), data, tmp_path)
        assert list(tmp_path.iterdir()) == []

    def test_write_outputs(self, base, tmp_path):
        files = write_outputs(base, tmp_path)
        names = {p.name for p in files}
        assert {"cov.csv", "residualData.csv", "residualDataNA.csv", "report.json"} <= names
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["labels"] == base.labels and len(rep["cov"]) == len(SITES)
        assert any(v is None for row in rep["residualDataNA"] for v in row)
        assert len((tmp_path / "cov.csv").read_text().splitlines()) == len(SITES) + 1

    def test_dumps_json_sanitizes(self):
        text = dumps_json({"a": np.float64("nan"), "b": np.int64(3), "c": np.array([1.0, np.inf]), "d": np.bool_(True)})
        assert json.loads(text) == {"a": None, "b": 3, "c": [1.0, None], "d": True}


class TestPlots:
    def test_series_markers(self, base, tmp_path):
        sr = base.site_results[0]
        p = plot_series(sr.fit, sr.series, tmp_path / "s.svg")
        text = p.read_text()
        assert text.count('class="observed"') == int((~np.isnan(sr.series.values)).sum())
        assert text.count('class="fitted"') == 1
        assert "<svg" in text and text.rstrip().endswith("</svg>")

    def test_qq(self, tmp_path):
        X = np.random.default_rng(0).standard_normal((100, 2))
        q, d2 = qq_points(X)
        assert np.all(np.diff(q) > 0) and np.all(np.diff(d2) >= 0)
        assert plot_multivariate_qq(X, tmp_path / "q.svg").read_text().count('class="qq"') == 100

    def test_qq_errors(self, tmp_path):
        with pytest.raises(DataError):
            plot_multivariate_qq(np.ones((10, 1)), tmp_path / "q.svg")
        x = np.random.default_rng(1).standard_normal(10)
        with pytest.raises(NumericError):
            qq_points(np.column_stack([x, x]))
