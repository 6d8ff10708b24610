import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aldsat.dataset import Dataset, compute_normalization, generate_dataset, make_meta
from aldsat.evaluation import (
    SWEEP_HEADER,
    SweepResult,
    evaluate,
    export_report,
    read_scatter_csv,
    read_sweep_csv,
    relative_error,
    report_from_predictions,
    scatter_svg,
    sweep_points,
    sweep_width,
    write_sweep_csv,
)
from aldsat.neuralnet import TrainConfig, architecture, init_mlp

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def pair():
    train = generate_dataset(make_meta(4, seed=1), 300)
    test = generate_dataset(make_meta(4, seed=2), 60)
    return train.with_stats(compute_normalization(train)), test


class TestRelativeError:
    @pytest.mark.parametrize("pred, expected", [(2.0, 0.0), (2.2, 0.1), (1.0, -0.5)])
    def test_values(self, pred, expected):
        assert relative_error(pred, 2.0) == pytest.approx(expected, abs=1e-15)

    def test_rejects_nonpositive_truth(self):
        with pytest.raises(ValueError):
            relative_error([1.0, 1.0], [1.0, 0.0])


class TestReport:
    def test_perfect_oracle(self, pair):
        _, test = pair
        rep = report_from_predictions(test.saturation_time, test)
        assert rep.mean_eps == 0 and rep.std_eps == 0 and rep.mse_log == 0
        assert rep.n_samples == len(test)

    def test_constant_predictor(self, pair):
        _, test = pair
        c = float(np.median(test.saturation_time))
        rep = report_from_predictions(np.full(len(test), c), test)
        eps = [(c - t) / t for t in test.saturation_time.tolist()]
        mean = sum(eps) / len(eps)
        std = (sum((e - mean) ** 2 for e in eps) / len(eps)) ** 0.5
        assert rep.mean_eps == pytest.approx(mean, abs=1e-12)
        assert rep.std_eps == pytest.approx(std, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.2, 5.0))
    def test_uniform_scaling(self, factor):
        # predicting factor * t_sat everywhere: eps is constant, spread is zero
        test = Dataset(make_meta(4), np.zeros((5, 4)), np.ones(5), np.geomspace(1e-2, 1e2, 5))
        rep = report_from_predictions(factor * test.saturation_time, test)
        assert rep.mean_eps == pytest.approx(factor - 1, rel=1e-12, abs=1e-15)
        assert rep.std_eps <= 1e-12

    def test_dose_ratio(self, pair):
        _, test = pair
        rep = report_from_predictions(test.saturation_time, test)
        assert np.all((rep.dose_ratio > 0) & (rep.dose_ratio <= 1))

    def test_empty(self):
        empty = Dataset(make_meta(4), np.zeros((0, 4)), np.zeros(0), np.zeros(0))
        with pytest.raises(ValueError):
            report_from_predictions(np.zeros(0), empty)

    def test_evaluate_point_mismatch(self, pair):
        train, _ = pair
        mlp = init_mlp(architecture(4, (3,)), 0)
        mlp.stats = train.stats
        test = generate_dataset(make_meta(20, seed=2), 5)
        with pytest.raises(ValueError, match="thickness"):
            evaluate(mlp, test)


class TestSweeps:
    cfg = TrainConfig(epochs=2)

    def test_points_rows(self, pair):
        train, test = pair
        other = generate_dataset(make_meta(5, seed=1), 200)
        datasets = {4: (train, test), 5: (other, generate_dataset(make_meta(5, seed=2), 40))}
        res = sweep_points(datasets, {"shallow": (), "3": (3,)}, self.cfg)
        assert [(r["n_points"], r["arch"]) for r in res.table()] == [(4, "shallow"), (4, "3"), (5, "shallow"), (5, "3")]
        assert res.get(5, "3").n_samples == 40

    def test_width_rows_and_workers(self, pair):
        train, test = pair
        serial = sweep_width([2, 30], train, test, self.cfg)
        parallel = sweep_width([2, 30], train, test, self.cfg, workers=2)
        assert [r["arch"] for r in serial.table()] == ["2", "30"]
        assert serial.table() == parallel.table()

    def test_repeats_differ(self, pair):
        train, test = pair
        res = sweep_width([3], train, test, self.cfg, repeats=2)
        assert len(res.rows) == 2
        assert res.get(4, "3", 0).std_eps != res.get(4, "3", 1).std_eps


class TestExport:
    def test_empty_sweep_header_only(self, tmp_path):
        export_report(SweepResult("width"), tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text() == ",".join(SWEEP_HEADER) + "\n"
        assert read_sweep_csv(tmp_path / "s.csv") == []

    def test_sweep_csv_round_trip(self, tmp_path):
        rows = [{"n_points": 8, "arch": "30-10", "mean_eps": 0.1 / 3, "std_eps": np.nextafter(0.2, 1), "mse_log": 1e-300}]
        write_sweep_csv(rows, tmp_path / "s.csv")
        assert read_sweep_csv(tmp_path / "s.csv") == rows

    def test_scatter_csv_exact(self, pair, tmp_path):
        _, test = pair
        rep = report_from_predictions(test.saturation_time * 1.07, test)
        export_report(rep, tmp_path / "sc.csv")
        back = read_scatter_csv(tmp_path / "sc.csv")
        assert np.array_equal(back, np.column_stack([rep.t_sat, rep.eps, rep.dose_ratio]))

    def test_svg_parses(self, pair, tmp_path):
        _, test = pair
        rep = report_from_predictions(test.saturation_time * 1.07, test)
        export_report(rep, tmp_path / "sc.svg", format="svg-scatter")
        root = ET.parse(tmp_path / "sc.svg").getroot()
        assert root.tag == SVG + "svg"
        group = next(g for g in root.iter(SVG + "g") if g.get("class") == "samples")
        assert len(group.findall(SVG + "circle")) == rep.n_samples

    def test_svg_shading(self):
        test = Dataset(make_meta(4), np.zeros((2, 4)), np.array([1.0, 0.01]), np.array([1.0, 1.0]))
        rep = report_from_predictions([1.1, 0.9], test)
        fills = [c.get("fill") for c in ET.fromstring(scatter_svg(rep, title="a<b")).iter(SVG + "circle")]
        # saturated dose -> black, short dose -> light grey
        assert fills[0] == "rgb(0,0,0)" and fills[1] == "rgb(218,218,218)"

    def test_bad_format(self, pair, tmp_path):
        with pytest.raises(ValueError):
            export_report(SweepResult("width"), tmp_path / "x.svg", format="svg")
        with pytest.raises(TypeError):
            export_report({}, tmp_path / "x.csv")
