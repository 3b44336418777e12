import numpy as np
import pytest

from qd_discrete import (
    Evaluation,
    Repertoire,
    RunConfig,
    RunMetrics,
    Tessellation,
    emit_outputs,
    make_separable_problem,
    run,
    write_metrics_csv,
    write_repertoire_csv,
)
from qd_discrete.config import ResolvedConfig
from qd_discrete.io import read_final_metric, read_metrics_csv, write_qd_curve_svg

FROZEN_METRICS_HEADER = (
    "iteration,evaluations,gradient_evaluations,qd_score,qd_score_offset,"
    "coverage,max_fitness,mean_entropy,temperature,solver_iterations"
)


def _metrics_with_rows():
    metrics = RunMetrics()
    metrics.append(
        iteration=1, evaluations=100, gradient_evaluations=0, qd_score=1.5,
        qd_score_offset=2.0, coverage=0.25, max_fitness=1.0,
        mean_entropy=None, temperature=None, solver_iterations=None,
    )
    metrics.append(
        iteration=2, evaluations=200, gradient_evaluations=50, qd_score=2.5,
        qd_score_offset=3.0, coverage=0.5, max_fitness=1.25,
        mean_entropy=1.234, temperature=0.5, solver_iterations=12,
    )
    return metrics


class TestMetricsCsv:
    def test_frozen_header(self, tmp_path):
        path = tmp_path / "metrics.csv"
        write_metrics_csv(RunMetrics(), path)
        assert path.read_text().splitlines() == [FROZEN_METRICS_HEADER]

    def test_blank_fields_for_missing_values(self, tmp_path):
        path = tmp_path / "metrics.csv"
        write_metrics_csv(_metrics_with_rows(), path)
        lines = path.read_text().splitlines()
        assert lines[1].endswith(",,,")
        assert lines[2].endswith(",1.234,0.5,12")

    def test_round_trip_final_metric(self, tmp_path):
        path = tmp_path / "metrics.csv"
        write_metrics_csv(_metrics_with_rows(), path)
        assert read_final_metric(path, "qd_score") == 2.5
        with pytest.raises(ValueError):
            read_final_metric(path, "not_a_column")


class TestRepertoireCsv:
    def test_row_count_and_occupancy(self, tmp_path):
        tess = Tessellation(np.linspace(0, 1, 10)[:, None])
        rep = Repertoire(tess, 3)
        for value, pos in [(1.0, 0.0), (2.0, 0.5), (3.0, 1.0)]:
            rep.try_insert(np.array([0, 1, 2]), Evaluation(value, np.array([pos])))
        path = tmp_path / "repertoire.csv"
        write_repertoire_csv(rep, path)
        header, rows = read_metrics_csv(path)
        assert header == ["cell_id", "centroid_0", "occupied", "fitness", "descriptor_0", "genotype"]
        assert len(rows) == 10
        assert sum(r[2] == "1" for r in rows) == 3
        occupied_row = next(r for r in rows if r[2] == "1")
        assert occupied_row[5] == "0 1 2"

    def test_genotype_field_is_quoted(self, tmp_path):
        tess = Tessellation(np.array([[0.0]]))
        rep = Repertoire(tess, 2)
        rep.try_insert(np.array([1, 0]), Evaluation(1.0, np.array([0.0])))
        path = tmp_path / "repertoire.csv"
        write_repertoire_csv(rep, path)
        assert '"1 0"' in path.read_text()


class TestSvg:
    def test_empty_metrics_give_axes_only(self, tmp_path):
        path = tmp_path / "qd.svg"
        write_qd_curve_svg(RunMetrics(), path)
        text = path.read_text()
        assert "<svg" in text and "</svg>" in text
        assert "polyline" not in text

    def test_curve_has_polyline(self, tmp_path):
        path = tmp_path / "qd.svg"
        write_qd_curve_svg(_metrics_with_rows(), path)
        assert "polyline" in path.read_text()


class TestEmitOutputs:
    def test_two_identical_runs_byte_identical_outputs(self, tmp_path):
        problem = make_separable_problem(5, 3, 2, seed=3)
        cfg = RunConfig(method="me-gide", batch_size=8, iterations=6, cells=16,
                        init_count=16, seed=11)
        resolved = ResolvedConfig(run=cfg)
        outputs = []
        for sub in ("a", "b"):
            rep, metrics = run(problem, cfg)
            outputs.append(emit_outputs(rep, metrics, resolved, tmp_path / sub))
        for key in ("metrics", "repertoire", "qd_curve"):
            assert outputs[0][key].read_bytes() == outputs[1][key].read_bytes()

    def test_emit_creates_all_four_files(self, tmp_path):
        problem = make_separable_problem(4, 3, 1, seed=5)
        cfg = RunConfig(method="map-elites", batch_size=4, iterations=2, cells=8,
                        init_count=8, seed=1)
        rep, metrics = run(problem, cfg)
        paths = emit_outputs(rep, metrics, ResolvedConfig(run=cfg), tmp_path / "out")
        for p in paths.values():
            assert p.is_file()
