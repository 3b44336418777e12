import pytest

from qd_discrete import ConfigError, ResolvedConfig, build_problem, parse_config
from qd_discrete.config import grid_value_type


MINIMAL = """\
[problem]
kind = separable

[method]
name = map-elites
"""

FULL = """\
# full config exercising every section
[problem]
kind = separable
m = 6
K = 3
d = 2
seed = 9

[tessellation]
cells = 32
samples = 2000

[method]
name = me-gide
alpha = 0.6
crossover_fraction = 0.25
shared_temperature = false

[budget]
batch_size = 16
iterations = 20
init_count = 40
seed = 1234

[output]
log_every = 5
out_dir = results
"""


def _write(tmp_path, text, name="config.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_minimal_config_fills_defaults(self, tmp_path):
        cfg = parse_config(_write(tmp_path, MINIMAL))
        assert cfg.run.method == "map-elites"
        assert cfg.run.batch_size == 64
        assert cfg.run.iterations == 100
        assert cfg.run.cells == 128
        assert cfg.problem.kind == "separable"
        assert cfg.provenance.root_seed == cfg.run.seed

    def test_full_config_round_trips_every_section(self, tmp_path):
        cfg = parse_config(_write(tmp_path, FULL))
        assert cfg.problem.m == 6
        assert cfg.run.method == "me-gide"
        assert cfg.run.alpha == 0.6
        assert cfg.run.shared_temperature is False
        assert cfg.run.crossover_fraction == 0.25
        assert cfg.run.seed == 1234
        assert cfg.output.log_every == 5
        assert cfg.output.out_dir == "results"

    def test_unknown_key_names_key_and_line(self, tmp_path):
        bad = MINIMAL + "\n[budget]\naplha = 0.4\n"
        with pytest.raises(ConfigError) as err:
            parse_config(_write(tmp_path, bad))
        assert "aplha" in str(err.value)
        assert ":8" in str(err.value)

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config(_write(tmp_path, MINIMAL + "\n[outputs]\nx = 1\n"))

    def test_range_violation_names_alpha(self, tmp_path):
        text = "[problem]\nkind = separable\n\n[method]\nname = me-gide\nalpha = 1.5\n"
        with pytest.raises(ConfigError, match="alpha"):
            parse_config(_write(tmp_path, text))

    def test_type_mismatch_names_key_and_line(self, tmp_path):
        text = "[problem]\nkind = separable\n\n[budget]\nbatch_size = many\n"
        with pytest.raises(ConfigError) as err:
            parse_config(_write(tmp_path, text))
        assert "batch_size" in str(err.value)
        assert ":5" in str(err.value)

    def test_duplicate_key_rejected(self, tmp_path):
        text = "[problem]\nkind = separable\nkind = rbm\n"
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(_write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.ini")

    def test_inline_comments_stripped(self, tmp_path):
        text = "[problem]\nkind = separable  # the small one\nm = 5 ; positions\n"
        cfg = parse_config(_write(tmp_path, text))
        assert cfg.problem.kind == "separable"
        assert cfg.problem.m == 5


class TestRoundTrip:
    def test_json_echo_reparses_identically(self, tmp_path):
        cfg = parse_config(_write(tmp_path, FULL), tool_version="0.1.0")
        echo = tmp_path / "config-echo.json"
        cfg.to_json_file(echo)
        again = ResolvedConfig.from_json_file(echo)
        assert again == cfg

    def test_double_round_trip_is_stable(self, tmp_path):
        cfg = parse_config(_write(tmp_path, MINIMAL))
        p1 = tmp_path / "echo1.json"
        p2 = tmp_path / "echo2.json"
        cfg.to_json_file(p1)
        ResolvedConfig.from_json_file(p1).to_json_file(p2)
        assert p1.read_text() == p2.read_text()


class TestBuildProblem:
    def test_separable_dimensions(self, tmp_path):
        cfg = parse_config(_write(tmp_path, FULL))
        problem = build_problem(cfg.problem)
        assert problem.spec.m == 6
        assert problem.spec.K == 3
        assert problem.spec.d == 2

    def test_rbm_problem_builds(self, tmp_path):
        text = "[problem]\nkind = rbm\nimage_side = 3\nn_hidden = 8\nd = 2\nepochs = 5\n"
        problem = build_problem(parse_config(_write(tmp_path, text)).problem)
        assert problem.spec.m == 9
        assert problem.spec.K == 2

    def test_grid_value_types(self):
        assert grid_value_type("alpha") is float
        assert grid_value_type("n_flips") is int
        assert grid_value_type("method") is str
        with pytest.raises(ConfigError):
            grid_value_type("bogus")
