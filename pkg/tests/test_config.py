import json

import pytest

from declip.config import DEFAULTS, ConfigError, bench_config, frame_plan, load_config, resolve, solver_config, to_ini
from declip.solver import FixedStep, GoldenSection


def test_defaults_round_trip_through_ini(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(to_ini(resolve()))
    assert load_config(p) == resolve() == DEFAULTS


def test_ini_values_parsed(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[solver]\nstep = fixed\nmu = 0.5\n[bench]\nk_values = 4, 8\ntrials = 3\n[framing]\nhop = 128\n")
    r = load_config(p)
    assert r["bench"]["k_values"] == [4, 8]
    assert isinstance(solver_config(r).line_search, FixedStep)
    assert frame_plan(r).hop == 128
    b = bench_config(r)
    assert b.k_values == (4, 8) and b.trials == 3 and b.solver.adaptive is not None


@pytest.mark.parametrize(
    "text",
    ["[solver]\nmax_iter = 3\n", "[solvers]\nmax_iters = 3\n", "[bench]\nrng = mt19937\n", "[solver]\nmax_iters = many\n"],
)
def test_invalid_entries_rejected(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_unknown_keys_listed():
    with pytest.raises(ConfigError, match="solver.foo, solver.zap"):
        resolve({"solver": {"zap": 1, "foo": 2}})


def test_semantic_errors_become_config_errors():
    r = resolve({"solver": {"max_iters": 0}})
    with pytest.raises(ConfigError):
        solver_config(r)
    with pytest.raises(ConfigError):
        frame_plan(resolve({"framing": {"frame_len": 16, "hop": 32}}))


def test_manifest_usable_as_config(tmp_path):
    r = resolve({"bench": {"trials": 7}, "solver": {"mu_max": 1.5}})
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"subcommand": "bench", "config": r, "params": {"threads": 2}}))
    back = load_config(p)
    assert back == r
    assert isinstance(solver_config(back).line_search, GoldenSection)


def test_bad_json(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{")
    with pytest.raises(ConfigError):
        load_config(p)


def test_readme_config_block_is_the_defaults(tmp_path):
    import re
    from pathlib import Path

    readme = (Path(__file__).parents[1] / "README.md").read_text()
    p = tmp_path / "readme.ini"
    p.write_text(re.search(r"```ini\n(.*?)```", readme, re.S).group(1))
    assert load_config(p) == DEFAULTS
