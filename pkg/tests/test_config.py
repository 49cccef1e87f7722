import pytest
from hypothesis import given, strategies as st

from emmsim.config import RunConfig, dump_config, parse_config, parse_config_text
from emmsim.errors import ConfigError


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(path)
    assert cfg == RunConfig()
    assert (cfg.network.bs_count, cfg.network.area_side, cfg.network.coverage_radius) == (49, 1000.0, 150.0)
    assert (cfg.tasks, cfg.frame_length, cfg.battery) == (500, 5, 1000.0)
    assert (cfg.workload.k_min, cfg.workload.k_max, cfg.workload.subtask_deadline) == (60, 120, 0.150)
    assert cfg.energy_budget == pytest.approx(410.0)


def test_alpha_out_of_range():
    with pytest.raises(ConfigError):
        parse_config_text("alpha = 1.5")


def test_learning_policy_settings():
    cfg = parse_config_text("policy = emm-lsi\nstop.kind = fixed_count\nstop.ks = 20\n")
    assert cfg.policy == "emm-lsi"
    assert (cfg.stop.kind, cfg.stop.k_s) == ("fixed_count", 20)


def test_comments_and_blank_lines():
    cfg = parse_config_text("# header\n\nseed = 7  # trailing\n")
    assert cfg.seed == 7


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("seed = 1\nbogus = 3\n")


def test_type_mismatch_reports_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("tasks = many")


def test_missing_equals():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("seed 3")


def test_tasks_must_fill_whole_frames():
    with pytest.raises(ConfigError):
        parse_config_text("tasks = 12\nframe_length = 5")


def test_oracle_needs_fixed_bs_sets():
    with pytest.raises(ConfigError):
        parse_config_text("policy = jstep-oracle\nepochs.model = random")


def test_epoch_script_parses():
    cfg = parse_config_text("epochs.model = scripted\nepochs.script = 40:0,1 | 40:0,1,2,3")
    assert cfg.epochs.script == ((40, (0, 1)), (40, (0, 1, 2, 3)))


def test_default_round_trip():
    assert parse_config_text(dump_config(RunConfig())) == RunConfig()


def test_realization_hash_ignores_policy_knobs():
    a = parse_config_text("policy = emm-gsi\nv = 0.01")
    b = parse_config_text("policy = emm-lsi\nv = 3.0\nstop.ks = 7")
    c = parse_config_text("seed = 2")
    assert a.realization_hash() == b.realization_hash() != c.realization_hash()


@given(seed=st.integers(0, 10**6), frames=st.integers(1, 40), j=st.integers(1, 8),
       alpha=st.floats(0.01, 1.0), v=st.floats(1e-6, 1e3), noise=st.floats(0, 0.9),
       radius=st.floats(10, 500), ks=st.integers(1, 200),
       policy=st.sampled_from(["emm-gsi", "emm-lsi", "emm-lsi-v", "radio-lsi"]))
def test_round_trip_property(seed, frames, j, alpha, v, noise, radius, ks, policy):
    text = (f"seed = {seed}\ntasks = {frames * j}\nframe_length = {j}\nalpha = {alpha!r}\nv = {v!r}\n"
            f"observation_noise = {noise!r}\ncoverage_radius = {radius!r}\nstop.ks = {ks}\n"
            f"policy = {policy}\n")
    cfg = parse_config_text(text)
    assert parse_config_text(dump_config(cfg)) == cfg
