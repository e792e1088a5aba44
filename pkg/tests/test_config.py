import textwrap

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walker import config as cfg
from walker.terrain import TerrainMode

EXAMPLE = textwrap.dedent("""\
    n_steps = 12
    seed = 7

    [gait]
    epsilon = 0.55
    e_star = 0.4

    [gains]
    kp = [400.0, 400.0, 300.0, 300.0]
    mu = 0.8

    [terrain]
    mode = "stairs"
    l_des = 0.5
    h_des = 0.1

    [sim]
    dt_control = 0.002

    [output]
    dir = "out"
    """)


def error_line(text):
    with pytest.raises(cfg.ConfigError) as exc:
        cfg.loads(text, "s.toml")
    return exc.value


class TestLoad:
    def test_example(self):
        c = cfg.loads(EXAMPLE)
        assert c.n_steps == 12 and c.seed == 7
        assert c.gait.epsilon == 0.55 and c.gait.e_star == 0.4
        assert list(c.gains.kp) == [400.0, 400.0, 300.0, 300.0]
        assert c.terrain.mode is TerrainMode.STAIRS
        assert c.sim.dt_control == 0.002
        assert c.output.dir == "out"

    def test_empty_is_default(self):
        assert cfg.loads("") == cfg.ScenarioConfig()

    def test_integers_accepted_for_floats(self):
        c = cfg.loads("[terrain]\nl_des = 1\n")
        assert c.terrain.l_des == 1.0 and isinstance(c.terrain.l_des, float)

    def test_terrain_sizes(self):
        c = cfg.loads(EXAMPLE)
        t = c.build_terrain()
        assert len(t) == c.n_steps + cfg.TERRAIN_MARGIN
        assert t.stone(0).h_des == 0.1

    def test_random_terrain_uses_seed(self):
        text = "seed = 3\n[terrain]\nmode = \"random\"\n"
        a = cfg.loads(text).build_terrain()
        b = cfg.loads(text).build_terrain()
        c = cfg.loads(text.replace("3", "4")).build_terrain()
        assert a.stones == b.stones != c.stones

    def test_explicit_stones(self):
        text = "n_steps = 2\n[terrain]\nmode = \"explicit\"\nstones = [[0.5, 0.0], [0.4, 0.1]]\n"
        t = cfg.loads(text).build_terrain()
        assert [(s.l_des, s.h_des) for s in t.stones] == [(0.5, 0.0), (0.4, 0.1)]

    def test_missing_file(self, tmp_path):
        with pytest.raises(cfg.ConfigError, match="cannot read"):
            cfg.load(tmp_path / "nope.toml")


class TestErrors:
    def test_syntax_error_has_line(self):
        e = error_line("n_steps = 3\n[gait\nepsilon = 0.5\n")
        assert e.line == 2 and "syntax" in e.message

    def test_unknown_key(self):
        e = error_line("n_steps = 3\n\n[gait]\nepsilon = 0.5\nfoo = 1\n")
        assert e.line == 5 and "foo" in e.message
        assert str(e).startswith("s.toml:5:")

    def test_unknown_section(self):
        e = error_line("seed = 1\n[robot]\nmass = 3\n")
        assert e.line == 2

    def test_wrong_type(self):
        e = error_line("[gait]\nepsilon = \"big\"\n")
        assert e.line == 2 and "number" in e.message

    def test_out_of_range_value(self):
        e = error_line("[sim]\nrtol = 1e-8\n\n[gait]\ne_star = 0.5\nepsilon = 1.5\n")
        assert e.line == 6 and "epsilon" in e.message

    def test_bad_step_count(self):
        e = error_line("seed = 0\nn_steps = 0\n")
        assert e.line == 2

    def test_boolean_is_not_an_integer(self):
        assert error_line("seed = true\n").line == 1

    def test_too_few_explicit_stones(self):
        e = error_line("n_steps = 3\n[terrain]\nmode = \"explicit\"\nstones = [[0.5, 0.0]]\n")
        assert e.line == 4 and "stones" in e.message

    def test_bad_terrain_mode(self):
        e = error_line("[terrain]\nl_des = 0.5\nmode = \"lava\"\n")
        assert e.line is not None and e.line >= 1

    def test_section_must_be_table(self):
        assert error_line("gait = 3\n").line == 1


class TestOverrides:
    def test_apply(self):
        c = cfg.loads(EXAMPLE).with_overrides(n_steps=4, seed=9, terrain="random")
        assert (c.n_steps, c.seed, c.terrain.mode) == (4, 9, TerrainMode.RANDOM)
        assert c.gait.epsilon == 0.55

    def test_none_keeps_values(self):
        c = cfg.loads(EXAMPLE)
        assert c.with_overrides() == c

    def test_invalid(self):
        with pytest.raises(cfg.ConfigError):
            cfg.ScenarioConfig().with_overrides(n_steps=0)


class TestRoundTrip:
    def test_example(self, tmp_path):
        c = cfg.loads(EXAMPLE)
        path = tmp_path / "c.toml"
        cfg.dump(c, path)
        assert cfg.load(path) == c

    def test_default(self):
        c = cfg.ScenarioConfig()
        assert cfg.loads(cfg.dumps(c)) == c

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 2.0), st.floats(0.2, 1.0),
           st.integers(1, 500), st.integers(0, 2**31),
           st.sampled_from(list(TerrainMode)))
    def test_property(self, eps, e, zt, n, seed, mode):
        text = (f"n_steps = {n}\nseed = {seed}\n[gait]\nepsilon = {eps!r}\n"
                f"e_star = {e!r}\nz_tilde_star = {zt!r}\n[terrain]\nmode = \"{mode.value}\"\n")
        if mode is TerrainMode.EXPLICIT:
            text += f"stones = {[[0.5, 0.0]] * n}\n"
        c = cfg.loads(text)
        assert cfg.loads(cfg.dumps(c)) == c
        assert c.gait.epsilon == eps and c.n_steps == n
