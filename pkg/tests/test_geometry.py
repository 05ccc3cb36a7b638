import json

import numpy as np
import pytest

from zetasplit.geometry import (
    ConfigError,
    build_closed_operator,
    build_half_operators,
    compute_counts,
    config_from_dict,
    junction_jumps,
    load_config,
    save_config,
    validate_config,
)
from zetasplit.verify import CONFIG_NAMES, bundled_config

# (h_Y, h_M, h1, h2, dim L1 cap L2) per bundled config
COUNTS = {
    "invertible": (0, 0, 0, 0, 0),
    "generic": (2, 0, 0, 0, 0),
    "mirror": (2, 1, 0, 0, 1),
    "free_channel": (4, 0, 0, 1, 0),
    "domain_wall": (0, 2, 1, 1, 0),
}


@pytest.mark.parametrize("name", CONFIG_NAMES)
def test_bundled_configs_valid(name):
    cfg = bundled_config(name)
    assert validate_config(cfg) == []
    assert max(junction_jumps(build_closed_operator(cfg, 4.0))) < 1e-12


@pytest.mark.parametrize("name", CONFIG_NAMES)
def test_counts(name):
    cd = compute_counts(bundled_config(name))
    assert (cd.h_Y, cd.h_M, cd.h1, cd.h2, cd.l12) == COUNTS[name]
    assert cd.h == cd.h_M - cd.h1 - cd.h2


def test_round_trip(tmp_path, mirror):
    p = tmp_path / "c.json"
    save_config(mirror, p)
    again = load_config(p)
    assert again.to_json() == mirror.to_json()


def test_missing_field_names_path(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"name": "x", "m": 1}))
    with pytest.raises(ConfigError, match="W0"):
        load_config(p)


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n "m": 1,\n "W0": [\n')
    with pytest.raises(ConfigError, match="line"):
        load_config(p)


def test_bad_arc_field_path():
    d = bundled_config("generic").to_json()
    d["arcs"][1]["profile"] = [{"kind": "wiggle"}]
    with pytest.raises(ConfigError, match=r"arcs\[1\]"):
        config_from_dict(d)


def test_collar_violation_detected():
    d = bundled_config("invertible").to_json()
    d["arcs"][0]["profile"] = [{"kind": "bump", "amplitude": [[[0.5, 0]]], "support": [0.0, 0.6]}]
    with pytest.raises(ConfigError, match=r"arcs\[0\].*collar invariant"):
        config_from_dict(d)


def test_sigma_must_anticommute():
    d = bundled_config("generic").to_json()
    d["sigma1"] = [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]
    with pytest.raises(ConfigError, match="sigma1: .*G sigma = -sigma G"):
        config_from_dict(d)


def test_descriptor_lengths(generic):
    R = 5.0
    closed = build_closed_operator(generic, R)
    sides = build_half_operators(generic, R)
    total = sum(s.length for s in closed.segments)
    assert total == pytest.approx(generic.total_length(R))
    assert sum(sum(s.length for s in d.segments) for d in sides) == pytest.approx(total)
