import json

import pytest
import yaml

from monodomain.config import (ConfigError, available_recipes, build_mesh, build_models, build_protocol,
                               load_config, parse_config, resolve_config_path, schema, scheme_config)

BASE = {
    "name": "tiny",
    "mesh": {"Lx": 0.3, "Ly": 0.1, "h": 0.05},
    "diffusion": {"d0_myocyte": 0.0017},
    "models": {"myocyte-epi": "aliev_panfilov"},
    "scheme": {"scheme": "DAETI", "dt": 0.1, "T": 20.0},
    "stimuli": [{"region": {"kind": "half_plane_x", "value": 0.0}, "t_start": 1.0, "amplitude": 300.0}],
    "probes": [{"name": "a", "point": [0.1, 0.05]}, {"name": "b", "point": [0.2, 0.05]}],
    "cv_probes": ["a", "b"],
}


def with_(**changes):
    data = json.loads(json.dumps(BASE))
    data.update(changes)
    return data


def test_recipes_all_load():
    names = available_recipes()
    for required in ("sec3_1_planar", "sec3_1_reduced", "threshold_search", "sec3_2_fibrotic_h200",
                     "sec3_2_fibrotic_h100"):
        assert required in names
    for name in names:
        assert load_config(name).name == name


def test_resolve_path(tmp_path):
    assert resolve_config_path("sec3_1_planar").name == "sec3_1_planar.yaml"
    p = tmp_path / "c.yaml"
    assert resolve_config_path(p) == p


def test_unknown_model_names_field():
    with pytest.raises(ConfigError) as err:
        parse_config(with_(models={"myocyte-epi": "hodgkin_huxley"}))
    assert any(p.startswith("models:") and "hodgkin_huxley" in p for p in err.value.problems)


def test_all_errors_reported_together():
    bad = with_(mesh={"Lx": -1, "Ly": 0.1, "h": 0.05, "colour": "red"},
                scheme={"scheme": "RK4", "dt": -0.1},
                diffusion={"d0_myocyte": 0.0017, "rho": 2.0})
    with pytest.raises(ConfigError) as err:
        parse_config(bad, "bad.yaml")
    text = str(err.value)
    assert len(err.value.problems) >= 5
    for fragment in ("mesh.Lx", "mesh.colour", "scheme.scheme", "scheme.dt", "diffusion.rho"):
        assert fragment in text
    assert text.startswith("bad.yaml")


def test_cross_references():
    with pytest.raises(ConfigError) as err:
        parse_config(with_(cv_probes=["a", "zz"], apd_probe="nope",
                           fibrosis={"fraction": 0.1, "seed": 1}))
    text = str(err.value)
    assert "'zz'" in text and "'nope'" in text and "'fibroblast' has no model" in text


def test_stimulus_amplitude_xor_factor():
    stim = {"region": {"kind": "half_plane_x", "value": 0.0}, "t_start": 0.0}
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(with_(stimuli=[stim]))
    with pytest.raises(ConfigError, match="needs a 'threshold'"):
        parse_config(with_(stimuli=[{**stim, "threshold_factor": 2.0}]))


def test_region_requirements():
    with pytest.raises(ConfigError, match="needs xmin"):
        parse_config(with_(stimuli=[{"region": {"kind": "rectangle"}, "t_start": 0, "amplitude": 1}]))


def test_yaml_syntax_error(tmp_path):
    p = tmp_path / "broken.yaml"
    p.write_text("name: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML syntax"):
        load_config(p)
    p.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(p)


def test_schema_versioned():
    s = schema()
    assert "schema_version" in s["properties"]
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(with_(schema_version=99))


def test_builders():
    cfg = parse_config(with_(fibrosis={"fraction": 0.2, "seed": 4},
                             models={"myocyte-epi": "aliev_panfilov", "fibroblast": "maccannell_fibroblast"}))
    mesh = build_mesh(cfg)
    assert mesh.metadata["fibrosis"]["seed"] == 4
    assert build_mesh(cfg, seed_override=5).metadata["fibrosis"]["seed"] == 5
    models = build_models(cfg, mesh)
    assert models["fibroblast"].name == "maccannell_fibroblast"
    prot = build_protocol(cfg, mesh)
    assert len(prot) == 1 and prot.stimuli[0].nodes.size == 3
    sc = scheme_config(cfg, "OST")
    assert sc.scheme == "OST" and sc.dt == 0.01
    assert scheme_config(cfg).dt == 0.1


def test_dump_round_trip():
    from monodomain.config import dump
    cfg = load_config("sec3_2_fibrotic_h200")
    again = parse_config(yaml.safe_load(dump(cfg)))
    assert again == cfg


def test_table_recipes_use_truncated_meshes():
    cfg = load_config("sec3_2_fibrotic_h180")
    assert cfg.mesh.truncate and cfg.fibrosis.fraction == 0.1
    assert cfg.diffusion.d0_myocyte == 0.002 and cfg.diffusion.d0_fibrotic == 0.00066
