"""Config round-trips, run artifacts, determinism, replay, CLI."""

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from ergomax.errors import ConfigInvalid, ParameterError, ReplayMismatch
from ergomax.harness.cli import default_config, main
from ergomax.harness.config import (AnalysisConfig, CheckpointConfig,
                                    ExperimentConfig, MapConfig, ModelConfig,
                                    ObservableConfig, RUN_KINDS,
                                    ScheduleConfig, SequenceSpecConfig,
                                    TargetConfig, config_hash, from_toml,
                                    to_toml, validate)
from ergomax.harness.runner import (CLASSIFY_FILE, DECAY_FILE, DIMENSION_FILE,
                                    HIT_STATS_FILE, MAX_SERIES_FILE, replay,
                                    resolve_workers, run)

from conftest import philox


# --- TOML round trip ------------------------------------------------------------

_FLOATS = [0.1, 0.30000000000000004, 2.0, -1.5, 1e-300, 1e300, 3.141592653589793]
_STRINGS = ["run", "a b/c", 'quo"te', "back\\slash", "line\nbreak", "日本語"]


def _random_config(rng):
    def f():
        return float(rng.choice(_FLOATS) * (1 + int(rng.integers(0, 3))))

    def maybe(value):
        return value if rng.random() < 0.5 else None

    kind = str(rng.choice(RUN_KINDS))
    seq = SequenceSpecConfig(kind="log_plus_loglog", eta=abs(f()) + 0.1,
                             polylog=f())
    analysis = AnalysisConfig(
        tail_fraction=0.25, ratio_u=maybe(seq), band_lower=maybe(seq),
        band_upper=maybe(seq), band_n_min=int(rng.integers(1, 10 ** 6)),
        dichotomy=bool(rng.integers(0, 2)), fit_e_min=maybe(abs(f())),
        fit_e_max=maybe(abs(f()) * 10.0),
        short_return=bool(rng.integers(0, 2)),
        lags=maybe(tuple(int(v) for v in np.sort(rng.integers(1, 999, 4)))),
        decay_pair=str(rng.choice(["dist_half", "identity", "laminar"])),
        r_max=abs(f()), annulus_r=abs(f()))
    dim2 = bool(rng.integers(0, 2))
    return ExperimentConfig(
        kind=kind,
        seed=int(rng.integers(0, 2 ** 31)),
        n_orbits=int(rng.integers(1, 200)),
        n_max=int(rng.integers(1, 10 ** 7)),
        burn_in=int(rng.integers(0, 5000)),
        out_dir=str(rng.choice(_STRINGS)),
        map=MapConfig(id="henon" if dim2 else "tent",
                      params={"a": f(), "b": f()} if dim2 else {},
                      jitter=0.0 if dim2 else 2.0 ** -45),
        observable=ObservableConfig(kind="power_dist", alpha=abs(f()) + 0.1,
                                    cap=maybe(abs(f())), eps_floor=1e-300),
        target=TargetConfig(mode="explicit",
                            point=maybe((f(), f()) if dim2 else (0.3,)),
                            period=maybe(int(rng.integers(1, 4))),
                            exclusion_radius=abs(f())),
        checkpoints=CheckpointConfig(
            kind="geometric", ratio=1.0 + abs(f()),
            explicit=maybe(tuple(int(v) for v in
                                 np.cumsum(rng.integers(1, 100, 5))))),
        schedule=maybe(ScheduleConfig(rule="log_power", beta=abs(f()) + 0.1,
                                      measure="analytic",
                                      calibration_n=int(rng.integers(10 ** 5, 10 ** 6)))),
        model=maybe(ModelConfig(kind="pareto", gamma=abs(f()) + 0.1)),
        analysis=analysis)


def test_config_round_trip_thousand_random_configs():
    rng = philox(4242)
    for _ in range(1000):
        c = _random_config(rng)
        back = from_toml(to_toml(c))
        assert back == c
        assert config_hash(back) == config_hash(c)


def test_config_hash_shape_and_sensitivity():
    c = default_config("simulate")
    h = config_hash(c)
    assert len(h) == 16 and int(h, 16) >= 0
    assert config_hash(replace(c, seed=c.seed + 1)) != h
    assert config_hash(from_toml(to_toml(c))) == h


def test_from_toml_rejects_unknown_fields():
    with pytest.raises(ConfigInvalid):
        from_toml('kind = "simulate"\nbogus_field = 3\n')
    with pytest.raises(ConfigInvalid):
        from_toml('kind = "simulate"\n[map]\nwheel = 4\n')
    with pytest.raises(ConfigInvalid):
        from_toml("kind = [not toml")


def test_default_configs_validate():
    for kind in RUN_KINDS:
        validate(default_config(kind))


@pytest.mark.parametrize("mutate,field", [
    (lambda c: replace(c, kind="nope"), "kind"),
    (lambda c: replace(c, seed=-1), "seed"),
    (lambda c: replace(c, n_orbits=0), "n_orbits"),
    (lambda c: replace(c, n_max=0), "n_max"),
    (lambda c: replace(c, out_dir=""), "out_dir"),
    (lambda c: replace(c, map=MapConfig(id="volcano")), "map.id"),
    (lambda c: replace(c, map=MapConfig(id="henon", jitter=1e-9)), "map"),
    (lambda c: replace(c, target=TargetConfig(mode="explicit")), "target.point"),
    (lambda c: replace(c, target=TargetConfig(mode="explicit", point=(1.5,))),
     "target.point"),
    (lambda c: replace(c, map=MapConfig(id="henon"),
                       target=TargetConfig(mode="explicit", point=(0.3,))),
     "target.point"),
    (lambda c: replace(c, map=MapConfig(id="henon"),
                       target=TargetConfig(mode="periodic", period=2)),
     "target.mode"),
    (lambda c: replace(c, observable=ObservableConfig(kind="power_dist")),
     "observable.alpha"),
    (lambda c: replace(c, checkpoints=CheckpointConfig(kind="geometric", ratio=1.0)),
     "checkpoints.ratio"),
    (lambda c: replace(c, checkpoints=CheckpointConfig(kind="explicit",
                                                       explicit=(5, 5))),
     "checkpoints.explicit"),
    (lambda c: replace(c, checkpoints=CheckpointConfig(kind="explicit",
                                                       explicit=(5, 10 ** 9))),
     "checkpoints.explicit"),
    (lambda c: replace(c, analysis=AnalysisConfig(tail_fraction=0.0)),
     "analysis.tail_fraction"),
])
def test_validation_names_the_field(mutate, field):
    base = default_config("simulate")
    with pytest.raises(ConfigInvalid) as exc:
        validate(mutate(base))
    assert exc.value.field == field


def test_validation_bc_and_model_fields():
    bc = default_config("bc")
    with pytest.raises(ConfigInvalid) as e1:
        validate(replace(bc, schedule=None))
    assert e1.value.field == "schedule"
    with pytest.raises(ConfigInvalid) as e2:
        validate(replace(bc, schedule=ScheduleConfig(rule="explicit")))
    assert e2.value.field == "schedule.rule"
    with pytest.raises(ConfigInvalid) as e3:
        validate(replace(bc, schedule=ScheduleConfig(rule="power_law", beta=1.5)))
    assert e3.value.field == "schedule.beta"
    with pytest.raises(ConfigInvalid) as e4:
        validate(replace(bc, map=MapConfig(id="henon"),
                         target=TargetConfig(mode="auto")))
    assert e4.value.field == "schedule.measure"
    iid = default_config("iid")
    with pytest.raises(ConfigInvalid) as e5:
        validate(replace(iid, model=ModelConfig(kind="pareto")))
    assert e5.value.field == "model.gamma"
    cls = default_config("classify")
    with pytest.raises(ConfigInvalid) as e6:
        validate(replace(cls, n_max=10 ** 5))
    assert e6.value.field == "n_max"
    with pytest.raises(ConfigInvalid) as e7:
        validate(replace(cls, analysis=AnalysisConfig()))
    assert e7.value.field == "analysis.ratio_u"


# --- run artifacts ----------------------------------------------------------------

def _header(path: Path) -> str:
    return path.read_text().splitlines()[0]


def test_run_artifacts_and_headers(tmp_path):
    small = {
        "simulate": (replace(default_config("simulate"), n_orbits=3, n_max=20000),
                     MAX_SERIES_FILE,
                     "orbit_id,checkpoint_n,M_n,ratio_u_n,in_band"),
        "bc": (replace(default_config("bc"), n_orbits=24, n_max=20000),
               HIT_STATS_FILE, "orbit_id,checkpoint_n,S_n,E_n,deviation"),
        "dim": (replace(default_config("dim"), n_max=30000),
                DIMENSION_FILE, "r,ball_mass,log_r,log_mass"),
        "decay": (replace(default_config("decay"), n_max=150000),
                  DECAY_FILE, "lag,c_hat"),
        "iid": (replace(default_config("iid"), n_orbits=3, n_max=10000),
                MAX_SERIES_FILE, "orbit_id,checkpoint_n,M_n,ratio_u_n,in_band"),
        "classify": (default_config("classify"), CLASSIFY_FILE,
                     "horizon,a_partial,b_partial"),
    }
    for kind, (config, data_file, header) in small.items():
        out = tmp_path / kind
        summary = run(replace(config, out_dir=str(out)), workers=2)
        assert (out / "config.toml").exists()
        assert (out / "summary.json").exists()
        assert _header(out / data_file) == header, kind
        payload = json.loads((out / "summary.json").read_text())
        assert payload["kind"] == kind
        assert payload["config_hash"] == config_hash(
            from_toml((out / "config.toml").read_text()))
        assert data_file in payload["files"]
        assert summary.wall_time_s > 0


def test_workers_do_not_change_bytes(tmp_path):
    config = replace(default_config("simulate"), n_orbits=8, n_max=50000)
    a = run(replace(config, out_dir=str(tmp_path / "w1")), workers=1)
    b = run(replace(config, out_dir=str(tmp_path / "w8")), workers=8)
    left = (tmp_path / "w1" / MAX_SERIES_FILE).read_bytes()
    right = (tmp_path / "w8" / MAX_SERIES_FILE).read_bytes()
    assert left == right
    assert a.verdicts == b.verdicts


def test_replay_round_trip_and_tamper(tmp_path):
    config = replace(default_config("simulate"), n_orbits=2, n_max=10000,
                     out_dir=str(tmp_path / "orig"))
    summary = run(config, workers=2)
    fresh = replay(summary.summary_path, workers=1)   # hash covers out_dir,
    assert fresh.kind == summary.kind                 # so compare kind only

    csv_path = tmp_path / "orig" / MAX_SERIES_FILE
    rows = csv_path.read_text().splitlines()
    rows[5] = rows[5].replace(rows[5].split(",")[2], "9999.0", 1)
    csv_path.write_text("\n".join(rows) + "\n")
    with pytest.raises(ReplayMismatch) as exc:
        replay(summary.summary_path)
    assert exc.value.filename == MAX_SERIES_FILE
    assert exc.value.row == 6


def test_replay_detects_tampered_config(tmp_path):
    config = replace(default_config("classify"), out_dir=str(tmp_path / "c"))
    summary = run(config, workers=1)
    spath = Path(summary.summary_path)
    payload = json.loads(spath.read_text())
    payload["config"]["seed"] = 777
    spath.write_text(json.dumps(payload))
    with pytest.raises(ReplayMismatch) as exc:
        replay(spath)
    assert exc.value.row is None


# --- workers and CLI -----------------------------------------------------------------

def test_resolve_workers(monkeypatch):
    assert resolve_workers(3) == 3
    with pytest.raises(ParameterError):
        resolve_workers(0)
    monkeypatch.setenv("ERGOMAX_WORKERS", "5")
    assert resolve_workers() == 5
    monkeypatch.setenv("ERGOMAX_WORKERS", "zero")
    with pytest.raises(ConfigInvalid):
        resolve_workers()
    monkeypatch.setenv("ERGOMAX_WORKERS", "-2")
    with pytest.raises(ConfigInvalid):
        resolve_workers()
    monkeypatch.delenv("ERGOMAX_WORKERS")
    assert resolve_workers() >= 1


def test_cli_run_and_flags(tmp_path, capsys):
    out = tmp_path / "cli-run"
    code = main(["simulate", "--out", str(out), "--orbits", "2",
                 "--n-max", "5000", "--seed", "3", "--workers", "2"])
    assert code == 0
    assert (out / MAX_SERIES_FILE).exists()
    config = from_toml((out / "config.toml").read_text())
    assert (config.seed, config.n_orbits, config.n_max) == (3, 2, 5000)
    assert "summary.json" in capsys.readouterr().out


def test_cli_config_file_with_overrides(tmp_path):
    base = replace(default_config("iid"), n_orbits=2, n_max=4000)
    cfg = tmp_path / "run.toml"
    cfg.write_text(to_toml(base))
    out = tmp_path / "from-file"
    assert main(["iid", "--config", str(cfg), "--out", str(out)]) == 0
    got = from_toml((out / "config.toml").read_text())
    assert got == replace(base, out_dir=str(out))


def test_cli_error_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path / "x"), "--n-max", "0"]) == 2
    assert "n_max" in capsys.readouterr().err

    out = tmp_path / "for-replay"
    assert main(["classify", "--out", str(out)]) == 0
    spath = out / "summary.json"
    payload = json.loads(spath.read_text())
    payload["config"]["seed"] = 99
    spath.write_text(json.dumps(payload))
    assert main(["replay", str(spath)]) == 3
