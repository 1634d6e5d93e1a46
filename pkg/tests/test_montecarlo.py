import json
import math

import numpy as np
import pytest

from relu1d.errors import (
    ConfigMismatch,
    FirstLayerAffine,
    InvalidConfig,
    InvalidInterval,
    NothingToPropagate,
)
from relu1d.gp_theory import expected_crossings
from relu1d.montecarlo import (
    ACCEPTANCE_BANDS,
    ExperimentConfig,
    ExperimentResult,
    merge,
    run,
    run_crossings,
    run_regions,
    run_survival,
    trial_seed,
    write_result,
)
from relu1d.network import Topology


def regions_cfg(trials=20, first=0, seed=1, widths=(6, 6)):
    return ExperimentConfig(Topology(widths), 1.0, trials, seed, "regions", first_trial=first)


def test_trial_seed_is_stable_and_distinct():
    seeds = {trial_seed(0, t) for t in range(1000)}
    assert len(seeds) == 1000
    assert trial_seed(5, 17) == trial_seed(5, 17)
    assert trial_seed(5, 17) != trial_seed(6, 17)


def test_one_hidden_layer_has_zero_variance():
    r = run_regions(ExperimentConfig(Topology.of(5), 1.0, 10, 0, "regions"))
    assert r.estimate_mean == 5.0 and r.estimate_stderr == 0.0
    assert r.z_score == 0.0 and r.trials_completed == 10


def test_per_trial_values_depend_only_on_trial_index():
    a = run_regions(regions_cfg(10))
    b = run_regions(regions_cfg(5, first=5))
    assert np.array_equal(a.per_trial_values[5:], b.per_trial_values)


def test_merge_split_equals_sequential():
    full = run_regions(regions_cfg(40))
    parts = [run_regions(regions_cfg(10, first=k * 10)) for k in range(4)]
    m = merge(parts[::-1])
    assert np.array_equal(m.per_trial_values, full.per_trial_values)
    assert m.estimate_mean == full.estimate_mean
    assert m.estimate_stderr == full.estimate_stderr
    assert m.config == full.config


def test_merge_commutative_and_identity():
    a = run_regions(regions_cfg(6))
    b = run_regions(regions_cfg(6, first=6))
    ab, ba = merge([a, b]), merge([b, a])
    assert np.array_equal(ab.per_trial_values, ba.per_trial_values)
    assert ab.estimate_mean == ba.estimate_mean and ab.estimate_stderr == ba.estimate_stderr
    one = merge([a])
    assert one.to_dict() == a.to_dict()


def test_merge_rejects_mismatch_and_overlap():
    a = run_regions(regions_cfg(4))
    with pytest.raises(ConfigMismatch):
        merge([a, run_regions(regions_cfg(4, first=4, seed=2))])
    with pytest.raises(ConfigMismatch):
        merge([a, run_regions(regions_cfg(4, first=2))])
    with pytest.raises(ConfigMismatch):
        merge([])


def test_thread_count_does_not_change_results():
    cfg = regions_cfg(8)
    assert np.array_equal(run_regions(cfg).per_trial_values, run_regions(cfg, workers=2).per_trial_values)


def test_crossings_small():
    cfg = ExperimentConfig(
        Topology.of(64), 1.0, 8, 3, "crossings", interval=(-3, 3), target_layer=2, neurons_per_network=5
    )
    r = run_crossings(cfg)
    assert r.theory_value == expected_crossings(2, -3, 3, 1)
    assert r.units == 40
    assert 0 <= r.estimate_mean <= 5


def test_survival_wide_downstream_is_lossless():
    cfg = ExperimentConfig(Topology.of(20, 64), 1.0, 10, 0, "survival", target_layer=1)
    r = run_survival(cfg)
    assert np.all(r.per_trial_values == 1.0)
    assert r.theory_value == pytest.approx(1.0)


def test_validation_errors():
    t = Topology.of(8, 8)
    with pytest.raises(FirstLayerAffine):
        run_crossings(ExperimentConfig(t, 1.0, 2, 0, "crossings", interval=(-1, 1), target_layer=1))
    with pytest.raises(InvalidInterval):
        run_crossings(ExperimentConfig(t, 1.0, 2, 0, "crossings", interval=(1, -1), target_layer=2))
    with pytest.raises(InvalidInterval):
        run_crossings(
            ExperimentConfig(t, 1.0, 2, 0, "crossings", interval=(-math.inf, 1), target_layer=2)
        )
    with pytest.raises(NothingToPropagate):
        run_survival(ExperimentConfig(Topology.of(8), 1.0, 2, 0, "survival"))
    with pytest.raises(InvalidConfig):
        run_survival(ExperimentConfig(t, 1.0, 2, 0, "survival", target_layer=2))
    with pytest.raises(InvalidConfig):
        run_regions(ExperimentConfig(t, 1.0, 2, 0, "survival"))
    with pytest.raises(InvalidConfig):
        ExperimentConfig(t, 1.0, 0, 0, "regions")
    with pytest.raises(InvalidConfig):
        ExperimentConfig(t, -1.0, 3, 0, "regions")
    with pytest.raises(InvalidConfig):
        ExperimentConfig(t, 1.0, 3, 0, "bogus")


def test_config_round_trip_and_schema(tmp_path):
    cfg = ExperimentConfig(
        Topology.of(4, 4), 0.5, 3, 99, "crossings", interval=(-2, 2), target_layer=3
    )
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(p) == cfg
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict({**cfg.to_dict(), "extra": 1})
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict({"topology": [3], "mode": "regions"})
    p.write_text("{not json")
    with pytest.raises(InvalidConfig):
        ExperimentConfig.load(p)


def test_result_statistics_and_nan_trials():
    cfg = regions_cfg(4)
    r = ExperimentResult(cfg, 2.0, np.array([3, 1, 2, 0]), np.array([4.0, 2.0, math.nan, 0.0]), np.ones(4))
    assert r.trial_ids.tolist() == [0, 1, 2, 3]
    assert r.per_trial_values.tolist()[:2] == [0.0, 2.0]
    assert r.estimate_mean == 2.0
    assert r.estimate_stderr == pytest.approx(2.0 / math.sqrt(3))
    assert r.within(0.0)
    assert r.to_dict()["per_trial_values"][2] is None


def test_write_result(tmp_path):
    r = run(regions_cfg(5))
    paths = write_result(r, tmp_path / "o")
    data = json.loads(paths[0].read_text())
    assert data["estimate_mean"] == r.estimate_mean
    lines = paths[1].read_text().splitlines()
    assert lines[0] == "trial,value" and len(lines) == 6
    assert float(lines[1].split(",")[1]) == r.per_trial_values[0]


def test_band_is_recorded():
    lo, hi = ACCEPTANCE_BANDS["regions_128x128"]
    assert lo < 1.0 < hi
