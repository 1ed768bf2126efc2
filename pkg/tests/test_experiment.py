import numpy as np
import pytest

import threatprop.experiment as experiment
from threatprop.errors import ExperimentError, GraphError
from threatprop.experiment import (
    ExperimentConfig,
    choose_cue,
    hmmb_detection_config,
    run_experiment,
    run_trial,
    sbm_detection_config,
    _cue_rng,
    _trial_seed,
)
from threatprop.generators import generate_sbm


def tiny_sbm_config(**kw):
    cfg = sbm_detection_config(activity=2.0, trials=4, seed=17)
    from dataclasses import replace

    return replace(cfg, **kw) if kw else cfg


class TestCuePolicy:
    def test_cue_is_true_foreground_with_interaction_time(self):
        cfg = tiny_sbm_config()
        for trial in range(3):
            net = generate_sbm(cfg.params, seed=_trial_seed(cfg.seed, trial))
            cue, cue_time = choose_cue(net, _cue_rng(cfg.seed, trial))
            assert net.truth[cue] == 1
            own_times = {
                (e.t_u if e.u == cue else e.t_v)
                for e in net.graph.interactions
                if cue in (e.u, e.v) and e.timestamped
            }
            assert cue_time in own_times

    def test_cue_prefers_foreground_interactions(self):
        cfg = tiny_sbm_config()
        net = generate_sbm(cfg.params, seed=_trial_seed(cfg.seed, 0))
        cue, cue_time = choose_cue(net, _cue_rng(cfg.seed, 0))
        fg_times = {
            (e.t_u if e.u == cue else e.t_v)
            for e in net.graph.interactions
            if cue in (e.u, e.v) and net.truth[e.u] and net.truth[e.v]
        }
        if fg_times:
            assert cue_time in fg_times

    def test_no_foreground_raises(self):
        cfg = tiny_sbm_config()
        net = generate_sbm(cfg.params, seed=1)
        bare = type(net)(graph=net.graph, truth=np.zeros(net.graph.n, np.int8),
                         seed=1, kind="sbm", params=net.params)
        with pytest.raises(ExperimentError, match="foreground"):
            choose_cue(bare, _cue_rng(0, 0))


class TestRunExperiment:
    def test_smoke_and_summary(self):
        res = run_experiment(tiny_sbm_config())
        assert set(res.curves) == {"sttp", "bfs", "spec"}
        assert not res.aborted
        s = res.summary()
        assert s["trials"] == 4
        for det in ("sttp", "bfs", "spec"):
            assert 0.0 <= s["detectors"][det]["auc"] <= 1.0

    def test_deterministic_rerun(self):
        a = run_experiment(tiny_sbm_config())
        b = run_experiment(tiny_sbm_config())
        for det in a.curves:
            assert np.array_equal(a.curves[det].pfa, b.curves[det].pfa)
            assert np.array_equal(a.curves[det].pd, b.curves[det].pd)
            assert a.curves[det].auc == b.curves[det].auc

    def test_thread_count_does_not_change_results(self):
        one = run_experiment(tiny_sbm_config(threads=1))
        four = run_experiment(tiny_sbm_config(threads=4))
        for det in one.curves:
            assert np.array_equal(one.curves[det].pd, four.curves[det].pd)
            assert np.array_equal(one.curves[det].thresholds, four.curves[det].thresholds)

    def test_hmmb_smoke(self):
        cfg = hmmb_detection_config(gamma_fg=1.0, trials=3, seed=23)
        res = run_experiment(cfg)
        assert not res.aborted
        assert res.curves["sttp"].n_fg > 0

    def test_abort_budget_enforced(self, monkeypatch):
        def broken(net, cue, cue_time, cfg):
            raise RuntimeError("synthetic detector failure")

        monkeypatch.setattr(experiment, "sttp_detector_scores", broken)
        with pytest.raises(ExperimentError, match="aborted"):
            run_experiment(tiny_sbm_config())

    def test_aborts_within_budget_are_recorded(self, monkeypatch):
        calls = {"n": 0}
        real = experiment.sttp_detector_scores

        def flaky(net, cue, cue_time, cfg):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("synthetic one-off failure")
            return real(net, cue, cue_time, cfg)

        monkeypatch.setattr(experiment, "sttp_detector_scores", flaky)
        res = run_experiment(tiny_sbm_config(max_abort_fraction=0.5))
        assert len(res.aborted) == 1
        assert "synthetic" in res.aborted[0][1]

    def test_run_trial_reports_abort_reason(self, monkeypatch):
        monkeypatch.setattr(experiment, "bfs_detector_scores",
                            lambda *a, **k: (_ for _ in ()).throw(ValueError("boom")))
        out = run_trial(tiny_sbm_config(), 0)
        assert isinstance(out, str) and "boom" in out

    def test_config_validation(self):
        with pytest.raises(GraphError):
            ExperimentConfig(kind="nonsense", params=None)
        with pytest.raises(GraphError):
            ExperimentConfig(kind="sbm", params=None, detectors=("sttp", "magic"))
        with pytest.raises(GraphError):
            ExperimentConfig(kind="sbm", params=None, trials=0)
        with pytest.raises(GraphError):
            ExperimentConfig(kind="sbm", params=None, aggregate="hexagonal")

    def test_vertical_aggregation_mode(self):
        from dataclasses import replace

        cfg = replace(tiny_sbm_config(), aggregate="vertical", detectors=("bfs",))
        res = run_experiment(cfg)
        curve = res.curves["bfs"]
        assert curve.pfa[0] == 0.0 and curve.pfa[-1] == 1.0
        assert 0.0 <= curve.auc <= 1.0
        assert curve.trials == 4


class TestBenchmarkConfigs:
    def test_blockmodel_shape(self):
        p = sbm_detection_config(activity=2.0).params
        assert p.n == 256
        assert p.sizes == (113, 113, 30)
        assert p.foreground == 2
        s = p.block_probs
        assert s[0, 0] == s[1, 1] == 0.08
        assert s[0, 1] == s[0, 2] == 0.02
        assert s[2, 2] == pytest.approx(0.2)

    def test_hybrid_shape(self):
        import math

        cfg = hmmb_detection_config(gamma_fg=10.0)
        p = cfg.params
        assert p.communities == 10 and p.lifestyles == 11
        assert p.foreground_lifestyles == (9, 10)
        assert p.block_support[9, 9] == pytest.approx(math.log(30) / 30)
        assert p.gamma[9] == 10.0
        assert np.all(p.gamma[:9] == p.gamma[0])
        assert p.phi.sum() == pytest.approx(1.0)
