import math

import numpy as np
import pytest

from clwe_relu.core import RandomStream, phi, random_direction
from clwe_relu.distributions import ClweParams, LabeledSample, SampleSet, sample_clwe, sample_null
from clwe_relu.learners import ConstantLearner, OracleLearner
from clwe_relu.reduction import (NN_CLAMP, ConfigError, ReductionConfig, Verdict, choose_beta,
                                 choose_m2, default_gamma, default_nn_radius, distinguish, f_xi,
                                 f_xi_batch, run_trial, run_trials)


def test_choose_m2():
    assert choose_m2(0.05, 0.04) == 368414
    assert choose_m2(0.05, 0.04) >= math.ceil(200 / 0.05**2)
    assert choose_m2(0.1) < choose_m2(0.05)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            choose_m2(bad)
    with pytest.raises(ValueError):
        choose_m2(0.1, 0.0)


def test_choose_beta():
    assert choose_beta(0.01, 1000, 0.05) == pytest.approx(1e-14)
    assert choose_beta(0.5, 1, 0.05) == pytest.approx(0.05**2 / 1e3)
    with pytest.raises(ValueError):
        choose_beta(0.0, 1, 0.1)


def test_defaults():
    assert default_gamma(32) == pytest.approx(2 * math.sqrt(32 * math.log(32)))
    assert default_nn_radius(default_gamma(32), 32, 0.01) == 98


def test_f_xi():
    s = LabeledSample(np.zeros(2), 0.4)
    assert f_xi(s, 0.01).y == pytest.approx(phi(0.4) + 0.01)
    batch = SampleSet(np.zeros((3, 1)), np.array([0.1, 0.3, -0.45]))
    np.testing.assert_allclose(f_xi_batch(batch, np.zeros(3)).y, [0.1, 0.2, -0.05])


def _cfg(**kw):
    return ReductionConfig.with_defaults(8, 6.0, 0.01, 0.2, 200, **kw)


def test_config_validation():
    cfg = _cfg()
    assert cfg.m2 == choose_m2(0.2) and cfg.beta == choose_beta(0.01, 200, 0.2)
    with pytest.raises(ConfigError):
        _cfg(beta=1e-3)
    with pytest.raises(ConfigError):
        _cfg(m2=10)
    with pytest.raises(ConfigError):
        ReductionConfig.with_defaults(8, 6.0, 1.5, 0.2, 200)
    with pytest.raises(ConfigError):
        _cfg(clamp=(1.0, -1.0))
    assert _cfg(clamp=NN_CLAMP).to_dict()["clamp"] == [-0.25, 0.25]


def test_distinguish_oracle_and_constant():
    cfg = _cfg()
    w = random_direction(8, RandomStream(0))
    m = cfg.m1 + cfg.m2
    planted = sample_clwe(ClweParams(8, 6.0, cfg.beta), w, m, RandomStream(1))
    null = sample_null(8, m, RandomStream(1))
    d1 = distinguish(planted, OracleLearner(w, 6.0), cfg, RandomStream(2))
    assert d1.verdict is Verdict.CLWE_PLANTED
    assert d1.loss_d1 == pytest.approx(1e-4, rel=0.1)
    assert d1.margin == pytest.approx(d1.loss_q1 - 0.2 / 5 - d1.loss_d1)
    assert distinguish(null, OracleLearner(w, 6.0), cfg, RandomStream(2)).verdict is Verdict.NULL
    assert distinguish(planted, ConstantLearner(), cfg, RandomStream(2)).verdict is Verdict.NULL
    assert d1.to_dict()["verdict"] == "ClwePlanted"


def test_distinguish_rejects_bad_data():
    cfg = _cfg()
    with pytest.raises(ConfigError):
        distinguish(sample_null(8, 10, RandomStream(0)), ConstantLearner(), cfg, RandomStream(0))
    bad = sample_null(8, cfg.m1 + cfg.m2, RandomStream(0))
    bad = bad.with_labels(bad.y + 1.0)
    with pytest.raises(ValueError):
        distinguish(bad, ConstantLearner(), cfg, RandomStream(0))


def test_trials_independent_of_threads():
    cfg = _cfg()
    make = lambda w, g: OracleLearner(w, g)  # noqa: E731
    one = run_trials(cfg, make, True, 4, seed=3, threads=1)
    many = run_trials(cfg, make, True, 4, seed=3, threads=3)
    assert [t.to_dict() for t in one] == [t.to_dict() for t in many]
    assert all(t.correct for t in one)
    assert run_trial(cfg, make, False, 3, 0).to_dict() != run_trial(cfg, make, True, 3, 0).to_dict()
