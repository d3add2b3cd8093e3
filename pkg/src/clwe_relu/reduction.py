"""The label Gaussianization map and the learner-to-CLWE distinguisher."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .core import RandomStream, phi, random_direction
from .distributions import ClweParams, LabeledSample, SampleSet, sample_clwe, sample_null
from .learners import Hypothesis, Learner, mean_squared_loss

# Absolute constant in choose_m2. Calibrated with stats.deviation_check.
BERNSTEIN_C = 200.0
DEFAULT_FAILURE_BUDGET = 0.04

PHI_CLAMP = (-1.0, 1.0)
NN_CLAMP = (-0.25, 0.25)


class ConfigError(ValueError):
    pass


class Verdict(enum.Enum):
    CLWE_PLANTED = "ClwePlanted"
    NULL = "Null"


def f_xi(sample: LabeledSample, xi: float) -> LabeledSample:
    """``(x, y) -> (x, phi(y) + xi)``."""
    return LabeledSample(sample.x, phi(sample.y) + xi)


def f_xi_batch(samples: SampleSet, xi: np.ndarray) -> SampleSet:
    return samples.with_labels(phi(samples.y) + xi)


def choose_beta(sigma: float, m1: int, epsilon: float) -> float:
    """Largest admissible CLWE noise rate, ``min(sigma^2/(1e4 m1^2), eps^2/1e3)``."""
    if not (sigma > 0 and m1 > 0 and epsilon > 0):
        raise ValueError("sigma, m1 and epsilon must be positive")
    return min(sigma**2 / (1e4 * m1**2), epsilon**2 / 1e3)


def choose_m2(epsilon: float, failure_budget: float = DEFAULT_FAILURE_BUDGET) -> int:
    """Held-out sample count ``ceil(C ln(4/budget) / eps^2)``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 < failure_budget < 1:
        raise ValueError("failure budget must lie in (0, 1)")
    return math.ceil(BERNSTEIN_C * math.log(4.0 / failure_budget) / epsilon**2)


def default_gamma(d: int) -> float:
    """``2 sqrt(d ln d)``: above the ``2 sqrt(d)`` hardness threshold."""
    return 2.0 * math.sqrt(d * math.log(d))


def default_nn_radius(gamma: float, d: int, sigma: float) -> int:
    """Integer ``R >= gamma sqrt((ln d)^2 + 2 ln(1/sigma))``; ``(ln d)^2``
    stands in for the ``omega(log d)`` term."""
    return math.ceil(gamma * math.sqrt(math.log(d) ** 2 + 2.0 * math.log(1.0 / sigma)))


@dataclass(frozen=True)
class ReductionConfig:
    d: int
    gamma: float
    sigma: float
    epsilon: float
    m1: int
    m2: int
    beta: float
    clamp: tuple[float, float] = PHI_CLAMP
    delta: float = 1.0 / 3.0

    @classmethod
    def with_defaults(cls, d, gamma, sigma, epsilon, m1, *, m2=None, beta=None,
                      failure_budget=DEFAULT_FAILURE_BUDGET, clamp=PHI_CLAMP) -> "ReductionConfig":
        cfg = cls(
            d=d, gamma=gamma, sigma=sigma, epsilon=epsilon, m1=m1,
            m2=choose_m2(epsilon, failure_budget) if m2 is None else m2,
            beta=choose_beta(sigma, m1, epsilon) if beta is None else beta,
            clamp=tuple(clamp),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.d < 1 or self.m1 < 1 or self.m2 < 1:
            raise ConfigError("d, m1 and m2 must be >= 1")
        if not 0 < self.sigma < 1:
            raise ConfigError("sigma must lie in (0, 1)")
        if not self.gamma > 0:
            raise ConfigError("gamma must be > 0")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not self.beta >= 0:
            raise ConfigError("beta must be >= 0")
        limit = choose_beta(self.sigma, self.m1, self.epsilon)
        if self.beta > limit:
            raise ConfigError(f"beta={self.beta!r} exceeds the admissible limit {limit!r}")
        need = math.ceil(BERNSTEIN_C / self.epsilon**2)
        if self.m2 < need:
            raise ConfigError(f"m2={self.m2} below the concentration floor {need}")
        lo, hi = self.clamp
        if not lo <= hi:
            raise ConfigError("empty clamp interval")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["clamp"] = list(self.clamp)
        return out


@dataclass(frozen=True)
class Diagnostics:
    verdict: Verdict
    loss_d1: float
    loss_q1: float
    margin: float
    epsilon: float
    m1: int
    m2: int
    beta: float
    seed: int
    stream_id: int

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict.value
        return out


def distinguish(data: SampleSet, learner: Learner, cfg: ReductionConfig,
                stream: RandomStream) -> Diagnostics:
    """Decide CLWE vs null from ``m1 + m2`` samples with a weak learner.

    1. draw ``xi_i ~ N(0, sigma^2)``; 2. map each sample through ``f_xi``;
    3. fit ``learner`` on the first ``m1`` mapped samples and clamp its
    hypothesis; 4. generate ``m2`` fresh null samples and map them with
    fresh noise; 5. compute the empirical losses on the held-out mapped
    inputs and on the generated ones; 6-7. declare ``ClwePlanted`` iff
    ``loss_d1 <= loss_q1 - eps/5``.

    Child streams 0-1 feed steps 1-3, children 2-3 feed step 4, so the
    generated null data never shares draws with the input noise.
    """
    cfg.validate()
    m = cfg.m1 + cfg.m2
    if data.m != m:
        raise ConfigError(f"expected {m} samples, got {data.m}")
    if data.d != cfg.d:
        raise ConfigError(f"expected dimension {cfg.d}, got {data.d}")
    if np.any(data.y < -0.5) or np.any(data.y >= 0.5):
        raise ValueError("labels must lie in [-1/2, 1/2)")

    xi = cfg.sigma * stream.spawn(0).generator().standard_normal(m)
    mapped = f_xi_batch(data, xi)
    h = learner.fit(mapped.subset(slice(0, cfg.m1)), stream.spawn(1)).clamped(*cfg.clamp)
    held_out = mapped.subset(slice(cfg.m1, m))

    null = sample_null(cfg.d, cfg.m2, stream.spawn(2))
    xi_null = cfg.sigma * stream.spawn(3).generator().standard_normal(cfg.m2)
    null = f_xi_batch(null, xi_null)

    loss_d1 = mean_squared_loss(h, held_out)
    loss_q1 = mean_squared_loss(h, null)
    threshold = loss_q1 - cfg.epsilon / 5.0
    verdict = Verdict.CLWE_PLANTED if loss_d1 <= threshold else Verdict.NULL
    return Diagnostics(
        verdict=verdict, loss_d1=loss_d1, loss_q1=loss_q1, margin=threshold - loss_d1,
        epsilon=cfg.epsilon, m1=cfg.m1, m2=cfg.m2, beta=cfg.beta,
        seed=stream.seed, stream_id=stream.stream_id,
    )


LearnerFactory = Callable[[np.ndarray, float], Learner]


@dataclass(frozen=True)
class TrialResult:
    trial: int
    planted: bool
    diagnostics: Diagnostics

    @property
    def correct(self) -> bool:
        expected = Verdict.CLWE_PLANTED if self.planted else Verdict.NULL
        return self.diagnostics.verdict is expected

    def to_dict(self) -> dict:
        return {"trial": self.trial, "planted": self.planted, **self.diagnostics.to_dict()}


def run_trial(cfg: ReductionConfig, make_learner: LearnerFactory, planted: bool,
              seed: int, trial: int) -> TrialResult:
    """One seeded trial: plant a direction, draw CLWE (or null) data, run the test.

    The learner factory receives the planted direction; only oracle
    learners use it. Trial ``t`` uses stream id ``t``; planted and null
    runs draw from different child branches.
    """
    base = RandomStream(seed, trial, (1 if planted else 2,))
    w = random_direction(cfg.d, base.spawn(0))
    m = cfg.m1 + cfg.m2
    if planted:
        data = sample_clwe(ClweParams(cfg.d, cfg.gamma, cfg.beta), w, m, base.spawn(1))
    else:
        data = sample_null(cfg.d, m, base.spawn(1))
    diag = distinguish(data, make_learner(w, cfg.gamma), cfg, base.spawn(2))
    return TrialResult(trial, planted, diag)


def run_trials(cfg: ReductionConfig, make_learner: LearnerFactory, planted: bool,
               trials: int, seed: int, threads: int = 1) -> list[TrialResult]:
    """Independent trials ``0..trials-1``; results do not depend on ``threads``."""
    cfg.validate()
    job = lambda t: run_trial(cfg, make_learner, planted, seed, t)  # noqa: E731
    if threads <= 1:
        return [job(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(trials)))
