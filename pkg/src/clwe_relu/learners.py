"""Hypotheses, the learners used as test subjects, and the weak-learning edge."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from .core import RandomStream, phi
from .distributions import SampleSet, projection
from .relu import OneHiddenLayerNet, build_nn_1d, evaluate, lift


@dataclass(frozen=True)
class Hypothesis:
    """A batch predictor ``(m, d) -> (m,)`` whose outputs are clipped to ``[lo, hi]``."""

    predictor: Callable[[np.ndarray], np.ndarray]
    lo: float = -math.inf
    hi: float = math.inf
    name: str = "hypothesis"

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError("empty clamp interval")

    def raw(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.asarray(self.predictor(x), dtype=np.float64).reshape(-1)

    def __call__(self, x) -> np.ndarray:
        return np.clip(self.raw(x), self.lo, self.hi)

    def clamped(self, lo: float, hi: float) -> "Hypothesis":
        """Intersect the clamp with ``[lo, hi]``."""
        return replace(self, lo=max(self.lo, lo), hi=min(self.hi, hi))


class Learner(Protocol):
    def fit(self, samples: SampleSet, stream: RandomStream) -> Hypothesis: ...


def mean_squared_loss(h: Hypothesis, samples: SampleSet) -> float:
    r = h(samples.x) - samples.y
    return float(np.mean(r * r))


def constant_hypothesis(c: float) -> Hypothesis:
    c = float(c)
    return Hypothesis(lambda x: np.full(x.shape[0], c), name=f"constant({c!r})")


def fit_constant(samples: SampleSet) -> Hypothesis:
    """The best data-agnostic predictor: the empirical label mean."""
    if samples.m < 1:
        raise ValueError("need at least one sample")
    return constant_hypothesis(float(np.mean(samples.y)))


def fit_oracle(w, gamma: float, target: str = "phi", R: int | None = None) -> Hypothesis:
    """The planted function itself; ignores data. Only for harness tests.

    ``target="phi"`` gives ``phi(gamma <w, x>)`` clamped to ``[-1, 1]``;
    ``target="nn"`` gives the width-``4R+2`` network ``nn_R(gamma <w, x>)``
    clamped to ``[-1/4, 1/4]``.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    if target == "phi":
        return Hypothesis(lambda x: phi(projection(x, w, gamma)), -1.0, 1.0, name="oracle-phi")
    if target == "nn":
        if R is None:
            raise ValueError("target 'nn' needs R")
        net = lift(build_nn_1d(R), gamma, w)
        return Hypothesis(lambda x: evaluate(net, x), -0.25, 0.25, name=f"oracle-nn(R={R})")
    raise ValueError(f"unknown oracle target {target!r}")


# --- SGD on a one-hidden-layer ReLU network --------------------------------


@dataclass(frozen=True)
class SGDArch:
    k: int
    init_scale: float = 1.0


@dataclass(frozen=True)
class SGDOptions:
    learning_rate: float
    epochs: int
    batch: int
    stream: RandomStream


@dataclass
class SGDResult:
    hypothesis: Hypothesis
    net: OneHiddenLayerNet
    history: list[tuple[int, float, float]] = field(default_factory=list)
    diverged: bool = False
    init: dict = field(default_factory=dict)

    def history_csv(self) -> str:
        lines = ["epoch,empirical_loss,edge_estimate"]
        lines += [f"{e},{loss:.17g},{edge:.17g}" for e, loss, edge in self.history]
        return "\n".join(lines) + "\n"


def loss_and_grads(a, W, b, x, y):
    """Mean squared loss of ``sum_j a_j relu(W_j x + b_j)`` and its gradients.

    The ReLU derivative at 0 is taken as 0.
    """
    pre = x @ W.T + b
    act = np.maximum(pre, 0.0)
    r = act @ a - y
    loss = float(np.mean(r * r))
    g_out = (2.0 / y.size) * r
    grad_a = act.T @ g_out
    g_pre = np.outer(g_out, a) * (pre > 0)
    grad_W = g_pre.T @ x
    grad_b = g_pre.sum(axis=0)
    return loss, grad_a, grad_W, grad_b


def init_params(k: int, d: int, init_scale: float, g: np.random.Generator):
    W = g.normal(0.0, init_scale / math.sqrt(d), size=(k, d))
    b = g.uniform(-1.0, 1.0, size=k)
    a = g.normal(0.0, init_scale / math.sqrt(k), size=k)
    return a, W, b


def fit_sgd(samples: SampleSet, arch: SGDArch, opt: SGDOptions) -> SGDResult:
    """Mini-batch gradient descent on the empirical squared loss.

    Weights start from ``N(0, init_scale^2 / d)``, biases from ``U[-1, 1]``
    and outer coefficients from ``N(0, init_scale^2 / k)``. A non-finite
    loss stops training and is reported through ``diverged``; the returned
    hypothesis is then the constant label mean.
    """
    if arch.k < 1:
        raise ValueError("width must be >= 1")
    if not opt.learning_rate > 0:
        raise ValueError("learning rate must be positive")
    if opt.epochs < 0 or opt.batch < 1:
        raise ValueError("need epochs >= 0 and batch >= 1")
    x, y = samples.x, samples.y
    g = opt.stream.generator()
    a, W, b = init_params(arch.k, samples.d, arch.init_scale, g)
    init = {
        "W": f"normal(0, {arch.init_scale}/sqrt({samples.d}))",
        "b": "uniform(-1, 1)",
        "a": f"normal(0, {arch.init_scale}/sqrt({arch.k}))",
    }
    trivial = float(np.var(y))
    history = []
    diverged = False
    lr = opt.learning_rate
    # overflow is expected on divergence and is caught by the finiteness check
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, opt.epochs + 1):
            order = g.permutation(samples.m)
            for lo in range(0, samples.m, opt.batch):
                idx = order[lo : lo + opt.batch]
                _, ga, gW, gb = loss_and_grads(a, W, b, x[idx], y[idx])
                a -= lr * ga
                W -= lr * gW
                b -= lr * gb
            loss = loss_and_grads(a, W, b, x, y)[0]
            if not math.isfinite(loss):
                diverged = True
                history.append((epoch, loss, float("nan")))
                break
            history.append((epoch, loss, trivial - loss))
    if diverged:
        net = OneHiddenLayerNet(a=np.zeros(arch.k), W=np.zeros((arch.k, samples.d)), b=np.zeros(arch.k))
        return SGDResult(fit_constant(samples), net, history, True, init)
    net = OneHiddenLayerNet(a=a, W=W, b=b)
    return SGDResult(Hypothesis(lambda z: evaluate(net, z), name="sgd"), net, history, False, init)


# --- Learner objects for the distinguisher -----------------------------------


class ConstantLearner:
    def fit(self, samples: SampleSet, stream: RandomStream) -> Hypothesis:
        return fit_constant(samples)


@dataclass
class OracleLearner:
    """Knows the planted direction; exists to exercise the harness."""

    w: np.ndarray
    gamma: float
    target: str = "phi"
    R: int | None = None

    def fit(self, samples: SampleSet, stream: RandomStream) -> Hypothesis:
        return fit_oracle(self.w, self.gamma, self.target, self.R)


@dataclass
class SGDLearner:
    arch: SGDArch
    learning_rate: float = 0.05
    epochs: int = 10
    batch: int = 64
    last_result: SGDResult | None = None

    def fit(self, samples: SampleSet, stream: RandomStream) -> Hypothesis:
        opt = SGDOptions(self.learning_rate, self.epochs, self.batch, stream)
        self.last_result = fit_sgd(samples, self.arch, opt)
        return self.last_result.hypothesis


def evaluate_edge(h: Hypothesis, sampler: Callable[[int, RandomStream], SampleSet],
                  m_eval: int, stream: RandomStream) -> float:
    """Loss of the empirical-mean constant minus the loss of ``h`` on a fresh
    evaluation set of ``m_eval`` samples; positive means ``h`` beats trivial."""
    if m_eval < 1:
        raise ValueError("m_eval must be >= 1")
    ev = sampler(int(m_eval), stream)
    baseline = float(np.var(ev.y))
    return baseline - mean_squared_loss(h, ev)
