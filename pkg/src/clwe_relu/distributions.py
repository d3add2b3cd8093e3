"""Samplers and densities for the CLWE, null, periodic-neuron and network laws."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .core import RandomStream, mod1, phi
from .relu import OneHiddenLayerNet, evaluate


@dataclass(frozen=True)
class ClweParams:
    d: int
    gamma: float
    beta: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class LabeledSample:
    x: np.ndarray
    y: float


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``m`` labelled inputs: ``x`` has shape ``(m, d)``, labels ``y`` are a
    separate contiguous ``(m,)`` array."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.size:
            raise ValueError("x must be (m, d) with one label per row")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.y.size

    def __len__(self):
        return self.m

    def __getitem__(self, i) -> LabeledSample:
        return LabeledSample(self.x[i], float(self.y[i]))

    def subset(self, sl: slice) -> "SampleSet":
        return SampleSet(self.x[sl], self.y[sl])

    def with_labels(self, y) -> "SampleSet":
        return SampleSet(self.x, y)

    def to_csv(self, fh, header_comment: str | None = None) -> None:
        """Row-major CSV, header ``x_1,...,x_d,y``, 17 significant digits."""
        if header_comment is not None:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x_{i + 1}" for i in range(self.d)] + ["y"])
        for xi, yi in zip(self.x, self.y):
            writer.writerow([f"{v:.17g}" for v in xi] + [f"{yi:.17g}"])

    @classmethod
    def from_csv(cls, fh) -> "SampleSet":
        lines = [ln for ln in fh if not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        if not header or header[-1] != "y" or header[:-1] != [f"x_{i + 1}" for i in range(len(header) - 1)]:
            raise ValueError("bad CSV header; expected x_1,...,x_d,y")
        rows = np.array([[float(v) for v in row] for row in reader if row], dtype=np.float64)
        if rows.size == 0:
            rows = rows.reshape(0, len(header))
        return cls(rows[:, :-1], rows[:, -1])

    def to_csv_string(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        self.to_csv(buf, header_comment)
        return buf.getvalue()


def _check_direction(w, d: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size != d:
        raise ValueError(f"direction has dimension {w.size}, expected {d}")
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return w


def projection(x: np.ndarray, w: np.ndarray, gamma: float) -> np.ndarray:
    """``gamma * <w, x>`` row-wise; shared by every planted sampler."""
    return gamma * (x @ w)


def _check_count(m: int) -> int:
    if m < 1:
        raise ValueError("sample count must be >= 1")
    return int(m)


def sample_clwe(params: ClweParams, w, m: int, stream: RandomStream) -> SampleSet:
    """CLWE samples ``(x, mod1(gamma <w, x> + xi0))`` with ``xi0 ~ N(0, beta)``
    (``beta`` is a variance)."""
    m = _check_count(m)
    w = _check_direction(w, params.d)
    g = stream.generator()
    x = g.standard_normal((m, params.d))
    xi0 = math.sqrt(params.beta) * g.standard_normal(m)
    return SampleSet(x, mod1(projection(x, w, params.gamma) + xi0))


def sample_null(d: int, m: int, stream: RandomStream) -> SampleSet:
    """``x ~ N(0, I_d)`` with an independent label uniform on ``[-1/2, 1/2)``."""
    m = _check_count(m)
    if d < 1:
        raise ValueError("d must be >= 1")
    g = stream.generator()
    x = g.standard_normal((m, d))
    y = g.random(m) - 0.5
    return SampleSet(x, y)


def sample_pphi(d: int, gamma: float, w, sigma: float, m: int, stream: RandomStream) -> SampleSet:
    """Periodic-neuron samples ``(x, phi(gamma <w, x>) + xi)``, ``xi ~ N(0, sigma^2)``."""
    m = _check_count(m)
    if not sigma >= 0:
        raise ValueError("sigma must be >= 0")
    w = _check_direction(w, d)
    g = stream.generator()
    x = g.standard_normal((m, d))
    xi = sigma * g.standard_normal(m)
    return SampleSet(x, phi(projection(x, w, gamma)) + xi)


def sample_pnn(net: OneHiddenLayerNet, sigma: float, m: int, stream: RandomStream) -> SampleSet:
    """Network samples ``(x, net(x) + xi)``.

    Draws are consumed in the same order as :func:`sample_pphi`, so with a
    shared stream the two samplers see identical ``x`` and ``xi``.
    """
    m = _check_count(m)
    if not sigma >= 0:
        raise ValueError("sigma must be >= 0")
    g = stream.generator()
    x = g.standard_normal((m, net.d))
    xi = sigma * g.standard_normal(m)
    return SampleSet(x, evaluate(net, x) + xi)


def theta_terms(gamma: float) -> int:
    """Truncation order ``K`` of the wrapped-Gaussian image sum (``|k| <= K``)."""
    return int(math.ceil(8 * gamma)) + 2


def wrapped_density(gamma: float, t):
    """Density of ``mod1(gamma * g)``, ``g ~ N(0, 1)``, at ``t`` in ``[-1/2, 1/2)``.

    Image sum ``sum_k N(t + k; 0, gamma^2)`` over ``|k| <= ceil(8 gamma) + 2``;
    the dropped images lie more than 8 standard deviations out.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    tt = np.asarray(t, dtype=np.float64)
    K = theta_terms(gamma)
    k = np.arange(-K, K + 1, dtype=np.float64)
    z = (tt[..., None] + k) / gamma
    dens = np.exp(-0.5 * z * z).sum(axis=-1) / (gamma * math.sqrt(2 * math.pi))
    return float(dens) if np.ndim(t) == 0 else dens


def wrapped_cdf(gamma: float, t):
    """``P(mod1(gamma * g) < t)`` for ``t`` in ``[-1/2, 1/2]``, by the same image sum."""
    tt = np.asarray(t, dtype=np.float64)
    K = theta_terms(gamma)
    k = np.arange(-K, K + 1, dtype=np.float64)
    hi = ndtr((tt[..., None] + k) / gamma)
    lo = ndtr((-0.5 + k) / gamma)
    out = (hi - lo).sum(axis=-1)
    return float(out) if np.ndim(t) == 0 else out


def wrapped_deviation(gamma: float, t):
    """``wrapped_density(gamma, t) - 1`` without cancellation, from the dual series
    ``2 sum_{k>=1} exp(-2 pi^2 gamma^2 k^2) cos(2 pi k t)``."""
    tt = np.asarray(t, dtype=np.float64)
    coef = []
    k = 1
    while True:
        c = 2.0 * math.exp(-2.0 * math.pi**2 * gamma**2 * k * k)
        if c < 1e-300 or (coef and c < 1e-18 * coef[0]):
            break
        coef.append(c)
        k += 1
    if not coef:
        return 0.0 if np.ndim(t) == 0 else np.zeros_like(tt)
    ks = np.arange(1, len(coef) + 1, dtype=np.float64)
    out = (np.asarray(coef) * np.cos(2 * math.pi * tt[..., None] * ks)).sum(axis=-1)
    return float(out) if np.ndim(t) == 0 else out


# Below this frequency the dual series converges slowly and the plain image
# sum has no cancellation problem, so the deviation is taken from it.
_DUAL_SERIES_MIN_GAMMA = 0.2
_TV_PANELS = 2**14


def _simpson(f, a: float, b: float, n: int) -> float:
    if n % 2:
        n += 1
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    tolerance: float


def tv_py_uniform_detailed(gamma: float, panels: int = _TV_PANELS) -> QuadratureResult:
    """Total variation between ``mod1(gamma * g)`` and ``U[-1/2, 1/2)``.

    The deviation ``p - 1`` is even and, since the wrapped normal is
    unimodal, changes sign once on ``(0, 1/2)``. The integral of ``|p - 1|``
    is split at that root so that composite Simpson only sees smooth
    pieces; a second pass at twice the panels gives the error estimate.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if gamma >= _DUAL_SERIES_MIN_GAMMA:
        dev = lambda t: np.asarray(wrapped_deviation(gamma, t))  # noqa: E731
    else:
        dev = lambda t: np.asarray(wrapped_density(gamma, t)) - 1.0  # noqa: E731
    if float(dev(0.0)) <= 0.0:
        return QuadratureResult(0.0, 0.0)
    if float(dev(0.5)) >= 0.0:
        root = 0.5
    else:
        root = brentq(lambda s: float(dev(s)), 0.0, 0.5, xtol=1e-15)

    def half_integral(n):
        # by evenness, (1/2) * int_{-1/2}^{1/2} |p - 1| = int_0^{1/2} |p - 1|
        left = _simpson(dev, 0.0, root, n)
        right = -_simpson(dev, root, 0.5, n) if root < 0.5 else 0.0
        return left + right

    coarse = half_integral(panels)
    fine = half_integral(2 * panels)
    return QuadratureResult(float(max(fine, 0.0)), float(abs(fine - coarse)))


def tv_py_uniform(gamma: float) -> float:
    return tv_py_uniform_detailed(gamma).value


def tv_py_uniform_bound(gamma: float) -> float:
    return 16.0 * math.exp(-2.0 * math.pi**2 * gamma**2)
