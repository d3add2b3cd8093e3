"""Loss estimates, concentration checks and numerical witnesses of the TV bounds."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .core import RandomStream, phi
from .distributions import SampleSet, tv_py_uniform_bound, tv_py_uniform_detailed
from .learners import Hypothesis
from .relu import build_nn_1d, eval_exact_dyadic, exact_frac_bits

SQRT_2PI = math.sqrt(2.0 * math.pi)


class NumericalToleranceError(RuntimeError):
    """Two quadrature resolutions disagree by more than the allowed tolerance."""


@dataclass(frozen=True)
class LossEstimate:
    value: float
    stderr: float
    m: int


@dataclass(frozen=True)
class TvEstimate:
    value: float
    method: str
    numeric_tolerance: float
    bound: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"TV estimate {self.value!r} outside [0, 1]")

    @property
    def within_bound(self) -> bool:
        return self.value <= self.bound + self.numeric_tolerance


def population_loss(h: Hypothesis, sampler: Callable[[int, RandomStream], SampleSet],
                    m: int, stream: RandomStream) -> LossEstimate:
    """Monte-Carlo estimate of ``E (h(x) - y)^2`` with its standard error."""
    if m < 1:
        raise ValueError("m must be >= 1")
    s = sampler(int(m), stream)
    r = h(s.x) - s.y
    sq = r * r
    se = float(np.std(sq, ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    return LossEstimate(float(np.mean(sq)), se, int(m))


# --- Gaussianized label noise ------------------------------------------------


def noisy_clean_bound(beta: float, sigma: float) -> float:
    return math.sqrt(beta) / (SQRT_2PI * sigma)


def _tv_noisy_clean_grid(u: np.ndarray, beta: float, sigma: float, n_xi: int, n_z: int) -> float:
    sb = math.sqrt(beta)
    s = np.linspace(-8.0 * sb, 8.0 * sb, n_xi)
    wts = np.exp(-0.5 * (s / sb) ** 2)
    wts[[0, -1]] *= 0.5
    wts /= wts.sum()
    half = 0.25 + 8.0 * sigma
    z = np.linspace(-half, half, n_z)
    dz = z[1] - z[0]
    trap = np.full(n_z, dz)
    trap[[0, -1]] *= 0.5
    norm = 1.0 / (SQRT_2PI * sigma)
    total = 0.0
    for ui in u:
        mu = phi(ui + s)
        p1 = wts @ np.exp(-0.5 * ((z[None, :] - mu[:, None]) / sigma) ** 2) * norm
        p2 = np.exp(-0.5 * ((z - phi(ui)) / sigma) ** 2) * norm
        total += 0.5 * float(trap @ np.abs(p1 - p2))
    return total / u.size


def tv_noisy_clean(gamma: float, beta: float, sigma: float, mc_x: int = 200, seed: int = 0,
                   max_tolerance: float = 1e-4) -> TvEstimate:
    """TV between ``(x, phi(gamma<w,x> + xi0) + xi)`` and ``(x, phi(gamma<w,x>) + xi)``.

    The ``x`` marginals coincide, so this is the mean over ``mc_x`` draws
    of the projection of the TV between the two conditional label laws.
    The ``xi0`` mixture is integrated on 401 nodes over ``+-8 sqrt(beta)``
    and the label axis on 4001 nodes over ``+-(1/4 + 8 sigma)``; a half
    resolution pass (201/2001) on the same draws sets the tolerance.
    """
    if not (beta > 0 and sigma > 0 and gamma > 0):
        raise ValueError("gamma, beta and sigma must be positive")
    u = gamma * RandomStream(seed, 0).generator().standard_normal(int(mc_x))
    fine = _tv_noisy_clean_grid(u, beta, sigma, 401, 4001)
    coarse = _tv_noisy_clean_grid(u, beta, sigma, 201, 2001)
    tol = abs(fine - coarse) + 1e-15
    if tol > max_tolerance:
        raise NumericalToleranceError(
            f"noisy/clean TV grids disagree by {tol:.3g} (> {max_tolerance:.3g})")
    return TvEstimate(min(max(fine, 0.0), 1.0), "conditional-quadrature", tol,
                      noisy_clean_bound(beta, sigma))


# --- phi versus its exact network on a finite window --------------------------


def phi_nn_bound(gamma: float, R: float, sigma: float) -> float:
    """``exp(-R^2 / 2 gamma^2) / (4 sigma sqrt(2 pi) R / gamma)``."""
    s = R / gamma
    return math.exp(-0.5 * s * s) / (4.0 * sigma * SQRT_2PI * s)


def abs_phi_gaussian_tail(gamma: float, start: float, stop: float = 40.0) -> float:
    """``int_start^stop |phi(gamma x)| N(x; 0, 1) dx`` in closed form.

    ``|phi|`` is linear between consecutive quarter-integers, so each piece
    integrates against the Gaussian through ``ndtr`` and the density.
    """
    if start >= stop:
        return 0.0
    t0 = math.floor(4.0 * gamma * start) / 4.0
    t1 = math.ceil(4.0 * gamma * stop) / 4.0
    t = np.arange(t0, t1 + 0.125, 0.25)
    x = np.clip(t / gamma, start, stop)
    v = np.abs(phi(t))
    slope = np.diff(v) / 0.25
    xl, xr = x[:-1], x[1:]
    # |phi| on a piece, written around the piece's left end in x
    vl = v[:-1] + slope * (gamma * xl - t[:-1])
    mass = ndtr(-xl) - ndtr(-xr)
    dens_l = np.exp(-0.5 * xl * xl) / SQRT_2PI
    dens_r = np.exp(-0.5 * xr * xr) / SQRT_2PI
    first_moment = dens_l - dens_r - xl * mass
    return float(np.sum(vl * mass + slope * gamma * first_moment))


def tv_phi_nn(gamma: float, R: int, sigma: float, mc: int = 100_000, seed: int = 0) -> TvEstimate:
    """Upper estimate ``E_x |phi(gamma x) - nn_R(gamma x)| / (2 sigma)``, ``x ~ N(0, 1)``.

    Inside ``|x| <= R/gamma`` the difference is sampled by Monte-Carlo; the
    draws are snapped to a dyadic grid on which the network is evaluated
    without rounding. Outside, ``nn`` vanishes and ``|phi|`` is integrated
    exactly against the Gaussian tail.
    """
    if not (gamma > 0 and sigma > 0 and R >= 1):
        raise ValueError("gamma, sigma and R must be positive")
    net = build_nn_1d(R)
    bits = exact_frac_bits(R, float(R))
    scale = 2.0**bits
    g = RandomStream(seed, 0).generator().standard_normal(int(mc))
    t = np.rint(gamma * g * scale) / scale
    inside = np.abs(t) <= R
    diff = np.zeros(t.size)
    ti = t[inside]
    diff[inside] = np.abs(phi(ti) - eval_exact_dyadic(net, ti, bits))
    mc_mean = float(diff.mean())
    mc_se = float(diff.std(ddof=1) / math.sqrt(mc)) if mc > 1 else 0.0
    tail = 2.0 * abs_phi_gaussian_tail(gamma, R / gamma)
    value = (mc_mean + tail) / (2.0 * sigma)
    tol = 3.0 * mc_se / (2.0 * sigma)
    return TvEstimate(min(value, 1.0), "conditional-quadrature", tol, phi_nn_bound(gamma, R, sigma))


# --- concentration of empirical losses ---------------------------------------


@dataclass(frozen=True)
class DeviationReport:
    epsilon: float
    m2: int
    trials: int
    quantiles: dict
    max_deviation: float
    target: float

    @property
    def fraction_within(self) -> float:
        return self.quantiles["fraction_within_target"]


def clipped_gaussian_second_moment() -> float:
    """``E[clip(g, -1, 1)^2]`` for ``g ~ N(0, 1)``."""
    p_in = 2.0 * ndtr(1.0) - 1.0
    dens = math.exp(-0.5) / SQRT_2PI
    return (p_in - 2.0 * dens) + (1.0 - p_in)


def deviation_check(epsilon: float, m2: int, trials: int, stream: RandomStream,
                    sigma: float = 0.01) -> DeviationReport:
    """Spread of held-out empirical losses around the population loss.

    Uses the fixed bounded hypothesis ``h(x) = clip(x_1, -1, 1)`` on mapped
    null samples ``(x, phi(U) + xi)``, whose population loss is
    ``E clip(g)^2 + 1/48 + sigma^2`` exactly. Only ``x_1`` enters, so only
    that coordinate is drawn.
    """
    if not (epsilon > 0 and m2 > 0 and trials > 0):
        raise ValueError("epsilon, m2 and trials must be positive")
    pop = clipped_gaussian_second_moment() + variance_phi() + sigma**2
    dev = np.empty(trials)
    for i in range(trials):
        g = stream.spawn(i).generator()
        h = np.clip(g.standard_normal(m2), -1.0, 1.0)
        y = phi(g.random(m2) - 0.5) + sigma * g.standard_normal(m2)
        r = h - y
        dev[i] = abs(float(np.mean(r * r)) - pop)
    target = epsilon / 20.0
    q = {
        "q50": float(np.quantile(dev, 0.50)),
        "q90": float(np.quantile(dev, 0.90)),
        "q99": float(np.quantile(dev, 0.99)),
        "fraction_within_target": float(np.mean(dev <= target)),
    }
    return DeviationReport(epsilon, int(m2), int(trials), q, float(dev.max()), target)


def variance_phi() -> float:
    """``int_0^1 phi(t)^2 dt``, integrated exactly over the two linear pieces."""
    # phi(t) = t on [-1/4, 1/4] and 1/2 - t on [1/4, 3/4]; antiderivatives of squares
    a, b = Fraction(-1, 4), Fraction(1, 4)
    first = (b**3 - a**3) / 3
    c, e = Fraction(1, 4), Fraction(3, 4)
    second = ((Fraction(1, 2) - c) ** 3 - (Fraction(1, 2) - e) ** 3) / 3
    return float(first + second)


# --- verification report -----------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    params: dict
    value: float
    bound: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def verify_all(noisy=((1e-6, 1e-2), (1e-8, 1e-2)), noisy_gamma: float = 11.3, mc_x: int = 200,
               wrapped=(0.5, 1.0), phi_nn=((4.0, 8, 0.1), (4.0, 40, 0.1)), mc: int = 100_000,
               seed: int = 0, bound_scale: float = 1.0) -> list[CheckResult]:
    """Run the three TV witnesses. ``bound_scale`` multiplies every bound and
    exists so the failure path can be exercised."""
    out = []
    for beta, sigma in noisy:
        est = tv_noisy_clean(noisy_gamma, beta, sigma, mc_x, seed)
        bound = est.bound * bound_scale
        out.append(CheckResult("noisy-clean-tv", {"gamma": noisy_gamma, "beta": beta, "sigma": sigma},
                               est.value, bound, est.numeric_tolerance,
                               est.value <= bound + est.numeric_tolerance))
    for gamma in wrapped:
        q = tv_py_uniform_detailed(gamma)
        bound = tv_py_uniform_bound(gamma) * bound_scale
        out.append(CheckResult("wrapped-marginal-tv", {"gamma": gamma}, q.value, bound, q.tolerance,
                               q.value <= bound + q.tolerance))
    for gamma, R, sigma in phi_nn:
        est = tv_phi_nn(gamma, R, sigma, mc, seed)
        bound = est.bound * bound_scale
        out.append(CheckResult("phi-nn-tv", {"gamma": gamma, "R": R, "sigma": sigma},
                               est.value, bound, est.numeric_tolerance,
                               est.value <= bound + est.numeric_tolerance))
    return out
