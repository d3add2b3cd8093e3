"""Parameter transport from a label-noise level to the implied GapSVP factor.

All magnitudes that can be astronomically large or small (sigma, beta, q,
alpha, the GapSVP factor) are carried as natural logarithms. Asymptotic
side conditions are replaced by named surrogates; each constraint row in
the report prints both sides so it can be re-judged under another
convention.

Surrogates:

* ``poly(n)`` in ``log(1/beta) <= poly(n)`` and ``d <= poly(n)`` -> ``n^3``
* ``sigma' >= omega(sqrt(log n))`` -> ``sqrt(ln n) * ln(ln n + e)``
* ``gamma = omega(sqrt(d log d))`` -> ``2 sqrt(d ln d) * ln d``
* ``beta <= sigma / poly(d)`` -> ``beta = sigma / d^poly_slack``

The constant ``c`` of the LWE-to-CLWE step has no fixed value; it is a
knob (``c_const``, default 1), not a derived quantity. Note that the three
formulas ``alpha = beta / (c sqrt d)``, ``q = 2d / beta`` and
``sigma' = alpha q`` give ``sigma' = 2 sqrt(d) / c``; the report carries
that formula-derived value.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

LN2 = math.log(2.0)


@dataclass(frozen=True)
class Constraint:
    name: str
    satisfied: bool
    lhs: float
    rhs: float


@dataclass(frozen=True)
class ParamReport:
    n: int
    d: int
    log_sigma: float
    poly_slack: float
    c_const: float
    log_beta: float
    gamma: float
    log_q: float
    log_alpha: float
    sigma_prime: float
    log_gapsvp_factor: float
    constraints: tuple[Constraint, ...] = ()
    extras: dict = field(default_factory=dict)

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.constraints)

    def violated(self) -> list[str]:
        return [c.name for c in self.constraints if not c.satisfied]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["constraints"] = [asdict(c) for c in self.constraints]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, rec: dict) -> "ParamReport":
        rec = dict(rec)
        rec["constraints"] = tuple(Constraint(**c) for c in rec["constraints"])
        return cls(**rec)

    @classmethod
    def from_json(cls, text: str) -> "ParamReport":
        return cls.from_dict(json.loads(text))

    def table(self) -> str:
        rows = [
            ("n (LWE dimension)", f"{self.n}"),
            ("d (CLWE dimension)", f"{self.d}"),
            ("log2 sigma", f"{self.log_sigma / LN2:.6g}"),
            ("log2 beta", f"{self.log_beta / LN2:.6g}"),
            ("gamma", f"{self.gamma:.6g}"),
            ("log2 q", f"{self.log_q / LN2:.6g}"),
            ("log2 alpha", f"{self.log_alpha / LN2:.6g}"),
            ("sigma'", f"{self.sigma_prime:.6g}"),
            ("c", f"{self.c_const:.6g}"),
            ("ln GapSVP factor", f"{self.log_gapsvp_factor:.6g}"),
            ("log2 GapSVP factor", f"{self.log_gapsvp_factor / LN2:.6g}"),
        ]
        rows += [(k, f"{v:.6g}" if isinstance(v, float) else str(v)) for k, v in self.extras.items()]
        w = max(len(k) for k, _ in rows)
        lines = [f"{k.ljust(w)}  {v}" for k, v in rows]
        lines.append("")
        cw = max(len(c.name) for c in self.constraints) if self.constraints else 10
        lines.append(f"{'constraint'.ljust(cw)}  {'lhs':>14}  {'rhs':>14}  ok")
        for c in self.constraints:
            lines.append(f"{c.name.ljust(cw)}  {c.lhs:14.6g}  {c.rhs:14.6g}  {'yes' if c.satisfied else 'NO'}")
        lines.append("")
        lines.append("note: sigma' = alpha*q = 2 sqrt(d)/c, derived from the alpha and q formulas.")
        return "\n".join(lines)


def gapsvp_factor_log(n: float, d: float, beta_log: float) -> float:
    """``ln(n sqrt(d) / beta)`` given ``ln beta``."""
    return math.log(n) + 0.5 * math.log(d) - beta_log


def derive_chain(n: int, d: int, log_sigma: float, poly_slack: float = 1.0,
                 c_const: float = 1.0) -> ParamReport:
    """Parameter chain for label noise ``sigma = exp(log_sigma)``."""
    if n < 2 or d < 2:
        raise ValueError("need n >= 2 and d >= 2")
    if not (math.isfinite(log_sigma) and log_sigma < 0):
        raise ValueError("sigma must lie in (0, 1)")
    if poly_slack < 1:
        raise ValueError("poly_slack must be >= 1")
    if not c_const > 0:
        raise ValueError("c_const must be positive")
    ln_d, ln_n = math.log(d), math.log(n)
    log_beta = log_sigma - poly_slack * ln_d
    gamma = 2.0 * math.sqrt(d * ln_d) * ln_d
    log_alpha = log_beta - math.log(c_const) - 0.5 * ln_d
    log_q = LN2 + ln_d - log_beta
    log_sigma_prime = log_alpha + log_q
    sigma_prime = math.exp(log_sigma_prime)
    n3 = float(n) ** 3
    constraints = (
        Constraint("log(1/beta) <= n^3", -log_beta <= n3, -log_beta, n3),
        Constraint("3n*ln(d/beta) <= d", 3 * n * (ln_d - log_beta) <= d, 3.0 * n * (ln_d - log_beta), float(d)),
        Constraint("d <= n^3", d <= n3, float(d), n3),
        Constraint("alpha*q > 2 sqrt(n)", log_sigma_prime > LN2 + 0.5 * ln_n, sigma_prime, 2.0 * math.sqrt(n)),
        Constraint("sigma' >= sqrt(ln n) ln(ln n + e)",
                   sigma_prime >= math.sqrt(ln_n) * math.log(ln_n + math.e),
                   sigma_prime, math.sqrt(ln_n) * math.log(ln_n + math.e)),
    )
    for name, v in (("log_beta", log_beta), ("log_q", log_q), ("log_alpha", log_alpha), ("gamma", gamma)):
        if not math.isfinite(v):
            raise ArithmeticError(f"non-finite {name}")
    return ParamReport(
        n=int(n), d=int(d), log_sigma=float(log_sigma), poly_slack=float(poly_slack),
        c_const=float(c_const), log_beta=log_beta, gamma=gamma, log_q=log_q,
        log_alpha=log_alpha, sigma_prime=sigma_prime,
        log_gapsvp_factor=gapsvp_factor_log(n, d, log_beta), constraints=constraints,
    )


def eta_exponent(eta: float) -> float:
    """The sub-exponential exponent ``eta / (1 - eta)`` of the GapSVP factor."""
    return eta / (1.0 - eta)


def eta_regime(eta: float, d: int, poly_slack: float = 1.0, c_const: float = 1.0) -> ParamReport:
    """``sigma = 2^(-d^eta)`` and ``n = round(d^(1 - eta))``.

    ``extras`` records the window radius surrogate
    ``R = sqrt(d^(1+eta) ln d) ln d`` and ``log2(factor) / n^(eta/(1-eta))``,
    the constant hidden in ``2^O(n^(eta/(1-eta)))``.
    """
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    if d < 4:
        raise ValueError("d must be >= 4")
    n = round(d ** (1.0 - eta))
    log_sigma = -(d**eta) * LN2
    rep = derive_chain(n, d, log_sigma, poly_slack, c_const)
    ln_d = math.log(d)
    delta = eta_exponent(eta)
    extras = {
        "eta": float(eta),
        "delta": delta,
        "R": math.sqrt(d ** (1.0 + eta) * ln_d) * ln_d,
        "log2_factor_over_n_delta": rep.log_gapsvp_factor / LN2 / n**delta,
    }
    return ParamReport(**{**asdict(rep), "constraints": rep.constraints, "extras": extras})
