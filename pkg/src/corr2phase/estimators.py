"""Correlation estimators for two-phase samples.

Every estimator starts from the second-phase sample correlation r and
adjusts it with up to four ratio comparisons:

* u: second-phase to first-phase mean of x,
* v: second-phase to first-phase variance of x,
* w: first-phase mean of z to its known population mean,
* a: first-phase variance of z to its known population variance.

Multiplicative (power), linear, additive, and rational adjustment
shapes are provided, plus plug-in variants that estimate the optimal
adjustment weights from the same sample. At unit ratios every variant
collapses to r exactly, because each adjustment factor is then the
float constant 1 and each adjustment term the float constant 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import analytics
from ._kernels import (
    COL_A,
    COL_ALPHA,
    COL_BETA,
    COL_DELTA,
    COL_GAMMA,
    COL_R,
    COL_U,
    COL_V,
    COL_W,
    FLAG_DEGENERATE,
    FLAG_NONFINITE,
    FLAG_SINGULAR,
    SINGULAR_RTOL,
)
from .errors import (
    InvalidParameter,
    MissingParameter,
    NonFiniteEstimate,
    NonPositiveRatio,
    ParseError,
    SingularDenominator,
    ZeroMean,
)
from .moments import MomentSet
from .sampling import SampleStatistics

# kind -> number of user constants
_ARITY = {
    "sample-r": 0,
    "chain-ratio": 0,
    "gen-power": 4,
    "h-linear": 2,
    "h-power": 2,
    "t-linear": 4,
    "t-power": 4,
    "difference": 4,
    "td-star:power": 0,
    "td-star:ratio": 0,
    "td-star:linear": 0,
    "td-star:inverse": 0,
}

ESTIMATOR_KINDS: tuple[str, ...] = tuple(_ARITY)

# Parameter-free kinds, the default set for one-shot estimation.
PARAMETER_FREE_KINDS: tuple[str, ...] = tuple(k for k, v in _ARITY.items() if v == 0)

_TDSTAR_VARIANTS = {
    "power": "power",
    "product": "power",  # accepted alias
    "ratio": "ratio",
    "linear": "linear",
    "inverse": "inverse",
}


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator kind plus its user constants, if the kind takes any."""

    kind: str
    constants: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _ARITY:
            raise InvalidParameter(f"unknown estimator kind {self.kind!r}")
        values = tuple(float(c) for c in self.constants)
        if len(values) != _ARITY[self.kind]:
            raise InvalidParameter(
                f"{self.kind} takes {_ARITY[self.kind]} constants, "
                f"got {len(values)}"
            )
        if any(not np.isfinite(c) for c in values):
            raise InvalidParameter(f"{self.kind} constants must be finite")
        object.__setattr__(self, "constants", values)

    @property
    def needs_plugin(self) -> bool:
        return self.kind.startswith("td-star:")

    def label(self) -> str:
        if not self.constants:
            return self.kind
        return self.kind + ":" + ",".join(repr(c) for c in self.constants)


def parse_estimator(text: str) -> EstimatorSpec:
    """Parse an estimator label like 't-power:0.5,0.2,-0.1,0.3'.

    Inverse of EstimatorSpec.label(). 'td-star:product' is accepted for
    'td-star:power'.
    """
    body = text.strip()
    if body.startswith("td-star"):
        head, sep, variant = body.partition(":")
        if head != "td-star" or not sep or variant not in _TDSTAR_VARIANTS:
            raise ParseError(
                f"bad plug-in estimator {text!r}; expected td-star:"
                f"{{power|product|ratio|linear|inverse}}"
            )
        return EstimatorSpec(kind=f"td-star:{_TDSTAR_VARIANTS[variant]}")
    head, sep, rest = body.partition(":")
    if head not in _ARITY:
        raise ParseError(f"unknown estimator {head!r}")
    arity = _ARITY[head]
    if arity == 0:
        if sep:
            raise ParseError(f"{head} takes no constants, got {rest!r}")
        return EstimatorSpec(kind=head)
    if not sep or not rest:
        raise ParseError(f"{head} needs {arity} comma-separated constants")
    parts = rest.split(",")
    if len(parts) != arity:
        raise ParseError(f"{head} needs {arity} constants, got {len(parts)}")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ParseError(f"bad constant in {text!r}: {exc}") from None
    return EstimatorSpec(kind=head, constants=values)


def estimated_optimum_constants(stats: SampleStatistics) -> analytics.OptimumConstants:
    """Plug-in optimum constants from one sample's own moment estimates.

    Uses the same closed forms as the population-level optimum, with
    every population quantity replaced by its second-phase estimate.
    Raises ZeroMean when a sample coefficient of variation is undefined,
    ZeroCorrelation when r is numerically zero, SingularDenominator when
    a sample moment table is two-point degenerate.
    """
    if stats.c_x_hat is None:
        raise ZeroMean("sample mean of x is zero; plug-in constants undefined")
    if stats.c_z_hat is None:
        raise ZeroMean("sample mean of z is zero; plug-in constants undefined")

    def d(p: int, q: int, m: int) -> float:
        try:
            return stats.delta_hat[(p, q, m)]
        except KeyError:
            raise MissingParameter(
                f"sample moment d_{p}{q}{m} missing from statistics"
            ) from None

    return analytics._optimum_from_table(d, stats.c_x_hat, stats.c_z_hat, stats.r)


def optimal_estimator(kind: str, m: MomentSet) -> EstimatorSpec:
    """Estimator of the given kind with population-optimal constants.

    Power and linear kinds take the optimal weights directly; the
    additive kind takes them scaled by the correlation, which is where
    its first-order optimum sits.
    """
    opt = analytics.optimum_constants(m)
    w1, w2, w3, w4 = opt.weights()
    if kind in ("t-linear", "t-power", "gen-power"):
        return EstimatorSpec(kind=kind, constants=(w1, w2, w3, w4))
    if kind in ("h-linear", "h-power"):
        return EstimatorSpec(kind=kind, constants=(w1, w2))
    if kind == "difference":
        rho = m.require("rho_yx")
        return EstimatorSpec(
            kind=kind, constants=(rho * w1, rho * w2, rho * w3, rho * w4)
        )
    raise InvalidParameter(f"{kind!r} has no free constants to optimize")


def _pow_product(r: float, bases: Sequence[float], exps: Sequence[float]) -> float:
    out = r
    for base, e in zip(bases, exps):
        if e == 0.0:
            continue
        if base <= 0.0:
            raise NonPositiveRatio(
                f"power adjustment needs a positive ratio, got {base!r}"
            )
        out *= base**e
    return out


def _guard_bracket(value: float, scale: float, what: str) -> float:
    if value <= 0.0 or value <= SINGULAR_RTOL * scale:
        raise SingularDenominator(
            f"{what} is {value!r}; the rational adjustment broke down"
        )
    return value


def estimate(spec: EstimatorSpec, stats: SampleStatistics) -> float:
    """Evaluate one estimator on one sample's statistics.

    Raises NonFiniteEstimate if the arithmetic overflows; the other
    errors identify the specific adjustment that failed first.
    """
    value = _estimate_raw(spec, stats)
    if not math.isfinite(value):
        raise NonFiniteEstimate(f"{spec.label()} evaluated to {value!r}")
    return value


def _estimate_raw(spec: EstimatorSpec, stats: SampleStatistics) -> float:
    r, u, v, w, a = stats.r, stats.u, stats.v, stats.w, stats.a
    kind = spec.kind
    c = spec.constants

    if kind == "sample-r":
        return r
    if kind == "chain-ratio":
        # Literal reference form: each factor written as the quantity
        # it compares, not folded into u, v, w, a reciprocals. The
        # ratio guard also keeps every literal denominator nonzero for
        # internally consistent statistics.
        for name, value in (("u", u), ("v", v), ("w", w), ("a", a)):
            if not value > 0.0:
                raise NonPositiveRatio(
                    f"chain of ratios needs {name} > 0, got {value!r}"
                )
        return (
            r
            * (stats.mean_x_first / stats.mean_x)
            * (stats.aux.zbar / stats.mean_z_first)
            * (stats.s2_x_first / stats.s2_x)
            * (stats.aux.sz2 / stats.s2_z_first)
        )
    if kind in ("gen-power", "t-power"):
        return _pow_product(r, (u, v, w, a), c)
    if kind == "h-power":
        return _pow_product(r, (u, v), c)
    if kind == "h-linear":
        return r * (1.0 + c[0] * (u - 1.0) + c[1] * (v - 1.0))
    if kind == "t-linear":
        return r * (
            1.0
            + c[0] * (u - 1.0)
            + c[1] * (v - 1.0)
            + c[2] * (w - 1.0)
            + c[3] * (a - 1.0)
        )
    if kind == "difference":
        return (
            r
            + c[0] * (u - 1.0)
            + c[1] * (v - 1.0)
            + c[2] * (w - 1.0)
            + c[3] * (a - 1.0)
        )

    opt = estimated_optimum_constants(stats)
    aw, bw, gw, dw = opt.weights()
    if kind == "td-star:power":
        return _pow_product(r, (u, v, w, a), (aw, bw, gw, dw))
    if kind == "td-star:linear":
        return r * (
            1.0
            + aw * (u - 1.0)
            + bw * (v - 1.0)
            + gw * (w - 1.0)
            + dw * (a - 1.0)
        )
    if kind == "td-star:ratio":
        den = 1.0 - bw * (v - 1.0) - dw * (a - 1.0)
        scale = 1.0 + abs(bw * (v - 1.0)) + abs(dw * (a - 1.0))
        _guard_bracket(den, scale, "rational adjustment denominator")
        return r * (1.0 + aw * (u - 1.0) + gw * (w - 1.0)) / den
    if kind == "td-star:inverse":
        den = 1.0 - aw * (u - 1.0) - bw * (v - 1.0) - gw * (w - 1.0) - dw * (a - 1.0)
        scale = (
            1.0
            + abs(aw * (u - 1.0))
            + abs(bw * (v - 1.0))
            + abs(gw * (w - 1.0))
            + abs(dw * (a - 1.0))
        )
        _guard_bracket(den, scale, "inverse adjustment denominator")
        return r / den
    raise InvalidParameter(f"unhandled estimator kind {kind!r}")


# Skip codes for the vectorized evaluator; 0 means the row was used.
SKIP_OK = 0
SKIP_DEGENERATE = 1
SKIP_NONFINITE = 2
SKIP_PLUGIN = 3
SKIP_NONPOSITIVE = 4
SKIP_DENOMINATOR = 5

SKIP_LABELS = {
    SKIP_DEGENERATE: "degenerate_sample",
    SKIP_NONFINITE: "nonfinite_value",
    SKIP_PLUGIN: "singular_plugin_constants",
    SKIP_NONPOSITIVE: "nonpositive_ratio",
    SKIP_DENOMINATOR: "singular_denominator",
}


def evaluate_rows(
    spec: EstimatorSpec, rows: np.ndarray, flags: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized estimate over statistics rows from the kernels.

    Returns (values, codes); values[t] is meaningful only where
    codes[t] == SKIP_OK. Matches estimate() row by row: the same
    samples are skipped for the same reasons, and kept values agree to
    rounding error.
    """
    M = rows.shape[0]
    codes = np.zeros(M, np.uint8)
    codes[(flags & FLAG_DEGENERATE) != 0] = SKIP_DEGENERATE
    codes[(flags & FLAG_NONFINITE) != 0] = SKIP_NONFINITE
    if spec.needs_plugin:
        codes[((flags & FLAG_SINGULAR) != 0) & (codes == 0)] = SKIP_PLUGIN

    r = rows[:, COL_R]
    u = rows[:, COL_U]
    v = rows[:, COL_V]
    w = rows[:, COL_W]
    a = rows[:, COL_A]
    kind = spec.kind
    c = spec.constants
    values = np.full(M, np.nan)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == "sample-r":
            values = r.copy()
        elif kind == "chain-ratio":
            nonpos = ~(u > 0.0) | ~(v > 0.0) | ~(w > 0.0) | ~(a > 0.0)
            codes[(codes == 0) & nonpos] = SKIP_NONPOSITIVE
            values = r / u / w / v / a
        elif kind in ("gen-power", "t-power", "h-power", "td-star:power"):
            if kind == "td-star:power":
                exps = (
                    rows[:, COL_ALPHA],
                    rows[:, COL_BETA],
                    rows[:, COL_GAMMA],
                    rows[:, COL_DELTA],
                )
                bases = (u, v, w, a)
            elif kind == "h-power":
                exps = c
                bases = (u, v)
            else:
                exps = c
                bases = (u, v, w, a)
            values = r.copy()
            for base, e in zip(bases, exps):
                if np.ndim(e) == 0 and e == 0.0:
                    continue
                live = e != 0.0 if np.ndim(e) else np.ones(M, bool)
                codes[(codes == 0) & live & (base <= 0.0)] = SKIP_NONPOSITIVE
                values = values * np.where(live, base**np.asarray(e), 1.0)
        elif kind == "h-linear":
            values = r * (1.0 + c[0] * (u - 1.0) + c[1] * (v - 1.0))
        elif kind == "t-linear":
            values = r * (
                1.0
                + c[0] * (u - 1.0)
                + c[1] * (v - 1.0)
                + c[2] * (w - 1.0)
                + c[3] * (a - 1.0)
            )
        elif kind == "difference":
            values = (
                r
                + c[0] * (u - 1.0)
                + c[1] * (v - 1.0)
                + c[2] * (w - 1.0)
                + c[3] * (a - 1.0)
            )
        elif kind == "td-star:linear":
            values = r * (
                1.0
                + rows[:, COL_ALPHA] * (u - 1.0)
                + rows[:, COL_BETA] * (v - 1.0)
                + rows[:, COL_GAMMA] * (w - 1.0)
                + rows[:, COL_DELTA] * (a - 1.0)
            )
        elif kind == "td-star:ratio":
            tb = rows[:, COL_BETA] * (v - 1.0)
            td = rows[:, COL_DELTA] * (a - 1.0)
            den = 1.0 - tb - td
            scale = 1.0 + np.abs(tb) + np.abs(td)
            bad = (den <= 0.0) | (den <= SINGULAR_RTOL * scale)
            codes[(codes == 0) & bad] = SKIP_DENOMINATOR
            values = (
                r
                * (1.0 + rows[:, COL_ALPHA] * (u - 1.0) + rows[:, COL_GAMMA] * (w - 1.0))
                / den
            )
        elif kind == "td-star:inverse":
            ta = rows[:, COL_ALPHA] * (u - 1.0)
            tb = rows[:, COL_BETA] * (v - 1.0)
            tg = rows[:, COL_GAMMA] * (w - 1.0)
            td = rows[:, COL_DELTA] * (a - 1.0)
            den = 1.0 - ta - tb - tg - td
            scale = 1.0 + np.abs(ta) + np.abs(tb) + np.abs(tg) + np.abs(td)
            bad = (den <= 0.0) | (den <= SINGULAR_RTOL * scale)
            codes[(codes == 0) & bad] = SKIP_DENOMINATOR
            values = r / den
        else:  # pragma: no cover - registry and dispatch are in sync
            raise InvalidParameter(f"unhandled estimator kind {kind!r}")

    keep = codes == SKIP_OK
    bad_value = keep & ~np.isfinite(values)
    codes[bad_value] = SKIP_NONFINITE
    values[codes != SKIP_OK] = np.nan
    return values, codes
