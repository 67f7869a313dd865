"""Precision models, quantization, and accessibility counts, thresholds and slopes.

Counts come back as natural logs (finite-prompt model) or as ln ln
(mean-field model), since neither fits in a double otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Union

import numpy as np

from . import geometry
from .geometry import Ball, Box, Cone, SupportGeometry


@dataclass(frozen=True)
class UniformPrecision:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class FloatPrecision:
    significand_bits: int

    def __post_init__(self):
        if not 2 <= int(self.significand_bits) <= 52:
            raise ValueError("significand_bits must lie in [2, 52]")


PrecisionModel = Union[UniformPrecision, FloatPrecision]
FP16 = FloatPrecision(11)
BF16 = FloatPrecision(8)


@dataclass(frozen=True)
class ModelGeometry:
    dim: int
    vocab_size: int
    support: SupportGeometry
    precision: PrecisionModel = FP16
    prompt_len: Optional[int] = None
    q: Optional[float] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.support.dim != self.dim:
            raise ValueError("support dimension does not match dim")
        if self.prompt_len is not None and self.prompt_len < 1:
            raise ValueError("prompt_len must be >= 1")
        if self.q is not None and not self.q >= 1:
            raise ValueError("q must be >= 1")

    @property
    def epsilon(self) -> float:
        return machine_epsilon(self.precision)


@dataclass(frozen=True)
class SlopeBound:
    slope: float
    shape: str
    log_packing: float


def machine_epsilon(model: PrecisionModel) -> float:
    """Gap between 1 and the next representable value (2^-(p-1) for p bits)."""
    if isinstance(model, UniformPrecision):
        return float(model.epsilon)
    if isinstance(model, FloatPrecision):
        return math.ldexp(1.0, -(int(model.significand_bits) - 1))
    raise TypeError(f"unknown precision model {type(model).__name__}")


def quantize(X, epsilon: float) -> np.ndarray:
    """Snap every entry down to the grid ``eps * floor(x / eps)``.

    The floor is corrected against the rounded product so that
    ``k*eps <= x < (k+1)*eps`` holds in floating point, which makes the
    operator exactly idempotent.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    X = np.asarray(X, dtype=np.float64)
    k = np.floor(X / epsilon)
    k = np.where(k * epsilon > X, k - 1.0, k)
    k = np.where((k + 1.0) * epsilon <= X, k + 1.0, k)
    out = k * epsilon
    return out + 0.0  # normalise -0.0


# ---------------------------------------------------------------------------
# Finite-prompt model
# ---------------------------------------------------------------------------


def _ball_support(geom: ModelGeometry) -> Ball:
    if not isinstance(geom.support, Ball):
        raise ValueError(f"unsupported shape {type(geom.support).__name__}: this bound needs a ball support")
    return geom.support


def _need_prompt_len(geom: ModelGeometry) -> int:
    if geom.prompt_len is None:
        raise ValueError("prompt_len is required for finite-prompt bounds")
    return int(geom.prompt_len)


def _log_grid(radius: float, epsilon: float, k: float = 2.0) -> float:
    return math.log1p(k * radius / epsilon)


def count_finite(geom: ModelGeometry) -> float:
    """ln of ``(1 + 2r/eps)^(dm)``."""
    ball = _ball_support(geom)
    m = _need_prompt_len(geom)
    return geom.dim * m * _log_grid(ball.radius, geom.epsilon)


def threshold_finite(geom: ModelGeometry) -> float:
    return count_finite(geom) / math.log(geom.vocab_size)


def decay_log_fraction(geom: ModelGeometry, n: int) -> float:
    """ln of the accessible fraction bound ``(1+2r/eps)^(dm) / |V|^n``."""
    return count_finite(geom) - n * math.log(geom.vocab_size)


def slope_ball(geom: ModelGeometry) -> SlopeBound:
    ball = _ball_support(geom)
    lp = geom.dim * _log_grid(ball.radius, geom.epsilon)
    return SlopeBound(lp / math.log(geom.vocab_size), "ball", lp)


def log_frac_cone(dim: int, angle: float, radius: float = 1.0, printed: bool = False) -> float:
    """ln FracCone: cone-to-ball volume ratio.

    With ``printed=True`` the prefactor
    ``Gamma((d+2)/2) / (2r Gamma(3/2) Gamma((d+1)/2))`` is used verbatim,
    which carries an extra ``1/r`` relative to the dimensionless ratio.
    """
    if printed:
        pref = (geometry.log_gamma(0.5 * (dim + 2)) - math.log(2.0 * radius)
                - geometry.log_gamma(1.5) - geometry.log_gamma(0.5 * (dim + 1)))
        return pref + geometry.log_cone_bracket(dim, angle)
    return geometry.cone_fraction(dim, angle)


def slope_cone(geom: ModelGeometry, printed: bool = False) -> SlopeBound:
    cone = geom.support
    if not isinstance(cone, Cone):
        raise ValueError("slope_cone needs a cone support")
    lp = (geom.dim * _log_grid(cone.radius, geom.epsilon)
          + log_frac_cone(geom.dim, cone.angle, cone.radius, printed))
    return SlopeBound(lp / math.log(geom.vocab_size), "cone", lp)


def log_packing_ranges(ranges, epsilon: float) -> float:
    """sum_i ln(1 + range_i / eps); zero ranges contribute nothing."""
    return float(np.log1p(np.asarray(ranges, dtype=np.float64) / epsilon).sum())


def slope_ellipsoid(geom: ModelGeometry) -> SlopeBound:
    box = geom.support
    if not isinstance(box, Box):
        raise ValueError("slope_ellipsoid needs a box support")
    lp = log_packing_ranges(box.ranges, geom.epsilon)
    return SlopeBound(lp / math.log(geom.vocab_size), "ellipsoid", lp)


def slope(geom: ModelGeometry, **kw) -> SlopeBound:
    if isinstance(geom.support, Ball):
        return slope_ball(geom)
    if isinstance(geom.support, Cone):
        return slope_cone(geom, **kw)
    return slope_ellipsoid(geom)


# ---------------------------------------------------------------------------
# Variable precision
# ---------------------------------------------------------------------------


def _ceil_log2(x: float) -> int:
    m, e = math.frexp(x)  # x = m * 2^e with 0.5 <= m < 1
    return e - 1 if m == 0.5 else e


def variable_precision_packing_interval(r_min: float, r_max: float) -> float:
    """Upper bound on distinct half-precision values in ``[r_min, r_max]``.

    ``2^12 (b - a) + 2^(13-b) r_max - 2^(13-a) r_min`` with
    ``a = ceil(log2 r_min)`` and ``b = ceil(log2 r_max)``.
    """
    if not r_min > 0:
        raise ValueError("r_min must be positive")
    if r_max < r_min:
        raise ValueError("r_max must be >= r_min")
    a, b = _ceil_log2(r_min), _ceil_log2(r_max)
    return math.ldexp(1.0, 12) * (b - a) + math.ldexp(r_max, 13 - b) - math.ldexp(r_min, 13 - a)


def variable_precision_packing_symmetric(r_min: float, r_max: float) -> float:
    """Same bound on ``[-r_max, -r_min] U [r_min, r_max]``."""
    return 2.0 * variable_precision_packing_interval(r_min, r_max)


# ---------------------------------------------------------------------------
# Mean-field model
# ---------------------------------------------------------------------------

_EXPONENT_K = {"2r": 2.0, "4r": 4.0}


def _need_q(geom: ModelGeometry) -> float:
    if geom.q is None:
        raise ValueError("q is required for mean-field bounds")
    return float(geom.q)


def count_meanfield(geom: ModelGeometry, convention: str = "2r") -> float:
    """ln ln of ``(e + e (2r)^q / eps^q)^((1 + 2r/eps)^d)``."""
    ball = _ball_support(geom)
    q = _need_q(geom)
    return geometry.packing_wasserstein_upper(geom.dim, ball.radius, geom.epsilon, q,
                                              convention).loglog_count


def threshold_meanfield(geom: ModelGeometry, convention: str = "4r") -> float:
    """ln of the critical length n*; independent of the prompt length."""
    return count_meanfield(geom, convention) - math.log(math.log(geom.vocab_size))


# ---------------------------------------------------------------------------
# Bundled constants
# ---------------------------------------------------------------------------


def load_model_constants() -> dict:
    text = resources.files("accessbound").joinpath("data/model_constants.json").read_text()
    return json.loads(text)


def model_geometry(name: str, shape: str = "ball", prompt_len: int = 1,
                   precision: PrecisionModel = FP16, q: Optional[float] = None) -> ModelGeometry:
    """Geometry for one of the bundled reference models."""
    table = {rec["name"].lower(): rec for rec in load_model_constants()["models"]}
    rec = table.get(name.lower())
    if rec is None:
        raise KeyError(f"unknown model {name!r}; known: {sorted(r['name'] for r in table.values())}")
    d = rec["d"]
    if shape == "ball":
        support = Ball(d, rec["r"], "linf")
    elif shape == "cone":
        support = Cone(d, rec["r"], rec["theta"])
    else:
        raise ValueError("bundled constants only describe ball and cone supports")
    return ModelGeometry(d, rec["vocab"], support, precision, prompt_len, q)
