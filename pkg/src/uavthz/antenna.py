"""Square uniform array radiation pattern: array factor, normalization, gain lookup.

The pattern of an N x N uniform square array is the squared product of two
uniform-line-source factors, one per array axis. A normalization constant
scales the pattern so the total power radiated over the sphere is 4*pi
regardless of element count; it is computed once per configuration by
deterministic trapezoidal quadrature and cached.
"""

import threading
from dataclasses import dataclass

import numpy as np

from uavthz.errors import InvalidInputError, NumericFailureError, OutOfHemisphereError

TWO_PI = 2.0 * np.pi

# Quadrature ladder for the normalization integral: base grid per the
# stated scheme, doubled until the relative change drops below _QUAD_RTOL.
_QUAD_BASE = (512, 1024)
_QUAD_RTOL = 1e-3
_QUAD_MAX_DOUBLINGS = 3
_QUAD_CHUNK_ROWS = 256


@dataclass(frozen=True)
class ArrayAntennaConfig:
    """Square array description: N elements per side, spacing as a fraction of wavelength."""

    n_side: int
    spacing_over_lambda: float = 0.5
    carrier_hz: float = 140e9
    phase_shift_x: float = 0.0
    phase_shift_y: float = 0.0

    def __post_init__(self):
        if self.n_side < 1:
            raise InvalidInputError(f"n_side must be >= 1, got {self.n_side}")
        if self.spacing_over_lambda <= 0:
            raise InvalidInputError("spacing_over_lambda must be positive")
        if self.carrier_hz <= 0:
            raise InvalidInputError("carrier_hz must be positive")

    @property
    def _pattern_key(self):
        # The pattern depends on k*d_a = 2*pi*spacing_over_lambda, never on
        # the carrier itself.
        return (self.n_side, self.spacing_over_lambda,
                self.phase_shift_x, self.phase_shift_y)


@dataclass(frozen=True)
class GainValue:
    """Linear (dimensionless, >= 0) array gain."""

    linear_gain: float

    def __post_init__(self):
        if not np.isfinite(self.linear_gain) or self.linear_gain < 0:
            raise InvalidInputError(f"gain must be finite and >= 0, got {self.linear_gain}")

    @property
    def db(self) -> float:
        return float(10.0 * np.log10(self.linear_gain)) if self.linear_gain > 0 else -np.inf


def _axis_ratio(n: int, psi):
    """sin(n*psi/2) / (n*sin(psi/2)) with every removable singularity filled.

    Reduces psi modulo 2*pi and evaluates the reduced argument as a quotient
    of normalized sincs, which is exact away from the singular points and
    smooth through them (the reduced denominator sinc is bounded below by
    2/pi). The sign flips by (-1)^(m*(n-1)) across period m.
    """
    psi = np.asarray(psi, dtype=float)
    m = np.round(psi / TWO_PI)
    r = psi - TWO_PI * m
    ratio = np.sinc(n * r / TWO_PI) / np.sinc(r / TWO_PI)
    sign = np.where((m * (n - 1)) % 2 == 0, 1.0, -1.0)
    return ratio * sign


def _factor_from_psi(cfg: ArrayAntennaConfig, psi_x, psi_y):
    rx = _axis_ratio(cfg.n_side, psi_x)
    ry = _axis_ratio(cfg.n_side, psi_y)
    return (rx * ry) ** 2


def array_factor(cfg: ArrayAntennaConfig, theta, phi):
    """Normalized power pattern in [0, 1] at spherical direction (theta, phi).

    theta is measured from boresight; the value 1 is reached at boresight
    for zero phase shifts. Accepts scalars or broadcastable arrays.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    kd = TWO_PI * cfg.spacing_over_lambda
    st = np.sin(theta)
    psi_x = kd * st * np.cos(phi) + cfg.phase_shift_x
    psi_y = kd * st * np.sin(phi) + cfg.phase_shift_y
    out = _factor_from_psi(cfg, psi_x, psi_y)
    return float(out) if out.ndim == 0 else out


def two_axis_gain_args(theta_x: float, theta_y: float) -> tuple[float, float]:
    """Convert per-axis offset angles to the (theta, phi) pattern parameterization.

    Solves sin(theta)*cos(phi) = sin(theta_x) and
    sin(theta)*sin(phi) = sin(theta_y); phi is returned in [0, 2*pi) and is
    canonically 0 at boresight.
    """
    sx, sy = np.sin(theta_x), np.sin(theta_y)
    s2 = sx * sx + sy * sy
    if s2 > 1.0 + 1e-12:
        raise OutOfHemisphereError(
            f"axis angles ({theta_x}, {theta_y}) have no forward-hemisphere direction"
        )
    theta = float(np.arcsin(np.sqrt(min(s2, 1.0))))
    if s2 == 0.0:
        return 0.0, 0.0
    phi = float(np.arctan2(sy, sx)) % TWO_PI
    return theta, phi


def gain_at_axis_offsets(cfg: ArrayAntennaConfig, theta_x, theta_y, roll: float = 0.0):
    """Gain at per-axis angular offsets from boresight.

    The pattern depends on direction only through the offset sines, so this
    is total in (theta_x, theta_y) and coincides with
    gain(cfg, *two_axis_gain_args(tx, ty)) wherever the latter is defined.
    roll rotates the offset pair about boresight (default 0).
    """
    theta_x = np.asarray(theta_x, dtype=float)
    theta_y = np.asarray(theta_y, dtype=float)
    if roll != 0.0:
        c, s = np.cos(roll), np.sin(roll)
        theta_x, theta_y = c * theta_x + s * theta_y, -s * theta_x + c * theta_y
    kd = TWO_PI * cfg.spacing_over_lambda
    psi_x = kd * np.sin(theta_x) + cfg.phase_shift_x
    psi_y = kd * np.sin(theta_y) + cfg.phase_shift_y
    out = normalization_constant(cfg) * _factor_from_psi(cfg, psi_x, psi_y)
    return float(out) if out.ndim == 0 else out


def _sphere_integral(cfg: ArrayAntennaConfig, n_theta: int, n_phi: int) -> float:
    """Composite trapezoid of array_factor * sin(theta) over the full sphere."""
    theta = np.linspace(0.0, np.pi, n_theta + 1)
    phi = np.linspace(0.0, TWO_PI, n_phi + 1)
    w_theta = np.full(n_theta + 1, np.pi / n_theta)
    w_theta[0] *= 0.5
    w_theta[-1] *= 0.5
    w_phi = np.full(n_phi + 1, TWO_PI / n_phi)
    w_phi[0] *= 0.5
    w_phi[-1] *= 0.5
    total = 0.0
    for lo in range(0, n_theta + 1, _QUAD_CHUNK_ROWS):
        hi = min(lo + _QUAD_CHUNK_ROWS, n_theta + 1)
        block = array_factor(cfg, theta[lo:hi, None], phi[None, :])
        block = block * np.sin(theta[lo:hi, None])
        total += float(w_theta[lo:hi] @ block @ w_phi)
    return total


_G0_CACHE: dict[tuple, float] = {}
_G0_LOCK = threading.Lock()


def normalization_constant(cfg: ArrayAntennaConfig) -> float:
    """Power-normalization constant: 4*pi over the sphere integral of the pattern.

    Deterministic trapezoidal quadrature, refined by grid doubling until the
    relative change is below 1e-3; the result is cached per pattern
    configuration (initialize-once; a rare duplicate computation is harmless).
    """
    key = cfg._pattern_key
    cached = _G0_CACHE.get(key)
    if cached is not None:
        return cached
    n_theta, n_phi = _QUAD_BASE
    prev = _sphere_integral(cfg, n_theta, n_phi)
    value = None
    for _ in range(_QUAD_MAX_DOUBLINGS):
        n_theta, n_phi = 2 * n_theta, 2 * n_phi
        cur = _sphere_integral(cfg, n_theta, n_phi)
        if abs(cur - prev) <= _QUAD_RTOL * abs(cur):
            value = cur
            break
        prev = cur
    if value is None:
        raise NumericFailureError(
            f"pattern quadrature did not converge for n_side={cfg.n_side}"
        )
    g0 = 4.0 * np.pi / value
    with _G0_LOCK:
        _G0_CACHE.setdefault(key, g0)
    return _G0_CACHE[key]


def gain(cfg: ArrayAntennaConfig, theta, phi):
    """Array gain at (theta, phi): normalization constant times the array factor.

    For zero phase shifts the maximum over the sphere sits at boresight and
    equals the normalization constant.
    """
    out = normalization_constant(cfg) * array_factor(cfg, theta, phi)
    return float(out) if np.ndim(out) == 0 else out
