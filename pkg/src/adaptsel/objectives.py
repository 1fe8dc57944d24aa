"""The four objective models: speed, accuracy, comfort, familiarity.

Raw score conventions: speed and comfort are non-positive (higher is better),
accuracy is a probability, familiarity a constant in [0, 1].  Normalization
maps everything onto [0, 1] via fixed theoretical bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .geometry import AngularPoint, Frame
from .scene import GRAVITY, ArmModel, ArmPosture

# Display-resolution floor for the smallest meaningful angular width.
MIN_TARGET_WIDTH = 0.05  # degrees

SQRT2 = math.sqrt(2.0)


def erf(x: float) -> float:
    """Error function via the Abramowitz-Stegun rational approximation.

    Max absolute error 1.5e-7; odd symmetry enforced explicitly.
    """
    if x < 0:
        return -erf(-x)
    t = 1.0 / (1.0 + 0.3275911 * x)
    poly = t * (
        0.254829592
        + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429)))
    )
    return 1.0 - poly * math.exp(-x * x)


@dataclass(frozen=True)
class EDModelParams:
    """Linear regressions of the endpoint distribution over (A, W, 1), degrees."""

    mu_coeffs: tuple[float, float, float] = (0.0, -0.1441, 0.2649)
    sigma_x_coeffs: tuple[float, float, float] = (0.0066, 0.1025, 0.2663)
    sigma_y_coeffs: tuple[float, float, float] = (0.0085, 0.0679, 0.1437)
    mu_sign: float = 1.0  # configurable overshoot/undershoot convention

    def mu(self, a: float, w: float) -> float:
        ca, cw, c0 = self.mu_coeffs
        return self.mu_sign * (ca * a + cw * w + c0)

    def sigma_x(self, a: float, w: float) -> float:
        ca, cw, c0 = self.sigma_x_coeffs
        return ca * a + cw * w + c0

    def sigma_y(self, a: float, w: float) -> float:
        ca, cw, c0 = self.sigma_y_coeffs
        return ca * a + cw * w + c0


def score_speed(a: float, w: float) -> float:
    """Negated index of difficulty: -log2(A/W + 1)."""
    if w <= 0:
        raise ValueError("width must be positive for a selectable region")
    return -math.log2(a / w + 1.0)


def _erf_array(x: np.ndarray) -> np.ndarray:
    """Vectorized counterpart of erf, same rational approximation."""
    ax = np.abs(x)
    t = 1.0 / (1.0 + 0.3275911 * ax)
    poly = t * (
        0.254829592
        + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429)))
    )
    val = 1.0 - poly * np.exp(-ax * ax)
    return np.where(x < 0, -val, val)


def score_speed_batch(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """score_speed over parallel amplitude/width arrays."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("width must be positive for a selectable region")
    return -np.log2(a / w + 1.0)


def score_accuracy_batch(
    a: np.ndarray, w: np.ndarray, boxes: np.ndarray, params: EDModelParams
) -> np.ndarray:
    """score_accuracy over parallel (A, W, box) arrays; boxes shaped (n, 4)."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
    ca, cw, c0 = params.mu_coeffs
    mu = params.mu_sign * (ca * a + cw * w + c0)
    ca, cw, c0 = params.sigma_x_coeffs
    sx = ca * a + cw * w + c0
    ca, cw, c0 = params.sigma_y_coeffs
    sy = ca * a + cw * w + c0
    if np.any(sx <= 0) or np.any(sy <= 0):
        raise ValueError("endpoint deviations must be positive")
    px = 0.5 * np.abs(
        _erf_array((boxes[:, 1] - mu) / (SQRT2 * sx))
        - _erf_array((boxes[:, 0] - mu) / (SQRT2 * sx))
    )
    py = 0.5 * np.abs(
        _erf_array(boxes[:, 2] / (SQRT2 * sy)) - _erf_array(boxes[:, 3] / (SQRT2 * sy))
    )
    return px * py


def score_accuracy(
    a: float, w: float, box: tuple[float, float, float, float], params: EDModelParams
) -> float:
    """Probability mass of the endpoint distribution over the activation box.

    The bivariate normal has mean (mu, 0) and deviations (sigma_x, sigma_y)
    in the movement-aligned frame at the aim center; the closed form is the
    product of two one-dimensional error-function differences, taken so the
    result is the non-negative rectangle mass regardless of label order.
    """
    x1, x2, y1, y2 = box
    mu = params.mu(a, w)
    sx = params.sigma_x(a, w)
    sy = params.sigma_y(a, w)
    if sx <= 0 or sy <= 0:
        raise ValueError("endpoint deviations must be positive")
    px = 0.5 * abs(erf((x2 - mu) / (SQRT2 * sx)) - erf((x1 - mu) / (SQRT2 * sx)))
    py = 0.5 * abs(erf(y1 / (SQRT2 * sy)) - erf(y2 / (SQRT2 * sy)))
    return px * py


def arm_center_of_mass(posture: ArmPosture, arm: ArmModel) -> np.ndarray:
    """Mass-weighted center of mass of upper arm + forearm + hand."""
    upper_dir = geo.normalize(posture.elbow - posture.shoulder)
    fore_dir = geo.normalize(posture.hand - posture.elbow)
    com_upper = posture.shoulder + arm.upper_arm.com_offset * upper_dir
    com_fore = posture.elbow + arm.forearm.com_offset * fore_dir
    # The hand segment extends beyond the wrist along the forearm direction.
    com_hand = posture.hand + arm.hand.com_offset * fore_dir
    total = arm.total_mass
    return (
        arm.upper_arm.mass * com_upper
        + arm.forearm.mass * com_fore
        + arm.hand.mass * com_hand
    ) / total


def shoulder_torque(posture: ArmPosture, arm: ArmModel) -> float:
    """Magnitude of the gravitational torque about the shoulder (N*m)."""
    r = arm_center_of_mass(posture, arm) - posture.shoulder
    return float(np.linalg.norm(np.cross(r, arm.total_mass * GRAVITY)))


def _slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    dot = float(np.clip(np.dot(a, b), -1.0, 1.0))
    theta = math.acos(dot)
    if theta < 1e-12:
        return a
    s = math.sin(theta)
    return (math.sin((1 - t) * theta) / s) * a + math.sin(t * theta) / s * b


def sweep_directions(
    current_dir: np.ndarray, aim_dir: np.ndarray, beta: float
) -> np.ndarray:
    """Forearm directions sampled at beta-degree steps, inclusive of both ends."""
    dot = float(np.clip(np.dot(current_dir, aim_dir), -1.0, 1.0))
    total = math.degrees(math.acos(dot))
    if total < 1e-9:
        return np.asarray([current_dir])
    steps = np.arange(int(total / beta) + 1) * beta
    if total - steps[-1] > 1e-9:
        steps = np.append(steps, total)
    theta = math.radians(total)
    s = math.sin(theta)
    ts = steps / total
    return (
        np.sin((1 - ts) * theta)[:, None] * current_dir + np.sin(ts * theta)[:, None] * aim_dir
    ) / s


def score_comfort(
    posture: ArmPosture,
    frame: Frame,
    aim_center: AngularPoint,
    arm: ArmModel,
    beta: float = 1.0,
) -> float:
    """Negated sum of shoulder torques along the rotation toward the aim center.

    The forearm rotates about the fixed elbow from the current pointing
    direction to the aim direction in beta-degree increments; each sampled
    posture contributes its torque.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    aim_dir = geo.angular_to_direction(frame, aim_center.h, aim_center.v)
    dirs = sweep_directions(frame.forward, aim_dir, beta)
    # The combined CoM is affine in the forearm direction, so the whole sweep
    # reduces to one batched cross product.
    upper_dir = geo.normalize(posture.elbow - posture.shoulder)
    com_upper = posture.shoulder + arm.upper_arm.com_offset * upper_dir
    m_u, m_f, m_h = arm.upper_arm.mass, arm.forearm.mass, arm.hand.mass
    total_mass = arm.total_mass
    base = (m_u * com_upper + (m_f + m_h) * posture.elbow) / total_mass
    coeff = (m_f * arm.forearm.com_offset + m_h * (arm.forearm.length + arm.hand.com_offset)) / total_mass
    r = base - posture.shoulder + coeff * dirs
    g = total_mass * GRAVITY
    tx = r[:, 1] * g[2] - r[:, 2] * g[1]
    ty = r[:, 2] * g[0] - r[:, 0] * g[2]
    tz = r[:, 0] * g[1] - r[:, 1] * g[0]
    return -float(np.sum(np.sqrt(tx * tx + ty * ty + tz * tz)))


def score_comfort_batch(
    posture: ArmPosture,
    frame: Frame,
    aim_centers: np.ndarray,
    arm: ArmModel,
    beta: float = 1.0,
) -> np.ndarray:
    """score_comfort for many aim centers (K, 2) of (h, v) degrees at once."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    aim_centers = np.asarray(aim_centers, dtype=float).reshape(-1, 2)
    if len(aim_centers) == 0:
        return np.zeros(0)
    hr = np.radians(aim_centers[:, 0])
    vr = np.radians(aim_centers[:, 1])
    horiz = np.cos(vr)
    aim_dirs = (
        (horiz * np.sin(hr))[:, None] * frame.right
        + np.sin(vr)[:, None] * frame.up
        + (horiz * np.cos(hr))[:, None] * frame.forward
    )
    dots = np.clip(aim_dirs @ frame.forward, -1.0, 1.0)
    totals = np.degrees(np.arccos(dots))

    # Shared sweep construction: every target gets inclusive beta-degree
    # steps from the current direction toward its own aim direction.
    counts = np.where(totals < 1e-9, 1, (totals / beta).astype(int) + 1)
    remainder = (totals >= 1e-9) & (totals - (counts - 1) * beta > 1e-9)
    counts = counts + remainder
    offsets = np.concatenate([[0], np.cumsum(counts)])
    seg = np.repeat(np.arange(len(counts)), counts)
    steps = (np.arange(offsets[-1]) - offsets[seg]) * beta
    steps[offsets[1:][remainder] - 1] = totals[remainder]
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.radians(totals)
        s = np.sin(theta)
        ts = np.where(totals[seg] < 1e-9, 0.0, steps / totals[seg])
        wa = np.where(s[seg] > 0, np.sin((1 - ts) * theta[seg]) / s[seg], 1.0)
        wb = np.where(s[seg] > 0, np.sin(ts * theta[seg]) / s[seg], 0.0)
    dirs = wa[:, None] * frame.forward + wb[:, None] * aim_dirs[seg]

    upper_dir = geo.normalize(posture.elbow - posture.shoulder)
    com_upper = posture.shoulder + arm.upper_arm.com_offset * upper_dir
    m_u, m_f, m_h = arm.upper_arm.mass, arm.forearm.mass, arm.hand.mass
    total_mass = arm.total_mass
    base = (m_u * com_upper + (m_f + m_h) * posture.elbow) / total_mass
    coeff = (m_f * arm.forearm.com_offset + m_h * (arm.forearm.length + arm.hand.com_offset)) / total_mass
    r = base - posture.shoulder + coeff * dirs
    g = total_mass * GRAVITY
    tx = r[:, 1] * g[2] - r[:, 2] * g[1]
    ty = r[:, 2] * g[0] - r[:, 0] * g[2]
    tz = r[:, 0] * g[1] - r[:, 1] * g[0]
    tau = np.sqrt(tx * tx + ty * ty + tz * tz)
    return -np.add.reduceat(tau, offsets[:-1])


# --- familiarity and normalization ----------------------------------------

APPLICATION_FAMILIARITY = {"RayCasting": 0.57, "StickyRay": 0.33, "RayCursor": 0.1}
STUDY_FAMILIARITY = {"StickyRay": 0.7, "RayCursor": 0.3}


def score_familiarity(technique: str, table: dict[str, float]) -> float:
    try:
        return table[technique]
    except KeyError:
        raise KeyError(f"no familiarity constant configured for {technique!r}") from None


@dataclass(frozen=True)
class Bounds:
    s_min: float
    s_max: float

    def __post_init__(self):
        if not self.s_min < self.s_max:
            raise ValueError("s_min must be < s_max")

    def apply(self, raw: float) -> float:
        return min(1.0, max(0.0, (raw - self.s_min) / (self.s_max - self.s_min)))


@dataclass(frozen=True)
class NormalizationBounds:
    speed: Bounds
    accuracy: Bounds
    comfort: Bounds
    familiarity: Bounds


def max_horizontal_torque(arm: ArmModel) -> float:
    """Torque with the arm fully extended horizontally (worst static pose)."""
    reach_dir = np.array([0.0, 0.0, 1.0])
    shoulder = np.zeros(3)
    posture = ArmPosture(
        shoulder=shoulder,
        elbow=shoulder + arm.upper_arm.length * reach_dir,
        hand=shoulder + arm.reach * reach_dir,
    )
    return shoulder_torque(posture, arm)


def default_bounds(
    r_c: float = 20.0, beta: float = 1.0, arm: ArmModel | None = None
) -> NormalizationBounds:
    """Theoretical per-objective limits for min-max normalization.

    Speed: hardest case is the smallest displayable width at the cone rim.
    Comfort: the most strenuous pose held over the longest in-cone sweep.
    """
    arm = arm or ArmModel()
    t_max = max_horizontal_torque(arm)
    return NormalizationBounds(
        speed=Bounds(-math.log2(r_c / MIN_TARGET_WIDTH + 1.0), 0.0),
        accuracy=Bounds(0.0, 1.0),
        comfort=Bounds(-t_max * (r_c / beta + 1.0), 0.0),
        familiarity=Bounds(0.0, 1.0),
    )
