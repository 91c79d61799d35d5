"""Rigid-body placement of array elements, distances and direction angles.

Rotations follow the ZYX intrinsic convention: ``Q = Rz(alpha) @ Ry(psi) @ Rx(phi)``
(yaw about z, pitch about y, roll about x). Every position is expressed in
meters in one global frame and every angle is in radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "DegenerateGeometryError",
    "EulerAngles",
    "Pose",
    "ArrayLayout",
    "Entity",
    "DirectionAngles",
    "rotation_matrix",
    "rotation_gradient",
    "element_position",
    "element_positions",
    "inter_element_distance",
    "distance_expansion",
    "unit_vector",
    "unit_vector_gradient",
    "direction_angles",
    "ura_layout",
    "far_field_distance",
    "far_field_phase",
    "aperture_diameter",
    "fraunhofer_distance",
    "is_near_field",
]


class DegenerateGeometryError(ValueError):
    """Raised when a direction or distance is undefined (coincident points, pole)."""


def _canonical_angle(a: float) -> float:
    # map to (-pi, pi]
    a = float(a)
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a}")
    w = math.remainder(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class EulerAngles:
    """Orientation angles ``[alpha, psi, phi]`` (yaw, pitch, roll) in radians.

    Values are canonicalized to (-pi, pi] on construction.
    """

    alpha: float = 0.0
    psi: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "psi", "phi"):
            object.__setattr__(self, name, _canonical_angle(getattr(self, name)))

    @classmethod
    def from_array(cls, a) -> "EulerAngles":
        a = np.asarray(a, dtype=float).reshape(3)
        return cls(*a)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.psi, self.phi])

    def __array__(self, dtype=None, copy=None):
        return self.as_array().astype(dtype) if dtype is not None else self.as_array()


def _as_angles(angles) -> np.ndarray:
    if isinstance(angles, EulerAngles):
        return angles.as_array()
    a = np.asarray(angles, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("orientation angles must be finite")
    return a


def _elementary(alpha, psi, phi):
    ca, sa = math.cos(alpha), math.sin(alpha)
    cp, sp = math.cos(psi), math.sin(psi)
    cr, sr = math.cos(phi), math.sin(phi)
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    # derivatives of each elementary rotation w.r.t. its own angle
    drz = np.array([[-sa, -ca, 0.0], [ca, -sa, 0.0], [0.0, 0.0, 0.0]])
    dry = np.array([[-sp, 0.0, cp], [0.0, 0.0, 0.0], [-cp, 0.0, -sp]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sr, -cr], [0.0, cr, -sr]])
    return rz, ry, rx, drz, dry, drx


def rotation_matrix(angles) -> np.ndarray:
    """Rotation matrix ``Rz(alpha) Ry(psi) Rx(phi)``.

    Parameters
    ----------
    angles : EulerAngles or array_like, shape (3,)

    Returns
    -------
    ndarray, shape (3, 3)
        Proper orthonormal matrix.
    """
    rz, ry, rx, *_ = _elementary(*_as_angles(angles))
    return rz @ ry @ rx


def rotation_gradient(angles) -> np.ndarray:
    """Partial derivatives of :func:`rotation_matrix`.

    Returns
    -------
    ndarray, shape (3, 3, 3)
        ``out[k]`` is the derivative w.r.t. the k-th angle (alpha, psi, phi).
    """
    rz, ry, rx, drz, dry, drx = _elementary(*_as_angles(angles))
    return np.stack([drz @ ry @ rx, rz @ dry @ rx, rz @ ry @ drx])


@dataclass(frozen=True)
class Pose:
    """Nominal position, misalignment offset and orientation of an entity."""

    nominal_position: np.ndarray
    misalignment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: EulerAngles = field(default_factory=EulerAngles)

    def __post_init__(self):
        p = np.asarray(self.nominal_position, dtype=float).reshape(3)
        x = np.asarray(self.misalignment, dtype=float).reshape(3)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(x))):
            raise ValueError("pose vectors must be finite")
        o = self.orientation
        if not isinstance(o, EulerAngles):
            o = EulerAngles.from_array(o)
        object.__setattr__(self, "nominal_position", p)
        object.__setattr__(self, "misalignment", x)
        object.__setattr__(self, "orientation", o)

    @property
    def position(self) -> np.ndarray:
        """Effective centroid ``p = p_nominal + xi``."""
        return self.nominal_position + self.misalignment

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.orientation)


@dataclass(frozen=True)
class ArrayLayout:
    """Element offsets relative to the entity centroid, in the local frame.

    Attributes
    ----------
    local_offsets : ndarray, shape (N, 3)
    normal : ndarray, shape (3,)
        Local broadside (unit) normal, rotated with the entity.
    """

    local_offsets: np.ndarray
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.local_offsets, dtype=float))
        if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] < 1:
            raise ValueError("local_offsets must have shape (N, 3) with N >= 1")
        n = np.asarray(self.normal, dtype=float).reshape(3)
        nn = np.linalg.norm(n)
        if nn == 0:
            raise ValueError("normal must be nonzero")
        object.__setattr__(self, "local_offsets", s)
        object.__setattr__(self, "normal", n / nn)

    @property
    def count(self) -> int:
        return self.local_offsets.shape[0]


@dataclass(frozen=True)
class Entity:
    """A posed array: BS, RIS or UE."""

    pose: Pose
    layout: ArrayLayout

    @property
    def position(self) -> np.ndarray:
        return self.pose.position

    @property
    def rotation(self) -> np.ndarray:
        return self.pose.rotation

    @property
    def count(self) -> int:
        return self.layout.count

    def offsets(self) -> np.ndarray:
        """Rotated offsets ``s_v = Q s~_v``, shape (N, 3)."""
        return self.layout.local_offsets @ self.rotation.T

    def elements(self) -> np.ndarray:
        """Global element positions, shape (N, 3)."""
        return self.position + self.offsets()

    def normal(self) -> np.ndarray:
        return self.rotation @ self.layout.normal


def element_position(pose: Pose, layout: ArrayLayout, v: int) -> np.ndarray:
    """Global position ``p_v = p~_V + xi_V + Q_V s~_v`` of element ``v``."""
    if not 0 <= v < layout.count:
        raise IndexError(f"element index {v} out of range for {layout.count} elements")
    return pose.position + pose.rotation @ layout.local_offsets[v]


def element_positions(pose: Pose, layout: ArrayLayout) -> np.ndarray:
    return pose.position + layout.local_offsets @ pose.rotation.T


def inter_element_distance(g, v) -> float:
    """Euclidean distance from point ``g`` to point ``v``."""
    return float(np.linalg.norm(np.asarray(v, dtype=float) - np.asarray(g, dtype=float)))


def distance_expansion(pose_g: Pose, s_g, pose_v: Pose, s_v) -> float:
    """Element-to-element distance from the six-term expansion of the squared norm.

    Splits the separation into nominal centroid offset, rotated element offsets
    and misalignment difference, and sums squares and cross terms. Used as an
    independent check of :func:`inter_element_distance`.
    """
    dp = pose_v.nominal_position - pose_g.nominal_position
    dq = pose_v.rotation @ np.asarray(s_v, float) - pose_g.rotation @ np.asarray(s_g, float)
    dx = pose_v.misalignment - pose_g.misalignment
    sq = dp @ dp + dq @ dq + dx @ dx + 2 * dp @ dx + 2 * dp @ dq + 2 * dq @ dx
    return math.sqrt(max(sq, 0.0))


def unit_vector(theta, phi) -> np.ndarray:
    """``[cos(phi) sin(theta), sin(phi) sin(theta), cos(theta)]``."""
    st = np.sin(theta)
    return np.array([np.cos(phi) * st, np.sin(phi) * st, np.cos(theta)])


def unit_vector_gradient(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of :func:`unit_vector` w.r.t. theta and phi."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    return (np.array([cp * ct, sp * ct, -st]), np.array([-sp * st, cp * st, 0.0]))


@dataclass(frozen=True)
class DirectionAngles:
    """Polar/azimuth angles, distance and unit vector of a point-to-point link."""

    theta: float
    phi: float
    distance: float
    unit_vector: np.ndarray

    @property
    def at_pole(self) -> bool:
        return self.theta == 0.0 or self.theta == math.pi


def direction_angles(frm, to) -> DirectionAngles:
    """Spherical description of the vector from ``frm`` to ``to``.

    theta lies in [0, pi] and phi in (-pi, pi]. At a pole phi is fixed to 0.

    Raises
    ------
    DegenerateGeometryError
        If the points coincide.
    """
    w = np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)
    d = float(np.linalg.norm(w))
    if d == 0.0:
        raise DegenerateGeometryError("coincident points have no direction")
    u = w / d
    theta = math.acos(min(1.0, max(-1.0, u[2])))
    rho = math.hypot(u[0], u[1])
    if rho == 0.0:
        phi = 0.0
        theta = 0.0 if u[2] > 0 else math.pi
    else:
        phi = math.atan2(u[1], u[0])
        if phi == -math.pi:
            phi = math.pi
        # recompute theta from both components for accuracy near the poles
        theta = math.atan2(rho, u[2])
    return DirectionAngles(theta, phi, d, unit_vector(theta, phi))


def ura_layout(rows: int, cols: int, spacing: float, normal=(0.0, 0.0, 1.0)) -> ArrayLayout:
    """Uniform rectangular array in the local xy-plane, centered on the origin.

    Rows run along local x and columns along local y.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    x = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    y = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    xx, yy = np.meshgrid(x, y, indexing="ij")
    s = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(rows * cols)])
    return ArrayLayout(s, np.asarray(normal, dtype=float))


def far_field_distance(g_entity: Entity, v_entity: Entity, g: int, v: int) -> float:
    """First-order distance ``d_GV + Delta_GV^T (s_v - s_g)``."""
    da = direction_angles(g_entity.position, v_entity.position)
    sg = g_entity.offsets()[g]
    sv = v_entity.offsets()[v]
    return da.distance + da.unit_vector @ (sv - sg)


def far_field_phase(g_entity: Entity, v_entity: Entity, g: int, v: int, wavelength: float) -> complex:
    """Phase factor ``exp(-j 2 pi d_approx / lambda)`` under the far-field expansion."""
    d = far_field_distance(g_entity, v_entity, g, v)
    return complex(np.exp(-2j * np.pi * d / wavelength))


def aperture_diameter(layout: ArrayLayout) -> float:
    """Largest distance between two elements of the layout."""
    s = layout.local_offsets
    if s.shape[0] < 2:
        return 0.0
    diff = s[:, None, :] - s[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def fraunhofer_distance(aperture: float, wavelength: float) -> float:
    """``2 D^2 / lambda``."""
    if aperture < 0 or not wavelength > 0:
        raise ValueError("aperture must be >= 0 and wavelength > 0")
    return 2.0 * aperture ** 2 / wavelength


def is_near_field(distance: float, aperture: float, wavelength: float) -> bool:
    """True when ``distance <= 2 D^2 / lambda``; the boundary counts as near-field.

    Ties are decided with a 1e-12 relative slack so that a boundary computed
    through rounded coordinates still classifies as near-field.
    """
    return distance <= fraunhofer_distance(aperture, wavelength) * (1.0 + 1e-12)
