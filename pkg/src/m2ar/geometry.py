"""Rigid-body pose math on plain float tuples.

Quaternions are ``(x, y, z, w)``. Vectors are ``(x, y, z)``. Everything is
pure Python so results are bit-reproducible across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

Vec3 = Tuple[float, float, float]
Quat = Tuple[float, float, float, float]

UNIT_TOLERANCE = 1e-9
# renormalize only once drift is measurable, so identity compositions stay exact
_RENORM_THRESHOLD = 1e-12

ZERO: Vec3 = (0.0, 0.0, 0.0)
ONE: Vec3 = (1.0, 1.0, 1.0)
IDENTITY_ROTATION: Quat = (0.0, 0.0, 0.0, 1.0)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def is_vec3(value) -> bool:
    return isinstance(value, tuple) and len(value) == 3 and all(map(_is_real, value))


def is_quat(value) -> bool:
    return isinstance(value, tuple) and len(value) == 4 and all(map(_is_real, value))


def quat_norm(q: Quat) -> float:
    return math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def is_unit(q: Quat, tol: float = UNIT_TOLERANCE) -> bool:
    return abs(quat_norm(q) - 1.0) <= tol


def normalize(q: Quat) -> Quat:
    n = quat_norm(q)
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    if abs(n - 1.0) <= _RENORM_THRESHOLD:
        return q
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def quat_mul(a: Quat, b: Quat) -> Quat:
    """Hamilton product ``a * b`` (apply ``b`` first, then ``a``)."""
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return (
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    )


def rotate(q: Quat, v: Vec3) -> Vec3:
    # v' = v + 2w(u x v) + 2u x (u x v); exact for the identity quaternion
    ux, uy, uz, w = q
    vx, vy, vz = v
    tx = 2.0 * (uy * vz - uz * vy)
    ty = 2.0 * (uz * vx - ux * vz)
    tz = 2.0 * (ux * vy - uy * vx)
    return (
        vx + w * tx + (uy * tz - uz * ty),
        vy + w * ty + (uz * tx - ux * tz),
        vz + w * tz + (ux * ty - uy * tx),
    )


def axis_angle(axis: Vec3, angle: float) -> Quat:
    """Unit quaternion for a rotation of ``angle`` radians about ``axis``."""
    n = math.sqrt(sum(c * c for c in axis))
    if n == 0.0:
        raise ValueError("rotation axis must be non-zero")
    s = math.sin(angle / 2.0) / n
    return (axis[0] * s, axis[1] * s, axis[2] * s, math.cos(angle / 2.0))


def _add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _mul(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] * b[0], a[1] * b[1], a[2] * b[2])


@dataclass(frozen=True)
class Pose:
    """Position (meters), unit rotation quaternion and positive scale."""

    position: Vec3 = ZERO
    rotation: Quat = IDENTITY_ROTATION
    scale: Vec3 = ONE

    def __post_init__(self):
        if not is_vec3(self.position):
            raise ValueError(f"position must be 3 finite reals, got {self.position!r}")
        if not is_quat(self.rotation) or not is_unit(self.rotation):
            raise ValueError(f"rotation must be a unit quaternion, got {self.rotation!r}")
        if not is_vec3(self.scale) or min(self.scale) <= 0:
            raise ValueError(f"scale components must be positive, got {self.scale!r}")

    @classmethod
    def identity(cls) -> "Pose":
        return IDENTITY

    def with_changes(self, position=None, rotation=None, scale=None) -> "Pose":
        return Pose(
            position=self.position if position is None else position,
            rotation=self.rotation if rotation is None else rotation,
            scale=self.scale if scale is None else scale,
        )


IDENTITY = Pose()


def compose(parent: Pose, local: Pose) -> Pose:
    """Express ``local`` (given in ``parent``'s frame) in the frame above ``parent``.

    Scale composes componentwise without shear correction, so with non-uniform
    scale and rotation only the position matches the full matrix product.
    """
    position = _add(parent.position, rotate(parent.rotation, _mul(parent.scale, local.position)))
    if local.rotation == IDENTITY_ROTATION:
        rotation = parent.rotation
    elif parent.rotation == IDENTITY_ROTATION:
        rotation = local.rotation
    else:
        rotation = normalize(quat_mul(parent.rotation, local.rotation))
    return Pose(position, rotation, _mul(parent.scale, local.scale))


def compose_chain(*poses: Pose) -> Pose:
    """Right fold ``p0 ∘ (p1 ∘ (... ∘ pn))``; positions agree with the matrix product."""
    if not poses:
        return IDENTITY
    result = poses[-1]
    for parent in reversed(poses[:-1]):
        result = compose(parent, result)
    return result


@dataclass(frozen=True)
class ChangeList:
    """Channels a statechange overwrites on an augmentation; ``None`` leaves a channel alone."""

    visible: Optional[bool] = None
    position: Optional[Vec3] = None
    rotation: Optional[Quat] = None
    scale: Optional[Vec3] = None

    def is_empty(self) -> bool:
        return self.visible is None and self.position is None and self.rotation is None and self.scale is None

    def is_complete(self) -> bool:
        return None not in (self.visible, self.position, self.rotation, self.scale)

    def problems(self) -> list[str]:
        """Describe channel values that could not be applied to a Pose."""
        out = []
        if self.visible is not None and not isinstance(self.visible, bool):
            out.append("visible must be a boolean")
        if self.position is not None and not is_vec3(self.position):
            out.append("position must be 3 finite reals")
        if self.rotation is not None and not (is_quat(self.rotation) and is_unit(self.rotation)):
            out.append("rotation must be a unit quaternion")
        if self.scale is not None and not (is_vec3(self.scale) and min(self.scale) > 0):
            out.append("scale components must be positive")
        return out
