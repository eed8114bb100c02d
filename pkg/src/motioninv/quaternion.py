"""Quaternion helpers.

Quaternions are plain numpy arrays ordered ``[w, x, y, z]``. Every function
accepts a single quaternion of shape ``(4,)`` or a stack of shape ``(..., 4)``.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

ORTHO_TOL = 1e-3


def quat_mul(a, b):
    """Hamilton product ``a ⊛ b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def quat_to_rotmat(q):
    q = quat_normalize(q)
    w, x, y, z = np.moveaxis(q, -1, 0)
    R = np.stack(
        [
            1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
            2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
        ],
        axis=-1,
    )
    return R.reshape(q.shape[:-1] + (3, 3))


def quat_rotate(q, v):
    """Rotate vector(s) ``v`` by quaternion(s) ``q``."""
    v = np.asarray(v, dtype=float)
    q = np.asarray(q, dtype=float)
    u = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_distance(a, b):
    """Distance between rotations, insensitive to the double cover."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.minimum(np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1))


def rotation_residual(R):
    """Max-abs orthonormality residual ``|RᵀR − I|``."""
    R = np.asarray(R, dtype=float)
    eye = np.eye(3)
    return np.max(np.abs(np.swapaxes(R, -1, -2) @ R - eye), axis=(-2, -1))


def check_rotation(R, tol=ORTHO_TOL):
    """Raise ValidationError unless ``R`` is a proper rotation within ``tol``."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValidationError(f"rotation block must be 3x3, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValidationError("rotation block contains non-finite values")
    res = rotation_residual(R)
    if res > tol:
        raise ValidationError(f"rotation block not orthonormal (residual {res:.3g} > {tol:g})")
    det = np.linalg.det(R)
    if det <= 0:
        raise ValidationError(f"rotation block has determinant {det:.3g} (reflection)")


def rotmat_to_quat(R, tol=ORTHO_TOL):
    """Convert a rotation matrix to a unit quaternion with ``w >= 0``.

    Uses Shepperd's branch selection on the largest diagonal term so the
    square root never operates near zero.
    """
    R = np.asarray(R, dtype=float)
    check_rotation(R, tol)
    m00, m01, m02 = R[0]
    m10, m11, m12 = R[1]
    m20, m21, m22 = R[2]
    tr = m00 + m11 + m22
    diag = (tr, m00, m11, m22)
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = np.array([0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s])
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + m00 - m11 - m22)
        q = np.array([(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s])
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + m11 - m00 - m22)
        q = np.array([(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + m22 - m00 - m11)
        q = np.array([(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def hemisphere_align(qs):
    """Flip signs so consecutive quaternions have non-negative dot products.

    The first quaternion is kept as given; each following one is negated when
    it points into the opposite hemisphere of its (already aligned)
    predecessor. The represented rotations are unchanged.
    """
    qs = np.array(qs, dtype=float, copy=True)
    if qs.ndim != 2 or len(qs) < 2:
        return qs
    # flipping q[i-1] flips the sign of dot(q[i], q[i-1]), so signs accumulate
    dots = np.einsum("ij,ij->i", qs[1:], qs[:-1])
    steps = np.where(dots < 0, -1.0, 1.0)
    signs = np.concatenate([[1.0], np.cumprod(steps)])
    return qs * signs[:, None]


def random_quaternions(rng, n):
    """Uniformly distributed unit quaternions (Shoemake)."""
    u1, u2, u3 = rng.random((3, n))
    a = np.sqrt(1 - u1)
    b = np.sqrt(u1)
    q = np.stack(
        [
            b * np.cos(2 * np.pi * u3),
            a * np.sin(2 * np.pi * u2),
            a * np.cos(2 * np.pi * u2),
            b * np.sin(2 * np.pi * u3),
        ],
        axis=-1,
    )
    return q
