"""Kinematics for the 6-joint tabletop arm (5 arm joints + 1 gripper).

The arm is a 2.5-D chain: joint 0 rotates the whole plane about the
vertical axis, joints 1-3 are pitch joints acting in that plane, joint 4
is wrist roll and joint 5 the gripper.  The scripted policies keep the
hand pointing straight down, which makes the inverse kinematics a plain
two-link problem.
"""

from dataclasses import dataclass, field
import math

import numpy as np


class UnreachableWaypointError(Exception):
    """Raised when a cartesian target lies outside the arm's reach."""


@dataclass(frozen=True)
class ArmModel:
    link_lengths: tuple          # base height, upper, fore, hand, tool
    joint_limits: tuple          # six (lo, hi) pairs, radians
    max_joint_delta: float       # per-frame joint speed cap
    grasp_radius: float = 0.03

    def __post_init__(self):
        assert len(self.link_lengths) == 5 and all(l > 0 for l in self.link_lengths)
        assert len(self.joint_limits) == 6
        for lo, hi in self.joint_limits:
            assert lo < hi

    @property
    def limits_lo(self):
        return np.array([lo for lo, _ in self.joint_limits])

    @property
    def limits_hi(self):
        return np.array([hi for _, hi in self.joint_limits])

    @property
    def hand_length(self):
        return self.link_lengths[3] + self.link_lengths[4]

    def clamp(self, q):
        return np.clip(q, self.limits_lo, self.limits_hi)

    def in_limits(self, q, tol=1e-9):
        return bool(np.all(q >= self.limits_lo - tol) and np.all(q <= self.limits_hi + tol))

    def fk(self, q):
        """End-effector position (x, y, z) and yaw for joint vector q."""
        base_h, l1, l2, l3, l4 = self.link_lengths
        a1 = q[1]
        a2 = q[1] + q[2]
        a3 = q[1] + q[2] + q[3]
        r = l1 * math.sin(a1) + l2 * math.sin(a2) + (l3 + l4) * math.sin(a3)
        z = base_h + l1 * math.cos(a1) + l2 * math.cos(a2) + (l3 + l4) * math.cos(a3)
        x = r * math.sin(q[0])
        y = r * math.cos(q[0])
        return np.array([x, y, z]), q[0] + q[4]

    def ik(self, target, grip=0.0, roll=0.0):
        """Joint vector reaching cartesian target with the hand pointing down.

        Raises UnreachableWaypointError when the wrist point is outside the
        two-link workspace or the solution violates joint limits.
        """
        base_h, l1, l2, l3, l4 = self.link_lengths
        x, y, z = float(target[0]), float(target[1]), float(target[2])
        r = math.hypot(x, y)
        if r < 1e-6:
            raise UnreachableWaypointError("target on the base axis")
        q0 = math.atan2(x, y)
        # hand points down: wrist sits hand_length above the target
        u = r
        v = z + (l3 + l4) - base_h
        d2 = u * u + v * v
        cos_el = (d2 - l1 * l1 - l2 * l2) / (2 * l1 * l2)
        if not -1.0 <= cos_el <= 0.999:
            raise UnreachableWaypointError(f"target {target} outside reach")
        q2 = math.acos(cos_el)
        q1 = math.atan2(u, v) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
        q3 = math.pi - (q1 + q2)
        q = np.array([q0, q1, q2, q3, roll, grip])
        if not self.in_limits(q):
            raise UnreachableWaypointError(f"IK solution for {target} violates joint limits")
        return q

    def normalize(self, q):
        """Affine map of in-limit joints to [-100, 100] per joint."""
        q = np.asarray(q, dtype=np.float64)
        if not self.in_limits(q, tol=1e-7):
            raise ValueError("joint vector outside limits")
        lo, hi = self.limits_lo, self.limits_hi
        return (q - lo) / (hi - lo) * 200.0 - 100.0

    def denormalize(self, s):
        s = np.asarray(s, dtype=np.float64)
        lo, hi = self.limits_lo, self.limits_hi
        return (s + 100.0) / 200.0 * (hi - lo) + lo
