"""Pure rasterizer for the two camera views.

Both cameras are orthographic top-down drawings: the top camera covers
the whole workspace, the wrist camera a small window centered on the end
effector.  Output values are quantized to 8-bit levels so episodes can be
stored losslessly as uint8 and mapped back to the identical float image.
"""

import math

import numpy as np

from .tasks import default_registry

TABLE_COLOR = (0.82, 0.82, 0.80)
WRIST_BG = (0.70, 0.72, 0.74)
ARM_COLOR = (0.15, 0.15, 0.18)
EE_OPEN = (0.25, 0.25, 0.30)
EE_CLOSED = (0.05, 0.05, 0.08)


def _arm_joint_points(arm, q):
    """Planar (x, y) of base, shoulder, elbow, wrist and EE."""
    base_h, l1, l2, l3, l4 = arm.link_lengths
    a1 = q[1]
    a2 = q[1] + q[2]
    a3 = q[1] + q[2] + q[3]
    rs = [0.0,
          l1 * math.sin(a1),
          l1 * math.sin(a1) + l2 * math.sin(a2),
          l1 * math.sin(a1) + l2 * math.sin(a2) + (l3 + l4) * math.sin(a3)]
    s, c = math.sin(q[0]), math.cos(q[0])
    return [(r * s, r * c) for r in rs]


def _shade(color, z):
    """Height cue for the orthographic views: higher objects look brighter."""
    factor = 0.7 + 1.5 * min(max(z, 0.0), 0.2)
    return np.clip(np.asarray(color, dtype=np.float64) * factor, 0.0, 1.0)


def _paint_circle(img, xs, ys, cx, cy, radius, color):
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    img[mask] = color


def _paint_square(img, xs, ys, cx, cy, half, color):
    mask = (np.abs(xs - cx) <= half) & (np.abs(ys - cy) <= half)
    img[mask] = color


def render(scene, camera: str, resolution=(64, 64), registry=None):
    """RGB float array (H, W, 3) in [0, 1]; pure function of the inputs."""
    reg = registry or default_registry()
    task = reg[scene.task_id]
    H, W = resolution
    assert H > 0 and W > 0
    if camera == "top":
        x0, x1 = reg.workspace.x
        y0, y1 = reg.workspace.y
        bg = TABLE_COLOR
    elif camera == "wrist":
        ee = scene.ee_pos(reg)
        half = 0.09
        x0, x1 = ee[0] - half, ee[0] + half
        y0, y1 = ee[1] - half, ee[1] + half
        bg = WRIST_BG
    else:
        raise ValueError(f"unknown camera {camera!r}")

    img = np.empty((H, W, 3), dtype=np.float64)
    img[:] = bg
    # pixel-center world coordinates; row 0 is the far edge (max y)
    px = x0 + (np.arange(W) + 0.5) / W * (x1 - x0)
    py = y1 - (np.arange(H) + 0.5) / H * (y1 - y0)
    xs, ys = np.meshgrid(px, py)

    flagged = {obj for obj, _ in scene.flags}
    for name, tmpl in task.objects.items():
        pos = scene.objects[name]
        color = np.array(tmpl.color)
        if name in flagged:
            color = np.clip(color + 0.15, 0.0, 1.0)
        color = _shade(color, pos[2])
        if tmpl.shape == "square":
            _paint_square(img, xs, ys, pos[0], pos[1], tmpl.radius, color)
        else:
            _paint_circle(img, xs, ys, pos[0], pos[1], tmpl.radius, color)

    # arm links as sampled dots, end effector as a marker
    pts = _arm_joint_points(reg.arm, scene.q)
    link_r = 0.006 if camera == "top" else 0.004
    for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
        for f in np.linspace(0.0, 1.0, 24):
            _paint_circle(img, xs, ys, ax + f * (bx - ax), ay + f * (by - ay),
                          link_r, ARM_COLOR)
    ee = scene.ee_pos(reg)
    ee_color = _shade(EE_CLOSED if scene.gripper_closed else EE_OPEN, ee[2])
    _paint_circle(img, xs, ys, pts[-1][0], pts[-1][1], 0.011, ee_color)

    if scene.attached is not None:
        tmpl = task.objects[scene.attached]
        pos = scene.objects[scene.attached]
        _paint_circle(img, xs, ys, pos[0], pos[1], tmpl.radius,
                      _shade(tmpl.color, pos[2]))

    if scene.hand_present and scene.hand_pos is not None:
        _paint_circle(img, xs, ys, scene.hand_pos[0], scene.hand_pos[1],
                      reg.hand_radius, reg.hand_color)

    if camera == "top":
        # bench timer: a progress strip along the far edge fills up as the
        # demonstration runs (a visible classroom timer)
        frac = min(scene.t / 600.0, 1.0)
        col = int(round(frac * W))
        strip = max(2, H // 8)
        # the strip hue tracks elapsed time and the dark fill sweeps across
        img[:strip, :] = (frac, 0.9 - 0.8 * frac, 1.0 - frac)
        img[:strip, :col] = (0.05, 0.05, 0.05)

    # quantize to the uint8 grid so save/load round trips exactly
    img = np.round(img * 255.0) / 255.0
    return img.astype(np.float32)


def to_uint8(img):
    return np.round(np.asarray(img, dtype=np.float64) * 255.0).astype(np.uint8)


def from_uint8(arr):
    return (arr.astype(np.float64) / 255.0).astype(np.float32)
