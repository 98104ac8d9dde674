"""
Pose composition
================

Poses compose as translate * rotate * scale. With uniform scale the result
equals the 4x4 matrix product; with non-uniform scale only the position is
exact, because a pose has no room for shear.
"""

import math

import numpy as np

from m2ar import Pose, compose
from m2ar.geometry import axis_angle, compose_chain


def matrix(p):
    x, y, z, w = p.rotation
    r = np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
    m = np.eye(4)
    m[:3, :3] = r @ np.diag(p.scale)
    m[:3, 3] = p.position
    return m


quarter = axis_angle((0.0, 0.0, 1.0), math.pi / 2)
marker = Pose(position=(1.0, 0.0, 0.0), rotation=quarter, scale=(2.0, 2.0, 2.0))
brick = Pose(position=(0.5, 0.0, 0.0))

world = compose(marker, brick)
print("world position:", np.round(world.position, 12))
print("matrix agrees:", np.allclose(matrix(world), matrix(marker) @ matrix(brick), atol=1e-12))

# non-uniform scale: the fold from the leaf upwards keeps positions exact
squash = Pose(scale=(1.0, 3.0, 1.0))
turn = Pose(rotation=quarter)
leaf = Pose(position=(1.0, 0.0, 0.0))
chain = compose_chain(squash, turn, leaf)
print("chain position:", np.round(chain.position, 12))
print("matrix position:", np.round((matrix(squash) @ matrix(turn) @ matrix(leaf))[:3, 3], 12))
