import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose oracles.py to the suite


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_intrinsics(rng, width=None, height=None):
    from shape_eval.core import CameraIntrinsics

    w = width if width is not None else int(rng.integers(8, 64))
    h = height if height is not None else int(rng.integers(8, 64))
    return CameraIntrinsics(
        fx=float(rng.uniform(20, 500)),
        fy=float(rng.uniform(20, 500)),
        cx=float(rng.uniform(0, w - 1)),
        cy=float(rng.uniform(0, h - 1)),
        width=w,
        height=h,
    )


def random_depth(rng, k, fill=0.7):
    from shape_eval.core import DepthMap

    values = rng.uniform(0.2, 6.0, (k.height, k.width))
    mask = rng.random((k.height, k.width)) < fill
    return DepthMap(values, mask)


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
