"""Brute-force frame alignment between predicted and ground-truth clouds.

The candidate set is the 24 octahedral rotations, each swept in azimuth
about its own vertical axis (60 steps of 6 degrees by default, 1440
candidates). Candidates are scored by symmetric Chamfer on subsampled,
centered clouds; the winner is refined by point-to-point ICP with the
orthogonal Procrustes closed form. Reflections are excluded: mirror-flipped
predictions get no credit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy.spatial import cKDTree

from .core import PointCloud, RigidTransform

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def octahedral_rotations() -> np.ndarray:
    """The 24 rotational symmetries of the cube, in a fixed enumeration."""
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            if np.linalg.det(m) > 0:
                mats.append(m)
    return np.array(mats)


def _rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class AlignmentConfig:
    """Search and refinement knobs; defaults give 24 x 60 = 1440 candidates."""

    azimuth_step_deg: float = 6.0
    subsample: int = 1024
    refine_icp: bool = True
    max_iterations: int = 30
    tolerance: float = 1e-6
    allow_scale: bool = False
    seed: int = 0

    def rotation_grid(self) -> np.ndarray:
        """(K, 3, 3) candidates: base @ Rz(theta) = spin about each base's vertical."""
        steps = max(1, int(round(360.0 / self.azimuth_step_deg)))
        sweeps = [_rot_z(np.deg2rad(self.azimuth_step_deg * s)) for s in range(steps)]
        grid = np.array([b @ rz for b in octahedral_rotations() for rz in sweeps])
        if not np.allclose(
            np.einsum("kij,klj->kil", grid, grid), np.eye(3)[None], atol=1e-12
        ):
            raise AssertionError("rotation grid lost orthonormality")
        return grid

    def to_dict(self) -> dict:
        return {
            "azimuth_step_deg": self.azimuth_step_deg,
            "subsample": self.subsample,
            "refine_icp": self.refine_icp,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "allow_scale": self.allow_scale,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@njit(cache=True, parallel=True)
def _score_candidates(rotations, pred, gt):
    """Symmetric Chamfer of rot @ pred against gt, one value per candidate."""
    k = rotations.shape[0]
    n = pred.shape[0]
    m = gt.shape[0]
    out = np.empty(k)
    for ki in prange(k):
        rp = pred @ rotations[ki].T
        best_gt = np.full(m, np.inf)
        acc_pred = 0.0
        for i in range(n):
            best = np.inf
            for j in range(m):
                dx = rp[i, 0] - gt[j, 0]
                dy = rp[i, 1] - gt[j, 1]
                dz = rp[i, 2] - gt[j, 2]
                d = dx * dx + dy * dy + dz * dz
                if d < best:
                    best = d
                if d < best_gt[j]:
                    best_gt[j] = d
            acc_pred += np.sqrt(best)
        acc_gt = 0.0
        for j in range(m):
            acc_gt += np.sqrt(best_gt[j])
        out[ki] = 0.5 * acc_pred / n + 0.5 * acc_gt / m
    return out


def _symmetric_chamfer(a: np.ndarray, b: np.ndarray) -> float:
    ta = cKDTree(a)
    tb = cKDTree(b)
    return 0.5 * float(np.mean(tb.query(a, workers=-1)[0])) + 0.5 * float(
        np.mean(ta.query(b, workers=-1)[0])
    )


def procrustes_fit(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation and translation mapping src onto dst.

    Closed-form SVD solution with the det = +1 reflection guard.
    """
    sc = src.mean(axis=0)
    dc = dst.mean(axis=0)
    h = (src - sc).T @ (dst - dc)
    u, _, vt = np.linalg.svd(h)
    v = vt.T
    d = np.sign(np.linalg.det(v @ u.T))
    r = v @ np.diag([1.0, 1.0, d]) @ u.T
    return r, dc - r @ sc


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    converged: bool
    n_iterations: int
    objective: float
    objectives: tuple[float, ...] = field(default=())


def icp_refine(
    pred: PointCloud, gt: PointCloud, init: RigidTransform, cfg: AlignmentConfig
) -> IcpResult:
    """Point-to-point ICP from an initial transform; keeps the best iterate.

    Each iteration rematches nearest neighbors and re-solves the full
    Procrustes problem, so the mean squared objective never increases.
    """
    src = pred.points
    tree = cKDTree(gt.points)
    t = init
    best_t = init
    best_obj = np.inf
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        moved = t.apply(src)
        d, idx = tree.query(moved, workers=-1)
        obj = float(np.mean(d**2))
        history.append(obj)
        if obj < best_obj:
            best_obj = obj
            best_t = t
        if obj <= 1e-300 or (
            len(history) > 1
            and abs(history[-2] - obj) <= cfg.tolerance * max(history[-2], 1e-300)
        ):
            converged = True
            break
        r, tr = procrustes_fit(src, gt.points[idx])
        t = RigidTransform(rotation=r, translation=tr, scale=t.scale)
    return IcpResult(
        transform=best_t,
        converged=converged,
        n_iterations=it,
        objective=best_obj,
        objectives=tuple(history),
    )


@dataclass(frozen=True)
class AlignmentResult:
    transform: RigidTransform
    aligned_cd: float
    candidate_index: int
    refined: bool


def _subsample(points: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    if len(points) <= count:
        return points
    return points[np.sort(rng.choice(len(points), size=count, replace=False))]


def _golden_scale(apply_cd, lo: float = 0.5, hi: float = 2.0, iters: int = 40) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = apply_cd(c), apply_cd(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = apply_cd(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = apply_cd(d)
    return c if fc < fd else d


def align_frames(
    pred: PointCloud, gt: PointCloud, cfg: AlignmentConfig | None = None
) -> AlignmentResult:
    """Best transform from the prediction's frame onto ground truth.

    Both clouds are centered (and scale-matched when ``allow_scale``) before
    the rotation search; that pre-normalization is folded into the returned
    transform. ``aligned_cd`` is the symmetric Chamfer of the transformed
    prediction subsample against the ground-truth subsample.
    """
    cfg = cfg or AlignmentConfig()
    if len(pred) < 3 or len(gt) < 3:
        raise ValueError("alignment needs at least 3 points per cloud")
    cp = pred.points.mean(axis=0)
    cg = gt.points.mean(axis=0)
    pred_c = pred.points - cp
    gt_c = gt.points - cg
    sp = float(np.linalg.norm(pred_c, axis=1).max())
    sg = float(np.linalg.norm(gt_c, axis=1).max())
    if sp == 0.0 or sg == 0.0:
        raise ValueError("degenerate cloud: all points coincident")

    pre_scale = sg / sp if cfg.allow_scale else 1.0
    pred_c = pred_c * pre_scale

    rng = np.random.default_rng([cfg.seed, len(pred), len(gt)])
    pred_sub = _subsample(pred_c, cfg.subsample, rng)
    gt_sub = _subsample(gt_c, cfg.subsample, rng)

    rotations = cfg.rotation_grid()
    scores = _score_candidates(
        np.ascontiguousarray(rotations),
        np.ascontiguousarray(pred_sub),
        np.ascontiguousarray(gt_sub),
    )
    best_idx = int(np.argmin(scores))  # ties break toward the lowest index
    best_cd = float(scores[best_idx])
    rot = rotations[best_idx]
    shift = np.zeros(3)
    refined = False

    if cfg.refine_icp:
        init = RigidTransform(rotation=rot, translation=np.zeros(3))
        icp = icp_refine(PointCloud(pred_sub), PointCloud(gt_sub), init, cfg)
        aligned = icp.transform.apply(pred_sub)
        icp_cd = _symmetric_chamfer(aligned, gt_sub)
        if icp_cd < best_cd:
            best_cd = icp_cd
            rot = icp.transform.rotation
            shift = icp.transform.translation
            refined = True

    extra_scale = 1.0
    if cfg.allow_scale:
        base = pred_sub @ rot.T + shift

        def cd_at(s: float) -> float:
            return _symmetric_chamfer(s * base, gt_sub)

        candidate = _golden_scale(cd_at)
        if cd_at(candidate) < best_cd:
            extra_scale = candidate
            best_cd = cd_at(candidate)

    # fold centering, pre-scale, rotation, ICP shift, and scale refinement
    # into one original-frame transform: x -> s*R*x + t
    total_scale = pre_scale * extra_scale
    translation = cg + extra_scale * shift - total_scale * (rot @ cp)
    transform = RigidTransform(rotation=rot, translation=translation, scale=total_scale)

    pred_sub_orig = pred_sub / pre_scale + cp
    aligned_cd = _symmetric_chamfer(transform.apply(pred_sub_orig), gt_sub + cg)
    return AlignmentResult(
        transform=transform,
        aligned_cd=aligned_cd,
        candidate_index=best_idx,
        refined=refined,
    )
