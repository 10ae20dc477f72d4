"""Synthetic tendon-driven robot: construction, kinematics, and sampling.

The generated robot is a star of serial hinge-joint chains spreading from
a fixed base in the horizontal plane. Every joint carries antagonist
muscle pairs routed over straight via-point segments on either side of
the joint, plus optional polyarticular muscles spanning two adjacent
joints. Ground-truth groups are one per joint: all muscles crossing that
joint. Polyarticular muscles appear in both groups they cross and are
recorded in ``dual_memberships``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .datastore import Dataset
from .errors import ValidationError

WORLD = -1  # parent index / via-point link index for the fixed base

# Attachment geometry relative to link_length. Anchors sit on the +-45 degree
# diagonals of the joint (along-chain offset equal to the lateral lever),
# which keeps the length-vs-angle map strictly monotone over nearly the full
# half turn, so wide joint ranges stay antagonist-consistent. Levers are small
# relative to the links: same-joint muscles cluster tightly while distinct
# joints stay far apart compared to the default distance noise.
_LEVER_BASE = 0.08
_LEVER_STEP = 0.03
_POLY_LEVER = 0.12
_JITTER = 0.05

DEFAULT_JOINT_LIMIT = np.deg2rad(70)


@dataclass(frozen=True)
class Link:
    parent: int  # index of parent link, WORLD for the base
    offset: np.ndarray  # joint position in the parent frame, meters
    axis: np.ndarray  # hinge axis unit vector in the parent frame


@dataclass(frozen=True)
class MusclePath:
    id: int
    via_points: tuple[tuple[int, np.ndarray], ...]  # (link index, local xyz)


@dataclass(frozen=True)
class JointConfig:
    angles: np.ndarray


@dataclass(frozen=True)
class SynthSpec:
    chains: int = 4
    joints_per_chain: int = 3
    antagonist_pairs_per_joint: int = 1
    polyarticular_count: int = 4
    link_length: float = 1.5
    seed: int = 0

    @property
    def muscle_count(self) -> int:
        return (
            self.chains
            * self.joints_per_chain
            * 2
            * self.antagonist_pairs_per_joint
            + self.polyarticular_count
        )


@dataclass(frozen=True)
class RobotModel:
    links: tuple[Link, ...]
    joint_limits: tuple[tuple[float, float], ...]  # one (lo, hi) per link/joint
    muscles: tuple[MusclePath, ...]
    truth_groups: tuple[frozenset[int], ...]
    dual_memberships: dict[int, tuple[int, int]]

    def __post_init__(self):
        _validate_robot(self)

    @property
    def n_joints(self) -> int:
        return len(self.links)

    @property
    def n_muscles(self) -> int:
        return len(self.muscles)

    @property
    def muscle_ids(self) -> tuple[int, ...]:
        return tuple(m.id for m in self.muscles)


def _validate_robot(robot: RobotModel) -> None:
    n = len(robot.links)
    for i, link in enumerate(robot.links):
        if not (link.parent == WORLD or 0 <= link.parent < i):
            raise ValidationError(
                f"link {i} has parent {link.parent}; parents must precede children"
            )
    if len(robot.joint_limits) != n:
        raise ValidationError("one joint limit pair per link required")
    for i, (lo, hi) in enumerate(robot.joint_limits):
        if lo > hi:
            raise ValidationError(f"joint {i} limits inverted: [{lo}, {hi}]")
    ids = [m.id for m in robot.muscles]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate muscle ids")
    for m in robot.muscles:
        if len(m.via_points) < 2:
            raise ValidationError(f"muscle {m.id} needs at least 2 via points")
        links_touched = {li for li, _ in m.via_points}
        if len(links_touched) < 2:
            raise ValidationError(f"muscle {m.id} must touch at least 2 distinct links")
        for li, _ in m.via_points:
            if not (li == WORLD or 0 <= li < n):
                raise ValidationError(f"muscle {m.id} references unknown link {li}")
    membership: dict[int, list[int]] = {}
    for g, group in enumerate(robot.truth_groups):
        for mid in group:
            membership.setdefault(mid, []).append(g)
    for m in robot.muscles:
        groups = membership.get(m.id, [])
        if len(groups) == 1 and m.id not in robot.dual_memberships:
            continue
        if len(groups) == 2 and tuple(sorted(groups)) == tuple(
            sorted(robot.dual_memberships.get(m.id, ()))
        ):
            continue
        raise ValidationError(
            f"muscle {m.id} must be in exactly one truth group or two via dual_memberships"
        )


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    cross = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(axis, axis)


def build_synthetic_robot(spec: SynthSpec) -> RobotModel:
    """Construct the parameterized star-of-chains robot.

    Muscles are laid out joint by joint, pair by pair, with the two
    antagonist halves of each pair adjacent in id order (the muscle on the
    positive lateral side first: it shortens as its joint angle grows).
    Polyarticular muscles come last and span two adjacent joints of one
    chain, with relay points on the middle link. Attachment geometry gets
    a small seeded jitter so repeated builds differ only through the seed.
    """
    if spec.chains < 1 or spec.joints_per_chain < 1 or spec.antagonist_pairs_per_joint < 1:
        raise ValidationError("chains, joints_per_chain, and pairs must all be >= 1")
    if spec.polyarticular_count < 0:
        raise ValidationError("polyarticular_count must be >= 0")
    if spec.polyarticular_count > 0 and spec.joints_per_chain < 2:
        raise ValidationError("polyarticular muscles need chains of at least 2 joints")
    if spec.link_length <= 0:
        raise ValidationError("link_length must be positive")

    rng = np.random.default_rng(spec.seed)
    length = spec.link_length
    n_chains, n_joints = spec.chains, spec.joints_per_chain

    links: list[Link] = []
    limits: list[tuple[float, float]] = []
    for c in range(n_chains):
        phi = 2.0 * np.pi * c / n_chains
        u = np.array([np.cos(phi), np.sin(phi), 0.0])
        for j in range(n_joints):
            parent = WORLD if j == 0 else len(links) - 1
            links.append(Link(parent=parent, offset=length * u, axis=np.array([0.0, 0.0, 1.0])))
            limits.append((-DEFAULT_JOINT_LIMIT, DEFAULT_JOINT_LIMIT))

    muscles: list[MusclePath] = []
    groups: list[set[int]] = [set() for _ in range(n_chains * n_joints)]
    duals: dict[int, tuple[int, int]] = {}

    def jitter() -> float:
        return 1.0 + _JITTER * rng.uniform(-1.0, 1.0)

    for c in range(n_chains):
        phi = 2.0 * np.pi * c / n_chains
        u = np.array([np.cos(phi), np.sin(phi), 0.0])
        s = np.array([-np.sin(phi), np.cos(phi), 0.0])  # z-hat cross u
        for j in range(n_joints):
            link_idx = c * n_joints + j
            parent_idx = links[link_idx].parent
            joint_in_parent = links[link_idx].offset
            for k in range(spec.antagonist_pairs_per_joint):
                lever = (_LEVER_BASE + _LEVER_STEP * k) * length
                for side in (+1.0, -1.0):
                    a = lever * jitter()
                    b = lever * jitter()
                    h = side * lever * jitter()
                    proximal = (parent_idx, joint_in_parent - a * u + h * s)
                    distal = (link_idx, b * u + h * s)
                    mid = len(muscles)
                    muscles.append(MusclePath(id=mid, via_points=(proximal, distal)))
                    groups[link_idx].add(mid)

    if spec.polyarticular_count:
        slots = [
            (c, j)
            for j in range(n_joints - 1)
            for c in range(n_chains)
        ]
        for p in range(spec.polyarticular_count):
            c, j = slots[p % len(slots)]
            phi = 2.0 * np.pi * c / n_chains
            u = np.array([np.cos(phi), np.sin(phi), 0.0])
            s = np.array([-np.sin(phi), np.cos(phi), 0.0])
            first_link = c * n_joints + j
            second_link = first_link + 1
            parent_idx = links[first_link].parent
            h = (1 if p % 2 == 0 else -1) * _POLY_LEVER * length * jitter()
            a = _POLY_LEVER * length * jitter()
            b = _POLY_LEVER * length * jitter()
            proximal = (parent_idx, links[first_link].offset - a * u + h * s)
            relay = (first_link, 0.5 * length * u + h * s)
            distal = (second_link, b * u + h * s)
            mid = len(muscles)
            muscles.append(MusclePath(id=mid, via_points=(proximal, relay, distal)))
            groups[first_link].add(mid)
            groups[second_link].add(mid)
            duals[mid] = (first_link, second_link)

    return RobotModel(
        links=tuple(links),
        joint_limits=tuple(limits),
        muscles=tuple(muscles),
        truth_groups=tuple(frozenset(g) for g in groups),
        dual_memberships=duals,
    )


def default_robot(seed: int = 0) -> RobotModel:
    """The 28-muscle, 12-joint robot used as the package-wide default."""
    return build_synthetic_robot(SynthSpec(seed=seed))


def _angles(q) -> np.ndarray:
    if isinstance(q, JointConfig):
        q = q.angles
    return np.asarray(q, dtype=float)


def link_transforms(robot: RobotModel, q) -> list[tuple[np.ndarray, np.ndarray]]:
    """World (rotation, translation) per link for the joint configuration."""
    angles = _angles(q)
    if angles.shape != (robot.n_joints,):
        raise ValidationError(
            f"expected {robot.n_joints} joint angles, got shape {angles.shape}"
        )
    transforms: list[tuple[np.ndarray, np.ndarray]] = []
    for i, link in enumerate(robot.links):
        if link.parent == WORLD:
            pr, pt = np.eye(3), np.zeros(3)
        else:
            pr, pt = transforms[link.parent]
        rot = pr @ rotation_about_axis(link.axis, angles[i])
        trans = pt + pr @ link.offset
        transforms.append((rot, trans))
    return transforms


def forward_kinematics(robot: RobotModel, q) -> list[np.ndarray]:
    """World positions of each muscle's via points; one (n_via, 3) array per muscle."""
    transforms = link_transforms(robot, q)

    def world(li: int, p: np.ndarray) -> np.ndarray:
        if li == WORLD:
            return p
        r, t = transforms[li]
        return r @ p + t

    return [
        np.array([world(li, p) for li, p in m.via_points])
        for m in robot.muscles
    ]


def muscle_lengths(robot: RobotModel, q) -> np.ndarray:
    """Total piecewise-linear path length per muscle, meters."""
    points = forward_kinematics(robot, q)
    return np.array([
        np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)) for pts in points
    ])


def spread_pose(robot: RobotModel) -> np.ndarray:
    """Reference pose for spatial distances: every joint at its range midpoint."""
    return np.array([(lo + hi) / 2.0 for lo, hi in robot.joint_limits])


def _batch_rotation(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    c = np.cos(angles)[:, None, None]
    s = np.sin(angles)[:, None, None]
    x, y, z = axis
    cross = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(axis, axis)


def muscle_lengths_batch(robot: RobotModel, q_batch: np.ndarray) -> np.ndarray:
    """Muscle lengths for a whole (n, n_joints) batch of configurations at once."""
    q_batch = np.asarray(q_batch, dtype=float)
    if q_batch.ndim != 2 or q_batch.shape[1] != robot.n_joints:
        raise ValidationError(
            f"expected (n, {robot.n_joints}) joint angles, got shape {q_batch.shape}"
        )
    n = q_batch.shape[0]
    rots: list[np.ndarray] = []
    trans: list[np.ndarray] = []
    for i, link in enumerate(robot.links):
        local = _batch_rotation(link.axis, q_batch[:, i])
        if link.parent == WORLD:
            rots.append(local)
            trans.append(np.broadcast_to(link.offset, (n, 3)).copy())
        else:
            pr, pt = rots[link.parent], trans[link.parent]
            rots.append(pr @ local)
            trans.append(pt + pr @ link.offset)

    def world(li: int, p: np.ndarray) -> np.ndarray:
        if li == WORLD:
            return np.broadcast_to(p, (n, 3))
        return rots[li] @ p + trans[li]

    lengths = np.empty((n, robot.n_muscles))
    for m_idx, m in enumerate(robot.muscles):
        pts = [world(li, p) for li, p in m.via_points]
        total = np.zeros(n)
        for a, b in zip(pts[:-1], pts[1:]):
            total += np.linalg.norm(b - a, axis=1)
        lengths[:, m_idx] = total
    return lengths


def sample_random_postures(robot: RobotModel, n: int, seed: int) -> Dataset:
    """Muscle lengths at n independent uniform-random joint configurations.

    Rows are raw (un-normalized) lengths in meters; deterministic per seed.
    """
    if n < 1:
        raise ValidationError(f"need at least one sample, got n={n}")
    rng = np.random.default_rng(seed)
    lo = np.array([l for l, _ in robot.joint_limits])
    hi = np.array([h for _, h in robot.joint_limits])
    q_batch = rng.uniform(lo, hi, size=(n, robot.n_joints))
    values = muscle_lengths_batch(robot, q_batch)
    return Dataset(values=values, muscle_ids=robot.muscle_ids)


def muscle_path_center(points: np.ndarray, mode: str = "midpoint") -> np.ndarray:
    """Center of a piecewise-linear path.

    ``midpoint`` walks to half the total arc length (default; closer to a
    physical muscle-belly location); ``centroid`` averages the via points.
    """
    if mode == "centroid":
        return points.mean(axis=0)
    if mode != "midpoint":
        raise ValidationError(f"unknown center mode {mode!r}")
    seg = np.diff(points, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    total = float(seg_len.sum())
    if total == 0.0:
        return points[0]
    half = total / 2.0
    walked = 0.0
    for i, l in enumerate(seg_len):
        if walked + l >= half:
            frac = (half - walked) / l if l > 0 else 0.0
            return points[i] + frac * seg[i]
        walked += l
    return points[-1]


def spatial_distance_matrix(
    robot: RobotModel, reference=None, center_mode: str = "midpoint"
) -> np.ndarray:
    """Symmetric M x M matrix of distances between muscle-path centers.

    Centers are evaluated in the reference (spread) pose, by default every
    joint at its range midpoint.
    """
    q = spread_pose(robot) if reference is None else reference
    centers = np.array([
        muscle_path_center(pts, center_mode) for pts in forward_kinematics(robot, q)
    ])
    diff = centers[:, None, :] - centers[None, :, :]
    return np.linalg.norm(diff, axis=2)


def robot_to_json(robot: RobotModel) -> str:
    doc = {
        "links": [
            {"parent": l.parent, "offset": l.offset.tolist(), "axis": l.axis.tolist()}
            for l in robot.links
        ],
        "joint_limits": [list(lim) for lim in robot.joint_limits],
        "muscles": [
            {
                "id": m.id,
                "via_points": [[li, p.tolist()] for li, p in m.via_points],
            }
            for m in robot.muscles
        ],
        "truth_groups": [sorted(g) for g in robot.truth_groups],
        "dual_memberships": {str(k): list(v) for k, v in robot.dual_memberships.items()},
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def robot_from_json(text: str) -> RobotModel:
    doc = json.loads(text)
    return RobotModel(
        links=tuple(
            Link(
                parent=l["parent"],
                offset=np.asarray(l["offset"], dtype=float),
                axis=np.asarray(l["axis"], dtype=float),
            )
            for l in doc["links"]
        ),
        joint_limits=tuple((float(lo), float(hi)) for lo, hi in doc["joint_limits"]),
        muscles=tuple(
            MusclePath(
                id=m["id"],
                via_points=tuple((li, np.asarray(p, dtype=float)) for li, p in m["via_points"]),
            )
            for m in doc["muscles"]
        ),
        truth_groups=tuple(frozenset(g) for g in doc["truth_groups"]),
        dual_memberships={int(k): (v[0], v[1]) for k, v in doc["dual_memberships"].items()},
    )
