"""Labeled task-space dataset generation.

Two strategies: FK sampling (draw joint vectors uniformly within limits,
discard self-collisions, keep the encoded end-effector poses; positives
only) and IK sampling (draw poses uniformly in a bounding box and label
by IK success).  Footstep sampling is IK sampling of the swing-foot pose
relative to the stance foot, labeled by whole-leg-pair IK with the waist
anchored on the stance foot, the swing foot, or their midpoint.

Every sample draws from its own RNG stream derived from the master seed,
so regeneration is bit-for-bit reproducible and order-independent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .geometry import SE2, Pose, TaskSpace, compose, encode, inverse, wrap_angle
from .kinematics import IkOptions, SerialChain, fk, self_collision, solve_ik


class SamplingError(RuntimeError):
    pass


@dataclass
class SampleSet:
    space: TaskSpace
    inputs: np.ndarray  # (L, M_x) encoded points
    labels: np.ndarray  # (L,) entries in {-1, +1}
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.inputs.ndim != 2 or self.inputs.shape[1] != self.space.input_dim:
            raise ValueError(
                f"inputs must be (L, {self.space.input_dim}), got {self.inputs.shape}")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be +-1")
        if len(self.labels) != len(self.inputs):
            raise ValueError("inputs and labels length mismatch")

    def __len__(self):
        return len(self.labels)


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, index)))


def sample_fk(chain: SerialChain, count: int, seed: int) -> SampleSet:
    """FK-based sampling: uniform joint draws within limits, self-colliding
    draws replaced; all labels +1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = chain.lower, chain.upper
    rows = np.empty((count, chain.space.input_dim))
    max_attempts_per_sample = 1000
    for i in range(count):
        rng = _sample_rng(seed, i)
        for attempt in range(max_attempts_per_sample):
            q = rng.uniform(lo, hi)
            if not self_collision(chain, q):
                break
        else:
            raise SamplingError(
                f"FK sampling rejection rate above 99%: sample {i} rejected "
                f"{max_attempts_per_sample} consecutive draws (self-collision)")
        rows[i] = encode(fk(chain, q))
    meta = {"chain": chain.name, "method": "fk", "seed": int(seed),
            "count": int(count), "space": chain.space.kind}
    return SampleSet(chain.space, rows, np.ones(count, dtype=int), meta)


def _uniform_pose(space: TaskSpace, bounds, rng) -> Pose:
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    v = rng.uniform(lo, hi)
    if space.kind == "SE2":
        # angle dimension drawn uniformly over (-pi, pi] regardless of bounds
        v[2] = wrap_angle(rng.uniform(-np.pi, np.pi))
    return Pose(space, tuple(v))


def workspace_bounds(chain: SerialChain, inflate: float = 0.1):
    """Bounding box of the FK workspace, inflated by the given fraction.

    Default IK-sampling region; the inflation guarantees negatives near
    the boundary.
    """
    reach = sum(np.linalg.norm(j.offset_xyz) for j in chain.joints)
    base = np.array(chain.base_pose.coords[:2 if chain.space.kind in ("R2", "SE2") else 3])
    r = reach * (1.0 + inflate)
    bounds = [(float(c - r), float(c + r)) for c in base]
    if chain.space.kind == "SE2":
        bounds.append((-np.pi, np.pi))
    return bounds


def sample_ik(chain: SerialChain, bounds, count: int, seed: int,
              ik_opts: IkOptions = IkOptions()) -> SampleSet:
    """IK-based sampling: uniform poses in bounds, labeled by IK success.

    bounds must enclose the reachable region (caller's responsibility).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rows = np.empty((count, chain.space.input_dim))
    labels = np.empty(count, dtype=int)
    for i in range(count):
        rng = _sample_rng(seed, i)
        pose = _uniform_pose(chain.space, bounds, rng)
        opts = dataclasses.replace(ik_opts, rng_seed=int(rng.integers(2 ** 31)))
        q = solve_ik(chain, pose, opts)
        rows[i] = encode(pose)
        labels[i] = 1 if q is not None else -1
    meta = {"chain": chain.name, "method": "ik", "seed": int(seed),
            "count": int(count), "space": chain.space.kind,
            "bounds": [list(b) for b in bounds],
            "n_positive": int(np.sum(labels == 1)),
            "n_negative": int(np.sum(labels == -1))}
    return SampleSet(chain.space, rows, labels, meta)


# ---------------------------------------------------------------------------
# Footstep (leg-pair) sampling


def _midpoint_pose(a: Pose, b: Pose) -> Pose:
    dt = wrap_angle(b.coords[2] - a.coords[2])
    return Pose(SE2, (0.5 * (a.coords[0] + b.coords[0]),
                      0.5 * (a.coords[1] + b.coords[1]),
                      wrap_angle(a.coords[2] + 0.5 * dt)))


def legpair_reachable(leg: SerialChain, stance: Pose, swing: Pose,
                      ik_opts: IkOptions, _memo=None) -> bool:
    """True iff some waist anchor (stance foot, swing foot, midpoint) lets
    the leg chain reach both feet."""
    anchors = (_midpoint_pose(stance, swing), stance, swing)
    for waist in anchors:
        ok = True
        for foot in (stance, swing):
            rel = compose(inverse(waist), foot)
            key = tuple(np.round(rel.coords, 12))
            if _memo is not None and key in _memo:
                reachable = _memo[key]
            else:
                reachable = solve_ik(leg, rel, ik_opts) is not None
                if _memo is not None:
                    _memo[key] = reachable
            if not reachable:
                ok = False
                break
        if ok:
            return True
    return False


def sample_footsteps(leg: SerialChain, bounds, count: int, seed: int,
                     ik_opts: IkOptions = IkOptions(restarts=20)) -> SampleSet:
    """SE2 swing-foot-relative-to-stance sampling labeled by leg-pair IK."""
    if leg.space.kind != "SE2":
        raise ValueError("footstep sampling requires an SE2 leg chain")
    stance = Pose.identity(SE2)
    rows = np.empty((count, 4))
    labels = np.empty(count, dtype=int)
    memo: dict = {}
    for i in range(count):
        rng = _sample_rng(seed, i)
        swing = _uniform_pose(SE2, bounds, rng)
        opts = dataclasses.replace(ik_opts, rng_seed=int(rng.integers(2 ** 31)))
        rows[i] = encode(swing)
        labels[i] = 1 if legpair_reachable(leg, stance, swing, opts, memo) else -1
    meta = {"chain": leg.name, "method": "footstep-ik", "seed": int(seed),
            "count": int(count), "space": "SE2",
            "bounds": [list(b) for b in bounds],
            "n_positive": int(np.sum(labels == 1)),
            "n_negative": int(np.sum(labels == -1))}
    return SampleSet(SE2, rows, labels, meta)


# ---------------------------------------------------------------------------
# CSV round trip


def save_samples(samples: SampleSet, path):
    """CSV: header line space,method,seed,count; then x1..xMx,label rows."""
    with open(path, "w") as f:
        f.write("space,method,seed,count\n")
        f.write("{},{},{},{}\n".format(samples.space.kind,
                                       samples.meta.get("method", "unknown"),
                                       samples.meta.get("seed", 0),
                                       len(samples)))
        for row, label in zip(samples.inputs, samples.labels):
            f.write(",".join("%.17g" % v for v in row) + ",%d\n" % label)


def load_samples(path) -> SampleSet:
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header != ["space", "method", "seed", "count"]:
            raise ValueError(f"unexpected sample CSV header: {header}")
        kind, method, seed, count = f.readline().strip().split(",")
        space = TaskSpace(kind)
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    inputs, labels = data[:, :-1], data[:, -1].astype(int)
    meta = {"method": method, "seed": int(seed), "count": int(count),
            "space": kind}
    return SampleSet(space, inputs, labels, meta)
