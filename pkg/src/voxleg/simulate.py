"""Surrogate torque evaluation of a voxelized tibia walking one step.

A three-joint kinematic chain (coxa yaw, femur and tibia pitch) drives the
voxel grid through a 3000-step trajectory: step-down, sweep across, step-up.
Surface voxels moving below the medium surface feel a resistive force
(depth-proportional for soil and gravel, quadratic drag for fluid); gravity
loads every occupied voxel.  Fitness is the reciprocal of mean combined
joint torque, penalized by the occupied-voxel percentage:

    f = 1 / (T + T * delta / 5)

where T is mean torque in Nm over the trajectory and delta is the occupancy
percentage in [0, 100].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from voxleg.voxels import EmptyGridError, VoxelGrid, occupancy_percentage

STANDARD_GRAVITY = 9.81  # m/s^2


class OutOfRangeError(ValueError):
    """Step index outside the trajectory."""


class InvalidLegError(ValueError):
    """Grid is empty or produces no torque at all."""


@dataclass(frozen=True)
class LegRig:
    """Leg geometry and material; lengths in mm, density in g/cm^3."""

    coxa_length: float = 50.0
    femur_length: float = 80.0
    material_density: float = 1.04
    gravity: float = STANDARD_GRAVITY

    def __post_init__(self) -> None:
        if self.coxa_length <= 0 or self.femur_length <= 0:
            raise ValueError("segment lengths must be positive")

    def voxel_mass_kg(self, voxel_size_mm: float) -> float:
        # g/cm^3 == 1000 kg/m^3; voxel volume in m^3 is (size/1000)^3
        return self.material_density * 1000.0 * (voxel_size_mm / 1000.0) ** 3


@dataclass(frozen=True)
class StepTrajectory:
    """Three equal phases; defaults give 3000 steps of 1 ms."""

    n_steps: int = 3000
    dt: float = 0.001

    def __post_init__(self) -> None:
        if self.n_steps < 3 or self.n_steps % 3 != 0:
            raise ValueError("n_steps must be a positive multiple of 3")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def phase_length(self) -> int:
        return self.n_steps // 3


@dataclass(frozen=True)
class MediumModel:
    """Resistive-medium coefficients; see module docstring for the force laws.

    ``terrain_height`` is the medium surface height in the leg frame (mm);
    the default puts it 40 mm below the tibia joint at the neutral pose.
    """

    kind: str  # soil | gravel | fluid
    terrain_height: float = -40.0
    k_soil: float = 0.002  # N per mm depth per mm^2 of voxel face
    k_gravel: float = 0.006
    mu_gravel: float = 0.5
    drag_coeff: float = 1.0
    density: float = 1000.0  # kg/m^3

    def __post_init__(self) -> None:
        if self.kind not in ("soil", "gravel", "fluid"):
            raise ValueError(f"unknown medium kind {self.kind!r}")

    @classmethod
    def soil(cls, **overrides) -> "MediumModel":
        return cls(kind="soil", **overrides)

    @classmethod
    def gravel(cls, **overrides) -> "MediumModel":
        return cls(kind="gravel", **overrides)

    @classmethod
    def fluid(cls, **overrides) -> "MediumModel":
        return cls(kind="fluid", **overrides)


@dataclass(frozen=True)
class TorqueTrace:
    """Per-step joint torques (Nm); ``combined`` is |coxa|+|femur|+|tibia|."""

    tau_coxa: np.ndarray
    tau_femur: np.ndarray
    tau_tibia: np.ndarray

    @property
    def combined(self) -> np.ndarray:
        return np.abs(self.tau_coxa) + np.abs(self.tau_femur) + np.abs(self.tau_tibia)

    @property
    def total(self) -> float:
        return float(self.combined.sum())

    @property
    def mean(self) -> float:
        return float(self.combined.mean())

    def __len__(self) -> int:
        return len(self.tau_coxa)

    def write_csv(self, destination) -> None:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write("step,tau_coxa,tau_femur,tau_tibia,tau_sum\n")
            combined = self.combined
            for i in range(len(self)):
                fh.write(
                    f"{i},{float(self.tau_coxa[i])!r},{float(self.tau_femur[i])!r},"
                    f"{float(self.tau_tibia[i])!r},{float(combined[i])!r}\n"
                )


def _angles_for_steps(steps: np.ndarray, trajectory: StepTrajectory) -> np.ndarray:
    """Joint angles in degrees, shape (len(steps), 3) as (coxa, femur, tibia)."""
    phase_len = trajectory.phase_length
    denom = phase_len - 1
    steps = np.asarray(steps)
    phase = steps // phase_len
    u = (steps % phase_len) / denom
    coxa = np.where(phase == 0, 30.0, np.where(phase == 1, 30.0 - 60.0 * u, -30.0))
    femur = np.where(phase == 0, 30.0 * (1.0 - u), np.where(phase == 1, 0.0, 30.0 * u))
    tibia = -femur
    return np.stack([coxa, femur, tibia], axis=-1)


def joint_angles(
    step: int, trajectory: StepTrajectory = StepTrajectory()
) -> tuple[float, float, float]:
    """(coxa, femur, tibia) in degrees at ``step``; endpoints are exact."""
    if not 0 <= step < trajectory.n_steps:
        raise OutOfRangeError(f"step {step} outside [0, {trajectory.n_steps - 1}]")
    coxa, femur, tibia = _angles_for_steps(np.array([step]), trajectory)[0]
    return (float(coxa), float(femur), float(tibia))


def _chain_transforms(
    rig: LegRig, steps: np.ndarray, trajectory: StepTrajectory
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Rigid transforms for the tibia frame at each step.

    Returns (M, t, femur_pos, tibia_pos, pitch_axis): world voxel position is
    M @ local + t.  World frame: Y up, coxa joint at the origin, leg along +X
    at the neutral pose; coxa yaws about Y, femur/tibia pitch about the
    yawed Z axis.
    """
    angles = np.radians(_angles_for_steps(steps, trajectory))
    coxa, femur, tibia = angles[:, 0], angles[:, 1], angles[:, 2]
    n = len(steps)

    def rot_y(a: np.ndarray) -> np.ndarray:
        c, s = np.cos(a), np.sin(a)
        out = np.zeros((len(a), 3, 3))
        out[:, 0, 0] = c
        out[:, 0, 2] = s
        out[:, 1, 1] = 1.0
        out[:, 2, 0] = -s
        out[:, 2, 2] = c
        return out

    def rot_z(a: np.ndarray) -> np.ndarray:
        c, s = np.cos(a), np.sin(a)
        out = np.zeros((len(a), 3, 3))
        out[:, 0, 0] = c
        out[:, 0, 1] = -s
        out[:, 1, 0] = s
        out[:, 1, 1] = c
        out[:, 2, 2] = 1.0
        return out

    ry = rot_y(coxa)
    rz_femur = rot_z(femur)
    coxa_tip = np.array([rig.coxa_length, 0.0, 0.0])
    femur_tip = np.array([rig.femur_length, 0.0, 0.0])
    femur_pos = ry @ coxa_tip
    tibia_pos = femur_pos + np.einsum("sij,sjk,k->si", ry, rz_femur, femur_tip)
    m = np.einsum("sij,sjk->sik", ry, rot_z(femur + tibia))
    pitch_axis = ry @ np.array([0.0, 0.0, 1.0])
    assert m.shape == (n, 3, 3)
    return m, tibia_pos, femur_pos, tibia_pos, pitch_axis


def _local_voxel_coords(grid: VoxelGrid, mask: np.ndarray) -> np.ndarray:
    """Tibia-frame positions (mm) of the voxels selected by ``mask``.

    The grid hangs below the tibia joint: grid y runs downward from the
    joint, x and z are centered on it.
    """
    dims = grid.dims
    s = dims.voxel_size
    idx = np.argwhere(mask).astype(float)
    local = np.empty_like(idx)
    local[:, 0] = (idx[:, 0] + 0.5 - dims.nx / 2.0) * s
    local[:, 1] = -(idx[:, 1] + 0.5) * s
    local[:, 2] = (idx[:, 2] + 0.5 - dims.nz / 2.0) * s
    return local


def surface_mask(grid: VoxelGrid) -> np.ndarray:
    """Occupied cells with at least one empty or out-of-bounds face neighbor."""
    interior = ndimage.binary_erosion(grid.occupancy, border_value=0)
    return grid.occupancy & ~interior


def _positions_for_steps(
    rig: LegRig, local: np.ndarray, steps: np.ndarray, trajectory: StepTrajectory
) -> np.ndarray:
    m, origin, _, _, _ = _chain_transforms(rig, steps, trajectory)
    return np.einsum("sij,nj->sni", m, local) + origin[:, None, :]


def voxel_kinematics(
    rig: LegRig,
    grid: VoxelGrid,
    step: int,
    trajectory: StepTrajectory = StepTrajectory(),
) -> tuple[np.ndarray, np.ndarray]:
    """World positions (mm) and velocities (mm/s) of the surface voxels.

    Velocity is a central finite difference over dt, one-sided at the
    trajectory ends.
    """
    if grid.occupied_count == 0:
        raise EmptyGridError("grid has no occupied voxels")
    if not 0 <= step < trajectory.n_steps:
        raise OutOfRangeError(f"step {step} outside trajectory")
    local = _local_voxel_coords(grid, surface_mask(grid))
    lo = max(step - 1, 0)
    hi = min(step + 1, trajectory.n_steps - 1)
    pos = _positions_for_steps(rig, local, np.arange(lo, hi + 1), trajectory)
    velocity = (pos[-1] - pos[0]) / ((hi - lo) * trajectory.dt)
    return pos[step - lo], velocity


def _force_scale(
    positions_y: np.ndarray,
    vx: np.ndarray,
    vy: np.ndarray,
    vz: np.ndarray,
    medium: MediumModel,
    voxel_size: float,
) -> np.ndarray:
    """Per-voxel factor s with force F = s * v (N given mm/s velocities).

    Encodes magnitude-opposing-velocity: s = -|F| / |v|, zero for voxels
    above the medium surface or at rest.
    """
    speed2 = vx * vx + vy * vy + vz * vz
    speed = np.sqrt(speed2)
    depth = medium.terrain_height - positions_y
    active = (depth > 0) & (speed > 0)
    face_area = voxel_size * voxel_size  # mm^2
    safe_speed = np.where(active, speed, 1.0)
    if medium.kind == "fluid":
        # 0.5 * rho * c_d * A * |v|^2 in SI; |v| mm/s -> m/s, A mm^2 -> m^2.
        magnitude = (
            0.5 * medium.density * medium.drag_coeff * (face_area * 1e-6)
            * (speed2 * 1e-6)
        )
    else:
        k = medium.k_soil if medium.kind == "soil" else medium.k_gravel
        magnitude = k * np.maximum(depth, 0.0) * face_area
        if medium.kind == "gravel":
            horizontal = np.sqrt(vx * vx + vz * vz)
            magnitude = magnitude * (1.0 + medium.mu_gravel * horizontal / safe_speed)
    return np.where(active, -magnitude / safe_speed, 0.0)


def _medium_forces(
    positions: np.ndarray,
    velocities: np.ndarray,
    medium: MediumModel,
    voxel_size: float,
) -> np.ndarray:
    """Resistive force (N) per voxel; positions/velocities in mm and mm/s."""
    scale = _force_scale(
        positions[..., 1],
        velocities[..., 0],
        velocities[..., 1],
        velocities[..., 2],
        medium,
        voxel_size,
    )
    return scale[..., None] * velocities


@njit(cache=True)
def _medium_moment_kernel(
    mw, tw, cur, prev, nxt, inv_span, local, kind, terrain, k_lin, mu, drag
):  # pragma: no cover - exercised via _joint_torques_for_steps
    """Accumulate medium-force sums and moments about the origin.

    mw/tw are the rigid transforms over the step window; cur/prev/nxt index
    into that window per output step.  Positions are recomputed per voxel to
    keep the working set tiny.  kind: 0 soil, 1 gravel, 2 fluid.  k_lin is
    the depth coefficient times voxel face area; drag is the fluid factor so
    |F| = drag * |v|^2 with v in mm/s.
    """
    window = mw.shape[0]
    n_out = cur.shape[0]
    n_vox = local.shape[0]
    moment = np.zeros((n_out, 3))
    force_sum = np.zeros((n_out, 3))
    pos = np.empty((window, 3))
    for n in range(n_vox):
        lx, ly, lz = local[n, 0], local[n, 1], local[n, 2]
        for w in range(window):
            pos[w, 0] = mw[w, 0, 0] * lx + mw[w, 0, 1] * ly + mw[w, 0, 2] * lz + tw[w, 0]
            pos[w, 1] = mw[w, 1, 0] * lx + mw[w, 1, 1] * ly + mw[w, 1, 2] * lz + tw[w, 1]
            pos[w, 2] = mw[w, 2, 0] * lx + mw[w, 2, 1] * ly + mw[w, 2, 2] * lz + tw[w, 2]
        for s in range(n_out):
            c = cur[s]
            depth = terrain - pos[c, 1]
            if depth <= 0.0:
                continue
            vx = (pos[nxt[s], 0] - pos[prev[s], 0]) * inv_span[s]
            vy = (pos[nxt[s], 1] - pos[prev[s], 1]) * inv_span[s]
            vz = (pos[nxt[s], 2] - pos[prev[s], 2]) * inv_span[s]
            speed2 = vx * vx + vy * vy + vz * vz
            if speed2 <= 0.0:
                continue
            speed = np.sqrt(speed2)
            if kind == 2:
                magnitude = drag * speed2
            else:
                magnitude = k_lin * depth
                if kind == 1:
                    magnitude *= 1.0 + mu * np.sqrt(vx * vx + vz * vz) / speed
            factor = -magnitude / speed
            fx, fy, fz = factor * vx, factor * vy, factor * vz
            px, py, pz = pos[c, 0], pos[c, 1], pos[c, 2]
            moment[s, 0] += py * fz - pz * fy
            moment[s, 1] += pz * fx - px * fz
            moment[s, 2] += px * fy - py * fx
            force_sum[s, 0] += fx
            force_sum[s, 1] += fy
            force_sum[s, 2] += fz
    return moment, force_sum


def _joint_torques_for_steps(
    rig: LegRig,
    grid: VoxelGrid,
    steps: np.ndarray,
    medium: MediumModel | None,
    trajectory: StepTrajectory,
) -> np.ndarray:
    """Signed (coxa, femur, tibia) torques in Nm, shape (len(steps), 3).

    Medium forces act on surface voxels; gravity on every occupied voxel.
    Torque arms in mm and forces in N give N*mm, converted to Nm.  A joint
    torque is (sum_n r_n x F_n - c x sum_n F_n) . axis with c the joint
    origin, so only one moment sum over voxels is needed.
    """
    m, origin, femur_pos, tibia_pos, pitch_axis = _chain_transforms(
        rig, steps, trajectory
    )
    surf_local = _local_voxel_coords(grid, surface_mask(grid))
    n_steps = trajectory.n_steps

    # Transforms with one-step halo for the finite-difference velocity.
    lo = max(int(steps.min()) - 1, 0)
    hi = min(int(steps.max()) + 1, n_steps - 1)
    window = np.arange(lo, hi + 1)
    mw, tw, _, _, _ = _chain_transforms(rig, window, trajectory)
    cur = steps - lo
    prev = np.maximum(steps - 1, 0) - lo
    nxt = np.minimum(steps + 1, n_steps - 1) - lo
    inv_span = 1.0 / (
        (np.minimum(steps + 1, n_steps - 1) - np.maximum(steps - 1, 0))
        * trajectory.dt
    )

    if medium is not None:
        face_area = grid.dims.voxel_size**2  # mm^2
        kind = {"soil": 0, "gravel": 1, "fluid": 2}[medium.kind]
        k = medium.k_soil if medium.kind == "soil" else medium.k_gravel
        drag = 0.5 * medium.density * medium.drag_coeff * (face_area * 1e-6) * 1e-6
        moment, force_sum = _medium_moment_kernel(
            mw,
            tw,
            cur,
            prev,
            nxt,
            inv_span,
            surf_local,
            kind,
            medium.terrain_height,
            k * face_area,
            medium.mu_gravel,
            drag,
        )
    else:
        force_sum = np.zeros((len(steps), 3))
        moment = np.zeros((len(steps), 3))

    coxa_axis = np.array([0.0, 1.0, 0.0])
    tau = np.zeros((len(steps), 3))
    tau[:, 0] = moment @ coxa_axis
    tau[:, 1] = np.einsum(
        "si,si->s", moment - np.cross(femur_pos, force_sum), pitch_axis
    )
    tau[:, 2] = np.einsum(
        "si,si->s", moment - np.cross(tibia_pos, force_sum), pitch_axis
    )

    # Gravity: identical force per voxel, so sum positions first.
    n_occ = grid.occupied_count
    all_local_sum = _local_voxel_coords(grid, grid.occupancy).sum(axis=0)
    grav_force = np.array(
        [0.0, -rig.voxel_mass_kg(grid.dims.voxel_size) * rig.gravity, 0.0]
    )
    pos_sum = np.einsum("sij,j->si", m, all_local_sum) + n_occ * origin
    tau[:, 0] += np.cross(pos_sum, grav_force) @ coxa_axis
    tau[:, 1] += np.einsum(
        "si,si->s", np.cross(pos_sum - n_occ * femur_pos, grav_force), pitch_axis
    )
    tau[:, 2] += np.einsum(
        "si,si->s", np.cross(pos_sum - n_occ * tibia_pos, grav_force), pitch_axis
    )
    return tau / 1000.0  # N*mm -> Nm


def medium_torque(
    rig: LegRig,
    grid: VoxelGrid,
    step: int,
    medium: MediumModel,
    trajectory: StepTrajectory = StepTrajectory(),
) -> tuple[float, float, float]:
    """Signed joint torques (Nm) at one step: medium forces plus gravity."""
    if grid.occupied_count == 0:
        raise EmptyGridError("grid has no occupied voxels")
    if not 0 <= step < trajectory.n_steps:
        raise OutOfRangeError(f"step {step} outside trajectory")
    tau = _joint_torques_for_steps(rig, grid, np.array([step]), medium, trajectory)[0]
    return (float(tau[0]), float(tau[1]), float(tau[2]))


def fitness_value(mean_torque: float, delta_percent: float) -> float:
    """Eq-style reciprocal-torque fitness with the material penalty."""
    if mean_torque <= 0:
        raise InvalidLegError("degenerate leg: zero mean torque")
    return 1.0 / (mean_torque + mean_torque * delta_percent / 5.0)


def fitness_from_trace(trace: TorqueTrace, delta_percent: float) -> float:
    """Fitness from an existing torque trace and occupancy percentage."""
    return fitness_value(trace.mean, delta_percent)


def evaluate(
    grid: VoxelGrid,
    rig: LegRig = LegRig(),
    trajectory: StepTrajectory = StepTrajectory(),
    medium: MediumModel = MediumModel.soil(),
) -> tuple[float, TorqueTrace]:
    """Full-trajectory surrogate evaluation; returns (fitness, trace)."""
    if grid.occupied_count == 0:
        raise InvalidLegError("grid has no occupied voxels")
    steps = np.arange(trajectory.n_steps)
    taus = _joint_torques_for_steps(rig, grid, steps, medium, trajectory)
    trace = TorqueTrace(taus[:, 0].copy(), taus[:, 1].copy(), taus[:, 2].copy())
    return fitness_from_trace(trace, occupancy_percentage(grid)), trace
