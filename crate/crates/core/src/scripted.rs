//! Scripted racers. The waypoint pilot is the feasibility oracle behind the
//! built-in tracks (it must finish three laps on every variant) and the
//! reference controller for evaluation fixtures; it flies gate-center
//! waypoints with a tilt-limited position loop and sidesteps obstacles that
//! block its straight line.

use crate::control::Action;
use crate::env::{Observation, RaceStatus};
use crate::physics::{QuadParams, QuadState, Vec3, Vec4};
use crate::track::{Obstacle, Track};

/// Everything a racer may look at when choosing an action. Network policies
/// use `obs` only; scripted racers read the privileged fields.
pub struct AgentView<'a> {
    pub obs: &'a Observation,
    pub state: &'a QuadState,
    pub status: &'a RaceStatus,
    pub params: &'a QuadParams,
    pub track: &'a Track,
    /// Gate id of the current target in this episode's pass order.
    pub target_gate: usize,
}

/// A controller that can race.
pub trait Pilot {
    fn act(&mut self, view: &AgentView) -> Action;
    fn label(&self) -> String {
        "pilot".into()
    }
    /// Required observation length, when the racer consumes observations.
    fn observation_dim(&self) -> Option<usize> {
        None
    }
}

/// Tunable gains of the scripted pilot.
#[derive(Debug, Clone)]
pub struct WaypointPilot {
    /// Cruise speed toward the waypoint [m/s].
    pub speed: f64,
    /// Position-to-velocity gain [1/s].
    pub kp_pos: f64,
    /// Velocity-to-acceleration gain [1/s].
    pub kv: f64,
    /// Attitude gain: body-rate command per radian of tilt error [1/s].
    pub kr: f64,
    pub k_yaw: f64,
    /// Horizontal acceleration clamp [m/s^2] (limits tilt).
    pub max_accel: f64,
    /// Clearance added around obstacles when planning detours [m].
    pub clearance: f64,
}

impl Default for WaypointPilot {
    fn default() -> Self {
        Self {
            speed: 2.4,
            kp_pos: 2.2,
            kv: 3.5,
            kr: 5.0,
            k_yaw: 3.0,
            max_accel: 6.0,
            clearance: 0.22,
        }
    }
}

impl WaypointPilot {
    /// Current waypoint: push through the gate when inside its approach cone,
    /// otherwise fall back to a staging point behind it (which a straight
    /// line can always reach without touching the gate plane), with a detour
    /// around the first obstacle blocking the way. Every waypoint is clamped
    /// into the track bounds.
    fn waypoint(&self, view: &AgentView) -> Vec3 {
        let gate = &view.track.gates[view.target_gate];
        let frame = gate.frame();
        let pos = view.state.position;
        let (u, v, s) = frame.local(&pos);
        let in_plane = (u * u + v * v).sqrt();

        let goal = if s <= -0.15 {
            if in_plane <= 0.7 * (-s) + 0.25 {
                // Aligned with the opening: aim just past the plane.
                frame.center + frame.normal * 0.4
            } else {
                // Off-axis but safely behind: go to the staging point. The
                // straight line to it keeps s < 0, clear of the frame.
                frame.center - frame.normal * 1.0
            }
        } else if u.abs() < frame.half_size - 0.15 && v.abs() < frame.half_size - 0.15 {
            // At or past the plane but lined up with the opening (fresh spawn
            // beyond the gate, or a loop track): fly back through it.
            frame.center - frame.normal * 1.0
        } else {
            // Past the plane and blocked by the frame: swing around the near
            // edge toward the approach side.
            let swing = if u >= 0.0 { 1.0 } else { -1.0 };
            frame.center + frame.side * (swing * (frame.half_size + 0.55))
                + frame.up * v.clamp(-0.3, 0.3)
                - frame.normal * 0.5
        };

        self.clamp_to_bounds(view.track, self.detour(view, pos, goal))
    }

    fn clamp_to_bounds(&self, track: &Track, mut p: Vec3) -> Vec3 {
        let margin = 0.3;
        for i in 0..3 {
            let lo = track.bounds.min[i] + margin;
            let hi = track.bounds.max[i] - margin;
            p[i] = p[i].clamp(lo, hi.max(lo));
        }
        // Never command a waypoint at ground level.
        p.z = p.z.max(0.4);
        p
    }

    /// Replace the goal with a sidestep waypoint when the straight segment
    /// to it passes through an inflated obstacle footprint.
    fn detour(&self, view: &AgentView, from: Vec3, goal: Vec3) -> Vec3 {
        let seg = goal - from;
        let seg_xy = Vec3::new(seg.x, seg.y, 0.0);
        let len = seg_xy.norm();
        if len < 1e-6 {
            return goal;
        }
        let dir = seg_xy / len;
        let mut best: Option<(f64, Vec3)> = None;
        for ob in &view.track.obstacles {
            let (center_xy, radius, z_lo, z_hi) = obstacle_footprint(ob);
            // Ignore obstacles whose height band the path does not enter.
            let z_path = 0.5 * (from.z + goal.z);
            if z_path < z_lo - 0.2 || z_path > z_hi + 0.2 {
                continue;
            }
            let to_center = Vec3::new(center_xy.x - from.x, center_xy.y - from.y, 0.0);
            let along = to_center.dot(&dir).clamp(0.0, len);
            let closest = from + dir * along;
            let lateral = Vec3::new(center_xy.x - closest.x, center_xy.y - closest.y, 0.0);
            let inflated = radius + self.clearance;
            if lateral.norm() < inflated && along > 1e-6 {
                if best.map(|(a, _)| along < a).unwrap_or(true) {
                    // Step around the side the obstacle is not on.
                    let cross_z = dir.x * to_center.y - dir.y * to_center.x;
                    let out = if cross_z > 0.0 {
                        Vec3::new(dir.y, -dir.x, 0.0)
                    } else {
                        Vec3::new(-dir.y, dir.x, 0.0)
                    };
                    let wp = Vec3::new(center_xy.x, center_xy.y, goal.z) + out * (inflated + 0.15);
                    best = Some((along, wp));
                }
            }
        }
        best.map(|(_, wp)| wp).unwrap_or(goal)
    }
}

/// 2D bounding circle and height band of an obstacle.
fn obstacle_footprint(ob: &Obstacle) -> (Vec3, f64, f64, f64) {
    match ob {
        Obstacle::Cylinder { base, radius, height } => {
            (*base, *radius, base.z, base.z + height)
        }
        Obstacle::Box { center, half_extents, .. } => {
            let r = (half_extents.x * half_extents.x + half_extents.y * half_extents.y).sqrt();
            (*center, r, center.z - half_extents.z, center.z + half_extents.z)
        }
    }
}

impl Pilot for WaypointPilot {
    fn act(&mut self, view: &AgentView) -> Action {
        let params = view.params;
        let state = view.state;
        let wp = self.waypoint(view);

        // Velocity setpoint toward the waypoint, speed-capped.
        let to_wp = wp - state.position;
        let dist = to_wp.norm();
        let v_des = if dist > 1e-9 {
            to_wp / dist * (self.kp_pos * dist).min(self.speed)
        } else {
            Vec3::zeros()
        };
        let mut a_des = (v_des - state.lin_vel) * self.kv;
        // Tilt limit on the horizontal component.
        let a_h = Vec3::new(a_des.x, a_des.y, 0.0);
        if a_h.norm() > self.max_accel {
            let scaled = a_h / a_h.norm() * self.max_accel;
            a_des.x = scaled.x;
            a_des.y = scaled.y;
        }
        a_des.z = a_des.z.clamp(-0.6 * params.gravity, 1.2 * params.gravity);

        // Desired thrust direction and magnitude.
        let f_world = (a_des + Vec3::new(0.0, 0.0, params.gravity)) * params.mass;
        let z_body: Vec3 = state.rotation.column(2).into();
        let f_z = f_world.dot(&z_body).max(0.05 * params.mass * params.gravity);

        // Attitude error from current to desired body z, in body frame.
        let z_des = f_world.normalize();
        let err_world = z_body.cross(&z_des);
        let err_body = state.rotation.transpose() * err_world;
        let mut omega = err_body * self.kr;

        // Yaw toward the direction of travel.
        let heading: Vec3 = state.rotation.column(0).into();
        let yaw = heading.y.atan2(heading.x);
        let desired_dir = if v_des.norm() > 0.3 { v_des } else { to_wp };
        let yaw_des = desired_dir.y.atan2(desired_dir.x);
        let mut yaw_err = yaw_des - yaw;
        while yaw_err > std::f64::consts::PI {
            yaw_err -= 2.0 * std::f64::consts::PI;
        }
        while yaw_err < -std::f64::consts::PI {
            yaw_err += 2.0 * std::f64::consts::PI;
        }
        omega.z = self.k_yaw * yaw_err;

        // Invert the action mapping.
        let thrust_weight = f_z / (params.mass * params.gravity);
        let a0 = (2.0 * thrust_weight / params.thrust_to_weight - 1.0).clamp(-1.0, 1.0);
        Action(Vec4::new(
            a0,
            (omega.x / params.rate_limits.x).clamp(-1.0, 1.0),
            (omega.y / params.rate_limits.y).clamp(-1.0, 1.0),
            (omega.z / params.rate_limits.z).clamp(-1.0, 1.0),
        ))
    }

    fn label(&self) -> String {
        "waypoint".into()
    }
}

/// Dives straight into the ground; the dominated-policy fixture.
pub struct CrashPilot;

impl Pilot for CrashPilot {
    fn act(&mut self, _view: &AgentView) -> Action {
        Action(Vec4::new(-1.0, 0.0, 0.0, 0.0))
    }

    fn label(&self) -> String {
        "crash".into()
    }
}

/// Holds hover thrust and zero rates; never passes a gate.
pub struct HoverPilot;

impl Pilot for HoverPilot {
    fn act(&mut self, view: &AgentView) -> Action {
        let a0 = 2.0 / view.params.thrust_to_weight - 1.0;
        Action(Vec4::new(a0, 0.0, 0.0, 0.0))
    }

    fn label(&self) -> String {
        "hover".into()
    }
}
