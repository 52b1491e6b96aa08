//! Rigid-body quadrotor dynamics with first-order motor lag and rotor drag.
//!
//! All functions here are pure: they map a state and inputs to a new state and
//! never touch shared mutable data, so any number of drones can be stepped
//! concurrently. Frames: world x/y horizontal, z up, gravity along -z; body
//! x forward, y left, z up. `rotation` maps body vectors into the world frame.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

/// Full physical state of one drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadState {
    /// Position [m], world frame.
    pub position: Vec3,
    /// Body-to-world rotation matrix, orthonormal with det +1.
    pub rotation: Mat3,
    /// Linear velocity [m/s], world frame.
    pub lin_vel: Vec3,
    /// Angular velocity [rad/s], body frame.
    pub ang_vel: Vec3,
    /// Rotor speeds [rad/s].
    pub motor_speeds: Vec4,
}

impl QuadState {
    /// A drone at rest at `position`, level, motors stopped.
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            rotation: Mat3::identity(),
            lin_vel: Vec3::zeros(),
            ang_vel: Vec3::zeros(),
            motor_speeds: Vec4::zeros(),
        }
    }

    /// Linear velocity expressed in the body frame: R^T v.
    pub fn body_velocity(&self) -> Vec3 {
        self.rotation.transpose() * self.lin_vel
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.rotation.iter().all(|x| x.is_finite())
            && self.lin_vel.iter().all(|x| x.is_finite())
            && self.ang_vel.iter().all(|x| x.is_finite())
            && self.motor_speeds.iter().all(|x| x.is_finite())
    }
}

/// Gains for the body-rate PID (per-axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: Vec3,
    pub kd: Vec3,
    pub ki: Vec3,
    /// Anti-windup clamp on the error integral [rad], per axis.
    pub integral_limit: f64,
}

/// All physical and control constants for one drone. This is the domain
/// randomization target: every field may be perturbed per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadParams {
    /// Mass [kg].
    pub mass: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Diagonal of the inertia tensor [kg m^2], body frame.
    pub inertia_diag: Vec3,
    /// Static map from the four motor forces to (f_z, tau_x, tau_y, tau_z).
    pub allocation_matrix: Mat4,
    /// Thrust coefficient k_eta [N s^2 / rad^2]: f_i = k_eta * omega_i^2.
    pub thrust_coeff: f64,
    /// Motor time constant [s] of the first-order rotor model.
    pub motor_tau: f64,
    /// Minimum allowable rotor speed [rad/s].
    pub motor_speed_min: f64,
    /// Maximum allowable rotor speed [rad/s].
    pub motor_speed_max: f64,
    /// Diagonal of the rotor-drag matrix K_aero [N s / (rad m)]; the drag
    /// force is -(sum_i omega_i) * K_aero * v_body.
    pub drag_diag: Vec3,
    /// Maximum collective thrust in units of drone weight.
    pub thrust_to_weight: f64,
    /// Maximum commanded roll, pitch, yaw rates [rad/s].
    pub rate_limits: Vec3,
    /// Body-rate PID gains.
    pub pid: PidGains,
    /// Physics substep [s] (default 1/500).
    pub fast_dt: f64,
    /// Control tick [s] (default 1/50); must be an exact multiple of `fast_dt`.
    pub slow_dt: f64,
}

impl QuadParams {
    /// Allocation matrix for an X configuration: motors at +-45 deg on arms of
    /// length `arm`, with yaw produced by the rotor reaction torque
    /// `yaw_torque_ratio * thrust` in alternating directions.
    ///
    /// Motor order (top view, x forward / y left): 0 front-right, 1 front-left,
    /// 2 rear-left, 3 rear-right.
    pub fn x_allocation(arm: f64, yaw_torque_ratio: f64) -> Mat4 {
        let d = arm / std::f64::consts::SQRT_2;
        let c = yaw_torque_ratio;
        Mat4::from_rows(&[
            Vector4::new(1.0, 1.0, 1.0, 1.0).transpose(),
            Vector4::new(-d, d, d, -d).transpose(),
            Vector4::new(-d, -d, d, d).transpose(),
            Vector4::new(c, -c, c, -c).transpose(),
        ])
    }

    /// Total thrust at hover [N].
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Maximum collective thrust [N].
    pub fn max_thrust(&self) -> f64 {
        self.thrust_to_weight * self.mass * self.gravity
    }

    /// Number of fast substeps per control tick.
    pub fn substeps(&self) -> usize {
        (self.slow_dt / self.fast_dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.mass > 0.0 && self.gravity > 0.0) {
            return err(format!("mass/gravity must be positive, got {}/{}", self.mass, self.gravity));
        }
        if self.inertia_diag.iter().any(|&i| i <= 0.0) {
            return err(format!("inertia diagonal must be positive, got {:?}", self.inertia_diag));
        }
        if self.allocation_matrix.try_inverse().is_none() {
            return err("allocation matrix is singular".into());
        }
        // Reject near-singular allocation: a wild condition number means the
        // inverse map amplifies noise beyond anything physical.
        let inv = self.allocation_matrix.try_inverse().unwrap();
        let cond = self.allocation_matrix.norm() * inv.norm();
        if !cond.is_finite() || cond > 1e12 {
            return err(format!("allocation matrix is ill-conditioned (cond ~ {cond:.3e})"));
        }
        if self.thrust_coeff <= 0.0 {
            return err(format!("thrust coefficient must be positive, got {}", self.thrust_coeff));
        }
        if self.motor_tau <= 0.0 {
            return err(format!("motor time constant must be positive, got {}", self.motor_tau));
        }
        if !(self.motor_speed_min >= 0.0 && self.motor_speed_min < self.motor_speed_max) {
            return err(format!(
                "motor speed bounds must satisfy 0 <= min < max, got [{}, {}]",
                self.motor_speed_min, self.motor_speed_max
            ));
        }
        if self.thrust_to_weight <= 1.0 {
            return err(format!("thrust-to-weight must exceed 1, got {}", self.thrust_to_weight));
        }
        if self.fast_dt <= 0.0 || self.slow_dt <= 0.0 {
            return err("time steps must be positive".into());
        }
        let ratio = self.slow_dt / self.fast_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return err(format!("slow_dt must be an exact multiple of fast_dt, ratio {ratio}"));
        }
        if self.rate_limits.iter().any(|&k| k <= 0.0) {
            return err(format!("rate limits must be positive, got {:?}", self.rate_limits));
        }
        Ok(())
    }
}

impl Default for QuadParams {
    /// Nominal 32 g, 3-inch class quadrotor with thrust-to-weight 3.
    fn default() -> Self {
        let mass = 0.032;
        let gravity = 9.81;
        let thrust_to_weight = 3.0;
        let motor_speed_max = 3000.0;
        // Per-motor max force at full collective thrust.
        let f_motor_max = thrust_to_weight * mass * gravity / 4.0;
        let thrust_coeff = f_motor_max / (motor_speed_max * motor_speed_max);
        Self {
            mass,
            gravity,
            inertia_diag: Vec3::new(1.4e-5, 1.4e-5, 2.2e-5),
            allocation_matrix: Self::x_allocation(0.058, 0.0055),
            thrust_coeff,
            motor_tau: 0.012,
            motor_speed_min: 0.0,
            motor_speed_max,
            drag_diag: Vec3::new(9.0e-7, 9.0e-7, 1.2e-6),
            thrust_to_weight,
            rate_limits: Vec3::new(10.0, 10.0, 4.0),
            // The rate loop computes Kp e - Kd de + Ki int(e); the error
            // derivative enters with a minus sign, so large Kd values reduce
            // damping. The error envelope decays at (1 - Kd)/(2 tau_m): these
            // gains put the dominant pair near critical damping.
            pid: PidGains {
                kp: Vec3::new(20.0, 20.0, 20.0),
                kd: Vec3::new(0.1, 0.1, 0.05),
                ki: Vec3::new(2.0, 2.0, 1.0),
                integral_limit: 2.0,
            },
            fast_dt: 1.0 / 500.0,
            slow_dt: 1.0 / 50.0,
        }
    }
}

/// Collective body-z force plus body torque, as produced by the rotors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    /// Thrust along body z [N].
    pub f_z: f64,
    /// Torque [N m], body frame.
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Self { f_z: 0.0, torque: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.f_z.is_finite() && self.torque.iter().all(|x| x.is_finite())
    }
}

/// First-order rotor response: omega += (omega_des - omega) / tau_m * dt,
/// clamped to the speed bounds.
pub fn motor_step(state: &QuadState, desired_speeds: &Vec4, params: &QuadParams, dt: f64) -> QuadState {
    assert!(
        desired_speeds.iter().all(|x| x.is_finite()) && state.is_finite(),
        "non-finite motor_step input"
    );
    let mut next = state.clone();
    for i in 0..4 {
        let omega = state.motor_speeds[i];
        let updated = omega + (desired_speeds[i] - omega) / params.motor_tau * dt;
        next.motor_speeds[i] = updated.clamp(params.motor_speed_min, params.motor_speed_max);
    }
    next
}

/// Per-motor thrust f_i = k_eta * omega_i^2, mapped through the allocation
/// matrix to a collective force and body torque.
pub fn wrench_from_motors(motor_speeds: &Vec4, params: &QuadParams) -> Wrench {
    let forces = motor_speeds.map(|w| params.thrust_coeff * w * w);
    let w = params.allocation_matrix * forces;
    Wrench { f_z: w[0], torque: Vec3::new(w[1], w[2], w[3]) }
}

/// Rotor drag force in the body frame: -(sum_i omega_i) * K_aero * v_body.
pub fn drag_force(state: &QuadState, params: &QuadParams) -> Vec3 {
    let omega_sum: f64 = state.motor_speeds.iter().sum();
    let v_body = state.body_velocity();
    -omega_sum * params.drag_diag.component_mul(&v_body)
}

/// One semi-implicit Euler substep at `dt = fast_dt`.
///
/// The applied body force is [drag_x, drag_y, drag_z + f_z]; the applied
/// torque is the motor torque alone. Velocities are updated first, then
/// position; the rotation advances by the exponential map of omega*dt and is
/// re-orthonormalized.
pub fn integrate(state: &QuadState, applied: &Wrench, drag: &Vec3, params: &QuadParams, dt: f64) -> QuadState {
    let force_body = Vec3::new(drag.x, drag.y, drag.z + applied.f_z);
    let acc = state.rotation * force_body / params.mass + Vec3::new(0.0, 0.0, -params.gravity);

    let inertia = params.inertia_diag;
    let ang_mom = inertia.component_mul(&state.ang_vel);
    let gyro = state.ang_vel.cross(&ang_mom);
    let ang_acc = (applied.torque - gyro).component_div(&inertia);

    let lin_vel = state.lin_vel + acc * dt;
    let ang_vel = state.ang_vel + ang_acc * dt;
    let position = state.position + lin_vel * dt;
    let mut rotation = state.rotation * rotation_exp(&(ang_vel * dt));

    debug_assert!(
        orthonormality_error(&rotation) < 1e-6,
        "rotation drifted from SO(3): error {}",
        orthonormality_error(&rotation)
    );
    reorthonormalize(&mut rotation);

    let next = QuadState {
        position,
        rotation,
        lin_vel,
        ang_vel,
        motor_speeds: state.motor_speeds,
    };
    assert!(next.is_finite(), "non-finite state after integration step");
    next
}

/// Total mechanical energy [J]; test utility for conservation checks.
pub fn mechanical_energy(state: &QuadState, params: &QuadParams) -> f64 {
    let kin = 0.5 * params.mass * state.lin_vel.norm_squared();
    let pot = params.mass * params.gravity * state.position.z;
    let rot = 0.5 * state.ang_vel.dot(&params.inertia_diag.component_mul(&state.ang_vel));
    kin + pot + rot
}

fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues formula for exp([w]_x).
pub fn rotation_exp(w: &Vec3) -> Mat3 {
    let theta = w.norm();
    if theta < 1e-12 {
        return Mat3::identity() + skew(w);
    }
    let k = skew(&(w / theta));
    Mat3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Max-abs entry of R^T R - I.
pub fn orthonormality_error(r: &Mat3) -> f64 {
    let e = r.transpose() * r - Mat3::identity();
    e.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Gram-Schmidt on the first two columns, third from the cross product so the
/// determinant stays +1.
pub fn reorthonormalize(r: &mut Mat3) {
    let c0 = r.column(0).normalize();
    let mut c1: Vec3 = r.column(1).into();
    c1 -= c0 * c0.dot(&c1);
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    r.set_column(0, &c0);
    r.set_column(1, &c1);
    r.set_column(2, &c2);
}
