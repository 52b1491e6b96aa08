//! Cascaded controller: normalized policy actions become thrust/body-rate
//! commands at the slow rate, a body-rate PID tracks them at the fast rate,
//! and the desired wrench is allocated to motor-speed setpoints.
//!
//! Everything here is a pure function over value types; the PID state is owned
//! by the caller and threaded through explicitly.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::physics::{Mat4, QuadParams, Vec3, Vec4, Wrench};

/// Normalized policy output, each component in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action(pub Vec4);

impl Action {
    pub fn zero() -> Self {
        Self(Vec4::zeros())
    }

    /// Component-wise clamp into [-1, 1].
    pub fn clamped(&self) -> Self {
        Self(self.0.map(|a| a.clamp(-1.0, 1.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }
}

/// Thrust (in multiples of drone weight) plus desired body rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub thrust_weight: f64,
    /// Desired body rates [rad/s].
    pub omega_des: Vec3,
}

impl ControlCommand {
    /// Thrust in Newtons for the given params.
    pub fn thrust_newtons(&self, params: &QuadParams) -> f64 {
        self.thrust_weight * params.mass * params.gravity
    }
}

/// Integral and previous error of the body-rate PID.
#[derive(Debug, Clone, PartialEq)]
pub struct PidState {
    /// Error integral [rad], clamped per axis to the anti-windup limit.
    pub integral: Vec3,
    /// Rate error at the previous fast step [rad/s].
    pub prev_error: Vec3,
    /// False until the first update; the first derivative term is zero.
    primed: bool,
}

impl PidState {
    pub fn new() -> Self {
        Self { integral: Vec3::zeros(), prev_error: Vec3::zeros(), primed: false }
    }
}

impl Default for PidState {
    fn default() -> Self {
        Self::new()
    }
}

/// Map a policy action to a control command:
/// thrust = (a0 + 1)/2 * T (in weight units), rates = limits .* a[1..4].
pub fn map_action(action: &Action, params: &QuadParams) -> ControlCommand {
    let a = action.clamped().0;
    let thrust_weight = (a[0] + 1.0) / 2.0 * params.thrust_to_weight;
    let omega_des = Vec3::new(
        params.rate_limits.x * a[1],
        params.rate_limits.y * a[2],
        params.rate_limits.z * a[3],
    );
    ControlCommand { thrust_weight, omega_des }
}

/// One PID update at the fast rate. Returns the desired body torque and the
/// advanced PID state.
///
/// tau = I .* (Kp e - Kd de/dt + Ki int(e)), with the derivative taken on the
/// error by backward difference (zero on the first step) and the integral by
/// rectangle rule with an anti-windup clamp.
pub fn rate_pid(
    cmd: &ControlCommand,
    ang_vel: &Vec3,
    pid: &PidState,
    params: &QuadParams,
    dt: f64,
) -> (Vec3, PidState) {
    let error = cmd.omega_des - ang_vel;
    let limit = params.pid.integral_limit;
    let integral = (pid.integral + error * dt).map(|x| x.clamp(-limit, limit));
    let derivative = if pid.primed { (error - pid.prev_error) / dt } else { Vec3::zeros() };
    let raw = params.pid.kp.component_mul(&error) - params.pid.kd.component_mul(&derivative)
        + params.pid.ki.component_mul(&integral);
    let torque = params.inertia_diag.component_mul(&raw);
    (torque, PidState { integral, prev_error: error, primed: true })
}

/// Invert the allocation matrix once; reuse via [`allocate_with`] in hot loops.
pub fn allocation_inverse(params: &QuadParams) -> Mat4 {
    params
        .allocation_matrix
        .try_inverse()
        .expect("allocation matrix invertibility is checked at construction")
}

/// Allocate a desired wrench to motor-speed setpoints.
///
/// f_mot = T_M^-1 [f_z, tau]; omega_i = clamp(sqrt(|f_i/k|) sign(f_i/k)).
/// Negative allocated forces therefore clamp to the minimum speed.
pub fn allocate(wrench_des: &Wrench, params: &QuadParams) -> Vec4 {
    allocate_with(&allocation_inverse(params), wrench_des, params)
}

/// [`allocate`] with a precomputed inverse allocation matrix.
pub fn allocate_with(alloc_inv: &Mat4, wrench_des: &Wrench, params: &QuadParams) -> Vec4 {
    let w = Vector4::new(wrench_des.f_z, wrench_des.torque.x, wrench_des.torque.y, wrench_des.torque.z);
    let forces = alloc_inv * w;
    forces.map(|f| {
        let omega_sq = f / params.thrust_coeff;
        let omega = omega_sq.abs().sqrt() * omega_sq.signum();
        omega.clamp(params.motor_speed_min, params.motor_speed_max)
    })
}
