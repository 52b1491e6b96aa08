//! Unified run configuration: one TOML document embedding the quadrotor
//! constants, randomization ranges, track selection, reward mode, network
//! sizes, training hyperparameters, and evaluation knobs. Unknown keys are
//! rejected, and the effective config is dumped into the output directory for
//! provenance.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, ObsScales, RandomizationRanges, RewardConstants, RewardMode};
use crate::ippo::TrainConfig;
use crate::physics::{PidGains, QuadParams, Vec3};
use crate::track::{builtin_track, BuiltinTrack, Track};
use crate::{Error, Result};

/// Environment variable naming the default config directory.
pub const CONFIG_DIR_ENV: &str = "SLIPSTREAM_CONFIG_DIR";

/// Human-editable mirror of [`QuadParams`]; the allocation matrix is built
/// from the X-configuration arm length and yaw torque ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub mass: f64,
    pub gravity: f64,
    pub inertia_diag: [f64; 3],
    pub arm_length: f64,
    pub yaw_torque_ratio: f64,
    pub thrust_coeff: f64,
    pub motor_tau: f64,
    pub motor_speed_min: f64,
    pub motor_speed_max: f64,
    pub drag_diag: [f64; 3],
    pub thrust_to_weight: f64,
    pub rate_limits: [f64; 3],
    pub pid_kp: [f64; 3],
    pub pid_kd: [f64; 3],
    pub pid_ki: [f64; 3],
    pub pid_integral_limit: f64,
    pub fast_dt: f64,
    pub slow_dt: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        let p = QuadParams::default();
        Self {
            mass: p.mass,
            gravity: p.gravity,
            inertia_diag: [p.inertia_diag.x, p.inertia_diag.y, p.inertia_diag.z],
            arm_length: 0.058,
            yaw_torque_ratio: 0.0055,
            thrust_coeff: p.thrust_coeff,
            motor_tau: p.motor_tau,
            motor_speed_min: p.motor_speed_min,
            motor_speed_max: p.motor_speed_max,
            drag_diag: [p.drag_diag.x, p.drag_diag.y, p.drag_diag.z],
            thrust_to_weight: p.thrust_to_weight,
            rate_limits: [p.rate_limits.x, p.rate_limits.y, p.rate_limits.z],
            pid_kp: [p.pid.kp.x, p.pid.kp.y, p.pid.kp.z],
            pid_kd: [p.pid.kd.x, p.pid.kd.y, p.pid.kd.z],
            pid_ki: [p.pid.ki.x, p.pid.ki.y, p.pid.ki.z],
            pid_integral_limit: p.pid.integral_limit,
            fast_dt: p.fast_dt,
            slow_dt: p.slow_dt,
        }
    }
}

impl QuadConfig {
    pub fn to_params(&self) -> Result<QuadParams> {
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let params = QuadParams {
            mass: self.mass,
            gravity: self.gravity,
            inertia_diag: v(self.inertia_diag),
            allocation_matrix: QuadParams::x_allocation(self.arm_length, self.yaw_torque_ratio),
            thrust_coeff: self.thrust_coeff,
            motor_tau: self.motor_tau,
            motor_speed_min: self.motor_speed_min,
            motor_speed_max: self.motor_speed_max,
            drag_diag: v(self.drag_diag),
            thrust_to_weight: self.thrust_to_weight,
            rate_limits: v(self.rate_limits),
            pid: PidGains {
                kp: v(self.pid_kp),
                kd: v(self.pid_kd),
                ki: v(self.pid_ki),
                integral_limit: self.pid_integral_limit,
            },
            fast_dt: self.fast_dt,
            slow_dt: self.slow_dt,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Which track to run on: a built-in name or a track file path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackSelector {
    /// One of "lemniscate", "complex", "mini"; ignored when `path` is set.
    pub builtin: String,
    pub with_obstacles: bool,
    /// Track file path; overrides `builtin`.
    pub path: Option<PathBuf>,
}

impl Default for TrackSelector {
    fn default() -> Self {
        Self { builtin: "lemniscate".into(), with_obstacles: false, path: None }
    }
}

/// Environment knobs not covered elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSettings {
    pub drone_radius: f64,
    pub episode_horizon: usize,
    /// Override the track's laps_per_race during training (None: track value).
    pub laps_override: Option<usize>,
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self { drone_radius: 0.08, episode_horizon: 1200, laps_override: None }
    }
}

/// Evaluation defaults for `eval`, `race`, and `matrix` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub runs: usize,
    pub laps: usize,
    pub races: usize,
    pub horizon: usize,
    pub spawn_jitter: f64,
    pub randomize_params: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            runs: 50,
            laps: 3,
            races: 50,
            horizon: 3000,
            spawn_jitter: 0.15,
            randomize_params: false,
        }
    }
}

/// The whole run document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_name: String,
    pub reward_mode_name: String,
    pub out_dir: PathBuf,
    pub track: TrackSelector,
    pub quad: QuadConfig,
    pub randomization: RandomizationRanges,
    pub reward_constants: RewardConstants,
    pub obs_scales: ObsScales,
    pub env: EnvSettings,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

impl RunConfig {
    pub fn template() -> Self {
        Self {
            run_name: "run".into(),
            reward_mode_name: "sparse-competitive".into(),
            out_dir: PathBuf::from("runs"),
            ..Self::default()
        }
    }

    pub fn reward_mode(&self) -> Result<RewardMode> {
        RewardMode::parse(&self.reward_mode_name)
    }

    /// Parse a TOML document; schema errors carry the offending line.
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from a path, falling back to `$SLIPSTREAM_CONFIG_DIR/<path>` when
    /// the path does not exist as given.
    pub fn load(path: &Path) -> Result<Self> {
        let resolved = if path.exists() {
            path.to_path_buf()
        } else if let Ok(dir) = std::env::var(CONFIG_DIR_ENV) {
            let alt = Path::new(&dir).join(path);
            if alt.exists() {
                alt
            } else {
                return Err(Error::Config(format!(
                    "config not found: {} (also tried {})",
                    path.display(),
                    alt.display()
                )));
            }
        } else {
            return Err(Error::Config(format!("config not found: {}", path.display())));
        };
        let text = std::fs::read_to_string(&resolved)?;
        Self::from_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", resolved.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.reward_mode()?;
        self.quad.to_params()?;
        self.randomization.validate()?;
        self.train.validate()?;
        if self.run_name.is_empty() {
            return Err(Error::Config("run_name must not be empty".into()));
        }
        Ok(())
    }

    pub fn resolve_track(&self) -> Result<Arc<Track>> {
        let drone_radius = self.env.drone_radius;
        if let Some(path) = &self.track.path {
            let text = std::fs::read_to_string(path)?;
            return Ok(Arc::new(Track::load(&text, drone_radius)?));
        }
        let which = BuiltinTrack::parse(&self.track.builtin)?;
        let track = builtin_track(which, self.track.with_obstacles);
        track.validate(drone_radius)?;
        Ok(Arc::new(track))
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        Ok(EnvConfig {
            reward_mode: self.reward_mode()?,
            constants: self.reward_constants.clone(),
            scales: self.obs_scales,
            nominal_params: self.quad.to_params()?,
            randomization: self.randomization.clone(),
            drone_radius: self.env.drone_radius,
            episode_horizon: self.env.episode_horizon,
            spawn_entry: None,
            laps_override: self.env.laps_override,
            spawn_slot_sign: 1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_round_trips() {
        let cfg = RunConfig::template();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected_with_position() {
        let mut text = RunConfig::template().to_toml().unwrap();
        text.push_str("\nwarp_drive = true\n");
        let err = RunConfig::from_str(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("warp_drive"), "error names the bad key: {msg}");
        assert!(msg.contains("line"), "error carries a line: {msg}");
    }

    #[test]
    fn default_quad_config_matches_default_params() {
        let params = QuadConfig::default().to_params().unwrap();
        assert_eq!(params, QuadParams::default());
    }

    #[test]
    fn invalid_reward_mode_rejected() {
        let mut cfg = RunConfig::template();
        cfg.reward_mode_name = "dense-everything".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn builtin_track_resolution() {
        let mut cfg = RunConfig::template();
        cfg.track.builtin = "complex".into();
        cfg.track.with_obstacles = true;
        let track = cfg.resolve_track().unwrap();
        assert_eq!(track.name, "complex_obstacles");
        assert_eq!(track.obstacles.len(), 4);
    }

    #[test]
    fn config_dir_env_fallback() {
        let dir = std::env::temp_dir().join("slipstream_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = RunConfig::template();
        std::fs::write(dir.join("via_env.toml"), cfg.to_toml().unwrap()).unwrap();
        std::env::set_var(CONFIG_DIR_ENV, &dir);
        let loaded = RunConfig::load(Path::new("via_env.toml")).unwrap();
        std::env::remove_var(CONFIG_DIR_ENV);
        assert_eq!(loaded, cfg);
    }
}
