use slipstream::control::Action;
use slipstream::env::*;
use slipstream::physics::{QuadParams, Vec3, Vec4};
use slipstream::track::{builtin_track, BuiltinTrack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn main() {
    let track = Arc::new(builtin_track(BuiltinTrack::Mini, false));
    let mut cfg = EnvConfig::new(RewardMode::SparseSingle);
    cfg.episode_horizon = 150;
    cfg.laps_override = Some(50);
    let mut p = QuadParams::default();
    p.rate_limits = Vec3::new(6.0, 6.0, 3.0);
    cfg.nominal_params = p;
    let mut env = RacingEnv::new(track, cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let hover = 2.0f64 / 3.0 - 1.0;
    let (s_thrust, s_rate) = (0.15f64, 0.2f64);
    let mut total_passes = 0usize;
    let mut crashes = 0usize;
    let n_ep = 400;
    let mut len_sum = 0usize;
    let mut cmd_cost = 0.0f64;
    for ep in 0..n_ep {
        env.reset(ep as u64).unwrap();
        while !env.episode_over() {
            let a = Action(Vec4::new(
                hover + s_thrust * rng.sample::<f64, _>(rand_distr::StandardNormal),
                s_rate * rng.sample::<f64, _>(rand_distr::StandardNormal),
                s_rate * rng.sample::<f64, _>(rand_distr::StandardNormal),
                s_rate * rng.sample::<f64, _>(rand_distr::StandardNormal),
            ));
            let step = env.step(&a, &Action::zero()).unwrap();
            cmd_cost += step.rewards[0].cmd;
        }
        len_sum += env.elapsed_steps();
        total_passes += env.status(0).gates_passed_total;
        crashes += env.status(0).crashed as usize;
    }
    println!(
        "{n_ep} eps, mean len {:.0}, crashes {crashes}, passes {total_passes} ({:.1}%/ep), cmd/step {:.3}",
        len_sum as f64 / n_ep as f64,
        100.0 * total_passes as f64 / n_ep as f64,
        cmd_cost / len_sum as f64
    );
}
