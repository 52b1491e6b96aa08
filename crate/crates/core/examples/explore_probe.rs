use slipstream::control::Action;
use slipstream::env::*;
use slipstream::physics::Vec4;
use slipstream::track::{builtin_track, BuiltinTrack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let s_thrust: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.15);
    let s_rate: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let track = Arc::new(builtin_track(BuiltinTrack::Mini, false));
    let mut cfg = EnvConfig::new(RewardMode::SparseSingle);
    cfg.episode_horizon = 300;
    cfg.laps_override = Some(50);
    let mut env = RacingEnv::new(track, cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let hover = 2.0f64 / 3.0 - 1.0;
    let mut total_passes = 0usize;
    let mut total_steps = 0usize;
    let mut crashes = 0usize;
    let n_ep = 300;
    let mut len_sum = 0usize;
    let mut max_fwd: f64 = 0.0;
    for ep in 0..n_ep {
        env.reset(ep as u64).unwrap();
        let x0 = env.state(0).position.x;
        while !env.episode_over() {
            let a = Action(Vec4::new(
                hover + s_thrust * rng.sample::<f64, _>(rand_distr::StandardNormal),
                s_rate * rng.sample::<f64, _>(rand_distr::StandardNormal),
                s_rate * rng.sample::<f64, _>(rand_distr::StandardNormal),
                s_rate * rng.sample::<f64, _>(rand_distr::StandardNormal),
            ));
            env.step(&a, &Action::zero()).unwrap();
            total_steps += 1;
            let fwd = env.state(0).position.x - x0;
            if fwd > max_fwd { max_fwd = fwd; }
        }
        len_sum += env.elapsed_steps();
        total_passes += env.status(0).gates_passed_total;
        crashes += env.status(0).crashed as usize;
    }
    println!(
        "sigma=({s_thrust},{s_rate}): {n_ep} episodes, mean len {:.0}, crashes {crashes}, passes {total_passes}, max fwd {max_fwd:.2} m",
        len_sum as f64 / n_ep as f64
    );
}
