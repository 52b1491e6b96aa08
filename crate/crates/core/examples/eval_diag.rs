use nalgebra::DVector;
use slipstream::checkpoint::Checkpoint;
use slipstream::control::Action;
use slipstream::env::*;
use slipstream::physics::{QuadParams, Vec3};
use slipstream::track::{builtin_track, BuiltinTrack};
use std::sync::Arc;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ckpt = Checkpoint::load(std::path::Path::new(&args[1])).unwrap();
    let obstacles = args.get(2).map(|s| s == "obs").unwrap_or(false);
    let track = Arc::new(builtin_track(BuiltinTrack::Lemniscate, obstacles));
    let mut cfg = EnvConfig::new(RewardMode::SparseSingle);
    cfg.randomization = RandomizationRanges::none();
    cfg.randomization.spawn_pos = 0.1;
    cfg.spawn_entry = Some(0);
    cfg.episode_horizon = 3000;
    let mut quad = QuadParams::default();
    quad.rate_limits = Vec3::new(6.0, 6.0, 3.0);
    cfg.nominal_params = quad;
    let mut env = RacingEnv::new(track, cfg).unwrap();
    for ep in 0..5 {
        let mut obs = env.reset(1000 + ep).unwrap();
        let mut speed_sum = 0.0;
        while !env.episode_over() {
            let a = ckpt.actor.act_mean(&DVector::from_column_slice(obs[0].as_slice()));
            let step = env.step(&a, &Action::zero()).unwrap();
            obs = step.observations;
            speed_sum += env.state(0).lin_vel.norm();
            for e in &step.info.events {
                if !matches!(e, RaceEvent::GatePassed{..}) {
                    println!("  ep{ep} t={} {:?} pos=({:.2},{:.2},{:.2})", env.elapsed_steps(), e, env.state(0).position.x, env.state(0).position.y, env.state(0).position.z);
                }
            }
        }
        let s = env.status(0);
        println!(
            "ep{ep}: gates {} laps {} crashed {} steps {} mean|v| {:.2}",
            s.gates_passed_total, s.laps_done, s.crashed, env.elapsed_steps(),
            speed_sum / env.elapsed_steps() as f64
        );
    }
}
