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
    let track = Arc::new(builtin_track(BuiltinTrack::Lemniscate, false));
    for entry in 0..6 {
        let mut cfg = EnvConfig::new(RewardMode::SparseSingle);
        cfg.randomization = RandomizationRanges::none();
        cfg.randomization.spawn_pos = 0.1;
        cfg.spawn_entry = Some(entry);
        cfg.episode_horizon = 900;
        let mut quad = QuadParams::default();
        quad.rate_limits = Vec3::new(6.0, 6.0, 3.0);
        cfg.nominal_params = quad;
        let mut env = RacingEnv::new(track.clone(), cfg).unwrap();
        let mut obs = env.reset(500 + entry as u64).unwrap();
        let mut crash_pos = None;
        while !env.episode_over() {
            let a = ckpt.actor.act_mean(&DVector::from_column_slice(obs[0].as_slice()));
            let step = env.step(&a, &Action::zero()).unwrap();
            obs = step.observations;
            for e in &step.info.events {
                if matches!(e, RaceEvent::TerminalCrash { .. }) {
                    let p = env.state(0).position;
                    crash_pos = Some((env.elapsed_steps(), p.x, p.y, p.z));
                }
            }
        }
        let s = env.status(0);
        println!(
            "entry {entry}: gates {:2} laps {} steps {:4} crash {:?}",
            s.gates_passed_total, s.laps_done, env.elapsed_steps(), crash_pos
        );
    }
}
