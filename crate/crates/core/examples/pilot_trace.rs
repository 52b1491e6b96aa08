use slipstream::control::Action;
use slipstream::env::{EnvConfig, RacingEnv, RandomizationRanges, RewardMode, EGO};
use slipstream::scripted::{AgentView, Pilot, WaypointPilot};
use slipstream::track::{builtin_track, BuiltinTrack};
use std::sync::Arc;

fn main() {
    let with_obs = std::env::args().nth(1).map(|s| s == "obs").unwrap_or(false);
    let track = Arc::new(builtin_track(BuiltinTrack::Lemniscate, with_obs));
    let mut cfg = EnvConfig::new(RewardMode::SparseSingle);
    cfg.randomization = RandomizationRanges::none();
    cfg.spawn_entry = Some(0);
    cfg.episode_horizon = 3000;
    let mut env = RacingEnv::new(track.clone(), cfg).unwrap();
    let mut pilot = WaypointPilot::default();
    let obs = env.reset(17).unwrap();
    let mut obs = obs;
    let mut t = 0;
    while !env.episode_over() {
        let action = {
            let view = AgentView {
                obs: &obs[EGO],
                state: env.state(EGO),
                status: env.status(EGO),
                params: env.params(EGO),
                track: &track,
                target_gate: env.target_gate(EGO),
            };
            pilot.act(&view)
        };
        let step = env.step(&action, &Action::zero()).unwrap();
        obs = step.observations;
        for e in &step.info.events {
            println!("t={t} {:?} pos={:?}", e, env.state(EGO).position.as_slice());
        }
        if t % 25 == 0 {
            let s = env.state(EGO);
            println!(
                "t={t} pos=({:.2},{:.2},{:.2}) v=({:.2},{:.2},{:.2}) target={} status={:?}",
                s.position.x, s.position.y, s.position.z,
                s.lin_vel.x, s.lin_vel.y, s.lin_vel.z,
                env.target_gate(EGO), env.status(EGO)
            );
        }
        t += 1;
    }
    println!("final status: {:?} steps={t}", env.status(EGO));
}
