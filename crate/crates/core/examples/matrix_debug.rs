use slipstream::race::*;
use slipstream::scripted::{Pilot, WaypointPilot};
use slipstream::track::{builtin_track, BuiltinTrack};
use std::sync::Arc;

fn main() {
    let lt = Arc::new(builtin_track(BuiltinTrack::Lemniscate, false));
    for race in 0..6 {
        let mut a = WaypointPilot::default();
        let mut b = WaypointPilot { speed: 1.2, ..WaypointPilot::default() };
        let slot = if race % 2 == 0 { 1.0 } else { -1.0 };
        let seed = slipstream::ippo::derive_seed(23, 2, race);
        let r = run_race(&mut a, &mut b, lt.clone(), 2, seed, slot, &EvalOptions::default()).unwrap();
        println!("race {race}: winner {:?} crash={:?} steps={} laps_e={} laps_a={}",
            r.winner, r.terminal_crash, r.steps, r.lap_times[0].len(), r.lap_times[1].len());
    }
}
