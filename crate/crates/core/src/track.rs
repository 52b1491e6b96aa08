//! Track geometry: gates, obstacles, bounds, spawn slots, plus gate-pass and
//! collision detection and the built-in track layouts.
//!
//! A [`Track`] is immutable after load and shared read-only across any number
//! of environments. Gate orientation is stored as yaw/pitch (zero roll) so
//! track files round-trip exactly; the derived orthonormal frame used by the
//! geometry checks is cached in [`GateFrame`].

use serde::{Deserialize, Serialize};

use crate::physics::Vec3;
use crate::{Error, Result};

/// A square gate. `yaw`/`pitch` orient the pass direction (the plane normal);
/// roll is always zero so `up` stays as vertical as the pitch allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub center: Vec3,
    /// Heading of the pass direction [rad], about world z.
    pub yaw: f64,
    /// Elevation of the pass direction [rad].
    pub pitch: f64,
    /// Half the opening side length [m]; 0.5 for a 1 m x 1 m gate.
    pub half_size: f64,
    /// Width of the square frame bars around the opening [m].
    pub frame_thickness: f64,
}

/// Precomputed orthonormal gate frame: `side x up = normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateFrame {
    pub center: Vec3,
    pub normal: Vec3,
    pub side: Vec3,
    pub up: Vec3,
    pub half_size: f64,
    pub frame_thickness: f64,
}

impl Gate {
    pub fn new(center: Vec3, yaw: f64, pitch: f64, half_size: f64, frame_thickness: f64) -> Self {
        Self { center, yaw, pitch, half_size, frame_thickness }
    }

    /// Unit pass direction.
    pub fn normal(&self) -> Vec3 {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        Vec3::new(cp * cy, cp * sy, sp)
    }

    /// Unit in-plane vertical direction.
    pub fn up(&self) -> Vec3 {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        Vec3::new(-sp * cy, -sp * sy, cp)
    }

    pub fn frame(&self) -> GateFrame {
        let normal = self.normal();
        let up = self.up();
        GateFrame {
            center: self.center,
            normal,
            side: up.cross(&normal),
            up,
            half_size: self.half_size,
            frame_thickness: self.frame_thickness,
        }
    }
}

impl GateFrame {
    /// The four opening corners in a fixed order:
    /// (-side,-up), (+side,-up), (+side,+up), (-side,+up).
    pub fn corners(&self) -> [Vec3; 4] {
        let h = self.half_size;
        [
            self.center - self.side * h - self.up * h,
            self.center + self.side * h - self.up * h,
            self.center + self.side * h + self.up * h,
            self.center - self.side * h + self.up * h,
        ]
    }

    /// In-plane coordinates (along `side`, along `up`) and signed normal
    /// distance of a point.
    pub fn local(&self, point: &Vec3) -> (f64, f64, f64) {
        let d = point - self.center;
        (d.dot(&self.side), d.dot(&self.up), d.dot(&self.normal))
    }
}

/// True iff the segment `prev -> cur` crosses the gate plane from the negative
/// to the positive side of the normal, with the crossing point inside the
/// opening square.
pub fn gate_pass_check(prev_pos: &Vec3, cur_pos: &Vec3, gate: &GateFrame) -> bool {
    let s0 = (prev_pos - gate.center).dot(&gate.normal);
    let s1 = (cur_pos - gate.center).dot(&gate.normal);
    if !(s0 < 0.0 && s1 >= 0.0) {
        return false;
    }
    let t = s0 / (s0 - s1);
    let hit = prev_pos + (cur_pos - prev_pos) * t;
    let (u, v, _) = gate.local(&hit);
    u.abs() <= gate.half_size && v.abs() <= gate.half_size
}

/// Euclidean distance to the gate center (the dense-progress yardstick).
pub fn gate_distance(pos: &Vec3, gate: &Gate) -> f64 {
    (pos - gate.center).norm()
}

/// Static track obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    /// Vertical cylinder standing on `base` (base center), extending up by `height`.
    Cylinder { base: Vec3, radius: f64, height: f64 },
    /// Upright box, yawed about world z.
    Box { center: Vec3, yaw: f64, half_extents: Vec3 },
}

impl Obstacle {
    /// Distance from a point to the obstacle surface (0 inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        match self {
            Obstacle::Cylinder { base, radius, height } => {
                let dx = p.x - base.x;
                let dy = p.y - base.y;
                let radial = (dx * dx + dy * dy).sqrt() - radius;
                let below = base.z - p.z;
                let above = p.z - (base.z + height);
                let axial = below.max(above);
                let outside_r = radial.max(0.0);
                let outside_z = axial.max(0.0);
                let outside = (outside_r * outside_r + outside_z * outside_z).sqrt();
                if outside > 0.0 {
                    outside
                } else {
                    // Inside: negative of the closest face distance.
                    radial.max(axial)
                }
            }
            Obstacle::Box { center, yaw, half_extents } => {
                let (s, c) = yaw.sin_cos();
                let d = p - center;
                let local = Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z);
                let q = Vec3::new(
                    local.x.abs() - half_extents.x,
                    local.y.abs() - half_extents.y,
                    local.z.abs() - half_extents.z,
                );
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                if outside > 0.0 {
                    outside
                } else {
                    q.x.max(q.y).max(q.z)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Obstacle::Cylinder { radius, height, .. } => *radius > 0.0 && *height > 0.0,
            Obstacle::Box { half_extents, .. } => half_extents.iter().all(|&e| e > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTrack(format!("non-positive obstacle dimensions: {self:?}")))
        }
    }
}

/// Axis-aligned track bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Spawn slot: drones start `back` meters behind the plane of the gate at
/// `seq_index`, offset laterally by +-`side`, facing the gate, already
/// moving toward it at `speed` (a flying start).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnSpec {
    pub seq_index: usize,
    pub back: f64,
    pub side: f64,
    #[serde(default)]
    pub speed: f64,
}

/// Result of a collision query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collision {
    Free,
    /// Touching a gate frame or obstacle; penalized but recoverable.
    Contact,
    /// Ground or out-of-bounds; ends the episode for this agent.
    Terminal,
}

/// Ordered gate sequence plus geometry. The sequence may repeat a gate (the
/// lemniscate crossing); consecutive entries must have distinct centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub name: String,
    pub laps_per_race: usize,
    /// Indices into `gates`, in pass order; one lap = the whole sequence.
    pub sequence: Vec<usize>,
    pub bounds: Aabb,
    pub gates: Vec<Gate>,
    pub obstacles: Vec<Obstacle>,
    pub spawns: Vec<SpawnSpec>,
}

impl Track {
    pub fn validate(&self, drone_radius: f64) -> Result<()> {
        let err = |msg: String| Err(Error::InvalidTrack(msg));
        if self.gates.is_empty() || self.sequence.is_empty() {
            return err("track needs at least one gate and one sequence entry".into());
        }
        if self.laps_per_race == 0 {
            return err("laps_per_race must be at least 1".into());
        }
        if let Some(&bad) = self.sequence.iter().find(|&&i| i >= self.gates.len()) {
            return err(format!("sequence references gate {bad} of {}", self.gates.len()));
        }
        for w in self.sequence.windows(2) {
            if self.gates[w[0]].center == self.gates[w[1]].center {
                return err(format!("consecutive sequence entries {w:?} share a gate center"));
            }
        }
        for ob in &self.obstacles {
            ob.validate()?;
        }
        for g in &self.gates {
            if g.half_size <= 0.0 || g.frame_thickness <= 0.0 {
                return err(format!("non-positive gate dimensions: {g:?}"));
            }
        }
        if self.spawns.is_empty() {
            return err("track needs at least one spawn spec".into());
        }
        for spawn in &self.spawns {
            if spawn.seq_index >= self.sequence.len() {
                return err(format!("spawn references sequence entry {}", spawn.seq_index));
            }
            for slot in [-1.0, 1.0] {
                let pos = self.spawn_position(spawn, slot);
                if !self.bounds.contains(&pos) {
                    return err(format!("spawn slot at {pos:?} is outside the bounds"));
                }
                if self.collision_check(&pos, drone_radius) != Collision::Free {
                    return err(format!("spawn slot at {pos:?} is not collision-free"));
                }
            }
        }
        Ok(())
    }

    /// Gate index for a sequence entry.
    pub fn gate_at(&self, seq_entry: usize) -> &Gate {
        &self.gates[self.sequence[seq_entry]]
    }

    /// Nominal spawn position for one slot (+1 / -1 lateral side).
    pub fn spawn_position(&self, spawn: &SpawnSpec, slot: f64) -> Vec3 {
        let frame = self.gate_at(spawn.seq_index).frame();
        frame.center - frame.normal * spawn.back + frame.side * (slot * spawn.side)
    }

    /// Collision state of a drone bounding sphere at `pos`.
    ///
    /// Ground and out-of-bounds are terminal. Touching a gate frame or an
    /// obstacle is a recoverable contact until the sphere penetrates past
    /// half its radius, which counts as a terminal crash (the same depth rule
    /// as drone-vs-drone contact).
    pub fn collision_check(&self, pos: &Vec3, radius: f64) -> Collision {
        assert!(radius > 0.0, "drone bounding radius must be positive");
        if pos.z < radius || !self.bounds.contains(pos) {
            return Collision::Terminal;
        }
        let mut contact = false;
        for gate in &self.gates {
            match classify_surface(frame_bar_distance(&gate.frame(), pos), radius) {
                Collision::Terminal => return Collision::Terminal,
                Collision::Contact => contact = true,
                Collision::Free => {}
            }
        }
        for ob in &self.obstacles {
            match classify_surface(ob.distance(pos), radius) {
                Collision::Terminal => return Collision::Terminal,
                Collision::Contact => contact = true,
                Collision::Free => {}
            }
        }
        if contact {
            Collision::Contact
        } else {
            Collision::Free
        }
    }

    /// Serialize to the track file format.
    pub fn save(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidTrack(format!("serialize: {e}")))
    }

    /// Parse a track file and validate it.
    pub fn load(text: &str, drone_radius: f64) -> Result<Track> {
        let track: Track =
            toml::from_str(text).map_err(|e| Error::InvalidTrack(format!("parse: {e}")))?;
        track.validate(drone_radius)?;
        Ok(track)
    }
}

/// Sphere-vs-surface classification from the (signed) distance between the
/// sphere center and the surface.
pub fn classify_surface(distance: f64, radius: f64) -> Collision {
    if distance < 0.5 * radius {
        Collision::Terminal
    } else if distance < radius {
        Collision::Contact
    } else {
        Collision::Free
    }
}

/// Distance from a point to the nearest of the four frame bars around the
/// gate opening. Bars have a square cross-section of side `frame_thickness`.
pub fn frame_bar_distance(gate: &GateFrame, pos: &Vec3) -> f64 {
    let (u, v, n) = gate.local(pos);
    let h = gate.half_size;
    let w = gate.frame_thickness;
    let outer = h + w;
    // Left/right bars: u in [h, h+w] mirrored, v spanning the outer square.
    let d_lr = box_dist(u.abs() - (h + w / 2.0), v, n, w / 2.0, outer, w / 2.0);
    // Top/bottom bars.
    let d_tb = box_dist(u, v.abs() - (h + w / 2.0), n, outer, w / 2.0, w / 2.0);
    d_lr.min(d_tb)
}

fn box_dist(x: f64, y: f64, z: f64, ex: f64, ey: f64, ez: f64) -> f64 {
    let qx = (x.abs() - ex).max(0.0);
    let qy = (y.abs() - ey).max(0.0);
    let qz = (z.abs() - ez).max(0.0);
    (qx * qx + qy * qy + qz * qz).sqrt()
}

/// Built-in track layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinTrack {
    /// Figure-eight, 5 m x 5 m, five gates with the crossing gate passed twice.
    Lemniscate,
    /// 8 m x 7 m, six gates including a split-S.
    Complex,
    /// Single gate on a short straight; the learning smoke-test layout.
    Mini,
}

impl BuiltinTrack {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "lemniscate" | "lt" => Ok(Self::Lemniscate),
            "complex" | "ct" => Ok(Self::Complex),
            "mini" => Ok(Self::Mini),
            other => Err(Error::InvalidTrack(format!("unknown built-in track: {other}"))),
        }
    }
}

/// Construct one of the built-in tracks.
pub fn builtin_track(which: BuiltinTrack, with_obstacles: bool) -> Track {
    match which {
        BuiltinTrack::Lemniscate => lemniscate_track(with_obstacles),
        BuiltinTrack::Complex => complex_track(with_obstacles),
        BuiltinTrack::Mini => mini_track(),
    }
}

const GATE_HALF: f64 = 0.5;
const FRAME_T: f64 = 0.05;
const GATE_Z: f64 = 1.2;

fn deg(d: f64) -> f64 {
    d.to_radians()
}

/// Figure-eight with the crossing gate at the origin passed twice per lap
/// (headings NE then NW, so its normal is +y). Gates 1 and 3 are tilted
/// toward the racing line so their exits point at the next approach instead
/// of the nearest wall.
fn lemniscate_track(with_obstacles: bool) -> Track {
    let gates = vec![
        Gate::new(Vec3::new(0.0, 0.0, GATE_Z), deg(90.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(1.2, 0.8, GATE_Z), deg(-20.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(1.7, 0.0, GATE_Z), deg(-90.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(1.2, -0.8, GATE_Z), deg(160.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(-1.7, 0.0, GATE_Z), deg(-90.0), 0.0, GATE_HALF, FRAME_T),
    ];
    let sequence = vec![0, 1, 2, 3, 0, 4];
    let obstacles = if with_obstacles {
        // Two overlapping cylinders astride the climb from the crossing gate
        // to gate 1: the straight line is blocked and the racing line must bow
        // outward.
        vec![
            Obstacle::Cylinder { base: Vec3::new(0.62, 0.34, 0.0), radius: 0.22, height: 2.4 },
            Obstacle::Cylinder { base: Vec3::new(0.82, 0.48, 0.0), radius: 0.22, height: 2.4 },
        ]
    } else {
        Vec::new()
    };
    let spawns = (0..sequence.len())
        .map(|i| SpawnSpec { seq_index: i, back: if i == 3 { 0.8 } else { 1.0 }, side: 0.3, speed: 1.2 })
        .collect();
    Track {
        name: if with_obstacles { "lemniscate_obstacles".into() } else { "lemniscate".into() },
        laps_per_race: 3,
        sequence,
        bounds: Aabb { min: Vec3::new(-2.5, -2.5, 0.0), max: Vec3::new(2.5, 2.5, 3.0) },
        gates,
        obstacles,
        spawns,
    }
}

/// Six gates over 8 m x 7 m; gates 2/3 form the split-S (stacked, opposite
/// pass directions).
fn complex_track(with_obstacles: bool) -> Track {
    let gates = vec![
        Gate::new(Vec3::new(-2.0, -2.5, 1.2), 0.0, 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(2.4, -2.0, 1.5), deg(30.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(3.0, 1.2, 2.3), deg(90.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(3.0, 1.2, 0.9), deg(-90.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(0.0, 0.6, 1.3), deg(180.0), 0.0, GATE_HALF, FRAME_T),
        Gate::new(Vec3::new(-3.1, 0.5, 1.4), deg(-90.0), 0.0, GATE_HALF, FRAME_T),
    ];
    let sequence = vec![0, 1, 2, 3, 4, 5];
    let obstacles = if with_obstacles {
        vec![
            Obstacle::Cylinder { base: Vec3::new(0.4, -2.1, 0.0), radius: 0.3, height: 2.6 },
            Obstacle::Cylinder { base: Vec3::new(1.7, 0.9, 0.0), radius: 0.3, height: 2.6 },
            Obstacle::Box {
                center: Vec3::new(-1.6, 0.6, 1.3),
                yaw: deg(15.0),
                half_extents: Vec3::new(0.3, 0.3, 1.3),
            },
            Obstacle::Cylinder { base: Vec3::new(-2.8, -1.4, 0.0), radius: 0.3, height: 2.6 },
        ]
    } else {
        Vec::new()
    };
    let spawns = (0..sequence.len())
        .map(|i| SpawnSpec { seq_index: i, back: 1.1, side: 0.4, speed: 1.2 })
        .collect();
    Track {
        name: if with_obstacles { "complex_obstacles".into() } else { "complex".into() },
        laps_per_race: 3,
        sequence,
        bounds: Aabb { min: Vec3::new(-4.0, -3.5, 0.0), max: Vec3::new(4.0, 3.5, 3.2) },
        gates,
        obstacles,
        spawns,
    }
}

/// One oversized gate a meter ahead of the spawn; passing it again means
/// flying a loop. Built as a learning fixture: the opening is generous so
/// undirected exploration finds it.
fn mini_track() -> Track {
    Track {
        name: "mini".into(),
        laps_per_race: 3,
        sequence: vec![0],
        bounds: Aabb { min: Vec3::new(-2.0, -2.5, 0.0), max: Vec3::new(5.5, 2.5, 3.0) },
        gates: vec![Gate::new(Vec3::new(2.0, 0.0, 1.2), 0.0, 0.0, 0.7, FRAME_T)],
        obstacles: Vec::new(),
        spawns: vec![SpawnSpec { seq_index: 0, back: 1.0, side: 0.35, speed: 0.8 }],
    }
}
