//! Self-describing binary checkpoints.
//!
//! Layout: the magic `SLPSTRM1`, a little-endian u64 JSON-header length, the
//! JSON header, then raw little-endian f64 arrays in this order:
//! actor parameters (layer by layer, weights row-major then bias), actor
//! log-std, actor Adam m and v, critic parameters, critic Adam m and v.
//! Loading reproduces the saved state bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ippo::FlatAdam;
use crate::net::{Mlp, NetSpec, Policy};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SLPSTRM1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    reward_mode: String,
    track_name: String,
    obs_dim: usize,
    train_iteration: u64,
    actor_spec: NetSpec,
    critic_spec: NetSpec,
    actor_opt_step: u64,
    critic_opt_step: u64,
    /// Array lengths in file order, for self-description.
    array_lens: Vec<usize>,
}

/// Everything needed to resume training or freeze a policy for evaluation.
pub struct Checkpoint {
    pub reward_mode: String,
    pub track_name: String,
    pub obs_dim: usize,
    pub train_iteration: u64,
    pub actor: Policy,
    pub critic: Mlp,
    pub actor_opt: OptState,
    pub critic_opt: OptState,
}

/// Adam moments plus step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptState {
    pub fn fresh(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn of(opt: &FlatAdam) -> Self {
        Self { m: opt.m.clone(), v: opt.v.clone(), t: opt.step_count() }
    }
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let actor_params = self.actor.mlp.flat_params();
        let log_std: Vec<f64> = self.actor.log_std.iter().cloned().collect();
        let critic_params = self.critic.flat_params();
        let arrays: Vec<&[f64]> = vec![
            &actor_params,
            &log_std,
            &self.actor_opt.m,
            &self.actor_opt.v,
            &critic_params,
            &self.critic_opt.m,
            &self.critic_opt.v,
        ];
        let header = Header {
            reward_mode: self.reward_mode.clone(),
            track_name: self.track_name.clone(),
            obs_dim: self.obs_dim,
            train_iteration: self.train_iteration,
            actor_spec: self.actor.mlp.spec.clone(),
            critic_spec: self.critic.spec.clone(),
            actor_opt_step: self.actor_opt.t,
            critic_opt_step: self.critic_opt.t,
            array_lens: arrays.iter().map(|a| a.len()).collect(),
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;

        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&(header_json.len() as u64).to_le_bytes())?;
        out.write_all(&header_json)?;
        for array in arrays {
            for value in array {
                out.write_all(&value.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic in {}", path.display())));
        }
        let mut len_bytes = [0u8; 8];
        input.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_json = vec![0u8; header_len];
        input.read_exact(&mut header_json)?;
        let header: Header = serde_json::from_slice(&header_json)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;

        let mut arrays = Vec::with_capacity(header.array_lens.len());
        for &len in &header.array_lens {
            let mut buf = vec![0u8; len * 8];
            input.read_exact(&mut buf)?;
            let array: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push(array);
        }
        if arrays.len() != 7 {
            return Err(Error::Checkpoint(format!("expected 7 arrays, found {}", arrays.len())));
        }
        let critic_opt_v = arrays.pop().unwrap();
        let critic_opt_m = arrays.pop().unwrap();
        let critic_params = arrays.pop().unwrap();
        let actor_opt_v = arrays.pop().unwrap();
        let actor_opt_m = arrays.pop().unwrap();
        let log_std = arrays.pop().unwrap();
        let actor_params = arrays.pop().unwrap();

        let actor_mlp = Mlp::from_flat(header.actor_spec.clone(), &actor_params)?;
        if log_std.len() != actor_mlp.spec.output_dim {
            return Err(Error::Checkpoint("log-std length mismatch".into()));
        }
        let critic = Mlp::from_flat(header.critic_spec.clone(), &critic_params)?;
        Ok(Checkpoint {
            reward_mode: header.reward_mode,
            track_name: header.track_name,
            obs_dim: header.obs_dim,
            train_iteration: header.train_iteration,
            actor: Policy { mlp: actor_mlp, log_std: DVector::from_vec(log_std) },
            critic,
            actor_opt: OptState { m: actor_opt_m, v: actor_opt_v, t: header.actor_opt_step },
            critic_opt: OptState { m: critic_opt_m, v: critic_opt_v, t: header.critic_opt_step },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let actor = Policy::init(NetSpec::new(42, &[16, 16], 4), &mut rng).unwrap();
        let critic = Mlp::init(NetSpec::new(84, &[16], 1), 1.0, &mut rng).unwrap();
        let n_actor = actor.mlp.spec.param_count() + 4;
        let n_critic = critic.spec.param_count();
        let mut actor_opt = OptState::fresh(n_actor);
        actor_opt.t = 12;
        actor_opt.m[3] = 0.25;
        actor_opt.v[7] = 1e-4;
        Checkpoint {
            reward_mode: "sparse-competitive".into(),
            track_name: "lemniscate".into(),
            obs_dim: 42,
            train_iteration: 345,
            actor,
            critic,
            actor_opt,
            critic_opt: OptState::fresh(n_critic),
        }
    }

    #[test]
    fn save_load_bit_exact() {
        let dir = std::env::temp_dir().join("slipstream_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("test.ckpt");
        let ck = sample_checkpoint();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(ck.actor.mlp, back.actor.mlp);
        assert_eq!(ck.actor.log_std, back.actor.log_std);
        assert_eq!(ck.critic, back.critic);
        assert_eq!(ck.actor_opt, back.actor_opt);
        assert_eq!(ck.critic_opt, back.critic_opt);
        assert_eq!(back.train_iteration, 345);
        assert_eq!(back.reward_mode, "sparse-competitive");
        // Double round-trip produces identical bytes.
        let path2 = dir.join("test2.ckpt");
        back.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = std::env::temp_dir().join("slipstream_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("garbage.ckpt");
        std::fs::write(&path, b"NOTACKPTxxxxxxxxxxxx").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
