//! Synthetic feature generator.
//!
//! Draws a Gaussian identity cluster per client and displaces attack frames
//! along a fixed unit direction per attack type, which mimics the gross
//! geometry of presentation-attack features: client identity dominates,
//! attacks sit on a consistent offset of the claimed client's cluster.
//!
//! Clients are assigned to session splits round-robin by index
//! (`0 -> dev, 1 -> test, 2 -> train`), so dev/test subjects are disjoint
//! from the train-split subjects, while every client receives enrolment
//! videos. All randomness comes from one seeded ChaCha12 stream consumed in
//! a fixed order, so a config reproduces its dataset bit-for-bit on any
//! platform.

use super::{Dataset, FeatureRecord, Label, SplitName};
use crate::error::{Error, Result};
use crate::linalg::{l2_normalize, Vector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Videos generated per client for each split that applies to the client.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVideoCounts {
    /// Real-access enrolment videos, generated for every client.
    pub enrolment: u32,
    /// Real-access videos for clients assigned to the train split.
    pub train: u32,
    /// Videos per label for clients assigned to the dev split.
    pub dev: u32,
    /// Videos per label for clients assigned to the test split.
    pub test: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_clients: u32,
    pub dim: u32,
    pub frames_per_video: u32,
    pub videos: SplitVideoCounts,
    /// Scale of client means around the origin.
    pub client_spread: f64,
    /// Isotropic noise around each mean, shared by real and attack frames.
    pub real_noise: f64,
    /// Length of the displacement applied to attack frames. Zero makes the
    /// attack distribution identical to the real one.
    pub attack_shift: f64,
    pub attack_types: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_clients: 10,
            dim: 32,
            frames_per_video: 6,
            videos: SplitVideoCounts { enrolment: 18, train: 4, dev: 6, test: 6 },
            client_spread: 5.0,
            real_noise: 1.0,
            attack_shift: 3.0,
            attack_types: vec!["print".into(), "mobile".into(), "highdef".into()],
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients < 2 {
            return Err(Error::Validation(
                "need at least 2 clients so dev and test splits are both populated".into(),
            ));
        }
        if self.dim == 0 {
            return Err(Error::Validation("dim must be positive".into()));
        }
        if self.frames_per_video == 0 {
            return Err(Error::Validation("frames_per_video must be positive".into()));
        }
        let v = &self.videos;
        if v.enrolment == 0 || v.train == 0 || v.dev == 0 || v.test == 0 {
            return Err(Error::Validation("video counts must all be positive".into()));
        }
        if !(self.client_spread > 0.0 && self.client_spread.is_finite()) {
            return Err(Error::Validation("client_spread must be a positive finite number".into()));
        }
        if !(self.real_noise > 0.0 && self.real_noise.is_finite()) {
            return Err(Error::Validation("real_noise must be a positive finite number".into()));
        }
        if !(self.attack_shift >= 0.0 && self.attack_shift.is_finite()) {
            return Err(Error::Validation("attack_shift must be a non-negative finite number".into()));
        }
        if self.attack_types.is_empty() {
            return Err(Error::Validation("need at least one attack type".into()));
        }
        for t in &self.attack_types {
            if !super::valid_id(t) {
                return Err(Error::Validation(format!("invalid attack type {t:?}")));
            }
        }
        Ok(())
    }
}

fn gauss(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Session split for client index `i`. Starting with dev guarantees that
/// n_clients >= 2 populates both threshold calibration and final scoring.
fn session_split(i: u32) -> SplitName {
    match i % 3 {
        0 => SplitName::Dev,
        1 => SplitName::Test,
        _ => SplitName::Train,
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let dim = cfg.dim as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    // One unit direction per attack type, shared by all clients.
    let mut attack_dirs = Vec::with_capacity(cfg.attack_types.len());
    for _ in &cfg.attack_types {
        let raw = Vector::new(gauss(&mut rng, dim))?;
        attack_dirs.push(l2_normalize(&raw)?);
    }

    let mut ds = Dataset::new(dim)?;
    for ci in 0..cfg.n_clients {
        let client_id = format!("client{ci:03}");
        let mean: Vec<f64> = gauss(&mut rng, dim).iter().map(|z| cfg.client_spread * z).collect();

        let emit_video = |ds: &mut Dataset,
                              rng: &mut ChaCha12Rng,
                              split: SplitName,
                              video_id: String,
                              attack: Option<usize>|
         -> Result<()> {
            for f in 0..cfg.frames_per_video {
                let noise = gauss(rng, dim);
                let mut x: Vec<f64> =
                    (0..dim).map(|d| mean[d] + cfg.real_noise * noise[d]).collect();
                let (label, attack_type) = match attack {
                    None => (Label::Real, None),
                    Some(t) => {
                        for d in 0..dim {
                            x[d] += cfg.attack_shift * attack_dirs[t][d];
                        }
                        (Label::Attack, Some(cfg.attack_types[t].clone()))
                    }
                };
                let record = FeatureRecord::new(
                    client_id.clone(),
                    label,
                    attack_type,
                    video_id.clone(),
                    f,
                    Vector::new(x)?,
                )?;
                ds.push(split, record)?;
            }
            Ok(())
        };

        for v in 0..cfg.videos.enrolment {
            emit_video(&mut ds, &mut rng, SplitName::Enrolment, format!("{client_id}_enrol{v:03}"), None)?;
        }
        match session_split(ci) {
            SplitName::Train => {
                for v in 0..cfg.videos.train {
                    emit_video(&mut ds, &mut rng, SplitName::Train, format!("{client_id}_train{v:03}"), None)?;
                }
            }
            split @ (SplitName::Dev | SplitName::Test) => {
                let count = if split == SplitName::Dev { cfg.videos.dev } else { cfg.videos.test };
                let tag = split.as_str();
                for v in 0..count {
                    emit_video(&mut ds, &mut rng, split, format!("{client_id}_{tag}-real{v:03}"), None)?;
                }
                for v in 0..count {
                    let t = v as usize % cfg.attack_types.len();
                    emit_video(
                        &mut ds,
                        &mut rng,
                        split,
                        format!("{client_id}_{tag}-att{v:03}"),
                        Some(t),
                    )?;
                }
            }
            SplitName::Enrolment => unreachable!("session_split never yields enrolment"),
        }
    }
    Ok(ds)
}
