//! Empirical constant converting a speed bound into a pinching bound.
//!
//! Given `C`, search `{tau in Gamma_+ : tau_max <= C f_*(tau)}` for the
//! supremum of `tau_max / tau_min`. By homogeneity we fix `tau_max = 1` and
//! draw the other radii log-uniformly from `[10^{-r}, 1]`, widening `r` one
//! decade per round until the supremum stops moving. Some draws pin radii to
//! `tau_max` so faces of the sample box are searched too.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvfn::CurvatureFunction;
use crate::error::{IcfError, Result};

const MAX_ROUNDS: u32 = 12;
const SAMPLES_PER_ROUND: usize = 40_000;
const STABLE_REL_CHANGE: f64 = 1e-2;
const SEED: u64 = 0xc0ffee;
const FACE_PROBABILITY: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum PinchingBound {
    Bounded { constant: f64, rounds: u32 },
    Unbounded { last_sup: f64, rounds: u32 },
}

impl PinchingBound {
    pub fn constant(&self) -> Option<f64> {
        match self {
            PinchingBound::Bounded { constant, .. } => Some(*constant),
            PinchingBound::Unbounded { .. } => None,
        }
    }
}

pub fn pinching_bound_constant(f: &CurvatureFunction, c: f64) -> Result<PinchingBound> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(IcfError::Config(format!("C must be positive, got {c}")));
    }
    let n = f.dim();
    let dual = f.dual();
    let mut prev: Option<f64> = None;
    for round in 1..=MAX_ROUNDS {
        let lo = -(round as f64);
        let sup = (0..SAMPLES_PER_ROUND)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ ((round as u64) << 32) ^ k as u64);
                let mut tau = vec![1.0; n];
                for x in tau.iter_mut().skip(1) {
                    // extremal configurations often have several radii equal to tau_max
                    if !rng.gen_bool(FACE_PROBABILITY) {
                        *x = 10f64.powf(rng.gen_range(lo..0.0));
                    }
                }
                if 1.0 <= c * dual.value_unchecked(&tau) {
                    1.0 / tau.iter().copied().fold(1.0, f64::min)
                } else {
                    1.0
                }
            })
            .reduce(|| 1.0, f64::max);
        if let Some(p) = prev {
            if (sup - p).abs() <= STABLE_REL_CHANGE * p {
                return Ok(PinchingBound::Bounded { constant: sup, rounds: round });
            }
        }
        prev = Some(sup);
    }
    Ok(PinchingBound::Unbounded {
        last_sup: prev.unwrap_or(1.0),
        rounds: MAX_ROUNDS,
    })
}
