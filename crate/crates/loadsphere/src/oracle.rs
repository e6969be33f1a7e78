//! Synthetic corpora with known ground truth: a gradual-change process whose
//! samples carry a latent ordering, plus planted defective-meter rows for
//! evaluating the outlier detector.
//!
//! Each sample mixes two Gaussian bumps, one fixed at mu = 1 and one whose
//! center sweeps with the sample index, so consecutive samples are similar and
//! the Gram matrix of the ordered corpus is banded.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::profiles::ProfileMatrix;

/// Discretization window; wide enough that both bump centers stay inside.
pub const T_MIN: f64 = -6.0;
pub const T_MAX: f64 = 6.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticProcessConfig {
    pub samples: usize,
    pub steps: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticProcessConfig {
    fn default() -> Self {
        Self { samples: 100, steps: 20, noise_scale: 0.03, seed: 0 }
    }
}

/// How many defective rows of each kind to append.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PlantedOutlierSpec {
    /// Meters recording i.i.d. Gaussian noise.
    pub noise_meters: usize,
    /// Meters storing absolute values, turning a midday dip into a bump.
    pub absolute_value_meters: usize,
    /// Areas with midnight operations: consumption peaks at the day edges.
    pub midnight_meters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowLabel {
    Clean,
    NoiseMeter,
    AbsoluteValueMeter,
    MidnightMeter,
}

fn gaussian_bump(t: f64, mu: f64) -> f64 {
    (-0.5 * (t - mu) * (t - mu)).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn mixture_weight(i: usize) -> f64 {
    0.02 * i as f64 - 1.0
}

fn moving_center(i: usize) -> f64 {
    0.08 * i as f64 - 4.0
}

/// Evaluate sample `i` (1-based) of the noiseless process at time `t`.
pub fn process_value(i: usize, t: f64) -> f64 {
    let tau = mixture_weight(i);
    tau * gaussian_bump(t, 1.0) + (1.0 - tau) * gaussian_bump(t, moving_center(i))
}

/// Generate the gradual-change corpus. Returns the profiles and, for each
/// output row, the original (0-based) sample index; without shuffling this is
/// the identity.
pub fn generate_process(
    config: &SyntheticProcessConfig,
    shuffle: bool,
) -> Result<(ProfileMatrix, Vec<usize>)> {
    let m = config.samples;
    let d = config.steps;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut values = DMatrix::zeros(m, d);
    for i in 0..m {
        for j in 0..d {
            let t = T_MIN + (T_MAX - T_MIN) * j as f64 / (d - 1) as f64;
            let eps: f64 = rng.sample(StandardNormal);
            values[(i, j)] = process_value(i + 1, t) + config.noise_scale * eps;
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    if shuffle {
        order.shuffle(&mut rng);
        let shuffled = DMatrix::from_fn(m, d, |i, j| values[(order[i], j)]);
        values = shuffled;
    }
    let ids: Vec<String> = order.iter().map(|&i| format!("s{i:03}")).collect();
    let profiles = ProfileMatrix::from_values(values, ids)?;
    Ok((profiles, order))
}

/// Append defective rows to a base corpus, returning per-row labels.
pub fn plant_outliers(
    base: &ProfileMatrix,
    spec: &PlantedOutlierSpec,
    seed: u64,
) -> Result<(ProfileMatrix, Vec<RowLabel>)> {
    let m = base.nrows();
    let d = base.ncols();
    let extra = spec.noise_meters + spec.absolute_value_meters + spec.midnight_meters;
    let mut labels = vec![RowLabel::Clean; m];
    if extra == 0 {
        return Ok((base.clone(), labels));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(m + extra, d);
    values.view_mut((0, 0), (m, d)).copy_from(base.values());
    let mut ids: Vec<String> = base.meter_ids().to_vec();
    let mut row = m;

    for k in 0..spec.noise_meters {
        for j in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            values[(row, j)] = e;
        }
        ids.push(format!("noise{k:03}"));
        labels.push(RowLabel::NoiseMeter);
        row += 1;
    }
    for k in 0..spec.absolute_value_meters {
        // PV-shaped profile: morning/evening consumption with a negative
        // midday dip, recorded in absolute value.
        for j in 0..d {
            let t = j as f64 / (d - 1) as f64;
            let morning = 0.6 * (-0.5 * ((t - 0.25) / 0.08).powi(2)).exp();
            let evening = 0.8 * (-0.5 * ((t - 0.8) / 0.08).powi(2)).exp();
            let pv_dip = -1.2 * (-0.5 * ((t - 0.5) / 0.1).powi(2)).exp();
            let e: f64 = rng.sample(StandardNormal);
            values[(row, j)] = (morning + evening + pv_dip + 0.02 * e).abs();
        }
        ids.push(format!("absval{k:03}"));
        labels.push(RowLabel::AbsoluteValueMeter);
        row += 1;
    }
    for k in 0..spec.midnight_meters {
        for j in 0..d {
            let t = j as f64 / (d - 1) as f64;
            // Peak wrapped around midnight, valley during the day.
            let edge = (2.0 * std::f64::consts::PI * t).cos();
            let e: f64 = rng.sample(StandardNormal);
            values[(row, j)] = 0.5 + 0.4 * edge + 0.02 * e;
        }
        ids.push(format!("midnight{k:03}"));
        labels.push(RowLabel::MidnightMeter);
        row += 1;
    }

    let profiles = ProfileMatrix::new(values, ids, base.resolution_minutes())?;
    Ok((profiles, labels))
}
