//! Arrival models: bursty M2M activations (uniform or Beta-shaped over the
//! horizon) and Poisson H2H calls, in both expected-value and sampled form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{ModelError, Result};
use crate::grid::SlotGrid;

/// Traffic source feeding the RA channel.
///
/// M2M variants describe `n_devices` machines activating once during the
/// horizon; the H2H variant is a per-slot Poisson stream of human calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArrivalModel {
    /// Machines activate uniformly over `[0, T]`.
    M2mUniform { n_devices: u64 },
    /// Machines activate with a Beta(alpha, beta) profile over `[0, T]`.
    M2mBeta {
        alpha: f64,
        beta: f64,
        n_devices: u64,
    },
    /// Human calls arrive as Poisson(rate_per_slot) per RA slot.
    H2hPoisson { rate_per_slot: f64 },
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalModel::M2mUniform { .. } => Ok(()),
            ArrivalModel::M2mBeta { alpha, beta, .. } => {
                if alpha > 0.0 && beta > 0.0 {
                    Ok(())
                } else {
                    Err(ModelError::InvalidParameter(
                        "Beta shape parameters must be positive".into(),
                    ))
                }
            }
            ArrivalModel::H2hPoisson { rate_per_slot } => {
                if rate_per_slot >= 0.0 {
                    Ok(())
                } else {
                    Err(ModelError::InvalidParameter(
                        "H2H rate must be nonnegative".into(),
                    ))
                }
            }
        }
    }

    pub fn is_m2m(&self) -> bool {
        !matches!(self, ArrivalModel::H2hPoisson { .. })
    }
}

/// Expected number of M2M activations attached to slot `i`: the device count
/// times the activation density integrated over `(t_{i-1}, t_i]`.
pub fn m2m_new_arrivals(model: &ArrivalModel, grid: &SlotGrid, i: usize) -> Result<f64> {
    grid.check_slot(i)?;
    model.validate()?;
    let horizon = grid.horizon_ms() as f64;
    let lo = if i == 1 {
        0.0
    } else {
        grid.slot_time_ms(i - 1) as f64
    };
    let hi = grid.slot_time_ms(i) as f64;
    match *model {
        ArrivalModel::M2mUniform { n_devices } => Ok(n_devices as f64 * (hi - lo) / horizon),
        ArrivalModel::M2mBeta {
            alpha,
            beta,
            n_devices,
        } => {
            let mass = beta_reg(alpha, beta, hi / horizon) - beta_reg(alpha, beta, lo / horizon);
            Ok(n_devices as f64 * mass)
        }
        ArrivalModel::H2hPoisson { .. } => Err(ModelError::ExpectedM2m),
    }
}

/// Mean H2H new arrivals in slot `i` (time-homogeneous).
pub fn h2h_mean(model: &ArrivalModel, _i: usize) -> Result<f64> {
    match *model {
        ArrivalModel::H2hPoisson { rate_per_slot } => {
            model.validate()?;
            Ok(rate_per_slot)
        }
        _ => Err(ModelError::ExpectedH2h),
    }
}

/// Draw arrival times (ms) for one replication. M2M models emit exactly
/// `n_devices` activation instants over `[0, T]`; the H2H model draws a
/// Poisson count per slot with each arrival uniform in the preceding
/// inter-slot interval. Deterministic for a fixed seed.
pub fn sample_arrivals(model: &ArrivalModel, grid: &SlotGrid, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = grid.horizon_ms() as f64;
    match *model {
        ArrivalModel::M2mUniform { n_devices } => Ok((0..n_devices)
            .map(|_| rng.random::<f64>() * horizon)
            .collect()),
        ArrivalModel::M2mBeta {
            alpha,
            beta,
            n_devices,
        } => {
            let dist = Beta::new(alpha, beta)
                .map_err(|e| ModelError::InvalidParameter(format!("Beta sampler: {e}")))?;
            Ok((0..n_devices)
                .map(|_| dist.sample(&mut rng) * horizon)
                .collect())
        }
        ArrivalModel::H2hPoisson { rate_per_slot } => {
            if rate_per_slot == 0.0 {
                return Ok(Vec::new());
            }
            let dist = Poisson::new(rate_per_slot)
                .map_err(|e| ModelError::InvalidParameter(format!("Poisson sampler: {e}")))?;
            let interval = f64::from(grid.slot_interval_ms());
            let mut times = Vec::new();
            for i in 1..=grid.num_slots() {
                let count = dist.sample(&mut rng) as u64;
                let slot_end = grid.slot_time_ms(i) as f64;
                for _ in 0..count {
                    // u in (0, 1] keeps the arrival inside (t_{i-1}, t_i].
                    let u = 1.0 - rng.random::<f64>();
                    times.push(slot_end - interval + u * interval);
                }
            }
            Ok(times)
        }
    }
}

/// Per-slot histogram of sampled arrival times; arrivals past the last slot
/// are dropped (they can never attend an RA opportunity).
pub fn attach_histogram(times: &[f64], grid: &SlotGrid) -> Vec<u64> {
    let mut counts = vec![0u64; grid.num_slots()];
    for &t in times {
        if let Some(slot) = grid.slot_for_arrival(t) {
            counts[slot - 1] += 1;
        }
    }
    counts
}
