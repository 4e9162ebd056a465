//! Independent ground-truth generators: exhaustive preamble-assignment
//! enumeration for tagged-user success probabilities and a Monte-Carlo
//! backoff-landing histogram. They live in the library (not just in tests)
//! so the CLI can emit oracle-vs-engine validation reports.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::exec::{derive_seed, par_map};
use crate::grid::SlotGrid;
use crate::kmc::BackoffGeometry;

/// Assignment-enumeration cap: `pool^contenders` must stay at or below this.
pub const ENUMERATION_BOUND: u128 = 10_000_000;

fn check_enumeration_bound(states: u128) -> Result<()> {
    if states > ENUMERATION_BOUND {
        Err(ModelError::EnumerationBound {
            states,
            bound: ENUMERATION_BOUND,
        })
    } else {
        Ok(())
    }
}

/// Exact probability that a tagged UE among `contenders` picking uniformly
/// from `pool` preambles is alone on its preamble, by enumerating all
/// `pool^contenders` assignments.
pub fn exhaustive_tagged_success(contenders: u32, pool: u32) -> Result<Ratio<u64>> {
    if pool == 0 {
        return Err(ModelError::EmptyPool);
    }
    if contenders == 0 {
        return Err(ModelError::InvalidParameter(
            "need at least the tagged contender".into(),
        ));
    }
    let states = u128::from(pool).pow(contenders);
    check_enumeration_bound(states)?;
    let pool = u64::from(pool);
    let total = states as u64;
    let mut alone = 0u64;
    for assignment in 0..total {
        let mut rest = assignment;
        let tagged = rest % pool;
        rest /= pool;
        let mut collided = false;
        for _ in 1..contenders {
            if rest % pool == tagged {
                collided = true;
                break;
            }
            rest /= pool;
        }
        if !collided {
            alone += 1;
        }
    }
    Ok(Ratio::new(alone, total))
}

/// Exact tagged-M2M success under the joint allocation: `n_h2h` UEs pick
/// uniformly from the first `shared` preambles, `n_m2m` UEs (the tagged one
/// first) from all `total`.
pub fn exhaustive_ja_tagged_success(
    n_h2h: u32,
    n_m2m: u32,
    shared: u32,
    total: u32,
) -> Result<Ratio<u64>> {
    if shared == 0 || shared >= total {
        return Err(ModelError::SplitOutOfRange {
            name: "x",
            value: shared,
            total,
        });
    }
    if n_m2m == 0 {
        return Err(ModelError::InvalidParameter(
            "need at least the tagged M2M contender".into(),
        ));
    }
    let states = u128::from(total).pow(n_m2m) * u128::from(shared).pow(n_h2h);
    check_enumeration_bound(states)?;
    let (shared, total) = (u64::from(shared), u64::from(total));
    let all = states as u64;
    let mut alone = 0u64;
    for assignment in 0..all {
        let mut rest = assignment;
        let tagged = rest % total;
        rest /= total;
        let mut collided = false;
        for _ in 1..n_m2m {
            if rest % total == tagged {
                collided = true;
                break;
            }
            rest /= total;
        }
        if !collided {
            for _ in 0..n_h2h {
                if rest % shared == tagged {
                    collided = true;
                    break;
                }
                rest /= shared;
            }
        }
        if !collided {
            alone += 1;
        }
    }
    Ok(Ratio::new(alone, all))
}

/// Monte-Carlo landing distribution of the backoff from an origin slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BackoffHistogram {
    /// Landing probability per destination slot (index `slot - 1`).
    pub probs: Vec<f64>,
    /// Share of draws expiring past the horizon.
    pub overflow: f64,
    pub samples: u64,
}

/// Sample `samples` uniform integer backoffs from `origin` and map each to
/// its reattempt slot (first slot at or after expiry, never the origin
/// itself). Deterministic for a fixed seed and independent of thread count.
pub fn mc_backoff_distribution(
    geom: &BackoffGeometry,
    grid: &SlotGrid,
    origin: usize,
    samples: u64,
    seed: u64,
) -> Result<BackoffHistogram> {
    grid.check_slot(origin)?;
    let bo_min = geom.backoff_min_ms(grid, origin);
    let window = u64::from(geom.backoff_window_ms);
    let eta = grid.num_slots();

    const CHUNK: u64 = 1 << 16;
    let chunks: Vec<u64> = (0..samples.div_ceil(CHUNK)).collect();
    let partials = par_map(&chunks, |&chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk));
        let count = CHUNK.min(samples - chunk * CHUNK);
        let mut counts = vec![0u64; eta];
        let mut overflow = 0u64;
        for _ in 0..count {
            let expiry = bo_min + rng.random_range(0..=window);
            match grid.first_slot_at_or_after(expiry, origin + 1) {
                Some(slot) => counts[slot - 1] += 1,
                None => overflow += 1,
            }
        }
        (counts, overflow)
    });

    let mut counts = vec![0u64; eta];
    let mut overflow = 0u64;
    for (partial, partial_overflow) in partials {
        for (total, c) in counts.iter_mut().zip(&partial) {
            *total += c;
        }
        overflow += partial_overflow;
    }
    Ok(BackoffHistogram {
        probs: counts
            .iter()
            .map(|&c| c as f64 / samples as f64)
            .collect(),
        overflow: overflow as f64 / samples as f64,
        samples,
    })
}

/// Convenience: ratio as f64 for tolerance comparisons.
pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    r.to_f64().expect("ratio fits in f64")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::transition_prob;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tagged_success_small_cases() {
        assert_eq!(
            exhaustive_tagged_success(2, 2).unwrap(),
            Ratio::new(1u64, 2)
        );
        assert_eq!(
            exhaustive_tagged_success(1, 7).unwrap(),
            Ratio::new(1u64, 1)
        );
        assert_eq!(
            exhaustive_tagged_success(4, 4).unwrap(),
            Ratio::new(27u64, 64)
        );
    }

    #[test]
    fn tagged_success_matches_closed_form_exactly() {
        // Enumeration count must equal (pool-1)^(n-1) / pool^(n-1) as an
        // exact rational for every small case.
        for pool in 1..=6u32 {
            for n in 1..=6u32 {
                let got = exhaustive_tagged_success(n, pool).unwrap();
                let want = Ratio::new(
                    u64::from(pool - 1).pow(n - 1),
                    u64::from(pool).pow(n - 1),
                );
                assert_eq!(got, want, "n={n} pool={pool}");
            }
        }
    }

    #[test]
    fn enumeration_bound_enforced() {
        assert!(matches!(
            exhaustive_tagged_success(30, 10),
            Err(ModelError::EnumerationBound { .. })
        ));
    }

    #[test]
    fn ja_tagged_success_cases() {
        assert_eq!(
            exhaustive_ja_tagged_success(0, 2, 27, 54).unwrap(),
            Ratio::new(53u64, 54)
        );
        assert_eq!(
            exhaustive_ja_tagged_success(0, 1, 10, 54).unwrap(),
            Ratio::new(1u64, 1)
        );
        // Collision iff the tagged M2M lands on the single shared preamble.
        assert_eq!(
            exhaustive_ja_tagged_success(1, 1, 1, 2).unwrap(),
            Ratio::new(1u64, 2)
        );
    }

    #[test]
    fn backoff_histogram_is_deterministic_and_normalized() {
        let geom = BackoffGeometry {
            rar_delay_ms: 2,
            rar_window_ms: 5,
            backoff_window_ms: 20,
            slot_interval_ms: 10,
        };
        let grid = SlotGrid::new(10, 10_000).unwrap();
        let a = mc_backoff_distribution(&geom, &grid, 1, 100_000, 9).unwrap();
        let b = mc_backoff_distribution(&geom, &grid, 1, 100_000, 9).unwrap();
        assert_eq!(a, b);
        let total: f64 = a.probs.iter().sum::<f64>() + a.overflow;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_window_concentrates_on_one_slot() {
        let geom = BackoffGeometry {
            rar_delay_ms: 2,
            rar_window_ms: 5,
            backoff_window_ms: 0,
            slot_interval_ms: 10,
        };
        let grid = SlotGrid::new(10, 100).unwrap();
        let hist = mc_backoff_distribution(&geom, &grid, 3, 10_000, 1).unwrap();
        assert_eq!(hist.probs[3], 1.0);
        assert_eq!(hist.probs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn histogram_matches_kernel_row() {
        let geom = BackoffGeometry {
            rar_delay_ms: 2,
            rar_window_ms: 5,
            backoff_window_ms: 20,
            slot_interval_ms: 10,
        };
        let grid = SlotGrid::new(10, 10_000).unwrap();
        let hist = mc_backoff_distribution(&geom, &grid, 1, 1_000_000, 42).unwrap();
        // Exact row: 4/21, 10/21, 7/21 on slots 2..4.
        assert_abs_diff_eq!(hist.probs[1], 4.0 / 21.0, epsilon = 2e-3);
        assert_abs_diff_eq!(hist.probs[2], 10.0 / 21.0, epsilon = 2e-3);
        assert_abs_diff_eq!(hist.probs[3], 7.0 / 21.0, epsilon = 2e-3);
        let l1: f64 = (2..=4)
            .map(|i| (hist.probs[i - 1] - transition_prob(i, 1, &geom, &grid).unwrap()).abs())
            .sum();
        assert!(l1 < 0.01);
    }
}
