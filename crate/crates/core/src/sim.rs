//! Slot-driven simulator of the contention procedure: uniform preamble picks
//! within the policy's partition, success on uniquely chosen preambles,
//! RAR wait plus uniform integer backoff after a collision, and blocking
//! after the attempt budget. Success is declared at Msg2 receipt.
//!
//! Replications are fully isolated and independently seeded; batches map
//! over seeds with an order-independent reduction, so results do not depend
//! on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{derive_seed, par_map};
use crate::grid::SlotGrid;
use crate::kmc::{AllocationPolicy, BackoffGeometry, Class, PerClass};
use crate::metrics::{trace_report, ClassMetrics, MetricsReport};
use crate::scenario::Scenario;
use crate::traffic::sample_arrivals;

// ============================================================================
// Trace types
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeAttempt {
    pub slot: usize,
    pub preamble: u32,
    pub collided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UeOutcome {
    Success,
    Blocked,
    /// Still waiting (backoff or first attempt) past the horizon.
    InFlight,
}

impl UeOutcome {
    pub fn name(self) -> &'static str {
        match self {
            UeOutcome::Success => "success",
            UeOutcome::Blocked => "blocked",
            UeOutcome::InFlight => "in-flight",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub id: u32,
    pub class: Class,
    pub arrival_ms: f64,
    pub attempts: Vec<UeAttempt>,
    pub outcome: UeOutcome,
    /// `(t_success + T_RAR + W_RAR) - arrival`, set on success.
    pub success_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: usize,
    /// Contender count per preamble index.
    pub preamble_contenders: Vec<u32>,
    pub contenders: u32,
    pub successes: u32,
    pub collisions: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub seed: u64,
    pub grid: SlotGrid,
    pub geom: BackoffGeometry,
    policy: AllocationPolicy,
    max_attempts: u32,
    pub ues: Vec<UeRecord>,
    pub slots: Vec<SlotOutcome>,
}

impl SimTrace {
    pub fn policy(&self) -> &AllocationPolicy {
        &self.policy
    }

    pub fn num_slots(&self) -> usize {
        self.grid.num_slots()
    }

    pub fn max_attempts(&self) -> u32 {
        self.max_attempts
    }

    pub fn outcome_counts(&self) -> PerClass<[u64; 3]> {
        let mut counts = PerClass::<[u64; 3]>::default();
        for ue in &self.ues {
            let slot = match ue.outcome {
                UeOutcome::Success => 0,
                UeOutcome::Blocked => 1,
                UeOutcome::InFlight => 2,
            };
            counts.get_mut(ue.class)[slot] += 1;
        }
        counts
    }
}

// ============================================================================
// Single replication
// ============================================================================

fn pick_preamble(rng: &mut ChaCha8Rng, policy: &AllocationPolicy, class: Class) -> u32 {
    match (*policy, class) {
        (AllocationPolicy::Shared { total }, _) => rng.random_range(0..total),
        (AllocationPolicy::Disjoint { h2h, .. }, Class::H2h) => rng.random_range(0..h2h),
        (AllocationPolicy::Disjoint { h2h, total }, Class::M2m) => rng.random_range(h2h..total),
        (AllocationPolicy::Joint { shared, .. }, Class::H2h) => rng.random_range(0..shared),
        (AllocationPolicy::Joint { total, .. }, Class::M2m) => rng.random_range(0..total),
    }
}

/// Run one replication with explicit arrival times (ms, class).
pub fn run_replication_with_arrivals(
    scenario: &Scenario,
    mut arrivals: Vec<(f64, Class)>,
    seed: u64,
) -> Result<SimTrace> {
    scenario.policy.validate()?;
    let grid = scenario.grid;
    let geom = scenario.geom;
    let max_attempts = scenario.max_attempts as usize;
    let eta = grid.num_slots();
    let rar_wait = u64::from(geom.rar_wait_ms());

    // Deterministic UE ids: arrival order, generation index breaking ties.
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ues: Vec<UeRecord> = arrivals
        .into_iter()
        .enumerate()
        .map(|(id, (arrival_ms, class))| UeRecord {
            id: id as u32,
            class,
            arrival_ms,
            attempts: Vec::new(),
            outcome: UeOutcome::InFlight,
            success_delay_ms: None,
        })
        .collect();

    // Pending attempts per slot (UE indices); first attempts seeded from the
    // arrival instants, reattempts pushed as backoffs expire.
    let mut pending: Vec<Vec<u32>> = vec![Vec::new(); eta + 1];
    for ue in &ues {
        if let Some(slot) = grid.slot_for_arrival(ue.arrival_ms) {
            pending[slot].push(ue.id);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let total_preambles = scenario.policy.total() as usize;
    let mut slots = Vec::with_capacity(eta);
    let mut counts = vec![0u32; total_preambles];

    for slot in 1..=eta {
        let eligible = std::mem::take(&mut pending[slot]);
        if eligible.is_empty() {
            slots.push(SlotOutcome {
                slot,
                preamble_contenders: vec![0; total_preambles],
                contenders: 0,
                successes: 0,
                collisions: 0,
            });
            continue;
        }
        counts.fill(0);
        // Preamble picks in ascending UE id order for reproducibility.
        let picks: Vec<u32> = eligible
            .iter()
            .map(|&ue| pick_preamble(&mut rng, &scenario.policy, ues[ue as usize].class))
            .collect();
        for &p in &picks {
            counts[p as usize] += 1;
        }
        let successes = counts.iter().filter(|&&c| c == 1).count() as u32;
        let contenders = eligible.len() as u32;
        let slot_time = grid.slot_time_ms(slot);

        for (&ue_id, &preamble) in eligible.iter().zip(&picks) {
            let collided = counts[preamble as usize] > 1;
            let ue = &mut ues[ue_id as usize];
            ue.attempts.push(UeAttempt {
                slot,
                preamble,
                collided,
            });
            if !collided {
                ue.outcome = UeOutcome::Success;
                ue.success_delay_ms = Some((slot_time + rar_wait) as f64 - ue.arrival_ms);
            } else if ue.attempts.len() >= max_attempts {
                ue.outcome = UeOutcome::Blocked;
            } else {
                let backoff = rng.random_range(0..=u64::from(geom.backoff_window_ms));
                let expiry = slot_time + rar_wait + backoff;
                match grid.first_slot_at_or_after(expiry, slot + 1) {
                    Some(next) => pending[next].push(ue_id),
                    None => ue.outcome = UeOutcome::InFlight,
                }
            }
        }

        slots.push(SlotOutcome {
            slot,
            preamble_contenders: counts.clone(),
            contenders,
            successes,
            collisions: contenders - successes,
        });
    }

    Ok(SimTrace {
        seed,
        grid,
        geom,
        policy: scenario.policy,
        max_attempts: scenario.max_attempts,
        ues,
        slots,
    })
}

/// Run one replication, sampling arrivals from the scenario's traffic
/// models. Deterministic for a fixed seed.
pub fn run_replication(scenario: &Scenario, seed: u64) -> Result<SimTrace> {
    let m2m_times = sample_arrivals(&scenario.m2m, &scenario.grid, derive_seed(seed, 1))?;
    let h2h_times = sample_arrivals(&scenario.h2h, &scenario.grid, derive_seed(seed, 2))?;
    let mut arrivals: Vec<(f64, Class)> = Vec::with_capacity(m2m_times.len() + h2h_times.len());
    arrivals.extend(m2m_times.into_iter().map(|t| (t, Class::M2m)));
    arrivals.extend(h2h_times.into_iter().map(|t| (t, Class::H2h)));
    run_replication_with_arrivals(scenario, arrivals, seed)
}

// ============================================================================
// Batches
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchStat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single replication.
    pub std_dev: f64,
}

fn batch_stat(values: &[f64]) -> BatchStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_dev = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    BatchStat { mean, std_dev }
}

/// Mean/std of one scalar metric per class and combined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalarStats {
    pub h2h: BatchStat,
    pub m2m: BatchStat,
    pub combined: BatchStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchMetrics {
    pub replications: usize,
    /// Elementwise mean report; per-UE success delays pooled across
    /// replications.
    pub mean: MetricsReport,
    pub p_success: ScalarStats,
    pub collision: ScalarStats,
    pub delay_ms: ScalarStats,
    pub blocked: ScalarStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub traces: Vec<SimTrace>,
    pub reports: Vec<MetricsReport>,
    pub aggregate: BatchMetrics,
}

fn mean_class_metrics(reports: &[&ClassMetrics]) -> ClassMetrics {
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&ClassMetrics) -> f64| reports.iter().map(|m| f(m)).sum::<f64>() / n;
    let cdf_len = reports.iter().map(|m| m.preamble_tx_cdf.len()).max().unwrap_or(0);
    let mean_vec = |f: &dyn Fn(&ClassMetrics) -> &Vec<f64>| -> Vec<f64> {
        (0..cdf_len)
            .map(|k| {
                let with_entry: Vec<f64> = reports
                    .iter()
                    .filter_map(|m| f(m).get(k).copied())
                    .collect();
                if with_entry.is_empty() {
                    0.0
                } else {
                    with_entry.iter().sum::<f64>() / with_entry.len() as f64
                }
            })
            .collect()
    };
    let delays: Vec<f64> = {
        let mut pooled: Vec<f64> = reports
            .iter()
            .flat_map(|m| m.success_delays_ms.iter().flatten().copied())
            .collect();
        pooled.sort_by(f64::total_cmp);
        pooled
    };
    let delay_means: Vec<f64> = reports
        .iter()
        .filter_map(|m| m.expected_access_delay_ms)
        .collect();
    ClassMetrics {
        activated: mean(&|m| m.activated),
        successes: mean(&|m| m.successes),
        blocked: mean(&|m| m.blocked),
        in_flight: mean(&|m| m.in_flight),
        access_success_prob: mean(&|m| m.access_success_prob),
        collision_prob: mean(&|m| m.collision_prob),
        preamble_tx_cdf: mean_vec(&|m| &m.preamble_tx_cdf),
        expected_access_delay_ms: if delay_means.is_empty() {
            None
        } else {
            Some(delay_means.iter().sum::<f64>() / delay_means.len() as f64)
        },
        delay_cdf_paper_ms: mean_vec(&|m| &m.delay_cdf_paper_ms),
        success_delays_ms: Some(delays),
    }
}

/// Aggregate per-replication reports into means with sample deviations.
pub fn aggregate_reports(reports: &[MetricsReport]) -> BatchMetrics {
    assert!(!reports.is_empty(), "need at least one replication");
    let scalar = |f: &dyn Fn(&MetricsReport) -> (f64, f64, f64)| -> ScalarStats {
        let triples: Vec<(f64, f64, f64)> = reports.iter().map(|r| f(r)).collect();
        ScalarStats {
            h2h: batch_stat(&triples.iter().map(|t| t.0).collect::<Vec<_>>()),
            m2m: batch_stat(&triples.iter().map(|t| t.1).collect::<Vec<_>>()),
            combined: batch_stat(&triples.iter().map(|t| t.2).collect::<Vec<_>>()),
        }
    };
    let mean = MetricsReport {
        h2h: mean_class_metrics(&reports.iter().map(|r| &r.h2h).collect::<Vec<_>>()),
        m2m: mean_class_metrics(&reports.iter().map(|r| &r.m2m).collect::<Vec<_>>()),
        combined: mean_class_metrics(&reports.iter().map(|r| &r.combined).collect::<Vec<_>>()),
        warnings: reports
            .iter()
            .flat_map(|r| r.warnings.iter().cloned())
            .collect(),
    };
    BatchMetrics {
        replications: reports.len(),
        mean,
        p_success: scalar(&|r| {
            (
                r.h2h.access_success_prob,
                r.m2m.access_success_prob,
                r.combined.access_success_prob,
            )
        }),
        collision: scalar(&|r| {
            (
                r.h2h.collision_prob,
                r.m2m.collision_prob,
                r.combined.collision_prob,
            )
        }),
        delay_ms: scalar(&|r| {
            (
                r.h2h.expected_access_delay_ms.unwrap_or(0.0),
                r.m2m.expected_access_delay_ms.unwrap_or(0.0),
                r.combined.expected_access_delay_ms.unwrap_or(0.0),
            )
        }),
        blocked: scalar(&|r| (r.h2h.blocked, r.m2m.blocked, r.combined.blocked)),
    }
}

/// Run independent replications for every seed and aggregate their metrics.
pub fn run_batch(scenario: &Scenario, seeds: &[u64]) -> Result<BatchResult> {
    assert!(!seeds.is_empty(), "need at least one seed");
    let traces: Vec<SimTrace> = par_map(seeds, |&seed| run_replication(scenario, seed))
        .into_iter()
        .collect::<Result<_>>()?;
    let reports: Vec<MetricsReport> = traces
        .iter()
        .map(trace_report)
        .collect::<Result<_>>()?;
    let aggregate = aggregate_reports(&reports);
    Ok(BatchResult {
        traces,
        reports,
        aggregate,
    })
}

/// Seed list for `replications` runs derived from a base seed.
pub fn batch_seeds(base_seed: u64, replications: usize) -> Vec<u64> {
    (0..replications as u64)
        .map(|i| base_seed.wrapping_add(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::transition_prob;
    use crate::metrics::RetxLagMode;
    use crate::traffic::ArrivalModel;
    use approx::assert_abs_diff_eq;

    pub(crate) fn scenario(policy: AllocationPolicy, max_attempts: u32) -> Scenario {
        Scenario {
            grid: SlotGrid::new(10, 100).unwrap(),
            geom: BackoffGeometry {
                rar_delay_ms: 2,
                rar_window_ms: 5,
                backoff_window_ms: 20,
                slot_interval_ms: 10,
            },
            policy,
            max_attempts,
            m2m: ArrivalModel::M2mUniform { n_devices: 0 },
            h2h: ArrivalModel::H2hPoisson { rate_per_slot: 0.0 },
            ja_mode: Default::default(),
            lag_mode: RetxLagMode::SlotGap,
        }
    }

    #[test]
    fn lone_ue_succeeds_with_twelve_ms_delay() {
        let sc = scenario(AllocationPolicy::Shared { total: 54 }, 10);
        let trace =
            run_replication_with_arrivals(&sc, vec![(5.0, Class::M2m)], 1).unwrap();
        let ue = &trace.ues[0];
        assert_eq!(ue.outcome, UeOutcome::Success);
        assert_eq!(ue.attempts.len(), 1);
        assert_eq!(ue.attempts[0].slot, 1);
        assert_abs_diff_eq!(ue.success_delay_ms.unwrap(), 12.0);
    }

    #[test]
    fn forced_collision_blocks_both() {
        let sc = scenario(AllocationPolicy::Shared { total: 1 }, 1);
        let trace = run_replication_with_arrivals(
            &sc,
            vec![(5.0, Class::M2m), (6.0, Class::M2m)],
            1,
        )
        .unwrap();
        for ue in &trace.ues {
            assert_eq!(ue.outcome, UeOutcome::Blocked);
            assert_eq!(ue.attempts.len(), 1);
            assert!(ue.attempts[0].collided);
        }
        assert_eq!(trace.slots[0].collisions, 2);
        assert_eq!(trace.slots[0].successes, 0);
    }

    #[test]
    fn traces_are_deterministic_per_seed() {
        let sc = Scenario {
            m2m: ArrivalModel::M2mBeta {
                alpha: 3.0,
                beta: 4.0,
                n_devices: 200,
            },
            h2h: ArrivalModel::H2hPoisson { rate_per_slot: 0.5 },
            ..scenario(AllocationPolicy::Joint { shared: 5, total: 54 }, 10)
        };
        let a = run_replication(&sc, 77).unwrap();
        let b = run_replication(&sc, 77).unwrap();
        assert_eq!(a, b);
        let c = run_replication(&sc, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn slot_outcomes_reconcile_with_ue_attempts() {
        let sc = Scenario {
            m2m: ArrivalModel::M2mUniform { n_devices: 300 },
            ..scenario(AllocationPolicy::Shared { total: 8 }, 4)
        };
        let trace = run_replication(&sc, 5).unwrap();
        for slot in &trace.slots {
            let attempts: Vec<_> = trace
                .ues
                .iter()
                .flat_map(|ue| ue.attempts.iter().filter(|a| a.slot == slot.slot))
                .collect();
            assert_eq!(attempts.len() as u32, slot.contenders);
            let collided = attempts.iter().filter(|a| a.collided).count() as u32;
            assert_eq!(collided, slot.collisions);
            let mut counts = vec![0u32; 8];
            for a in &attempts {
                counts[a.preamble as usize] += 1;
            }
            assert_eq!(counts, slot.preamble_contenders);
            let successes = counts.iter().filter(|&&c| c == 1).count() as u32;
            assert_eq!(successes, slot.successes);
        }
        // Every UE lands in exactly one terminal state.
        let counts = trace.outcome_counts();
        let total: u64 = counts.h2h.iter().sum::<u64>() + counts.m2m.iter().sum::<u64>();
        assert_eq!(total, trace.ues.len() as u64);
    }

    #[test]
    fn backoff_landings_match_the_kernel_row() {
        // Force a collision in slot 1 and histogram where the two UEs land.
        let sc = scenario(AllocationPolicy::Shared { total: 1 }, 2);
        let mut landings = vec![0u64; 11];
        let mut samples = 0u64;
        for seed in 0..20_000u64 {
            let trace = run_replication_with_arrivals(
                &sc,
                vec![(1.0, Class::M2m), (2.0, Class::M2m)],
                seed,
            )
            .unwrap();
            for ue in &trace.ues {
                if let Some(second) = ue.attempts.get(1) {
                    landings[second.slot] += 1;
                    samples += 1;
                }
            }
        }
        assert!(samples > 30_000);
        let l1: f64 = (2..=5)
            .map(|i| {
                let expected = transition_prob(i, 1, &sc.geom, &sc.grid).unwrap();
                (landings[i] as f64 / samples as f64 - expected).abs()
            })
            .sum();
        assert!(l1 < 0.02, "L1 {l1}");
    }

    #[test]
    fn ja_steering_sends_the_pool_share_into_the_shared_partition() {
        let shared = 13u32;
        let sc = Scenario {
            m2m: ArrivalModel::M2mUniform { n_devices: 10_000 },
            ..scenario(
                AllocationPolicy::Joint {
                    shared,
                    total: 54,
                },
                1,
            )
        };
        let trace = run_replication(&sc, 11).unwrap();
        let (mut in_shared, mut total) = (0u64, 0u64);
        for ue in trace.ues.iter().filter(|u| u.class == Class::M2m) {
            for a in &ue.attempts {
                total += 1;
                if a.preamble < shared {
                    in_shared += 1;
                }
            }
        }
        let fraction = in_shared as f64 / total as f64;
        assert_abs_diff_eq!(fraction, 13.0 / 54.0, epsilon = 0.015);
    }

    #[test]
    fn single_seed_batch_equals_its_only_replication() {
        let sc = Scenario {
            m2m: ArrivalModel::M2mUniform { n_devices: 50 },
            ..scenario(AllocationPolicy::Shared { total: 10 }, 5)
        };
        let batch = run_batch(&sc, &[3]).unwrap();
        assert_eq!(batch.traces.len(), 1);
        let single = trace_report(&batch.traces[0]).unwrap();
        assert_eq!(batch.aggregate.mean, single);
        assert_eq!(batch.aggregate.p_success.m2m.std_dev, 0.0);
    }

    #[test]
    fn tagged_success_rate_matches_the_closed_form() {
        // 4 UEs on 4 preambles, one attempt: per-UE success (3/4)^3.
        let sc = Scenario {
            m2m: ArrivalModel::M2mUniform { n_devices: 4 },
            grid: SlotGrid::new(10, 10).unwrap(),
            ..scenario(AllocationPolicy::Shared { total: 4 }, 1)
        };
        let seeds = batch_seeds(100, 20_000);
        let batch = run_batch(&sc, &seeds).unwrap();
        let expected = 0.75f64.powi(3);
        assert_abs_diff_eq!(
            batch.aggregate.p_success.m2m.mean,
            expected,
            epsilon = 0.01
        );
    }
}
