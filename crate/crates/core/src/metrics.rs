//! The five TR 37.868-style performance metrics, computed per class and
//! combined, from either the analytical population grid or a simulation
//! trace: access success probability, collision probability, the preamble
//! transmission CDF, expected access delay, and the access delay CDF.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::grid::SlotGrid;
use crate::kmc::{max_lag, BackoffGeometry, Class, PerClass, PopulationGrid, TransitionMatrix};
use crate::sim::{SimTrace, UeOutcome};

/// Which lag multiplies the slot interval in the retransmission delay term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetxLagMode {
    /// Actual origin-to-destination slot gap of each feeding contribution.
    #[default]
    SlotGap,
    /// The maximum lag of the feeding origin, regardless of the realized gap.
    OriginMaxLag,
}

/// Metrics for one traffic class (or both classes combined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// Arrivals that attended at least one RA slot (expected or observed).
    pub activated: f64,
    pub successes: f64,
    /// UEs blocked after exhausting their allowed attempts.
    pub blocked: f64,
    /// Mass or UEs still waiting past the horizon (including arrivals that
    /// never reached a slot).
    pub in_flight: f64,
    /// Successes within the attempt budget over activated arrivals.
    pub access_success_prob: f64,
    /// Collided transmissions over the total number of RA opportunities.
    pub collision_prob: f64,
    /// `F_p(r)`, indexed by `r - 1`; empty when there are no successes.
    pub preamble_tx_cdf: Vec<f64>,
    pub expected_access_delay_ms: Option<f64>,
    /// Delay-mass form of the access delay CDF, indexed by `omega - 1`.
    /// Carries units of ms (delay mass over success count), so it is not
    /// bounded by one; its last entry equals the expected access delay.
    pub delay_cdf_paper_ms: Vec<f64>,
    /// Sorted per-UE delays of successful UEs; trace path only.
    pub success_delays_ms: Option<Vec<f64>>,
}

impl ClassMetrics {
    fn empty() -> Self {
        ClassMetrics {
            activated: 0.0,
            successes: 0.0,
            blocked: 0.0,
            in_flight: 0.0,
            access_success_prob: 0.0,
            collision_prob: 0.0,
            preamble_tx_cdf: Vec::new(),
            expected_access_delay_ms: None,
            delay_cdf_paper_ms: Vec::new(),
            success_delays_ms: None,
        }
    }

    /// Fraction of successful UEs with delay at most `d_ms`; trace path only.
    pub fn empirical_delay_cdf(&self, d_ms: f64) -> Option<f64> {
        let delays = self.success_delays_ms.as_ref()?;
        if delays.is_empty() {
            return None;
        }
        let below = delays.partition_point(|&d| d <= d_ms);
        Some(below as f64 / delays.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub h2h: ClassMetrics,
    pub m2m: ClassMetrics,
    pub combined: ClassMetrics,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn class(&self, class: Class) -> &ClassMetrics {
        match class {
            Class::H2h => &self.h2h,
            Class::M2m => &self.m2m,
        }
    }
}

// ============================================================================
// Analysis-path operations
// ============================================================================

/// Successful arrivals over activated arrivals, per class and combined.
pub fn access_success_probability(pop: &PopulationGrid) -> Result<(PerClass<f64>, f64)> {
    let new = PerClass {
        h2h: pop.total_new(Class::H2h),
        m2m: pop.total_new(Class::M2m),
    };
    if new.h2h + new.m2m <= 0.0 {
        return Err(ModelError::EmptyGrid);
    }
    let success = PerClass {
        h2h: pop.total_success(Class::H2h),
        m2m: pop.total_success(Class::M2m),
    };
    let ratio = |s: f64, n: f64| if n > 0.0 { s / n } else { 0.0 };
    Ok((
        PerClass {
            h2h: ratio(success.h2h, new.h2h),
            m2m: ratio(success.m2m, new.m2m),
        },
        (success.h2h + success.m2m) / (new.h2h + new.m2m),
    ))
}

/// Collided transmissions over the `eta * M` RA opportunities. The ratio can
/// legitimately exceed one at extreme load; callers decide how to flag it.
pub fn collision_probability(
    pop: &PopulationGrid,
    total_preambles: u32,
) -> Result<(PerClass<f64>, f64)> {
    if total_preambles == 0 {
        return Err(ModelError::EmptyPool);
    }
    if pop.num_slots() == 0 {
        return Err(ModelError::EmptyGrid);
    }
    let raos = pop.num_slots() as f64 * f64::from(total_preambles);
    let per = PerClass {
        h2h: pop.total_failure(Class::H2h) / raos,
        m2m: pop.total_failure(Class::M2m) / raos,
    };
    Ok((per, per.h2h + per.m2m))
}

/// CDF of the number of preamble transmissions needed by successful UEs.
pub fn preamble_tx_cdf(pop: &PopulationGrid, r: usize) -> Result<(PerClass<f64>, f64)> {
    if r == 0 || r > pop.max_attempts() {
        return Err(ModelError::RetryOrderOutOfRange {
            order: r,
            max_attempts: pop.max_attempts(),
        });
    }
    let total = PerClass {
        h2h: pop.total_success(Class::H2h),
        m2m: pop.total_success(Class::M2m),
    };
    if total.h2h + total.m2m <= 0.0 {
        return Err(ModelError::NoSuccesses);
    }
    let cum = |class: Class| -> f64 {
        (1..=pop.num_slots())
            .map(|i| {
                (1..=r)
                    .map(|n| pop.expected_success(i, n, class))
                    .sum::<f64>()
            })
            .sum()
    };
    let cum_h = cum(Class::H2h);
    let cum_m = cum(Class::M2m);
    let ratio = |c: f64, t: f64| if t > 0.0 { c / t } else { 0.0 };
    Ok((
        PerClass {
            h2h: ratio(cum_h, total.h2h),
            m2m: ratio(cum_m, total.m2m),
        },
        (cum_h + cum_m) / (total.h2h + total.m2m),
    ))
}

/// Delay mass (ms-weighted success count) contributed by first-attempt
/// successes in slot `i`: half a slot interval of departure wait plus the
/// RAR response time.
pub fn delay_mass_new(pop: &PopulationGrid, i: usize, geom: &BackoffGeometry) -> PerClass<f64> {
    let unit = f64::from(geom.slot_interval_ms) / 2.0 + f64::from(geom.rar_wait_ms());
    PerClass {
        h2h: pop.expected_success(i, 1, Class::H2h) * unit,
        m2m: pop.expected_success(i, 1, Class::M2m) * unit,
    }
}

/// Delay mass contributed by order-`n` successes in slot `i`, accumulated
/// over the origins that fed the slot.
pub fn delay_mass_retx(
    pop: &PopulationGrid,
    matrix: &TransitionMatrix,
    grid: &SlotGrid,
    i: usize,
    n: usize,
    geom: &BackoffGeometry,
    lag_mode: RetxLagMode,
) -> Result<PerClass<f64>> {
    if n < 2 || n > pop.max_attempts() {
        return Err(ModelError::RetryOrderOutOfRange {
            order: n,
            max_attempts: pop.max_attempts(),
        });
    }
    let interval = f64::from(geom.slot_interval_ms);
    let rar = f64::from(geom.rar_wait_ms());
    let mut out = PerClass::default();
    for &(j, p) in matrix.feeders(i) {
        let lag_slots = match lag_mode {
            RetxLagMode::SlotGap => (i - j) as f64,
            RetxLagMode::OriginMaxLag => max_lag(j, geom, grid) as f64,
        };
        let lag_ms = lag_slots * interval + rar;
        for class in Class::ALL {
            let fed = pop.expected_failure(j, n - 1, class) * p;
            *out.get_mut(class) += fed * pop.slot_success_prob(i, class) * lag_ms;
        }
    }
    Ok(out)
}

/// Per-order delay-mass totals over the horizon, the shared ingredient of
/// the expected delay and its distribution.
fn delay_mass_by_order(
    pop: &PopulationGrid,
    matrix: &TransitionMatrix,
    grid: &SlotGrid,
    geom: &BackoffGeometry,
    lag_mode: RetxLagMode,
) -> Result<Vec<PerClass<f64>>> {
    let w = pop.max_attempts();
    let mut masses = vec![PerClass::<f64>::default(); w];
    for i in 1..=pop.num_slots() {
        let first = delay_mass_new(pop, i, geom);
        masses[0].h2h += first.h2h;
        masses[0].m2m += first.m2m;
        for n in 2..=w {
            let retx = delay_mass_retx(pop, matrix, grid, i, n, geom, lag_mode)?;
            masses[n - 1].h2h += retx.h2h;
            masses[n - 1].m2m += retx.m2m;
        }
    }
    Ok(masses)
}

/// Expected access delay of successful UEs, per class and combined.
pub fn expected_access_delay(
    pop: &PopulationGrid,
    matrix: &TransitionMatrix,
    grid: &SlotGrid,
    geom: &BackoffGeometry,
    lag_mode: RetxLagMode,
) -> Result<(PerClass<f64>, f64)> {
    let cdf = access_delay_cdf(pop, matrix, grid, geom, lag_mode, pop.max_attempts())?;
    Ok(cdf)
}

/// Delay-mass CDF at retransmission budget `omega` (ms units); at
/// `omega = max_attempts` this equals the expected access delay.
pub fn access_delay_cdf(
    pop: &PopulationGrid,
    matrix: &TransitionMatrix,
    grid: &SlotGrid,
    geom: &BackoffGeometry,
    lag_mode: RetxLagMode,
    omega: usize,
) -> Result<(PerClass<f64>, f64)> {
    if omega == 0 || omega > pop.max_attempts() {
        return Err(ModelError::RetryOrderOutOfRange {
            order: omega,
            max_attempts: pop.max_attempts(),
        });
    }
    let success = PerClass {
        h2h: pop.total_success(Class::H2h),
        m2m: pop.total_success(Class::M2m),
    };
    if success.h2h + success.m2m <= 0.0 {
        return Err(ModelError::NoSuccesses);
    }
    let masses = delay_mass_by_order(pop, matrix, grid, geom, lag_mode)?;
    let mut cum = PerClass::<f64>::default();
    for order in masses.iter().take(omega) {
        cum.h2h += order.h2h;
        cum.m2m += order.m2m;
    }
    let ratio = |mass: f64, s: f64| if s > 0.0 { mass / s } else { 0.0 };
    Ok((
        PerClass {
            h2h: ratio(cum.h2h, success.h2h),
            m2m: ratio(cum.m2m, success.m2m),
        },
        (cum.h2h + cum.m2m) / (success.h2h + success.m2m),
    ))
}

/// Assemble the full analysis-path report.
pub fn analysis_report(
    pop: &PopulationGrid,
    matrix: &TransitionMatrix,
    grid: &SlotGrid,
    geom: &BackoffGeometry,
    lag_mode: RetxLagMode,
) -> Result<MetricsReport> {
    let total_preambles = pop.policy().total();
    let (ps, ps_comb) = access_success_probability(pop)?;
    let (pf, pf_comb) = collision_probability(pop, total_preambles)?;
    let masses = delay_mass_by_order(pop, matrix, grid, geom, lag_mode)?;
    let w = pop.max_attempts();

    let mut warnings = Vec::new();
    if pf_comb > 1.0 {
        warnings.push(format!(
            "collision probability {pf_comb:.6} exceeds 1 under the per-RAO definition"
        ));
    }

    let build = |class: Option<Class>| -> ClassMetrics {
        let (activated, successes, blocked, in_flight, p_s, p_f) = match class {
            Some(c) => (
                pop.total_new(c),
                pop.total_success(c),
                pop.dropped(c),
                pop.in_flight(c),
                *ps.get(c),
                *pf.get(c),
            ),
            None => (
                pop.total_new(Class::H2h) + pop.total_new(Class::M2m),
                pop.total_success(Class::H2h) + pop.total_success(Class::M2m),
                pop.dropped(Class::H2h) + pop.dropped(Class::M2m),
                pop.in_flight(Class::H2h) + pop.in_flight(Class::M2m),
                ps_comb,
                pf_comb,
            ),
        };
        let mut metrics = ClassMetrics {
            activated,
            successes,
            blocked,
            in_flight,
            access_success_prob: p_s,
            collision_prob: p_f,
            ..ClassMetrics::empty()
        };
        if successes > 0.0 {
            let order_success = |n: usize| -> f64 {
                (1..=pop.num_slots())
                    .map(|i| match class {
                        Some(c) => pop.expected_success(i, n, c),
                        None => {
                            pop.expected_success(i, n, Class::H2h)
                                + pop.expected_success(i, n, Class::M2m)
                        }
                    })
                    .sum()
            };
            let mut cum_succ = 0.0;
            let mut cum_mass = 0.0;
            for n in 1..=w {
                cum_succ += order_success(n);
                cum_mass += match class {
                    Some(Class::H2h) => masses[n - 1].h2h,
                    Some(Class::M2m) => masses[n - 1].m2m,
                    None => masses[n - 1].h2h + masses[n - 1].m2m,
                };
                metrics.preamble_tx_cdf.push(cum_succ / successes);
                metrics.delay_cdf_paper_ms.push(cum_mass / successes);
            }
            metrics.expected_access_delay_ms = metrics.delay_cdf_paper_ms.last().copied();
        }
        metrics
    };

    Ok(MetricsReport {
        h2h: build(Some(Class::H2h)),
        m2m: build(Some(Class::M2m)),
        combined: build(None),
        warnings,
    })
}

// ============================================================================
// Trace-path report
// ============================================================================

/// Empirical counterpart of the analysis report, computed from per-UE
/// records. Delay masses are bucketed by attempt count from the measured
/// full access delays, so the last CDF entry again equals the mean delay.
pub fn trace_report(trace: &SimTrace) -> Result<MetricsReport> {
    let total_preambles = trace.policy().total();
    let num_slots = trace.num_slots();
    if num_slots == 0 || total_preambles == 0 {
        return Err(ModelError::EmptyGrid);
    }
    let raos = num_slots as f64 * f64::from(total_preambles);
    let w = trace.max_attempts() as usize;

    let build = |class: Option<Class>| -> ClassMetrics {
        let ues = trace
            .ues
            .iter()
            .filter(|ue| class.is_none_or(|c| ue.class == c));
        let mut activated = 0u64;
        let mut blocked = 0u64;
        let mut in_flight = 0u64;
        let mut collided_attempts = 0u64;
        let mut delays = Vec::new();
        let mut success_by_order = vec![0u64; w];
        let mut delay_mass_by_order = vec![0.0f64; w];
        for ue in ues {
            if !ue.attempts.is_empty() {
                activated += 1;
            }
            collided_attempts += ue.attempts.iter().filter(|a| a.collided).count() as u64;
            match ue.outcome {
                UeOutcome::Success => {
                    let delay = ue.success_delay_ms.expect("successful UE carries delay");
                    let order = ue.attempts.len();
                    success_by_order[order - 1] += 1;
                    delay_mass_by_order[order - 1] += delay;
                    delays.push(delay);
                }
                UeOutcome::Blocked => blocked += 1,
                UeOutcome::InFlight => in_flight += 1,
            }
        }
        let successes = delays.len() as f64;
        delays.sort_by(f64::total_cmp);
        let mut metrics = ClassMetrics {
            activated: activated as f64,
            successes,
            blocked: blocked as f64,
            in_flight: in_flight as f64,
            access_success_prob: if activated > 0 {
                successes / activated as f64
            } else {
                0.0
            },
            collision_prob: collided_attempts as f64 / raos,
            ..ClassMetrics::empty()
        };
        if successes > 0.0 {
            let mut cum_succ = 0u64;
            let mut cum_mass = 0.0;
            for n in 1..=w {
                cum_succ += success_by_order[n - 1];
                cum_mass += delay_mass_by_order[n - 1];
                metrics.preamble_tx_cdf.push(cum_succ as f64 / successes);
                metrics.delay_cdf_paper_ms.push(cum_mass / successes);
            }
            metrics.expected_access_delay_ms = metrics.delay_cdf_paper_ms.last().copied();
        }
        metrics.success_delays_ms = Some(delays);
        metrics
    };

    let h2h = build(Some(Class::H2h));
    let m2m = build(Some(Class::M2m));
    let combined = build(None);
    let mut warnings = Vec::new();
    if combined.collision_prob > 1.0 {
        warnings.push(format!(
            "collision probability {:.6} exceeds 1 under the per-RAO definition",
            combined.collision_prob
        ));
    }
    Ok(MetricsReport {
        h2h,
        m2m,
        combined,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::{build_matrix, propagate, AllocationPolicy, JaSuccessMode, NewArrivals};
    use approx::assert_abs_diff_eq;

    fn table_geometry() -> BackoffGeometry {
        BackoffGeometry {
            rar_delay_ms: 2,
            rar_window_ms: 5,
            backoff_window_ms: 20,
            slot_interval_ms: 10,
        }
    }

    fn small_scenario(
        h2h: f64,
        m2m: f64,
        pool: u32,
        attempts: u32,
    ) -> (SlotGrid, TransitionMatrix, PopulationGrid) {
        let geom = table_geometry();
        let grid = SlotGrid::new(10, 600).unwrap();
        let matrix = build_matrix(&geom, &grid);
        let arrivals = NewArrivals {
            h2h: vec![h2h; grid.num_slots()],
            m2m: vec![m2m; grid.num_slots()],
        };
        let pop = propagate(
            &AllocationPolicy::Shared { total: pool },
            &matrix,
            &arrivals,
            attempts,
            JaSuccessMode::Mixture,
        )
        .unwrap();
        (grid, matrix, pop)
    }

    #[test]
    fn lone_arrival_succeeds_with_certainty() {
        let (_, _, pop) = small_scenario(0.0, 1.0, 54, 10);
        let (ps, total) = access_success_probability(&pop).unwrap();
        assert_abs_diff_eq!(ps.m2m, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn forced_collision_yields_zero_success_and_flagged_collision_rate() {
        // Two UEs on a single preamble with one attempt in a 1-slot horizon.
        let geom = table_geometry();
        let grid = SlotGrid::new(10, 10).unwrap();
        let matrix = build_matrix(&geom, &grid);
        let arrivals = NewArrivals {
            h2h: vec![0.0],
            m2m: vec![2.0],
        };
        let pop = propagate(
            &AllocationPolicy::Shared { total: 1 },
            &matrix,
            &arrivals,
            1,
            JaSuccessMode::Mixture,
        )
        .unwrap();
        let (ps, _) = access_success_probability(&pop).unwrap();
        assert_eq!(ps.m2m, 0.0);
        let (_, pf) = collision_probability(&pop, 1).unwrap();
        assert_abs_diff_eq!(pf, 2.0, epsilon = 1e-12);
        // No successes: the delay and preamble-CDF operations are undefined,
        // and the report flags the above-one collision ratio.
        assert!(matches!(
            expected_access_delay(&pop, &matrix, &grid, &geom, RetxLagMode::SlotGap),
            Err(ModelError::NoSuccesses)
        ));
        assert!(matches!(
            preamble_tx_cdf(&pop, 1),
            Err(ModelError::NoSuccesses)
        ));
        let report = analysis_report(&pop, &matrix, &grid, &geom, RetxLagMode::SlotGap).unwrap();
        assert!(report.m2m.expected_access_delay_ms.is_none());
        assert!(report.m2m.preamble_tx_cdf.is_empty());
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn zero_arrivals_give_zero_collision_and_empty_grid_error() {
        let geom = table_geometry();
        let grid = SlotGrid::new(10, 100).unwrap();
        let matrix = build_matrix(&geom, &grid);
        let arrivals = NewArrivals {
            h2h: vec![0.0; 10],
            m2m: vec![0.0; 10],
        };
        let pop = propagate(
            &AllocationPolicy::Shared { total: 5 },
            &matrix,
            &arrivals,
            3,
            JaSuccessMode::Mixture,
        )
        .unwrap();
        let (_, pf) = collision_probability(&pop, 5).unwrap();
        assert_eq!(pf, 0.0);
        assert!(matches!(
            access_success_probability(&pop),
            Err(ModelError::EmptyGrid)
        ));
    }

    #[test]
    fn uncontended_traffic_succeeds_on_first_preamble() {
        let (grid, matrix, pop) = small_scenario(0.2, 0.5, 54, 10);
        let (cdf, comb) = preamble_tx_cdf(&pop, 1).unwrap();
        assert!(cdf.m2m > 0.99);
        assert!(comb > 0.99);
        let (at_w, comb_w) = preamble_tx_cdf(&pop, 10).unwrap();
        assert_abs_diff_eq!(at_w.m2m, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(comb_w, 1.0, epsilon = 1e-12);
        // Monotone in r.
        let geom = table_geometry();
        let report = analysis_report(&pop, &matrix, &grid, &geom, RetxLagMode::SlotGap).unwrap();
        for pair in report.m2m.preamble_tx_cdf.windows(2) {
            assert!(pair[0] <= pair[1] + 1e-15);
        }
    }

    #[test]
    fn new_arrival_delay_mass_is_linear() {
        let geom = table_geometry();
        let (_, _, pop) = small_scenario(0.0, 1.0, 54, 10);
        let mass = delay_mass_new(&pop, 3, &geom);
        let unit = 5.0 + 7.0;
        assert_abs_diff_eq!(mass.m2m, pop.expected_success(3, 1, Class::M2m) * unit);
        let (_, _, pop2) = small_scenario(0.0, 2.0, 54, 10);
        let mass2 = delay_mass_new(&pop2, 3, &geom);
        // Doubling the (uncontended) success mass doubles the delay mass.
        let ratio = mass2.m2m / mass.m2m;
        let succ_ratio =
            pop2.expected_success(3, 1, Class::M2m) / pop.expected_success(3, 1, Class::M2m);
        assert_abs_diff_eq!(ratio, succ_ratio, epsilon = 1e-12);
        let zero = delay_mass_new(&pop, 3, &geom);
        assert_eq!(zero.h2h, 0.0);
    }

    #[test]
    fn retx_delay_mass_uses_the_slot_gap() {
        // Zero backoff window: every failure reattempts in the very next
        // slot, so the per-success lag term is one interval plus RAR wait.
        let geom = BackoffGeometry {
            backoff_window_ms: 0,
            ..table_geometry()
        };
        let grid = SlotGrid::new(10, 100).unwrap();
        let matrix = build_matrix(&geom, &grid);
        let arrivals = NewArrivals {
            h2h: vec![0.0; 10],
            m2m: vec![6.0; 10],
        };
        let pop = propagate(
            &AllocationPolicy::Shared { total: 2 },
            &matrix,
            &arrivals,
            4,
            JaSuccessMode::Mixture,
        )
        .unwrap();
        let retx = delay_mass_retx(&pop, &matrix, &grid, 5, 2, &geom, RetxLagMode::SlotGap)
            .unwrap();
        let fed = pop.expected_failure(4, 1, Class::M2m) * matrix.prob(5, 4);
        let expected = fed * pop.slot_success_prob(5, Class::M2m) * 17.0;
        assert_abs_diff_eq!(retx.m2m, expected, epsilon = 1e-12);
        assert!(delay_mass_retx(&pop, &matrix, &grid, 5, 1, &geom, RetxLagMode::SlotGap).is_err());
        assert!(delay_mass_retx(&pop, &matrix, &grid, 5, 9, &geom, RetxLagMode::SlotGap).is_err());
        // No upstream failures, no mass.
        let none = delay_mass_retx(&pop, &matrix, &grid, 1, 2, &geom, RetxLagMode::SlotGap);
        assert_eq!(none.unwrap().m2m, 0.0);
    }

    #[test]
    fn delay_cdf_final_point_equals_expected_delay() {
        let geom = table_geometry();
        let (grid, matrix, pop) = small_scenario(2.0, 10.0, 20, 10);
        let (per, comb) =
            expected_access_delay(&pop, &matrix, &grid, &geom, RetxLagMode::SlotGap).unwrap();
        let (cdf_w, cdf_comb) =
            access_delay_cdf(&pop, &matrix, &grid, &geom, RetxLagMode::SlotGap, 10).unwrap();
        assert_eq!(per.m2m, cdf_w.m2m);
        assert_eq!(per.h2h, cdf_w.h2h);
        assert_eq!(comb, cdf_comb);
        // Lower bound: at least the RAR wait.
        assert!(comb >= 7.0);
        // Uncontended single-arrival delay is half a slot plus the RAR wait.
        let (_, _, light) = small_scenario(0.0, 0.01, 54, 10);
        let (_, light_delay) =
            expected_access_delay(&light, &matrix, &grid, &geom, RetxLagMode::SlotGap).unwrap();
        assert_abs_diff_eq!(light_delay, 12.0, epsilon = 1e-6);
    }

    #[test]
    fn origin_max_lag_mode_never_undershoots_the_slot_gap_mode() {
        let geom = table_geometry();
        let (grid, matrix, pop) = small_scenario(2.0, 10.0, 20, 10);
        let (_, gap) =
            expected_access_delay(&pop, &matrix, &grid, &geom, RetxLagMode::SlotGap).unwrap();
        let (_, fixed) =
            expected_access_delay(&pop, &matrix, &grid, &geom, RetxLagMode::OriginMaxLag).unwrap();
        assert!(fixed >= gap - 1e-12, "{fixed} < {gap}");
    }

    #[test]
    fn analysis_identity_closes_per_class() {
        let geom = table_geometry();
        let (grid, matrix, pop) = small_scenario(1.0, 8.0, 10, 6);
        let report = analysis_report(&pop, &matrix, &grid, &geom, RetxLagMode::SlotGap).unwrap();
        for m in [&report.h2h, &report.m2m] {
            let closed = m.access_success_prob + (m.blocked + m.in_flight) / m.activated;
            assert_abs_diff_eq!(closed, 1.0, epsilon = 1e-9);
        }
    }
}
