//! Analytical engine for the RA contention process: backoff-spreading
//! transition kernel between RA slots, per-class success probabilities under
//! a preamble-allocation policy, and the forward population recursion over
//! (slot, retry order, class).

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::grid::SlotGrid;

// ============================================================================
// Classes and policies
// ============================================================================

/// Traffic class of a contending UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    H2h,
    M2m,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::H2h, Class::M2m];

    pub fn name(self) -> &'static str {
        match self {
            Class::H2h => "h2h",
            Class::M2m => "m2m",
        }
    }
}

/// Pair of values, one per traffic class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass<T> {
    pub h2h: T,
    pub m2m: T,
}

impl<T> PerClass<T> {
    pub fn get(&self, class: Class) -> &T {
        match class {
            Class::H2h => &self.h2h,
            Class::M2m => &self.m2m,
        }
    }

    pub fn get_mut(&mut self, class: Class) -> &mut T {
        match class {
            Class::H2h => &mut self.h2h,
            Class::M2m => &mut self.m2m,
        }
    }
}

/// How the preamble pool of size `total` is divided between classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllocationPolicy {
    /// One pool contended by both classes.
    Shared { total: u32 },
    /// Disjoint split: H2H gets `h2h` preambles exclusively, M2M the rest.
    Disjoint { h2h: u32, total: u32 },
    /// Joint split: H2H restricted to `shared` preambles which M2M may also
    /// use; M2M picks uniformly over the whole pool.
    Joint { shared: u32, total: u32 },
}

impl AllocationPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AllocationPolicy::Shared { total } => {
                if total == 0 {
                    Err(ModelError::EmptyPool)
                } else {
                    Ok(())
                }
            }
            AllocationPolicy::Disjoint { h2h, total } => {
                if h2h == 0 || h2h >= total {
                    Err(ModelError::SplitOutOfRange {
                        name: "a",
                        value: h2h,
                        total,
                    })
                } else {
                    Ok(())
                }
            }
            AllocationPolicy::Joint { shared, total } => {
                if shared == 0 || shared >= total {
                    Err(ModelError::SplitOutOfRange {
                        name: "x",
                        value: shared,
                        total,
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn total(&self) -> u32 {
        match *self {
            AllocationPolicy::Shared { total }
            | AllocationPolicy::Disjoint { total, .. }
            | AllocationPolicy::Joint { total, .. } => total,
        }
    }

    pub fn split(&self) -> Option<u32> {
        match *self {
            AllocationPolicy::Shared { .. } => None,
            AllocationPolicy::Disjoint { h2h, .. } => Some(h2h),
            AllocationPolicy::Joint { shared, .. } => Some(shared),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AllocationPolicy::Shared { .. } => "shared",
            AllocationPolicy::Disjoint { .. } => "da",
            AllocationPolicy::Joint { .. } => "ja",
        }
    }
}

// ============================================================================
// Backoff geometry and the transition kernel
// ============================================================================

/// Timing constants of the RA procedure. A UE that collides in the slot at
/// `t_j` waits the full RAR response time, then draws an integer backoff
/// uniformly from `{0..backoff_window_ms}`, so its timer expires somewhere in
/// `[t_j + rar_wait, t_j + rar_wait + backoff_window]` and it reattempts at
/// the first later slot at or after expiry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffGeometry {
    /// Msg2 response delay (T_RAR).
    pub rar_delay_ms: u32,
    /// Msg2 response window (W_RAR).
    pub rar_window_ms: u32,
    /// Backoff window (W_BO).
    pub backoff_window_ms: u32,
    /// Interval between consecutive RA slots.
    pub slot_interval_ms: u32,
}

impl BackoffGeometry {
    /// Worst-case wait for the RAR message after a preamble transmission.
    pub fn rar_wait_ms(&self) -> u32 {
        self.rar_delay_ms + self.rar_window_ms
    }

    /// Earliest possible backoff expiry for a failure in slot `j`.
    pub fn backoff_min_ms(&self, grid: &SlotGrid, j: usize) -> u64 {
        grid.slot_time_ms(j) + u64::from(self.rar_wait_ms())
    }

    /// Latest possible backoff expiry for a failure in slot `j`.
    pub fn backoff_max_ms(&self, grid: &SlotGrid, j: usize) -> u64 {
        self.backoff_min_ms(grid, j) + u64::from(self.backoff_window_ms)
    }

    /// Number of equally likely integer expiry instants.
    pub fn backoff_span(&self) -> u64 {
        u64::from(self.backoff_window_ms) + 1
    }
}

/// Integer expiry instants from origin `j` that land in destination slot `i`.
///
/// An expiry at `u` maps to the first slot at or after `u`, never earlier
/// than `j + 1` (a UE cannot reattempt in the slot it just failed in).
fn expiry_count_for_dest(grid: &SlotGrid, geom: &BackoffGeometry, j: usize, i: usize) -> u64 {
    let bo_min = geom.backoff_min_ms(grid, j);
    let bo_max = geom.backoff_max_ms(grid, j);
    let window_hi = grid.slot_time_ms(i);
    let window_lo = if i == j + 1 {
        0
    } else {
        grid.slot_time_ms(i - 1) + 1
    };
    let lo = window_lo.max(bo_min);
    let hi = window_hi.min(bo_max);
    if lo > hi {
        0
    } else {
        hi - lo + 1
    }
}

/// Range of destination slots reachable from origin `j`, before capping at
/// the horizon. Empty when the whole backoff window expires past the horizon.
fn dest_range(grid: &SlotGrid, geom: &BackoffGeometry, j: usize) -> Option<(usize, usize)> {
    let interval = u64::from(grid.slot_interval_ms());
    let bo_min = geom.backoff_min_ms(grid, j);
    let bo_max = geom.backoff_max_ms(grid, j);
    let first = (bo_min.div_ceil(interval) as usize).max(j + 1);
    let last = (bo_max.div_ceil(interval) as usize).max(j + 1);
    if first > grid.num_slots() {
        None
    } else {
        Some((first, last.min(grid.num_slots())))
    }
}

/// Maximum number of earlier slots whose failed UEs can reattempt in slot `i`.
pub fn max_lag(i: usize, geom: &BackoffGeometry, grid: &SlotGrid) -> usize {
    (1..i)
        .filter(|&j| match dest_range(grid, geom, j) {
            Some((first, last)) => first <= i && i <= last,
            None => false,
        })
        .count()
}

/// Probability that a failure in slot `j` reattempts in slot `i`: the share
/// of the uniform integer backoff mass whose expiry maps to slot `i`.
pub fn transition_prob(
    i: usize,
    j: usize,
    geom: &BackoffGeometry,
    grid: &SlotGrid,
) -> Result<f64> {
    grid.check_slot(i)?;
    grid.check_slot(j)?;
    if j >= i {
        return Err(ModelError::InvalidTransition {
            origin: j,
            destination: i,
        });
    }
    Ok(expiry_count_for_dest(grid, geom, j, i) as f64 / geom.backoff_span() as f64)
}

/// Strictly lower-triangular backoff-spreading kernel, stored sparsely by
/// origin and by destination.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    num_slots: usize,
    /// Outgoing mass per origin slot (index `j - 1`): `(destination, prob)`.
    outgoing: Vec<Vec<(usize, f64)>>,
    /// Incoming mass per destination slot (index `i - 1`): `(origin, prob)`.
    incoming: Vec<Vec<(usize, f64)>>,
    /// Per-origin probability that the backoff expires past the horizon.
    overflow: Vec<f64>,
}

impl TransitionMatrix {
    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    /// Kernel entry `P[i][j]`; zero outside the stored sparsity pattern.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        if j == 0 || j > self.num_slots {
            return 0.0;
        }
        self.outgoing[j - 1]
            .iter()
            .find(|(dest, _)| *dest == i)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Origins feeding destination slot `i`, with their probabilities.
    pub fn feeders(&self, i: usize) -> &[(usize, f64)] {
        &self.incoming[i - 1]
    }

    /// Destinations reachable from origin slot `j`, with their probabilities.
    pub fn outgoing(&self, j: usize) -> &[(usize, f64)] {
        &self.outgoing[j - 1]
    }

    /// Backoff mass from origin `j` landing past the last slot.
    pub fn overflow_mass(&self, j: usize) -> f64 {
        self.overflow[j - 1]
    }

    /// Sum of kernel entries over destinations for origin `j`.
    pub fn origin_mass(&self, j: usize) -> f64 {
        self.outgoing[j - 1].iter().map(|(_, p)| p).sum()
    }

    /// Nonzero entries as `(destination, origin, prob)`, ordered by
    /// destination then origin.
    pub fn sparse_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.incoming
            .iter()
            .enumerate()
            .flat_map(|(idx, feeders)| feeders.iter().map(move |&(j, p)| (idx + 1, j, p)))
    }
}

/// Build the full kernel for a grid and geometry.
pub fn build_matrix(geom: &BackoffGeometry, grid: &SlotGrid) -> TransitionMatrix {
    let eta = grid.num_slots();
    let span = geom.backoff_span();
    let mut outgoing = vec![Vec::new(); eta];
    let mut incoming = vec![Vec::new(); eta];
    let mut overflow = vec![0.0; eta];
    for j in 1..=eta {
        let mut covered = 0u64;
        if let Some((first, last)) = dest_range(grid, geom, j) {
            for i in first..=last {
                let count = expiry_count_for_dest(grid, geom, j, i);
                if count > 0 {
                    let p = count as f64 / span as f64;
                    outgoing[j - 1].push((i, p));
                    incoming[i - 1].push((j, p));
                    covered += count;
                }
            }
        }
        overflow[j - 1] = (span - covered) as f64 / span as f64;
    }
    TransitionMatrix {
        num_slots: eta,
        outgoing,
        incoming,
        overflow,
    }
}

// ============================================================================
// Per-class success probabilities
// ============================================================================

/// Tagged-user success for M2M contenders: `(1 - 1/pool)^(z - 1)` with the
/// exponent floored at zero so sub-unit expected populations do not inflate
/// the probability above one.
pub fn success_prob_m2m(contenders: f64, pool: u32) -> Result<f64> {
    if pool == 0 {
        return Err(ModelError::EmptyPool);
    }
    let base = 1.0 - 1.0 / f64::from(pool);
    let exponent = (contenders - 1.0).max(0.0);
    Ok(base.powf(exponent).clamp(0.0, 1.0))
}

/// Poisson-form success for H2H contenders: `exp(-z / pool)`.
pub fn success_prob_h2h(contenders: f64, pool: u32) -> Result<f64> {
    if pool == 0 {
        return Err(ModelError::EmptyPool);
    }
    Ok((-contenders / f64::from(pool)).exp())
}

/// How the two-partition M2M success probability is combined under the
/// joint allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JaSuccessMode {
    /// Weight each partition term by the probability of landing in it.
    #[default]
    Mixture,
    /// Plain sum of the two partition terms, clamped to `[0, 1]`; exceeds one
    /// in sparse regimes before clamping.
    AsWritten,
}

/// Success probabilities under the joint allocation with `shared` of `total`
/// preambles open to H2H. H2H contends only on the shared partition; an M2M
/// pick lands in the shared partition with probability `shared / total`.
pub fn ja_success_probs(
    z_h2h: f64,
    z_m2m: f64,
    shared: u32,
    total: u32,
    mode: JaSuccessMode,
) -> Result<(f64, f64)> {
    if shared == 0 || shared >= total {
        return Err(ModelError::SplitOutOfRange {
            name: "x",
            value: shared,
            total,
        });
    }
    let x = f64::from(shared);
    let m = f64::from(total);
    let p_h2h = (-z_h2h / x).exp();

    let shared_mass = z_h2h + z_m2m * x / m;
    let reserved_mass = z_m2m * (m - x) / m;
    let term_shared = (1.0 - 1.0 / x).powf((shared_mass - 1.0).max(0.0));
    let term_reserved = (1.0 - 1.0 / (m - x)).powf((reserved_mass - 1.0).max(0.0));
    let p_m2m = match mode {
        JaSuccessMode::Mixture => (x / m) * term_shared + ((m - x) / m) * term_reserved,
        JaSuccessMode::AsWritten => (term_shared + term_reserved).clamp(0.0, 1.0),
    };
    Ok((p_h2h, p_m2m))
}

fn slot_success_probs(
    policy: &AllocationPolicy,
    z_h2h: f64,
    z_m2m: f64,
    ja_mode: JaSuccessMode,
) -> Result<(f64, f64)> {
    match *policy {
        // One pool, both classes contend on it: the per-class formulas take
        // the partition's total contender mass.
        AllocationPolicy::Shared { total } => Ok((
            success_prob_h2h(z_h2h + z_m2m, total)?,
            success_prob_m2m(z_h2h + z_m2m, total)?,
        )),
        AllocationPolicy::Disjoint { h2h, total } => Ok((
            success_prob_h2h(z_h2h, h2h)?,
            success_prob_m2m(z_m2m, total - h2h)?,
        )),
        AllocationPolicy::Joint { shared, total } => {
            ja_success_probs(z_h2h, z_m2m, shared, total, ja_mode)
        }
    }
}

// ============================================================================
// Population propagation
// ============================================================================

/// Expected new arrivals per slot and class (index `slot - 1`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewArrivals {
    pub h2h: Vec<f64>,
    pub m2m: Vec<f64>,
}

/// Expected populations per (slot, retry order, class) with success/failure
/// splits, plus the out-of-recursion buckets needed to close the books:
/// failures at the last allowed attempt are dropped, and failure mass whose
/// backoff expires past the horizon is held in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    num_slots: usize,
    max_attempts: usize,
    policy: AllocationPolicy,
    arrivals: PerClass<Vec<f64>>,
    success: PerClass<Vec<f64>>,
    failure: PerClass<Vec<f64>>,
    p_success: PerClass<Vec<f64>>,
    dropped: PerClass<f64>,
    in_flight: PerClass<f64>,
}

impl PopulationGrid {
    fn idx(&self, slot: usize, order: usize) -> usize {
        debug_assert!(slot >= 1 && slot <= self.num_slots);
        debug_assert!(order >= 1 && order <= self.max_attempts);
        (slot - 1) * self.max_attempts + (order - 1)
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn max_attempts(&self) -> usize {
        self.max_attempts
    }

    pub fn policy(&self) -> &AllocationPolicy {
        &self.policy
    }

    /// Expected arrivals in `slot` at retry order `order`.
    pub fn expected(&self, slot: usize, order: usize, class: Class) -> f64 {
        self.arrivals.get(class)[self.idx(slot, order)]
    }

    pub fn expected_success(&self, slot: usize, order: usize, class: Class) -> f64 {
        self.success.get(class)[self.idx(slot, order)]
    }

    pub fn expected_failure(&self, slot: usize, order: usize, class: Class) -> f64 {
        self.failure.get(class)[self.idx(slot, order)]
    }

    /// Per-class success probability applied in `slot`.
    pub fn slot_success_prob(&self, slot: usize, class: Class) -> f64 {
        self.p_success.get(class)[slot - 1]
    }

    /// Total expected arrivals in `slot` across retry orders.
    pub fn slot_total(&self, slot: usize, class: Class) -> f64 {
        (1..=self.max_attempts)
            .map(|n| self.expected(slot, n, class))
            .sum()
    }

    /// Total activated arrivals (first attempts) over the horizon.
    pub fn total_new(&self, class: Class) -> f64 {
        (1..=self.num_slots)
            .map(|i| self.expected(i, 1, class))
            .sum()
    }

    pub fn total_success(&self, class: Class) -> f64 {
        self.success.get(class).iter().sum()
    }

    pub fn total_failure(&self, class: Class) -> f64 {
        self.failure.get(class).iter().sum()
    }

    /// Expected UEs blocked after exhausting their attempts.
    pub fn dropped(&self, class: Class) -> f64 {
        *self.dropped.get(class)
    }

    /// Expected failure mass still in backoff past the horizon.
    pub fn in_flight(&self, class: Class) -> f64 {
        *self.in_flight.get(class)
    }
}

/// Run the forward recursion: new arrivals enter at retry order 1, failures
/// spread forward through the kernel at the next order, and the per-slot
/// success probabilities come from the policy applied to that slot's total
/// per-class contender mass.
pub fn propagate(
    policy: &AllocationPolicy,
    matrix: &TransitionMatrix,
    arrivals: &NewArrivals,
    max_attempts: u32,
    ja_mode: JaSuccessMode,
) -> Result<PopulationGrid> {
    policy.validate()?;
    if max_attempts == 0 {
        return Err(ModelError::InvalidParameter(
            "max attempts must be at least 1".into(),
        ));
    }
    let eta = matrix.num_slots();
    if arrivals.h2h.len() != eta || arrivals.m2m.len() != eta {
        return Err(ModelError::DimensionMismatch {
            matrix: eta,
            arrivals: arrivals.h2h.len().max(arrivals.m2m.len()),
        });
    }
    let w = max_attempts as usize;
    let mut grid = PopulationGrid {
        num_slots: eta,
        max_attempts: w,
        policy: *policy,
        arrivals: PerClass {
            h2h: vec![0.0; eta * w],
            m2m: vec![0.0; eta * w],
        },
        success: PerClass {
            h2h: vec![0.0; eta * w],
            m2m: vec![0.0; eta * w],
        },
        failure: PerClass {
            h2h: vec![0.0; eta * w],
            m2m: vec![0.0; eta * w],
        },
        p_success: PerClass {
            h2h: vec![0.0; eta],
            m2m: vec![0.0; eta],
        },
        dropped: PerClass::default(),
        in_flight: PerClass::default(),
    };

    for i in 1..=eta {
        for class in Class::ALL {
            let new = match class {
                Class::H2h => arrivals.h2h[i - 1],
                Class::M2m => arrivals.m2m[i - 1],
            };
            let base = grid.idx(i, 1);
            grid.arrivals.get_mut(class)[base] = new;
            for n in 2..=w {
                let mut mass = 0.0;
                for &(j, p) in matrix.feeders(i) {
                    mass += p * grid.failure.get(class)[(j - 1) * w + (n - 2)];
                }
                grid.arrivals.get_mut(class)[base + (n - 1)] = mass;
            }
        }

        let z_h2h = grid.slot_total(i, Class::H2h);
        let z_m2m = grid.slot_total(i, Class::M2m);
        let (p_h, p_m) = slot_success_probs(policy, z_h2h, z_m2m, ja_mode)?;
        grid.p_success.h2h[i - 1] = p_h;
        grid.p_success.m2m[i - 1] = p_m;

        let overflow = matrix.overflow_mass(i);
        for class in Class::ALL {
            let p = *grid.p_success.get(class).get(i - 1).unwrap();
            for n in 1..=w {
                let at = grid.idx(i, n);
                let z = grid.arrivals.get(class)[at];
                let zs = z * p;
                let zf = z - zs;
                grid.success.get_mut(class)[at] = zs;
                grid.failure.get_mut(class)[at] = zf;
                if n == w {
                    *grid.dropped.get_mut(class) += zf;
                } else {
                    *grid.in_flight.get_mut(class) += zf * overflow;
                }
            }
        }
    }
    Ok(grid)
}
