//! Optimal H2H preamble share under the joint allocation: a closed-form
//! Jensen-bound objective scanned over integer shares, plus an exact mode
//! that greps the full analysis pipeline for the largest share whose M2M
//! access delay stays below the threshold.

use crate::error::{ModelError, Result};
use crate::exec::par_map;
use crate::kmc::{max_lag, AllocationPolicy, BackoffGeometry};
use crate::scenario::Scenario;
use crate::traffic::{h2h_mean, m2m_new_arrivals, ArrivalModel};

/// Steady-state inputs of the bound-mode solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerInput {
    /// Total preambles per slot (M).
    pub total_preambles: u32,
    /// Attempt budget (W); the denominator bound runs at W-scaled loads.
    pub max_attempts: u32,
    /// Mean H2H new arrivals per slot.
    pub h2h_rate: f64,
    /// Representative mean M2M new arrivals per slot (peak-load design point).
    pub m2m_rate: f64,
    /// M2M access-delay threshold in ms.
    pub phi_ms: f64,
    pub geom: BackoffGeometry,
    /// Steady-state maximum lag feeding one slot.
    pub steady_state_lag: usize,
    /// Multiply the success-ratio bound by the expected per-state delay.
    pub include_state_delay: bool,
}

impl OptimizerInput {
    pub fn validate(&self) -> Result<()> {
        if self.total_preambles < 2 {
            return Err(ModelError::InvalidParameter(
                "need at least two preambles to split".into(),
            ));
        }
        if !(self.h2h_rate > 0.0) {
            return Err(ModelError::InvalidParameter(
                "H2H rate must be positive".into(),
            ));
        }
        if self.m2m_rate < 0.0 {
            return Err(ModelError::InvalidParameter(
                "M2M rate must be nonnegative".into(),
            ));
        }
        if !(self.phi_ms > f64::from(self.geom.rar_wait_ms())) {
            return Err(ModelError::InvalidParameter(format!(
                "threshold {} ms must exceed the RAR wait {} ms",
                self.phi_ms,
                self.geom.rar_wait_ms()
            )));
        }
        Ok(())
    }
}

/// Expected delay accumulated by a state whose feeders reach back `k` slots:
/// `k (k + 1) / 2` slot intervals plus the RAR wait.
pub fn expected_state_delay(geom: &BackoffGeometry, k: usize) -> f64 {
    let k = k as f64;
    k * (k + 1.0) / 2.0 * f64::from(geom.slot_interval_ms) + f64::from(geom.rar_wait_ms())
}

fn check_split(x: u32, m: u32) -> Result<()> {
    if x == 0 || x >= m {
        Err(ModelError::SplitOutOfRange {
            name: "x",
            value: x,
            total: m,
        })
    } else {
        Ok(())
    }
}

/// Jensen lower bound on the expected success count with `x` shared
/// preambles: the shared partition carries `lambda + n x / M` arrivals, the
/// reserved one `n (M - x) / M`; exponents floor at zero.
pub fn bound_a(x: u32, m: u32, lambda: f64, n: f64) -> Result<f64> {
    check_split(x, m)?;
    let xf = f64::from(x);
    let mf = f64::from(m);
    let alpha = lambda + n * xf / mf;
    let gamma = n * (mf - xf) / mf;
    let shared = alpha * (1.0 - 1.0 / xf).powf((alpha - 1.0).max(0.0));
    let reserved = gamma * (1.0 - 1.0 / (mf - xf)).powf((gamma - 1.0).max(0.0));
    Ok(shared + reserved)
}

/// Denominator bound: the success bound plus the H2H success term.
pub fn bound_b(x: u32, m: u32, lambda: f64, n: f64) -> Result<f64> {
    let a = bound_a(x, m, lambda, n)?;
    Ok(a + lambda * (-lambda / f64::from(x)).exp())
}

/// Bound-mode objective in ms: the per-state delay times the ratio of the
/// fresh-load success bound to the steady-state (W-scaled) denominator
/// bound. Without the state-delay factor it is the bare ratio.
pub fn objective(x: u32, input: &OptimizerInput) -> Result<f64> {
    input.validate()?;
    let m = input.total_preambles;
    let w = f64::from(input.max_attempts);
    let numerator = bound_a(x, m, input.h2h_rate, input.m2m_rate)?;
    let denominator = bound_b(x, m, w * input.h2h_rate, w * input.m2m_rate)?;
    let ratio = numerator / denominator;
    if input.include_state_delay {
        Ok(expected_state_delay(&input.geom, input.steady_state_lag) * ratio)
    } else {
        Ok(ratio)
    }
}

/// Result of a bound-mode scan over the integer shares `1..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSolution {
    /// Largest share meeting the threshold; `None` when infeasible.
    pub x_dagger: Option<u32>,
    /// Objective at every share, `(x, J(x))`.
    pub curve: Vec<(u32, f64)>,
    pub min_x: u32,
    pub min_objective_ms: f64,
}

/// Scan all integer shares and keep the largest one whose objective meets
/// the threshold, along with the full curve and the minimum for diagnosing
/// infeasible thresholds.
pub fn solve_x_dagger(input: &OptimizerInput) -> Result<BoundSolution> {
    input.validate()?;
    let mut curve = Vec::with_capacity(input.total_preambles as usize - 1);
    for x in 1..input.total_preambles {
        curve.push((x, objective(x, input)?));
    }
    let &(min_x, min_objective_ms) = curve
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty scan");
    let x_dagger = curve
        .iter()
        .rev()
        .find(|&&(_, j)| j <= input.phi_ms)
        .map(|&(x, _)| x);
    Ok(BoundSolution {
        x_dagger,
        curve,
        min_x,
        min_objective_ms,
    })
}

/// Exact-mode curve: M2M expected access delay from the full analysis
/// pipeline at every joint share, over the scenario's real traffic profile.
pub fn exact_delay_curve(scenario: &Scenario) -> Result<Vec<(u32, f64)>> {
    let total = scenario.policy.total();
    if total < 2 {
        return Err(ModelError::InvalidParameter(
            "need at least two preambles to split".into(),
        ));
    }
    let matrix = scenario.transition_matrix();
    let arrivals = scenario.expected_arrivals()?;
    let shares: Vec<u32> = (1..total).collect();
    par_map(&shares, |&x| {
        let candidate = scenario.with_policy(AllocationPolicy::Joint { shared: x, total });
        let out = candidate.analyze_with(&matrix, &arrivals)?;
        Ok((
            x,
            out.report
                .m2m
                .expected_access_delay_ms
                .unwrap_or(f64::INFINITY),
        ))
    })
    .into_iter()
    .collect()
}

/// Largest share whose exact-pipeline delay meets the threshold.
pub fn exact_x_dagger(curve: &[(u32, f64)], phi_ms: f64) -> Option<u32> {
    curve
        .iter()
        .rev()
        .find(|&&(_, delay)| delay <= phi_ms)
        .map(|&(x, _)| x)
}

/// Build the bound-mode input from a scenario: the M2M rate is the peak
/// expected per-slot arrival mass, the lag is the steady-state maximum lag
/// at the end of the horizon.
pub fn steady_state_input(
    scenario: &Scenario,
    phi_ms: f64,
    include_state_delay: bool,
) -> Result<OptimizerInput> {
    let eta = scenario.grid.num_slots();
    let mut m2m_rate = 0.0f64;
    for i in 1..=eta {
        m2m_rate = m2m_rate.max(m2m_new_arrivals(&scenario.m2m, &scenario.grid, i)?);
    }
    let h2h_rate = match scenario.h2h {
        ArrivalModel::H2hPoisson { .. } => h2h_mean(&scenario.h2h, 1)?,
        _ => {
            return Err(ModelError::ExpectedH2h);
        }
    };
    let input = OptimizerInput {
        total_preambles: scenario.policy.total(),
        max_attempts: scenario.max_attempts,
        h2h_rate,
        m2m_rate,
        phi_ms,
        geom: scenario.geom,
        steady_state_lag: max_lag(eta, &scenario.geom, &scenario.grid),
        include_state_delay,
    };
    input.validate()?;
    Ok(input)
}
