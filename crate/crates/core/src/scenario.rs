//! Resolved scenario: the validated, engine-ready view of a configuration,
//! plus the analysis pipeline that runs the kernel build, population
//! recursion and metrics in one call.

use crate::config::{PolicyKind, ScenarioConfig};
use crate::error::Result;
use crate::grid::SlotGrid;
use crate::kmc::{
    build_matrix, propagate, AllocationPolicy, BackoffGeometry, JaSuccessMode, NewArrivals,
    PopulationGrid, TransitionMatrix,
};
use crate::metrics::{analysis_report, MetricsReport, RetxLagMode};
use crate::traffic::{h2h_mean, m2m_new_arrivals, ArrivalModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: SlotGrid,
    pub geom: BackoffGeometry,
    pub policy: AllocationPolicy,
    pub max_attempts: u32,
    pub m2m: ArrivalModel,
    pub h2h: ArrivalModel,
    pub ja_mode: JaSuccessMode,
    pub lag_mode: RetxLagMode,
}

/// Everything the analysis path produces for one scenario.
#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub matrix: TransitionMatrix,
    pub population: PopulationGrid,
    pub report: MetricsReport,
}

impl Scenario {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let grid = SlotGrid::new(config.time.delta_sf_ms, config.time.horizon_ms)?;
        let geom = BackoffGeometry {
            rar_delay_ms: config.rach.rar_delay_ms,
            rar_window_ms: config.rach.rar_window_ms,
            backoff_window_ms: config.rach.backoff_window_ms,
            slot_interval_ms: config.time.delta_sf_ms,
        };
        let policy = match config.policy.kind {
            PolicyKind::Shared => AllocationPolicy::Shared {
                total: config.rach.preambles,
            },
            PolicyKind::Da => AllocationPolicy::Disjoint {
                h2h: config.policy.a.expect("validated"),
                total: config.rach.preambles,
            },
            PolicyKind::Ja => AllocationPolicy::Joint {
                shared: config.policy.x.expect("validated"),
                total: config.rach.preambles,
            },
        };
        policy.validate()?;
        Ok(Scenario {
            grid,
            geom,
            policy,
            max_attempts: config.rach.max_attempts,
            m2m: config.m2m_model(),
            h2h: config.h2h_model(),
            ja_mode: config.model.ja_success_mode,
            lag_mode: config.model.retx_lag,
        })
    }

    /// Same scenario under a different allocation policy (sweeps, optimizer).
    pub fn with_policy(&self, policy: AllocationPolicy) -> Scenario {
        Scenario {
            policy,
            ..self.clone()
        }
    }

    /// Expected per-slot new arrivals for both classes.
    pub fn expected_arrivals(&self) -> Result<NewArrivals> {
        let eta = self.grid.num_slots();
        let mut arrivals = NewArrivals {
            h2h: Vec::with_capacity(eta),
            m2m: Vec::with_capacity(eta),
        };
        for i in 1..=eta {
            arrivals.h2h.push(h2h_mean(&self.h2h, i)?);
            arrivals.m2m.push(m2m_new_arrivals(&self.m2m, &self.grid, i)?);
        }
        Ok(arrivals)
    }

    pub fn transition_matrix(&self) -> TransitionMatrix {
        build_matrix(&self.geom, &self.grid)
    }

    /// Run the full analytical pipeline.
    pub fn analyze(&self) -> Result<AnalysisOutput> {
        let matrix = self.transition_matrix();
        let arrivals = self.expected_arrivals()?;
        self.analyze_with(&matrix, &arrivals)
    }

    /// Analysis pipeline with a precomputed kernel and arrival profile, for
    /// callers that sweep policies over a fixed geometry.
    pub fn analyze_with(
        &self,
        matrix: &TransitionMatrix,
        arrivals: &NewArrivals,
    ) -> Result<AnalysisOutput> {
        let population = propagate(
            &self.policy,
            matrix,
            arrivals,
            self.max_attempts,
            self.ja_mode,
        )?;
        let report = analysis_report(&population, matrix, &self.grid, &self.geom, self.lag_mode)?;
        Ok(AnalysisOutput {
            matrix: matrix.clone(),
            population,
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::Class;

    fn config() -> ScenarioConfig {
        ScenarioConfig::from_toml_str(
            r#"
[time]
T_ms = 2000
delta_sf_ms = 10

[rach]
M = 54
W = 10
W_BO_ms = 20
T_RAR_ms = 2
W_RAR_ms = 5

[traffic.m2m]
type = "type1"
n_mtc = 100

[traffic.h2h]
lambda_per_slot = 0.2

[policy]
kind = "shared"
"#,
        )
        .unwrap()
    }

    #[test]
    fn pipeline_runs_end_to_end() {
        let scenario = Scenario::from_config(&config()).unwrap();
        let out = scenario.analyze().unwrap();
        assert_eq!(out.population.num_slots(), 200);
        assert!(out.report.m2m.access_success_prob > 0.9);
        let total_new = out.population.total_new(Class::M2m);
        assert!((total_new - 100.0).abs() < 1e-6);
    }

    #[test]
    fn policy_swap_keeps_geometry() {
        let scenario = Scenario::from_config(&config()).unwrap();
        let ja = scenario.with_policy(AllocationPolicy::Joint {
            shared: 5,
            total: 54,
        });
        assert_eq!(ja.grid, scenario.grid);
        assert!(ja.analyze().is_ok());
    }
}
