//! CSV writers for every artifact the toolkit emits. Schemas are stable:
//! a header row is always present, probabilities carry nine significant
//! digits, durations are in ms.

use std::io::{self, Write};

use crate::grid::SlotGrid;
use crate::kmc::{Class, PopulationGrid, TransitionMatrix};
use crate::metrics::MetricsReport;
use crate::sim::{BatchMetrics, SimTrace};

/// Probability with nine significant digits.
pub fn format_prob(p: f64) -> String {
    format!("{p:.8e}")
}

fn format_ms(v: f64) -> String {
    format!("{v:.6}")
}

fn format_opt_ms(v: Option<f64>) -> String {
    v.map(format_ms).unwrap_or_default()
}

pub fn write_population_csv<W: Write>(
    out: &mut W,
    pop: &PopulationGrid,
    grid: &SlotGrid,
) -> io::Result<()> {
    writeln!(
        out,
        "slot,t_ms,class,retry_order,expected,expected_success,expected_fail"
    )?;
    for i in 1..=pop.num_slots() {
        for class in Class::ALL {
            for n in 1..=pop.max_attempts() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    i,
                    grid.slot_time_ms(i),
                    class.name(),
                    n,
                    format_prob(pop.expected(i, n, class)),
                    format_prob(pop.expected_success(i, n, class)),
                    format_prob(pop.expected_failure(i, n, class)),
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_matrix_csv<W: Write>(out: &mut W, matrix: &TransitionMatrix) -> io::Result<()> {
    writeln!(out, "dest,origin,prob")?;
    for (dest, origin, p) in matrix.sparse_entries() {
        writeln!(out, "{dest},{origin},{}", format_prob(p))?;
    }
    Ok(())
}

pub fn write_metrics_csv<W: Write>(
    out: &mut W,
    scenario_id: &str,
    policy: &str,
    split_param: Option<u32>,
    report: &MetricsReport,
) -> io::Result<()> {
    writeln!(
        out,
        "scenario_id,policy,split_param,class,P_s,P_f,E_tau_ms,blocked"
    )?;
    let split = split_param.map(|v| v.to_string()).unwrap_or_default();
    for (class, metrics) in [
        ("h2h", &report.h2h),
        ("m2m", &report.m2m),
        ("combined", &report.combined),
    ] {
        writeln!(
            out,
            "{scenario_id},{policy},{split},{class},{},{},{},{}",
            format_prob(metrics.access_success_prob),
            format_prob(metrics.collision_prob),
            format_opt_ms(metrics.expected_access_delay_ms),
            format_ms(metrics.blocked),
        )?;
    }
    Ok(())
}

/// CDF tables: `preamble` rows carry `F_p(r)`, `delay` rows the delay-mass
/// form (ms units), `delay_empirical` rows the measured delay CDF when the
/// report came from traces.
pub fn write_cdf_csv<W: Write>(out: &mut W, report: &MetricsReport) -> io::Result<()> {
    writeln!(out, "kind,class,abscissa,value")?;
    for (class, metrics) in [
        ("h2h", &report.h2h),
        ("m2m", &report.m2m),
        ("combined", &report.combined),
    ] {
        for (r, value) in metrics.preamble_tx_cdf.iter().enumerate() {
            writeln!(out, "preamble,{class},{},{}", r + 1, format_prob(*value))?;
        }
        for (omega, value) in metrics.delay_cdf_paper_ms.iter().enumerate() {
            writeln!(out, "delay,{class},{},{}", omega + 1, format_ms(*value))?;
        }
        if let Some(delays) = &metrics.success_delays_ms {
            let total = delays.len();
            if total > 0 {
                let mut seen = 0usize;
                let mut idx = 0usize;
                while idx < total {
                    let d = delays[idx];
                    while idx < total && delays[idx] == d {
                        idx += 1;
                        seen += 1;
                    }
                    writeln!(
                        out,
                        "delay_empirical,{class},{},{}",
                        format_ms(d),
                        format_prob(seen as f64 / total as f64)
                    )?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_ue_records_csv<W: Write>(out: &mut W, traces: &[SimTrace]) -> io::Result<()> {
    writeln!(
        out,
        "replication,ue_id,class,arrival_ms,n_attempts,final,delay_ms"
    )?;
    for (rep, trace) in traces.iter().enumerate() {
        for ue in &trace.ues {
            writeln!(
                out,
                "{rep},{},{},{},{},{},{}",
                ue.id,
                ue.class.name(),
                format_ms(ue.arrival_ms),
                ue.attempts.len(),
                ue.outcome.name(),
                format_opt_ms(ue.success_delay_ms),
            )?;
        }
    }
    Ok(())
}

pub fn write_slot_outcomes_csv<W: Write>(out: &mut W, traces: &[SimTrace]) -> io::Result<()> {
    writeln!(out, "replication,slot,t_ms,contenders,successes,collisions")?;
    for (rep, trace) in traces.iter().enumerate() {
        for slot in &trace.slots {
            writeln!(
                out,
                "{rep},{},{},{},{},{}",
                slot.slot,
                trace.grid.slot_time_ms(slot.slot),
                slot.contenders,
                slot.successes,
                slot.collisions,
            )?;
        }
    }
    Ok(())
}

/// Side-by-side analysis/simulation table with relative errors.
pub fn write_compare_csv<W: Write>(
    out: &mut W,
    analysis: &MetricsReport,
    batch: &BatchMetrics,
) -> io::Result<()> {
    writeln!(out, "metric,class,analysis,sim_mean,sim_std,rel_err")?;
    let rel = |a: f64, s: f64| {
        if s.abs() > 1e-12 {
            (a - s).abs() / s.abs()
        } else {
            (a - s).abs()
        }
    };
    let mut row = |metric: &str, class: &str, a: f64, mean: f64, std: f64| {
        writeln!(
            out,
            "{metric},{class},{},{},{},{}",
            format_prob(a),
            format_prob(mean),
            format_prob(std),
            format_prob(rel(a, mean)),
        )
    };
    for (class, am, stats) in [
        ("h2h", &analysis.h2h, &batch.p_success.h2h),
        ("m2m", &analysis.m2m, &batch.p_success.m2m),
        ("combined", &analysis.combined, &batch.p_success.combined),
    ] {
        row(
            "P_s",
            class,
            am.access_success_prob,
            stats.mean,
            stats.std_dev,
        )?;
    }
    for (class, am, stats) in [
        ("h2h", &analysis.h2h, &batch.collision.h2h),
        ("m2m", &analysis.m2m, &batch.collision.m2m),
        ("combined", &analysis.combined, &batch.collision.combined),
    ] {
        row("P_f", class, am.collision_prob, stats.mean, stats.std_dev)?;
    }
    for (class, am, stats) in [
        ("h2h", &analysis.h2h, &batch.delay_ms.h2h),
        ("m2m", &analysis.m2m, &batch.delay_ms.m2m),
        ("combined", &analysis.combined, &batch.delay_ms.combined),
    ] {
        row(
            "E_tau_ms",
            class,
            am.expected_access_delay_ms.unwrap_or(0.0),
            stats.mean,
            stats.std_dev,
        )?;
    }
    for (class, am, stats) in [
        ("h2h", &analysis.h2h, &batch.blocked.h2h),
        ("m2m", &analysis.m2m, &batch.blocked.m2m),
        ("combined", &analysis.combined, &batch.blocked.combined),
    ] {
        row("blocked", class, am.blocked, stats.mean, stats.std_dev)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeRow {
    pub phi_ms: f64,
    pub x_dagger_bound: Option<u32>,
    pub x_dagger_exact: Option<u32>,
    pub j_min_ms: f64,
    pub feasible: bool,
}

pub fn write_optimizer_csv<W: Write>(out: &mut W, rows: &[OptimizeRow]) -> io::Result<()> {
    writeln!(out, "phi_ms,x_dagger_bound,x_dagger_exact,J_min_ms,feasible")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_ms(row.phi_ms),
            row.x_dagger_bound.map(|v| v.to_string()).unwrap_or_default(),
            row.x_dagger_exact.map(|v| v.to_string()).unwrap_or_default(),
            format_ms(row.j_min_ms),
            row.feasible,
        )?;
    }
    Ok(())
}

pub fn write_optimizer_curves_csv<W: Write>(
    out: &mut W,
    bound_curve: &[(u32, f64)],
    exact_curve: Option<&[(u32, f64)]>,
) -> io::Result<()> {
    writeln!(out, "x,J_bound_ms,E_tau_exact_ms")?;
    for (idx, &(x, j)) in bound_curve.iter().enumerate() {
        let exact = exact_curve
            .and_then(|c| c.get(idx))
            .map(|&(_, v)| format_ms(v))
            .unwrap_or_default();
        writeln!(out, "{x},{},{exact}", format_ms(j))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: u32,
    pub class: &'static str,
    pub p_success: f64,
    pub collision: f64,
    pub e_tau_ms: Option<f64>,
    pub blocked: f64,
}

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "param,value,class,P_s,P_f,E_tau_ms,blocked")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.param,
            row.value,
            row.class,
            format_prob(row.p_success),
            format_prob(row.collision),
            format_opt_ms(row.e_tau_ms),
            format_ms(row.blocked),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub check: String,
    pub case: String,
    pub engine: f64,
    pub oracle: f64,
    pub pass: bool,
}

pub fn write_validation_csv<W: Write>(out: &mut W, rows: &[ValidationRow]) -> io::Result<()> {
    writeln!(out, "check,case,engine,oracle,abs_err,pass")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.check,
            row.case,
            format_prob(row.engine),
            format_prob(row.oracle),
            format_prob((row.engine - row.oracle).abs()),
            row.pass,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_carries_nine_significant_digits() {
        assert_eq!(format_prob(0.5), "5.00000000e-1");
        assert_eq!(format_prob(1.0 / 3.0), "3.33333333e-1");
    }
}
