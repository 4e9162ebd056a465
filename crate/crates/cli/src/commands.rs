use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rachsim::config::OptimizerMode;
use rachsim::kmc::AllocationPolicy;
use rachsim::optimizer;
use rachsim::oracles;
use rachsim::report::{self, OptimizeRow, SweepRow, ValidationRow};
use rachsim::sim::{batch_seeds, run_batch};
use rachsim::{Scenario, ScenarioConfig};

use crate::{CliError, CommonArgs, SweepArgs};

/// Effective run parameters after flag overrides.
struct Run {
    config: ScenarioConfig,
    scenario: Scenario,
    out_dir: PathBuf,
    seed: u64,
    replications: usize,
}

fn prepare(args: &CommonArgs) -> Result<Run, CliError> {
    let config = ScenarioConfig::load(&args.config)?;
    let scenario = Scenario::from_config(&config)?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)?;
    Ok(Run {
        seed: args.seed.unwrap_or(config.sim.seed),
        replications: args.replications.unwrap_or(config.sim.replications),
        config,
        scenario,
        out_dir,
    })
}

impl Run {
    fn report_enabled(&self, name: &str) -> bool {
        match &self.config.output.reports {
            Some(list) => list.iter().any(|r| r == name),
            None => true,
        }
    }

    fn writer(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    /// Every run records the resolved config plus the effective run
    /// parameters; rerunning with this manifest reproduces the outputs
    /// byte-identically.
    fn write_manifest(&self, subcommand: &str) -> Result<(), CliError> {
        let mut out = self.writer("manifest.toml")?;
        writeln!(out, "[run]")?;
        writeln!(out, "subcommand = \"{subcommand}\"")?;
        writeln!(out, "toolkit_version = \"{}\"", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "seed = {}", self.seed)?;
        writeln!(out, "replications = {}", self.replications)?;
        writeln!(out)?;
        writeln!(out, "[scenario]")?;
        // Nest the config echo one level down so the manifest stays one
        // valid TOML document.
        for line in self.config.to_toml_string().lines() {
            if let Some(rest) = line.strip_prefix('[') {
                writeln!(out, "[scenario.{rest}")?;
            } else {
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }
}

pub fn analyze(args: &CommonArgs) -> Result<(), CliError> {
    let run = prepare(args)?;
    let output = run.scenario.analyze()?;
    if run.report_enabled("population") {
        report::write_population_csv(
            &mut run.writer("population.csv")?,
            &output.population,
            &run.scenario.grid,
        )?;
    }
    if run.report_enabled("matrix") {
        report::write_matrix_csv(&mut run.writer("transition_matrix.csv")?, &output.matrix)?;
    }
    if run.report_enabled("metrics") {
        report::write_metrics_csv(
            &mut run.writer("metrics_analysis.csv")?,
            run.config.scenario_id(),
            run.scenario.policy.kind_name(),
            run.scenario.policy.split(),
            &output.report,
        )?;
    }
    if run.report_enabled("cdf") {
        report::write_cdf_csv(&mut run.writer("cdf_analysis.csv")?, &output.report)?;
    }
    run.write_manifest("analyze")
}

pub fn simulate(args: &CommonArgs) -> Result<(), CliError> {
    let run = prepare(args)?;
    let seeds = batch_seeds(run.seed, run.replications);
    let batch = run_batch(&run.scenario, &seeds)?;
    if run.report_enabled("ue_records") {
        report::write_ue_records_csv(&mut run.writer("ue_records.csv")?, &batch.traces)?;
    }
    if run.report_enabled("slot_outcomes") {
        report::write_slot_outcomes_csv(&mut run.writer("slot_outcomes.csv")?, &batch.traces)?;
    }
    if run.report_enabled("metrics") {
        let mut out = run.writer("metrics_simulation.csv")?;
        report::write_metrics_csv(
            &mut out,
            run.config.scenario_id(),
            run.scenario.policy.kind_name(),
            run.scenario.policy.split(),
            &batch.aggregate.mean,
        )?;
        // Per-replication rows under derived scenario ids, same schema.
        for (rep, rep_report) in batch.reports.iter().enumerate() {
            let id = format!("{}/rep{rep}", run.config.scenario_id());
            let mut text = Vec::new();
            report::write_metrics_csv(
                &mut text,
                &id,
                run.scenario.policy.kind_name(),
                run.scenario.policy.split(),
                rep_report,
            )?;
            let body = String::from_utf8(text).expect("csv is utf8");
            for line in body.lines().skip(1) {
                writeln!(out, "{line}")?;
            }
        }
    }
    if run.report_enabled("cdf") {
        report::write_cdf_csv(&mut run.writer("cdf_simulation.csv")?, &batch.aggregate.mean)?;
    }
    run.write_manifest("simulate")
}

pub fn compare(args: &CommonArgs) -> Result<(), CliError> {
    let run = prepare(args)?;
    let analysis = run.scenario.analyze()?;
    let seeds = batch_seeds(run.seed, run.replications);
    let batch = run_batch(&run.scenario, &seeds)?;
    report::write_compare_csv(
        &mut run.writer("compare.csv")?,
        &analysis.report,
        &batch.aggregate,
    )?;
    run.write_manifest("compare")
}

pub fn optimize(args: &CommonArgs) -> Result<(), CliError> {
    let run = prepare(args)?;
    let Some(opt_config) = run.config.optimizer.clone() else {
        return Err(CliError::Config(rachsim::ConfigError::Constraint {
            key: "optimizer".into(),
            message: "section required for the optimize subcommand".into(),
        }));
    };
    let bound_enabled = matches!(opt_config.mode, OptimizerMode::Bound | OptimizerMode::Both);
    let exact_enabled = matches!(opt_config.mode, OptimizerMode::Exact | OptimizerMode::Both);

    let exact_curve = if exact_enabled {
        Some(optimizer::exact_delay_curve(&run.scenario)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut bound_curve: Option<Vec<(u32, f64)>> = None;
    for &phi in &opt_config.phi_ms {
        let (x_bound, j_min) = if bound_enabled {
            let input = optimizer::steady_state_input(
                &run.scenario,
                phi,
                opt_config.include_state_delay,
            )?;
            let solution = optimizer::solve_x_dagger(&input)?;
            let min = solution.min_objective_ms;
            if bound_curve.is_none() {
                bound_curve = Some(solution.curve.clone());
            }
            (solution.x_dagger, min)
        } else {
            (None, f64::NAN)
        };
        let x_exact = exact_curve
            .as_deref()
            .and_then(|curve| optimizer::exact_x_dagger(curve, phi));
        let feasible = match opt_config.mode {
            OptimizerMode::Bound => x_bound.is_some(),
            OptimizerMode::Exact => x_exact.is_some(),
            OptimizerMode::Both => x_bound.is_some() || x_exact.is_some(),
        };
        rows.push(OptimizeRow {
            phi_ms: phi,
            x_dagger_bound: x_bound,
            x_dagger_exact: x_exact,
            j_min_ms: j_min,
            feasible,
        });
    }
    report::write_optimizer_csv(&mut run.writer("optimize.csv")?, &rows)?;
    if run.report_enabled("curves") {
        if let Some(bound_curve) = &bound_curve {
            report::write_optimizer_curves_csv(
                &mut run.writer("optimizer_curves.csv")?,
                bound_curve,
                exact_curve.as_deref(),
            )?;
        } else if let Some(exact) = &exact_curve {
            let placeholder: Vec<(u32, f64)> =
                exact.iter().map(|&(x, _)| (x, f64::NAN)).collect();
            report::write_optimizer_curves_csv(
                &mut run.writer("optimizer_curves.csv")?,
                &placeholder,
                Some(exact),
            )?;
        }
    }
    run.write_manifest("optimize")?;
    if rows.iter().all(|r| !r.feasible) {
        return Err(CliError::Runtime(
            "no threshold in optimizer.phi_ms is feasible".into(),
        ));
    }
    Ok(())
}

pub fn validate(args: &CommonArgs) -> Result<(), CliError> {
    let run = prepare(args)?;
    let mut rows = Vec::new();

    // Tagged-user success against exhaustive enumeration.
    for pool in 2..=6u32 {
        for contenders in 1..=6u32 {
            let oracle =
                oracles::ratio_to_f64(oracles::exhaustive_tagged_success(contenders, pool)?);
            let engine = rachsim::kmc::success_prob_m2m(f64::from(contenders), pool)?;
            rows.push(ValidationRow {
                check: "tagged_success".into(),
                case: format!("n={contenders} M={pool}"),
                engine,
                oracle,
                pass: (engine - oracle).abs() <= 1e-12,
            });
        }
    }

    // Joint-allocation tagged success against enumeration; the engine value
    // is mean-field, so the tolerance is loose by design.
    for (n_h2h, n_m2m, x, m) in [(0u32, 2u32, 27u32, 54u32), (0, 1, 10, 54), (1, 1, 1, 2)] {
        let oracle =
            oracles::ratio_to_f64(oracles::exhaustive_ja_tagged_success(n_h2h, n_m2m, x, m)?);
        let (_, engine) = rachsim::kmc::ja_success_probs(
            f64::from(n_h2h),
            f64::from(n_m2m),
            x,
            m,
            run.scenario.ja_mode,
        )?;
        rows.push(ValidationRow {
            check: "ja_tagged_success".into(),
            case: format!("h2h={n_h2h} m2m={n_m2m} x={x} M={m}"),
            engine,
            oracle,
            pass: (engine - oracle).abs() <= 0.05,
        });
    }

    // Backoff kernel rows against the Monte-Carlo landing histogram.
    let eta = run.scenario.grid.num_slots();
    let origins: Vec<usize> = [1, 2, eta / 2, eta.saturating_sub(1)]
        .into_iter()
        .filter(|&j| j >= 1 && j < eta)
        .collect();
    for &origin in origins.iter() {
        let hist = oracles::mc_backoff_distribution(
            &run.scenario.geom,
            &run.scenario.grid,
            origin,
            100_000,
            run.seed,
        )?;
        for dest in (origin + 1)..=eta.min(origin + 1 + hist_span(&run.scenario)) {
            let engine =
                rachsim::kmc::transition_prob(dest, origin, &run.scenario.geom, &run.scenario.grid)?;
            let oracle = hist.probs[dest - 1];
            rows.push(ValidationRow {
                check: "backoff_kernel".into(),
                case: format!("origin={origin} dest={dest}"),
                engine,
                oracle,
                pass: (engine - oracle).abs() <= 0.01,
            });
        }
    }

    report::write_validation_csv(&mut run.writer("validation.csv")?, &rows)?;
    run.write_manifest("validate")?;
    let failures = rows.iter().filter(|r| !r.pass).count();
    if failures > 0 {
        return Err(CliError::Runtime(format!(
            "{failures} validation rows failed (see validation.csv)"
        )));
    }
    Ok(())
}

/// Upper bound on the number of slots a backoff can span.
fn hist_span(scenario: &Scenario) -> usize {
    let geom = &scenario.geom;
    ((geom.rar_wait_ms() + geom.backoff_window_ms) / geom.slot_interval_ms + 1) as usize
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let run = prepare(&args.common)?;
    let total = run.scenario.policy.total();
    let (lo, hi) = parse_range(&args.range)?;
    if lo == 0 || hi >= total || lo > hi {
        return Err(CliError::Runtime(format!(
            "sweep range {lo}:{hi} outside 0 < value < {total}"
        )));
    }
    let make_policy: fn(u32, u32) -> AllocationPolicy = match args.param.as_str() {
        "x" => |v, total| AllocationPolicy::Joint { shared: v, total },
        "a" => |v, total| AllocationPolicy::Disjoint { h2h: v, total },
        other => {
            return Err(CliError::Runtime(format!(
                "unknown sweep parameter `{other}` (expected x or a)"
            )));
        }
    };
    let param: &'static str = if args.param == "x" { "x" } else { "a" };

    let matrix = run.scenario.transition_matrix();
    let arrivals = run.scenario.expected_arrivals()?;
    let values: Vec<u32> = (lo..=hi).collect();
    let outputs = rachsim::exec::par_map(&values, |&v| {
        run.scenario
            .with_policy(make_policy(v, total))
            .analyze_with(&matrix, &arrivals)
            .map(|out| (v, out.report))
    });

    let mut rows = Vec::new();
    for result in outputs {
        let (value, rep) = result?;
        for (class, metrics) in [
            ("h2h", &rep.h2h),
            ("m2m", &rep.m2m),
            ("combined", &rep.combined),
        ] {
            rows.push(SweepRow {
                param,
                value,
                class,
                p_success: metrics.access_success_prob,
                collision: metrics.collision_prob,
                e_tau_ms: metrics.expected_access_delay_ms,
                blocked: metrics.blocked,
            });
        }
    }
    report::write_sweep_csv(&mut run.writer("sweep.csv")?, &rows)?;
    run.write_manifest("sweep")
}

fn parse_range(text: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Runtime(format!("cannot parse range `{text}` (expected LO:HI)"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}
