//! Executes one subcommand over the configured experiments and writes the
//! CSV artifacts plus the run manifest.
//!
//! Every artifact is a pure function of the parsed config, so reruns — on
//! any worker count, or from the manifest of a previous run — reproduce
//! each file byte for byte. Experiments run in config order and each file
//! has a single writer.

use std::fs;
use std::path::PathBuf;

use wqlab::bounds::{check_report, BoundSelection};
use wqlab::dyadic::{default_truncation_level, dyadic_bound};
use wqlab::quantize::{
    kappa_trace_from_summaries, kappa_unif_trace, optimal_quantizer, rate_fit,
    replication_csv, summary_csv, v_rand_estimate, ExperimentSpec, NSummary,
};
use wqlab::rng::{self, tag};
use wqlab::transport::rho_exact;
use wqlab::DiscreteMeasure64;

use crate::config::{build_manifest, ExperimentEntry, RunConfig};
use crate::CliError;

pub struct RunContext {
    pub command: String,
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

/// One experiment's output: files to write and lines to print.
struct ExperimentOutput {
    files: Vec<(String, String)>,
    stdout: Vec<String>,
}

pub fn run(ctx: &RunContext) -> Result<(), CliError> {
    fs::create_dir_all(&ctx.out_dir).map_err(|e| {
        CliError::Config(format!(
            "output directory {} is not writable: {e}",
            ctx.out_dir.display()
        ))
    })?;
    let mut out_files = Vec::new();
    for entry in &ctx.config.experiments {
        let output = run_experiment(ctx, entry)?;
        for (name, content) in &output.files {
            let path = ctx.out_dir.join(name);
            fs::write(&path, content).map_err(|e| {
                CliError::Run(format!("cannot write {}: {e}", path.display()))
            })?;
            out_files.push(name.clone());
        }
        for line in &output.stdout {
            println!("{line}");
        }
    }
    let manifest = build_manifest(&ctx.command, &ctx.config, out_files);
    let manifest_name = format!("{}.manifest.json", ctx.command);
    let manifest_path = ctx.out_dir.join(&manifest_name);
    let mut body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Run(format!("manifest serialization failed: {e}")))?;
    body.push('\n');
    fs::write(&manifest_path, body)
        .map_err(|e| CliError::Run(format!("cannot write {}: {e}", manifest_path.display())))?;
    println!("manifest: {}", manifest_path.display());
    Ok(())
}

fn run_experiment(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    match ctx.command.as_str() {
        "exact" => exact(entry),
        "simulate" => simulate(ctx, entry),
        "rate" => rate(ctx, entry),
        "kappa" => kappa(ctx, entry),
        "pierce-check" => pierce_check(ctx, entry),
        "cube-check" => cube_check(ctx, entry),
        "hr-check" => hr_check(ctx, entry),
        "dyadic" => dyadic(ctx, entry),
        "quantize-opt" => quantize_opt(ctx, entry),
        other => Err(CliError::Run(format!("unknown subcommand {other}"))),
    }
}

/// Builds the Monte Carlo suite spec, insisting on the fields the suite
/// subcommands need.
fn suite_spec(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentSpec<f64>, CliError> {
    let solver = entry.solver.ok_or_else(|| {
        CliError::Config(format!("experiment `{}`: field `solver` is required", entry.id))
    })?;
    if entry.n_values.is_empty() {
        return Err(CliError::Config(format!(
            "experiment `{}`: field `n_values` must list at least one sample size",
            entry.id
        )));
    }
    if entry.replications < 2 {
        return Err(CliError::Config(format!(
            "experiment `{}`: field `replications` must be at least 2, got {}",
            entry.id, entry.replications
        )));
    }
    Ok(ExperimentSpec {
        measure: entry.measure.clone(),
        p: entry.p,
        norm: entry.norm,
        n_values: entry.n_values.clone(),
        replications: entry.replications,
        master_seed: ctx.config.master_seed,
        solver,
    })
}

fn run_suite(
    ctx: &RunContext,
    entry: &ExperimentEntry,
) -> Result<(ExperimentSpec<f64>, Vec<NSummary<f64>>, Vec<String>), CliError> {
    let spec = suite_spec(ctx, entry)?;
    let mut stdout = Vec::new();
    if let Some(warning) = spec.regime_warning() {
        stdout.push(format!("{}: warning: {warning}", entry.id));
    }
    let summaries = v_rand_estimate(&spec)?;
    Ok((spec, summaries, stdout))
}

fn exact(entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let pair = entry.exact_pair.as_ref().ok_or_else(|| {
        CliError::Config(format!("experiment `{}`: field `exact_pair` is required", entry.id))
    })?;
    // Deserialized measures bypass the constructor; rebuild to revalidate.
    let mu = DiscreteMeasure64::new(pair.mu.atoms().to_vec())
        .map_err(|e| CliError::Config(format!("experiment `{}`: mu: {e}", entry.id)))?;
    let nu = DiscreteMeasure64::new(pair.nu.atoms().to_vec())
        .map_err(|e| CliError::Config(format!("experiment `{}`: nu: {e}", entry.id)))?;
    let (rho, _) = rho_exact(&mu, &nu, entry.p, entry.norm)?;
    let mut csv = String::from("measure_id,p,norm,rho\n");
    csv.push_str(&format!("{},{},{},{rho}\n", entry.id, entry.p, entry.norm));
    Ok(ExperimentOutput {
        files: vec![(format!("{}.exact.csv", entry.id), csv)],
        stdout: vec![format!("{}: rho_p = {rho}", entry.id)],
    })
}

fn simulate(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let (spec, summaries, mut stdout) = run_suite(ctx, entry)?;
    for s in &summaries {
        stdout.push(format!(
            "{}: N={} V_hat={} ci=[{}, {}]",
            entry.id, s.n, s.v_hat, s.ci_lo, s.ci_hi
        ));
    }
    let d = spec.measure.dim();
    Ok(ExperimentOutput {
        files: vec![
            (
                format!("{}.simulate.csv", entry.id),
                replication_csv(&entry.id, spec.p, spec.norm, &summaries),
            ),
            (
                format!("{}.simulate.summary.csv", entry.id),
                summary_csv(&entry.id, spec.p, spec.norm, d, &summaries),
            ),
        ],
        stdout,
    })
}

fn rate(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let (_, summaries, mut stdout) = run_suite(ctx, entry)?;
    let points: Vec<(usize, f64)> = summaries.iter().map(|s| (s.n, s.v_hat)).collect();
    let fit = rate_fit(&points)?;
    stdout.push(format!(
        "{}: slope = {} (stderr {}), intercept = {}",
        entry.id, fit.slope, fit.stderr_slope, fit.intercept
    ));
    let mut csv = String::from("measure_id,slope,intercept,stderr_slope\n");
    csv.push_str(&format!(
        "{},{},{},{}\n",
        entry.id, fit.slope, fit.intercept, fit.stderr_slope
    ));
    Ok(ExperimentOutput {
        files: vec![(format!("{}.rate.csv", entry.id), csv)],
        stdout,
    })
}

fn kappa(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let (spec, summaries, mut stdout) = run_suite(ctx, entry)?;
    let trace = kappa_trace_from_summaries(spec.measure.dim(), &summaries)?;
    let mut csv = String::from("measure_id,N,rescaled,ci_lo,ci_hi,max_last3_rel_change\n");
    for point in &trace.points {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            entry.id, point.n, point.rescaled, point.ci_lo, point.ci_hi,
            trace.max_last3_rel_change
        ));
    }
    stdout.push(format!(
        "{}: rescaled trace over N^(1/d); max relative change across last 3 points = {}",
        entry.id, trace.max_last3_rel_change
    ));
    Ok(ExperimentOutput {
        files: vec![(format!("{}.kappa.csv", entry.id), csv)],
        stdout,
    })
}

fn bound_check(
    ctx: &RunContext,
    entry: &ExperimentEntry,
    subcommand: &str,
    selection: BoundSelection<f64>,
    mut stdout_prefix: Vec<String>,
) -> Result<ExperimentOutput, CliError> {
    let (spec, summaries, mut stdout) = run_suite(ctx, entry)?;
    stdout.append(&mut stdout_prefix);
    let report = check_report(&spec.measure, spec.p, spec.norm, &summaries, &[selection])?;
    stdout.push(report.render_table());
    if !report.all_hard_satisfied() {
        stdout.push(format!("{}: UNSATISFIED rows present (reported, not fatal)", entry.id));
    }
    Ok(ExperimentOutput {
        files: vec![(format!("{}.{subcommand}.csv", entry.id), report.to_csv())],
        stdout,
    })
}

fn pierce_check(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let q = entry.pierce_q.ok_or_else(|| {
        CliError::Config(format!("experiment `{}`: field `pierce_q` is required", entry.id))
    })?;
    bound_check(ctx, entry, "pierce-check", BoundSelection::Pierce { q }, Vec::new())
}

fn cube_check(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    bound_check(ctx, entry, "cube-check", BoundSelection::Cube, Vec::new())
}

fn hr_check(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let (kappa_hat, note) = match entry.kappa_hat {
        Some(k) => (k, format!("{}: using configured kappa_hat = {k}", entry.id)),
        None => {
            // Calibrate on the unit uniform cube with the same suite shape.
            let spec = suite_spec(ctx, entry)?;
            let trace = kappa_unif_trace(
                spec.p,
                spec.measure.dim(),
                spec.norm,
                &spec.n_values,
                spec.replications,
                spec.master_seed,
                spec.solver,
            )?;
            let k = trace.points.last().expect("trace has points").rescaled;
            (k, format!("{}: calibrated kappa_hat = {k} from a uniform-cube trace", entry.id))
        }
    };
    bound_check(
        ctx,
        entry,
        "hr-check",
        BoundSelection::HighResolution { kappa_hat },
        vec![note],
    )
}

fn dyadic(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let n = *entry.n_values.first().ok_or_else(|| {
        CliError::Config(format!(
            "experiment `{}`: field `n_values` must provide the sample size",
            entry.id
        ))
    })?;
    let d = entry.measure.dim();
    let level = entry
        .truncation_level
        .unwrap_or_else(|| default_truncation_level(n, d));
    // Same seed coordinates as replication 0 of a Monte Carlo suite.
    let seed = rng::mix(ctx.config.master_seed, &[tag::SAMPLE, n as u64, 0]);
    let nu = DiscreteMeasure64::empirical(entry.measure.sample(n, seed))?;
    let bound = dyadic_bound(&entry.measure, &nu, entry.p, entry.norm, level)?;
    let mut csv = String::from(
        "measure_id,p,norm,N,truncation_level,partial_sum,tail_bound,upper_bound\n",
    );
    csv.push_str(&format!(
        "{},{},{},{n},{level},{},{},{}\n",
        entry.id, entry.p, entry.norm, bound.partial_sum, bound.tail_bound,
        bound.upper_bound
    ));
    Ok(ExperimentOutput {
        files: vec![(format!("{}.dyadic.csv", entry.id), csv)],
        stdout: vec![format!(
            "{}: dyadic upper bound {} (partial {}, tail {}, L = {level})",
            entry.id, bound.upper_bound, bound.partial_sum, bound.tail_bound
        )],
    })
}

fn quantize_opt(ctx: &RunContext, entry: &ExperimentEntry) -> Result<ExperimentOutput, CliError> {
    let qc = entry.quantizer.ok_or_else(|| {
        CliError::Config(format!("experiment `{}`: field `quantizer` is required", entry.id))
    })?;
    let result = optimal_quantizer(
        &entry.measure,
        qc.n,
        entry.p,
        entry.norm,
        qc.sample_size,
        qc.restarts,
        qc.iters,
        ctx.config.master_seed,
    )?;
    let d = entry.measure.dim();
    let mut csv = String::from("measure_id,index,v_opt");
    for axis in 0..d {
        csv.push_str(&format!(",x{axis}"));
    }
    csv.push('\n');
    for (i, point) in result.codebook.iter().enumerate() {
        csv.push_str(&format!("{},{i},{}", entry.id, result.v_opt));
        for c in point.coords() {
            csv.push_str(&format!(",{c}"));
        }
        csv.push('\n');
    }
    Ok(ExperimentOutput {
        files: vec![(format!("{}.quantize-opt.csv", entry.id), csv)],
        stdout: vec![format!(
            "{}: v_opt = {} over a {}-point codebook",
            entry.id, result.v_opt, result.codebook.len()
        )],
    })
}
