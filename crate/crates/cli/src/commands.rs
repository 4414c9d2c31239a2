//! Subcommand implementations. Each writes its outputs under the configured
//! directory and stamps them with the config hash.

use std::time::{SystemTime, UNIX_EPOCH};

use nphmm::bases::BasisSpec;
use nphmm::eval::{
    align, bound_report, constants_report, emission_l2_risk, median, rate_study, run_replicate,
    tv_gaps, Alignment, EmissionRisk,
};
use nphmm::inference::{oracle_posteriors, plugin_posteriors, PosteriorTrack};
use nphmm::model::sample_trajectory;
use nphmm::spectral::{empirical_moments, fit, FitOptions, SpectralEstimate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::files::{self, StampedCsv};

/// Points of the emission reconstruction grid, endpoints included.
pub const EMISSION_GRID: usize = 512;

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub hash: String,
    pub quiet: bool,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RunConfig, quiet: bool) -> Self {
        Self {
            hash: cfg.hash(),
            cfg,
            quiet,
        }
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Runs `job` for every seed, keeps going past failures and returns the
/// first error once all seeds are done.
fn per_seed(ctx: &Ctx, mut job: impl FnMut(u64) -> CliResult<()>) -> CliResult<()> {
    let mut first = None;
    for &seed in &ctx.cfg.seeds {
        if let Err(e) = job(seed) {
            eprintln!("seed {seed}: {e}");
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}

pub fn simulate(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    files::ensure_dir(&cfg.out)?;
    let len = cfg.p + cfg.n;
    let mut written = Vec::new();
    for &seed in &cfg.seeds {
        let traj = sample_trajectory(&cfg.hmm, len, seed);
        let mut csv = StampedCsv::new(&ctx.hash);
        let mut w = csv.writer();
        w.write_record(["time", "hidden_state", "observation"])?;
        for (t, (x, y)) in traj.hidden.iter().zip(&traj.obs).enumerate() {
            w.write_record([(t + 1).to_string(), (x + 1).to_string(), y.to_string()])?;
        }
        files::finish(w)?;
        let path = files::trajectory_path(&cfg.out, seed);
        csv.save(&path)?;
        ctx.note(format!("wrote {} ({len} rows)", path.display()));
        written.push(path.file_name().unwrap().to_string_lossy().into_owned());
    }
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    files::write_json(
        &cfg.out.join("manifest.json"),
        &ctx.hash,
        &json!({
            "config": cfg,
            "estimation_rows": cfg.p,
            "inference_rows": cfg.n,
            "files": written,
            "created_unix": created,
        }),
    )
}

fn load_observations(ctx: &Ctx, seed: u64) -> CliResult<Vec<f64>> {
    let path = files::trajectory_path(&ctx.cfg.out, seed);
    let rows = files::read_stamped_csv(&path, &ctx.hash)?;
    let expected = ctx.cfg.p + ctx.cfg.n;
    if rows.len() != expected {
        return Err(CliError::Validation(format!(
            "{} has {} rows, expected {expected}",
            path.display(),
            rows.len()
        )));
    }
    rows.iter()
        .map(|r| {
            r.get(2)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Validation(format!("bad observation in {}", path.display())))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct EstimateRecord {
    seed: u64,
    estimation_rows: usize,
    /// True state `x` corresponds to estimated state `alignment[x]`.
    alignment: Vec<usize>,
    estimate: SpectralEstimate,
}

fn fit_one(ctx: &Ctx, basis: &BasisSpec, seed: u64) -> CliResult<()> {
    let cfg = ctx.cfg;
    let obs = load_observations(ctx, seed)?;
    let moments = empirical_moments(&obs[..cfg.p], basis)?;
    let opts = FitOptions {
        k: cfg.hmm.k(),
        seed,
        retries: cfg.retries,
    };
    let est = fit(&moments, basis, &opts)?;
    let quad = basis.default_quadrature();
    let o_true = cfg.hmm.emission_coefficients(basis, &quad);
    let alignment = align(&o_true, &est.o_hat)?;
    let tag = format!("{}{}", basis.family(), basis.size());

    let mut csv = StampedCsv::new(&ctx.hash);
    let mut w = csv.writer();
    let k = cfg.hmm.k();
    let mut header = vec!["y".to_string()];
    header.extend((1..=k).map(|x| format!("f_hat_{x}")));
    header.extend((1..=k).map(|x| format!("f_true_{x}")));
    w.write_record(&header)?;
    let mut phi = vec![0.0; basis.size()];
    for i in 0..EMISSION_GRID {
        let y = i as f64 / (EMISSION_GRID - 1) as f64;
        let hat = est.emission_values(y, &mut phi);
        let mut rec = vec![y.to_string()];
        rec.extend(alignment.perm.iter().map(|&j| hat[j].to_string()));
        rec.extend(cfg.hmm.emissions().iter().map(|e| e.pdf(y).to_string()));
        w.write_record(&rec)?;
    }
    files::finish(w)?;
    csv.save(&files::emission_path(&cfg.out, &tag, seed))?;

    let path = files::estimate_path(&cfg.out, &tag, seed);
    files::write_json(
        &path,
        &ctx.hash,
        &EstimateRecord {
            seed,
            estimation_rows: cfg.p,
            alignment: alignment.perm.clone(),
            estimate: est,
        },
    )?;
    ctx.note(format!("wrote {}", path.display()));
    Ok(())
}

pub fn fit_cmd(ctx: &Ctx) -> CliResult<()> {
    files::ensure_dir(&ctx.cfg.out)?;
    let basis = ctx.cfg.basis;
    per_seed(ctx, |seed| fit_one(ctx, &basis, seed))
}

fn load_estimate(ctx: &Ctx, tag: &str, seed: u64) -> CliResult<EstimateRecord> {
    let path = files::estimate_path(&ctx.cfg.out, tag, seed);
    let v = files::read_json(&path, &ctx.hash)?;
    let rec: EstimateRecord = serde_json::from_value(v)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if rec.estimate.k() != ctx.cfg.hmm.k() {
        return Err(CliError::Validation(format!(
            "{} has {} states but the model has {}",
            path.display(),
            rec.estimate.k(),
            ctx.cfg.hmm.k()
        )));
    }
    Ok(rec)
}

fn write_posteriors(
    ctx: &Ctx,
    tag: &str,
    seed: u64,
    plugin: &PosteriorTrack,
    oracle: &PosteriorTrack,
) -> CliResult<()> {
    let gap_f = tv_gaps(oracle, plugin, false);
    let gap_s = tv_gaps(oracle, plugin, true);
    let mut csv = StampedCsv::new(&ctx.hash);
    let mut w = csv.writer();
    w.write_record([
        "time",
        "state",
        "filter_prob",
        "smooth_prob",
        "degenerate_flag",
        "oracle_filter_prob",
        "oracle_smooth_prob",
        "tv_gap_filter",
        "tv_gap_smooth",
    ])?;
    for t in 0..plugin.len() {
        let flag = u8::from(plugin.degenerate_steps.binary_search(&t).is_ok());
        for x in 0..plugin.filter[t].len() {
            w.write_record([
                (t + 1).to_string(),
                (x + 1).to_string(),
                plugin.filter[t][x].to_string(),
                plugin.smooth[t][x].to_string(),
                flag.to_string(),
                oracle.filter[t][x].to_string(),
                oracle.smooth[t][x].to_string(),
                gap_f[t].to_string(),
                gap_s[t].to_string(),
            ])?;
        }
    }
    files::finish(w)?;
    let path = files::posterior_path(&ctx.cfg.out, tag, seed);
    csv.save(&path)?;
    ctx.note(format!("wrote {}", path.display()));
    Ok(())
}

fn infer_one(ctx: &Ctx, tag: &str, seed: u64) -> CliResult<Vec<f64>> {
    let cfg = ctx.cfg;
    let obs = load_observations(ctx, seed)?;
    let rec = load_estimate(ctx, tag, seed)?;
    let segment = &obs[cfg.p..];
    let plugin = plugin_posteriors(&rec.estimate, segment)?.relabeled(&rec.alignment);
    let oracle = oracle_posteriors(&cfg.hmm, segment)?;
    write_posteriors(ctx, tag, seed, &plugin, &oracle)?;
    Ok(tv_gaps(&oracle, &plugin, true))
}

pub fn infer(ctx: &Ctx) -> CliResult<()> {
    let tag = ctx.cfg.basis_tag();
    per_seed(ctx, |seed| infer_one(ctx, &tag, seed).map(|_| ()))
}

pub fn audit(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    files::ensure_dir(&cfg.out)?;
    let tag = cfg.basis_tag();
    let results: Vec<(u64, nphmm::Result<nphmm::eval::BoundReport>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let r = run_replicate(&cfg.hmm, &cfg.basis, cfg.p - 2, cfg.n, seed, cfg.retries)
                .and_then(|rep| {
                    bound_report(&cfg.hmm, &rep.estimate, &rep.alignment, &rep.inference_obs, seed)
                });
            (seed, r)
        })
        .collect();
    let (mut violations, mut clean, mut failed) = (0usize, 0usize, Vec::new());
    let mut first_err = None;
    for (seed, r) in results {
        match r {
            Ok(report) => {
                let mut csv = StampedCsv::new(&ctx.hash);
                report.write_csv(csv.buffer())?;
                csv.save(&cfg.out.join(format!("audit_{tag}_seed{seed}.csv")))?;
                let sidecar: serde_json::Value =
                    serde_json::from_str(&report.sidecar_json()?).map_err(nphmm::Error::from)?;
                files::write_json(&cfg.out.join(format!("audit_{tag}_seed{seed}.json")), &ctx.hash, &sidecar)?;
                violations += report.violations();
                clean += usize::from(report.flags.clean());
            }
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                failed.push(seed);
                first_err.get_or_insert(CliError::from(e));
            }
        }
    }
    let runs = cfg.seeds.len();
    files::write_json(
        &cfg.out.join(format!("audit_{tag}_summary.json")),
        &ctx.hash,
        &json!({
            "basis": cfg.basis,
            "runs": runs,
            "clean_runs": clean,
            "failed_seeds": failed,
            "violations": violations,
            "estimation_rows": cfg.p,
            "inference_rows": cfg.n,
            "tv_convention": "sum_abs",
        }),
    )?;
    ctx.note(format!("audit: {runs} runs, {clean} clean, {violations} violations"));
    first_err.map_or(Ok(()), Err)
}

pub fn rates(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    files::ensure_dir(&cfg.out)?;
    let tag = cfg.basis_tag();
    let table = rate_study(&cfg.hmm, &cfg.basis, &cfg.p_grid, &cfg.seeds)?;
    let mut csv = StampedCsv::new(&ctx.hash);
    table.write_csv(csv.buffer())?;
    csv.save(&cfg.out.join(format!("rates_{tag}.csv")))?;
    let medians: Vec<f64> = cfg
        .p_grid
        .iter()
        .filter_map(|&p| table.summary_for(Some(p)).map(|s| s.p_error.median))
        .collect();
    let ratios: Vec<f64> = medians.windows(2).map(|w| w[1] / w[0]).collect();
    files::write_json(
        &cfg.out.join(format!("rates_{tag}.json")),
        &ctx.hash,
        &json!({
            "basis": cfg.basis,
            "p_grid": cfg.p_grid,
            "seeds": cfg.seeds,
            "summary": table.summary,
            "p_error_median_ratios": ratios,
        }),
    )?;
    ctx.note(format!("rates: median ‖P̂−P‖_F ratios {ratios:?}"));
    Ok(())
}

pub fn constants(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    files::ensure_dir(&cfg.out)?;
    let report = constants_report(&cfg.hmm, cfg.delta, &cfg.basis)?;
    let path = cfg.out.join("constants.json");
    files::write_json(&path, &ctx.hash, &report)?;
    ctx.note(format!("wrote {}", path.display()));
    Ok(())
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    risks: Vec<EmissionRisk>,
    median_smoothing_tv_gap: f64,
}

/// Simulate, fit with the histogram (M = 11) and trigonometric (M = 13)
/// bases, run inference with both, and summarize risks and posterior gaps.
pub fn reproduce(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg;
    simulate(ctx)?;
    constants(ctx)?;
    let mut summary = serde_json::Map::new();
    let mut first_err = None;
    for basis in [BasisSpec::histogram(11)?, BasisSpec::trigonometric(13)?] {
        if basis.size() < cfg.hmm.k() {
            return Err(CliError::Validation(format!(
                "basis size {} is smaller than K = {}",
                basis.size(),
                cfg.hmm.k()
            )));
        }
        let tag = format!("{}{}", basis.family(), basis.size());
        let quad = basis.default_quadrature();
        let mut rows = Vec::new();
        for &seed in &cfg.seeds {
            let outcome = fit_one(ctx, &basis, seed).and_then(|_| {
                let gaps = infer_one(ctx, &tag, seed)?;
                let rec = load_estimate(ctx, &tag, seed)?;
                let alignment = Alignment {
                    perm: rec.alignment.clone(),
                    column_errors: Vec::new(),
                    cost: 0.0,
                };
                Ok(SeedSummary {
                    seed,
                    risks: emission_l2_risk(&cfg.hmm, &rec.estimate, &alignment, &quad),
                    median_smoothing_tv_gap: median(&gaps),
                })
            });
            match outcome {
                Ok(s) => rows.push(s),
                Err(e) => {
                    eprintln!("{tag} seed {seed}: {e}");
                    first_err.get_or_insert(e);
                }
            }
        }
        let medians: Vec<f64> = (0..cfg.hmm.k())
            .map(|x| median(&rows.iter().map(|r| r.risks[x].total_error).collect::<Vec<_>>()))
            .collect();
        ctx.note(format!("{tag}: median total L2 risk per state {medians:?}"));
        summary.insert(
            tag,
            json!({ "basis": basis, "median_total_risk": medians, "seeds": rows }),
        );
    }
    files::write_json(&cfg.out.join("benchmark_summary.json"), &ctx.hash, &summary)?;
    first_err.map_or(Ok(()), Err)
}
