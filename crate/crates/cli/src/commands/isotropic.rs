use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};

use qnull::hermitian::Spectrum;
use qnull::isotropic::{run_experiment, sweep, IsotropicConfig, LMask, ProjectionMode};

use super::parse_enum;
use crate::config::{self, override_with};
use crate::output::{OutputDir, RunManifest};
use crate::Common;

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    pub d_values: Option<Vec<usize>>,
    /// Comma-separated ranks.
    #[arg(long, value_delimiter = ',')]
    pub r_values: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// `cone` or `state-set`.
    #[arg(long, value_parser = parse_enum::<ProjectionMode>)]
    pub projection: Option<ProjectionMode>,
    /// `equal-weights` or `uniform-simplex`.
    #[arg(long, value_parser = parse_enum::<Spectrum>)]
    pub spectrum: Option<Spectrum>,
    /// Keep the trace part of each perturbation.
    #[arg(long)]
    pub with_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: Option<u64>,
    pub d_values: Vec<usize>,
    pub r_values: Vec<usize>,
    pub trials: usize,
    pub eps: f64,
    pub projection: ProjectionMode,
    pub spectrum: Spectrum,
    pub traceless: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: None,
            d_values: vec![2, 3, 4, 6, 8, 12, 16],
            r_values: vec![1, 2, 3, 4],
            trials: 500,
            eps: 1e-4,
            projection: ProjectionMode::Cone,
            spectrum: Spectrum::EqualWeights,
            traceless: true,
        }
    }
}

pub fn run_sweep(common: &Common, args: &SweepArgs) -> Result<()> {
    let mut cfg: SweepConfig = config::load(common.config.as_deref())?;
    override_with(&mut cfg.d_values, args.d_values.clone());
    override_with(&mut cfg.r_values, args.r_values.clone());
    override_with(&mut cfg.trials, args.trials);
    override_with(&mut cfg.eps, args.eps);
    override_with(&mut cfg.projection, args.projection);
    override_with(&mut cfg.spectrum, args.spectrum);
    if args.with_trace {
        cfg.traceless = false;
    }
    let seed = config::require_seed(cfg.seed, common.seed)?;
    cfg.seed = Some(seed);

    let manifest = RunManifest::start("isotropic-sweep", &cfg, seed)?;
    let base = IsotropicConfig {
        d: 2,
        r: 1,
        eps: cfg.eps,
        trials: cfg.trials,
        projection: cfg.projection,
        seed,
        spectrum: cfg.spectrum,
        traceless: cfg.traceless,
    };
    let rows = sweep(&cfg.d_values, &cfg.r_values, &base)?;
    let mut out = OutputDir::new(common.out.clone())?;
    let path = out.write_csv("isotropic_sweep.csv", "isotropic_sweep", &rows)?;
    manifest.finish(&out)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct LambdaJkArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_parser = parse_enum::<ProjectionMode>)]
    pub projection: Option<ProjectionMode>,
    #[arg(long, value_parser = parse_enum::<Spectrum>)]
    pub spectrum: Option<Spectrum>,
    #[arg(long)]
    pub with_trace: bool,
}

#[derive(Serialize, Deserialize)]
struct ElementRow {
    j: usize,
    k: usize,
    mean_lambda_jk: f64,
    stderr: f64,
    is_l: bool,
}

pub fn run_lambda_jk(common: &Common, args: &LambdaJkArgs) -> Result<()> {
    let mut file: LambdaJkConfig = config::load(common.config.as_deref())?;
    override_with(&mut file.d, args.d);
    override_with(&mut file.r, args.r);
    override_with(&mut file.trials, args.trials);
    override_with(&mut file.eps, args.eps);
    override_with(&mut file.projection, args.projection);
    override_with(&mut file.spectrum, args.spectrum);
    if args.with_trace {
        file.traceless = false;
    }
    let cfg = IsotropicConfig {
        d: file.d,
        r: file.r,
        eps: file.eps,
        trials: file.trials,
        projection: file.projection,
        seed: config::require_seed(file.seed, common.seed)?,
        spectrum: file.spectrum,
        traceless: file.traceless,
    };
    cfg.validate()?;

    let manifest = RunManifest::start("lambda-jk", &cfg, cfg.seed)?;
    let summary = run_experiment(&cfg)?;
    let mask = LMask::new(summary.r, summary.d);
    let mut rows = Vec::with_capacity(cfg.d * cfg.d);
    for j in 0..cfg.d {
        for k in 0..cfg.d {
            rows.push(ElementRow {
                j,
                k,
                mean_lambda_jk: summary.mean_lambda_jk[j][k],
                stderr: summary.stderr_lambda_jk[j][k],
                is_l: mask.is_l(j, k),
            });
        }
    }
    let mut out = OutputDir::new(common.out.clone())?;
    out.write_json("lambda_jk.json", &summary)?;
    out.write_csv("lambda_jk.csv", "lambda_jk", &rows)?;
    manifest.finish(&out)?;

    let l = summary.l_entries();
    let (lo, hi) = l
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    println!(
        "<lambda> = {:.4} +- {:.4}; L entries in [{lo:.3}, {hi:.3}]; support diagonal {:.3}; kernel {:.3}",
        summary.mean_lambda,
        summary.stderr_lambda,
        summary.support_diagonal_mean(),
        if summary.r < summary.d { summary.kernel_mean() } else { f64::NAN },
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LambdaJkConfig {
    seed: Option<u64>,
    d: usize,
    r: usize,
    trials: usize,
    eps: f64,
    projection: ProjectionMode,
    spectrum: Spectrum,
    traceless: bool,
}

impl Default for LambdaJkConfig {
    fn default() -> Self {
        let base = IsotropicConfig::default();
        Self {
            seed: None,
            d: 8,
            r: 2,
            trials: base.trials,
            eps: base.eps,
            projection: base.projection,
            spectrum: base.spectrum,
            traceless: base.traceless,
        }
    }
}
