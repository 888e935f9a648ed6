//! Heterodyne experiment driver.
//!
//! Work is split into cells, one per (true state, dataset index). A cell
//! draws the largest requested dataset once, uses its prefixes for the smaller
//! sample sizes, and fits every requested model. Each finished cell is saved
//! to `cells/` and recorded in the manifest, so an interrupted run resumes
//! where it stopped. The summary tables are rebuilt from the cell files.

use std::collections::BTreeSet;
use std::fs;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::Args;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qnull::heterodyne::{
    average_fisher, fisher_hessian, lambda_empirical, lambda_jk, roster_state, sample_husimi, FisherEstimate,
    MleOptions,
};
use qnull::isotropic::LMask;
use qnull::rng::{label_tag, SeedStream};
use qnull::stats::mean_stderr;
use qnull::theory::{wilks_dof, wilks_expected};
use qnull::DensityMatrix;

use crate::config::{self, override_with};
use crate::output::{atomic_write, csv_bytes, json_bytes, OutputDir, RunManifest, RunStatus};
use crate::Common;

const COMMAND: &str = "heterodyne";

#[derive(Args, Debug)]
pub struct HeterodyneArgs {
    /// Comma-separated state labels (fock0, sup01, thermal3, ...).
    #[arg(long, value_delimiter = ',')]
    pub states: Option<Vec<String>>,
    /// Comma-separated Fock cutoffs of the fitted models.
    #[arg(long, value_delimiter = ',')]
    pub d_models: Option<Vec<usize>>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_samples: Option<Vec<usize>>,
    /// Datasets per state.
    #[arg(long)]
    pub datasets: Option<usize>,
    /// Discard an earlier run in the output directory instead of resuming.
    #[arg(long)]
    pub restart: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeterodyneConfig {
    pub seed: Option<u64>,
    pub states: Vec<String>,
    pub d_models: Vec<usize>,
    pub n_samples: Vec<usize>,
    pub datasets: usize,
    /// Identity admixture at the Fisher evaluation point.
    pub regularizer: f64,
    pub mle: MleOptions,
    pub save_datasets: bool,
}

impl Default for HeterodyneConfig {
    fn default() -> Self {
        Self {
            seed: None,
            states: vec!["fock0".into(), "sup01".into()],
            d_models: (2..=6).collect(),
            n_samples: vec![1_000, 10_000],
            datasets: 20,
            regularizer: qnull::heterodyne::DEFAULT_REGULARIZER,
            mle: MleOptions::default(),
            save_datasets: true,
        }
    }
}

impl HeterodyneConfig {
    fn validate(&self) -> Result<()> {
        if self.states.is_empty() || self.d_models.is_empty() || self.n_samples.is_empty() || self.datasets == 0 {
            bail!("states, d_models, n_samples and datasets must all be non-empty");
        }
        if self.d_models.iter().any(|&d| d < 2) {
            bail!("d_models must be >= 2");
        }
        if self.n_samples.contains(&0) {
            bail!("n_samples must be >= 1");
        }
        for s in &self.states {
            roster_state(s)?;
        }
        Ok(())
    }

    fn sorted_n(&self) -> Vec<usize> {
        self.n_samples.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    fn sorted_d(&self) -> Vec<usize> {
        self.d_models.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FitRecord {
    d_model: usize,
    n_samples: usize,
    lambda: f64,
    loglikelihood: f64,
    null_loglikelihood: f64,
    converged: bool,
    iterations: usize,
    /// Fitted state, row-major real and imaginary parts.
    rho_re: Vec<f64>,
    rho_im: Vec<f64>,
    /// `N |(rho_hat - rho0)_jk|^2` in `rho0`'s eigenbasis, row-major.
    lambda_jk: Vec<f64>,
    /// Fisher information at the regularized true state, row-major.
    fisher: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellResult {
    rho0_label: String,
    dataset_id: usize,
    dataset_seed: u64,
    fits: Vec<FitRecord>,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    re_alpha: f64,
    im_alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct LambdaRow {
    rho0_label: String,
    d_model: usize,
    n_samples: usize,
    dataset_id: usize,
    lambda: f64,
    converged: bool,
}

#[derive(Serialize, Deserialize)]
struct SummaryRow {
    rho0_label: String,
    d_model: usize,
    n_samples: usize,
    datasets: usize,
    mean_lambda: f64,
    stderr: f64,
    wilks: f64,
    non_converged: usize,
}

#[derive(Serialize, Deserialize)]
struct FisherRow {
    rho0_label: String,
    d_model: usize,
    n_samples: usize,
    datasets: usize,
    condition_number: f64,
    capped: bool,
}

#[derive(Serialize, Deserialize)]
struct ElementRow {
    rho0_label: String,
    d_model: usize,
    n_samples: usize,
    j: usize,
    k: usize,
    mean_lambda_jk: f64,
    is_l: bool,
}

fn cell_name(label: &str, id: usize) -> String {
    format!("{label}_{id:03}")
}

fn dataset_seed(seed: u64, label: &str, id: usize) -> u64 {
    SeedStream::new(seed).child(label_tag(label)).child(id as u64).key()
}

fn model_dims(cfg: &HeterodyneConfig, rho0: &DensityMatrix) -> Vec<usize> {
    cfg.sorted_d().into_iter().filter(|&d| d >= rho0.dim()).collect()
}

fn run_cell(cfg: &HeterodyneConfig, seed: u64, label: &str, id: usize, out: &OutputDir) -> Result<CellResult> {
    let rho0 = roster_state(label)?;
    let dseed = dataset_seed(seed, label, id);
    let sizes = cfg.sorted_n();
    let max_n = *sizes.last().expect("validated non-empty");
    let dataset = sample_husimi(&rho0, max_n, label, dseed, &mut SeedStream::new(dseed).rng(0))?;
    let name = cell_name(label, id);
    if cfg.save_datasets {
        let rows: Vec<SampleRow> = dataset
            .samples
            .iter()
            .map(|a| SampleRow {
                re_alpha: a.re,
                im_alpha: a.im,
            })
            .collect();
        atomic_write(&out.path(&format!("datasets/{name}.csv")), &csv_bytes("heterodyne_dataset", &rows)?)?;
        atomic_write(&out.path(&format!("datasets/{name}.json")), &json_bytes(&dataset.sidecar())?)?;
    }
    let mut fits = Vec::new();
    for &n in &sizes {
        let data = dataset.prefix(n)?;
        for d in model_dims(cfg, &rho0) {
            let res = lambda_empirical(&rho0, &data, d, &cfg.mle)?;
            if !res.fit.converged {
                log::warn!("{name}: fit d={d} n={n} hit the iteration cap");
            }
            let null = rho0.embed(d)?;
            let fisher = fisher_hessian(&null, &data, d, cfg.regularizer)?;
            let m = res.fit.rho.matrix();
            fits.push(FitRecord {
                d_model: d,
                n_samples: n,
                lambda: res.lambda,
                loglikelihood: res.fit.loglikelihood,
                null_loglikelihood: res.null_loglikelihood,
                converged: res.fit.converged,
                iterations: res.fit.iterations,
                rho_re: (0..d * d).map(|i| m[(i / d, i % d)].re).collect(),
                rho_im: (0..d * d).map(|i| m[(i / d, i % d)].im).collect(),
                lambda_jk: lambda_jk(&rho0, &res.fit.rho, n)?.transpose().iter().copied().collect(),
                fisher: fisher.matrix.transpose().iter().copied().collect(),
            });
        }
    }
    let cell = CellResult {
        rho0_label: label.to_string(),
        dataset_id: id,
        dataset_seed: dseed,
        fits,
    };
    atomic_write(&out.path(&format!("cells/{name}.json")), &json_bytes(&cell)?)?;
    Ok(cell)
}

pub fn run(common: &Common, args: &HeterodyneArgs) -> Result<()> {
    let mut cfg: HeterodyneConfig = config::load(common.config.as_deref())?;
    override_with(&mut cfg.states, args.states.clone());
    override_with(&mut cfg.d_models, args.d_models.clone());
    override_with(&mut cfg.n_samples, args.n_samples.clone());
    override_with(&mut cfg.datasets, args.datasets);
    let seed = config::require_seed(cfg.seed, common.seed)?;
    cfg.seed = Some(seed);
    cfg.validate()?;

    let mut out = OutputDir::new(common.out.clone())?;
    let mut manifest = RunManifest::start(COMMAND, &cfg, seed)?;
    let mut done = BTreeSet::new();
    if let Some(previous) = RunManifest::load(out.root(), COMMAND)? {
        if args.restart {
            log::info!("discarding the previous run in {}", out.root().display());
        } else if previous.config != manifest.config {
            bail!(
                "{} holds a heterodyne run with a different config; pass --restart or choose another --out",
                out.root().display()
            );
        } else {
            manifest.started_at = previous.started_at;
            done.extend(
                previous
                    .completed_cells
                    .into_iter()
                    .filter(|c| out.path(&format!("cells/{c}.json")).exists()),
            );
        }
    }
    manifest.completed_cells = done.iter().cloned().collect();
    manifest.save(out.root())?;

    let cells: Vec<(String, usize)> = cfg
        .states
        .iter()
        .flat_map(|s| (0..cfg.datasets).map(move |i| (s.clone(), i)))
        .collect();
    let pending: Vec<&(String, usize)> = cells.iter().filter(|(s, i)| !done.contains(&cell_name(s, *i))).collect();
    if pending.len() < cells.len() {
        println!("resuming: {} of {} cells already complete", cells.len() - pending.len(), cells.len());
    }

    // Workers write their own cell files; manifest updates are serialized.
    let progress = Mutex::new(manifest);
    pending.par_iter().try_for_each(|(label, id)| -> Result<()> {
        run_cell(&cfg, seed, label, *id, &out).with_context(|| format!("cell {}", cell_name(label, *id)))?;
        let mut m = progress.lock().expect("manifest lock");
        m.completed_cells.push(cell_name(label, *id));
        m.completed_cells.sort();
        m.save(out.root())?;
        Ok(())
    })?;
    let manifest = progress.into_inner().expect("manifest lock");

    let mut results = Vec::with_capacity(cells.len());
    for (label, id) in &cells {
        let name = cell_name(label, *id);
        let rel = format!("cells/{name}.json");
        let text = fs::read_to_string(out.path(&rel)).with_context(|| format!("reading {rel}"))?;
        results.push(serde_json::from_str::<CellResult>(&text).with_context(|| format!("parsing {rel}"))?);
        out.record(&rel);
        if cfg.save_datasets {
            out.record(&format!("datasets/{name}.csv"));
            out.record(&format!("datasets/{name}.json"));
        }
    }
    write_tables(&cfg, &results, &mut out)?;
    let manifest = RunManifest {
        status: RunStatus::Running,
        ..manifest
    };
    manifest.finish(&out)?;
    Ok(())
}

fn write_tables(cfg: &HeterodyneConfig, results: &[CellResult], out: &mut OutputDir) -> Result<()> {
    let mut lambda_rows = Vec::new();
    for cell in results {
        for fit in &cell.fits {
            lambda_rows.push(LambdaRow {
                rho0_label: cell.rho0_label.clone(),
                d_model: fit.d_model,
                n_samples: fit.n_samples,
                dataset_id: cell.dataset_id,
                lambda: fit.lambda,
                converged: fit.converged,
            });
        }
    }

    let mut summary = Vec::new();
    let mut fisher_rows = Vec::new();
    let mut element_rows = Vec::new();
    for label in &cfg.states {
        let rho0 = roster_state(label)?;
        for &n in &cfg.sorted_n() {
            for d in model_dims(cfg, &rho0) {
                let fits: Vec<&FitRecord> = results
                    .iter()
                    .filter(|c| &c.rho0_label == label)
                    .flat_map(|c| c.fits.iter())
                    .filter(|f| f.d_model == d && f.n_samples == n)
                    .collect();
                let lambdas: Vec<f64> = fits.iter().map(|f| f.lambda).collect();
                let (mean, stderr) = mean_stderr(&lambdas);
                summary.push(SummaryRow {
                    rho0_label: label.clone(),
                    d_model: d,
                    n_samples: n,
                    datasets: fits.len(),
                    mean_lambda: mean,
                    stderr,
                    wilks: wilks_expected(wilks_dof(d))?,
                    non_converged: fits.iter().filter(|f| !f.converged).count(),
                });

                let k = d * d - 1;
                let null = rho0.embed(d)?.mix_with_identity(cfg.regularizer);
                let estimates: Vec<FisherEstimate> = fits
                    .iter()
                    .map(|f| FisherEstimate {
                        matrix: DMatrix::from_row_slice(k, k, &f.fisher),
                        condition_number: f64::NAN,
                        capped: false,
                        eval_point: null.clone(),
                        n_datasets_averaged: 1,
                    })
                    .collect();
                let avg = average_fisher(&estimates)?;
                fisher_rows.push(FisherRow {
                    rho0_label: label.clone(),
                    d_model: d,
                    n_samples: n,
                    datasets: avg.n_datasets_averaged,
                    condition_number: avg.condition_number,
                    capped: avg.capped,
                });

                let mask = LMask::new(rho0.rank(), d);
                for j in 0..d {
                    for kk in 0..d {
                        let vals: Vec<f64> = fits.iter().map(|f| f.lambda_jk[j * d + kk]).collect();
                        element_rows.push(ElementRow {
                            rho0_label: label.clone(),
                            d_model: d,
                            n_samples: n,
                            j,
                            k: kk,
                            mean_lambda_jk: mean_stderr(&vals).0,
                            is_l: mask.is_l(j, kk),
                        });
                    }
                }
            }
        }
    }
    out.write_csv("lambda.csv", "heterodyne_lambda", &lambda_rows)?;
    out.write_csv("lambda_summary.csv", "heterodyne_lambda_summary", &summary)?;
    out.write_csv("fisher.csv", "heterodyne_fisher", &fisher_rows)?;
    out.write_csv("lambda_jk.csv", "heterodyne_lambda_jk", &element_rows)?;
    for row in &summary {
        println!(
            "{:>8} d={} N={:>6}: <lambda> = {:8.3} +- {:.3} (Wilks {})",
            row.rho0_label, row.d_model, row.n_samples, row.mean_lambda, row.stderr, row.wilks
        );
    }
    Ok(())
}
