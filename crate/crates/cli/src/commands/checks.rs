use anyhow::Result;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qnull::hermitian::{random_rank_r_state, sample_perturbed_state, sample_trace_one_hermitian, Spectrum};
use qnull::projection::{oracle_project, project_to_states, TangentCone};
use qnull::rng::SeedStream;
use qnull::semicircle::{empirical_mean_spectrum, order_statistics, Semicircle};

use crate::config::{self, override_with};
use crate::output::{OutputDir, RunManifest};
use crate::Common;

#[derive(Args, Debug)]
pub struct WignerArgs {
    /// Comma-separated matrix sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub seed: Option<u64>,
    pub n_values: Vec<usize>,
    pub draws: usize,
    pub eps: f64,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            seed: None,
            n_values: vec![10, 100],
            draws: 1000,
            eps: 1.0,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow {
    n: usize,
    j: usize,
    mean_eigenvalue: f64,
    stderr: f64,
    order_statistic: f64,
    deviation_over_radius: f64,
}

#[derive(Serialize, Deserialize)]
struct SpectrumSummary {
    n: usize,
    draws: usize,
    radius: f64,
    max_deviation_over_radius: f64,
}

pub fn run_wigner(common: &Common, args: &WignerArgs) -> Result<()> {
    let mut cfg: WignerConfig = config::load(common.config.as_deref())?;
    override_with(&mut cfg.n_values, args.n_values.clone());
    override_with(&mut cfg.draws, args.draws);
    override_with(&mut cfg.eps, args.eps);
    let seed = config::require_seed(cfg.seed, common.seed)?;
    cfg.seed = Some(seed);
    let manifest = RunManifest::start("wigner-check", &cfg, seed)?;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.n_values {
        let stream = SeedStream::new(seed).child(n as u64);
        let (means, errs) = empirical_mean_spectrum(n, cfg.eps, cfg.draws, stream)?;
        let os = order_statistics(n, cfg.eps)?;
        let radius = Semicircle::for_gue(n, cfg.eps)?.radius();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let dev = (means[j] - os[j]).abs() / radius;
            worst = worst.max(dev);
            rows.push(SpectrumRow {
                n,
                j,
                mean_eigenvalue: means[j],
                stderr: errs[j],
                order_statistic: os[j],
                deviation_over_radius: dev,
            });
        }
        println!("n={n}: max |mean - order statistic| / R = {worst:.5}");
        summary.push(SpectrumSummary {
            n,
            draws: cfg.draws,
            radius,
            max_deviation_over_radius: worst,
        });
    }
    let mut out = OutputDir::new(common.out.clone())?;
    out.write_csv("wigner_check.csv", "wigner_check", &rows)?;
    out.write_csv("wigner_summary.csv", "wigner_summary", &summary)?;
    manifest.finish(&out)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ProjectionArgs {
    /// Comma-separated dimensions for the oracle comparison.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub seed: Option<u64>,
    pub dims: Vec<usize>,
    pub samples: usize,
    /// GUE scale of the random trace-one inputs.
    pub spread: f64,
    pub cone_d: usize,
    pub cone_r: usize,
    pub cone_eps: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            seed: None,
            dims: vec![3, 4],
            samples: 100,
            spread: 0.3,
            cone_d: 6,
            cone_r: 2,
            cone_eps: 0.01,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ProjectionRow {
    kind: String,
    dim: usize,
    sample: usize,
    /// Frobenius gap to the oracle, or the relative Pythagoras residual.
    residual: f64,
    clipped: usize,
}

pub fn run_projection(common: &Common, args: &ProjectionArgs) -> Result<()> {
    let mut cfg: ProjectionConfig = config::load(common.config.as_deref())?;
    override_with(&mut cfg.dims, args.dims.clone());
    override_with(&mut cfg.samples, args.samples);
    let seed = config::require_seed(cfg.seed, common.seed)?;
    cfg.seed = Some(seed);
    let manifest = RunManifest::start("projection-check", &cfg, seed)?;
    let root = SeedStream::new(seed);

    let mut rows = Vec::new();
    for &d in &cfg.dims {
        let stream = root.child(d as u64);
        let batch = (0..cfg.samples)
            .into_par_iter()
            .map(|i| -> qnull::Result<ProjectionRow> {
                let h = sample_trace_one_hermitian(d, cfg.spread, &mut stream.rng(i as u64))?;
                let fast = project_to_states(&h)?;
                let slow = oracle_project(&h)?;
                let gap = fast.projected.as_hermitian().sub(slow.as_hermitian())?.norm_sqr().sqrt();
                Ok(ProjectionRow {
                    kind: "state-oracle".into(),
                    dim: d,
                    sample: i,
                    residual: gap,
                    clipped: fast.clipped_count,
                })
            })
            .collect::<qnull::Result<Vec<_>>>()?;
        let worst = batch.iter().map(|r| r.residual).fold(0.0, f64::max);
        println!("d={d}: max Frobenius gap to oracle = {worst:.3e}");
        rows.extend(batch);
    }

    let cone_stream = root.child(u64::MAX);
    let rho0 = random_rank_r_state(cfg.cone_d, cfg.cone_r, Spectrum::EqualWeights, &mut cone_stream.rng(0))?;
    let cone = TangentCone::new(&rho0);
    let trials = cone_stream.child(1);
    let batch = (0..cfg.samples)
        .into_par_iter()
        .map(|i| -> qnull::Result<ProjectionRow> {
            let h = sample_perturbed_state(&rho0, cfg.cone_eps, true, &mut trials.rng(i as u64))?;
            let res = cone.project(&h)?;
            let star = &res.projected;
            let lhs = rho0.as_hermitian().sub(&h)?.norm_sqr() - star.sub(&h)?.norm_sqr();
            let rhs = rho0.as_hermitian().sub(star)?.norm_sqr();
            Ok(ProjectionRow {
                kind: "cone-pythagoras".into(),
                dim: cfg.cone_d,
                sample: i,
                residual: (lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE),
                clipped: res.clipped_count,
            })
        })
        .collect::<qnull::Result<Vec<_>>>()?;
    let worst = batch.iter().map(|r| r.residual).fold(0.0, f64::max);
    println!("cone d={} r={}: max relative Pythagoras residual = {worst:.3e}", cfg.cone_d, cfg.cone_r);
    rows.extend(batch);

    let mut out = OutputDir::new(common.out.clone())?;
    out.write_csv("projection_check.csv", "projection_check", &rows)?;
    manifest.finish(&out)?;
    Ok(())
}
