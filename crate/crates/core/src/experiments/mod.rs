//! Convergence study, moving-domain sweep and demo runs.

pub mod config;
pub mod demo;
pub mod manufactured;
pub mod pipeline;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{parse_levels, Problem, RunConfig};
pub use pipeline::{compute_error_norms, run_level, Discretization, ErrorNorms, LevelOutcome};

use crate::geometry::{builtin_geometry, GeometryParams};
use crate::mesh::BackgroundMesh;
use crate::spaces::SpaceVariant;
use crate::{Error, Result};

pub const CONVERGENCE_HEADER: &str = "m,h,n_dofs,errH1_u,errL2_u,errL2_p,kappa1,max_agg_dist";
pub const MOVING_HEADER: &str = "ell,eta_min,kappa1_std,kappa1_agg";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Outcome of one level: solved, or failed with a reason.
pub type LevelRow = (u32, std::result::Result<LevelOutcome, String>);

pub fn run_convergence(cfg: &RunConfig) -> Vec<LevelRow> {
    (cfg.levels.0..=cfg.levels.1)
        .map(|m| {
            let r = run_level(cfg, m).map_err(|e| e.to_string());
            if let Err(e) = &r {
                log::warn!("level {m} failed: {e}");
            }
            (m, r)
        })
        .collect()
}

pub fn convergence_csv(rows: &[LevelRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{CONVERGENCE_HEADER}").unwrap();
    for (m, r) in rows {
        match r {
            Ok(o) => writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                m,
                num(o.h),
                o.n_dofs,
                num(o.errors.h1_u),
                num(o.errors.l2_u),
                num(o.errors.l2_p),
                num(o.kappa1),
                o.max_agg_dist
            )
            .unwrap(),
            Err(reason) => {
                writeln!(s, "# level {m} failed: {reason}").unwrap();
                writeln!(s, "{m},NaN,NaN,NaN,NaN,NaN,NaN,NaN").unwrap();
            }
        }
    }
    s
}

/// One sample of the moving-domain sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingSample {
    pub ell: f64,
    pub eta_min: f64,
    pub kappa1_std: f64,
    pub kappa1_agg: f64,
}

/// Positions of the obstacle along the diagonal: a uniform grid of
/// `[0.35, 0.65] sqrt(d)`, or sorted random draws for a nonzero seed.
pub fn moving_positions(cfg: &RunConfig) -> Vec<f64> {
    let scale = (cfg.dim as f64).sqrt();
    let (lo, hi) = (0.35 * scale, 0.65 * scale);
    let n = cfg.samples;
    if cfg.seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
        v.sort_by(f64::total_cmp);
        return v;
    }
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn moving_geometry(cfg: &RunConfig) -> Result<&'static str> {
    match (cfg.dim, cfg.geometry.as_str()) {
        (2, "moving_circle" | "circle_cavity") => Ok("moving_circle"),
        (3, "moving_sphere" | "sphere_cavity") => Ok("moving_sphere"),
        (_, g) => Err(Error::Config(format!(
            "moving sweep needs a moving obstacle, got '{g}'"
        ))),
    }
}

/// Condition number of one variant at one obstacle position.
pub fn moving_kappa(cfg: &RunConfig, ell: f64, variant: SpaceVariant) -> Result<(f64, f64)> {
    let name = moving_geometry(cfg)?;
    let ls = builtin_geometry(
        name,
        &GeometryParams {
            ell: Some(ell),
            ..Default::default()
        },
    )?;
    let mesh = BackgroundMesh::unit(cfg.dim, 1 << cfg.moving_level)?;
    let mut c = cfg.clone();
    c.space = variant;
    let params = c.form_parameters();
    let disc = Discretization::build(mesh, ls.as_ref(), variant, c.extension, &params, c.eta0)?;
    let exact = pipeline::exact_solution(&c);
    let system = disc.assemble(&params, exact.as_ref())?;
    let points = disc.space.dof_points();
    let (_, kappa, _) = pipeline::solve_with_condition(&system, Some(&points))?;
    Ok((kappa, disc.eta_min()))
}

pub fn run_moving_domain(
    cfg: &RunConfig,
) -> Result<Vec<(f64, std::result::Result<MovingSample, String>)>> {
    moving_geometry(cfg)?;
    Ok(moving_positions(cfg)
        .into_iter()
        .map(|ell| {
            let sample = (|| -> Result<MovingSample> {
                let (kappa1_std, eta_min) = moving_kappa(cfg, ell, SpaceVariant::Standard)?;
                let (kappa1_agg, _) = moving_kappa(cfg, ell, SpaceVariant::Aggregated)?;
                Ok(MovingSample {
                    ell,
                    eta_min,
                    kappa1_std,
                    kappa1_agg,
                })
            })()
            .map_err(|e| e.to_string());
            if let Err(e) = &sample {
                log::warn!("ell = {ell} failed: {e}");
            }
            (ell, sample)
        })
        .collect())
}

pub fn moving_csv(rows: &[(f64, std::result::Result<MovingSample, String>)]) -> String {
    let mut s = String::new();
    writeln!(s, "{MOVING_HEADER}").unwrap();
    for (ell, r) in rows {
        match r {
            Ok(x) => writeln!(
                s,
                "{},{},{},{}",
                num(x.ell),
                num(x.eta_min),
                num(x.kappa1_std),
                num(x.kappa1_agg)
            )
            .unwrap(),
            Err(reason) => {
                writeln!(s, "# ell {} failed: {reason}", num(*ell)).unwrap();
                writeln!(s, "{},NaN,NaN,NaN", num(*ell)).unwrap();
            }
        }
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
