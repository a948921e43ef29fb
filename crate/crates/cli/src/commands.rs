//! The six subcommands. Each writes its artifacts under the output
//! directory and returns the list of files written.

use crate::config::{Config, RawConfig, SetSource};
use lgq_core::acceptance;
use lgq_core::density1d::{
    is_cd_density, unique_max, CdReport, CurvatureParams, Density1D, MaxReport,
};
use lgq_core::localize::space::farthest_point;
use lgq_core::localize::{
    deficit_report, quantify, transport_relation, DeficitReport, DiscreteSpace, MainTheoremReport,
};
use lgq_core::profile::{model_profile, profile_csv, profile_table, ConstantBundle};
use lgq_core::spaces::make_perturbed_cap;
use lgq_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Samples per fitted ray density in `needle.json`.
const DENSITY_SAMPLES: usize = 64;

/// Writes through a temporary file and a rename, so readers never see a
/// partial artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, &text)
}

fn test_set(config: &Config, space: &DiscreteSpace) -> Result<Vec<bool>> {
    match &config.set {
        SetSource::Cap {
            center,
            blob,
            blob_center,
        } => {
            if *center >= space.len() {
                return Err(Error::InvalidParameter(format!(
                    "center {center} out of range"
                )));
            }
            let other = blob_center.unwrap_or_else(|| farthest_point(space, *center));
            Ok(make_perturbed_cap(space, *center, config.v, *blob, other)?.mask)
        }
        SetSource::File(path) => {
            let text = fs::read_to_string(path)?;
            let mut mask = vec![false; space.len()];
            for id in text.split_whitespace() {
                let i = space.ids().iter().position(|x| x == id).ok_or_else(|| {
                    Error::InvalidParameter(format!("unknown point id `{id}` in set file"))
                })?;
                mask[i] = true;
            }
            Ok(mask)
        }
    }
}

pub fn profile(config: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    let rows = profile_table(&config.profile_n, &config.profile_d, &config.profile_v)?;
    let table = out.join("profile.csv");
    write_atomic(&table, &profile_csv(&rows))?;
    // Excess over the full-length profile against the length deficit, for
    // log-log scaling fits.
    let mut plot = String::from("N,v,log_length_deficit,log_profile_excess\n");
    for r in rows.iter().filter(|r| r.d < PI) {
        let excess = r.i - model_profile(r.n, PI, r.v)?;
        if excess > 0.0 {
            let _ = writeln!(plot, "{},{},{},{}", r.n, r.v, (PI - r.d).ln(), excess.ln());
        }
    }
    let plot_path = out.join("profile_plot.csv");
    write_atomic(&plot_path, &plot)?;
    let report = out.join("report.json");
    write_json(&report, &rows)?;
    Ok(vec![table, plot_path, report])
}

#[derive(Serialize)]
struct CdCheck {
    domain: f64,
    dimension: f64,
    cd: CdReport,
    maximum: MaxReport,
}

/// Returns whether the density passed, with the files written.
pub fn cdcheck(config: &Config, out: &Path) -> Result<(bool, Vec<PathBuf>)> {
    let path = config
        .density
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("cdcheck needs `density`".into()))?;
    let h = Density1D::from_text(&fs::read_to_string(path)?)?;
    let cd = is_cd_density(
        &h,
        &CurvatureParams::model(h.dimension())?,
        config.pipeline.cd_tol,
    )?;
    let report = CdCheck {
        domain: h.domain(),
        dimension: h.dimension(),
        maximum: unique_max(&h),
        cd,
    };
    let ok = report.cd.ok;
    let file = out.join("report.json");
    write_json(&file, &report)?;
    Ok((ok, vec![file]))
}

#[derive(Serialize)]
struct RayOut {
    chain: Vec<String>,
    masses: Vec<f64>,
    d_q: f64,
    weight: f64,
    south: String,
    north: String,
    cd_ok: bool,
    /// `(t, h(t))` samples of the fitted needle density.
    density: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct NeedleOut {
    rays: Vec<RayOut>,
    zero_set: Vec<String>,
    leftover_mass: f64,
    shared_mass: f64,
    tol_gamma: f64,
    /// Largest cyclic-monotonicity excess over sampled cycles of length 3.
    cyclic_excess: f64,
}

pub fn needle(config: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    let space = config.space.load()?;
    let e = test_set(config, &space)?;
    let p = deficit_report(&space, &e, config.n, &config.pipeline)?;
    let ids = space.ids();
    let dec = &p.decomposition;
    let rel = transport_relation(&space, &p.potential, dec.tol_gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rays = dec
        .rays
        .iter()
        .zip(&p.fitted)
        .map(|(r, (h, ok))| RayOut {
            chain: r.chain.iter().map(|&i| ids[i].clone()).collect(),
            masses: r.masses.clone(),
            d_q: r.d_q,
            weight: r.weight,
            south: ids[r.south].clone(),
            north: ids[r.north].clone(),
            cd_ok: *ok,
            density: h.samples(DENSITY_SAMPLES),
        })
        .collect();
    let needles = NeedleOut {
        rays,
        zero_set: dec.zero_set.iter().map(|&i| ids[i].clone()).collect(),
        leftover_mass: dec.leftover_mass,
        shared_mass: dec.shared_mass,
        tol_gamma: dec.tol_gamma,
        cyclic_excess: rel.cyclic_monotonicity(&space, 1000, 3, &mut rng),
    };
    let needle_path = out.join("needle.json");
    write_json(&needle_path, &needles)?;
    let report = out.join("report.json");
    write_json::<DeficitReport>(&report, &p.report)?;
    Ok(vec![needle_path, report])
}

pub fn quantify_once(config: &Config) -> Result<MainTheoremReport> {
    let space = config.space.load()?;
    let e = test_set(config, &space)?;
    quantify(&space, &e, config.n, &config.pipeline)
}

pub fn quantify_cmd(config: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    let report = out.join("report.json");
    write_json(&report, &quantify_once(config)?)?;
    Ok(vec![report])
}

#[derive(Serialize)]
struct SweepFit {
    eta: f64,
    /// Smallest `C` with `asymmetry ≤ C δ^η` over the rows with `δ > 0`.
    c_fit: f64,
    /// Least-squares slope of log asymmetry against log δ.
    log_slope: Option<f64>,
    /// `δ` and asymmetry both nondecreasing in sweep order.
    monotone: bool,
}

#[derive(Serialize)]
struct SweepOut {
    key: String,
    values: Vec<String>,
    fit: SweepFit,
    reports: Vec<MainTheoremReport>,
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs one quantify experiment per value of `sweep_key`, in parallel;
/// each run's report lands in `runs/` before the merge.
pub fn sweep(raw: &RawConfig, config: &Config, base: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    if config.sweep_values.is_empty() {
        return Err(Error::InvalidParameter("sweep_values is empty".into()));
    }
    let configs: Vec<Config> = config
        .sweep_values
        .iter()
        .map(|value| {
            let mut r = raw.clone();
            r.set(&config.sweep_key, value)
                .and_then(|_| Config::from_raw(&r, base))
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let runs = out.join("runs");
    fs::create_dir_all(&runs)?;
    let reports: Vec<MainTheoremReport> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let r = quantify_once(c)?;
            write_json(&runs.join(format!("{i:03}.json")), &r)?;
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let eta = ConstantBundle::new(config.n, config.v, config.exponents)?.eta;
    let mut csv = format!(
        "{},delta,asymmetry,diam_deficit,q_short,q_bad1,q_bad2,q_S,q_N,r_N_v,x_bar\n",
        config.sweep_key
    );
    let mut plot = format!("{},log_delta,log_asymmetry\n", config.sweep_key);
    let mut logs = Vec::new();
    for (value, r) in config.sweep_values.iter().zip(&reports) {
        let _ = writeln!(
            csv,
            "{value},{},{},{},{},{},{},{},{},{},{}",
            r.delta,
            r.asymmetry,
            r.diam_deficit,
            r.q_short,
            r.q_bad1,
            r.q_bad2,
            r.q_s,
            r.q_n,
            r.r_n_v,
            r.x_bar
        );
        if r.delta > 0.0 && r.asymmetry > 0.0 {
            let _ = writeln!(plot, "{value},{},{}", r.delta.ln(), r.asymmetry.ln());
            logs.push((r.delta.ln(), r.asymmetry.ln()));
        }
    }
    let c_fit = reports
        .iter()
        .filter(|r| r.delta > 0.0)
        .map(|r| r.asymmetry / r.delta.powf(eta))
        .fold(0.0, f64::max);
    let monotone = reports
        .windows(2)
        .all(|w| w[1].delta >= w[0].delta && w[1].asymmetry >= w[0].asymmetry);
    let fit = SweepFit {
        eta,
        c_fit,
        log_slope: least_squares_slope(&logs),
        monotone,
    };

    let csv_path = out.join("sweep.csv");
    write_atomic(&csv_path, &csv)?;
    let plot_path = out.join("sweep_plot.csv");
    write_atomic(&plot_path, &plot)?;
    let report = out.join("report.json");
    write_json(
        &report,
        &SweepOut {
            key: config.sweep_key.clone(),
            values: config.sweep_values.clone(),
            fit,
            reports,
        },
    )?;
    Ok(vec![csv_path, plot_path, report])
}

/// Prints one line per criterion; returns whether all selected passed.
pub fn accept(config: &Config, out: &Path) -> Result<(bool, Vec<PathBuf>)> {
    let outcomes: Vec<acceptance::Outcome> = config
        .criteria
        .iter()
        .filter_map(|&id| {
            let o = acceptance::run(id)?;
            println!("{o}");
            Some(o)
        })
        .collect();
    let report = out.join("report.json");
    write_json(&report, &outcomes)?;
    Ok((outcomes.iter().all(|o| o.passed), vec![report]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 0.5 * k as f64 + 1.0)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }
}
