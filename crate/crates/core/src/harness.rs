//! Power studies: calibrate once per scenario null, then test `R` replicate
//! datasets at every θ with every requested method and tabulate rejection
//! rates.
//!
//! Replicate `r` at the `t`-th θ is drawn from its own stream, so all methods
//! see the same datasets and the table does not depend on the number of
//! worker threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result, SstError};
use crate::null_models::{ad_statistic, ks_statistic, BaselineConfig, Family, NullSampler, ScenarioSpec};
use crate::rng::{self, Purpose};
use crate::smooth_test::{Bandwidths, DroppedSetting, LambdaSetting, SstConfig, SstTest};

/// A test whose power is estimated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sst,
    /// One curve per retained tuning setting, each testing with its own `T_λ`.
    SingleLambda,
    Ks,
    Ad,
    /// Power curves computed elsewhere, read from a CSV with columns
    /// `method,theta,rate`.
    External(PathBuf),
}

/// Everything needed to reproduce a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub family: Family,
    /// Dimension for the multivariate families; the family default otherwise.
    pub dim: Option<usize>,
    /// θ values; eight evenly spaced points over the documented range when
    /// empty.
    pub thetas: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub b1: usize,
    pub b2: usize,
    pub bandwidths: Bandwidths,
    pub cutoffs: Vec<usize>,
    pub reps: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub baseline: BaselineConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let sst = SstConfig::default();
        Self {
            family: Family::NormalMean,
            dim: None,
            thetas: Vec::new(),
            n: 50,
            m: sst.m,
            b1: sst.b1,
            b2: sst.b2,
            bandwidths: sst.bandwidths,
            cutoffs: sst.cutoffs,
            reps: 500,
            alpha: 0.05,
            methods: vec![Method::Sst, Method::Ks, Method::Ad],
            baseline: BaselineConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return config("R must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return config(format!("α must lie in (0, 1), got {}", self.alpha));
        }
        if self.n == 0 {
            return config("n must be positive");
        }
        if self.methods.is_empty() {
            return config("no methods requested");
        }
        if self.family == Family::Bootstrap {
            return config("the bootstrap family has no alternatives to study");
        }
        if self.thetas.iter().any(|t| !t.is_finite()) {
            return config("θ grid contains a non-finite value");
        }
        let univariate_only = self.methods.iter().any(|m| matches!(m, Method::Ks | Method::Ad));
        if univariate_only && self.family.null_cdf().is_none() {
            return config(format!("KS and AD need a univariate family with a known CDF, not {}", self.family));
        }
        Ok(())
    }

    /// θ grid actually used.
    pub fn theta_grid(&self) -> Vec<f64> {
        if !self.thetas.is_empty() {
            return self.thetas.clone();
        }
        let (lo, hi) = self.family.theta_range();
        (0..8).map(|k| lo + (hi - lo) * k as f64 / 7.0).collect()
    }

    fn scenario(&self, theta: f64) -> ScenarioSpec {
        let spec = ScenarioSpec::new(self.family, theta);
        match self.dim {
            Some(d) => spec.with_dim(d),
            None => spec,
        }
    }

    fn sst_config(&self) -> SstConfig {
        SstConfig {
            bandwidths: self.bandwidths.clone(),
            cutoffs: self.cutoffs.clone(),
            m: self.m,
            b1: self.b1,
            b2: self.b2,
            seed: self.seed,
            ..SstConfig::default()
        }
    }

    fn needs_sst(&self) -> bool {
        self.methods.iter().any(|m| matches!(m, Method::Sst | Method::SingleLambda))
    }
}

/// One point of a power curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub method: String,
    pub theta: f64,
    pub rate: f64,
    /// `√(rate(1 − rate)/R)`; absent for external curves.
    pub se: Option<f64>,
    pub reps: Option<usize>,
}

impl PowerRow {
    fn estimated(method: String, theta: f64, rejections: usize, reps: usize) -> Self {
        let rate = rejections as f64 / reps as f64;
        Self { method, theta, rate, se: Some((rate * (1.0 - rate) / reps as f64).sqrt()), reps: Some(reps) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub family: Family,
    /// Grouped by method, θ ascending within a method in grid order.
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    /// Rows of one method, in grid order.
    pub fn curve(&self, method: &str) -> Vec<&PowerRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn get(&self, method: &str, theta: f64) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.method == method && r.theta == theta)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "theta", "rate", "se", "reps"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.theta.to_string(),
                r.rate.to_string(),
                r.se.map(|s| s.to_string()).unwrap_or_default(),
                r.reps.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.into_inner().map_err(|e| SstError::Io(e.into_error()))
    }

    /// Parses CSV written by [`PowerTable::to_csv`] or an external overlay
    /// with only `method,theta,rate`.
    pub fn from_csv(family: Family, bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            method: String,
            theta: f64,
            rate: f64,
            #[serde(default)]
            se: Option<f64>,
            #[serde(default)]
            reps: Option<usize>,
        }
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(bytes).deserialize::<Raw>() {
            let r = rec?;
            if !(0.0..=1.0).contains(&r.rate) {
                return config(format!("rate {} for {} is outside [0, 1]", r.rate, r.method));
            }
            rows.push(PowerRow { method: r.method, theta: r.theta, rate: r.rate, se: r.se, reps: r.reps });
        }
        Ok(Self { family, rows })
    }
}

/// p-values of every replicate for one method at one θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicatePValues {
    pub method: String,
    pub theta: f64,
    pub p_values: Vec<f64>,
}

/// Power table plus what is needed to audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub table: PowerTable,
    pub p_values: Vec<ReplicatePValues>,
    /// Retained tuning settings, empty when no SST method ran.
    pub settings: Vec<LambdaSetting>,
    pub dropped: Vec<DroppedSetting>,
}

fn lambda_name(s: &LambdaSetting) -> String {
    format!("t_lambda[eps={:.6e};I={}]", s.bandwidth, s.cutoff)
}

/// Runs the study and keeps every replicate p-value.
pub fn run_study_detailed(cfg: &StudyConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let thetas = cfg.theta_grid();
    let null = cfg.scenario(cfg.family.null_theta());
    let sst = if cfg.needs_sst() {
        let test = SstTest::prepare(&null, &cfg.sst_config(), cfg.n)
            .map_err(|e| SstError::Calibration(format!("study aborted, calibration of the {} null failed: {e}", cfg.family)))?;
        Some(test)
    } else {
        None
    };
    let cdf = cfg.family.null_cdf();

    let mut names: Vec<String> = Vec::new();
    for m in &cfg.methods {
        match m {
            Method::Sst => names.push("sst".into()),
            Method::SingleLambda => {
                let grid = sst.as_ref().expect("prepared").grid();
                names.extend(grid.settings().iter().map(lambda_name));
            }
            Method::Ks => names.push("ks".into()),
            Method::Ad => names.push("ad".into()),
            Method::External(_) => {}
        }
    }

    let jobs: Vec<(usize, usize)> = (0..thetas.len()).flat_map(|t| (0..cfg.reps).map(move |r| (t, r))).collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(t, r)| {
            let spec = cfg.scenario(thetas[t]);
            let mut s = rng::stream(cfg.seed, Purpose::Replicate, t as u64, r as u64);
            let data = spec.sample(cfg.n, &mut s)?;
            let eval = sst.as_ref().map(|test| test.evaluate(&data)).transpose()?;
            let mut p = Vec::with_capacity(names.len());
            for m in &cfg.methods {
                match m {
                    Method::Sst => p.push(eval.as_ref().expect("prepared").p_value),
                    Method::SingleLambda => p.extend_from_slice(&eval.as_ref().expect("prepared").p_lambda),
                    Method::Ks => p.push(ks_statistic(&data, cdf.as_deref().expect("checked"), &cfg.baseline)?.p_value),
                    Method::Ad => p.push(ad_statistic(&data, cdf.as_deref().expect("checked"), &cfg.baseline)?.p_value),
                    Method::External(_) => {}
                }
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut p_values = Vec::new();
    for (k, name) in names.iter().enumerate() {
        for (t, &theta) in thetas.iter().enumerate() {
            let ps: Vec<f64> = results[t * cfg.reps..(t + 1) * cfg.reps].iter().map(|p| p[k]).collect();
            let rejections = ps.iter().filter(|&&p| p <= cfg.alpha).count();
            rows.push(PowerRow::estimated(name.clone(), theta, rejections, cfg.reps));
            p_values.push(ReplicatePValues { method: name.clone(), theta, p_values: ps });
        }
    }
    for m in &cfg.methods {
        if let Method::External(path) = m {
            let bytes = fs::read(path).map_err(|e| {
                SstError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
            })?;
            rows.extend(PowerTable::from_csv(cfg.family, &bytes)?.rows);
        }
    }

    let (settings, dropped) = match &sst {
        Some(test) => (test.grid().settings().to_vec(), test.calibration().dropped.clone()),
        None => (Vec::new(), Vec::new()),
    };
    Ok(StudyOutput { table: PowerTable { family: cfg.family, rows }, p_values, settings, dropped })
}

/// Rejection rates for every method and θ of `cfg`.
pub fn run_power_study(cfg: &StudyConfig) -> Result<PowerTable> {
    run_study_detailed(cfg).map(|o| o.table)
}

/// Like [`run_power_study`] but always includes the SST curve and one curve
/// per tuning setting.
pub fn run_robustness_study(cfg: &StudyConfig) -> Result<StudyOutput> {
    let mut cfg = cfg.clone();
    for m in [Method::Sst, Method::SingleLambda] {
        if !cfg.methods.contains(&m) {
            cfg.methods.push(m);
        }
    }
    run_study_detailed(&cfg)
}

/// Run manifest written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: StudyConfig,
    pub thetas: Vec<f64>,
    pub settings: Vec<LambdaSetting>,
    pub dropped: Vec<DroppedSetting>,
}

/// Files written by [`emit_reports`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `power.csv`, `power.svg` and `manifest.json` into `dir`.
pub fn emit_reports(cfg: &StudyConfig, output: &StudyOutput, dir: &Path) -> Result<ReportPaths> {
    if output.table.rows.is_empty() {
        return Err(SstError::Usage("power table is empty".into()));
    }
    fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        csv: dir.join("power.csv"),
        svg: dir.join("power.svg"),
        manifest: dir.join("manifest.json"),
    };
    fs::write(&paths.csv, output.table.to_csv()?)?;
    fs::write(&paths.svg, render_svg(&output.table))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        thetas: cfg.theta_grid(),
        settings: output.settings.clone(),
        dropped: output.dropped.clone(),
    };
    fs::write(&paths.manifest, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(paths)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

const PALETTE: [&str; 10] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a",
];

/// Line chart of every curve in the table. Output depends only on the rows.
pub fn render_svg(table: &PowerTable) -> String {
    let (w, h, left, right, top, bottom) = (720.0, 440.0, 60.0, 220.0, 30.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let (mut lo, mut hi) = table
        .rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.theta), hi.max(r.theta)));
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let x = |t: f64| left + (t - lo) / (hi - lo) * plot_w;
    let y = |p: f64| top + (1.0 - p) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18">power, {}</text>"#, table.family);
    for k in 0..=5 {
        let p = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.2}" x2="{x2:.2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{p:.1}</text>"##,
            yy = y(p),
            x2 = left + plot_w,
            tx = left - 6.0,
            ty = y(p) + 4.0,
        );
    }
    let mut ticks: Vec<f64> = table.rows.iter().map(|r| r.theta).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for t in &ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x(*t),
            top + plot_h + 18.0,
            fmt_tick(*t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">θ</text>"#, left + plot_w / 2.0, h - 10.0);

    for (k, name) in table.methods().into_iter().enumerate() {
        let points: Vec<(f64, f64)> = table.curve(name).iter().map(|r| (r.theta, r.rate)).collect();
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = points.iter().map(|&(t, p)| format!("{:.2},{:.2}", x(t), y(p))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for &(t, p) in &points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, x(t), y(p));
        }
        let ly = top + 12.0 + 16.0 * k as f64;
        let lx = left + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
