//! Parsing of the textual data, null and grid arguments.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use sst::mnist;
use sst::null_models::{valid_tags, Bootstrap, Family, NullSampler, ScenarioSpec};
use sst::smooth_test::Bandwidths;
use sst::kernel_space::{GridSpec, QuantileReading};
use sst::Dataset;

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Csv { path: PathBuf },
    /// `idx:IMAGES:LABELS[:DIGIT]`
    Idx { images: PathBuf, labels: PathBuf, digit: Option<u8>, raw_pixels: bool },
}

impl DataSource {
    pub fn parse(s: &str, raw_pixels: bool) -> Result<Self> {
        let Some(rest) = s.strip_prefix("idx:") else {
            return Ok(DataSource::Csv { path: s.into() });
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let digit = match parts.len() {
            2 => None,
            3 => Some(parse_digit(parts[2])?),
            _ => bail!("IDX selector must be idx:IMAGES:LABELS[:DIGIT], got {s:?}"),
        };
        Ok(DataSource::Idx { images: parts[0].into(), labels: parts[1].into(), digit, raw_pixels })
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv { path } => Ok(Dataset::read_csv(path)?),
            DataSource::Idx { images, labels, digit, raw_pixels } => {
                let li = mnist::load_labeled(images, labels, *raw_pixels)?;
                match digit {
                    Some(d) => Ok(mnist::filter_digit(&li, *d)?),
                    None => Ok(li.images),
                }
            }
        }
    }
}

pub fn parse_digit(s: &str) -> Result<u8> {
    let d: u8 = s.parse().with_context(|| format!("digit must be an integer in 0..=9, got {s:?}"))?;
    if d > 9 {
        bail!("digit must be in 0..=9, got {d}");
    }
    Ok(d)
}

/// The null distribution named on the command line.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NullSpec {
    Scenario { family: Family, theta: f64, dim: usize },
    Bootstrap { reference: DataSource },
}

impl NullSpec {
    /// `FAMILY[:THETA][@DIM]`, `normal` for the standard normal, or
    /// `bootstrap:DATA` to resample a reference dataset.
    pub fn parse(s: &str, raw_pixels: bool) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("bootstrap:") {
            return Ok(NullSpec::Bootstrap { reference: DataSource::parse(rest, raw_pixels)? });
        }
        let (head, dim) = match s.split_once('@') {
            Some((h, d)) => (h, Some(d.parse::<usize>().with_context(|| format!("bad dimension in {s:?}"))?)),
            None => (s, None),
        };
        let (tag, theta) = match head.split_once(':') {
            Some((t, th)) => (t, Some(th.parse::<f64>().with_context(|| format!("bad θ in {s:?}"))?)),
            None => (head, None),
        };
        let family = match tag {
            "normal" => Family::NormalMean,
            "lognormal" => Family::LognormalMean,
            "uniform" => Family::BetaSymmetry,
            _ => tag.parse::<Family>().map_err(|_| {
                anyhow!("unknown null {tag:?}; valid: normal, lognormal, uniform, {}, bootstrap:DATA", valid_tags())
            })?,
        };
        if family == Family::Bootstrap {
            bail!("the bootstrap null needs a reference: bootstrap:DATA");
        }
        Ok(NullSpec::Scenario {
            family,
            theta: theta.unwrap_or(family.null_theta()),
            dim: dim.unwrap_or(family.default_dim()),
        })
    }

    pub fn sampler(&self) -> Result<Box<dyn NullSampler>> {
        Ok(match self {
            NullSpec::Scenario { family, theta, dim } => Box::new(ScenarioSpec::new(*family, *theta).with_dim(*dim)),
            NullSpec::Bootstrap { reference } => Box::new(Bootstrap::new(Arc::new(reference.load()?))?),
        })
    }
}

/// `quantiles`, `literal` or a comma-separated list of bandwidths.
pub fn parse_bandwidths(s: &str) -> Result<Bandwidths> {
    match s {
        "quantiles" => Ok(Bandwidths::Quantiles(GridSpec::default())),
        "literal" => Ok(Bandwidths::Quantiles(GridSpec { reading: QuantileReading::Literal })),
        _ => {
            let eps = s
                .split(',')
                .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad bandwidth {t:?}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Bandwidths::Explicit(eps))
        }
    }
}

/// `A..=B`, `A..B` or a comma-separated list.
pub fn parse_cutoffs(s: &str) -> Result<Vec<usize>> {
    let num = |t: &str| t.trim().parse::<usize>().with_context(|| format!("bad cutoff {t:?}"));
    if let Some((a, b)) = s.split_once("..=") {
        return Ok((num(a)?..=num(b)?).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        return Ok((num(a)?..num(b)?).collect());
    }
    s.split(',').map(num).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_specs() {
        assert_eq!(
            NullSpec::parse("normal", false).unwrap(),
            NullSpec::Scenario { family: Family::NormalMean, theta: 0.0, dim: 1 }
        );
        assert_eq!(
            NullSpec::parse("mvn_var:2@10", false).unwrap(),
            NullSpec::Scenario { family: Family::MvnVar, theta: 2.0, dim: 10 }
        );
        let err = NullSpec::parse("cauchy", false).unwrap_err().to_string();
        assert!(err.contains("normal_mean") && err.contains("fat_tails"), "{err}");
        assert!(matches!(NullSpec::parse("bootstrap:ref.csv", false).unwrap(), NullSpec::Bootstrap { .. }));
    }

    #[test]
    fn data_selectors() {
        assert_eq!(DataSource::parse("x.csv", false).unwrap(), DataSource::Csv { path: "x.csv".into() });
        assert_eq!(
            DataSource::parse("idx:a.gz:b.gz:7", true).unwrap(),
            DataSource::Idx { images: "a.gz".into(), labels: "b.gz".into(), digit: Some(7), raw_pixels: true }
        );
        assert!(DataSource::parse("idx:a.gz:b.gz:12", true).is_err());
        assert!(DataSource::parse("idx:a.gz", true).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_cutoffs("1..=4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_cutoffs("2,5").unwrap(), vec![2, 5]);
        assert_eq!(parse_bandwidths("0.5, 2").unwrap(), Bandwidths::Explicit(vec![0.5, 2.0]));
        assert!(parse_bandwidths("wide").is_err());
    }
}
