//! Seeded Gaussian-mixture generator for world-grid datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Region, VariableSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub variables: Vec<String>,
    pub components: Vec<MixtureComponent>,
}

impl MixtureSpec {
    /// Five well-separated clusters along one diagonal of a three-variable
    /// space, with a dominant narrow mode and three small satellite
    /// clusters.
    pub fn clustered() -> Self {
        let c = |weight, means: [f64; 3], stddevs: [f64; 3]| MixtureComponent {
            weight,
            means: means.to_vec(),
            stddevs: stddevs.to_vec(),
        };
        MixtureSpec {
            variables: vec!["temperature".into(), "tree_cover".into(), "market_access".into()],
            components: vec![
                c(0.60, [0.10, 0.15, 0.10], [0.03, 0.03, 0.03]),
                c(0.25, [0.45, 0.50, 0.45], [0.04, 0.04, 0.05]),
                c(0.08, [0.65, 0.60, 0.70], [0.03, 0.04, 0.03]),
                c(0.04, [0.85, 0.80, 0.80], [0.03, 0.03, 0.03]),
                c(0.03, [1.05, 1.00, 1.00], [0.03, 0.03, 0.03]),
            ],
        }
    }

    /// One broad cluster.
    pub fn unimodal() -> Self {
        MixtureSpec {
            variables: vec!["temperature".into(), "tree_cover".into()],
            components: vec![MixtureComponent {
                weight: 1.0,
                means: vec![15.0, 40.0],
                stddevs: vec![4.0, 10.0],
            }],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "clustered" => Some(Self::clustered()),
            "unimodal" => Some(Self::unimodal()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMixture(m));
        if self.variables.is_empty() {
            return bad("no variables".into());
        }
        if self.components.is_empty() {
            return bad("no components".into());
        }
        let mut total = 0.0;
        for (k, c) in self.components.iter().enumerate() {
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return bad(format!("component {k} has invalid weight {}", c.weight));
            }
            if c.means.len() != self.variables.len() || c.stddevs.len() != self.variables.len() {
                return bad(format!(
                    "component {k} must give one mean and one stddev per variable"
                ));
            }
            if c.means.iter().any(|m| !m.is_finite())
                || c.stddevs.iter().any(|s| !(s.is_finite() && *s >= 0.0))
            {
                return bad(format!("component {k} has a non-finite mean or negative stddev"));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {total}, expected 1"));
        }
        Ok(())
    }
}

/// Equirectangular cell centers covering the globe, row-major from the
/// north-west corner.
pub fn world_grid(n: usize) -> Vec<(f64, f64)> {
    let cols = ((2 * n) as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n.div_ceil(cols);
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let lat = 90.0 - (r as f64 + 0.5) * 180.0 / rows as f64;
            let lon = -180.0 + (c as f64 + 0.5) * 360.0 / cols as f64;
            (lat, lon)
        })
        .collect()
}

pub fn generate_synthetic(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Dataset> {
    generate_labeled(spec, n, seed).map(|(d, _)| d)
}

/// Like [`generate_synthetic`], also returning the component drawn for
/// every region.
pub fn generate_labeled(spec: &MixtureSpec, n: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one region".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cumulative: Vec<f64> = spec
        .components
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight;
            Some(*acc)
        })
        .collect();
    let width = (n - 1).to_string().len();
    let mut regions = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * spec.variables.len());
    let mut labels = Vec::with_capacity(n);
    for (i, (lat, lon)) in world_grid(n).into_iter().enumerate() {
        let u: f64 = rng.random();
        let k = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(spec.components.len() - 1);
        let comp = &spec.components[k];
        for (mean, sd) in comp.means.iter().zip(&comp.stddevs) {
            let z: f64 = rng.sample(StandardNormal);
            values.push(mean + sd * z);
        }
        labels.push(k);
        regions.push(Region::new(format!("g{i:0width$}"), lat, lon));
    }
    let variables = spec.variables.iter().map(VariableSpec::continuous).collect();
    Ok((Dataset::new(regions, variables, values)?, labels))
}
