//! Power studies: rejection rates of a test over a grid of alternatives.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{McarError, Result};
use crate::infer::{bootstrap_test, improved_test, universal_test, BootstrapRule, TestOptions};
use crate::ingest::SequenceDocument;
use crate::lp::index_value;
use crate::model::MarginalSequence;
use crate::sim::families::{build_sim_family_d5, build_sim_family_rs2, sim_family_d5_index, sim_family_rs2_index};
use crate::sim::sample::sample_empirical;

/// Which sequences the grid parameter indexes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyFamily {
    /// Triangle on `[r] x [2] x [2]`, parameter `p_.21`.
    Rs2 { r: usize },
    /// Five binary variables, all four-variable patterns, parameter `eps`.
    D5,
    /// One sequence per grid point.
    Custom { sequences: Vec<SequenceDocument> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMethod {
    #[default]
    Bootstrap,
    Universal,
    Improved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub family: StudyFamily,
    pub grid: Vec<f64>,
    /// `n_S`, one per pattern or a single value for all.
    pub sample_sizes: Vec<u64>,
    #[serde(default)]
    pub method: StudyMethod,
    /// Bootstrap replicates `B`.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Simulated datasets per grid point.
    pub replications: usize,
    pub seed: u64,
}

fn default_replicates() -> usize {
    99
}

fn default_alpha() -> f64 {
    0.05
}

impl StudyConfig {
    /// First experiment: `r = 2`, `p_.21` in `0.25, 0.275, ..., 0.5`,
    /// `n_S = 200`.
    pub fn rs2_power(r: usize, replications: usize, seed: u64) -> Self {
        StudyConfig {
            family: StudyFamily::Rs2 { r },
            grid: (0..=10).map(|k| 0.25 + 0.025 * k as f64).collect(),
            sample_sizes: vec![200],
            method: StudyMethod::Bootstrap,
            replicates: 99,
            alpha: 0.05,
            replications,
            seed,
        }
    }

    /// Second experiment: `eps` in `0.2, 0.25, 0.3, 0.35`, `n_S = 500`.
    pub fn d5_power(replications: usize, seed: u64) -> Self {
        StudyConfig {
            family: StudyFamily::D5,
            grid: vec![0.2, 0.25, 0.3, 0.35],
            sample_sizes: vec![500],
            method: StudyMethod::Bootstrap,
            replicates: 99,
            alpha: 0.05,
            replications,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(McarError::Domain("a study needs at least one replication".into()));
        }
        if self.grid.is_empty() {
            return Err(McarError::Domain("the study grid is empty".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(McarError::Domain("sample sizes must be positive".into()));
        }
        if let StudyFamily::Custom { sequences } = &self.family {
            if sequences.len() != self.grid.len() {
                return Err(McarError::Domain(format!(
                    "custom study has {} sequences for {} grid points",
                    sequences.len(),
                    self.grid.len()
                )));
            }
        }
        Ok(())
    }

    /// The population sequence at grid point `g` and its index.
    fn point(&self, g: usize) -> Result<(MarginalSequence, f64)> {
        let t = self.grid[g];
        match &self.family {
            StudyFamily::Rs2 { r } => Ok((build_sim_family_rs2(*r, t)?, sim_family_rs2_index(t))),
            StudyFamily::D5 => Ok((build_sim_family_d5(t)?, sim_family_d5_index(t))),
            StudyFamily::Custom { sequences } => {
                let seq = sequences[g].to_sequence()?;
                let r = index_value(&seq)?;
                Ok((seq, r))
            }
        }
    }

    fn sizes_for(&self, patterns: usize) -> Result<Vec<u64>> {
        match self.sample_sizes.len() {
            1 => Ok(vec![self.sample_sizes[0]; patterns]),
            n if n == patterns => Ok(self.sample_sizes.clone()),
            n => Err(McarError::Domain(format!("{n} sample sizes for {patterns} patterns"))),
        }
    }
}

/// One CSV line of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub parameter: f64,
    #[serde(rename = "R_true")]
    pub r_true: f64,
    pub reps: usize,
    pub rejections: usize,
    pub rate: f64,
    /// `sqrt(rate (1 - rate) / reps)`.
    pub se: f64,
    /// `3 se`, the half-width of the plotted error bars.
    pub three_se: f64,
    /// Left empty for results of other tests merged later.
    pub external: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub warnings: Vec<String>,
}

impl StudyResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| McarError::Domain(e.to_string()))
    }
}

/// Runs the configured test on `replications` simulated datasets per grid
/// point. Dataset `k` at grid point `g` uses ChaCha8 stream `g * 2^32 + k`
/// of the master seed, and its bootstrap seed is the first word of that
/// stream, so the output does not depend on the number of threads.
pub fn run_power_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let mut warnings = Vec::new();
    if config.method == StudyMethod::Bootstrap && config.alpha * ((config.replicates + 1) as f64) < 1.0 {
        warnings.push(format!(
            "alpha (B + 1) < 1 with B = {}: the bootstrap cannot reject",
            config.replicates
        ));
    }
    if config.family == StudyFamily::D5 && config.grid.iter().any(|&e| !(0.2..=0.35).contains(&e)) {
        warnings.push("eps outside [0.2, 0.35]: the index formula is only checked there".into());
    }
    let options = TestOptions::default();
    let mut rows = Vec::with_capacity(config.grid.len());
    for g in 0..config.grid.len() {
        let (population, r_true) = config.point(g)?;
        let sizes = config.sizes_for(population.len())?;
        let decisions: Vec<bool> = (0..config.replications)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(((g as u64) << 32) | k as u64);
                let boot_seed = rng.next_u64();
                let data = sample_empirical(&mut rng, &population, &sizes)?;
                let report = match config.method {
                    StudyMethod::Universal => universal_test(&data, config.alpha, &options)?,
                    StudyMethod::Improved => improved_test(&data, config.alpha, None, &options)?,
                    StudyMethod::Bootstrap => match bootstrap_test(
                        &data,
                        config.alpha,
                        config.replicates,
                        boot_seed,
                        BootstrapRule::Standard,
                        &options,
                    ) {
                        Ok(report) => report,
                        // no compatible component left: the data reject
                        Err(McarError::DegenerateNull { .. }) => return Ok(true),
                        Err(e) => return Err(e),
                    },
                };
                Ok(report.rejects())
            })
            .collect::<Result<_>>()?;
        let rejections = decisions.iter().filter(|&&d| d).count();
        let reps = config.replications;
        let rate = rejections as f64 / reps as f64;
        let se = (rate * (1.0 - rate) / reps as f64).sqrt();
        rows.push(StudyRow {
            parameter: config.grid[g],
            r_true,
            reps,
            rejections,
            rate,
            se,
            three_se: 3.0 * se,
            external: None,
        });
    }
    Ok(StudyResult { rows, warnings })
}
