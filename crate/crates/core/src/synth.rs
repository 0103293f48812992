//! Seeded synthetic MQTT-shaped data: one Gaussian blob per class with
//! controllable separation.
//!
//! On every feature the class means sit on a grid `rank * separation` (in
//! within-class standard deviations), with the class order permuted per
//! feature. Each feature is then given its own random offset and scale, and
//! categorical features are quantised to zero-padded hex codes like the
//! flag columns of real captures.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{read_csv, Dataset, LoadOptions, DEFAULT_TARGET_COLUMN, MQTTSET_COLUMNS};
use crate::error::{Error, Result};
use crate::preprocess::shuffle;
use crate::seed::{rng_for, streams};
use crate::select::GOLDEN_FEATURES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub rows_per_class: BTreeMap<String, usize>,
    pub n_features: usize,
    pub separation: f64,
    pub seed: u64,
    /// Feature names emitted as hex category codes instead of reals.
    #[serde(default)]
    pub categorical: Vec<String>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::balanced(1000, 4.0, 42)
    }
}

impl SynthSpec {
    /// Three MQTT classes with `per_class` rows each over the ten golden features.
    pub fn balanced(per_class: usize, separation: f64, seed: u64) -> Self {
        let rows_per_class = ["bruteforce", "dos", "legitimate"]
            .iter()
            .map(|c| (c.to_string(), per_class))
            .collect();
        Self {
            rows_per_class,
            n_features: 10,
            separation,
            seed,
            categorical: [
                "tcp.flags",
                "mqtt.hdrflags",
                "mqtt.msg",
                "mqtt.conack.flags",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = GOLDEN_FEATURES.iter().map(|s| s.to_string()).collect();
        names.extend(
            MQTTSET_COLUMNS
                .iter()
                .filter(|c| !GOLDEN_FEATURES.contains(c))
                .map(|s| s.to_string()),
        );
        let mut j = names.len();
        while names.len() < self.n_features {
            names.push(format!("f{j}"));
            j += 1;
        }
        names.truncate(self.n_features);
        names
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows_per_class.is_empty() {
            return Err(Error::InvalidSpec("no classes".into()));
        }
        if let Some((c, _)) = self.rows_per_class.iter().find(|(_, &n)| n == 0) {
            return Err(Error::InvalidSpec(format!("class `{c}` has zero rows")));
        }
        if self
            .rows_per_class
            .keys()
            .any(|k| k.trim().is_empty() || k.contains(','))
        {
            return Err(Error::InvalidSpec(
                "class names must be non-empty and comma-free".into(),
            ));
        }
        if self.n_features < 2 {
            return Err(Error::InvalidSpec("need at least 2 features".into()));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidSpec(
                "separation must be finite and >= 0".into(),
            ));
        }
        let names = self.feature_names();
        if let Some(c) = self.categorical.iter().find(|c| !names.contains(c)) {
            return Err(Error::InvalidSpec(format!(
                "categorical feature `{c}` not generated"
            )));
        }
        Ok(())
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            categorical: self.categorical.clone(),
            ..LoadOptions::default()
        }
    }
}

struct FeatureLayout {
    rank_of_class: Vec<usize>,
    offset: f64,
    scale: f64,
}

/// Renders the synthetic dataset as CSV with a `target` column.
pub fn generate_csv(spec: &SynthSpec) -> Result<String> {
    spec.validate()?;
    let names = spec.feature_names();
    let classes: Vec<&String> = spec.rows_per_class.keys().collect();
    let k = classes.len();

    let layouts: Vec<FeatureLayout> = (0..names.len())
        .map(|j| {
            let mut rng = rng_for(spec.seed, streams::SYNTH, j as u64);
            let mut rank_of_class: Vec<usize> = (0..k).collect();
            shuffle(&mut rng, &mut rank_of_class);
            FeatureLayout {
                rank_of_class,
                offset: rng.random_range(0.0..100.0),
                scale: 10f64.powf(rng.random_range(-1.0..2.0)),
            }
        })
        .collect();
    let categorical: Vec<bool> = names.iter().map(|n| spec.categorical.contains(n)).collect();

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    let mut rng = rng_for(spec.seed, streams::SYNTH, u64::MAX);
    for (c, &class) in classes.iter().enumerate() {
        for _ in 0..spec.rows_per_class[class] {
            let cells = layouts
                .iter()
                .zip(&categorical)
                .map(|(f, &is_cat)| {
                    let z: f64 = rng.sample(StandardNormal);
                    let latent = f.rank_of_class[c] as f64 * spec.separation + z;
                    if is_cat {
                        let code = (latent * 4.0 + 64.0).round().max(0.0) as u64;
                        format!("0x{code:08x}")
                    } else {
                        format!("{}", f.offset + f.scale * latent)
                    }
                })
                .collect();
            rows.push((c, cells));
        }
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    shuffle(&mut rng, &mut order);

    let mut out = names.join(",");
    out.push(',');
    out.push_str(DEFAULT_TARGET_COLUMN);
    out.push('\n');
    for i in order {
        let (c, cells) = &rows[i];
        let _ = writeln!(out, "{},{}", cells.join(","), classes[*c]);
    }
    Ok(out)
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    let csv = generate_csv(spec)?;
    read_csv(csv.as_bytes(), &spec.load_options())
}
