//! Deterministic synthetic categorical relations with optional planted
//! value-level dependencies.
//!
//! Generator definition (stable across versions and languages):
//!
//! * PRNG: ChaCha20 with a 256-bit key holding the seed as a little-endian
//!   `u64` in bytes 0..8 and zeros elsewhere; 64-bit word counter starting
//!   at 0. Each output `u64` is two consecutive 32-bit words, low word first.
//! * Column `k` draws from stream id `k`; plant `p` draws from stream id
//!   `arity + p`.
//! * A uniform value in `0..card` is `(u64 · card) >> 64`.
//! * A plant fires when `(u64 >> 11) · 2^-53 < strength`.
//! * Per row: every column draws one value, then every plant (in order)
//!   draws one decision. Plant `p` sets its target to its target value when
//!   its source currently holds the source value and the decision fires.
//! * Value `k` of any attribute is labelled `v{k}`.

use std::io::Write;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSpec {
    pub name: String,
    pub cardinality: u32,
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, cardinality: u32) -> Self {
        Self {
            name: name.into(),
            cardinality,
        }
    }
}

/// Whenever `A_source = source_value`, force `A_target = target_value` with
/// probability `strength`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub source_attr: usize,
    pub source_value: u32,
    pub target_attr: usize,
    pub target_value: u32,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub rows: u64,
    pub attributes: Vec<AttributeSpec>,
    pub planted: Vec<Plant>,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if self.attributes.is_empty() {
            return bad("no attributes".into());
        }
        for (k, a) in self.attributes.iter().enumerate() {
            if a.name.is_empty() {
                return bad(format!("attribute {k} has an empty name"));
            }
            if self.attributes[..k].iter().any(|b| b.name == a.name) {
                return bad(format!("duplicate attribute `{}`", a.name));
            }
            if a.cardinality < 2 {
                return bad(format!("attribute `{}` needs cardinality >= 2", a.name));
            }
        }
        let arity = self.attributes.len();
        for (p, plant) in self.planted.iter().enumerate() {
            if plant.source_attr >= arity || plant.target_attr >= arity {
                return bad(format!("plant {p} references a missing attribute"));
            }
            if plant.source_attr == plant.target_attr {
                return bad(format!(
                    "plant {p} uses the same attribute as source and target"
                ));
            }
            if plant.source_value >= self.attributes[plant.source_attr].cardinality
                || plant.target_value >= self.attributes[plant.target_attr].cardinality
            {
                return bad(format!(
                    "plant {p} references a value outside the cardinality"
                ));
            }
            if !(plant.strength > 0.0 && plant.strength <= 1.0) {
                return bad(format!(
                    "plant {p} strength {} is outside (0, 1]",
                    plant.strength
                ));
            }
        }
        Ok(())
    }
}

pub fn value_label(k: u32) -> String {
    format!("v{k}")
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(id);
    rng
}

#[inline]
fn uniform(rng: &mut ChaCha20Rng, card: u32) -> u32 {
    ((rng.next_u64() as u128 * card as u128) >> 64) as u32
}

#[inline]
fn unit(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Row stream for one config. Yields exactly `config.rows` rows.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GenConfig,
    columns: Vec<ChaCha20Rng>,
    plants: Vec<ChaCha20Rng>,
    emitted: u64,
}

impl Generator {
    pub fn new(config: GenConfig) -> Result<Self> {
        config.validate()?;
        let arity = config.attributes.len() as u64;
        let columns = (0..arity).map(|k| stream(config.seed, k)).collect();
        let plants = (0..config.planted.len() as u64)
            .map(|p| stream(config.seed, arity + p))
            .collect();
        Ok(Self {
            config,
            columns,
            plants,
            emitted: 0,
        })
    }

    pub fn config(&self) -> &GenConfig {
        &self.config
    }

    pub fn header(&self) -> Vec<String> {
        self.config
            .attributes
            .iter()
            .map(|a| a.name.clone())
            .collect()
    }

    /// Draws the next row as value indices, ignoring the row limit.
    pub fn next_codes(&mut self) -> Vec<u32> {
        let mut row: Vec<u32> = self
            .columns
            .iter_mut()
            .zip(&self.config.attributes)
            .map(|(rng, a)| uniform(rng, a.cardinality))
            .collect();
        for (plant, rng) in self.config.planted.iter().zip(&mut self.plants) {
            let fire = unit(rng) < plant.strength;
            if fire && row[plant.source_attr] == plant.source_value {
                row[plant.target_attr] = plant.target_value;
            }
        }
        self.emitted += 1;
        row
    }

    /// Draws `count` labelled rows, ignoring the row limit.
    pub fn take_rows(&mut self, count: usize) -> Vec<Vec<String>> {
        (0..count)
            .map(|_| self.next_codes().into_iter().map(value_label).collect())
            .collect()
    }

    /// Comment line recording the generator definition and config.
    pub fn provenance(&self) -> String {
        let attrs: Vec<String> = self
            .config
            .attributes
            .iter()
            .map(|a| format!("{}:{}", a.name, a.cardinality))
            .collect();
        let plants: Vec<String> = self
            .config
            .planted
            .iter()
            .map(|p| {
                format!(
                    "{}={}->{}={}@{}",
                    p.source_attr, p.source_value, p.target_attr, p.target_value, p.strength
                )
            })
            .collect();
        format!(
            "# igm-gen prng=chacha20 key=seed-u64-le stream=column|arity+plant \
             uniform=(u64*card)>>64 bernoulli=(u64>>11)*2^-53<strength \
             seed={} rows={} attrs={} plants={}",
            self.config.seed,
            self.config.rows,
            attrs.join(","),
            if plants.is_empty() {
                "none".into()
            } else {
                plants.join(",")
            }
        )
    }
}

impl Iterator for Generator {
    type Item = Vec<String>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted >= self.config.rows {
            return None;
        }
        Some(self.next_codes().into_iter().map(value_label).collect())
    }
}

/// Generates the full relation as CSV: a provenance comment, the header and
/// `rows` data rows.
pub fn write_csv<W: Write>(config: GenConfig, mut writer: W) -> Result<()> {
    let gen = Generator::new(config)?;
    writeln!(writer, "{}", gen.provenance())?;
    let header = gen.header();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(&header)?;
    for row in gen {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
