//! Timing harness comparing incremental maintenance with full recomputation
//! over a synthetic stream.
//!
//! Only state computation is timed. Rows are generated and encoded outside
//! the timed region, and each measurement is the minimum over `repeats` runs
//! of the same batch against a fresh copy of the pre-batch state (or, for
//! full recomputation, the relation prefix ending with that batch).

use std::fmt;
use std::hint::black_box;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::incremental::update_states;
use crate::relation::{encode_batch, Batch, Dictionary, Relation, Schema, ValueId};
use crate::state::{build_state, init_states, LogBase, MiningState};
use crate::synth::{AttributeSpec, GenConfig, Generator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Incremental,
    Overhaul,
}

impl BenchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMode::Incremental => "incremental",
            BenchMode::Overhaul => "overhaul",
        }
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "incremental" => Ok(BenchMode::Incremental),
            "overhaul" => Ok(BenchMode::Overhaul),
            other => Err(Error::InvalidArgument(format!(
                "unknown bench mode `{other}`"
            ))),
        }
    }
}

/// Six attributes of mixed cardinality.
pub fn default_attributes() -> Vec<AttributeSpec> {
    [("A", 3), ("B", 4), ("C", 6), ("D", 8), ("E", 10), ("F", 12)]
        .into_iter()
        .map(|(n, c)| AttributeSpec::new(n, c))
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub rows_init: usize,
    pub batch_size: usize,
    /// Batches appended; the first is a warm-up and is not reported.
    pub batches: usize,
    pub mode: BenchMode,
    pub seed: u64,
    pub repeats: usize,
    pub attributes: Vec<AttributeSpec>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            rows_init: 1000,
            batch_size: 100,
            batches: 200,
            mode: BenchMode::Incremental,
            seed: 0,
            repeats: 100,
            attributes: default_attributes(),
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.rows_init == 0 || self.batch_size == 0 || self.batches < 2 || self.repeats == 0 {
            return Err(Error::BadConfig(
                "rows-init, batch-size and repeats must be positive and batches at least 2".into(),
            ));
        }
        Ok(())
    }

    fn generator(&self) -> Result<Generator> {
        let total = self.rows_init + self.batches * self.batch_size;
        Generator::new(GenConfig {
            seed: self.seed,
            rows: total as u64,
            attributes: self.attributes.clone(),
            planted: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRecord {
    pub batch_index: usize,
    /// Relation size after the batch.
    pub total_rows: u64,
    pub mode: BenchMode,
    pub batch_seconds: f64,
}

fn initial_state(config: &BenchConfig, gen: &mut Generator) -> Result<(MiningState, Batch)> {
    let schema = Schema::new(gen.header())?;
    let mut dict = Dictionary::new(schema.arity());
    let rows = gen.take_rows(config.rows_init);
    let batch = encode_batch(&schema, &mut dict, &rows)?;
    Ok((init_states(&batch, schema, dict, 2.0)?, batch))
}

/// One batch of the stream with everything needed to time it in isolation.
struct Step {
    /// State before the batch (incremental mode).
    before: Option<MiningState>,
    batch: Batch,
    /// Dictionary after the batch (overhaul mode).
    dictionary: Dictionary,
    total_rows: u64,
}

fn time_step(
    step: &Step,
    mode: BenchMode,
    schema: &Schema,
    columns: &[Vec<ValueId>],
) -> Result<f64> {
    match mode {
        BenchMode::Incremental => {
            let mut s = step
                .before
                .clone()
                .expect("incremental steps keep their state");
            let start = Instant::now();
            update_states(black_box(&mut s), black_box(&step.batch))?;
            Ok(start.elapsed().as_secs_f64())
        }
        BenchMode::Overhaul => {
            let prefix: Vec<&[ValueId]> = columns
                .iter()
                .map(|c| &c[..step.total_rows as usize])
                .collect();
            let schema = schema.clone();
            let dict = step.dictionary.clone();
            let start = Instant::now();
            let s = build_state(black_box(&prefix), schema, dict, LogBase::new(2.0)?, 1)?;
            let secs = start.elapsed().as_secs_f64();
            black_box(s);
            Ok(secs)
        }
    }
}

/// Runs the benchmark and returns one record per reported batch.
///
/// The stream is first played once untimed to capture every batch. Timing
/// then makes `repeats` passes over all batches, each in a fresh shuffled
/// order, and keeps each batch's fastest run, so slow drift in machine speed
/// is spread over the whole stream instead of tracking relation size.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let mut gen = config.generator()?;
    let (mut state, first) = initial_state(config, &mut gen)?;
    let schema = state.schema().clone();
    let mut relation = Relation::new();
    relation.push(&first)?;
    drop(first);

    let mut steps = Vec::with_capacity(config.batches);
    for _ in 0..config.batches {
        let rows = gen.take_rows(config.batch_size);
        let batch = state.encode(&rows, crate::relation::DEFAULT_NULL_TOKEN)?;
        let before = (config.mode == BenchMode::Incremental).then(|| state.clone());
        update_states(&mut state, &batch)?;
        if config.mode == BenchMode::Overhaul {
            relation.push(&batch)?;
        }
        steps.push(Step {
            before,
            batch,
            dictionary: state.dictionary().clone(),
            total_rows: state.n(),
        });
    }

    let mut best = vec![f64::INFINITY; steps.len()];
    let mut order: Vec<usize> = (0..steps.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.repeats {
        order.shuffle(&mut rng);
        for &k in &order {
            let secs = time_step(&steps[k], config.mode, &schema, relation.columns())?;
            best[k] = best[k].min(secs);
        }
    }

    Ok(steps
        .iter()
        .zip(best)
        .enumerate()
        .skip(1)
        .map(|(index, (step, secs))| BenchRecord {
            batch_index: index,
            total_rows: step.total_rows,
            mode: config.mode,
            batch_seconds: secs,
        })
        .collect())
}

/// Mean incremental time per batch for each batch size, every batch applied
/// to a copy of one fixed state of `rows_init` tuples. Batches of all sizes
/// are timed in shuffled passes as in [`run_bench`].
pub fn batch_size_sweep(
    seed: u64,
    rows_init: usize,
    sizes: &[usize],
    batches_per_size: usize,
    repeats: usize,
) -> Result<Vec<(usize, f64)>> {
    if rows_init == 0 || batches_per_size == 0 || repeats == 0 || sizes.contains(&0) {
        return Err(Error::BadConfig("sweep parameters must be positive".into()));
    }
    let config = BenchConfig {
        rows_init,
        batch_size: 1,
        batches: 2,
        seed,
        ..Default::default()
    };
    let mut gen = config.generator()?;
    let (base, _) = initial_state(&config, &mut gen)?;
    let mut steps = Vec::with_capacity(sizes.len() * batches_per_size);
    for (slot, &size) in sizes.iter().enumerate() {
        for _ in 0..batches_per_size {
            let rows = gen.take_rows(size);
            let mut before = base.clone();
            let batch = before.encode(&rows, crate::relation::DEFAULT_NULL_TOKEN)?;
            steps.push((slot, before, batch));
        }
    }

    let mut best = vec![f64::INFINITY; steps.len()];
    let mut order: Vec<usize> = (0..steps.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..repeats {
        order.shuffle(&mut rng);
        for &k in &order {
            let (_, before, batch) = &steps[k];
            let mut s = before.clone();
            let start = Instant::now();
            update_states(black_box(&mut s), black_box(batch))?;
            best[k] = best[k].min(start.elapsed().as_secs_f64());
        }
    }

    let mut totals = vec![0.0; sizes.len()];
    for ((slot, _, _), secs) in steps.iter().zip(best) {
        totals[*slot] += secs;
    }
    Ok(sizes
        .iter()
        .zip(totals)
        .map(|(&size, total)| (size, total / batches_per_size as f64))
        .collect())
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Summary of a run: fitted slope of batch time against relation size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSummary {
    pub mean_seconds: f64,
    /// Seconds per tuple of relation size.
    pub slope: f64,
    /// Slope over 10,000 tuples as a fraction of the mean batch time.
    pub relative_slope_per_10k: f64,
    /// Last reported batch time over the first.
    pub last_over_first: f64,
}

pub fn summarize(records: &[BenchRecord]) -> Option<BenchSummary> {
    let xs: Vec<f64> = records.iter().map(|r| r.total_rows as f64).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.batch_seconds).collect();
    let fit = linear_fit(&xs, &ys)?;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Some(BenchSummary {
        mean_seconds: mean,
        slope: fit.slope,
        relative_slope_per_10k: fit.slope * 10_000.0 / mean,
        last_over_first: ys[ys.len() - 1] / ys[0],
    })
}

/// Writes `batch_index,total_rows,mode,batch_seconds`.
pub fn write_records<W: Write>(records: &[BenchRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["batch_index", "total_rows", "mode", "batch_seconds"])?;
    for r in records {
        wtr.write_record([
            r.batch_index.to_string(),
            r.total_rows.to_string(),
            r.mode.to_string(),
            format!("{:e}", r.batch_seconds),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
