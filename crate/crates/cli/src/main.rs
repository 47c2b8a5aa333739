use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{debug, info};

use igmine::harness::{self, BenchConfig, BenchMode};
use igmine::ingest::{read_table, CsvOptions, Table};
use igmine::synth::{self, AttributeSpec, GenConfig, Plant};
use igmine::{
    compare_states, heatmap_bands, rebuild, snapshot, top_k, update_states, Dictionary, Error,
    MiningState, Schema, DEFAULT_NULL_TOKEN,
};

mod output;
mod spool;

/// Marks an error as a usage problem (exit code 2).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "igm",
    version,
    about = "Incremental information gain mining over categorical CSV streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CsvArgs {
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Raw value used for empty cells.
    #[arg(long, default_value = DEFAULT_NULL_TOKEN)]
    null_token: String,
}

impl CsvArgs {
    fn options(&self) -> Result<CsvOptions> {
        if !self.delimiter.is_ascii() {
            return Err(usage("delimiter must be a single ASCII character"));
        }
        Ok(CsvOptions {
            delimiter: self.delimiter as u8,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a state snapshot from an initial CSV relation.
    Init {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        log_base: f64,
        /// Spool the tuples for later `verify` or rebuilds.
        #[arg(long)]
        keep_raw: bool,
        /// Spool directory (default: `<state>.raw`).
        #[arg(long)]
        raw_dir: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Append a CSV batch to an existing state.
    Append {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        batch: PathBuf,
        /// Recompute from the spooled tuples every N appends (0 = never).
        #[arg(long, default_value_t = 0)]
        rebuild_every: u64,
        #[arg(long)]
        keep_raw: bool,
        #[arg(long)]
        raw_dir: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Rank cells by information gain.
    Query {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        top_k: u64,
        #[arg(long, value_enum, default_value_t = QueryFormat::Table)]
        format: QueryFormat,
    },
    /// Every cell of one target with its percentile band.
    Heatmap {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FileFormat::Csv)]
        format: FileFormat,
    },
    /// Audit the state against a scratch recomputation over spooled tuples.
    Verify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Time incremental maintenance or full recomputation on a synthetic stream.
    Bench {
        #[arg(long, default_value_t = 1000)]
        rows_init: usize,
        #[arg(long, default_value_t = 100)]
        batch_size: usize,
        #[arg(long, default_value_t = 200)]
        batches: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Incremental)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Runs per batch; the fastest is reported.
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        /// Instead of a stream, time `--batches` batches of each listed size
        /// against one fixed state.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic categorical relation as CSV.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        rows: u64,
        /// Attribute as NAME:CARDINALITY; repeat for each attribute.
        #[arg(long = "attr", required = true)]
        attrs: Vec<String>,
        /// Planted dependency SRC=VALUE->TGT=VALUE@STRENGTH, values as `vK` or `K`.
        #[arg(long = "plant")]
        plants: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryFormat {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Incremental,
    Overhaul,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IGM_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Init {
            input,
            state,
            log_base,
            keep_raw,
            raw_dir,
            csv,
        } => cmd_init(
            &input,
            &state,
            log_base,
            keep_raw.then(|| spool_dir(&state, raw_dir)),
            &csv,
        ),
        Command::Append {
            state,
            batch,
            rebuild_every,
            keep_raw,
            raw_dir,
            csv,
        } => {
            let spool = (keep_raw || rebuild_every > 0).then(|| spool_dir(&state, raw_dir));
            cmd_append(&state, &batch, rebuild_every, spool, &csv)
        }
        Command::Query {
            state,
            target,
            top_k,
            format,
        } => cmd_query(&state, target.as_deref(), top_k as usize, format),
        Command::Heatmap {
            state,
            target,
            out,
            format,
        } => cmd_heatmap(&state, &target, out.as_deref(), format),
        Command::Verify { state, raw, tol } => {
            let raw = spool_dir(&state, raw);
            cmd_verify(&state, &raw, tol)
        }
        Command::Bench {
            rows_init,
            batch_size,
            batches,
            mode,
            seed,
            repeats,
            sweep,
            out,
        } => {
            let config = BenchConfig {
                rows_init,
                batch_size,
                batches,
                mode: match mode {
                    ModeArg::Incremental => BenchMode::Incremental,
                    ModeArg::Overhaul => BenchMode::Overhaul,
                },
                seed,
                repeats,
                ..Default::default()
            };
            if sweep.is_empty() {
                cmd_bench(&config, out.as_deref())
            } else {
                cmd_sweep(&config, &sweep, out.as_deref())
            }
        }
        Command::Gen {
            seed,
            rows,
            attrs,
            plants,
            out,
        } => cmd_gen(seed, rows, &attrs, &plants, out.as_deref()),
    }
}

fn spool_dir(state: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let mut name = state.as_os_str().to_os_string();
        name.push(".raw");
        PathBuf::from(name)
    })
}

fn read_csv(path: &Path, options: CsvOptions) -> Result<Table> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_table(io::BufReader::new(file), options).map_err(|e| match e {
        Error::ArityMismatch(row) => anyhow!(
            "{}: data row {} has the wrong number of fields",
            path.display(),
            row + 1
        ),
        other => anyhow!(other).context(format!("cannot read {}", path.display())),
    })
}

fn load_state(path: &Path) -> Result<MiningState> {
    snapshot::load_from_path(path).with_context(|| format!("cannot load state {}", path.display()))
}

fn encode_error(path: &Path, err: Error) -> anyhow::Error {
    match err {
        Error::ArityMismatch(row) => anyhow!(
            "{}: data row {} has the wrong number of fields",
            path.display(),
            row + 1
        ),
        Error::EmptyBatch => anyhow!("{}: EmptyBatch: no data rows", path.display()),
        other => anyhow!(other),
    }
}

fn cmd_init(
    input: &Path,
    state_path: &Path,
    log_base: f64,
    spool: Option<PathBuf>,
    csv: &CsvArgs,
) -> Result<ExitCode> {
    if igmine::LogBase::new(log_base).is_err() {
        return Err(usage(format!("invalid --log-base {log_base}")));
    }
    let table = read_csv(input, csv.options()?)?;
    let schema = Schema::new(table.header.clone())?;
    let mut dict = Dictionary::new(schema.arity());
    let batch = igmine::encode_batch_with(&schema, &mut dict, &table.rows, &csv.null_token)
        .map_err(|e| encode_error(input, e))?;
    let state = igmine::init_states(&batch, schema, dict, log_base)?;
    if let Some(dir) = spool {
        spool::reset(&dir)?;
        spool::write_batch(&dir, state.batch_count(), &state, &batch)?;
    }
    snapshot::save_to_path(&state, state_path)
        .with_context(|| format!("cannot write {}", state_path.display()))?;

    let out = io::stdout();
    let mut out = out.lock();
    writeln!(out, "n = {}", state.n())?;
    for (attr, name) in state.schema().attributes().iter().enumerate() {
        writeln!(
            out,
            "{name}: {} values, H = {:.7}",
            state.frequencies().marginal(attr).len(),
            state.marginal_entropy(attr)
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_append(
    state_path: &Path,
    batch_path: &Path,
    rebuild_every: u64,
    spool: Option<PathBuf>,
    csv: &CsvArgs,
) -> Result<ExitCode> {
    let mut state = load_state(state_path)?;
    let table = read_csv(batch_path, csv.options()?)?;
    if table.header != state.schema().attributes() {
        bail!(
            "SchemaMismatch: batch columns [{}] differ from state attributes [{}]",
            table.header.join(","),
            state.schema().attributes().join(",")
        );
    }
    let batch = state
        .encode(&table.rows, &csv.null_token)
        .map_err(|e| encode_error(batch_path, e))?;
    let report = update_states(&mut state, &batch)?;
    debug!("append touched {} cells", report.touches);

    if let Some(dir) = &spool {
        spool::write_batch(dir, state.batch_count(), &state, &batch)?;
    }
    let appends = state.batch_count() - 1;
    if rebuild_every > 0 && appends.is_multiple_of(rebuild_every) {
        let dir = spool.as_deref().expect("spool enabled with rebuilds");
        let relation = spool::read_relation(dir, &state)?;
        if relation.rows() as u64 != state.n() {
            bail!(
                "cannot rebuild: {} holds {} tuples but the state has seen {}; \
                 use --keep-raw from init onwards",
                dir.display(),
                relation.rows(),
                state.n()
            );
        }
        state = rebuild(&state, &relation)?;
        info!("rebuilt state from {} spooled tuples", relation.rows());
    }
    snapshot::save_to_path(&state, state_path)
        .with_context(|| format!("cannot write {}", state_path.display()))?;
    println!(
        "n = {} (+{}), batches = {}",
        state.n(),
        report.rows,
        state.batch_count()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_query(
    state_path: &Path,
    target: Option<&str>,
    k: usize,
    format: QueryFormat,
) -> Result<ExitCode> {
    let state = load_state(state_path)?;
    let target = target.map(|t| state.schema().index_of(t)).transpose()?;
    let cells = top_k(&state, target, k)?;
    let out = io::stdout();
    let mut out = out.lock();
    match format {
        QueryFormat::Table => output::cells_table(&mut out, &state, &cells)?,
        QueryFormat::Json => output::cells_json(&mut out, &state, &cells)?,
        QueryFormat::Csv => output::cells_csv(&mut out, &state, &cells)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_heatmap(
    state_path: &Path,
    target: &str,
    out: Option<&Path>,
    format: FileFormat,
) -> Result<ExitCode> {
    let state = load_state(state_path)?;
    let target = state.schema().index_of(target)?;
    let cells = heatmap_bands(&state, target)?;
    let mut buf = Vec::new();
    match format {
        FileFormat::Csv => output::heatmap_csv(&mut buf, &state, &cells)?,
        FileFormat::Json => output::heatmap_json(&mut buf, &state, &cells)?,
    }
    write_output(out, &buf)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(state_path: &Path, raw: &Path, tol: f64) -> Result<ExitCode> {
    let state = load_state(state_path)?;
    if !spool::has_batches(raw) {
        return Err(usage(format!("no spooled batches in {}", raw.display())));
    }
    let scratch = match spool::read_relation(raw, &state).and_then(|rel| Ok(rebuild(&state, &rel)?))
    {
        Ok(scratch) => scratch,
        Err(e) => {
            println!("status: FAIL\ncounts: MISMATCH ({e:#})");
            return Ok(ExitCode::from(1));
        }
    };
    let report = compare_states(&state, &scratch, tol)?;
    println!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_bench(config: &BenchConfig, out: Option<&Path>) -> Result<ExitCode> {
    let records = harness::run_bench(config).map_err(|e| match e {
        Error::BadConfig(m) => usage(m),
        other => anyhow!(other),
    })?;
    let mut buf = Vec::new();
    harness::write_records(&records, &mut buf)?;
    write_output(out, &buf)?;
    let summary =
        harness::summarize(&records).ok_or_else(|| anyhow!("not enough batches to fit"))?;
    let text = format!(
        "mode = {}\nmean batch seconds = {:e}\nslope = {:e} s/row\nrelative slope per 10k rows = {:.6}\nlast/first = {:.3}\n",
        config.mode,
        summary.mean_seconds,
        summary.slope,
        summary.relative_slope_per_10k,
        summary.last_over_first
    );
    if out.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(config: &BenchConfig, sizes: &[usize], out: Option<&Path>) -> Result<ExitCode> {
    let points = harness::batch_size_sweep(
        config.seed,
        config.rows_init,
        sizes,
        config.batches,
        config.repeats,
    )
    .map_err(|e| match e {
        Error::BadConfig(m) => usage(m),
        other => anyhow!(other),
    })?;
    let mut buf = String::from("batch_size,mean_seconds\n");
    for (size, secs) in &points {
        buf.push_str(&format!("{size},{secs:e}\n"));
    }
    write_output(out, buf.as_bytes())?;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    if let Some(fit) = harness::linear_fit(&xs, &ys) {
        let text = format!(
            "slope = {:e} s/row, r^2 = {:.4}\n",
            fit.slope, fit.r_squared
        );
        if out.is_some() {
            print!("{text}");
        } else {
            eprint!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_attr(spec: &str) -> Result<AttributeSpec> {
    let (name, card) = spec
        .rsplit_once(':')
        .ok_or_else(|| usage(format!("attribute `{spec}` is not NAME:CARDINALITY")))?;
    let card = card
        .parse()
        .map_err(|_| usage(format!("attribute `{spec}` has a bad cardinality")))?;
    Ok(AttributeSpec::new(name, card))
}

fn parse_plant(spec: &str, attrs: &[AttributeSpec]) -> Result<Plant> {
    let bad = || {
        usage(format!(
            "plant `{spec}` is not SRC=VALUE->TGT=VALUE@STRENGTH"
        ))
    };
    let (lhs, strength) = spec.rsplit_once('@').ok_or_else(bad)?;
    let (src, tgt) = lhs.split_once("->").ok_or_else(bad)?;
    let side = |s: &str| -> Result<(usize, u32)> {
        let (name, value) = s.split_once('=').ok_or_else(bad)?;
        let attr = attrs
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| usage(format!("plant `{spec}` names unknown attribute `{name}`")))?;
        let value = value
            .strip_prefix('v')
            .unwrap_or(value)
            .parse()
            .map_err(|_| bad())?;
        Ok((attr, value))
    };
    let (source_attr, source_value) = side(src)?;
    let (target_attr, target_value) = side(tgt)?;
    Ok(Plant {
        source_attr,
        source_value,
        target_attr,
        target_value,
        strength: strength.parse().map_err(|_| bad())?,
    })
}

fn cmd_gen(
    seed: u64,
    rows: u64,
    attrs: &[String],
    plants: &[String],
    out: Option<&Path>,
) -> Result<ExitCode> {
    let attributes = attrs
        .iter()
        .map(|a| parse_attr(a))
        .collect::<Result<Vec<_>>>()?;
    let planted = plants
        .iter()
        .map(|p| parse_plant(p, &attributes))
        .collect::<Result<Vec<_>>>()?;
    let config = GenConfig {
        seed,
        rows,
        attributes,
        planted,
    };
    let mut buf = Vec::new();
    synth::write_csv(config, &mut buf).map_err(|e| match e {
        Error::BadConfig(m) => usage(m),
        other => anyhow!(other),
    })?;
    write_output(out, &buf)?;
    Ok(ExitCode::SUCCESS)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(bytes)?;
            lock.flush()?;
            Ok(())
        }
    }
}
