//! Sidecar directory of applied batches, one canonical CSV per batch, named
//! by the batch counter after it was applied.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use igmine::ingest::{read_table, write_table, CsvOptions};
use igmine::{encode_batch_with, Batch, MiningState, Relation};

pub fn reset(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for path in list(dir)? {
        fs::remove_file(&path).with_context(|| format!("cannot remove {}", path.display()))?;
    }
    Ok(())
}

pub fn write_batch(dir: &Path, index: u64, state: &MiningState, batch: &Batch) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let rows = batch.decode(state.dictionary())?;
    let path = dir.join(format!("{index:06}.csv"));
    let file =
        fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    write_table(file, state.schema().attributes(), &rows)?;
    Ok(())
}

fn list(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn has_batches(dir: &Path) -> bool {
    dir.is_dir() && list(dir).is_ok_and(|l| !l.is_empty())
}

/// Re-encodes every spooled batch against the state's dictionary. Fails if a
/// spooled value is unknown to the state.
pub fn read_relation(dir: &Path, state: &MiningState) -> Result<Relation> {
    let mut dict = state.dictionary().clone();
    let mut relation = Relation::new();
    for path in list(dir)? {
        let file =
            fs::File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
        let table = read_table(file, CsvOptions::default())
            .with_context(|| format!("cannot read {}", path.display()))?;
        if table.header != state.schema().attributes() {
            bail!(
                "{}: columns differ from the state attributes",
                path.display()
            );
        }
        let batch = encode_batch_with(state.schema(), &mut dict, &table.rows, "")
            .with_context(|| format!("cannot encode {}", path.display()))?;
        relation.push(&batch)?;
    }
    if dict != *state.dictionary() {
        bail!("spooled batches contain values the state has never seen");
    }
    Ok(relation)
}
