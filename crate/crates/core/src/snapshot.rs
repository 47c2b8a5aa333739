//! Canonical JSON snapshots of a [`MiningState`].
//!
//! Layout (version 1), keys in sorted order:
//!
//! ```text
//! { "attributes": [{"name": .., "values": [raw, ..]}, ..],
//!   "batch_count": u64,
//!   "conditional_entropy": {"i|j": [[y, H], ..], ..},
//!   "joints": {"i,j": [[x, y, count], ..], ..},      i < j
//!   "log_base": f64,
//!   "marginal_entropy": [H, ..],
//!   "marginals": [[count per value id], ..],
//!   "n": u64,
//!   "version": 1 }
//! ```
//!
//! Floats are written with 17 significant digits so they parse back to the
//! same bits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::relation::{Dictionary, Schema, ValueId};
use crate::state::{
    attribute_pairs, EntropyCache, FrequencyState, JointTable, LogBase, MiningState,
};

pub const SNAPSHOT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(transparent)]
struct Float(f64);

impl Serialize for Float {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!(
                "non-finite value {}",
                self.0
            )));
        }
        let raw =
            RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeDoc {
    name: String,
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    attributes: Vec<AttributeDoc>,
    batch_count: u64,
    conditional_entropy: BTreeMap<String, Vec<(u32, Float)>>,
    joints: BTreeMap<String, Vec<(u32, u32, u64)>>,
    log_base: Float,
    marginal_entropy: Vec<Float>,
    marginals: Vec<Vec<u64>>,
    n: u64,
    version: u64,
}

/// Writes the canonical snapshot document, newline-terminated.
pub fn save<W: Write>(state: &MiningState, mut writer: W) -> Result<()> {
    let doc = to_doc(state);
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn to_string(state: &MiningState) -> Result<String> {
    let mut buf = Vec::new();
    save(state, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Saves to `path` through a sibling temporary file and a rename, so readers
/// never observe a partially written snapshot.
pub fn save_to_path(state: &MiningState, path: &Path) -> Result<()> {
    let text = to_string(state)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other("snapshot path has no file name")))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load<R: Read>(mut reader: R) -> Result<MiningState> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    from_str(&text)
}

pub fn load_from_path(path: &Path) -> Result<MiningState> {
    load(fs::File::open(path)?)
}

pub fn from_str(text: &str) -> Result<MiningState> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(SNAPSHOT_VERSION) => {}
        Some(v) => return Err(Error::VersionMismatch(v)),
        None => return Err(Error::CorruptSnapshot("missing version".into())),
    }
    let doc: SnapshotDoc =
        serde_json::from_value(value).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    from_doc(doc).map_err(Error::CorruptSnapshot)
}

fn to_doc(state: &MiningState) -> SnapshotDoc {
    let arity = state.arity();
    let freq = &state.freq;
    let attributes = (0..arity)
        .map(|attr| AttributeDoc {
            name: state.schema.name(attr).to_string(),
            // Values interned but not yet applied are not part of the state.
            values: state.dictionary.values(attr)[..freq.marginals[attr].len()].to_vec(),
        })
        .collect();
    let joints = attribute_pairs(arity)
        .map(|(i, j)| {
            let cells = freq
                .joint_table(i, j)
                .iter()
                .map(|(x, y, c)| (x.0, y.0, c))
                .collect();
            (format!("{i},{j}"), cells)
        })
        .collect();
    let mut conditional_entropy = BTreeMap::new();
    for i in 0..arity {
        for j in (0..arity).filter(|&j| j != i) {
            let col = state
                .entropy
                .conditional_column(i, j)
                .iter()
                .enumerate()
                .map(|(y, &h)| (y as u32, Float(h)))
                .collect();
            conditional_entropy.insert(format!("{i}|{j}"), col);
        }
    }
    SnapshotDoc {
        attributes,
        batch_count: state.batch_count,
        conditional_entropy,
        joints,
        log_base: Float(state.log_base.value()),
        marginal_entropy: state.entropy.marginal.iter().map(|&h| Float(h)).collect(),
        marginals: freq.marginals.clone(),
        n: freq.n,
        version: SNAPSHOT_VERSION,
    }
}

fn from_doc(doc: SnapshotDoc) -> std::result::Result<MiningState, String> {
    let schema =
        Schema::new(doc.attributes.iter().map(|a| a.name.clone())).map_err(|e| e.to_string())?;
    let arity = schema.arity();
    let dictionary =
        Dictionary::from_values(doc.attributes.into_iter().map(|a| a.values).collect())
            .map_err(|e| e.to_string())?;
    let log_base = LogBase::new(doc.log_base.0).map_err(|e| e.to_string())?;
    if doc.batch_count == 0 {
        return Err("batch_count is zero".into());
    }
    if doc.n == 0 {
        return Err("n is zero".into());
    }
    if doc.marginals.len() != arity {
        return Err(format!(
            "{} marginal tables for {arity} attributes",
            doc.marginals.len()
        ));
    }
    for (attr, m) in doc.marginals.iter().enumerate() {
        if m.len() != dictionary.domain_size(attr) {
            return Err(format!(
                "attribute {attr} has {} counts for {} values",
                m.len(),
                dictionary.domain_size(attr)
            ));
        }
    }

    let mut joints_doc = doc.joints;
    let mut joints = Vec::with_capacity(arity * arity.saturating_sub(1) / 2);
    for (i, j) in attribute_pairs(arity) {
        let key = format!("{i},{j}");
        let cells = joints_doc
            .remove(&key)
            .ok_or_else(|| format!("missing joint table {key}"))?;
        let mut table = JointTable::default();
        let mut last = None;
        for (x, y, c) in cells {
            if last.is_some_and(|prev| prev >= (x, y)) {
                return Err(format!(
                    "joint table {key} is not strictly sorted at ({x},{y})"
                ));
            }
            last = Some((x, y));
            if x as usize >= doc.marginals[i].len() || y as usize >= doc.marginals[j].len() {
                return Err(format!("joint table {key} cell ({x},{y}) is out of domain"));
            }
            table.cells.insert((ValueId(x), ValueId(y)), c);
        }
        joints.push(table);
    }
    if let Some(extra) = joints_doc.keys().next() {
        return Err(format!("unexpected joint table {extra}"));
    }
    let freq = FrequencyState {
        n: doc.n,
        marginals: doc.marginals,
        joints,
    };
    freq.check_consistency()?;

    if doc.marginal_entropy.len() != arity {
        return Err(format!(
            "{} marginal entropies for {arity} attributes",
            doc.marginal_entropy.len()
        ));
    }
    let marginal: Vec<f64> = doc.marginal_entropy.iter().map(|f| f.0).collect();
    if let Some(i) = marginal.iter().position(|h| !h.is_finite()) {
        return Err(format!("marginal entropy {i} is not finite"));
    }
    let mut cond_doc = doc.conditional_entropy;
    let mut conditional = vec![Vec::new(); arity * arity];
    for i in 0..arity {
        for j in (0..arity).filter(|&j| j != i) {
            let key = format!("{i}|{j}");
            let entries = cond_doc
                .remove(&key)
                .ok_or_else(|| format!("missing conditional entropies {key}"))?;
            if entries.len() != freq.marginals[j].len() {
                return Err(format!(
                    "conditional entropies {key} has {} entries, expected {}",
                    entries.len(),
                    freq.marginals[j].len()
                ));
            }
            let mut col = Vec::with_capacity(entries.len());
            for (k, (y, h)) in entries.into_iter().enumerate() {
                if y as usize != k {
                    return Err(format!(
                        "conditional entropies {key}: entry {k} has value id {y}"
                    ));
                }
                if !h.0.is_finite() {
                    return Err(format!("conditional entropy {key} at {y} is not finite"));
                }
                col.push(h.0);
            }
            conditional[i * arity + j] = col;
        }
    }
    if let Some(extra) = cond_doc.keys().next() {
        return Err(format!("unexpected conditional entropies {extra}"));
    }

    Ok(MiningState {
        schema,
        dictionary,
        freq,
        entropy: EntropyCache {
            marginal,
            conditional,
        },
        log_base,
        batch_count: doc.batch_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::compare_states;
    use crate::relation::encode_batch;
    use crate::state::init_states;

    fn demo() -> MiningState {
        let schema = Schema::new(["A", "B"]).unwrap();
        let mut dict = Dictionary::new(2);
        let rows = [["a", "y"], ["a", "y"], ["b", "y"], ["b", "z"]];
        let batch = encode_batch(&schema, &mut dict, &rows).unwrap();
        init_states(&batch, schema, dict, 2.0).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let s = demo();
        let text = to_string(&s).unwrap();
        assert!(text.ends_with('\n'));
        let back = from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(compare_states(&s, &back, 0.0).unwrap().passed());
        assert_eq!(to_string(&back).unwrap(), text);
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let text = to_string(&demo()).unwrap();
        assert!(text.contains("9.1829583405448956e-1"), "{text}");
    }

    #[test]
    fn version_mismatch() {
        let text = to_string(&demo())
            .unwrap()
            .replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(from_str(&text), Err(Error::VersionMismatch(2))));
    }

    #[test]
    fn tampered_count_is_corrupt() {
        let text = to_string(&demo()).unwrap().replace("\"n\": 4", "\"n\": 5");
        match from_str(&text) {
            Err(Error::CorruptSnapshot(msg)) => assert!(msg.contains("sum to 4"), "{msg}"),
            other => panic!("expected CorruptSnapshot, got {other:?}"),
        }
    }

    #[test]
    fn unwritable_destination_is_io_error() {
        let err = save_to_path(&demo(), Path::new("/nonexistent-dir/x/state.json")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn atomic_save_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        save_to_path(&demo(), &path).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("state.json")]);
        assert_eq!(load_from_path(&path).unwrap(), demo());
    }
}
