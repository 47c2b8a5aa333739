//! Relational data model: schema, per-attribute value interning and
//! column-encoded batches of appended tuples.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Raw value substituted for missing or empty cells.
pub const DEFAULT_NULL_TOKEN: &str = "__NULL__";

/// Dense identifier of a value within one attribute's domain.
///
/// Ids are assigned in order of first appearance, starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueId(pub u32);

impl ValueId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Ordered attribute names of a relation. Fixed once created.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    attributes: Vec<String>,
}

impl Schema {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let attributes: Vec<String> = names.into_iter().map(Into::into).collect();
        if attributes.is_empty() {
            return Err(Error::InvalidSchema("no attributes".into()));
        }
        for (k, name) in attributes.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "attribute {k} has an empty name"
                )));
            }
            if attributes[..k].contains(name) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate attribute `{name}`"
                )));
            }
        }
        Ok(Self { attributes })
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn name(&self, attr: usize) -> &str {
        &self.attributes[attr]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }
}

#[derive(Debug, Clone, Default)]
struct ValueTable {
    values: Vec<String>,
    ids: HashMap<String, ValueId>,
}

/// Per-attribute interned value tables, the observed domain of each attribute.
#[derive(Debug, Clone)]
pub struct Dictionary {
    tables: Vec<ValueTable>,
}

impl PartialEq for Dictionary {
    fn eq(&self, other: &Self) -> bool {
        self.tables.len() == other.tables.len()
            && self
                .tables
                .iter()
                .zip(&other.tables)
                .all(|(a, b)| a.values == b.values)
    }
}

impl Eq for Dictionary {}

impl Dictionary {
    pub fn new(arity: usize) -> Self {
        Self {
            tables: vec![ValueTable::default(); arity],
        }
    }

    /// Rebuilds a dictionary from value lists already in id order.
    pub fn from_values(values: Vec<Vec<String>>) -> Result<Self> {
        let mut tables = Vec::with_capacity(values.len());
        for (attr, values) in values.into_iter().enumerate() {
            let mut ids = HashMap::with_capacity(values.len());
            for (k, v) in values.iter().enumerate() {
                if ids.insert(v.clone(), ValueId(k as u32)).is_some() {
                    return Err(Error::InvalidSchema(format!(
                        "attribute {attr} lists value `{v}` twice"
                    )));
                }
            }
            tables.push(ValueTable { values, ids });
        }
        Ok(Self { tables })
    }

    pub fn arity(&self) -> usize {
        self.tables.len()
    }

    /// Returns the id of `raw` for `attr`, assigning the next free id on first sight.
    pub fn intern(&mut self, attr: usize, raw: &str) -> ValueId {
        let table = &mut self.tables[attr];
        if let Some(&id) = table.ids.get(raw) {
            return id;
        }
        let id = ValueId(table.values.len() as u32);
        table.values.push(raw.to_string());
        table.ids.insert(raw.to_string(), id);
        id
    }

    pub fn lookup(&self, attr: usize, raw: &str) -> Option<ValueId> {
        self.tables[attr].ids.get(raw).copied()
    }

    pub fn value(&self, attr: usize, id: ValueId) -> Option<&str> {
        self.tables[attr].values.get(id.index()).map(String::as_str)
    }

    pub fn values(&self, attr: usize) -> &[String] {
        &self.tables[attr].values
    }

    pub fn domain_size(&self, attr: usize) -> usize {
        self.tables[attr].values.len()
    }
}

/// Free-function form of [`Dictionary::intern`].
pub fn intern_value(dict: &mut Dictionary, attr: usize, raw: &str) -> ValueId {
    dict.intern(attr, raw)
}

/// One appended transaction, stored column-wise as value ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    columns: Vec<Vec<ValueId>>,
    rows: usize,
}

impl Batch {
    /// Builds a batch from encoded columns. All columns must share one
    /// non-zero length.
    pub fn from_columns(columns: Vec<Vec<ValueId>>) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if rows == 0 {
            return Err(Error::EmptyBatch);
        }
        if let Some(bad) = columns.iter().position(|c| c.len() != rows) {
            return Err(Error::InvalidBatch(format!(
                "column {bad} has {} rows, expected {rows}",
                columns[bad].len()
            )));
        }
        Ok(Self { columns, rows })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, attr: usize) -> &[ValueId] {
        &self.columns[attr]
    }

    pub fn columns(&self) -> &[Vec<ValueId>] {
        &self.columns
    }

    /// Maps every id back to its raw string.
    pub fn decode(&self, dict: &Dictionary) -> Result<Vec<Vec<String>>> {
        (0..self.rows)
            .map(|r| {
                self.columns
                    .iter()
                    .enumerate()
                    .map(|(attr, col)| {
                        dict.value(attr, col[r])
                            .map(str::to_string)
                            .ok_or(Error::UnknownValue {
                                attr,
                                value: col[r].0,
                            })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Encodes string rows against `dict` using the default null token.
pub fn encode_batch<R, S>(schema: &Schema, dict: &mut Dictionary, rows: &[R]) -> Result<Batch>
where
    R: AsRef<[S]>,
    S: AsRef<str>,
{
    encode_batch_with(schema, dict, rows, DEFAULT_NULL_TOKEN)
}

/// Encodes string rows against `dict`; empty cells are interned as `null_token`.
///
/// Arity is checked for every row before any value is interned, so a
/// rejected batch leaves the dictionary untouched.
pub fn encode_batch_with<R, S>(
    schema: &Schema,
    dict: &mut Dictionary,
    rows: &[R],
    null_token: &str,
) -> Result<Batch>
where
    R: AsRef<[S]>,
    S: AsRef<str>,
{
    if rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if dict.arity() != schema.arity() {
        return Err(Error::SchemaMismatch(format!(
            "dictionary has {} attributes, schema has {}",
            dict.arity(),
            schema.arity()
        )));
    }
    if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != schema.arity()) {
        return Err(Error::ArityMismatch(bad));
    }
    let mut columns = vec![Vec::with_capacity(rows.len()); schema.arity()];
    for row in rows {
        for (attr, cell) in row.as_ref().iter().enumerate() {
            let raw = match cell.as_ref() {
                "" => null_token,
                s => s,
            };
            columns[attr].push(dict.intern(attr, raw));
        }
    }
    Ok(Batch {
        columns,
        rows: rows.len(),
    })
}

/// Every tuple appended so far, retained for scratch recomputation.
#[derive(Debug, Clone, Default)]
pub struct Relation {
    columns: Vec<Vec<ValueId>>,
}

impl Relation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, batch: &Batch) -> Result<()> {
        if self.columns.is_empty() {
            self.columns = vec![Vec::new(); batch.arity()];
        } else if self.columns.len() != batch.arity() {
            return Err(Error::SchemaMismatch(format!(
                "relation has {} attributes, batch has {}",
                self.columns.len(),
                batch.arity()
            )));
        }
        for (dst, src) in self.columns.iter_mut().zip(batch.columns()) {
            dst.extend_from_slice(src);
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn columns(&self) -> &[Vec<ValueId>] {
        &self.columns
    }
}
