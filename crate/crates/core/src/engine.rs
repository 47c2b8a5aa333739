//! Convenience wrapper tying a [`MiningState`] to optional tuple retention
//! and periodic full rebuilds.

use crate::error::{Error, Result};
use crate::incremental::{update_states, UpdateReport};
use crate::oracle::{compare_states, rebuild, DriftReport};
use crate::relation::{encode_batch_with, Batch, Dictionary, Relation, Schema, DEFAULT_NULL_TOKEN};
use crate::state::{init_states, MiningState};

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub log_base: f64,
    /// Keep every appended tuple so the state can be audited or rebuilt.
    pub retain_history: bool,
    /// Recompute from scratch after every `k` appends; 0 disables.
    pub rebuild_every: u64,
    pub null_token: String,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            log_base: 2.0,
            retain_history: false,
            rebuild_every: 0,
            null_token: DEFAULT_NULL_TOKEN.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    state: MiningState,
    history: Option<Relation>,
    options: EngineOptions,
}

impl Engine {
    pub fn init<R, S>(schema: Schema, rows: &[R], options: EngineOptions) -> Result<Self>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut dict = Dictionary::new(schema.arity());
        let batch = encode_batch_with(&schema, &mut dict, rows, &options.null_token)?;
        let state = init_states(&batch, schema, dict, options.log_base)?;
        let history = if options.retain_history || options.rebuild_every > 0 {
            let mut rel = Relation::new();
            rel.push(&batch)?;
            Some(rel)
        } else {
            None
        };
        Ok(Self {
            state,
            history,
            options,
        })
    }

    /// Resumes from a saved state. `history` must hold every tuple the state
    /// has seen when rebuilds are enabled.
    pub fn resume(
        state: MiningState,
        history: Option<Relation>,
        options: EngineOptions,
    ) -> Result<Self> {
        if options.rebuild_every > 0 && history.is_none() {
            return Err(Error::InvalidArgument(
                "periodic rebuilds need the retained history".into(),
            ));
        }
        Ok(Self {
            state,
            history,
            options,
        })
    }

    pub fn state(&self) -> &MiningState {
        &self.state
    }

    pub fn history(&self) -> Option<&Relation> {
        self.history.as_ref()
    }

    pub fn into_state(self) -> MiningState {
        self.state
    }

    pub fn encode<R, S>(&mut self, rows: &[R]) -> Result<Batch>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let null = self.options.null_token.clone();
        self.state.encode(rows, &null)
    }

    pub fn append_rows<R, S>(&mut self, rows: &[R]) -> Result<UpdateReport>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let batch = self.encode(rows)?;
        self.append(&batch)
    }

    pub fn append(&mut self, batch: &Batch) -> Result<UpdateReport> {
        let report = update_states(&mut self.state, batch)?;
        if let Some(rel) = &mut self.history {
            rel.push(batch)?;
        }
        let k = self.options.rebuild_every;
        let appends = self.state.batch_count() - 1;
        if k > 0 && appends.is_multiple_of(k) {
            let rel = self
                .history
                .as_ref()
                .expect("history retained when rebuilding");
            self.state = rebuild(&self.state, rel)?;
        }
        Ok(report)
    }

    /// Compares the maintained state against a scratch recomputation.
    pub fn verify(&self, tol: f64) -> Result<DriftReport> {
        let rel = self.history.as_ref().ok_or_else(|| {
            Error::InvalidArgument("no retained history to verify against".into())
        })?;
        compare_states(&self.state, &rebuild(&self.state, rel)?, tol)
    }
}
