//! Renderers for ranked and banded cells.

use std::io::Write;

use anyhow::Result;
use igmine::{IgCell, MiningState};

fn names<'a>(state: &'a MiningState, c: &IgCell) -> (&'a str, &'a str, &'a str) {
    let schema = state.schema();
    let value = state
        .dictionary()
        .value(c.cond_attr, c.cond_value)
        .expect("cells only reference interned values");
    (schema.name(c.target), schema.name(c.cond_attr), value)
}

/// 17 significant digits, parses back to the same bits.
fn exact(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

pub fn cells_table<W: Write>(out: &mut W, state: &MiningState, cells: &[IgCell]) -> Result<()> {
    let rows: Vec<(String, String, String, String)> = cells
        .iter()
        .enumerate()
        .map(|(rank, c)| {
            let (t, a, v) = names(state, c);
            (
                (rank + 1).to_string(),
                t.to_string(),
                format!("{a}={v}"),
                format!("{:.7}", c.ig),
            )
        })
        .collect();
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(4);
    let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(6);
    let w2 = rows.iter().map(|r| r.2.len()).max().unwrap_or(0).max(9);
    writeln!(
        out,
        "{:>w0$}  {:<w1$}  {:<w2$}  {:>10}",
        "rank", "target", "condition", "ig"
    )?;
    for (rank, target, cond, ig) in rows {
        writeln!(out, "{rank:>w0$}  {target:<w1$}  {cond:<w2$}  {ig:>10}")?;
    }
    Ok(())
}

pub fn cells_json<W: Write>(out: &mut W, state: &MiningState, cells: &[IgCell]) -> Result<()> {
    write!(out, "[")?;
    for (k, c) in cells.iter().enumerate() {
        let (t, a, v) = names(state, c);
        let sep = if k == 0 { "" } else { "," };
        write!(
            out,
            "{sep}\n  {{\"target\": {}, \"cond_attr\": {}, \"cond_value\": {}, \"ig\": {}}}",
            json_str(t),
            json_str(a),
            json_str(v),
            exact(c.ig)
        )?;
    }
    writeln!(out, "\n]")?;
    Ok(())
}

pub fn cells_csv<W: Write>(out: &mut W, state: &MiningState, cells: &[IgCell]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["target", "cond_attr", "cond_value", "ig"])?;
    for c in cells {
        let (t, a, v) = names(state, c);
        wtr.write_record([t, a, v, &exact(c.ig)])?;
    }
    wtr.flush()?;
    Ok(())
}

fn band(c: &IgCell) -> &'static str {
    c.band.map_or("", |b| b.as_str())
}

pub fn heatmap_csv<W: Write>(out: &mut W, state: &MiningState, cells: &[IgCell]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["cond_attr", "cond_value", "ig", "band"])?;
    for c in cells {
        let (_, a, v) = names(state, c);
        wtr.write_record([a, v, &exact(c.ig), band(c)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn heatmap_json<W: Write>(out: &mut W, state: &MiningState, cells: &[IgCell]) -> Result<()> {
    write!(out, "[")?;
    for (k, c) in cells.iter().enumerate() {
        let (_, a, v) = names(state, c);
        let sep = if k == 0 { "" } else { "," };
        write!(
            out,
            "{sep}\n  {{\"cond_attr\": {}, \"cond_value\": {}, \"ig\": {}, \"band\": {}}}",
            json_str(a),
            json_str(v),
            exact(c.ig),
            json_str(band(c))
        )?;
    }
    writeln!(out, "\n]")?;
    Ok(())
}
