//! Canonical on-disk formats: Lab-coordinate context CSV and production CSV.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the exact values and everything downstream of it.

use std::path::Path;

use lexcom_core::color::LabColor;
use lexcom_core::context::{context_ease, ColorContext, Condition};
use lexcom_core::metrics::ProductionRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

/// A context with an optional word; unlabeled contexts have an empty word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRow {
    pub id: u64,
    pub condition: Condition,
    pub target_l: f64,
    pub target_a: f64,
    pub target_b: f64,
    pub d1_l: f64,
    pub d1_a: f64,
    pub d1_b: f64,
    pub d2_l: f64,
    pub d2_a: f64,
    pub d2_b: f64,
    pub word: String,
}

impl ContextRow {
    pub fn new(ctx: &ColorContext, word: Option<&str>) -> Self {
        let [t, d1, d2] = ctx.colors();
        Self {
            id: ctx.id,
            condition: ctx.condition,
            target_l: t.l,
            target_a: t.a,
            target_b: t.b,
            d1_l: d1.l,
            d1_a: d1.a,
            d1_b: d1.b,
            d2_l: d2.l,
            d2_a: d2.a,
            d2_b: d2.b,
            word: word.unwrap_or_default().to_string(),
        }
    }

    pub fn context(&self) -> ColorContext {
        ColorContext {
            id: self.id,
            target: LabColor::new(self.target_l, self.target_a, self.target_b),
            distractors: [
                LabColor::new(self.d1_l, self.d1_a, self.d1_b),
                LabColor::new(self.d2_l, self.d2_a, self.d2_b),
            ],
            condition: self.condition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionRow {
    pub seed: u64,
    pub context_id: u64,
    pub condition: Condition,
    pub target_l: f64,
    pub target_a: f64,
    pub target_b: f64,
    pub ease: f64,
    pub word: String,
}

impl From<&ProductionRecord> for ProductionRow {
    fn from(r: &ProductionRecord) -> Self {
        Self {
            seed: r.seed,
            context_id: r.context_id,
            condition: r.condition,
            target_l: r.target.l,
            target_a: r.target.a,
            target_b: r.target.b,
            ease: r.ease,
            word: r.word.clone(),
        }
    }
}

impl From<ProductionRow> for ProductionRecord {
    fn from(r: ProductionRow) -> Self {
        ProductionRecord {
            seed: r.seed,
            context_id: r.context_id,
            target: LabColor::new(r.target_l, r.target_a, r.target_b),
            word: r.word,
            ease: r.ease,
            condition: r.condition,
        }
    }
}

pub fn productions_from_labels<'a>(
    labeled: impl IntoIterator<Item = (&'a ColorContext, &'a str)>,
    seed: u64,
) -> Vec<ProductionRecord> {
    labeled
        .into_iter()
        .map(|(c, w)| ProductionRecord {
            seed,
            context_id: c.id,
            target: c.target,
            word: w.to_string(),
            ease: context_ease(c),
            condition: c.condition,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let out = |e: csv::Error| WorkbenchError::Run(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(out)?;
    for row in rows {
        w.serialize(row).map_err(out)?;
    }
    w.flush().map_err(|e| WorkbenchError::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let bad = |e: csv::Error| WorkbenchError::Data(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(bad)
}

pub fn write_contexts<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (&'a ColorContext, Option<&'a str>)>,
) -> Result<()> {
    write_csv(path, rows.into_iter().map(|(c, w)| ContextRow::new(c, w)))
}

pub fn read_contexts(path: &Path) -> Result<Vec<ContextRow>> {
    read_csv(path)
}

pub fn write_productions(path: &Path, records: &[ProductionRecord]) -> Result<()> {
    write_csv(path, records.iter().map(ProductionRow::from))
}

pub fn read_productions(path: &Path) -> Result<Vec<ProductionRecord>> {
    Ok(read_csv::<ProductionRow>(path)?.into_iter().map(ProductionRecord::from).collect())
}
