//! Human corpus ingestion.
//!
//! Every input row ends up either accepted or in the rejects list with a
//! reason, so `accepted + rejected == input_rows` always holds.

use std::collections::BTreeSet;
use std::path::Path;

use lexcom_core::color::{hsl_to_lab, HslColor, LabColor};
use lexcom_core::context::{ColorContext, Condition, ConditionCounts};
use serde::{Deserialize, Serialize};

use crate::dataset::write_csv;
use crate::error::{Result, WorkbenchError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Lab,
    /// Hue in degrees, saturation and lightness in percent.
    Hsl,
}

/// Names of the CSV columns holding each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub color_space: ColorSpace,
    pub target: [String; 3],
    pub distractor1: [String; 3],
    pub distractor2: [String; 3],
    pub utterance: String,
    pub condition: String,
    /// Column saying whether the listener picked the target; rows that fail are rejected.
    pub outcome: Option<String>,
    /// Row identifier; defaults to the data row index.
    pub id: Option<String>,
}

fn triple(prefix: &str, suffixes: [&str; 3]) -> [String; 3] {
    suffixes.map(|s| format!("{prefix}{s}"))
}

impl Default for ColumnMap {
    /// The canonical Lab CSV layout.
    fn default() -> Self {
        Self {
            color_space: ColorSpace::Lab,
            target: triple("target_", ["l", "a", "b"]),
            distractor1: triple("d1_", ["l", "a", "b"]),
            distractor2: triple("d2_", ["l", "a", "b"]),
            utterance: "word".into(),
            condition: "condition".into(),
            outcome: None,
            id: Some("id".into()),
        }
    }
}

impl ColumnMap {
    /// Layout of the original English Colors corpus. In a successful round
    /// the clicked color is the target, so the click columns stand in for it.
    pub fn colors_corpus() -> Self {
        Self {
            color_space: ColorSpace::Hsl,
            target: triple("clickCol", ["H", "S", "L"]),
            distractor1: triple("alt1Col", ["H", "S", "L"]),
            distractor2: triple("alt2Col", ["H", "S", "L"]),
            utterance: "contents".into(),
            condition: "condition".into(),
            outcome: Some("outcome".into()),
            id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanTrialRow {
    pub context: ColorContext,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the input file, header included.
    pub line: u64,
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input_rows: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub far: usize,
    pub split: usize,
    pub close: usize,
    pub vocabulary_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub rows: Vec<HumanTrialRow>,
    pub rejects: Vec<RejectedRow>,
    pub report: IngestReport,
}

impl Ingested {
    pub fn vocabulary(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.word.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Lowercased single token, or the reason it is not one.
pub fn normalize_word(raw: &str) -> Result<String, String> {
    let w = raw.trim().to_lowercase();
    if w.is_empty() {
        Err("empty utterance".into())
    } else if w.split_whitespace().count() > 1 {
        Err(format!("multi-word utterance {w:?}"))
    } else {
        Ok(w)
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "correct" => Some(true),
        "false" | "0" | "no" | "incorrect" => Some(false),
        _ => None,
    }
}

struct Indices {
    colors: [[usize; 3]; 3],
    utterance: usize,
    condition: usize,
    outcome: Option<usize>,
    id: Option<usize>,
}

fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Indices> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| WorkbenchError::Config(format!("column {name:?} not found in header")))
    };
    let three =
        |names: &[String; 3]| -> Result<[usize; 3]> { Ok([find(&names[0])?, find(&names[1])?, find(&names[2])?]) };
    Ok(Indices {
        colors: [three(&map.target)?, three(&map.distractor1)?, three(&map.distractor2)?],
        utterance: find(&map.utterance)?,
        condition: find(&map.condition)?,
        outcome: map.outcome.as_deref().map(find).transpose()?,
        id: map.id.as_deref().map(find).transpose()?,
    })
}

fn field(rec: &csv::StringRecord, i: usize) -> Result<&str, String> {
    rec.get(i).ok_or_else(|| format!("missing field {}", i + 1))
}

fn number(rec: &csv::StringRecord, i: usize) -> Result<f64, String> {
    let s = field(rec, i)?.trim();
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("non-numeric color value {s:?}")),
    }
}

fn color(rec: &csv::StringRecord, idx: [usize; 3], space: ColorSpace) -> Result<LabColor, String> {
    let [x, y, z] = [number(rec, idx[0])?, number(rec, idx[1])?, number(rec, idx[2])?];
    match space {
        ColorSpace::Lab => {
            if !(0.0..=100.0).contains(&x) {
                return Err(format!("lightness {x} outside [0, 100]"));
            }
            Ok(LabColor::new(x, y, z))
        }
        ColorSpace::Hsl => {
            let h = if x == 360.0 { 0.0 } else { x };
            HslColor::new(h, y, z).and_then(hsl_to_lab).map_err(|e| e.to_string())
        }
    }
}

fn parse_row(rec: &csv::StringRecord, ix: &Indices, map: &ColumnMap, index: u64) -> Result<HumanTrialRow, String> {
    if let Some(o) = ix.outcome {
        match parse_bool(field(rec, o)?) {
            Some(true) => {}
            Some(false) => return Err("unsuccessful round".into()),
            None => return Err(format!("unreadable outcome {:?}", field(rec, o)?)),
        }
    }
    let word = normalize_word(field(rec, ix.utterance)?)?;
    let condition: Condition = field(rec, ix.condition)?.parse()?;
    let id = match ix.id {
        Some(i) => {
            field(rec, i)?.trim().parse::<u64>().map_err(|_| format!("bad id {:?}", field(rec, i).unwrap_or("")))?
        }
        None => index,
    };
    let [t, d1, d2] = [
        color(rec, ix.colors[0], map.color_space)?,
        color(rec, ix.colors[1], map.color_space)?,
        color(rec, ix.colors[2], map.color_space)?,
    ];
    Ok(HumanTrialRow { context: ColorContext { id, target: t, distractors: [d1, d2], condition }, word })
}

pub fn ingest_colors_csv(path: &Path, map: &ColumnMap) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| WorkbenchError::Data(format!("{}: {e}", path.display())))?;
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(WorkbenchError::Data(format!("{}: {e}", path.display()))),
    };
    let empty = headers.iter().all(|h| h.trim().is_empty());
    let indices = if empty { None } else { Some(resolve(&headers, map)?) };
    let mut rows = Vec::new();
    let mut rejects = Vec::new();
    let mut input_rows = 0usize;
    for (k, rec) in reader.records().enumerate() {
        input_rows += 1;
        let line = k as u64 + 2;
        let outcome = match (&rec, &indices) {
            (Err(e), _) => Err(format!("unreadable row: {e}")),
            (Ok(_), None) => Err("no header".to_string()),
            (Ok(r), Some(ix)) => parse_row(r, ix, map, k as u64),
        };
        match outcome {
            Ok(row) => rows.push(row),
            Err(reason) => {
                let raw = rec.map(|r| r.iter().collect::<Vec<_>>().join(",")).unwrap_or_default();
                rejects.push(RejectedRow { line, reason, raw });
            }
        }
    }
    let mut counts = ConditionCounts::default();
    for r in &rows {
        *counts.get_mut(r.context.condition) += 1;
    }
    let vocabulary_size = rows.iter().map(|r| r.word.as_str()).collect::<BTreeSet<_>>().len();
    let report = IngestReport {
        input_rows,
        accepted: rows.len(),
        rejected: rejects.len(),
        far: counts.far,
        split: counts.split,
        close: counts.close,
        vocabulary_size,
    };
    Ok(Ingested { rows, rejects, report })
}

pub fn write_rejects(path: &Path, rejects: &[RejectedRow]) -> Result<()> {
    if rejects.is_empty() {
        // Header only, so an empty rejects file is still a valid CSV.
        return crate::error::write_file(path, "line,reason,raw\n");
    }
    write_csv(path, rejects)
}
