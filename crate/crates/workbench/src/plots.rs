//! Deterministic SVG plots built from the files of a finished run tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use lexcom_core::agents::Speaker;
use lexcom_core::metrics::ProductionRecord;
use lexcom_core::stats::{adaptation_observations, fit_adaptation_slope, SlopeFit, SlopeObservation};
use serde::{Deserialize, Serialize};

use crate::dataset::{read_csv, read_productions};
use crate::error::{create_dir, write_file, write_json, Result, WorkbenchError};
use crate::experiment::{run_dir, AGGREGATE_DIR, PLOTS_DIR, SUBSETS};
use crate::manifest::ExperimentManifest;
use crate::pca::pca_project;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 4000;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Observed range widened by 5% of its span on each side.
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
    Some((lo - 0.05 * span, hi + 0.05 * span))
}

/// Data-to-pixel mapping of one plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    /// Inverse of `px`.
    pub fn data_x(&self, px: f64) -> f64 {
        self.x.0 + (px - LEFT) / (WIDTH - LEFT - RIGHT) * (self.x.1 - self.x.0)
    }

    /// Inverse of `py`.
    pub fn data_y(&self, py: f64) -> f64 {
        self.y.0 + (HEIGHT - BOTTOM - py) / (HEIGHT - TOP - BOTTOM) * (self.y.1 - self.y.0)
    }
}

fn open_svg(title: &str, frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}">"#,
        frame.x.0, frame.x.1, frame.y.0, frame.y.1
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect class="plot-area" x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for k in 0..=4 {
        let fx = frame.x.0 + (frame.x.1 - frame.x.0) * k as f64 / 4.0;
        let fy = frame.y.0 + (frame.y.1 - frame.y.0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            frame.px(fx),
            y1 + 15.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            frame.py(fy) + 3.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(s: &mut String, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT + 10.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 8.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}" font-size="10">{}</text>"#, x + 14.0, escape(label));
    }
}

// ---------------------------------------------------------------------------
// Curves

/// One aggregated point of a curve: mean and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveStat {
    pub epoch: usize,
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

/// Accuracy against epoch, one series per pipeline, with interval bands.
pub fn curve_svg(title: &str, metric: &str, series: &[(String, Vec<CurveStat>)]) -> Option<String> {
    let points = series.iter().flat_map(|(_, v)| v);
    let frame = Frame {
        x: padded_range(points.clone().map(|p| p.epoch as f64))?,
        y: padded_range(points.flat_map(|p| [p.low, p.high]))?,
    };
    let mut s = open_svg(title, &frame, "epoch", metric);
    let mut entries = Vec::new();
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut band = String::new();
        for p in pts {
            let _ = write!(band, "{:.2},{:.2} ", frame.px(p.epoch as f64), frame.py(p.high));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", frame.px(p.epoch as f64), frame.py(p.low));
        }
        let _ = writeln!(
            s,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> =
            pts.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.epoch as f64), frame.py(p.mean))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            escape(name),
            line.join(" ")
        );
        entries.push((name.clone(), color));
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Some(s)
}

// ---------------------------------------------------------------------------
// Scatter

/// Informativeness against ease, points colored by seed, with the fitted line
/// `fit.predict` drawn across the observed ease range.
pub fn scatter_svg(title: &str, obs: &[SlopeObservation], fit: &SlopeFit) -> Option<String> {
    let (e_lo, e_hi) =
        obs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.ease), hi.max(o.ease)));
    if e_lo > e_hi {
        return None;
    }
    let line = [(e_lo, fit.predict(e_lo)), (e_hi, fit.predict(e_hi))];
    let frame = Frame {
        x: padded_range(obs.iter().map(|o| o.ease))?,
        y: padded_range(obs.iter().map(|o| o.informativeness).chain(line.iter().map(|p| p.1)))?,
    };
    let mut s = open_svg(title, &frame, "context ease", "word informativeness");
    let seeds: Vec<u64> = {
        let mut v: Vec<u64> = obs.iter().map(|o| o.seed).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let stride = obs.len().div_ceil(MAX_POINTS).max(1);
    for o in obs.iter().step_by(stride) {
        let k = seeds.binary_search(&o.seed).unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="1.5" fill="{}" fill-opacity="0.4"/>"#,
            frame.px(o.ease),
            frame.py(o.informativeness),
            PALETTE[k % PALETTE.len()]
        );
    }
    // Full precision so the drawn slope can be checked against the fit.
    let _ = writeln!(
        s,
        r#"<line class="fit" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="2"/>"#,
        frame.px(line[0].0),
        frame.py(line[0].1),
        frame.px(line[1].0),
        frame.py(line[1].1)
    );
    let entries: Vec<(String, &str)> =
        seeds.iter().enumerate().map(|(k, s)| (format!("seed {s}"), PALETTE[k % PALETTE.len()])).collect();
    legend(&mut s, &entries);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10">beta = {:.3e} (SE {:.2e}, p {:.3})</text>"#,
        LEFT + 5.0,
        TOP + 14.0,
        fit.beta,
        fit.std_error,
        fit.p_value
    );
    s.push_str("</svg>\n");
    Some(s)
}

// ---------------------------------------------------------------------------
// Bars

/// Grouped bars: one group per pipeline, one bar per subset, with interval whiskers.
pub fn bars_svg(title: &str, groups: &[(String, Vec<(String, CurveStat)>)]) -> Option<String> {
    let values = groups.iter().flat_map(|(_, b)| b.iter().map(|(_, s)| s.high));
    let top = padded_range(values.chain([0.0]))?.1;
    let frame = Frame { x: (0.0, groups.len().max(1) as f64), y: (0.0, top) };
    let mut s = open_svg(title, &frame, "pipeline", "distinct words");
    let subsets: Vec<String> = {
        let mut v: Vec<String> = Vec::new();
        for (_, bars) in groups {
            for (name, _) in bars {
                if !v.contains(name) {
                    v.push(name.clone());
                }
            }
        }
        v
    };
    let width = 0.8 / subsets.len().max(1) as f64;
    for (g, (pipeline, bars)) in groups.iter().enumerate() {
        for (name, stat) in bars {
            let k = subsets.iter().position(|x| x == name).unwrap_or(0);
            let x0 = g as f64 + 0.1 + width * k as f64;
            let (px0, px1) = (frame.px(x0), frame.px(x0 + width));
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-group="{}" data-subset="{}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                escape(pipeline),
                escape(name),
                px0,
                frame.py(stat.mean),
                px1 - px0,
                frame.py(0.0) - frame.py(stat.mean),
                PALETTE[k % PALETTE.len()]
            );
            let xm = (px0 + px1) / 2.0;
            let _ = writeln!(
                s,
                r#"<line x1="{xm:.2}" y1="{:.2}" x2="{xm:.2}" y2="{:.2}" stroke="black"/>"#,
                frame.py(stat.low),
                frame.py(stat.high)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            frame.px(g as f64 + 0.5),
            HEIGHT - BOTTOM + 28.0,
            escape(pipeline)
        );
    }
    let entries: Vec<(String, &str)> =
        subsets.iter().enumerate().map(|(k, n)| (n.clone(), PALETTE[k % PALETTE.len()])).collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Some(s)
}

// ---------------------------------------------------------------------------
// PCA

/// Word embeddings projected on the principal plane of the first set, with
/// an arrow from each word's first position to its second when given.
pub fn pca_svg(
    title: &str,
    words: &[String],
    first: &ndarray::Array2<f64>,
    second: Option<&ndarray::Array2<f64>>,
) -> Option<String> {
    let p = pca_project(first)?;
    let a: Vec<[f64; 2]> = p.coords.clone();
    let b: Option<Vec<[f64; 2]>> =
        second.map(|m| m.rows().into_iter().map(|r| p.project(r.as_slice().unwrap_or(&r.to_vec()))).collect());
    let all = a.iter().chain(b.iter().flatten());
    let frame = Frame { x: padded_range(all.clone().map(|c| c[0]))?, y: padded_range(all.map(|c| c[1]))? };
    let mut s = open_svg(title, &frame, "PC1", "PC2");
    for (i, w) in words.iter().enumerate() {
        let (x, y) = (frame.px(a[i][0]), frame.py(a[i][1]));
        if let Some(b) = &b {
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-width="0.8"/>"##,
                frame.px(b[i][0]),
                frame.py(b[i][1])
            );
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                frame.px(b[i][0]),
                frame.py(b[i][1]),
                PALETTE[1]
            );
        }
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, PALETTE[0]);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="8">{}</text>"#, x + 4.0, y - 3.0, escape(w));
    }
    let mut entries = vec![("after SL".to_string(), PALETTE[0])];
    if b.is_some() {
        entries.push(("final".to_string(), PALETTE[1]));
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Some(s)
}

// ---------------------------------------------------------------------------
// Emission

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlotIndex {
    pub written: Vec<String>,
    /// Plot name and why it could not be drawn.
    pub missing: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    pipeline: String,
    phase: String,
    epoch: usize,
    split: String,
    metric: String,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Debug, Deserialize)]
struct DiversityCsv {
    pipeline: String,
    stage: String,
    subset: String,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
}

fn load_speaker(path: &Path) -> Result<(Speaker, Vec<String>)> {
    let file = std::fs::File::open(path).map_err(|e| WorkbenchError::Data(format!("{}: {e}", path.display())))?;
    let ckpt = lexcom_core::nn::Checkpoint::read_from(std::io::BufReader::new(file))
        .map_err(|e| WorkbenchError::Data(format!("{}: {e}", path.display())))?;
    let (speaker, vocab, _) = Speaker::from_checkpoint(&ckpt)?;
    Ok((speaker, vocab.words().to_vec()))
}

/// Write every plot the run tree supports; unavailable plots are listed in `plots/index.json`.
pub fn emit_plots(m: &ExperimentManifest, out: &Path) -> Result<PlotIndex> {
    let dir = out.join(PLOTS_DIR);
    create_dir(&dir)?;
    let mut index = PlotIndex::default();
    let put = |name: String, svg: Result<Option<String>>, index: &mut PlotIndex| -> Result<()> {
        match svg {
            Ok(Some(text)) => {
                write_file(&dir.join(&name), text)?;
                index.written.push(name);
            }
            Ok(None) => index.missing.push((name, "no data".into())),
            Err(e) => index.missing.push((name, e.to_string())),
        }
        Ok(())
    };
    let names: Vec<String> = m.pipeline_configs().into_iter().map(|p| p.name).collect();

    let curves: Result<Vec<CurveRow>> = read_csv(&out.join(AGGREGATE_DIR).join("curves_aggregate.csv"));
    for (phase, split, metric) in
        [("sl", "test", "acc_spk"), ("sl", "test", "acc_lst"), ("sl", "test", "acc_comm"), ("rl", "eval", "acc_comm")]
    {
        let name = format!("curve_{phase}_{metric}.svg");
        let svg = curves.as_ref().map_err(|e| WorkbenchError::Data(e.to_string())).map(|rows| {
            let mut series: Vec<(String, Vec<CurveStat>)> = Vec::new();
            for p in &names {
                let pts: Vec<CurveStat> = rows
                    .iter()
                    .filter(|r| &r.pipeline == p && r.phase == phase && r.split == split && r.metric == metric)
                    .map(|r| CurveStat { epoch: r.epoch, mean: r.mean, low: r.ci_low, high: r.ci_high })
                    .collect();
                if !pts.is_empty() {
                    series.push((p.clone(), pts));
                }
            }
            curve_svg(&format!("{phase} {metric} ({split}), mean and 95% CI"), metric, &series)
        });
        put(name, svg, &mut index)?;
    }

    for p in &names {
        let name = format!("scatter_{p}.svg");
        let svg = (|| -> Result<Option<String>> {
            let mut records: Vec<ProductionRecord> = Vec::new();
            for &seed in &m.seeds {
                let path = run_dir(out, p, seed).join("productions.csv");
                if path.is_file() {
                    records.extend(read_productions(&path)?);
                }
            }
            let obs = adaptation_observations(&records);
            let fit = fit_adaptation_slope(&records).map_err(|e| WorkbenchError::Data(e.to_string()))?;
            Ok(scatter_svg(&format!("{p}: informativeness vs ease"), &obs, &fit))
        })();
        put(name, svg, &mut index)?;
    }

    let diversity: Result<Vec<DiversityCsv>> = read_csv(&out.join(AGGREGATE_DIR).join("diversity.csv"));
    let svg = diversity.map(|rows| {
        let mut groups: BTreeMap<usize, (String, Vec<(String, CurveStat)>)> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.stage == "final") {
            let Some(g) = names.iter().position(|n| n == &r.pipeline) else { continue };
            let entry = groups.entry(g).or_insert_with(|| (r.pipeline.clone(), Vec::new()));
            entry.1.push((r.subset.clone(), CurveStat { epoch: 0, mean: r.mean, low: r.ci_low, high: r.ci_high }));
        }
        for (_, bars) in groups.values_mut() {
            bars.sort_by_key(|(s, _)| SUBSETS.iter().position(|x| x == s));
        }
        bars_svg("Lexical diversity by subset (final), mean and 95% CI", &groups.into_values().collect::<Vec<_>>())
    });
    put("diversity.svg".into(), svg, &mut index)?;

    let first_seed = m.seeds[0];
    for (spec, p) in m.pipelines.iter().zip(&names) {
        let name = format!("pca_{p}_seed_{first_seed}.svg");
        let svg = (|| -> Result<Option<String>> {
            let ck = run_dir(out, p, first_seed).join("checkpoints");
            let (before, words) = load_speaker(&ck.join("speaker_after_sl.ckpt"))?;
            let after = if spec.rl_context_aware.is_some() {
                Some(load_speaker(&ck.join("speaker_final.ckpt"))?.0.word_embeddings())
            } else {
                None
            };
            Ok(pca_svg(
                &format!("{p}: speaker word embeddings (seed {first_seed})"),
                &words,
                &before.word_embeddings(),
                after.as_ref(),
            ))
        })();
        put(name, svg, &mut index)?;
    }
    write_json(&dir.join("index.json"), &index)?;
    Ok(index)
}
