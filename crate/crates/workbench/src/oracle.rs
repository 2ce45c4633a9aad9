//! Synthetic two-layer color lexicon that stands in for the human corpus.
//!
//! CIELAB (restricted to the sRGB gamut) is partitioned by k-means into basic
//! cells seeded at focal colors, and each basic cell is split again into fine
//! cells. The oracle speaker uses a basic term unless a distractor shares the
//! target's basic cell, in which case it switches to the fine term; with
//! probability `noise` it uses the other layer. Rounds the oracle listener
//! (nearest word prototype) gets wrong are discarded, mirroring a corpus of
//! successful single-word rounds.

use lexcom_core::color::{lab_euclidean, LabColor};
use lexcom_core::context::{random_lab, ColorContext};
use lexcom_core::Vocabulary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Focal points of the eleven basic terms, approximate CIELAB.
pub const BASIC_ANCHORS: [(&str, [f64; 3]); 11] = [
    ("black", [12.0, 0.0, 0.0]),
    ("white", [95.0, 0.0, 0.0]),
    ("gray", [55.0, 0.0, 0.0]),
    ("red", [45.0, 65.0, 45.0]),
    ("green", [55.0, -55.0, 40.0]),
    ("yellow", [90.0, -5.0, 80.0]),
    ("blue", [35.0, 20.0, -65.0]),
    ("brown", [35.0, 20.0, 35.0]),
    ("purple", [35.0, 50.0, -40.0]),
    ("pink", [75.0, 35.0, 5.0]),
    ("orange", [65.0, 40.0, 65.0]),
];

pub const DEFAULT_SAMPLES: usize = 20_000;
pub const DEFAULT_NOISE: f64 = 0.1;
const KMEANS_ITERS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub centroid: LabColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLanguage {
    pub basic: Vec<Cell>,
    /// `fine[i]` partitions basic cell `i`.
    pub fine: Vec<Vec<Cell>>,
    pub noise: f64,
}

fn nearest(centroids: &[LabColor], c: LabColor) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &m) in centroids.iter().enumerate() {
        let d = lab_euclidean(m, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Lloyd iterations from fixed initial centroids; empty clusters keep their centroid.
fn kmeans(points: &[LabColor], mut centroids: Vec<LabColor>) -> Vec<LabColor> {
    for _ in 0..KMEANS_ITERS {
        let mut sums = vec![[0.0f64; 4]; centroids.len()];
        for &p in points {
            let k = nearest(&centroids, p);
            sums[k][0] += p.l;
            sums[k][1] += p.a;
            sums[k][2] += p.b;
            sums[k][3] += 1.0;
        }
        for (c, s) in centroids.iter_mut().zip(&sums) {
            if s[3] > 0.0 {
                *c = LabColor::new(s[0] / s[3], s[1] / s[3], s[2] / s[3]);
            }
        }
    }
    centroids
}

/// Two seeds straddling the centroid along the coordinate of largest spread.
fn split_seeds(points: &[LabColor], centroid: LabColor) -> Vec<LabColor> {
    let n = points.len().max(1) as f64;
    let var = points.iter().fold([0.0f64; 3], |acc, p| {
        let d = [p.l - centroid.l, p.a - centroid.a, p.b - centroid.b];
        [acc[0] + d[0] * d[0], acc[1] + d[1] * d[1], acc[2] + d[2] * d[2]]
    });
    let axis = (0..3).max_by(|&i, &j| var[i].total_cmp(&var[j])).expect("three axes");
    let sd = (var[axis] / n).sqrt().max(1.0);
    let mut lo = centroid.to_array();
    let mut hi = lo;
    lo[axis] -= sd / 2.0;
    hi[axis] += sd / 2.0;
    vec![LabColor::new(lo[0], lo[1], lo[2]), LabColor::new(hi[0], hi[1], hi[2])]
}

impl OracleLanguage {
    pub fn build(seed: u64, samples: usize, noise: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<LabColor> = (0..samples).map(|_| random_lab(&mut rng)).collect();
        let anchors: Vec<LabColor> = BASIC_ANCHORS.iter().map(|(_, v)| LabColor::new(v[0], v[1], v[2])).collect();
        let centroids = kmeans(&points, anchors);
        let mut members = vec![Vec::new(); centroids.len()];
        for &p in &points {
            members[nearest(&centroids, p)].push(p);
        }
        let basic: Vec<Cell> = BASIC_ANCHORS
            .iter()
            .zip(&centroids)
            .map(|((name, _), &centroid)| Cell { name: name.to_string(), centroid })
            .collect();
        let fine = basic
            .iter()
            .zip(&members)
            .map(|(cell, pts)| {
                let mut sub = kmeans(pts, split_seeds(pts, cell.centroid));
                // Lighter half first so names are stable.
                sub.sort_by(|x, y| x.l.total_cmp(&y.l).then(x.a.total_cmp(&y.a)));
                sub.iter()
                    .enumerate()
                    .map(|(k, &centroid)| Cell { name: format!("{}{}", cell.name, k + 1), centroid })
                    .collect()
            })
            .collect();
        Self { basic, fine, noise }
    }

    pub fn basic_cell(&self, c: LabColor) -> usize {
        nearest(&self.basic.iter().map(|b| b.centroid).collect::<Vec<_>>(), c)
    }

    pub fn fine_cell(&self, c: LabColor) -> (usize, usize) {
        let b = self.basic_cell(c);
        (b, nearest(&self.fine[b].iter().map(|f| f.centroid).collect::<Vec<_>>(), c))
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let words = self.basic.iter().chain(self.fine.iter().flatten()).map(|c| c.name.as_str());
        Vocabulary::from_tokens(words)
    }

    pub fn prototype(&self, word: &str) -> Option<LabColor> {
        self.basic.iter().chain(self.fine.iter().flatten()).find(|c| c.name == word).map(|c| c.centroid)
    }

    /// The noise-free choice of layer for this context.
    pub fn needs_fine_term(&self, ctx: &ColorContext) -> bool {
        let b = self.basic_cell(ctx.target);
        ctx.distractors.iter().any(|&d| self.basic_cell(d) == b)
    }

    pub fn name<R: Rng + ?Sized>(&self, ctx: &ColorContext, rng: &mut R) -> String {
        let mut fine = self.needs_fine_term(ctx);
        if rng.random::<f64>() < self.noise {
            fine = !fine;
        }
        let (b, f) = self.fine_cell(ctx.target);
        if fine {
            self.fine[b][f].name.clone()
        } else {
            self.basic[b].name.clone()
        }
    }

    /// Candidate nearest the word's prototype; ties go to the lowest index.
    pub fn listener_choice(&self, word: &str, candidates: &[LabColor; 3]) -> Option<usize> {
        let p = self.prototype(word)?;
        Some(nearest(candidates, p))
    }

    /// Name every context and keep the rounds the oracle listener solves.
    pub fn label<R: Rng + ?Sized>(&self, contexts: &[ColorContext], rng: &mut R) -> Vec<(ColorContext, String)> {
        contexts
            .iter()
            .filter_map(|c| {
                let word = self.name(c, rng);
                (self.listener_choice(&word, &c.colors()) == Some(0)).then_some((*c, word))
            })
            .collect()
    }
}
