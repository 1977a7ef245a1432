//! KMeans with k-means++ seeding, best-of-n restarts and elbow selection.
//!
//! Everything is sequential and seeded, so a given `(data, config)` always
//! produces bit-identical output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no input rows")]
    EmptyInput,
    #[error("{rows} rows cannot form {k} clusters")]
    TooFewRows { rows: usize, k: usize },
    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid elbow range [{k_min}, {k_max}] for {rows} rows")]
    InvalidRange { k_min: usize, k_max: usize, rows: usize },
}

/// Per-column z-score parameters (population stddev).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl Standardization {
    /// Zero-variance columns map to 0.
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(v, (m, s))| if *s == 0.0 { 0.0 } else { (v - m) / s })
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, ClusterError> {
    let first = rows.first().ok_or(ClusterError::EmptyInput)?;
    let d = first.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(ClusterError::RaggedRows { row: i, got: r.len(), expected: d });
        }
    }
    Ok(d)
}

pub fn standardize(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Standardization), ClusterError> {
    let d = check_rows(rows)?;
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let stddev: Vec<f64> = (0..d)
        .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let params = Standardization { mean, stddev };
    Ok((params.apply(rows), params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the total centroid shift (L2) drops below this.
    pub tol: f64,
    /// Restarts; run `i` is seeded with `seed + i`.
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { k: 3, seed: 42, max_iters: 300, tol: 1e-4, n_init: 10 }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.k == 0 {
            return Err(ClusterError::InvalidConfig("k must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(ClusterError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.n_init == 0 {
            return Err(ClusterError::InvalidConfig("n_init must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(ClusterError::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub iterations_run: usize,
    /// Set when the model was fitted on standardized data; new rows are
    /// transformed with it before assignment.
    pub standardization: Option<Standardization>,
}

impl KMeansModel {
    pub fn with_standardization(mut self, params: Standardization) -> Self {
        self.standardization = Some(params);
        self
    }

    /// Nearest centroid for an untransformed row.
    pub fn predict(&self, row: &[f64]) -> usize {
        match &self.standardization {
            Some(p) => nearest(&p.apply_row(row), &self.centroids).0,
            None => nearest(row, &self.centroids).0,
        }
    }
}

/// wcss after every assignment step of each restart.
pub type FitTrace = Vec<Vec<f64>>;

pub fn kmeans_fit(data: &[Vec<f64>], config: &KMeansConfig) -> Result<KMeansModel, ClusterError> {
    kmeans_fit_traced(data, config).map(|(model, _)| model)
}

pub fn kmeans_fit_traced(
    data: &[Vec<f64>],
    config: &KMeansConfig,
) -> Result<(KMeansModel, FitTrace), ClusterError> {
    config.validate()?;
    check_rows(data)?;
    if data.len() < config.k {
        return Err(ClusterError::TooFewRows { rows: data.len(), k: config.k });
    }

    let mut best: Option<LloydRun> = None;
    let mut trace = Vec::with_capacity(config.n_init);
    for run in 0..config.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(run as u64));
        let init = kmeans_plus_plus(data, config.k, &mut rng);
        let result = lloyd(data, init, config.max_iters, config.tol);
        trace.push(result.history.clone());
        if best.as_ref().map_or(true, |b| result.wcss < b.wcss) {
            best = Some(result);
        }
    }
    let best = best.expect("n_init >= 1");
    let (centroids, assignments) = relabel_by_first_appearance(best.centroids, best.assignments);
    let model = KMeansModel {
        k: config.k,
        seed: config.seed,
        centroids,
        assignments,
        wcss: best.wcss,
        iterations_run: best.iterations,
        standardization: None,
    };
    Ok((model, trace))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Recomputes the objective from centroids and assignments.
pub fn wcss(data: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    data.iter()
        .zip(assignments)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum()
}

fn kmeans_plus_plus(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = vec![data[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && *w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let centroid = data[pick].clone();
        for (p, d) in data.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &centroid));
        }
        centroids.push(centroid);
    }
    centroids
}

struct LloydRun {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    wcss: f64,
    iterations: usize,
    history: Vec<f64>,
}

/// Assigns each point to its nearest centroid, keeping the current
/// assignment on exact ties. Returns the number of points that moved.
fn assign(data: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &mut [usize]) -> usize {
    let mut changed = 0;
    for (p, a) in data.iter().zip(assignments.iter_mut()) {
        let (c, d) = nearest(p, centroids);
        let keep = *a < centroids.len() && sq_dist(p, &centroids[*a]) == d;
        if !keep {
            *a = c;
            changed += 1;
        }
    }
    changed
}

/// Gives every empty cluster the point farthest from its own centroid,
/// taken from a cluster that keeps at least one member.
fn repair_empty(data: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut farthest: Option<(usize, f64)> = None;
        for (i, p) in data.iter().enumerate() {
            if sizes[assignments[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[assignments[i]]);
            if farthest.map_or(true, |(_, best)| d > best) {
                farthest = Some((i, d));
            }
        }
        let Some((i, _)) = farthest else {
            return;
        };
        centroids[empty] = data[i].clone();
        assignments[i] = empty;
    }
}

fn means(data: &[Vec<f64>], assignments: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = previous[0].len();
    let mut sums = vec![vec![0.0; d]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, &a) in data.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((s, c), prev)| {
            if c == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|v| v / c as f64).collect()
            }
        })
        .collect()
}

fn lloyd(data: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize, tol: f64) -> LloydRun {
    let mut assignments = vec![usize::MAX; data.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for iter in 0..max_iters {
        let changed = assign(data, &centroids, &mut assignments);
        repair_empty(data, &mut centroids, &mut assignments);
        history.push(wcss(data, &centroids, &assignments));
        iterations = iter + 1;
        if iter > 0 && changed == 0 {
            break;
        }
        let updated = means(data, &assignments, &centroids);
        let shift: f64 = updated
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b))
            .sum::<f64>()
            .sqrt();
        centroids = updated;
        if shift < tol {
            break;
        }
    }
    // final assignment against the last centroids
    assign(data, &centroids, &mut assignments);
    repair_empty(data, &mut centroids, &mut assignments);
    let total = wcss(data, &centroids, &assignments);
    history.push(total);
    LloydRun { centroids, assignments, wcss: total, iterations, history }
}

/// Renumbers clusters in order of their first member row.
fn relabel_by_first_appearance(
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let k = centroids.len();
    let mut order: Vec<usize> = Vec::with_capacity(k);
    for &a in &assignments {
        if !order.contains(&a) {
            order.push(a);
        }
    }
    for c in 0..k {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    let mut new_label = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        new_label[old] = new;
    }
    let centroids = order.iter().map(|&old| centroids[old].clone()).collect();
    let assignments = assignments.into_iter().map(|a| new_label[a]).collect();
    (centroids, assignments)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub k_values: Vec<usize>,
    pub wcss_values: Vec<f64>,
    /// Distance of each `(k, wcss)` point to the chord between the ends.
    pub chord_distances: Vec<f64>,
    pub selected_k: usize,
}

/// Fits every k in `[k_min, k_max]` and picks the point farthest from the
/// chord joining the first and last `(k, wcss)` points; ties go to the
/// smaller k.
pub fn elbow_select(
    data: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    template: &KMeansConfig,
) -> Result<ElbowResult, ClusterError> {
    if !(1 <= k_min && k_min < k_max && k_max <= data.len()) {
        return Err(ClusterError::InvalidRange { k_min, k_max, rows: data.len() });
    }
    let k_values: Vec<usize> = (k_min..=k_max).collect();
    let wcss_values = k_values
        .iter()
        .map(|&k| kmeans_fit(data, &KMeansConfig { k, ..template.clone() }).map(|m| m.wcss))
        .collect::<Result<Vec<_>, _>>()?;

    let (x1, y1) = (k_min as f64, wcss_values[0]);
    let (x2, y2) = (k_max as f64, *wcss_values.last().unwrap());
    let norm = ((y2 - y1).powi(2) + (x2 - x1).powi(2)).sqrt();
    let chord_distances: Vec<f64> = k_values
        .iter()
        .zip(&wcss_values)
        .map(|(&k, &w)| ((y2 - y1) * k as f64 - (x2 - x1) * w + x2 * y1 - y2 * x1).abs() / norm)
        .collect();

    let mut selected = 0;
    for (i, d) in chord_distances.iter().enumerate() {
        if *d > chord_distances[selected] {
            selected = i;
        }
    }
    Ok(ElbowResult { selected_k: k_values[selected], k_values, wcss_values, chord_distances })
}

/// On-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub spec_names: Vec<String>,
    pub standardization: Option<Standardization>,
    pub centroids: Vec<Vec<f64>>,
    pub k: usize,
    pub seed: u64,
    pub wcss: f64,
}

impl ModelFile {
    pub fn new(model: &KMeansModel, spec_names: Vec<String>) -> Self {
        ModelFile {
            spec_names,
            standardization: model.standardization.clone(),
            centroids: model.centroids.clone(),
            k: model.k,
            seed: model.seed,
            wcss: model.wcss,
        }
    }
}
