//! Labeled spectral datasets: feature ranking, selection, normalization,
//! balanced splits and synthetic generators.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};

/// Pixel spectra stored row-major, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDataset {
    values: Vec<f64>,
    n_features: usize,
    labels: Vec<u32>,
    feature_names: Option<Vec<String>>,
    provenance: String,
}

impl SpectralDataset {
    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(
        values: Vec<f64>,
        n_features: usize,
        labels: Vec<u32>,
        feature_names: Option<Vec<String>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(invalid("dataset needs at least one feature"));
        }
        if values.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite value at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    found: names.len(),
                });
            }
        }
        Ok(Self {
            values,
            n_features,
            labels,
            feature_names,
            provenance: provenance.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u32>, provenance: impl Into<String>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(invalid(format!(
                    "row {i} has {} values, expected {n_features}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, n_features, labels, None, provenance)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.n_features);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            values,
            n_features: self.n_features,
            labels,
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Rows of `idx` as owned vectors.
    pub fn sample_rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.row(i).to_vec()).collect()
    }
}

/// Sample variance (N − 1 denominator) of every feature.
pub fn feature_variances(ds: &SpectralDataset, rows: Option<&[usize]>) -> Result<Vec<f64>> {
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..ds.n_samples()).collect();
            &all
        }
    };
    if rows.len() < 2 {
        return Err(invalid("variance needs at least two samples"));
    }
    let n = rows.len() as f64;
    let d = ds.n_features();
    let mut mean = alloc::vec![0.0; d];
    for &i in rows {
        for (m, v) in mean.iter_mut().zip(ds.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = alloc::vec![0.0; d];
    for &i in rows {
        for ((s, v), m) in var.iter_mut().zip(ds.row(i)).zip(&mean) {
            let dv = v - m;
            *s += dv * dv;
        }
    }
    var.iter_mut().for_each(|s| *s /= n - 1.0);
    Ok(var)
}

/// Feature indices by descending sample variance, ties by ascending index.
pub fn rank_features_by_variance(ds: &SpectralDataset) -> Result<Vec<usize>> {
    rank_features_on(ds, None)
}

/// As [`rank_features_by_variance`], with variances measured on `rows` only.
pub fn rank_features_on(ds: &SpectralDataset, rows: Option<&[usize]>) -> Result<Vec<usize>> {
    let var = feature_variances(ds, rows)?;
    let mut order: Vec<usize> = (0..var.len()).collect();
    // stable sort keeps ascending index among equal variances
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]));
    Ok(order)
}

/// Keeps the first `n` features of `ranking`, in ranking order.
pub fn select_top_features(ds: &SpectralDataset, ranking: &[usize], n: usize) -> Result<SpectralDataset> {
    let d = ds.n_features();
    if n == 0 || n > d {
        return Err(invalid(format!("feature count {n} outside 1..={d}")));
    }
    if ranking.len() != d || ranking.iter().any(|&r| r >= d) {
        return Err(invalid("ranking is not a permutation of the feature indices"));
    }
    let keep = &ranking[..n];
    let mut values = Vec::with_capacity(ds.n_samples() * n);
    for row in ds.rows() {
        values.extend(keep.iter().map(|&j| row[j]));
    }
    let names = ds
        .feature_names()
        .map(|names| keep.iter().map(|&j| names[j].clone()).collect());
    SpectralDataset::from_flat(values, n, ds.labels().to_vec(), names, ds.provenance())
}

/// Per-feature affine map onto [0, 1] fitted on a set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &SpectralDataset, rows: Option<&[usize]>) -> Result<Self> {
        let d = ds.n_features();
        let mut mins = alloc::vec![f64::INFINITY; d];
        let mut maxs = alloc::vec![f64::NEG_INFINITY; d];
        let mut visit = |row: &[f64]| {
            for j in 0..d {
                mins[j] = mins[j].min(row[j]);
                maxs[j] = maxs[j].max(row[j]);
            }
        };
        match rows {
            Some(r) => r.iter().for_each(|&i| visit(ds.row(i))),
            None => ds.rows().for_each(visit),
        }
        if mins.iter().any(|m| !m.is_finite()) {
            return Err(invalid("cannot fit a scaler on zero rows"));
        }
        Ok(Self { mins, maxs })
    }

    /// Applies the map; constant features go to 0 and values outside the
    /// fitted range are not clipped.
    pub fn transform(&self, ds: &SpectralDataset) -> Result<SpectralDataset> {
        if ds.n_features() != self.mins.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mins.len(),
                found: ds.n_features(),
            });
        }
        let d = ds.n_features();
        let values = ds
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let j = k % d;
                let span = self.maxs[j] - self.mins[j];
                if span > 0.0 {
                    (v - self.mins[j]) / span
                } else {
                    0.0
                }
            })
            .collect();
        SpectralDataset::from_flat(
            values,
            d,
            ds.labels().to_vec(),
            ds.feature_names().map(<[String]>::to_vec),
            ds.provenance(),
        )
    }

    /// Restricts the scaler to a feature subset.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            mins: keep.iter().map(|&j| self.mins[j]).collect(),
            maxs: keep.iter().map(|&j| self.maxs[j]).collect(),
        }
    }
}

/// Min-max normalization with statistics from `fit_rows` (all rows when `None`).
pub fn normalize_minmax(ds: &SpectralDataset, fit_rows: Option<&[usize]>) -> Result<(SpectralDataset, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(ds, fit_rows)?;
    Ok((scaler.transform(ds)?, scaler))
}

/// Disjoint train/validation/test indices into a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

fn indices_by_class(ds: &SpectralDataset, classes: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = classes.iter().map(|&c| (c, Vec::new())).collect();
    for (i, l) in ds.labels().iter().enumerate() {
        if let Some(v) = by_class.get_mut(l) {
            v.push(i);
        }
    }
    by_class
}

/// Class-balanced random split with `counts = (train, val, test)` in total.
pub fn make_balanced_split(
    ds: &SpectralDataset,
    counts: (usize, usize, usize),
    classes: &[u32],
    seed: u64,
) -> Result<DatasetSplit> {
    let k = classes.len();
    if k == 0 {
        return Err(invalid("no classes requested"));
    }
    let (nt, nv, ns) = counts;
    if nt % k != 0 || nv % k != 0 || ns % k != 0 {
        return Err(invalid(format!(
            "split counts {counts:?} are not divisible by {k} classes"
        )));
    }
    let (pt, pv, ps) = (nt / k, nv / k, ns / k);
    let mut rng = rng::stream(seed, Purpose::Split, 0);
    let mut split = DatasetSplit {
        train_idx: Vec::with_capacity(nt),
        val_idx: Vec::with_capacity(nv),
        test_idx: Vec::with_capacity(ns),
        seed,
    };
    for (class, mut idx) in indices_by_class(ds, classes) {
        let needed = pt + pv + ps;
        if idx.len() < needed {
            return Err(Error::InsufficientSamples {
                class,
                needed,
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        split.train_idx.extend_from_slice(&idx[..pt]);
        split.val_idx.extend_from_slice(&idx[pt..pt + pv]);
        split.test_idx.extend_from_slice(&idx[pt + pv..needed]);
    }
    split.train_idx.sort_unstable();
    split.val_idx.sort_unstable();
    split.test_idx.sort_unstable();
    Ok(split)
}

/// Rotating class-balanced folds with a fixed train:val:test `ratio`.
///
/// Each class is shuffled once. Fold `f` rotates the shuffled class list by
/// `f·m/k` and takes, in order, the validation block, the training block and
/// the test block. The validation block holds `round(m·r_val/Σr)` samples of
/// every class; the remainder is divided train:test by the ratio, and when
/// that division leaves one sample over it goes to test for even-positioned
/// classes and to train for odd ones, keeping the set totals within one of
/// each other.
pub fn kfold_splits(
    ds: &SpectralDataset,
    k: usize,
    ratio: (usize, usize, usize),
    seed: u64,
) -> Result<Vec<DatasetSplit>> {
    if k < 2 {
        return Err(invalid("k-fold needs k >= 2"));
    }
    let (rt, rv, rs) = ratio;
    let total = rt + rv + rs;
    if total == 0 || rt + rs == 0 {
        return Err(invalid(format!("degenerate ratio {ratio:?}")));
    }
    let classes = ds.classes();
    let mut rng = rng::stream(seed, Purpose::KFold, 0);
    let mut per_class = Vec::with_capacity(classes.len());
    for (class, mut idx) in indices_by_class(ds, &classes) {
        if k > idx.len() {
            return Err(Error::InsufficientSamples {
                class,
                needed: k,
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        per_class.push(idx);
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut split = DatasetSplit {
            train_idx: Vec::new(),
            val_idx: Vec::new(),
            test_idx: Vec::new(),
            seed,
        };
        for (pos, idx) in per_class.iter().enumerate() {
            let m = idx.len();
            let v = (2 * m * rv + total) / (2 * total);
            let rest = m - v;
            let num = rest * rt;
            let den = rt + rs;
            let mut t = num / den;
            if num % den != 0 && pos % 2 == 1 {
                t += 1;
            }
            let offset = f * m / k;
            let rotated = (0..m).map(|s| idx[(offset + s) % m]);
            for (s, i) in rotated.enumerate() {
                if s < v {
                    split.val_idx.push(i);
                } else if s < v + t {
                    split.train_idx.push(i);
                } else {
                    split.test_idx.push(i);
                }
            }
        }
        split.train_idx.sort_unstable();
        split.val_idx.sort_unstable();
        split.test_idx.sort_unstable();
        folds.push(split);
    }
    Ok(folds)
}

/// Synthetic binary tasks for desk-scale experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthTask {
    /// Two hypercube blobs centred at `0.5 ∓ separation/2` on every feature.
    TwoBlob,
    /// Disc versus annulus in the first two features, uniform elsewhere.
    Ring,
    /// Uniform features with labels independent of them.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub task: SynthTask,
    pub n_samples: usize,
    pub d: usize,
    pub seed: u64,
    /// Per-feature distance between blob centres.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Half-width of the uniform per-feature blob noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_separation() -> f64 {
    0.5
}

fn default_noise() -> f64 {
    0.2
}

impl SynthSpec {
    pub fn new(task: SynthTask, n_samples: usize, d: usize, seed: u64) -> Self {
        Self {
            task,
            n_samples,
            d,
            seed,
            separation: default_separation(),
            noise: default_noise(),
        }
    }
}

pub fn synth_dataset(n_samples: usize, d: usize, task: SynthTask, seed: u64) -> Result<SpectralDataset> {
    synth_dataset_with(&SynthSpec::new(task, n_samples, d, seed))
}

pub fn synth_dataset_with(spec: &SynthSpec) -> Result<SpectralDataset> {
    let (n, d) = (spec.n_samples, spec.d);
    if n < 2 || d == 0 {
        return Err(invalid("synthetic data needs n_samples >= 2 and d >= 1"));
    }
    let mut rng = rng::stream(spec.seed, Purpose::Synth, 0);
    let mut labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
    if spec.task == SynthTask::Random {
        labels.shuffle(&mut rng);
    }
    let mut values = Vec::with_capacity(n * d);
    for &label in &labels {
        match spec.task {
            SynthTask::TwoBlob => {
                let sign = if label == 0 { -1.0 } else { 1.0 };
                let centre = 0.5 + sign * spec.separation / 2.0;
                for _ in 0..d {
                    let v = centre + rng.random_range(-1.0..=1.0) * spec.noise;
                    values.push(v.clamp(0.0, 1.0));
                }
            }
            SynthTask::Ring => {
                let radius = if label == 0 {
                    rng.random_range(0.0..0.15)
                } else {
                    rng.random_range(0.3..0.45)
                };
                let angle: f64 = rng.random_range(0.0..core::f64::consts::TAU);
                if d == 1 {
                    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    values.push(0.5 + side * radius);
                } else {
                    values.push(0.5 + radius * libm::cos(angle));
                    values.push(0.5 + radius * libm::sin(angle));
                    for _ in 2..d {
                        values.push(rng.random_range(0.0..=1.0));
                    }
                }
            }
            SynthTask::Random => {
                for _ in 0..d {
                    values.push(rng.random_range(0.0..=1.0));
                }
            }
        }
    }
    let provenance = format!(
        "synth:{:?}:n={n}:d={d}:seed={}:sep={}:noise={}",
        spec.task, spec.seed, spec.separation, spec.noise
    );
    SpectralDataset::from_flat(values, d, labels, None, provenance)
}
