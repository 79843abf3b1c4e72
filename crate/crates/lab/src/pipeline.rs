//! Run directory layout, data preparation and kernel computation.

use std::path::{Path, PathBuf};

use qklab_core::dataio::{
    kfold_splits, make_balanced_split, rank_features_on, select_top_features, synth_dataset_with, DatasetSplit,
    MinMaxScaler, SpectralDataset,
};
use qklab_core::kernels::{kernel_matrix, Backend, Executor, KernelKind, KernelMatrix, KernelSpec};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig, SplitFile, SplitSpec};
use crate::csvio::{load_csv, write_csv};
use crate::error::{LabError, LabResult};
use crate::persist::{
    hash_file, hash_json, kernel_is_current, read_json, read_kernel, sha256_hex, write_json, write_kernel,
};

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn resolved_config(&self) -> PathBuf {
        self.root.join("config.resolved.json")
    }

    pub fn prepare_stamp(&self) -> PathBuf {
        self.root.join("prepare.json")
    }

    pub fn dataset_csv(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn dataset_record(&self) -> PathBuf {
        self.root.join("dataset.json")
    }

    pub fn split(&self, s: usize) -> PathBuf {
        self.root.join(format!("splits/split_{s:02}.json"))
    }

    pub fn prepared(&self, s: usize, n: usize) -> PathBuf {
        self.root.join(format!("prepared/split_{s:02}/n_{n:03}.json"))
    }

    /// Directory holding `train`, `val` and `test` kernel matrices.
    pub fn kernel_dir(&self, s: usize, n: usize, spec: &KernelSpec) -> PathBuf {
        let backend = match spec.backend() {
            Some(Backend::Tn) => "tn",
            Some(Backend::Sv) => "sv",
            None => "classical",
        };
        let kind = match spec.kind() {
            KernelKind::FidelityQuantum => "fidelity-quantum",
            KernelKind::Rbf => "rbf",
        };
        self.root.join(format!(
            "kernels/split_{s:02}/n_{n:03}/{kind}_{backend}_{:?}",
            spec.scale()
        ))
    }

    pub fn cell_stem(&self, kind: &str, s: usize, n: usize, name: &str) -> PathBuf {
        self.root.join(format!("{kind}/split_{s:02}/n_{n:03}/{name}.json"))
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results.json")
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.root.join("diagnostics.json")
    }

    pub fn diagnostics_csv(&self) -> PathBuf {
        self.root.join("diagnostics.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.md")
    }

    /// Path relative to the run root, with forward slashes.
    pub fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.root)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    }
}

/// Hash of a dataset's numeric content and labels.
pub fn dataset_hash(ds: &SpectralDataset) -> String {
    let mut bytes = Vec::with_capacity(ds.values().len() * 8 + ds.labels().len() * 4 + 8);
    bytes.extend_from_slice(&(ds.n_features() as u64).to_le_bytes());
    for v in ds.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for l in ds.labels() {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    sha256_hex(&bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub provenance: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub classes: Vec<u32>,
    pub dataset_hash: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub index: usize,
    pub split: DatasetSplit,
    pub config_hash: String,
    pub seed: u64,
}

/// Samples of one split set after feature selection and normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
}

impl Block {
    pub fn dataset(&self) -> LabResult<SpectralDataset> {
        Ok(SpectralDataset::from_rows(&self.rows, self.labels.clone(), "prepared")?)
    }
}

/// One `(split, n)` cell of prepared data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedCell {
    pub split: usize,
    pub n: usize,
    /// Original column indices, in ranking order.
    pub features: Vec<usize>,
    pub scaler_mins: Vec<f64>,
    pub scaler_maxs: Vec<f64>,
    pub train: Block,
    pub val: Block,
    pub test: Block,
    pub dataset_hash: String,
    pub config_hash: String,
    pub seed: u64,
}

/// Inputs that determine the prepared artifacts.
#[derive(Serialize)]
struct PrepareKey<'a> {
    data: &'a DataSource,
    classes: &'a Option<Vec<u32>>,
    splits: &'a SplitSpec,
    split_indices: &'a [DatasetSplit],
    feature_counts: &'a [usize],
    seed: u64,
    dataset_hash: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareStamp {
    pub prepare_hash: String,
    pub config_hash: String,
    pub seed: u64,
    pub splits: usize,
    pub feature_counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Written,
    UpToDate,
}

pub fn load_dataset(cfg: &RunConfig) -> LabResult<SpectralDataset> {
    let ds = match &cfg.data {
        DataSource::Csv { path, label_column } => load_csv(path, label_column)?,
        DataSource::Synth(spec) => synth_dataset_with(spec)?,
    };
    let Some(keep) = &cfg.classes else {
        return Ok(ds);
    };
    let present = ds.classes();
    if let Some(missing) = keep.iter().find(|c| !present.contains(c)) {
        return Err(LabError::config(
            "classes",
            format!("class {missing} does not occur in the data"),
        ));
    }
    let idx: Vec<usize> = (0..ds.n_samples())
        .filter(|&i| keep.contains(&ds.labels()[i]))
        .collect();
    Ok(ds.subset(&idx))
}

pub fn make_splits(cfg: &RunConfig, ds: &SpectralDataset) -> LabResult<Vec<DatasetSplit>> {
    let classes = ds.classes();
    if classes.len() < 2 {
        return Err(LabError::config("classes", "classification needs at least two classes"));
    }
    Ok(match &cfg.splits {
        SplitSpec::Balanced {
            count,
            train,
            val,
            test,
        } => (0..*count)
            .map(|s| make_balanced_split(ds, (*train, *val, *test), &classes, cfg.seed.wrapping_add(s as u64)))
            .collect::<Result<_, _>>()?,
        SplitSpec::Kfold { k, ratio } => kfold_splits(ds, *k, (ratio[0], ratio[1], ratio[2]), cfg.seed)?,
        SplitSpec::Files { paths } => paths
            .iter()
            .map(|p| read_split_file(p, ds.n_samples(), cfg.seed))
            .collect::<LabResult<_>>()?,
    })
}

/// Reads one split file and checks its indices are in range and disjoint.
pub fn read_split_file(path: &Path, n_samples: usize, seed: u64) -> LabResult<DatasetSplit> {
    let f: SplitFile = read_json(path)?;
    let bad = |msg: String| LabError::config("splits.paths", format!("{}: {msg}", path.display()));
    let mut seen = vec![false; n_samples];
    for (name, idx) in [
        ("train_idx", &f.train_idx),
        ("val_idx", &f.val_idx),
        ("test_idx", &f.test_idx),
    ] {
        if idx.is_empty() {
            return Err(bad(format!("{name} is empty")));
        }
        for &i in idx {
            if i >= n_samples {
                return Err(bad(format!("{name} index {i} is out of range for {n_samples} rows")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(bad(format!("row {i} appears more than once")));
            }
        }
    }
    Ok(DatasetSplit {
        train_idx: f.train_idx,
        val_idx: f.val_idx,
        test_idx: f.test_idx,
        seed,
    })
}

/// Ranks features on the training rows, keeps the top `n`, and min-max
/// scales with training statistics.
pub fn prepare_cell(
    ds: &SpectralDataset,
    split: &DatasetSplit,
    ranking: &[usize],
    n: usize,
) -> LabResult<(Vec<usize>, MinMaxScaler, [Block; 3])> {
    let selected = select_top_features(ds, ranking, n)?;
    let scaler = MinMaxScaler::fit(&selected, Some(&split.train_idx))?;
    let scaled = scaler.transform(&selected)?;
    let block = |idx: &[usize]| Block {
        rows: scaled.sample_rows(idx),
        labels: idx.iter().map(|&i| scaled.labels()[i]).collect(),
    };
    Ok((
        ranking[..n].to_vec(),
        scaler,
        [block(&split.train_idx), block(&split.val_idx), block(&split.test_idx)],
    ))
}

/// Writes splits and prepared cells; a no-op when inputs are unchanged.
pub fn cmd_prepare(cfg: &RunConfig, layout: &Layout) -> LabResult<Outcome> {
    let ds = load_dataset(cfg)?;
    let feature_counts = cfg.resolve_feature_counts(ds.n_features())?;
    let dhash = dataset_hash(&ds);
    let config_hash = cfg.config_hash();
    let splits = make_splits(cfg, &ds)?;
    let prepare_hash = hash_json(&PrepareKey {
        data: &cfg.data,
        classes: &cfg.classes,
        splits: &cfg.splits,
        split_indices: &splits,
        feature_counts: &feature_counts,
        seed: cfg.seed,
        dataset_hash: &dhash,
    });
    write_json(&layout.resolved_config(), cfg)?;
    if let Ok(stamp) = read_json::<PrepareStamp>(&layout.prepare_stamp()) {
        if stamp.prepare_hash == prepare_hash {
            return Ok(Outcome::UpToDate);
        }
    }

    if matches!(cfg.data, DataSource::Synth(_)) {
        write_csv(&layout.dataset_csv(), &ds)?;
    }
    write_json(
        &layout.dataset_record(),
        &DatasetRecord {
            provenance: ds.provenance().to_string(),
            n_samples: ds.n_samples(),
            n_features: ds.n_features(),
            classes: ds.classes(),
            dataset_hash: dhash.clone(),
            config_hash: config_hash.clone(),
            seed: cfg.seed,
        },
    )?;

    for (s, split) in splits.iter().enumerate() {
        write_json(
            &layout.split(s),
            &SplitRecord {
                index: s,
                split: split.clone(),
                config_hash: config_hash.clone(),
                seed: cfg.seed,
            },
        )?;
        let ranking = rank_features_on(&ds, Some(&split.train_idx))?;
        for &n in &feature_counts {
            let (features, scaler, [train, val, test]) = prepare_cell(&ds, split, &ranking, n)?;
            let cell = PreparedCell {
                split: s,
                n,
                features,
                scaler_mins: scaler.mins.clone(),
                scaler_maxs: scaler.maxs.clone(),
                train,
                val,
                test,
                dataset_hash: dhash.clone(),
                config_hash: config_hash.clone(),
                seed: cfg.seed,
            };
            write_json(&layout.prepared(s, n), &cell)?;
        }
    }
    write_json(
        &layout.prepare_stamp(),
        &PrepareStamp {
            prepare_hash,
            config_hash,
            seed: cfg.seed,
            splits: splits.len(),
            feature_counts,
        },
    )?;
    Ok(Outcome::Written)
}

pub fn read_stamp(layout: &Layout) -> LabResult<PrepareStamp> {
    let p = layout.prepare_stamp();
    if !p.exists() {
        return Err(LabError::MissingArtifacts(vec![format!(
            "{} (run `prepare` first)",
            p.display()
        )]));
    }
    read_json(&p)
}

pub fn read_prepared(layout: &Layout, split: usize, n: usize) -> LabResult<(PreparedCell, String)> {
    let p = layout.prepared(split, n);
    if !p.exists() {
        return Err(LabError::MissingArtifacts(vec![p.display().to_string()]));
    }
    Ok((read_json(&p)?, hash_file(&p)?))
}

/// Train Gram plus train×val and train×test cross kernels.
pub struct KernelTriple {
    pub train: KernelMatrix,
    pub val: KernelMatrix,
    pub test: KernelMatrix,
}

pub fn compute_kernels<E: Executor>(
    cell: &PreparedCell,
    spec: &KernelSpec,
    content_hash: &str,
    exec: &E,
) -> LabResult<KernelTriple> {
    let x = &cell.train.rows;
    let mut out = [&cell.train.rows, &cell.val.rows, &cell.test.rows].map(|cols| kernel_matrix(x, cols, spec, exec));
    for k in out.iter_mut().flatten() {
        k.meta.dataset_hash = content_hash.to_string();
    }
    let [train, val, test] = out;
    Ok(KernelTriple {
        train: train?,
        val: val?,
        test: test?,
    })
}

pub fn write_kernels(dir: &Path, k: &KernelTriple, config_hash: &str, seed: u64) -> LabResult<()> {
    write_kernel(&dir.join("train"), &k.train, config_hash, seed)?;
    write_kernel(&dir.join("val"), &k.val, config_hash, seed)?;
    write_kernel(&dir.join("test"), &k.test, config_hash, seed)?;
    Ok(())
}

pub fn read_kernels(dir: &Path) -> LabResult<KernelTriple> {
    Ok(KernelTriple {
        train: read_kernel(&dir.join("train"))?,
        val: read_kernel(&dir.join("val"))?,
        test: read_kernel(&dir.join("test"))?,
    })
}

pub fn kernels_current(dir: &Path, config_hash: &str) -> bool {
    ["train", "val", "test"]
        .iter()
        .all(|s| kernel_is_current(&dir.join(s), config_hash))
}

/// Computes and persists the three kernel matrices of one cell.
pub fn cmd_kernel<E: Executor>(
    cfg: &RunConfig,
    layout: &Layout,
    split: usize,
    n: usize,
    spec: &KernelSpec,
    exec: &E,
) -> LabResult<(PathBuf, Outcome)> {
    let (cell, content_hash) = read_prepared(layout, split, n)?;
    let config_hash = cfg.config_hash();
    let dir = layout.kernel_dir(split, n, spec);
    if kernels_current(&dir, &config_hash) {
        return Ok((dir, Outcome::UpToDate));
    }
    let k = compute_kernels(&cell, spec, &content_hash, exec)?;
    write_kernels(&dir, &k, &config_hash, cfg.seed)?;
    Ok((dir, Outcome::Written))
}
