//! Bayesian optimization of the SVM penalty and kernel bandwidth.
//!
//! The effective bandwidth follows `c = a·n^(−α)` for `n` features. A
//! Gaussian-process surrogate with a squared-exponential kernel is fitted on
//! the unit-cube image of the search space (log-scaled dimensions mapped in
//! log space) and new points maximize expected improvement over a seeded
//! batch of random candidates.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::SpectralDataset;
use crate::error::{invalid, Error, Result};
use crate::kernels::{gamma_from_bandwidth, kernel_matrix, Backend, Executor, KernelKind, KernelSpec};
use crate::rng::{self, Purpose};
use crate::statevector::DEFAULT_MAX_QUBITS;
use crate::svm::Classifier;

/// `a·n^(−alpha)`.
pub fn bandwidth_from(a: f64, alpha: f64, n: usize) -> f64 {
    a * libm::pow(n as f64, -alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
}

impl Dimension {
    pub fn new(name: &str, lo: f64, hi: f64, scale: Scale) -> Result<Self> {
        if !(lo < hi) || (scale == Scale::Log && lo <= 0.0) {
            return Err(invalid(alloc::format!("bad bounds [{lo}, {hi}] for {name}")));
        }
        Ok(Self {
            name: name.into(),
            lo,
            hi,
            scale,
        })
    }

    fn unit_of(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
            Scale::Log => (libm::log(v) - libm::log(self.lo)) / (libm::log(self.hi) - libm::log(self.lo)),
        }
    }

    fn value_at(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self.scale {
            Scale::Linear => self.lo + u * (self.hi - self.lo),
            Scale::Log => libm::exp(libm::log(self.lo) + u * (libm::log(self.hi) - libm::log(self.lo))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    /// `C ∈ [1, 100]` (log), `a ∈ [0.1, 10]` (log), `alpha ∈ [0, 3]`.
    pub fn svm_bandwidth() -> Self {
        Self {
            dims: vec![
                Dimension::new("C", 1.0, 100.0, Scale::Log).unwrap(),
                Dimension::new("a", 0.1, 10.0, Scale::Log).unwrap(),
                Dimension::new("alpha", 0.0, 3.0, Scale::Linear).unwrap(),
            ],
        }
    }

    /// `C` alone.
    pub fn svm_penalty_only() -> Self {
        Self {
            dims: vec![Dimension::new("C", 1.0, 100.0, Scale::Log).unwrap()],
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn to_unit(&self, point: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(point).map(|(d, &v)| d.unit_of(v)).collect()
    }

    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(unit).map(|(d, &u)| d.value_at(u)).collect()
    }
}

/// Bandwidth protocol: optimize `(C, a, α)`, or pin `a = 1, α = 0` (`c = 1`)
/// and optimize `C` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Bandwidth,
    NoBandwidth,
}

impl Protocol {
    pub fn space(self) -> SearchSpace {
        match self {
            Protocol::Bandwidth => SearchSpace::svm_bandwidth(),
            Protocol::NoBandwidth => SearchSpace::svm_penalty_only(),
        }
    }

    pub fn params(self, point: &[f64]) -> SvmHyperparams {
        match self {
            Protocol::Bandwidth => SvmHyperparams {
                penalty: point[0],
                a: point[1],
                alpha: point[2],
            },
            Protocol::NoBandwidth => SvmHyperparams {
                penalty: point[0],
                a: 1.0,
                alpha: 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmHyperparams {
    /// SVM penalty `C`.
    pub penalty: f64,
    pub a: f64,
    pub alpha: f64,
}

impl SvmHyperparams {
    pub fn bandwidth(&self, n_features: usize) -> f64 {
        bandwidth_from(self.a, self.alpha, n_features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpSettings {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise: f64,
    pub max_jitter: f64,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            length_scale: 0.2,
            signal_variance: 1.0,
            noise: 1e-6,
            max_jitter: 1e-8,
        }
    }
}

/// GP regression with a constant prior mean equal to the observed average.
pub struct GaussianProcess {
    points: Vec<Vec<f64>>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    weights: DVector<f64>,
    prior_mean: f64,
    settings: GpSettings,
}

impl GaussianProcess {
    pub fn fit(observed: &[(Vec<f64>, f64)], settings: GpSettings) -> Result<Self> {
        if observed.is_empty() {
            return Err(invalid("GP needs at least one observation"));
        }
        if settings.noise < 0.0 {
            return Err(invalid("GP noise must be non-negative"));
        }
        let n = observed.len();
        let points: Vec<Vec<f64>> = observed.iter().map(|(p, _)| p.clone()).collect();
        let prior_mean = observed.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
        let base = DMatrix::from_fn(n, n, |i, j| se_kernel(&points[i], &points[j], &settings));
        let mut jitter = 0.0;
        let chol = loop {
            let m = &base + DMatrix::identity(n, n) * (settings.noise + jitter);
            if let Some(c) = m.cholesky() {
                break c;
            }
            jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
            if jitter > settings.max_jitter * (1.0 + 1e-9) {
                return Err(Error::Singular);
            }
        };
        let centred = DVector::from_iterator(n, observed.iter().map(|(_, v)| v - prior_mean));
        let weights = chol.solve(&centred);
        Ok(Self {
            points,
            chol,
            weights,
            prior_mean,
            settings,
        })
    }

    /// Posterior `(mean, std)` at `query`.
    pub fn predict(&self, query: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| se_kernel(p, query, &self.settings)),
        );
        let mean = self.prior_mean + k.dot(&self.weights);
        let v = self.chol.solve(&k);
        let var = (self.settings.signal_variance - k.dot(&v)).max(0.0);
        (mean, libm::sqrt(var))
    }
}

fn se_kernel(a: &[f64], b: &[f64], s: &GpSettings) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    s.signal_variance * libm::exp(-0.5 * d2 / (s.length_scale * s.length_scale))
}

pub fn gp_posterior(observed: &[(Vec<f64>, f64)], query: &[f64], length_scale: f64, noise: f64) -> Result<(f64, f64)> {
    let settings = GpSettings {
        length_scale,
        noise,
        ..GpSettings::default()
    };
    Ok(GaussianProcess::fit(observed, settings)?.predict(query))
}

pub fn normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * PI)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Expected improvement over `best` for a maximization problem.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let gain = mean - best;
    if std <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / std;
    (gain * normal_cdf(z) + std * normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub params: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoTrace {
    pub dims: Vec<String>,
    pub iterations: Vec<Evaluation>,
    pub best: Evaluation,
    pub seed: u64,
    pub n_features: usize,
}

impl HpoTrace {
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.iterations
            .iter()
            .map(|e| {
                best = best.max(e.score);
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoSettings {
    pub iterations: usize,
    pub init_points: usize,
    pub candidates: usize,
    pub gp: GpSettings,
}

impl Default for BoSettings {
    fn default() -> Self {
        Self {
            iterations: 50,
            init_points: 10,
            candidates: 1024,
            gp: GpSettings::default(),
        }
    }
}

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = f64::from(base);
    let (mut inv, mut f) = (0.0, 1.0 / b);
    while i > 0 {
        inv += f * (i % u64::from(base)) as f64;
        i /= u64::from(base);
        f /= b;
    }
    inv
}

/// Halton points with a seeded Cranley–Patterson shift.
pub fn shifted_halton(count: usize, dims: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dims > PRIMES.len() {
        return Err(invalid("quasi-random design supports at most 8 dimensions"));
    }
    let mut rng = rng::stream(seed, Purpose::HpoInit, 0);
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    Ok((0..count)
        .map(|i| {
            (0..dims)
                .map(|d| {
                    let u = radical_inverse(i as u64, PRIMES[d]) + shift[d];
                    u - libm::floor(u)
                })
                .collect()
        })
        .collect())
}

/// Maximizes `objective` over `space`; deterministic for a fixed seed.
pub fn bayes_optimize<F>(mut objective: F, space: &SearchSpace, settings: &BoSettings, seed: u64) -> Result<HpoTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if settings.init_points == 0 || settings.iterations < settings.init_points {
        return Err(invalid("need iterations >= init_points >= 1"));
    }
    if space.is_empty() {
        return Err(invalid("empty search space"));
    }
    let dims = space.len();
    let mut unit_points: Vec<Vec<f64>> = Vec::with_capacity(settings.iterations);
    let mut evals: Vec<Evaluation> = Vec::with_capacity(settings.iterations);

    let mut evaluate = |unit: Vec<f64>, evals: &mut Vec<Evaluation>, unit_points: &mut Vec<Vec<f64>>| {
        let params = space.from_unit(&unit);
        let score = objective(&params).map_err(|e| Error::Objective {
            params: params.clone(),
            message: e.to_string(),
        })?;
        evals.push(Evaluation { params, score });
        unit_points.push(unit);
        Ok::<(), Error>(())
    };

    for p in shifted_halton(settings.init_points, dims, seed)? {
        evaluate(p, &mut evals, &mut unit_points)?;
    }
    for iter in settings.init_points..settings.iterations {
        let observed: Vec<(Vec<f64>, f64)> = unit_points.iter().cloned().zip(evals.iter().map(|e| e.score)).collect();
        let gp = GaussianProcess::fit(&observed, settings.gp)?;
        let best = evals.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
        let mut rng = rng::stream(seed, Purpose::HpoCandidates, iter as u32);
        let mut chosen: Option<(f64, Vec<f64>)> = None;
        for _ in 0..settings.candidates.max(1) {
            let cand: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
            let (m, s) = gp.predict(&cand);
            let ei = expected_improvement(m, s, best);
            if chosen.as_ref().is_none_or(|(b, _)| ei > *b) {
                chosen = Some((ei, cand));
            }
        }
        let (_, next) = chosen.expect("at least one candidate");
        evaluate(next, &mut evals, &mut unit_points)?;
    }

    let best = evals
        .iter()
        .fold(None::<&Evaluation>, |acc, e| match acc {
            Some(b) if b.score >= e.score => Some(b),
            _ => Some(e),
        })
        .cloned()
        .expect("non-empty trace");
    Ok(HpoTrace {
        dims: space.dims.iter().map(|d| d.name.clone()).collect(),
        iterations: evals,
        best,
        seed,
        n_features: 0,
    })
}

/// Kernel family plus quantum backend used by the validation objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelKernel {
    pub kind: KernelKind,
    pub backend: Backend,
    /// Qubit cap for the statevector backend.
    pub sv_max_qubits: usize,
}

impl ModelKernel {
    pub fn new(kind: KernelKind, backend: Backend) -> Self {
        Self {
            kind,
            backend,
            sv_max_qubits: DEFAULT_MAX_QUBITS,
        }
    }

    /// Kernel at bandwidth `c`; the RBF uses `gamma = c²`.
    pub fn spec(&self, c: f64) -> KernelSpec {
        match self.kind {
            KernelKind::FidelityQuantum => KernelSpec::FidelityQuantum {
                bandwidth: c,
                backend: self.backend,
                sv_max_qubits: self.sv_max_qubits,
            },
            KernelKind::Rbf => KernelSpec::rbf(gamma_from_bandwidth(c)),
        }
    }
}

/// Validation accuracy of an SVM trained on `train` with the given hyperparameters.
pub fn validation_objective<E: Executor>(
    train: &SpectralDataset,
    val: &SpectralDataset,
    kernel: ModelKernel,
    params: &SvmHyperparams,
    tol: f64,
    exec: &E,
) -> Result<f64> {
    let n = train.n_features();
    let spec = kernel.spec(params.bandwidth(n));
    let xtr = train.sample_rows(&(0..train.n_samples()).collect::<Vec<_>>());
    let xval = val.sample_rows(&(0..val.n_samples()).collect::<Vec<_>>());
    let k_train = kernel_matrix(&xtr, &xtr, &spec, exec)?;
    let k_val = kernel_matrix(&xtr, &xval, &spec, exec)?;
    let clf = Classifier::fit(&k_train, train.labels(), params.penalty, tol, exec)?;
    let pred = clf.predict(&k_val)?;
    Ok(accuracy(val.labels(), &pred))
}

pub fn accuracy(truth: &[u32], pred: &[u32]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
