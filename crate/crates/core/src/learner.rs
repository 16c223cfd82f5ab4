//! Sigmoid boundary classifier with a merge-consistency likelihood.
//!
//! The supervised term fits predictions to labelled cliques; the
//! unsupervised term rewards chains of cliques whose merge probabilities are
//! non-increasing towards the root, measured by a real-valued relaxation of
//! the disjunction over all consistent binary sequences. Both terms are
//! Gaussian likelihoods with their own noise scale, plus a unit Gaussian
//! prior on the weights.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Standardizer;

/// Default clamp on predictions, keeping them strictly inside (0, 1).
pub const EPS: f64 = 1e-7;
/// Lower bound on both noise scales.
pub const SIGMA_MIN: f64 = 1e-6;

fn sigmoid(a: f64, eps: f64) -> f64 {
    (1.0 / (1.0 + (-a).exp())).clamp(eps, 1.0 - eps)
}

fn check_dim(w: &[f64], x: &[f64]) -> Result<()> {
    if w.len() != x.len() {
        return Err(Error::DimMismatch {
            expected: w.len(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Merge probability `σ(wᵀx)` clamped to `[EPS, 1 - EPS]`.
pub fn predict(w: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(w, x)?;
    Ok(sigmoid(dot(w, x), EPS))
}

/// Gradient of [`predict`] with respect to `w`, using the clamped value.
pub fn predict_grad(w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let f = predict(w, x)?;
    Ok(x.iter().map(|&v| f * (1.0 - f) * v).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Terms `g_j = Π_{k<j} f_k · Π_{k≥j} (1 - f_k)` for `j = 0..=L`.
fn dnf_terms(f: &[f64]) -> Vec<f64> {
    (0..=f.len())
        .map(|j| {
            f[..j].iter().product::<f64>() * f[j..].iter().map(|v| 1.0 - v).product::<f64>()
        })
        .collect()
}

/// Relaxed consistency of a clique chain (deepest first): 1 on binary
/// non-increasing sequences, 0 on any other binary sequence.
pub fn dnf_value(f: &[f64]) -> f64 {
    1.0 - dnf_terms(f).iter().map(|g| 1.0 - g).product::<f64>()
}

/// `∂F/∂f_m` for every position, computed from products only so that
/// predictions at 0 or 1 are safe.
pub fn dnf_partials(f: &[f64]) -> Vec<f64> {
    let g = dnf_terms(f);
    let outer: Vec<f64> = (0..g.len())
        .map(|j| {
            g.iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, gk)| 1.0 - gk)
                .product()
        })
        .collect();
    (0..f.len())
        .map(|m| {
            (0..g.len())
                .map(|j| {
                    let head: f64 = f[..j]
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != m)
                        .map(|(_, v)| v)
                        .product();
                    let tail: f64 = f[j..]
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k + j != m)
                        .map(|(_, v)| 1.0 - v)
                        .product();
                    let dg = if m < j { head * tail } else { -head * tail };
                    outer[j] * dg
                })
                .sum()
        })
        .collect()
}

/// Gradient of the relaxed consistency with respect to `w`, given the
/// predictions along the chain and their gradient rows.
pub fn dnf_grad(f: &[f64], grad_rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = grad_rows.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for (d, row) in dnf_partials(f).iter().zip(grad_rows) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += d * r;
        }
    }
    out
}

/// Noise scales of the unsupervised and supervised likelihoods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmas {
    pub u: f64,
    pub s: f64,
}

impl Default for Sigmas {
    fn default() -> Self {
        Sigmas { u: 1.0, s: 1.0 }
    }
}

/// Feature rows of all cliques, which of them are labelled, and the clique
/// chains over all rows.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    features: Array2<f64>,
    supervised: Vec<(usize, bool)>,
    paths: Vec<Vec<usize>>,
}

impl TrainingSet {
    pub fn new(
        features: Array2<f64>,
        supervised: Vec<(usize, bool)>,
        paths: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = features.nrows();
        let out_of_range = supervised
            .iter()
            .map(|&(r, _)| r)
            .chain(paths.iter().flatten().copied())
            .find(|&r| r >= n);
        if let Some(r) = out_of_range {
            return Err(Error::InvalidParameter(format!(
                "sample row {r} outside a feature matrix of {n} rows"
            )));
        }
        if paths.iter().any(Vec::is_empty) {
            return Err(Error::InvalidParameter("empty clique path".into()));
        }
        Ok(TrainingSet {
            features,
            supervised,
            paths,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn supervised(&self) -> &[(usize, bool)] {
        &self.supervised
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_supervised(&self) -> usize {
        self.supervised.len()
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// The same samples with the unsupervised term dropped.
    pub fn without_paths(&self) -> TrainingSet {
        TrainingSet {
            features: self.features.clone(),
            supervised: self.supervised.clone(),
            paths: Vec::new(),
        }
    }
}

/// Objective evaluator over one training set. `unsupervised = false`
/// evaluates the prior and supervised terms only.
struct Problem<'a> {
    data: &'a TrainingSet,
    eps: f64,
    unsupervised: bool,
}

struct Residuals {
    f: Array1<f64>,
    /// `1 - F` per path
    unsup: Vec<f64>,
    /// `y - f` per labelled sample
    sup: Vec<f64>,
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|r| r * r).sum()
}

impl Problem<'_> {
    fn n_u(&self) -> usize {
        if self.unsupervised {
            self.data.n_paths()
        } else {
            0
        }
    }

    fn residuals(&self, w: &[f64]) -> Residuals {
        assert_eq!(w.len(), self.data.dim(), "weight and feature dimensions differ");
        let f = self
            .data
            .features
            .dot(&ArrayView1::from(w))
            .mapv(|a| sigmoid(a, self.eps));
        let unsup = if self.unsupervised {
            let mut buf = Vec::new();
            self.data
                .paths
                .iter()
                .map(|p| {
                    buf.clear();
                    buf.extend(p.iter().map(|&r| f[r]));
                    1.0 - dnf_value(&buf)
                })
                .collect()
        } else {
            Vec::new()
        };
        let sup = self
            .data
            .supervised
            .iter()
            .map(|&(r, y)| y as u8 as f64 - f[r])
            .collect();
        Residuals { f, unsup, sup }
    }

    fn value_from(&self, w: &[f64], s: Sigmas, r: &Residuals) -> f64 {
        let mut j = 0.5 * sq_norm(w);
        let n_u = self.n_u();
        if n_u > 0 {
            j += sq_norm(&r.unsup) / (2.0 * s.u * s.u) + n_u as f64 * s.u.ln();
        }
        let n_s = self.data.n_supervised();
        if n_s > 0 {
            j += sq_norm(&r.sup) / (2.0 * s.s * s.s) + n_s as f64 * s.s.ln();
        }
        j
    }

    fn value(&self, w: &[f64], s: Sigmas) -> f64 {
        self.value_from(w, s, &self.residuals(w))
    }

    fn grad(&self, w: &[f64], s: Sigmas) -> Vec<f64> {
        let r = self.residuals(w);
        // per-row coefficient c with ∇J = w - Xᵀ (c ⊙ f(1-f))
        let mut c = Array1::<f64>::zeros(r.f.len());
        if self.n_u() > 0 {
            let inv = 1.0 / (s.u * s.u);
            let mut buf = Vec::new();
            for (p, res) in self.data.paths.iter().zip(&r.unsup) {
                buf.clear();
                buf.extend(p.iter().map(|&i| r.f[i]));
                for (&row, d) in p.iter().zip(dnf_partials(&buf)) {
                    c[row] += inv * res * d;
                }
            }
        }
        if self.data.n_supervised() > 0 {
            let inv = 1.0 / (s.s * s.s);
            for (&(row, _), res) in self.data.supervised.iter().zip(&r.sup) {
                c[row] += inv * res;
            }
        }
        let c = c * r.f.mapv(|f| f * (1.0 - f));
        let back = self.data.features.t().dot(&c);
        w.iter().zip(back.iter()).map(|(wi, b)| wi - b).collect()
    }

    fn update_sigmas(&self, w: &[f64], current: Sigmas) -> Sigmas {
        let r = self.residuals(w);
        let mut s = current;
        if self.n_u() > 0 {
            s.u = residual_scale(&r.unsup);
        }
        if self.data.n_supervised() > 0 {
            s.s = residual_scale(&r.sup);
        }
        s
    }
}

/// `‖r‖₂ / √N`, floored at [`SIGMA_MIN`].
pub fn residual_scale(residuals: &[f64]) -> f64 {
    (sq_norm(residuals) / residuals.len() as f64)
        .sqrt()
        .max(SIGMA_MIN)
}

fn full(data: &TrainingSet) -> Problem<'_> {
    Problem {
        data,
        eps: EPS,
        unsupervised: true,
    }
}

/// Negative log posterior. Terms with no samples are omitted.
///
/// Panics if `w` and the feature rows differ in length.
pub fn objective(w: &[f64], sigmas: Sigmas, data: &TrainingSet) -> f64 {
    full(data).value(w, sigmas)
}

/// Gradient of [`objective`] with respect to `w`.
pub fn objective_grad(w: &[f64], sigmas: Sigmas, data: &TrainingSet) -> Vec<f64> {
    full(data).grad(w, sigmas)
}

/// Closed-form minimisers of [`objective`] in each noise scale. A scale whose
/// term has no samples keeps its value in `current`.
pub fn update_sigmas(w: &[f64], data: &TrainingSet, current: Sigmas) -> Sigmas {
    full(data).update_sigmas(w, current)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Supervised term and prior only.
    Hmt,
    /// Supervised initialisation, then the full objective.
    Sshmt,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmt" => Ok(Mode::Hmt),
            "sshmt" => Ok(Mode::Sshmt),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Hmt => "hmt",
            Mode::Sshmt => "sshmt",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Cliques per chain in the unsupervised term.
    pub path_len: usize,
    /// Gradient steps between noise-scale updates.
    pub sigma_every: usize,
    /// Largest step size tried by the line search.
    pub learning_rate: f64,
    /// Step budget of the supervised phase.
    pub init_iter: usize,
    /// Step budget of the semi-supervised phase.
    pub max_iter: usize,
    /// Phase ends when `‖∇J‖∞` falls to this.
    pub tol: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            path_len: 3,
            sigma_every: 100,
            learning_rate: 1.0,
            init_iter: 1000,
            max_iter: 1000,
            tol: 1e-6,
            eps: EPS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.sigma_every == 0 {
            return bad("sigma update cadence must be at least 1");
        }
        if self.path_len == 0 {
            return bad("path length must be at least 1");
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return bad("clamp must lie in (0, 0.5)");
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad("tolerance must be non-negative");
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub phase: u8,
    pub objective: f64,
    pub sigma_u: f64,
    pub sigma_s: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub w: Vec<f64>,
    pub sigmas: Sigmas,
    pub trace: Vec<TraceRow>,
}

impl Trained {
    /// Trace rows of one phase.
    pub fn phase(&self, phase: u8) -> impl Iterator<Item = &TraceRow> {
        self.trace.iter().filter(move |r| r.phase == phase)
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,phase,J,sigma_u,sigma_s,grad_norm\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.iteration, r.phase, r.objective, r.sigma_u, r.sigma_s, r.grad_norm
            );
        }
        s
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gradient descent with halving line search and periodic closed-form noise
/// updates. Every recorded objective is no larger than the previous one.
fn descend(
    p: &Problem<'_>,
    w: &mut Vec<f64>,
    sigmas: &mut Sigmas,
    cfg: &TrainConfig,
    budget: usize,
    phase: u8,
    trace: &mut Vec<TraceRow>,
) {
    let mut j = p.value(w, *sigmas);
    let mut step = cfg.learning_rate;
    let mut record = |it: usize, j: f64, s: Sigmas, g: f64| {
        trace.push(TraceRow {
            iteration: it,
            phase,
            objective: j,
            sigma_u: s.u,
            sigma_s: s.s,
            grad_norm: g,
        })
    };
    for it in 0..budget {
        if it % cfg.sigma_every == 0 {
            *sigmas = p.update_sigmas(w, *sigmas);
            j = p.value(w, *sigmas);
        }
        let g = p.grad(w, *sigmas);
        let gn = inf_norm(&g);
        record(it, j, *sigmas, gn);
        if gn <= cfg.tol {
            return;
        }
        step = (2.0 * step).min(cfg.learning_rate);
        loop {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
            let jc = p.value(&cand, *sigmas);
            if jc <= j {
                *w = cand;
                j = jc;
                break;
            }
            step *= 0.5;
            if step < f64::EPSILON * cfg.learning_rate {
                return;
            }
        }
    }
    let g = p.grad(w, *sigmas);
    record(budget, j, *sigmas, inf_norm(&g));
}

/// Fit the classifier. Trace phase 1 is the supervised initialisation,
/// phase 2 the semi-supervised refinement.
pub fn train(cfg: &TrainConfig, data: &TrainingSet, mode: Mode) -> Result<Trained> {
    cfg.validate()?;
    if data.n_supervised() == 0 {
        return Err(Error::NoSupervisedData);
    }
    let mut w = vec![0.0; data.dim()];
    let mut sigmas = Sigmas::default();
    let mut trace = Vec::new();
    let mut p = Problem {
        data,
        eps: cfg.eps,
        unsupervised: false,
    };
    descend(&p, &mut w, &mut sigmas, cfg, cfg.init_iter, 1, &mut trace);
    if mode == Mode::Sshmt && data.n_paths() > 0 {
        p.unsupervised = true;
        descend(&p, &mut w, &mut sigmas, cfg, cfg.max_iter, 2, &mut trace);
    }
    Ok(Trained { w, sigmas, trace })
}

/// Trained weights with the normalisation fitted on the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub w: Vec<f64>,
    pub sigma_u: f64,
    pub sigma_s: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
}

impl Model {
    pub fn new(trained: &Trained, standardizer: &Standardizer) -> Self {
        Model {
            w: trained.w.clone(),
            sigma_u: trained.sigmas.u,
            sigma_s: trained.sigmas.s,
            feature_means: standardizer.means.clone(),
            feature_stds: standardizer.stds.clone(),
        }
    }

    pub fn standardizer(&self) -> Standardizer {
        Standardizer {
            means: self.feature_means.clone(),
            stds: self.feature_stds.clone(),
        }
    }

    /// Merge probabilities for raw (unnormalised) feature rows.
    pub fn predict_rows(&self, raw: &Array2<f64>) -> Result<Vec<f64>> {
        if self.w.len() != self.feature_means.len() || self.w.len() != self.feature_stds.len() {
            return Err(Error::DimMismatch {
                expected: self.w.len(),
                found: self.feature_means.len().min(self.feature_stds.len()),
            });
        }
        let x = self.standardizer().apply(raw)?;
        x.rows()
            .into_iter()
            .map(|r| predict(&self.w, r.as_slice().expect("standard layout")))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&[0.0, 0.0], &[3.0, -2.0]).unwrap(), 0.5);
        assert!((predict(&[3f64.ln(), 0.0], &[1.0, 5.0]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(predict(&[1.0, 2.0], &[2.0, -1.0]).unwrap(), 0.5);
        assert!(matches!(
            predict(&[1.0], &[1.0, 2.0]),
            Err(Error::DimMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn predict_clamps() {
        assert_eq!(predict(&[1.0], &[1e3]).unwrap(), 1.0 - EPS);
        assert_eq!(predict(&[1.0], &[-1e3]).unwrap(), EPS);
        let g = predict_grad(&[1.0, 0.0], &[-1e3, 1.0]).unwrap();
        assert!(g[1].abs() <= 1.01 * EPS);
    }

    #[test]
    fn predict_grad_examples() {
        assert_eq!(predict_grad(&[0.0, 0.0], &[2.0, 0.0]).unwrap(), vec![0.5, 0.0]);
        assert_eq!(predict_grad(&[0.3, 0.1], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dnf_examples() {
        assert_eq!(dnf_value(&[1.0, 1.0, 0.0]), 1.0);
        assert_eq!(dnf_value(&[0.0, 1.0, 0.0]), 0.0);
        assert_eq!(dnf_value(&[0.5, 0.5, 0.5]), 1.0 - 0.875f64.powi(4));
        assert_eq!(dnf_value(&[0.5, 0.5, 0.5]), 0.413818359375);
    }

    #[test]
    fn dnf_single_clique() {
        for f in [0.1, 0.5, 0.8] {
            assert!((dnf_value(&[f]) - (1.0 - f * (1.0 - f))).abs() < 1e-15);
            assert!((dnf_partials(&[f])[0] - (2.0 * f - 1.0)).abs() < 1e-15);
        }
        assert_eq!(dnf_partials(&[0.5])[0], 0.0);
    }

    #[test]
    fn dnf_partials_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for len in 1..=5 {
            let f: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..0.95)).collect();
            let d = dnf_partials(&f);
            for m in 0..len {
                let h = 1e-6;
                let mut a = f.clone();
                let mut b = f.clone();
                a[m] += h;
                b[m] -= h;
                let fd = (dnf_value(&a) - dnf_value(&b)) / (2.0 * h);
                assert!((fd - d[m]).abs() < 1e-8, "{fd} vs {}", d[m]);
            }
        }
    }

    #[test]
    fn dnf_grad_symmetric_rows() {
        let f = [0.3, 0.3, 0.3];
        let rows = vec![vec![1.0, 2.0]; 3];
        let g = dnf_grad(&f, &rows);
        let d: f64 = dnf_partials(&f).iter().sum();
        assert!((g[0] - d).abs() < 1e-15 && (g[1] - 2.0 * d).abs() < 1e-15);
    }

    fn one_sample() -> TrainingSet {
        TrainingSet::new(array![[1.0]], vec![(0, true)], vec![]).unwrap()
    }

    #[test]
    fn objective_examples() {
        let s = Sigmas::default();
        assert_eq!(objective(&[0.0], s, &one_sample()), 0.125);
        let empty = TrainingSet::new(Array2::zeros((0, 2)), vec![], vec![]).unwrap();
        assert_eq!(objective(&[3.0, 4.0], s, &empty), 12.5);
        assert_eq!(objective_grad(&[3.0, 4.0], s, &empty), vec![3.0, 4.0]);
    }

    #[test]
    fn objective_grad_example() {
        let g = objective_grad(&[0.0], Sigmas::default(), &one_sample());
        assert!((g[0] + 0.125).abs() < 1e-15);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(residual_scale(&[1.0; 4]), 1.0);
        assert!((residual_scale(&[0.3, 0.4]) - 0.125f64.sqrt()).abs() < 1e-15);
        assert_eq!(residual_scale(&[0.0, 0.0]), SIGMA_MIN);
    }

    #[test]
    fn no_paths_is_supervised_objective() {
        let x = array![[1.0, 0.5], [1.0, -2.0], [1.0, 0.1]];
        let data = TrainingSet::new(x, vec![(0, true), (1, false)], vec![vec![2, 0]]).unwrap();
        let bare = data.without_paths();
        let w = [0.2, -0.7];
        let s = Sigmas { u: 0.3, s: 0.6 };
        let sup = Problem {
            data: &data,
            eps: EPS,
            unsupervised: false,
        };
        assert_eq!(sup.value(&w, s), objective(&w, s, &bare));
        assert_eq!(sup.grad(&w, s), objective_grad(&w, s, &bare));
    }

    fn separable() -> TrainingSet {
        let x = array![
            [1.0, 2.0, 1.0],
            [1.0, 1.5, -0.5],
            [1.0, 1.0, 0.3],
            [1.0, 2.5, 0.0],
            [1.0, -1.0, 0.2],
            [1.0, -2.0, -1.0],
            [1.0, -1.5, 0.7],
            [1.0, -0.5, 0.1],
        ];
        let sup = (0..8).map(|i| (i, i < 4)).collect();
        TrainingSet::new(x, sup, vec![vec![0, 4], vec![1, 5, 6]]).unwrap()
    }

    #[test]
    fn supervised_training_separates() {
        let data = separable();
        let out = train(&TrainConfig::default(), &data, Mode::Hmt).unwrap();
        for &(r, y) in data.supervised() {
            let f = predict(&out.w, data.features().row(r).as_slice().unwrap()).unwrap();
            assert_eq!(f > 0.5, y);
        }
        assert!(out.trace.iter().all(|r| r.phase == 1));
    }

    #[test]
    fn training_is_deterministic_and_monotone() {
        let data = separable();
        let cfg = TrainConfig {
            init_iter: 150,
            max_iter: 250,
            ..TrainConfig::default()
        };
        let a = train(&cfg, &data, Mode::Sshmt).unwrap();
        let b = train(&cfg, &data, Mode::Sshmt).unwrap();
        assert_eq!(a.w, b.w);
        for pair in a.trace.windows(2).filter(|p| p[0].phase == p[1].phase) {
            assert!(pair[1].objective <= pair[0].objective);
        }
        let p2: Vec<_> = a.phase(2).collect();
        assert!(!p2.is_empty());
        assert!(p2.last().unwrap().objective <= p2[0].objective);
    }

    #[test]
    fn training_needs_labels() {
        let x = array![[1.0], [1.0]];
        let data = TrainingSet::new(x, vec![], vec![vec![0, 1]]).unwrap();
        assert!(matches!(
            train(&TrainConfig::default(), &data, Mode::Sshmt),
            Err(Error::NoSupervisedData)
        ));
    }

    #[test]
    fn bad_rows_rejected() {
        let x = array![[1.0]];
        assert!(TrainingSet::new(x.clone(), vec![(1, true)], vec![]).is_err());
        assert!(TrainingSet::new(x, vec![], vec![vec![]]).is_err());
    }

    #[test]
    fn model_roundtrip() {
        let m = Model {
            w: vec![0.5, -1.0],
            sigma_u: 0.2,
            sigma_s: 0.4,
            feature_means: vec![0.0, 2.0],
            feature_stds: vec![1.0, 4.0],
        };
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let p = m.predict_rows(&array![[1.0, 2.0]]).unwrap();
        assert!((p[0] - predict(&m.w, &[1.0, 0.0]).unwrap()).abs() < 1e-15);
    }
}
