//! The minipatch boosting loop.
//!
//! Each iteration draws `n` rows from the observation distribution `p` and
//! `m` columns from the feature distribution `q`, fits a tree on that
//! minipatch, adds its `±1` vote to the ensemble output `F` of every training
//! row (and to the out-of-patch output `G` of rows outside the minipatch),
//! then re-derives `p` from the loss of `F` and mixes the tree's feature
//! importance into `q` for the sampled columns.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::sampler::{sample_without_replacement, MpRng, ProbabilityVector, RNG_ALGORITHM};
use crate::stopping::{Decision, StoppingState};
use crate::tree::{fit_tree, impurity_importance, permutation_importance, DecisionTree, DepthLimit, ImportanceVector};
use crate::{Error, Label, Result, Scalar};

/// `|y F|` is clamped to this before exponentiation.
pub const EXP_CLAMP: f64 = 50.0;

pub const DEFAULT_T_MAX: usize = 2000;
pub const DEFAULT_MOMENTUM: f64 = 0.5;
pub const DEFAULT_PERMUTATION_REPEATS: usize = 5;

/// Observation weighting function; all are decreasing in `y F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    SoftExponential,
    SoftLogistic,
    HardExponential,
    HardLogistic,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::SoftExponential,
        LossKind::SoftLogistic,
        LossKind::HardExponential,
        LossKind::HardLogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::SoftExponential => "soft-exponential",
            LossKind::SoftLogistic => "soft-logistic",
            LossKind::HardExponential => "hard-exponential",
            LossKind::HardLogistic => "hard-logistic",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss {s:?}")))
    }
}

/// Sign with `sign(0) = 0`.
fn sign<F: num_traits::Float>(f: F) -> F {
    if f > F::zero() {
        F::one()
    } else if f < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

/// Weight of an observation with label `y` and ensemble output `f`.
pub fn loss<F: num_traits::Float>(kind: LossKind, y: Label, f: F) -> F {
    let y = if y > 0 { F::one() } else { -F::one() };
    let limit = F::from(EXP_CLAMP).unwrap_or_else(F::max_value);
    let clamp = |v: F| v.max(-limit).min(limit);
    match kind {
        LossKind::SoftExponential => (-clamp(y * f)).exp(),
        LossKind::SoftLogistic => F::one() / (F::one() + clamp(y * f).exp()),
        LossKind::HardExponential => (-(y * sign(f))).exp(),
        LossKind::HardLogistic => F::one() / (F::one() + (y * sign(f)).exp()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceBackend {
    Impurity,
    Permutation { repeats: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Minipatch rows.
    pub n_obs: usize,
    /// Minipatch columns.
    pub m_feat: usize,
    pub momentum: f64,
    pub loss: LossKind,
    pub depth: DepthLimit,
    pub t_max: usize,
    pub adaptive_rows: bool,
    pub adaptive_cols: bool,
    pub importance: ImportanceBackend,
    pub seed: u64,
    /// Stop when the out-of-patch rule says so. When off, training runs
    /// exactly `t_max` iterations; the best iteration is still tracked.
    pub early_stopping: bool,
    /// Keep every iteration's row set in [`Diagnostics::patches`].
    #[serde(skip)]
    pub record_patches: bool,
}

impl Hyperparams {
    /// Defaults for an `n_rows x n_cols` training set: ten percent of rows
    /// and columns (rounded up), momentum 0.5, soft-logistic weights,
    /// saturated trees.
    pub fn for_shape(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_obs: n_rows.div_ceil(10).max(1),
            m_feat: n_cols.div_ceil(10).max(1),
            momentum: DEFAULT_MOMENTUM,
            loss: LossKind::SoftLogistic,
            depth: DepthLimit::Saturated,
            t_max: DEFAULT_T_MAX,
            adaptive_rows: true,
            adaptive_cols: true,
            importance: ImportanceBackend::Impurity,
            seed: 0,
            early_stopping: true,
            record_patches: false,
        }
    }

    pub fn validate(&self, n_rows: usize, n_cols: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_obs == 0 || self.n_obs > n_rows {
            return fail(format!("minipatch rows must lie in 1..={n_rows}, got {}", self.n_obs));
        }
        if self.m_feat == 0 || self.m_feat > n_cols {
            return fail(format!("minipatch columns must lie in 1..={n_cols}, got {}", self.m_feat));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return fail(format!("momentum must lie in (0, 1), got {}", self.momentum));
        }
        if self.t_max == 0 {
            return fail("t_max must be at least 1".into());
        }
        if self.depth == DepthLimit::Max(0) {
            return fail("depth limit must be at least 1".into());
        }
        if let ImportanceBackend::Permutation { repeats: 0 } = self.importance {
            return fail("permutation importance needs at least one repeat".into());
        }
        Ok(())
    }
}

/// The `(n, m, momentum)` search grid: `n` in {50, 100, 200, 500}, `m` in
/// {5, 10, 15, 20, ceil(sqrt(M))}, momentum in {0.1, 0.3, 0.5, 0.7, 0.9}.
/// Entries that do not fit an `n_rows x n_cols` dataset are dropped, as are
/// duplicate `m` values.
pub fn tuning_grid(n_rows: usize, n_cols: usize) -> Vec<(usize, usize, f64)> {
    let sqrt_m = (n_cols as f64).sqrt().ceil() as usize;
    let mut ms = vec![5, 10, 15, 20];
    if !ms.contains(&sqrt_m) {
        ms.push(sqrt_m);
    }
    let mut grid = Vec::new();
    for n in [50, 100, 200, 500].into_iter().filter(|&n| n <= n_rows) {
        for &m in ms.iter().filter(|&&m| m >= 1 && m <= n_cols) {
            for mu in [0.1, 0.3, 0.5, 0.7, 0.9] {
                grid.push((n, m, mu));
            }
        }
    }
    grid
}

/// Per-row accumulators and the two sampling distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub p: ProbabilityVector,
    pub q: ProbabilityVector,
    /// Ensemble output `F` on every training row.
    pub ensemble_output: Vec<f64>,
    /// Out-of-patch output `G` on every training row.
    pub oop_output: Vec<f64>,
    pub oop_history: Vec<f64>,
    pub iteration: usize,
}

impl TrainState {
    pub fn new(n_rows: usize, n_cols: usize) -> Result<Self> {
        Ok(Self {
            p: ProbabilityVector::uniform(n_rows)?,
            q: ProbabilityVector::uniform(n_cols)?,
            ensemble_output: vec![0.0; n_rows],
            oop_output: vec![0.0; n_rows],
            oop_history: Vec::new(),
            iteration: 0,
        })
    }

    /// Adds the tree's vote to `F` for every row and to `G` for rows not in
    /// `patch_rows`. Returns the per-row votes.
    pub fn accumulate_outputs<T: Scalar>(
        &mut self,
        data: &Dataset<T>,
        tree: &DecisionTree<T>,
        columns: &[usize],
        patch_rows: &[usize],
    ) -> Vec<Label> {
        let mut in_patch = vec![false; data.n_rows()];
        for &i in patch_rows {
            in_patch[i] = true;
        }
        let votes: Vec<Label> = data
            .rows()
            .map(|row| tree.predict_projected(row, columns))
            .collect();
        for (i, &vote) in votes.iter().enumerate() {
            let v = f64::from(vote);
            self.ensemble_output[i] += v;
            if !in_patch[i] {
                self.oop_output[i] += v;
            }
        }
        votes
    }

    /// `p_i = L(y_i, F_i) / sum_k L(y_k, F_k)`, summed left to right.
    pub fn update_observation_probs(&mut self, labels: &[Label], kind: LossKind) -> Result<()> {
        let weights: Vec<f64> = labels
            .iter()
            .zip(&self.ensemble_output)
            .map(|(&y, &f)| loss(kind, y, f))
            .collect();
        self.p = ProbabilityVector::normalized(weights)?;
        Ok(())
    }

    /// `q_j <- (1 - mu) q_j + mu r I_j` for `j` in `columns`, where `r` is
    /// the current mass of `columns` and `I` is indexed in `columns` order.
    /// A flagged all-zero importance leaves `q` unchanged.
    pub fn update_feature_probs(&mut self, columns: &[usize], importance: &ImportanceVector, momentum: f64) {
        if importance.all_zero {
            return;
        }
        debug_assert_eq!(columns.len(), importance.scores.len());
        let q = self.q.as_mut_slice();
        let r: f64 = columns.iter().map(|&j| q[j]).sum();
        for (&j, &score) in columns.iter().zip(&importance.scores) {
            q[j] = (1.0 - momentum) * q[j] + momentum * r * score;
        }
    }

    /// Fraction of rows with `sign(G_i) = y_i`; `G_i = 0` counts as a miss.
    pub fn oop_accuracy(&self, labels: &[Label]) -> f64 {
        sign_accuracy(&self.oop_output, labels)
    }

    /// Fraction of rows with `sign(F_i) = y_i`; `F_i = 0` counts as a miss.
    pub fn train_accuracy(&self, labels: &[Label]) -> f64 {
        sign_accuracy(&self.ensemble_output, labels)
    }
}

fn sign_accuracy(outputs: &[f64], labels: &[Label]) -> f64 {
    let hits = outputs
        .iter()
        .zip(labels)
        .filter(|(&g, &y)| sign(g) == f64::from(y))
        .count();
    hits as f64 / labels.len() as f64
}

/// One weak learner with the dataset columns it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner<T> {
    pub tree: DecisionTree<T>,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub rng: String,
    pub n_rows: usize,
    pub n_cols: usize,
    pub feature_names: Option<Vec<String>>,
}

/// A trained model. Prediction uses the first `best_iteration` learners by
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinipatchEnsemble<T> {
    learners: Vec<Learner<T>>,
    best_iteration: usize,
    final_p: ProbabilityVector,
    final_q: ProbabilityVector,
    hyperparams: Hyperparams,
    metadata: Metadata,
}

impl<T: Scalar> MinipatchEnsemble<T> {
    pub fn new(
        learners: Vec<Learner<T>>,
        best_iteration: usize,
        final_p: ProbabilityVector,
        final_q: ProbabilityVector,
        hyperparams: Hyperparams,
        metadata: Metadata,
    ) -> Result<Self> {
        let model = Self {
            learners,
            best_iteration,
            final_p,
            final_q,
            hyperparams,
            metadata,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.best_iteration > self.learners.len() {
            return bad(format!(
                "best iteration {} exceeds {} learners",
                self.best_iteration,
                self.learners.len()
            ));
        }
        let m = self.hyperparams.m_feat;
        for (k, learner) in self.learners.iter().enumerate() {
            if learner.columns.len() != m || learner.tree.n_features() != m {
                return bad(format!("learner {k} does not have {m} columns"));
            }
            if learner.columns.iter().any(|&j| j >= self.metadata.n_cols) {
                return bad(format!("learner {k} reads a column outside 0..{}", self.metadata.n_cols));
            }
            learner.tree.validate()?;
        }
        if self.final_q.len() != self.metadata.n_cols || self.final_p.len() != self.metadata.n_rows {
            return bad("distribution lengths do not match the training shape".into());
        }
        Ok(())
    }

    pub fn learners(&self) -> &[Learner<T>] {
        &self.learners
    }

    pub fn best_iteration(&self) -> usize {
        self.best_iteration
    }

    pub fn final_p(&self) -> &ProbabilityVector {
        &self.final_p
    }

    pub fn final_q(&self) -> &ProbabilityVector {
        &self.final_q
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn n_cols(&self) -> usize {
        self.metadata.n_cols
    }

    fn used(&self, use_best: bool) -> &[Learner<T>] {
        if use_best {
            &self.learners[..self.best_iteration]
        } else {
            &self.learners
        }
    }

    /// Raw vote sum over the first `best_iteration` learners (or all).
    pub fn predict_margin(&self, row: &[T], use_best: bool) -> Result<f64> {
        if row.len() != self.metadata.n_cols {
            return Err(Error::WidthMismatch {
                expected: self.metadata.n_cols,
                got: row.len(),
            });
        }
        let votes: i64 = self
            .used(use_best)
            .iter()
            .map(|l| i64::from(l.tree.predict_projected(row, &l.columns)))
            .sum();
        Ok(votes as f64)
    }

    /// Sign of the margin; a zero margin predicts `+1`.
    pub fn predict(&self, row: &[T], use_best: bool) -> Result<Label> {
        Ok(if self.predict_margin(row, use_best)? >= 0.0 { 1 } else { -1 })
    }

    pub fn predict_dataset(&self, data: &Dataset<T>, use_best: bool) -> Result<Vec<Label>> {
        data.rows().map(|row| self.predict(row, use_best)).collect()
    }

    pub fn accuracy(&self, data: &Dataset<T>, use_best: bool) -> Result<f64> {
        let predictions = self.predict_dataset(data, use_best)?;
        let hits = predictions.iter().zip(data.labels()).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / data.n_rows() as f64)
    }
}

/// Curve point for one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Training accuracy of `sign(F)`, with `F = 0` counted as a miss.
    pub train_accuracy: f64,
    pub oop: f64,
    /// Accuracy of the running ensemble on the held-out set, when one was
    /// supplied (zero margins predict `+1`, as in [`MinipatchEnsemble::predict`]).
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub records: Vec<IterationRecord>,
    /// First iteration at which the stopping rule said halt.
    pub halt_iteration: Option<usize>,
    /// Row set of every iteration, when `record_patches` is on.
    pub patches: Option<Vec<Vec<usize>>>,
    pub ensemble_output: Vec<f64>,
    pub oop_output: Vec<f64>,
}

/// What one [`Trainer::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub t: usize,
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
    /// In-minipatch mass of `q` before the feature update.
    pub column_mass_before: f64,
    pub importance: ImportanceVector,
    pub oop: f64,
    pub decision: Decision,
}

/// Step-wise driver; [`train`] runs it to completion.
pub struct Trainer<'a, T> {
    data: &'a Dataset<T>,
    test: Option<&'a Dataset<T>>,
    hp: Hyperparams,
    rng: MpRng,
    state: TrainState,
    stopping: StoppingState,
    learners: Vec<Learner<T>>,
    test_output: Vec<f64>,
    diagnostics: Diagnostics,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(data: &'a Dataset<T>, test: Option<&'a Dataset<T>>, hp: &Hyperparams) -> Result<Self> {
        hp.validate(data.n_rows(), data.n_cols())?;
        if let Some(test) = test {
            if test.n_cols() != data.n_cols() {
                return Err(Error::WidthMismatch {
                    expected: data.n_cols(),
                    got: test.n_cols(),
                });
            }
        }
        Ok(Self {
            data,
            test,
            hp: hp.clone(),
            rng: MpRng::seed_from_u64(hp.seed),
            state: TrainState::new(data.n_rows(), data.n_cols())?,
            stopping: StoppingState::new(hp.n_obs, data.n_rows(), hp.t_max),
            learners: Vec::new(),
            test_output: vec![0.0; test.map_or(0, Dataset::n_rows)],
            diagnostics: Diagnostics {
                patches: hp.record_patches.then(Vec::new),
                ..Diagnostics::default()
            },
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn learners(&self) -> &[Learner<T>] {
        &self.learners
    }

    pub fn stopping(&self) -> &StoppingState {
        &self.stopping
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        let data = self.data;
        let hp = &self.hp;
        let t = self.state.iteration + 1;

        let mut rows = sample_without_replacement(&self.state.p, hp.n_obs, &mut self.rng)?;
        let mut columns = sample_without_replacement(&self.state.q, hp.m_feat, &mut self.rng)?;
        rows.sort_unstable();
        columns.sort_unstable();
        let (x, y) = data.minipatch(&rows, &columns);

        let tree = fit_tree(&x, columns.len(), &y, hp.depth)?;

        self.state.accumulate_outputs(data, &tree, &columns, &rows);
        if let Some(test) = self.test {
            for (out, row) in self.test_output.iter_mut().zip(test.rows()) {
                *out += f64::from(tree.predict_projected(row, &columns));
            }
        }

        if hp.adaptive_rows {
            self.state.update_observation_probs(data.labels(), hp.loss)?;
        }
        let column_mass_before: f64 = columns.iter().map(|&j| self.state.q[j]).sum();
        let importance = match hp.importance {
            ImportanceBackend::Impurity => impurity_importance(&tree)?,
            ImportanceBackend::Permutation { repeats } => {
                permutation_importance(&tree, &x, columns.len(), &y, repeats, &mut self.rng)
            }
        };
        if hp.adaptive_cols {
            self.state.update_feature_probs(&columns, &importance, hp.momentum);
        }

        let oop = self.state.oop_accuracy(data.labels());
        self.state.oop_history.push(oop);
        self.state.iteration = t;

        let test_accuracy = self.test.map(|test| {
            let hits = self
                .test_output
                .iter()
                .zip(test.labels())
                .filter(|(&f, &y)| (if f >= 0.0 { 1 } else { -1 }) == y)
                .count();
            hits as f64 / test.n_rows() as f64
        });
        self.diagnostics.records.push(IterationRecord {
            t,
            train_accuracy: self.state.train_accuracy(data.labels()),
            oop,
            test_accuracy,
        });
        if let Some(patches) = self.diagnostics.patches.as_mut() {
            patches.push(rows.clone());
        }

        let decision = self.stopping.observe(oop, t)?;
        if decision == Decision::Halt && self.diagnostics.halt_iteration.is_none() {
            self.diagnostics.halt_iteration = Some(t);
        }
        self.learners.push(Learner {
            tree,
            columns: columns.clone(),
        });

        Ok(StepOutcome {
            t,
            rows,
            columns,
            column_mass_before,
            importance,
            oop,
            decision,
        })
    }

    /// Steps until the stopping rule halts (when enabled) or `t_max`
    /// iterations have run.
    pub fn run(mut self) -> Result<(MinipatchEnsemble<T>, Diagnostics)> {
        loop {
            let outcome = self.step()?;
            let halted = self.hp.early_stopping && outcome.decision == Decision::Halt;
            if halted || outcome.t >= self.hp.t_max {
                break;
            }
        }
        Ok(self.finish())
    }

    /// Packages the current learners into a model. The best iteration is
    /// the first argmax of the out-of-patch accuracy history (which is what
    /// the stopping rule reports when the run ends on its halt), or every
    /// learner if that accuracy never rose above zero.
    pub fn finish(self) -> (MinipatchEnsemble<T>, Diagnostics) {
        let best = match first_argmax(&self.state.oop_history) {
            0 => self.learners.len(),
            t => t,
        };
        let metadata = Metadata {
            seed: self.hp.seed,
            rng: RNG_ALGORITHM.to_string(),
            n_rows: self.data.n_rows(),
            n_cols: self.data.n_cols(),
            feature_names: self.data.feature_names().map(<[String]>::to_vec),
        };
        let mut diagnostics = self.diagnostics;
        diagnostics.ensemble_output = self.state.ensemble_output;
        diagnostics.oop_output = self.state.oop_output;
        let model = MinipatchEnsemble {
            learners: self.learners,
            best_iteration: best,
            final_p: self.state.p,
            final_q: self.state.q,
            hyperparams: self.hp,
            metadata,
        };
        (model, diagnostics)
    }
}

/// 1-based index of the first strict maximum above zero; 0 if none.
fn first_argmax(history: &[f64]) -> usize {
    let mut best = (0, 0.0);
    for (i, &v) in history.iter().enumerate() {
        if v > best.1 {
            best = (i + 1, v);
        }
    }
    best.0
}

pub fn train<T: Scalar>(data: &Dataset<T>, hp: &Hyperparams) -> Result<(MinipatchEnsemble<T>, Diagnostics)> {
    Trainer::new(data, None, hp)?.run()
}

/// As [`train`], additionally tracking accuracy on `test` every iteration.
pub fn train_with_test<T: Scalar>(
    data: &Dataset<T>,
    test: Option<&Dataset<T>>,
    hp: &Hyperparams,
) -> Result<(MinipatchEnsemble<T>, Diagnostics)> {
    Trainer::new(data, test, hp)?.run()
}
