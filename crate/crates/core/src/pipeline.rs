//! The two end-to-end flows and the deployable model bundle.
//!
//! Traditional: drop invalid, denoise, balance, train a single model.
//! Re-engineered: the same preprocessing, then the strong rule sends every
//! record it rejects straight to `normal`, the remaining candidates are split
//! by wind speed and each segment gets its own model.
//!
//! Each experiment is split into independent runs keyed by a derived seed
//! ([`Experiment::run`]) and a deterministic assembly step
//! ([`Experiment::report`]), so callers can execute runs in any order or in
//! parallel and still get identical reports.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{cross_validate, score_labels, EvalError, RunStatistics};
use crate::features::{engineer, raw_features, FeatureError, FeatureVector};
use crate::gate::{
    builtin_rule, gate, GateDecision, GateError, IntervalRule, RuleId, Segment, SegmentationConfig,
};
use crate::learners::{train, Algorithm, LearnerConfig, LearnerError, Matrix, TrainedModel};
use crate::preprocess::{
    balance, denoise_dataset, drop_invalid, window_mean, BalanceMethod, DenoiseConfig, Labelled,
    PreprocessError,
};
use crate::record::{Class, Label, LabeledDataset, ScadaRecord, Timestamp};
use crate::rng::derive_seeds;

pub const DEFAULT_MIN_SEGMENT: usize = 50;
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{segment} segment has {candidates} training candidates, need at least {minimum}")]
    SegmentTooSmall {
        segment: SegmentName,
        candidates: usize,
        minimum: usize,
    },
    #[error("no records left after preprocessing")]
    EmptyAfterPreprocessing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Traditional,
    Reengineered,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Traditional => "traditional",
            Variant::Reengineered => "reengineered",
        })
    }
}

/// Which columns a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    /// x1..x10
    Selected,
    /// The 26 raw channels.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: Variant,
    #[serde(default)]
    pub denoise: DenoiseConfig,
    #[serde(default = "default_balance")]
    pub balance: BalanceMethod,
    #[serde(default)]
    pub rule: Option<IntervalRule>,
    #[serde(default)]
    pub segmentation: Option<SegmentationConfig>,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default = "default_cv_k")]
    pub cv_k: usize,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_min_segment")]
    pub min_segment: usize,
    /// Traditional flow only: train on the raw channels instead of x1..x10.
    #[serde(default)]
    pub traditional_raw_features: bool,
}

fn default_balance() -> BalanceMethod {
    BalanceMethod::Under
}
fn default_cv_k() -> usize {
    5
}
fn default_n_runs() -> usize {
    10
}
fn default_min_segment() -> usize {
    DEFAULT_MIN_SEGMENT
}

impl PipelineConfig {
    pub fn traditional(learner: LearnerConfig) -> Self {
        PipelineConfig {
            variant: Variant::Traditional,
            denoise: DenoiseConfig::default(),
            balance: BalanceMethod::Under,
            rule: None,
            segmentation: None,
            learner,
            cv_k: 5,
            n_runs: 10,
            master_seed: 0,
            min_segment: DEFAULT_MIN_SEGMENT,
            traditional_raw_features: false,
        }
    }

    /// Rule 5 with the default segmentation point.
    pub fn reengineered(learner: LearnerConfig) -> Self {
        PipelineConfig {
            variant: Variant::Reengineered,
            rule: Some(builtin_rule(RuleId::R5).expect("builtin rule")),
            segmentation: Some(SegmentationConfig::default()),
            ..PipelineConfig::traditional(learner)
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        use PipelineError::Config as bad;
        match self.variant {
            Variant::Reengineered => {
                if self.rule.is_none() || self.segmentation.is_none() {
                    return Err(bad(
                        "the reengineered variant needs a rule and a segmentation",
                    ));
                }
                if self.traditional_raw_features {
                    return Err(bad(
                        "traditional_raw_features applies to the traditional variant only",
                    ));
                }
            }
            Variant::Traditional => {
                if self.rule.is_some() || self.segmentation.is_some() {
                    return Err(bad("the traditional variant takes no rule or segmentation"));
                }
            }
        }
        if let Some(s) = &self.segmentation {
            s.validate()?;
        }
        if self.denoise.window == 0 {
            return Err(bad("denoise.window must be at least 1"));
        }
        if self.cv_k < 2 {
            return Err(bad("cv_k must be at least 2"));
        }
        if self.n_runs == 0 {
            return Err(bad("n_runs must be at least 1"));
        }
        self.learner.validate()?;
        Ok(())
    }

    pub fn feature_set(&self) -> FeatureSet {
        if self.traditional_raw_features {
            FeatureSet::Raw
        } else {
            FeatureSet::Selected
        }
    }

    /// Child seed per run, derived from `master_seed`.
    pub fn run_seeds(&self) -> Vec<u64> {
        derive_seeds(self.master_seed, self.n_runs)
    }
}

/// A dataset after invalid removal, denoising and feature assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub turbine_id: String,
    pub vectors: Vec<FeatureVector>,
    /// Raw channels per record, kept for the raw-feature baseline.
    pub raw: Option<Matrix>,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn classes(&self) -> Vec<Class> {
        self.vectors.iter().map(|v| v.y).collect()
    }

    fn design(&self, set: FeatureSet) -> Matrix {
        match (set, &self.raw) {
            (FeatureSet::Raw, Some(raw)) => raw.clone(),
            _ => Matrix::from_features(&self.vectors),
        }
    }
}

pub fn prepare(
    dataset: &LabeledDataset,
    denoise: &DenoiseConfig,
    set: FeatureSet,
) -> Result<Prepared, PipelineError> {
    let valid = drop_invalid(dataset);
    if valid.is_empty() {
        return Err(PipelineError::EmptyAfterPreprocessing);
    }
    let smooth = denoise_dataset(&valid, denoise)?;
    let mut vectors = Vec::with_capacity(smooth.len());
    for r in smooth.records() {
        let y = r.label.class().ok_or(FeatureError::InvalidLabel)?;
        vectors.push(FeatureVector {
            x: engineer(&r.record)?.model_features(),
            y,
        });
    }
    let raw = match set {
        FeatureSet::Raw => {
            let rows: Vec<Vec<f64>> = smooth
                .records()
                .iter()
                .map(|r| raw_features(&r.record))
                .collect();
            Some(Matrix::from_rows(&rows)?)
        }
        FeatureSet::Selected => None,
    };
    Ok(Prepared {
        turbine_id: smooth.turbine_id().to_string(),
        vectors,
        raw,
    })
}

#[derive(Clone, Copy)]
struct Tagged {
    index: usize,
    class: Class,
}

impl Labelled for Tagged {
    fn label(&self) -> Label {
        self.class.into()
    }
}

fn balanced_indices(
    classes: &[Class],
    subset: &[usize],
    method: BalanceMethod,
    seed: u64,
) -> Result<Vec<usize>, PipelineError> {
    let items: Vec<Tagged> = subset
        .iter()
        .map(|&index| Tagged {
            index,
            class: classes[index],
        })
        .collect();
    Ok(balance(&items, method, seed)?
        .into_iter()
        .map(|t| t.index)
        .collect())
}

fn learner_for_run(cfg: &LearnerConfig, seed: u64) -> LearnerConfig {
    let mut learner = cfg.clone();
    learner.mlp.seed = seed;
    learner
}

struct Fitted {
    model: TrainedModel,
    cv: Option<f64>,
}

/// Balance, optionally cross-validate, then train on the whole balanced set.
fn fit_subset(
    x: &Matrix,
    classes: &[Class],
    subset: &[usize],
    cfg: &PipelineConfig,
    seed: u64,
    with_cv: bool,
) -> Result<Fitted, PipelineError> {
    let seeds = derive_seeds(seed, 3);
    let idx = balanced_indices(classes, subset, cfg.balance, seeds[0])?;
    let bx = x.select(&idx);
    let by: Vec<Class> = idx.iter().map(|&i| classes[i]).collect();
    let learner = learner_for_run(&cfg.learner, seeds[2]);
    let cv = if with_cv {
        Some(cross_validate(&bx, &by, &learner, cfg.cv_k, seeds[1])?.mean)
    } else {
        None
    };
    Ok(Fitted {
        model: train(&learner, &bx, &by)?,
        cv,
    })
}

/// Report row segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentName {
    All,
    Low,
    High,
    Pooled,
}

impl fmt::Display for SegmentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentName::All => "all",
            SegmentName::Low => "low",
            SegmentName::High => "high",
            SegmentName::Pooled => "pooled",
        })
    }
}

impl From<Segment> for SegmentName {
    fn from(s: Segment) -> Self {
        match s {
            Segment::Low => SegmentName::Low,
            Segment::High => SegmentName::High,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pipeline: Variant,
    pub algorithm: Algorithm,
    pub segment: SegmentName,
    pub cv_mean: f64,
    pub cv_std: f64,
    /// `None` when no run produced a scorable test set for this segment.
    pub test_mean: Option<f64>,
    pub test_std: Option<f64>,
    pub n_runs: usize,
    /// Runs that contributed to the test statistics.
    pub test_runs: usize,
    pub seeds: Vec<u64>,
}

impl ReportRow {
    fn new(
        pipeline: Variant,
        algorithm: Algorithm,
        segment: SegmentName,
        cv: &[f64],
        test: &[Option<f64>],
        seeds: &[u64],
    ) -> Self {
        let cv = RunStatistics::from_scores(cv).expect("at least one run");
        let scored: Vec<f64> = test.iter().flatten().copied().collect();
        let test = RunStatistics::from_scores(&scored);
        ReportRow {
            pipeline,
            algorithm,
            segment,
            cv_mean: cv.mean,
            cv_std: cv.std,
            test_mean: test.map(|t| t.mean),
            test_std: test.map(|t| t.std),
            n_runs: cv.runs,
            test_runs: scored.len(),
            seeds: seeds.to_vec(),
        }
    }

    /// `cv_mean - test_mean`
    pub fn gap(&self) -> Option<f64> {
        self.test_mean.map(|t| self.cv_mean - t)
    }
}

/// Where test records went in one re-engineered run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlowCounts {
    pub auto_normal: usize,
    pub low: usize,
    pub high: usize,
    pub total: usize,
}

impl FlowCounts {
    pub fn is_conserved(&self) -> bool {
        self.auto_normal + self.low + self.high == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Filled in by whoever serialized the config.
    pub config_hash: Option<String>,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub train_dataset: String,
    pub test_dataset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub rows: Vec<ReportRow>,
    /// Per run, re-engineered flows only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_flows: Vec<FlowCounts>,
}

impl ExperimentReport {
    pub fn row(&self, pipeline: Variant, segment: SegmentName) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.pipeline == pipeline && r.segment == segment)
    }

    /// Appends the rows of a report over the same data and seeds.
    pub fn merge(&mut self, other: ExperimentReport) -> Result<(), PipelineError> {
        let (a, b) = (&self.provenance, &other.provenance);
        if a.seeds != b.seeds
            || a.train_dataset != b.train_dataset
            || a.test_dataset != b.test_dataset
        {
            return Err(PipelineError::Config(
                "reports cover different data or seeds",
            ));
        }
        self.rows.extend(other.rows);
        self.test_flows.extend(other.test_flows);
        Ok(())
    }
}

/// Independent seeded runs plus a deterministic assembly step.
pub trait Experiment {
    type Run;

    fn seeds(&self) -> Vec<u64>;
    fn run(&self, seed: u64) -> Result<Self::Run, PipelineError>;
    /// `runs` must be in seed order.
    fn report(&self, runs: &[Self::Run]) -> ExperimentReport;

    fn run_all(&self) -> Result<ExperimentReport, PipelineError> {
        let runs = self
            .seeds()
            .into_iter()
            .map(|s| self.run(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.report(&runs))
    }
}

fn provenance(cfg: &PipelineConfig, train: &Prepared, test: &Prepared) -> Provenance {
    Provenance {
        config_hash: None,
        master_seed: cfg.master_seed,
        seeds: cfg.run_seeds(),
        train_dataset: train.turbine_id.clone(),
        test_dataset: test.turbine_id.clone(),
    }
}

pub struct TraditionalExperiment {
    cfg: PipelineConfig,
    train: Prepared,
    test: Prepared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraditionalRun {
    pub cv: f64,
    pub test: f64,
}

impl TraditionalExperiment {
    pub fn new(
        train: &LabeledDataset,
        test: &LabeledDataset,
        cfg: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        if cfg.variant != Variant::Traditional {
            return Err(PipelineError::Config("expected the traditional variant"));
        }
        Ok(TraditionalExperiment {
            train: prepare(train, &cfg.denoise, cfg.feature_set())?,
            test: prepare(test, &cfg.denoise, cfg.feature_set())?,
            cfg: cfg.clone(),
        })
    }
}

impl Experiment for TraditionalExperiment {
    type Run = TraditionalRun;

    fn seeds(&self) -> Vec<u64> {
        self.cfg.run_seeds()
    }

    fn run(&self, seed: u64) -> Result<TraditionalRun, PipelineError> {
        let set = self.cfg.feature_set();
        let x = self.train.design(set);
        let classes = self.train.classes();
        let all: Vec<usize> = (0..classes.len()).collect();
        let fitted = fit_subset(&x, &classes, &all, &self.cfg, seed, true)?;
        let predicted = fitted.model.predict_all(&self.test.design(set));
        let test = score_labels(&self.test.classes(), &predicted)?.value();
        Ok(TraditionalRun {
            cv: fitted.cv.expect("cv requested"),
            test,
        })
    }

    fn report(&self, runs: &[TraditionalRun]) -> ExperimentReport {
        let seeds = self.seeds();
        let cv: Vec<f64> = runs.iter().map(|r| r.cv).collect();
        let test: Vec<Option<f64>> = runs.iter().map(|r| Some(r.test)).collect();
        ExperimentReport {
            provenance: provenance(&self.cfg, &self.train, &self.test),
            rows: alloc::vec![ReportRow::new(
                Variant::Traditional,
                self.cfg.learner.algorithm,
                SegmentName::All,
                &cv,
                &test,
                &seeds
            )],
            test_flows: Vec::new(),
        }
    }
}

pub struct ReengineeredExperiment {
    cfg: PipelineConfig,
    rule: IntervalRule,
    segmentation: SegmentationConfig,
    train: Prepared,
    test: Prepared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReengineeredRun {
    pub cv_low: f64,
    pub cv_high: f64,
    /// Segment CV scores weighted by training candidate counts.
    pub cv_pooled: f64,
    pub test_low: Option<f64>,
    pub test_high: Option<f64>,
    /// Every test record, AutoNormal included.
    pub test_pooled: f64,
    pub test_flow: FlowCounts,
}

struct SegmentModels {
    low: Fitted,
    high: Fitted,
    low_candidates: usize,
    high_candidates: usize,
}

fn route(
    vectors: &[FeatureVector],
    rule: &IntervalRule,
    seg: &SegmentationConfig,
) -> Vec<GateDecision> {
    vectors.iter().map(|v| gate(v, rule, seg)).collect()
}

fn fit_segments(
    data: &Prepared,
    rule: &IntervalRule,
    seg: &SegmentationConfig,
    cfg: &PipelineConfig,
    seed: u64,
    with_cv: bool,
) -> Result<SegmentModels, PipelineError> {
    let decisions = route(&data.vectors, rule, seg);
    let members = |s: Segment| -> Vec<usize> {
        decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == GateDecision::Candidate(s))
            .map(|(i, _)| i)
            .collect()
    };
    let (low, high) = (members(Segment::Low), members(Segment::High));
    for (name, idx) in [(SegmentName::Low, &low), (SegmentName::High, &high)] {
        if idx.len() < cfg.min_segment {
            return Err(PipelineError::SegmentTooSmall {
                segment: name,
                candidates: idx.len(),
                minimum: cfg.min_segment,
            });
        }
    }
    let x = Matrix::from_features(&data.vectors);
    let classes = data.classes();
    let seeds = derive_seeds(seed, 2);
    Ok(SegmentModels {
        low: fit_subset(&x, &classes, &low, cfg, seeds[0], with_cv)?,
        high: fit_subset(&x, &classes, &high, cfg, seeds[1], with_cv)?,
        low_candidates: low.len(),
        high_candidates: high.len(),
    })
}

/// Competition score, or `None` if a class is missing.
fn optional_score(actual: &[Class], predicted: &[Class]) -> Option<f64> {
    score_labels(actual, predicted).ok().map(|s| s.value())
}

impl ReengineeredExperiment {
    pub fn new(
        train: &LabeledDataset,
        test: &LabeledDataset,
        cfg: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let (Some(rule), Some(segmentation)) = (cfg.rule.clone(), cfg.segmentation) else {
            return Err(PipelineError::Config("expected the reengineered variant"));
        };
        Ok(ReengineeredExperiment {
            rule,
            segmentation,
            train: prepare(train, &cfg.denoise, FeatureSet::Selected)?,
            test: prepare(test, &cfg.denoise, FeatureSet::Selected)?,
            cfg: cfg.clone(),
        })
    }
}

impl Experiment for ReengineeredExperiment {
    type Run = ReengineeredRun;

    fn seeds(&self) -> Vec<u64> {
        self.cfg.run_seeds()
    }

    fn run(&self, seed: u64) -> Result<ReengineeredRun, PipelineError> {
        let models = fit_segments(
            &self.train,
            &self.rule,
            &self.segmentation,
            &self.cfg,
            seed,
            true,
        )?;
        let (cv_low, cv_high) = (
            models.low.cv.expect("cv requested"),
            models.high.cv.expect("cv requested"),
        );
        let (nl, nh) = (models.low_candidates as f64, models.high_candidates as f64);

        let mut flow = FlowCounts {
            total: self.test.len(),
            ..FlowCounts::default()
        };
        let mut pooled = Vec::with_capacity(self.test.len());
        let mut per_segment: [(Vec<Class>, Vec<Class>); 2] = Default::default();
        for v in &self.test.vectors {
            let predicted = match gate(v, &self.rule, &self.segmentation) {
                GateDecision::AutoNormal => {
                    flow.auto_normal += 1;
                    Class::Normal
                }
                GateDecision::Candidate(s) => {
                    let (model, slot) = match s {
                        Segment::Low => {
                            flow.low += 1;
                            (&models.low.model, 0)
                        }
                        Segment::High => {
                            flow.high += 1;
                            (&models.high.model, 1)
                        }
                    };
                    let p = model.predict(&v.x);
                    per_segment[slot].0.push(v.y);
                    per_segment[slot].1.push(p);
                    p
                }
            };
            pooled.push(predicted);
        }
        debug_assert!(flow.is_conserved());
        Ok(ReengineeredRun {
            cv_low,
            cv_high,
            cv_pooled: (nl * cv_low + nh * cv_high) / (nl + nh),
            test_low: optional_score(&per_segment[0].0, &per_segment[0].1),
            test_high: optional_score(&per_segment[1].0, &per_segment[1].1),
            test_pooled: score_labels(&self.test.classes(), &pooled)?.value(),
            test_flow: flow,
        })
    }

    fn report(&self, runs: &[ReengineeredRun]) -> ExperimentReport {
        let seeds = self.seeds();
        let algorithm = self.cfg.learner.algorithm;
        let row = |segment, cv: Vec<f64>, test: Vec<Option<f64>>| {
            ReportRow::new(
                Variant::Reengineered,
                algorithm,
                segment,
                &cv,
                &test,
                &seeds,
            )
        };
        ExperimentReport {
            provenance: provenance(&self.cfg, &self.train, &self.test),
            rows: alloc::vec![
                row(
                    SegmentName::Low,
                    runs.iter().map(|r| r.cv_low).collect(),
                    runs.iter().map(|r| r.test_low).collect()
                ),
                row(
                    SegmentName::High,
                    runs.iter().map(|r| r.cv_high).collect(),
                    runs.iter().map(|r| r.test_high).collect()
                ),
                row(
                    SegmentName::Pooled,
                    runs.iter().map(|r| r.cv_pooled).collect(),
                    runs.iter().map(|r| Some(r.test_pooled)).collect()
                ),
            ],
            test_flows: runs.iter().map(|r| r.test_flow).collect(),
        }
    }
}

pub fn run_traditional(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &PipelineConfig,
) -> Result<ExperimentReport, PipelineError> {
    TraditionalExperiment::new(train, test, cfg)?.run_all()
}

pub fn run_reengineered(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &PipelineConfig,
) -> Result<ExperimentReport, PipelineError> {
    ReengineeredExperiment::new(train, test, cfg)?.run_all()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum BundleKind {
    Traditional {
        features: FeatureSet,
        model: TrainedModel,
    },
    Reengineered {
        rule: IntervalRule,
        segmentation: SegmentationConfig,
        low: TrainedModel,
        high: TrainedModel,
    },
}

/// Everything needed to label a raw SCADA stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub denoise: DenoiseConfig,
    pub kind: BundleKind,
}

impl ModelBundle {
    pub fn variant(&self) -> Variant {
        match self.kind {
            BundleKind::Traditional { .. } => Variant::Traditional,
            BundleKind::Reengineered { .. } => Variant::Reengineered,
        }
    }
}

/// Trains a deployable bundle on the whole training set with one seed.
pub fn train_bundle(
    train_set: &LabeledDataset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<ModelBundle, PipelineError> {
    cfg.validate()?;
    let kind = match (&cfg.rule, &cfg.segmentation) {
        (Some(rule), Some(seg)) => {
            let data = prepare(train_set, &cfg.denoise, FeatureSet::Selected)?;
            let models = fit_segments(&data, rule, seg, cfg, seed, false)?;
            BundleKind::Reengineered {
                rule: rule.clone(),
                segmentation: *seg,
                low: models.low.model,
                high: models.high.model,
            }
        }
        _ => {
            let set = cfg.feature_set();
            let data = prepare(train_set, &cfg.denoise, set)?;
            let classes = data.classes();
            let all: Vec<usize> = (0..classes.len()).collect();
            BundleKind::Traditional {
                features: set,
                model: fit_subset(&data.design(set), &classes, &all, cfg, seed, false)?.model,
            }
        }
    };
    Ok(ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        denoise: cfg.denoise.clone(),
        kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamLabel {
    pub time: Timestamp,
    pub label: Class,
    /// Smoothed over fewer records than the configured window.
    pub low_confidence: bool,
}

/// Labels every record of a raw stream, oldest first.
///
/// Smoothing uses a trailing window, so the first `window - 1` records are
/// averaged over what is available and flagged as low confidence.
pub fn predict_stream(
    bundle: &ModelBundle,
    records: &[ScadaRecord],
) -> Result<Vec<StreamLabel>, PipelineError> {
    let w = bundle.denoise.window;
    if w == 0 {
        return Err(PipelineError::Config("denoise.window must be at least 1"));
    }
    let mut out = Vec::with_capacity(records.len());
    let mut column = Vec::with_capacity(w);
    for (i, raw) in records.iter().enumerate() {
        let window = &records[(i + 1).saturating_sub(w)..=i];
        let mut smooth = raw.clone();
        for &c in &bundle.denoise.channels {
            column.clear();
            column.extend(window.iter().map(|r| r.channel(c)));
            *smooth.channel_mut(c) = window_mean(&column);
        }
        let label = match &bundle.kind {
            BundleKind::Traditional { features, model } => match features {
                FeatureSet::Raw => model.predict(&raw_features(&smooth)),
                FeatureSet::Selected => model.predict(&engineer(&smooth)?.model_features()),
            },
            BundleKind::Reengineered {
                rule,
                segmentation,
                low,
                high,
            } => {
                let x = engineer(&smooth)?.model_features();
                match gate(&x, rule, segmentation) {
                    GateDecision::AutoNormal => Class::Normal,
                    GateDecision::Candidate(Segment::Low) => low.predict(&x),
                    GateDecision::Candidate(Segment::High) => high.predict(&x),
                }
            }
        };
        out.push(StreamLabel {
            time: raw.time,
            label,
            low_confidence: window.len() < w,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::apply_label_windows;
    use crate::synth::{generate_turbine, SynthConfig};

    fn turbine(seed: u64, duration: usize) -> LabeledDataset {
        let out = generate_turbine(&SynthConfig {
            duration,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        apply_label_windows("wt", out.records, &out.truth_windows).unwrap()
    }

    fn quick(mut cfg: PipelineConfig) -> PipelineConfig {
        cfg.n_runs = 2;
        cfg
    }

    #[test]
    fn variant_invariants_enforced() {
        let mut t = PipelineConfig::traditional(LearnerConfig::default());
        assert!(t.validate().is_ok());
        t.rule = Some(builtin_rule(RuleId::R5).unwrap());
        assert!(matches!(t.validate(), Err(PipelineError::Config(_))));
        let mut r = PipelineConfig::reengineered(LearnerConfig::default());
        assert!(r.validate().is_ok());
        r.segmentation = None;
        assert!(r.validate().is_err());
        let mut r = PipelineConfig::reengineered(LearnerConfig::default());
        r.traditional_raw_features = true;
        assert!(r.validate().is_err());
    }

    #[test]
    fn single_run_has_zero_std() {
        let ds = turbine(11, 20_000);
        let mut cfg = PipelineConfig::traditional(LearnerConfig::default());
        cfg.n_runs = 1;
        let report = run_traditional(&ds, &ds, &cfg).unwrap();
        let row = &report.rows[0];
        assert_eq!((row.cv_std, row.test_std), (0.0, Some(0.0)));
        assert_eq!(row.seeds.len(), 1);
    }

    #[test]
    fn same_data_test_close_to_cv() {
        let ds = turbine(12, 20_000);
        let report = run_traditional(
            &ds,
            &ds,
            &quick(PipelineConfig::traditional(LearnerConfig::default())),
        )
        .unwrap();
        let row = &report.rows[0];
        assert!(row.test_mean.unwrap() >= row.cv_mean - 5.0, "{row:?}");
    }

    #[test]
    fn reengineered_reports_segments_and_conserves_flow() {
        let ds = turbine(13, 20_000);
        let cfg = quick(PipelineConfig::reengineered(LearnerConfig::default()));
        let report = run_reengineered(&ds, &ds, &cfg).unwrap();
        for s in [SegmentName::Low, SegmentName::High, SegmentName::Pooled] {
            assert!(report.row(Variant::Reengineered, s).is_some());
        }
        assert_eq!(report.test_flows.len(), 2);
        let n = prepare(&ds, &cfg.denoise, FeatureSet::Selected)
            .unwrap()
            .len();
        for f in &report.test_flows {
            assert!(f.is_conserved());
            assert_eq!(f.total, n);
        }
    }

    #[test]
    fn nothing_passes_the_rule() {
        let ds = turbine(14, 5_000);
        let mut cfg = PipelineConfig::reengineered(LearnerConfig::default());
        cfg.rule = Some(
            IntervalRule::custom(alloc::vec![crate::gate::IntervalConstraint::below(
                crate::features::FeatureId::X4,
                -1e9
            )])
            .unwrap(),
        );
        assert!(matches!(
            run_reengineered(&ds, &ds, &cfg),
            Err(PipelineError::SegmentTooSmall { .. })
        ));
    }

    #[test]
    fn runs_reproduce() {
        let ds = turbine(15, 10_000);
        let cfg = quick(PipelineConfig::reengineered(LearnerConfig::default()));
        let e = ReengineeredExperiment::new(&ds, &ds, &cfg).unwrap();
        let s = e.seeds()[1];
        assert_eq!(e.run(s).unwrap(), e.run(s).unwrap());
        assert_eq!(
            e.run_all().unwrap(),
            run_reengineered(&ds, &ds, &cfg).unwrap()
        );
    }

    #[test]
    fn stream_flags_partial_windows() {
        let ds = turbine(16, 30_000);
        let cfg = PipelineConfig::reengineered(LearnerConfig::default());
        let bundle = train_bundle(&ds, &cfg, 1).unwrap();
        let records: Vec<ScadaRecord> = ds
            .records()
            .iter()
            .take(50)
            .map(|r| r.record.clone())
            .collect();
        let labels = predict_stream(&bundle, &records).unwrap();
        assert_eq!(labels.len(), 50);
        assert!(labels[..9].iter().all(|l| l.low_confidence));
        assert!(labels[9..].iter().all(|l| !l.low_confidence));
        assert!(labels.iter().zip(&records).all(|(l, r)| l.time == r.time));
    }
}
