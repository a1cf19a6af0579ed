//! Feature engineering.
//!
//! Two families are derived from a raw record:
//!
//! * blade averages and the inside/outside temperature difference;
//! * turbine-physics proxies: torque, power coefficient `Cp`, thrust
//!   coefficient `Ct` and tip-speed ratio `lambda`.
//!
//! The physics proxies work on desensitized channels, so every denominator is
//! shifted by [`PHYSICS_OFFSET`] to keep it away from zero:
//!
//! ```text
//! torque = (power + 5) / (generator_speed + 5)
//! Cp     = (power + 5) / (wind_speed + 5)^3
//! Ct     = torque / (wind_speed + 5)^2
//! lambda = (generator_speed + 5) / (wind_speed + 5)
//! ```
//!
//! The model consumes a fixed ten-feature vector, see [`FeatureId`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{Channel, Class, Label, ScadaRecord};

/// Constant added to desensitized channels before dividing.
pub const PHYSICS_OFFSET: f64 = 5.0;
/// Shifted denominators must exceed this.
pub const DENOMINATOR_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("{0} + 5 is not positive; physics features are undefined")]
    DegenerateDenominator(Channel),
    #[error("invalid records cannot become feature vectors")]
    InvalidLabel,
    #[error("feature ranking needs both classes")]
    SingleClassDataset,
    #[error("unknown feature id `{0}`")]
    UnknownFeature(String),
}

/// The ten model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureId {
    X1,
    X2,
    X3,
    X4,
    X5,
    X6,
    X7,
    X8,
    X9,
    X10,
}

impl FeatureId {
    pub const ALL: [FeatureId; 10] = [
        FeatureId::X1,
        FeatureId::X2,
        FeatureId::X3,
        FeatureId::X4,
        FeatureId::X5,
        FeatureId::X6,
        FeatureId::X7,
        FeatureId::X8,
        FeatureId::X9,
        FeatureId::X10,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "x10"][self as usize]
    }

    /// Source quantity of this feature.
    pub const fn source(self) -> &'static str {
        [
            "pitch1_moto_tmp",
            "pitch2_moto_tmp",
            "pitch3_moto_tmp",
            "wind_speed",
            "environment_tmp",
            "tmp_diff",
            "power",
            "lambda",
            "torque",
            "pitch_angle_Ave",
        ][self as usize]
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureId {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureId::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FeatureError::UnknownFeature(s.into()))
    }
}

/// Read access to the ten model features.
pub trait FeatureAccess {
    fn feature(&self, id: FeatureId) -> f64;
}

impl FeatureAccess for [f64; 10] {
    fn feature(&self, id: FeatureId) -> f64 {
        self[id.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub x: [f64; 10],
    pub y: Class,
}

impl FeatureAccess for FeatureVector {
    fn feature(&self, id: FeatureId) -> f64 {
        self.x[id.index()]
    }
}

impl crate::preprocess::Labelled for FeatureVector {
    fn label(&self) -> Label {
        self.y.into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticalFeatures {
    pub pitch_angle_ave: f64,
    pub pitch_speed_ave: f64,
    pub pitch_moto_tmp_ave: f64,
    pub pitch_ng5_tmp_ave: f64,
    pub pitch_ng5_dc_ave: f64,
    pub tmp_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalFeatures {
    pub torque: f64,
    pub cp: f64,
    pub ct: f64,
    pub lambda: f64,
}

/// A raw record together with every derived feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineeredRecord {
    pub source: ScadaRecord,
    pub stats: StatisticalFeatures,
    pub physics: PhysicalFeatures,
}

fn mean3(a: f64, b: f64, c: f64) -> f64 {
    (a + b + c) / 3.0
}

pub fn statistical_features(r: &ScadaRecord) -> StatisticalFeatures {
    StatisticalFeatures {
        pitch_angle_ave: mean3(r.pitch1_angle, r.pitch2_angle, r.pitch3_angle),
        pitch_speed_ave: mean3(r.pitch1_speed, r.pitch2_speed, r.pitch3_speed),
        pitch_moto_tmp_ave: mean3(r.pitch1_moto_tmp, r.pitch2_moto_tmp, r.pitch3_moto_tmp),
        pitch_ng5_tmp_ave: mean3(r.pitch1_ng5_tmp, r.pitch2_ng5_tmp, r.pitch3_ng5_tmp),
        pitch_ng5_dc_ave: mean3(r.pitch1_ng5_dc, r.pitch2_ng5_dc, r.pitch3_ng5_dc),
        tmp_diff: r.int_tmp - r.environment_tmp,
    }
}

fn shifted(r: &ScadaRecord, channel: Channel) -> Result<f64, FeatureError> {
    let v = r.channel(channel) + PHYSICS_OFFSET;
    if v > DENOMINATOR_GUARD {
        Ok(v)
    } else {
        Err(FeatureError::DegenerateDenominator(channel))
    }
}

pub fn physical_features(r: &ScadaRecord) -> Result<PhysicalFeatures, FeatureError> {
    let wind = shifted(r, Channel::WindSpeed)?;
    let gen = shifted(r, Channel::GeneratorSpeed)?;
    let power = r.power + PHYSICS_OFFSET;
    let torque = power / gen;
    Ok(PhysicalFeatures {
        torque,
        cp: power / (wind * wind * wind),
        ct: torque / (wind * wind),
        lambda: gen / wind,
    })
}

pub fn engineer(source: &ScadaRecord) -> Result<EngineeredRecord, FeatureError> {
    Ok(EngineeredRecord {
        stats: statistical_features(source),
        physics: physical_features(source)?,
        source: source.clone(),
    })
}

impl EngineeredRecord {
    /// x1..x10 in order.
    pub fn model_features(&self) -> [f64; 10] {
        let s = &self.source;
        [
            s.pitch1_moto_tmp,
            s.pitch2_moto_tmp,
            s.pitch3_moto_tmp,
            s.wind_speed,
            s.environment_tmp,
            self.stats.tmp_diff,
            s.power,
            self.physics.lambda,
            self.physics.torque,
            self.stats.pitch_angle_ave,
        ]
    }

    /// Names of [`EngineeredRecord::extended_features`], in order.
    pub fn extended_names() -> Vec<&'static str> {
        let mut names: Vec<&'static str> = Channel::ALL.iter().map(|c| c.name()).collect();
        names.extend([
            "pitch_angle_Ave",
            "pitch_speed_Ave",
            "pitch_moto_tmpAve",
            "pitch_ng5_tmpAve",
            "pitch_ng5_DCAve",
            "tmp_diff",
            "torque",
            "Cp",
            "Ct",
            "lambda",
        ]);
        names
    }

    /// Every raw channel followed by every derived feature.
    pub fn extended_features(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Channel::ALL
            .iter()
            .map(|&c| self.source.channel(c))
            .collect();
        let st = &self.stats;
        let ph = &self.physics;
        out.extend([
            st.pitch_angle_ave,
            st.pitch_speed_ave,
            st.pitch_moto_tmp_ave,
            st.pitch_ng5_tmp_ave,
            st.pitch_ng5_dc_ave,
            st.tmp_diff,
            ph.torque,
            ph.cp,
            ph.ct,
            ph.lambda,
        ]);
        out
    }
}

pub fn assemble_feature_vector(
    record: &EngineeredRecord,
    label: Label,
) -> Result<FeatureVector, FeatureError> {
    let y = label.class().ok_or(FeatureError::InvalidLabel)?;
    Ok(FeatureVector {
        x: record.model_features(),
        y,
    })
}

/// The 26 raw continuous channels, for the raw-feature baseline.
pub fn raw_features(r: &ScadaRecord) -> Vec<f64> {
    Channel::ALL.iter().map(|&c| r.channel(c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub score: f64,
}

/// Fisher score `(mu_n - mu_a)^2 / (var_n + var_a)` per column, sorted
/// descending with ties broken by name. Zero pooled variance scores 0.
pub fn fisher_ranking(
    names: &[&str],
    rows: &[Vec<f64>],
    labels: &[Class],
) -> Result<Vec<FeatureScore>, FeatureError> {
    let mut stats = [ColumnStats::new(names.len()), ColumnStats::new(names.len())];
    for (row, &y) in rows.iter().zip(labels) {
        stats[y.as_index()].push(row);
    }
    if stats[0].n == 0 || stats[1].n == 0 {
        return Err(FeatureError::SingleClassDataset);
    }
    let (mu_n, var_n) = stats[0].moments();
    let (mu_a, var_a) = stats[1].moments();
    let mut scores: Vec<FeatureScore> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let pooled = var_n[j] + var_a[j];
            let gap = mu_n[j] - mu_a[j];
            let score = if pooled > 0.0 {
                gap * gap / pooled
            } else {
                0.0
            };
            FeatureScore {
                name: String::from(*name),
                score,
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(scores)
}

struct ColumnStats {
    n: usize,
    sum: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl ColumnStats {
    fn new(width: usize) -> Self {
        ColumnStats {
            n: 0,
            sum: alloc::vec![0.0; width],
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: &[f64]) {
        self.n += 1;
        for (s, v) in self.sum.iter_mut().zip(row) {
            *s += v;
        }
        self.rows.push(row.to_vec());
    }

    /// Means and population variances (two-pass).
    fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let mut var = alloc::vec![0.0; mean.len()];
        for row in &self.rows {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        (mean, var)
    }
}

/// Fisher ranking of x1..x10.
pub fn rank_features(dataset: &[FeatureVector]) -> Result<Vec<FeatureScore>, FeatureError> {
    let names: Vec<&str> = FeatureId::ALL.iter().map(|f| f.name()).collect();
    let rows: Vec<Vec<f64>> = dataset.iter().map(|fv| fv.x.to_vec()).collect();
    let labels: Vec<Class> = dataset.iter().map(|fv| fv.y).collect();
    fisher_ranking(&names, &rows, &labels)
}

/// Fisher ranking over every raw and derived feature.
pub fn rank_extended(
    dataset: &[(EngineeredRecord, Class)],
) -> Result<Vec<FeatureScore>, FeatureError> {
    let names = EngineeredRecord::extended_names();
    let rows: Vec<Vec<f64>> = dataset.iter().map(|(r, _)| r.extended_features()).collect();
    let labels: Vec<Class> = dataset.iter().map(|(_, y)| *y).collect();
    fisher_ranking(&names, &rows, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn base() -> ScadaRecord {
        ScadaRecord::filled(0, 0.0)
    }

    #[test]
    fn pitch_averages() {
        let mut r = base();
        (r.pitch1_angle, r.pitch2_angle, r.pitch3_angle) = (2.0, 2.0, 2.0);
        assert_eq!(statistical_features(&r).pitch_angle_ave, 2.0);
        (r.pitch1_angle, r.pitch2_angle, r.pitch3_angle) = (1.0, 2.0, 3.0);
        assert_eq!(statistical_features(&r).pitch_angle_ave, 2.0);
        r.int_tmp = 3.25;
        r.environment_tmp = 3.25;
        assert_eq!(statistical_features(&r).tmp_diff, 0.0);
        r.int_tmp = 4.0;
        assert_eq!(statistical_features(&r).tmp_diff, 0.75);
    }

    #[test]
    fn physics_examples() {
        let mut r = base();
        assert_eq!(physical_features(&r).unwrap().torque, 1.0);
        r.power = 10.0;
        r.generator_speed = 5.0;
        assert_eq!(physical_features(&r).unwrap().torque, 1.5);
        r.wind_speed = 5.0;
        assert_eq!(physical_features(&r).unwrap().lambda, 1.0);
        let mut r = base();
        r.power = 3.0;
        r.wind_speed = -3.0;
        assert_eq!(physical_features(&r).unwrap().cp, 1.0);
    }

    #[test]
    fn denominator_guard() {
        let mut r = base();
        r.wind_speed = -5.0;
        assert_eq!(
            physical_features(&r),
            Err(FeatureError::DegenerateDenominator(Channel::WindSpeed))
        );
        let mut r = base();
        r.generator_speed = -5.0 + 1e-7;
        assert_eq!(
            physical_features(&r),
            Err(FeatureError::DegenerateDenominator(Channel::GeneratorSpeed))
        );
        r.generator_speed = -5.0 + 1e-5;
        assert!(physical_features(&r).is_ok());
    }

    #[test]
    fn assembled_vector_projects_fields() {
        let mut r = base();
        r.wind_speed = 1.25;
        r.power = 10.0;
        r.generator_speed = 5.0;
        let e = engineer(&r).unwrap();
        let fv = assemble_feature_vector(&e, Label::Abnormal).unwrap();
        assert_eq!(fv.feature(FeatureId::X4), 1.25);
        assert_eq!(fv.feature(FeatureId::X9), 1.5);
        assert_eq!(fv.feature(FeatureId::X7), 10.0);
        assert_eq!(fv.y, Class::Abnormal);
        assert_eq!(
            assemble_feature_vector(&e, Label::Invalid),
            Err(FeatureError::InvalidLabel)
        );
    }

    #[test]
    fn feature_id_parsing() {
        assert_eq!("x10".parse::<FeatureId>().unwrap(), FeatureId::X10);
        assert_eq!("X4".parse::<FeatureId>().unwrap(), FeatureId::X4);
        assert!("x11".parse::<FeatureId>().is_err());
        assert_eq!(FeatureId::X8.source(), "lambda");
    }

    #[test]
    fn fisher_ranks_separated_feature_first() {
        // column 0 shifted by 10 between classes, column 1 identical; direct
        // evaluation: class means 0/10, variances 1/1 -> score 50
        let rows = vec![
            vec![-1.0, 0.0],
            vec![1.0, 1.0],
            vec![9.0, 0.0],
            vec![11.0, 1.0],
        ];
        let labels = vec![
            Class::Normal,
            Class::Normal,
            Class::Abnormal,
            Class::Abnormal,
        ];
        let ranked = fisher_ranking(&["a", "b"], &rows, &labels).unwrap();
        assert_eq!(ranked[0].name, "a");
        assert_eq!(ranked[0].score, 50.0);
        assert_eq!(ranked[1].score, 0.0);
        assert_eq!(
            fisher_ranking(&["a"], &[vec![1.0]], &[Class::Normal]),
            Err(FeatureError::SingleClassDataset)
        );
    }

    #[test]
    fn zero_variance_scores_zero_and_ties_sort_by_name() {
        let rows = vec![vec![1.0, 3.0], vec![2.0, 3.0]];
        let labels = vec![Class::Normal, Class::Abnormal];
        let ranked = fisher_ranking(&["zeta", "alpha"], &rows, &labels).unwrap();
        assert_eq!(ranked[0].name, "alpha");
        assert_eq!(ranked[1].name, "zeta");
        assert!(ranked.iter().all(|s| s.score == 0.0));
    }

    fn record_strategy() -> impl Strategy<Value = ScadaRecord> {
        (prop::collection::vec(-4.9f64..50.0, 26), any::<i64>()).prop_map(|(vals, group)| {
            let mut r = ScadaRecord::filled(0, 0.0);
            for (c, v) in Channel::ALL.iter().zip(vals) {
                *r.channel_mut(*c) = v;
            }
            r.group = group;
            r
        })
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    proptest! {
        #[test]
        fn engineered_fields_recompute(r in record_strategy()) {
            let e = engineer(&r).unwrap();
            prop_assert_eq!(&e, &engineer(&e.source).unwrap());
            let p = e.physics;
            prop_assert!(rel(p.lambda * (r.wind_speed + 5.0), r.generator_speed + 5.0) < 1e-9);
            prop_assert!(rel(p.torque * (r.generator_speed + 5.0), r.power + 5.0) < 1e-9);
            prop_assert!(rel(p.ct, p.cp / p.lambda) < 1e-9);
            let fv = assemble_feature_vector(&e, Label::Normal).unwrap();
            prop_assert_eq!(fv.feature(FeatureId::X6), r.int_tmp - r.environment_tmp);
        }

        #[test]
        fn fisher_order_survives_affine_rescaling(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 6..40),
            scales in prop::collection::vec(0.1f64..10.0, 3),
            offsets in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let labels: Vec<Class> = (0..rows.len()).map(|i| Class::from_index(i % 2)).collect();
            let names = ["a", "b", "c"];
            let before = fisher_ranking(&names, &rows, &labels).unwrap();
            let scaled: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().enumerate().map(|(j, v)| v * scales[j] + offsets[j]).collect())
                .collect();
            let after = fisher_ranking(&names, &scaled, &labels).unwrap();
            // only compare when scores are clearly distinct
            let distinct = before.windows(2).all(|w| w[0].score - w[1].score > 1e-6 * (1.0 + w[0].score));
            if distinct {
                let a: Vec<&str> = before.iter().map(|s| s.name.as_str()).collect();
                let b: Vec<&str> = after.iter().map(|s| s.name.as_str()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}
