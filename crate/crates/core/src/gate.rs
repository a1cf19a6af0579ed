//! Strong-rule filtering and wind-speed segmentation.
//!
//! A strong rule is a conjunction of interval constraints over x1..x10. Records
//! that fail it are declared normal outright; the rest are routed to a low- or
//! high-wind model by comparing x4 with the segmentation threshold.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureAccess, FeatureId};

pub const DEFAULT_SEGMENT_THRESHOLD: f64 = -0.25;
/// Cut-in candidates tried when choosing the segmentation point.
pub const CANDIDATE_THRESHOLDS: [f64; 5] = [0.0, -0.25, -0.5, -0.75, -1.0];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GateError {
    #[error("unknown rule `{0}`")]
    UnknownRule(alloc::string::String),
    #[error("a rule needs at least one constraint")]
    EmptyRule,
    #[error("feature {0} is constrained more than once")]
    DuplicateFeature(FeatureId),
    #[error("constraint on {0} has lower bound above upper bound or a non-finite bound")]
    InvalidBounds(FeatureId),
    #[error("segmentation threshold must be finite")]
    NonFiniteThreshold,
}

/// `lower (<|<=) x (<|<=) upper`; a missing bound is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalConstraint {
    pub feature: FeatureId,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub lower_inclusive: bool,
    #[serde(default)]
    pub upper_inclusive: bool,
}

impl IntervalConstraint {
    /// `x < bound`
    pub const fn below(feature: FeatureId, bound: f64) -> Self {
        IntervalConstraint {
            feature,
            lower: None,
            upper: Some(bound),
            lower_inclusive: false,
            upper_inclusive: false,
        }
    }

    /// `lower < x < upper`
    pub const fn open(feature: FeatureId, lower: f64, upper: f64) -> Self {
        IntervalConstraint {
            feature,
            lower: Some(lower),
            upper: Some(upper),
            lower_inclusive: false,
            upper_inclusive: false,
        }
    }

    /// `lower <= x <= upper`
    pub const fn closed(feature: FeatureId, lower: f64, upper: f64) -> Self {
        IntervalConstraint {
            feature,
            lower: Some(lower),
            upper: Some(upper),
            lower_inclusive: true,
            upper_inclusive: true,
        }
    }

    pub fn validate(&self) -> Result<(), GateError> {
        let bad = || GateError::InvalidBounds(self.feature);
        if self.lower.is_some_and(|v| !v.is_finite()) || self.upper.is_some_and(|v| !v.is_finite())
        {
            return Err(bad());
        }
        match (self.lower, self.upper) {
            (Some(lo), Some(hi)) if lo > hi => Err(bad()),
            _ => Ok(()),
        }
    }

    pub fn holds(&self, value: f64) -> bool {
        let lower_ok = match self.lower {
            None => true,
            Some(lo) if self.lower_inclusive => value >= lo,
            Some(lo) => value > lo,
        };
        let upper_ok = match self.upper {
            None => true,
            Some(hi) if self.upper_inclusive => value <= hi,
            Some(hi) => value < hi,
        };
        lower_ok && upper_ok
    }
}

impl fmt::Display for IntervalConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(lo) = self.lower {
            write!(f, "{lo} {} ", if self.lower_inclusive { "<=" } else { "<" })?;
        }
        write!(f, "{}", self.feature)?;
        if let Some(hi) = self.upper {
            write!(f, " {} {hi}", if self.upper_inclusive { "<=" } else { "<" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
    Custom,
}

impl RuleId {
    pub const BUILTIN: [RuleId; 5] = [RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4, RuleId::R5];
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for RuleId {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "R1" => Ok(RuleId::R1),
            "R2" => Ok(RuleId::R2),
            "R3" => Ok(RuleId::R3),
            "R4" => Ok(RuleId::R4),
            "R5" => Ok(RuleId::R5),
            _ => Err(GateError::UnknownRule(s.into())),
        }
    }
}

/// Conjunction of interval constraints, at most one per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule")]
pub struct IntervalRule {
    id: RuleId,
    constraints: Vec<IntervalConstraint>,
}

#[derive(Deserialize)]
struct RawRule {
    id: RuleId,
    constraints: Vec<IntervalConstraint>,
}

impl TryFrom<RawRule> for IntervalRule {
    type Error = GateError;

    fn try_from(raw: RawRule) -> Result<Self, Self::Error> {
        IntervalRule::new(raw.id, raw.constraints)
    }
}

impl IntervalRule {
    pub fn new(id: RuleId, constraints: Vec<IntervalConstraint>) -> Result<Self, GateError> {
        if constraints.is_empty() {
            return Err(GateError::EmptyRule);
        }
        for (i, c) in constraints.iter().enumerate() {
            c.validate()?;
            if constraints[..i].iter().any(|p| p.feature == c.feature) {
                return Err(GateError::DuplicateFeature(c.feature));
            }
        }
        Ok(IntervalRule { id, constraints })
    }

    pub fn custom(constraints: Vec<IntervalConstraint>) -> Result<Self, GateError> {
        IntervalRule::new(RuleId::Custom, constraints)
    }

    pub fn id(&self) -> RuleId {
        self.id
    }

    pub fn constraints(&self) -> &[IntervalConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, feature: FeatureId) -> Option<&IntervalConstraint> {
        self.constraints.iter().find(|c| c.feature == feature)
    }
}

impl fmt::Display for IntervalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.id)?;
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// The five hand-written icing rules. R5 is the production filter.
///
/// ```text
/// R1: x4 < 2
/// R2: 0.2 <= x10 <= 0.4
/// R3: x4 < 2 & 0.2 <= x10 <= 0.4
/// R4: x4 < 2 & x5 < 1.5 & 0.15 < x10 < 0.36
/// R5: x4 < 2 & x5 < 1.5 & 0.15 < x10 < 0.36 & x7 < 2
/// ```
pub fn builtin_rule(id: RuleId) -> Result<IntervalRule, GateError> {
    use FeatureId::*;
    let low_wind = IntervalConstraint::below(X4, 2.0);
    let cold = IntervalConstraint::below(X5, 1.5);
    let narrow_pitch = IntervalConstraint::open(X10, 0.15, 0.36);
    let constraints = match id {
        RuleId::R1 => alloc::vec![low_wind],
        RuleId::R2 => alloc::vec![IntervalConstraint::closed(X10, 0.2, 0.4)],
        RuleId::R3 => alloc::vec![low_wind, IntervalConstraint::closed(X10, 0.2, 0.4)],
        RuleId::R4 => alloc::vec![low_wind, cold, narrow_pitch],
        RuleId::R5 => alloc::vec![
            low_wind,
            cold,
            narrow_pitch,
            IntervalConstraint::below(X7, 2.0)
        ],
        RuleId::Custom => return Err(GateError::UnknownRule("Custom".into())),
    };
    IntervalRule::new(id, constraints)
}

pub fn rule_satisfied<F: FeatureAccess + ?Sized>(rule: &IntervalRule, fv: &F) -> bool {
    rule.constraints
        .iter()
        .all(|c| c.holds(fv.feature(c.feature)))
}

/// Splits into `(candidates, auto_normal)`, order preserved within each part.
pub fn strong_rule_filter<F: FeatureAccess + Clone>(
    dataset: &[F],
    rule: &IntervalRule,
) -> (Vec<F>, Vec<F>) {
    dataset
        .iter()
        .cloned()
        .partition(|fv| rule_satisfied(rule, fv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub threshold: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            threshold: DEFAULT_SEGMENT_THRESHOLD,
        }
    }
}

impl SegmentationConfig {
    pub fn new(threshold: f64) -> Result<Self, GateError> {
        let cfg = SegmentationConfig { threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GateError> {
        if self.threshold.is_finite() {
            Ok(())
        } else {
            Err(GateError::NonFiniteThreshold)
        }
    }

    /// `x4 < threshold` is low; the threshold itself is high.
    pub fn classify<F: FeatureAccess + ?Sized>(&self, fv: &F) -> Segment {
        if fv.feature(FeatureId::X4) < self.threshold {
            Segment::Low
        } else {
            Segment::High
        }
    }
}

/// Splits into `(low, high)` by wind speed, order preserved.
pub fn segment<F: FeatureAccess + Clone>(
    dataset: &[F],
    cfg: &SegmentationConfig,
) -> (Vec<F>, Vec<F>) {
    dataset
        .iter()
        .cloned()
        .partition(|fv| cfg.classify(fv) == Segment::Low)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateDecision {
    AutoNormal,
    Candidate(Segment),
}

pub fn gate<F: FeatureAccess + ?Sized>(
    fv: &F,
    rule: &IntervalRule,
    cfg: &SegmentationConfig,
) -> GateDecision {
    if rule_satisfied(rule, fv) {
        GateDecision::Candidate(cfg.classify(fv))
    } else {
        GateDecision::AutoNormal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::record::Class;
    use alloc::vec;

    fn fv(x4: f64, x5: f64, x7: f64, x10: f64) -> FeatureVector {
        let mut x = [0.0; 10];
        x[3] = x4;
        x[4] = x5;
        x[6] = x7;
        x[9] = x10;
        FeatureVector {
            x,
            y: Class::Normal,
        }
    }

    #[test]
    fn builtin_shapes() {
        let r2 = builtin_rule(RuleId::R2).unwrap();
        let c = r2.constraint(FeatureId::X10).unwrap();
        assert_eq!((c.lower, c.upper), (Some(0.2), Some(0.4)));
        assert!(c.lower_inclusive && c.upper_inclusive);
        let r5 = builtin_rule(RuleId::R5).unwrap();
        let feats: Vec<FeatureId> = r5.constraints().iter().map(|c| c.feature).collect();
        assert_eq!(
            feats,
            vec![FeatureId::X4, FeatureId::X5, FeatureId::X10, FeatureId::X7]
        );
        assert_eq!(builtin_rule(RuleId::R1).unwrap().constraints().len(), 1);
        assert!(matches!(
            builtin_rule(RuleId::Custom),
            Err(GateError::UnknownRule(_))
        ));
        assert!("R9".parse::<RuleId>().is_err());
        assert_eq!("r5".parse::<RuleId>().unwrap(), RuleId::R5);
    }

    #[test]
    fn r5_boundaries() {
        let r5 = builtin_rule(RuleId::R5).unwrap();
        assert!(rule_satisfied(&r5, &fv(1.0, 0.0, 1.0, 0.20)));
        assert!(!rule_satisfied(&r5, &fv(2.0, 0.0, 1.0, 0.20)));
        assert!(!rule_satisfied(&r5, &fv(1.0, 0.0, 1.0, 0.15)));
        assert!(!rule_satisfied(&r5, &fv(1.0, 0.0, 2.0, 0.20)));
        assert!(!rule_satisfied(&r5, &fv(1.0, 1.5, 1.0, 0.20)));
    }

    #[test]
    fn rule_validation() {
        let c = IntervalConstraint::below(FeatureId::X4, 2.0);
        assert_eq!(
            IntervalRule::custom(vec![c, c]),
            Err(GateError::DuplicateFeature(FeatureId::X4))
        );
        assert_eq!(IntervalRule::custom(vec![]), Err(GateError::EmptyRule));
        let bad = IntervalConstraint::open(FeatureId::X1, 3.0, 1.0);
        assert_eq!(
            IntervalRule::custom(vec![bad]),
            Err(GateError::InvalidBounds(FeatureId::X1))
        );
        let nan = IntervalConstraint::below(FeatureId::X1, f64::NAN);
        assert!(IntervalRule::custom(vec![nan]).is_err());
    }

    #[test]
    fn filter_fixture_of_ten() {
        let r5 = builtin_rule(RuleId::R5).unwrap();
        let data = vec![
            fv(1.0, 0.0, 1.0, 0.2),     // pass
            fv(3.0, 0.0, 1.0, 0.2),     // wind
            fv(1.9, 1.4, 1.9, 0.35),    // pass
            fv(1.0, 2.0, 1.0, 0.2),     // temp
            fv(-1.0, -3.0, -0.5, 0.16), // pass
            fv(1.0, 0.0, 5.0, 0.2),     // power
            fv(1.0, 0.0, 1.0, 0.36),    // pitch upper
            fv(0.0, 0.0, 0.0, 0.3),     // pass
            fv(1.0, 0.0, 1.0, 0.1),     // pitch lower
            fv(2.5, 2.5, 2.5, 0.5),     // all
        ];
        let (cand, auto) = strong_rule_filter(&data, &r5);
        assert_eq!((cand.len(), auto.len()), (4, 6));
        assert_eq!(cand[1], data[2]);
        assert_eq!(auto[0], data[1]);
        let (c, a) = strong_rule_filter::<FeatureVector>(&[], &r5);
        assert!(c.is_empty() && a.is_empty());
        let windy: Vec<FeatureVector> = (0..5).map(|i| fv(2.0 + i as f64, 0.0, 0.0, 0.2)).collect();
        let (c, a) = strong_rule_filter(&windy, &r5);
        assert!(c.is_empty());
        assert_eq!(a, windy);
    }

    #[test]
    fn segmentation_boundary_goes_high() {
        let cfg = SegmentationConfig::default();
        assert_eq!(cfg.classify(&fv(-0.3, 0.0, 0.0, 0.0)), Segment::Low);
        assert_eq!(cfg.classify(&fv(-0.25, 0.0, 0.0, 0.0)), Segment::High);
        for t in CANDIDATE_THRESHOLDS {
            assert!(SegmentationConfig::new(t).is_ok());
        }
        assert!(SegmentationConfig::new(f64::INFINITY).is_err());
    }

    #[test]
    fn gate_composition() {
        let r5 = builtin_rule(RuleId::R5).unwrap();
        let cfg = SegmentationConfig::default();
        assert_eq!(
            gate(&fv(5.0, 0.0, 0.0, 0.2), &r5, &cfg),
            GateDecision::AutoNormal
        );
        assert_eq!(
            gate(&fv(-1.0, 0.0, 0.0, 0.2), &r5, &cfg),
            GateDecision::Candidate(Segment::Low)
        );
        assert_eq!(
            gate(&fv(1.0, 0.0, 0.0, 0.2), &r5, &cfg),
            GateDecision::Candidate(Segment::High)
        );
    }

    #[test]
    fn display_renders_bounds() {
        let r4 = builtin_rule(RuleId::R4).unwrap();
        assert_eq!(
            alloc::format!("{r4}"),
            "R4: x4 < 2 & x5 < 1.5 & 0.15 < x10 < 0.36"
        );
    }
}
