//! Timestamp cells: integer epoch seconds or ISO-8601.

use chrono::{DateTime, NaiveDateTime};
use icewatch_core::record::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFormat {
    EpochSeconds,
    Iso8601,
}

const NAIVE_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
];

impl TimeFormat {
    /// Picks the format from a sample cell.
    pub fn detect(cell: &str) -> Option<TimeFormat> {
        if cell.trim().parse::<i64>().is_ok() {
            Some(TimeFormat::EpochSeconds)
        } else if parse_iso(cell).is_some() {
            Some(TimeFormat::Iso8601)
        } else {
            None
        }
    }

    pub fn parse(self, cell: &str) -> Option<Timestamp> {
        match self {
            TimeFormat::EpochSeconds => cell.trim().parse().ok(),
            TimeFormat::Iso8601 => parse_iso(cell),
        }
    }
}

/// RFC 3339 with an offset, or a naive date-time read as UTC. Fractional
/// seconds are truncated.
fn parse_iso(cell: &str) -> Option<Timestamp> {
    let cell = cell.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(cell) {
        return Some(t.timestamp());
    }
    NAIVE_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(cell, f).ok())
        .map(|t| t.and_utc().timestamp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_and_parses() {
        assert_eq!(
            TimeFormat::detect("1446336000"),
            Some(TimeFormat::EpochSeconds)
        );
        assert_eq!(
            TimeFormat::detect("2015-11-01T00:00:00Z"),
            Some(TimeFormat::Iso8601)
        );
        assert_eq!(TimeFormat::detect("yesterday"), None);
        let iso = TimeFormat::Iso8601;
        assert_eq!(iso.parse("2015-11-01T00:00:00Z"), Some(1_446_336_000));
        assert_eq!(iso.parse("2015-11-01 00:00:07"), Some(1_446_336_007));
        assert_eq!(iso.parse("2015-11-01T08:00:00+08:00"), Some(1_446_336_000));
        assert_eq!(iso.parse("2015-11-01 00:00:07.500"), Some(1_446_336_007));
        assert_eq!(TimeFormat::EpochSeconds.parse("2015-11-01"), None);
    }
}
