use std::fmt;
use std::str::FromStr;

use super::RefineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Relative,
    Absolute,
    MinRelAbs,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Relative => "relative",
            MetricKind::Absolute => "absolute",
            MetricKind::MinRelAbs => "min-rel-abs",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = RefineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relative" => Ok(MetricKind::Relative),
            "absolute" => Ok(MetricKind::Absolute),
            "min-rel-abs" => Ok(MetricKind::MinRelAbs),
            other => Err(RefineError::InvalidInput(format!(
                "unknown metric `{other}` (expected relative, absolute or min-rel-abs)"
            ))),
        }
    }
}

/// Interpolation error measure and the threshold a simplex must meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetric {
    kind: MetricKind,
    threshold: f64,
}

impl Default for ErrorMetric {
    fn default() -> Self {
        Self { kind: MetricKind::MinRelAbs, threshold: 0.05 }
    }
}

impl ErrorMetric {
    pub fn new(kind: MetricKind, threshold: f64) -> Result<Self, RefineError> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(RefineError::InvalidInput(format!("threshold must be positive and finite, got {threshold}")));
        }
        Ok(Self { kind, threshold })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn error(&self, model: f64, interp: f64) -> f64 {
        interpolation_error(model, interp, self.kind)
    }

    pub fn accepts(&self, error: f64) -> bool {
        error <= self.threshold
    }
}

/// Absolute, relative (denominator `max(|model|, |interp|)`) or the smaller
/// of the two. Both-zero pairs have zero error; non-finite inputs have
/// infinite error.
pub fn interpolation_error(model: f64, interp: f64, kind: MetricKind) -> f64 {
    if !model.is_finite() || !interp.is_finite() {
        return f64::INFINITY;
    }
    let abs = (model - interp).abs();
    if abs == 0.0 {
        return 0.0;
    }
    let rel = abs / model.abs().max(interp.abs());
    match kind {
        MetricKind::Absolute => abs,
        MetricKind::Relative => rel,
        MetricKind::MinRelAbs => abs.min(rel),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        assert_eq!(interpolation_error(2.0, 1.0, MetricKind::Relative), 0.5);
        assert_eq!(interpolation_error(2.0, 1.0, MetricKind::Absolute), 1.0);
        assert_eq!(interpolation_error(2.0, 1.0, MetricKind::MinRelAbs), 0.5);
        assert_relative_eq!(interpolation_error(0.001, -0.001, MetricKind::Relative), 2.0);
        assert_relative_eq!(interpolation_error(0.001, -0.001, MetricKind::Absolute), 0.002);
        assert_relative_eq!(interpolation_error(0.001, -0.001, MetricKind::MinRelAbs), 0.002);
        for kind in [MetricKind::Relative, MetricKind::Absolute, MetricKind::MinRelAbs] {
            assert_eq!(interpolation_error(5.0, 5.0, kind), 0.0);
            assert_eq!(interpolation_error(0.0, 0.0, kind), 0.0);
        }
    }

    #[test]
    fn relative_error_is_symmetric_and_bounded() {
        for (a, b) in [(3.0, -7.0), (-1.0, -4.0), (1e-300, 2e-300), (0.0, 1.0)] {
            let r = interpolation_error(a, b, MetricKind::Relative);
            assert_eq!(r, interpolation_error(b, a, MetricKind::Relative));
            assert!((0.0..=2.0).contains(&r));
        }
    }

    #[test]
    fn non_finite_values_never_pass() {
        let m = ErrorMetric::default();
        assert!(!m.accepts(m.error(f64::NAN, 1.0)));
        assert!(!m.accepts(m.error(1.0, f64::INFINITY)));
    }

    #[test]
    fn threshold_must_be_positive() {
        assert!(ErrorMetric::new(MetricKind::Absolute, 0.0).is_err());
        assert!(ErrorMetric::new(MetricKind::Absolute, f64::NAN).is_err());
        assert_eq!(ErrorMetric::default().threshold(), 0.05);
        assert_eq!("min-rel-abs".parse::<MetricKind>().unwrap(), MetricKind::MinRelAbs);
        assert!("rms".parse::<MetricKind>().is_err());
    }
}
