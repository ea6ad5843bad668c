use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::label::Label;

/// Fire is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub true_negative: u64,
    pub false_positive: u64,
    pub false_negative: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { true_positive: tp, true_negative: tn, false_positive: fp, false_negative: fn_ }
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.true_negative + self.false_positive + self.false_negative
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Fire, Label::Fire) => self.true_positive += 1,
            (Label::NonFire, Label::NonFire) => self.true_negative += 1,
            (Label::Fire, Label::NonFire) => self.false_positive += 1,
            (Label::NonFire, Label::Fire) => self.false_negative += 1,
        }
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::input(format!("{} predictions but {} labels", predictions.len(), labels.len())));
    }
    if predictions.is_empty() {
        return Err(Error::input("no predictions"));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &a) in predictions.iter().zip(labels) {
        c.record(p, a);
    }
    Ok(c)
}

/// An exact rate, or `None` when its denominator is zero.
pub type Rate = Option<Ratio<u64>>;

fn ser_rate<S: Serializer>(r: &Rate, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_f64(rate_f64(*r)),
        None => s.serialize_none(),
    }
}

pub fn rate_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricsReport {
    #[serde(serialize_with = "ser_rate")]
    pub fpr: Rate,
    #[serde(serialize_with = "ser_rate")]
    pub fnr: Rate,
    #[serde(serialize_with = "ser_rate")]
    pub tnr: Rate,
    #[serde(serialize_with = "ser_rate")]
    pub recall: Rate,
    #[serde(serialize_with = "ser_rate")]
    pub accuracy: Rate,
    #[serde(serialize_with = "ser_rate")]
    pub precision: Rate,
}

fn ratio(num: u64, den: u64) -> Rate {
    (den > 0).then(|| Ratio::new(num, den))
}

pub fn metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    if c.total() == 0 {
        return Err(Error::input("all confusion counts are zero"));
    }
    let (tp, tn, fp, fn_) = (c.true_positive, c.true_negative, c.false_positive, c.false_negative);
    Ok(MetricsReport {
        fpr: ratio(fp, fp + tn),
        fnr: ratio(fn_, tp + fn_),
        tnr: ratio(tn, fp + tn),
        recall: ratio(tp, tp + fn_),
        accuracy: ratio(tp + tn, c.total()),
        precision: ratio(tp, tp + fp),
    })
}

impl MetricsReport {
    /// `(name, value)` pairs in table order.
    pub fn rows(&self) -> [(&'static str, Rate); 6] {
        [
            ("fpr", self.fpr),
            ("fnr", self.fnr),
            ("tnr", self.tnr),
            ("recall", self.recall),
            ("accuracy", self.accuracy),
            ("precision", self.precision),
        ]
    }
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, r) in self.rows() {
            match r {
                Some(r) => writeln!(f, "{name:<10} {:.6} ({}/{})", rate_f64(r), r.numer(), r.denom())?,
                None => writeln!(f, "{name:<10} undefined")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tallies() {
        use Label::*;
        let c = confusion(&[Fire, Fire, NonFire, NonFire], &[Fire, NonFire, Fire, NonFire]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
        assert!(confusion(&[Fire], &[]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn undefined_is_not_zero() {
        let m = metrics(&ConfusionCounts::new(0, 4, 0, 0)).unwrap();
        assert_eq!(m.recall, None);
        assert_eq!(m.precision, None);
        assert_eq!(m.tnr, Some(Ratio::from_integer(1)));
        assert!(metrics(&ConfusionCounts::default()).is_err());
    }
}
