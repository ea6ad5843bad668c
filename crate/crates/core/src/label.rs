use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Scalar;

/// Binary class with fire as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fire,
    #[serde(rename = "nonfire")]
    NonFire,
}

impl Label {
    /// `+1` for fire, `-1` otherwise.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Label::Fire => T::one(),
            Label::NonFire => -T::one(),
        }
    }

    /// Sign rule on a raw score: non-negative means fire.
    pub fn from_score<T: Scalar>(score: T) -> Self {
        if score >= T::zero() {
            Label::Fire
        } else {
            Label::NonFire
        }
    }

    pub fn is_fire(self) -> bool {
        self == Label::Fire
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fire => "fire",
            Label::NonFire => "nonfire",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "fire" => Ok(Label::Fire),
            "nonfire" => Ok(Label::NonFire),
            other => Err(Error::input(format!("unknown label {other:?}; expected fire or nonfire"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_rule() {
        assert_eq!(Label::from_score(2.3f64), Label::Fire);
        assert_eq!(Label::from_score(-0.1f64), Label::NonFire);
        assert_eq!(Label::from_score(0.0f64), Label::Fire);
        assert_eq!(Label::Fire.sign::<f64>(), 1.0);
        assert_eq!(Label::NonFire.sign::<f32>(), -1.0);
    }

    #[test]
    fn parse() {
        assert_eq!("fire".parse::<Label>().unwrap(), Label::Fire);
        assert_eq!("nonfire".parse::<Label>().unwrap(), Label::NonFire);
        assert!("smoke".parse::<Label>().is_err());
    }
}
