use std::fmt;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// Sign of a decision value, with `sign(0) = +1`.
    #[inline]
    pub fn from_score(score: f64) -> Label {
        if score >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// `+1` or `-1`.
    #[inline]
    pub fn sign(self) -> i64 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.sign() as f64
    }

    #[inline]
    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn from_sign(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_score_is_positive() {
        assert_eq!(Label::from_score(2.3), Label::Positive);
        assert_eq!(Label::from_score(-0.1), Label::Negative);
        assert_eq!(Label::from_score(0.0), Label::Positive);
        assert_eq!(Label::from_score(-0.0), Label::Positive);
    }
}
