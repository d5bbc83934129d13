use rand::Rng;

use crate::qcore::{sample_index, CMatrix};

/// Matrix outcomes match a selector when every entry is this close.
pub const MATRIX_MATCH_TOLERANCE: f64 = 1e-9;
/// Real outcomes match a selector when this close.
pub const REAL_MATCH_TOLERANCE: f64 = 1e-12;

/// Classical output of one device use.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Real(f64),
    Label(i64),
    Bit(u8),
    /// Matrix description; `precision` is the binary precision used, if any.
    Matrix {
        entries: CMatrix,
        precision: Option<u32>,
    },
    /// Error code of the finite-label devices. Carries the probability mass
    /// of all labels outside the reportable range.
    Overflow { excluded_mass: f64 },
}

impl Outcome {
    /// Outcome identity used for OPF selectors: reals and matrices compare
    /// within tolerance, overflow codes compare equal regardless of mass.
    pub fn matches(&self, other: &Outcome) -> bool {
        match (self, other) {
            (Outcome::Real(a), Outcome::Real(b)) => (a - b).abs() <= REAL_MATCH_TOLERANCE,
            (Outcome::Label(a), Outcome::Label(b)) => a == b,
            (Outcome::Bit(a), Outcome::Bit(b)) => a == b,
            (Outcome::Matrix { entries: a, .. }, Outcome::Matrix { entries: b, .. }) => {
                a.shape() == b.shape()
                    && a.iter()
                        .zip(b.iter())
                        .all(|(x, y)| (x - y).norm() <= MATRIX_MATCH_TOLERANCE)
            }
            (Outcome::Overflow { .. }, Outcome::Overflow { .. }) => true,
            _ => false,
        }
    }

    pub fn same_type(&self, other: &Outcome) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Outcome::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<i64> {
        match self {
            Outcome::Label(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bit(&self) -> Option<u8> {
        match self {
            Outcome::Bit(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&CMatrix> {
        match self {
            Outcome::Matrix { entries, .. } => Some(entries),
            _ => None,
        }
    }

    pub fn is_overflow(&self) -> bool {
        matches!(self, Outcome::Overflow { .. })
    }
}

/// Finite outcome distribution. Entries are not merged: two entries may carry
/// the same reported value.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    entries: Vec<(Outcome, f64)>,
}

impl OutcomeDistribution {
    pub fn new(entries: Vec<(Outcome, f64)>) -> Self {
        Self { entries }
    }

    pub fn certain(outcome: Outcome) -> Self {
        Self {
            entries: vec![(outcome, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(Outcome, f64)] {
        &self.entries
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, p)| *p).collect()
    }

    /// Total probability of entries matching `selector`.
    pub fn probability_of(&self, selector: &Outcome) -> f64 {
        self.entries
            .iter()
            .filter(|(o, _)| o.matches(selector))
            .fold(0.0, |acc, (_, p)| acc + p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, (_, p)| acc + p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        let i = sample_index(&self.probabilities(), rng);
        self.entries[i].0.clone()
    }

    /// Index of the entry matching `outcome`, if any.
    pub fn position(&self, outcome: &Outcome) -> Option<usize> {
        self.entries.iter().position(|(o, _)| o.matches(outcome))
    }
}
