use serde::{Deserialize, Serialize};

use crate::error::{QsimError, Result};

/// Ordered tensor factorisation `C^{d_1} ⊗ … ⊗ C^{d_n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FactorSpace {
    dims: Vec<usize>,
}

impl FactorSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(QsimError::InvalidSpace("at least one factor is required".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(QsimError::InvalidSpace(format!(
                "factor dimension {d} is below 2"
            )));
        }
        let mut total: usize = 1;
        for &d in &dims {
            total = total
                .checked_mul(d)
                .ok_or_else(|| QsimError::InvalidSpace("total dimension overflows".into()))?;
        }
        Ok(Self { dims })
    }

    /// `n` qubits.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn single(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Factor space of `self` followed by `other`.
    pub fn concat(&self, other: &FactorSpace) -> FactorSpace {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        FactorSpace { dims }
    }

    /// Sorted, deduplicated selection. Rejects empty selections, out-of-range
    /// indices and, unless `allow_full`, the full factor set.
    pub fn validate_selection(&self, selection: &[usize], allow_full: bool) -> Result<Vec<usize>> {
        let mut sel = selection.to_vec();
        sel.sort_unstable();
        sel.dedup();
        if sel.is_empty() {
            return Err(QsimError::InvalidSubsystems("selection is empty".into()));
        }
        if let Some(&bad) = sel.iter().find(|&&i| i >= self.dims.len()) {
            return Err(QsimError::InvalidSubsystems(format!(
                "factor {bad} out of range for {} factors",
                self.dims.len()
            )));
        }
        if !allow_full && sel.len() == self.dims.len() {
            return Err(QsimError::InvalidSubsystems(
                "selection covers every factor".into(),
            ));
        }
        Ok(sel)
    }

    /// Factor indices not in `selection`, ascending.
    pub fn complement(&self, selection: &[usize]) -> Vec<usize> {
        (0..self.dims.len()).filter(|i| !selection.contains(i)).collect()
    }

    /// Space formed by the selected factors, in ascending index order.
    pub fn subspace(&self, selection: &[usize]) -> Result<FactorSpace> {
        let sel = self.validate_selection(selection, true)?;
        Ok(FactorSpace {
            dims: sel.iter().map(|&i| self.dims[i]).collect(),
        })
    }

    pub fn selection_dim(&self, selection: &[usize]) -> usize {
        selection.iter().map(|&i| self.dims[i]).product()
    }

    /// Maps every global basis index to `(kept index, rest index)` for the
    /// split into `keep` and its complement. `keep` must be validated.
    pub(crate) fn bipartite_layout(&self, keep: &[usize]) -> BipartiteLayout {
        let rest = self.complement(keep);
        let keep_dim = self.selection_dim(keep);
        let rest_dim = self.selection_dim(&rest);
        let n = self.dims.len();
        let total = self.total_dim();
        let mut map = Vec::with_capacity(total);
        let mut digits = vec![0usize; n];
        for _ in 0..total {
            let mut k = 0;
            for &i in keep {
                k = k * self.dims[i] + digits[i];
            }
            let mut t = 0;
            for &i in &rest {
                t = t * self.dims[i] + digits[i];
            }
            map.push((k, t));
            // mixed-radix increment, last factor fastest
            for pos in (0..n).rev() {
                digits[pos] += 1;
                if digits[pos] < self.dims[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
        BipartiteLayout {
            keep_dim,
            rest_dim,
            map,
        }
    }
}

impl TryFrom<Vec<usize>> for FactorSpace {
    type Error = QsimError;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        FactorSpace::new(dims)
    }
}

impl From<FactorSpace> for Vec<usize> {
    fn from(space: FactorSpace) -> Self {
        space.dims
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BipartiteLayout {
    pub keep_dim: usize,
    pub rest_dim: usize,
    pub map: Vec<(usize, usize)>,
}
