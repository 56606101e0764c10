//! Hardware-independent operation counts reported alongside wall-clock time.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    /// Cosine (or distance) evaluations between two token vectors.
    pub similarity_evals: u64,
    /// Transitions evaluated by the segmentation dynamic program.
    pub dp_cells: u64,
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.similarity_evals += rhs.similarity_evals;
        self.dp_cells += rhs.dp_cells;
    }
}
