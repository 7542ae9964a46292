//! Column layout of the VAR regressor `x_t = [1, y_{t−1}', …, y_{t−p}']`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarLayout {
    pub m: usize,
    pub p: usize,
    pub intercept: bool,
}

/// What a column of `x_t` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Intercept,
    Lag { lag: usize, var: usize },
}

impl VarLayout {
    pub fn new(m: usize, p: usize, intercept: bool) -> Self {
        VarLayout { m, p, intercept }
    }

    /// Regressors per equation.
    pub fn k(&self) -> usize {
        self.m * self.p + usize::from(self.intercept)
    }

    /// Total coefficients `m·k`.
    pub fn total(&self) -> usize {
        self.m * self.k()
    }

    pub fn slot(&self, col: usize) -> Slot {
        let off = usize::from(self.intercept);
        if col < off {
            return Slot::Intercept;
        }
        let c = col - off;
        Slot::Lag {
            lag: c / self.m + 1,
            var: c % self.m,
        }
    }

    /// Column holding `y_{t−lag, var}`.
    pub fn column(&self, lag: usize, var: usize) -> usize {
        usize::from(self.intercept) + (lag - 1) * self.m + var
    }

    /// Range of flat (row-major `vec(B)`) indices owned by equation `i`.
    pub fn equation_range(&self, i: usize) -> std::ops::Range<usize> {
        let k = self.k();
        i * k..(i + 1) * k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_roundtrip() {
        let l = VarLayout::new(3, 2, true);
        assert_eq!(l.k(), 7);
        assert_eq!(l.total(), 21);
        assert_eq!(l.slot(0), Slot::Intercept);
        for lag in 1..=2 {
            for var in 0..3 {
                assert_eq!(l.slot(l.column(lag, var)), Slot::Lag { lag, var });
            }
        }
        assert_eq!(l.equation_range(2), 14..21);
        let no_int = VarLayout::new(2, 1, false);
        assert_eq!(no_int.slot(0), Slot::Lag { lag: 1, var: 0 });
    }
}
