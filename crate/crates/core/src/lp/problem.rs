use crate::scalar::Scalar;

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow<T> {
    pub terms: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

/// A linear program `opt c·x + offset` subject to rows and column bounds.
///
/// Infinite bounds are represented by `T::infinity()` / `T::neg_infinity()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub rows: Vec<LpRow<T>>,
    pub objective: Vec<T>,
    pub offset: T,
    pub maximize: bool,
}

impl<T: Scalar> Default for LinearProgram<T> {
    fn default() -> Self {
        Self::new(true)
    }
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(maximize: bool) -> Self {
        Self {
            lower: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            offset: T::zero(),
            maximize,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn add_var(&mut self, lower: T, upper: T, cost: T) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(cost);
        self.lower.len() - 1
    }

    pub fn add_free_var(&mut self, cost: T) -> usize {
        self.add_var(T::neg_infinity(), T::infinity(), cost)
    }

    pub fn add_row(&mut self, terms: Vec<(usize, T)>, sense: Sense, rhs: T) -> usize {
        self.rows.push(LpRow { terms, sense, rhs });
        self.rows.len() - 1
    }

    /// Objective value of `x` (including the offset).
    pub fn evaluate(&self, x: &[T]) -> T {
        self.objective
            .iter()
            .zip(x)
            .fold(self.offset, |acc, (&c, &v)| acc + c * v)
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let lhs = row.terms.iter().fold(T::zero(), |a, &(j, c)| a + c * x[j]);
            let v = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}
