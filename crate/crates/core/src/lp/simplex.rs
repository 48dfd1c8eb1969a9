use super::{LinearProgram, LpResult, LpStatus, Sense, VarStatus};
use crate::error::{Error, Result};
use crate::scalar::{Scalar, Tolerances};

/// Knobs for [`solve_with`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Consecutive degenerate pivots tolerated before switching from Dantzig
    /// pricing to Bland's rule for the rest of the phase.
    pub degenerate_limit: usize,
    /// Hard cap on iterations per phase; `None` derives one from the size.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            degenerate_limit: 50,
            max_iterations: None,
        }
    }
}

pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpResult<T>> {
    solve_with(lp, &SimplexOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Nonbasic {
    Lower,
    Upper,
    Free,
}

const NOT_BASIC: usize = usize::MAX;

struct Tableau<T> {
    m: usize,
    ncol: usize,
    n: usize,
    art_start: usize,
    /// Current tableau `B^-1 [A | I | S]`, row-major.
    t: Vec<T>,
    /// The untransformed matrix, kept for the final re-solve.
    orig: Vec<T>,
    rhs: Vec<T>,
    lo: Vec<T>,
    hi: Vec<T>,
    x: Vec<T>,
    state: Vec<Nonbasic>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    cost: Vec<T>,
    d: Vec<T>,
    tol: Tolerances<T>,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

pub fn solve_with<T: Scalar>(lp: &LinearProgram<T>, opts: &SimplexOptions) -> Result<LpResult<T>> {
    let n = lp.num_vars();
    if lp.upper.len() != n || lp.objective.len() != n {
        return Err(Error::Lp("bound/objective vectors disagree in length".into()));
    }
    for j in 0..n {
        if lp.lower[j].is_nan() || lp.upper[j].is_nan() || !lp.objective[j].is_finite() {
            return Err(Error::Lp(format!("non-finite data in column {j}")));
        }
    }
    for (i, row) in lp.rows.iter().enumerate() {
        if !row.rhs.is_finite() {
            return Err(Error::Lp(format!("non-finite rhs in row {i}")));
        }
        for &(j, c) in &row.terms {
            if j >= n {
                return Err(Error::Lp(format!("row {i} references column {j} out of range")));
            }
            if !c.is_finite() {
                return Err(Error::Lp(format!("non-finite coefficient in row {i}")));
            }
        }
    }

    let tol = T::tolerances();
    if (0..n).any(|j| lp.lower[j] > lp.upper[j] + tol.feasibility) {
        return Ok(infeasible(lp));
    }

    let mut tab = Tableau::build(lp, tol);
    let limit = opts
        .max_iterations
        .unwrap_or(20_000 + 50 * (tab.m + tab.ncol));

    // Phase one: drive the artificials to zero.
    if tab.ncol > tab.art_start {
        for j in 0..tab.ncol {
            tab.cost[j] = if j >= tab.art_start { -T::one() } else { T::zero() };
        }
        tab.price();
        match tab.run(opts.degenerate_limit, limit)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return Err(Error::Lp("phase one reported unbounded".into())),
        }
        let infeas: T = (tab.art_start..tab.ncol).map(|j| tab.x[j]).sum();
        let scale = T::one() + tab.rhs.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        if infeas > tol.feasibility * scale {
            let mut res = infeasible(lp);
            res.iterations = tab.iterations;
            return Ok(res);
        }
        tab.expel_artificials();
    }

    // Phase two.
    for j in 0..tab.ncol {
        tab.cost[j] = if j < n {
            if lp.maximize {
                lp.objective[j]
            } else {
                -lp.objective[j]
            }
        } else {
            T::zero()
        };
    }
    tab.price();
    let status = match tab.run(opts.degenerate_limit, limit)? {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
    };

    let (duals_max, reduced_max) = tab.polish();
    let x: Vec<T> = tab.x[..n].to_vec();
    let sign = if lp.maximize { T::one() } else { -T::one() };
    let basis = (0..n + tab.m)
        .map(|j| {
            if tab.pos[j] != NOT_BASIC {
                VarStatus::Basic
            } else {
                match tab.state[j] {
                    Nonbasic::Lower => VarStatus::AtLower,
                    Nonbasic::Upper => VarStatus::AtUpper,
                    Nonbasic::Free => VarStatus::Free,
                }
            }
        })
        .collect();
    for v in &x {
        if !v.is_finite() {
            return Err(Error::Lp("numerical breakdown: non-finite primal value".into()));
        }
    }
    Ok(LpResult {
        status,
        objective: lp.evaluate(&x),
        x,
        duals: duals_max.into_iter().map(|y| y * sign).collect(),
        reduced_costs: reduced_max.into_iter().map(|d| d * sign).collect(),
        basis,
        iterations: tab.iterations,
    })
}

fn infeasible<T: Scalar>(lp: &LinearProgram<T>) -> LpResult<T> {
    LpResult {
        status: LpStatus::Infeasible,
        objective: T::nan(),
        x: vec![T::nan(); lp.num_vars()],
        duals: vec![T::zero(); lp.rows.len()],
        reduced_costs: vec![T::zero(); lp.num_vars()],
        basis: Vec::new(),
        iterations: 0,
    }
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>, tol: Tolerances<T>) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();

        let mut x0 = vec![T::zero(); n];
        let mut state = vec![Nonbasic::Free; n];
        for j in 0..n {
            if lp.lower[j].is_finite() {
                x0[j] = lp.lower[j];
                state[j] = Nonbasic::Lower;
            } else if lp.upper[j].is_finite() {
                x0[j] = lp.upper[j];
                state[j] = Nonbasic::Upper;
            }
        }

        // Decide, row by row, whether the slack can be basic or an artificial is needed.
        let mut dense_rows = vec![vec![T::zero(); n]; m];
        let mut slack_bounds = Vec::with_capacity(m);
        let mut art_sign: Vec<Option<T>> = Vec::with_capacity(m);
        let mut slack_val = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, c) in &row.terms {
                dense_rows[i][j] += c;
            }
            let (slo, shi) = match row.sense {
                Sense::Le => (T::zero(), T::infinity()),
                Sense::Ge => (T::neg_infinity(), T::zero()),
                Sense::Eq => (T::zero(), T::zero()),
            };
            let r = row.rhs
                - dense_rows[i]
                    .iter()
                    .zip(&x0)
                    .fold(T::zero(), |a, (&c, &v)| a + c * v);
            slack_bounds.push((slo, shi));
            if r >= slo && r <= shi {
                art_sign.push(None);
                slack_val.push(r);
            } else {
                let s = if r < slo { slo } else { shi };
                let e = r - s;
                art_sign.push(Some(if e > T::zero() { T::one() } else { -T::one() }));
                slack_val.push(s);
            }
        }
        let _ = tol;

        let nart = art_sign.iter().filter(|s| s.is_some()).count();
        let art_start = n + m;
        let ncol = n + m + nart;
        let mut orig = vec![T::zero(); m * ncol];
        let mut lo = vec![T::zero(); ncol];
        let mut hi = vec![T::zero(); ncol];
        let mut x = vec![T::zero(); ncol];
        let mut st = vec![Nonbasic::Lower; ncol];
        let mut basis = vec![NOT_BASIC; m];
        let mut pos = vec![NOT_BASIC; ncol];

        lo[..n].copy_from_slice(&lp.lower);
        hi[..n].copy_from_slice(&lp.upper);
        x[..n].copy_from_slice(&x0);
        st[..n].copy_from_slice(&state);

        let mut next_art = art_start;
        for i in 0..m {
            let row = &mut orig[i * ncol..(i + 1) * ncol];
            row[..n].copy_from_slice(&dense_rows[i]);
            row[n + i] = T::one();
            let sc = n + i;
            lo[sc] = slack_bounds[i].0;
            hi[sc] = slack_bounds[i].1;
            x[sc] = slack_val[i];
            match art_sign[i] {
                None => {
                    basis[i] = sc;
                    pos[sc] = i;
                }
                Some(s) => {
                    st[sc] = if slack_val[i] == slack_bounds[i].0 {
                        Nonbasic::Lower
                    } else {
                        Nonbasic::Upper
                    };
                    let a = next_art;
                    next_art += 1;
                    row[a] = s;
                    lo[a] = T::zero();
                    hi[a] = T::infinity();
                    let r = lp.rows[i].rhs
                        - dense_rows[i]
                            .iter()
                            .zip(&x0)
                            .fold(T::zero(), |acc, (&c, &v)| acc + c * v)
                        - slack_val[i];
                    x[a] = r.abs();
                    basis[i] = a;
                    pos[a] = i;
                }
            }
        }

        // Bring the tableau to canonical form: basic columns are unit vectors.
        let mut t = orig.clone();
        for i in 0..m {
            let b = basis[i];
            let piv = t[i * ncol + b];
            if piv != T::one() {
                for v in &mut t[i * ncol..(i + 1) * ncol] {
                    *v /= piv;
                }
            }
        }

        Self {
            m,
            ncol,
            n,
            art_start,
            t,
            orig,
            rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            lo,
            hi,
            x,
            state: st,
            basis,
            pos,
            cost: vec![T::zero(); ncol],
            d: vec![T::zero(); ncol],
            tol,
            iterations: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.t[i * self.ncol + j]
    }

    /// Recomputes reduced costs `d_j = c_j - c_B^T T_j`.
    fn price(&mut self) {
        for j in 0..self.ncol {
            self.d[j] = self.cost[j];
        }
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = T::zero();
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, T)> {
        let tol = self.tol.reduced_cost;
        let mut best: Option<(usize, T, T)> = None;
        for j in 0..self.ncol {
            if self.pos[j] != NOT_BASIC || self.hi[j] <= self.lo[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = match self.state[j] {
                Nonbasic::Lower if dj > tol => T::one(),
                Nonbasic::Upper if dj < -tol => -T::one(),
                Nonbasic::Free if dj.abs() > tol => dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = dj.abs();
            if best.map_or(true, |(_, s, _)| score > s) {
                best = Some((j, score, dir));
            }
        }
        best.map(|(j, _, dir)| (j, dir))
    }

    fn run(&mut self, degenerate_limit: usize, limit: usize) -> Result<PhaseEnd> {
        let mut bland = false;
        let mut degenerate = 0usize;
        let mut steps = 0usize;
        let tie = T::epsilon() * T::lit(64.0);
        loop {
            steps += 1;
            if steps > limit {
                return Err(Error::Lp("numerical breakdown: iteration limit reached".into()));
            }
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;

            // Ratio test; the entering column's own bound range acts as a flip.
            let mut t_best = if self.lo[j].is_finite() && self.hi[j].is_finite() {
                self.hi[j] - self.lo[j]
            } else {
                T::infinity()
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m {
                let alpha = self.at(i, j);
                if alpha.abs() <= self.tol.pivot {
                    continue;
                }
                let rate = -dir * alpha;
                let b = self.basis[i];
                let v = self.x[b];
                let t = if rate < T::zero() {
                    if !self.lo[b].is_finite() {
                        continue;
                    }
                    ((v - self.lo[b]) / -rate).max(T::zero())
                } else {
                    if !self.hi[b].is_finite() {
                        continue;
                    }
                    ((self.hi[b] - v) / rate).max(T::zero())
                };
                let replace = match leave {
                    None => t < t_best,
                    Some((r, a_prev)) => {
                        if t < t_best - tie * (T::one() + t_best.abs()) {
                            true
                        } else if t <= t_best + tie * (T::one() + t_best.abs()) {
                            if bland {
                                b < self.basis[r]
                            } else {
                                alpha.abs() > a_prev.abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    t_best = t;
                    leave = Some((i, alpha));
                }
            }
            if !t_best.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }

            if t_best <= self.tol.feasibility {
                degenerate += 1;
                if degenerate >= degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }

            // Move along the edge.
            if t_best > T::zero() {
                for i in 0..self.m {
                    let alpha = self.at(i, j);
                    if alpha != T::zero() {
                        let b = self.basis[i];
                        self.x[b] -= dir * alpha * t_best;
                    }
                }
                self.x[j] += dir * t_best;
            }

            match leave {
                None => {
                    // Bound flip.
                    if dir > T::zero() {
                        self.x[j] = self.hi[j];
                        self.state[j] = Nonbasic::Upper;
                    } else {
                        self.x[j] = self.lo[j];
                        self.state[j] = Nonbasic::Lower;
                    }
                }
                Some((r, alpha)) => {
                    let b = self.basis[r];
                    let rate = -dir * alpha;
                    if rate < T::zero() {
                        self.x[b] = self.lo[b];
                        self.state[b] = Nonbasic::Lower;
                    } else {
                        self.x[b] = self.hi[b];
                        self.state[b] = Nonbasic::Upper;
                    }
                    self.pivot(r, j);
                }
            }
            if !self.x[j].is_finite() {
                return Err(Error::Lp("numerical breakdown: non-finite iterate".into()));
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let ncol = self.ncol;
        let piv = self.at(r, j);
        {
            let row = &mut self.t[r * ncol..(r + 1) * ncol];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[j] = T::one();
        }
        let pivot_row: Vec<T> = self.t[r * ncol..(r + 1) * ncol].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * ncol + j];
            if f == T::zero() {
                continue;
            }
            let row = &mut self.t[i * ncol..(i + 1) * ncol];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            row[j] = T::zero();
        }
        let f = self.d[j];
        if f != T::zero() {
            for (dv, &p) in self.d.iter_mut().zip(&pivot_row) {
                *dv -= f * p;
            }
            self.d[j] = T::zero();
        }
        let old = self.basis[r];
        self.pos[old] = NOT_BASIC;
        self.basis[r] = j;
        self.pos[j] = r;
    }

    /// Pivots zero-valued artificials out of the basis and fixes every
    /// artificial at zero for phase two.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.art_start {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.art_start {
                if self.pos[j] != NOT_BASIC {
                    continue;
                }
                let a = self.at(r, j).abs();
                if a > self.tol.pivot && best.map_or(true, |(_, s)| a > s) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                self.x[b] = T::zero();
                self.state[b] = Nonbasic::Lower;
                self.pivot(r, j);
            }
        }
        for j in self.art_start..self.ncol {
            self.lo[j] = T::zero();
            self.hi[j] = T::zero();
            if self.pos[j] == NOT_BASIC {
                self.x[j] = T::zero();
                self.state[j] = Nonbasic::Lower;
            }
        }
    }

    /// Re-solves the final basis against the original data for accurate
    /// primal values, duals and reduced costs (all in the internal max sense).
    fn polish(&mut self) -> (Vec<T>, Vec<T>) {
        let m = self.m;
        let ncol = self.ncol;
        if m == 0 {
            return (Vec::new(), self.cost[..self.n].to_vec());
        }
        let mut bmat = vec![T::zero(); m * m];
        for i in 0..m {
            for (k, &b) in self.basis.iter().enumerate() {
                bmat[i * m + k] = self.orig[i * ncol + b];
            }
        }
        let mut rhs = self.rhs.clone();
        for j in 0..ncol {
            if self.pos[j] != NOT_BASIC {
                continue;
            }
            let v = self.x[j];
            if v == T::zero() {
                continue;
            }
            for (i, r) in rhs.iter_mut().enumerate() {
                *r -= self.orig[i * ncol + j] * v;
            }
        }
        if let Some(xb) = gauss_solve(&bmat, &rhs, m, false, self.tol.pivot) {
            for (k, &b) in self.basis.iter().enumerate() {
                self.x[b] = xb[k];
            }
        }
        let cb: Vec<T> = self.basis.iter().map(|&b| self.cost[b]).collect();
        let y = gauss_solve(&bmat, &cb, m, true, self.tol.pivot).unwrap_or_else(|| {
            // Fall back to the tableau's slack reduced costs.
            (0..m).map(|i| -self.d[self.n + i]).collect()
        });
        let mut dj = self.cost[..self.n].to_vec();
        for (i, &yi) in y.iter().enumerate() {
            if yi == T::zero() {
                continue;
            }
            for (j, d) in dj.iter_mut().enumerate() {
                *d -= yi * self.orig[i * ncol + j];
            }
        }
        (y, dj)
    }
}

/// Solves `B v = r` (or `B^T v = r`) by Gaussian elimination with partial
/// pivoting. Returns `None` if the matrix is numerically singular.
fn gauss_solve<T: Scalar>(b: &[T], r: &[T], m: usize, transpose: bool, tiny: T) -> Option<Vec<T>> {
    let mut a = vec![T::zero(); m * (m + 1)];
    for i in 0..m {
        for k in 0..m {
            a[i * (m + 1) + k] = if transpose { b[k * m + i] } else { b[i * m + k] };
        }
        a[i * (m + 1) + m] = r[i];
    }
    let w = m + 1;
    for col in 0..m {
        let mut p = col;
        let mut best = a[col * w + col].abs();
        for i in col + 1..m {
            let v = a[i * w + col].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= tiny * T::lit(1e-3) {
            return None;
        }
        if p != col {
            for k in 0..w {
                a.swap(col * w + k, p * w + k);
            }
        }
        let piv = a[col * w + col];
        for i in 0..m {
            if i == col {
                continue;
            }
            let f = a[i * w + col] / piv;
            if f == T::zero() {
                continue;
            }
            for k in col..w {
                let v = a[col * w + k];
                a[i * w + k] -= f * v;
            }
        }
    }
    Some((0..m).map(|i| a[i * w + m] / a[i * w + i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp_single_relu_bigm() -> LinearProgram<f64> {
        // max y  s.t. big-M ReLU rows for f = x1 + x2 - 1.5 on [0,1]^2.
        let mut lp = LinearProgram::new(true);
        let x1 = lp.add_var(0.0, 1.0, 0.0);
        let x2 = lp.add_var(0.0, 1.0, 0.0);
        let y = lp.add_var(0.0, f64::INFINITY, 1.0);
        let z = lp.add_var(0.0, 1.0, 0.0);
        lp.add_row(vec![(y, 1.0), (x1, -1.0), (x2, -1.0)], Sense::Ge, -1.5);
        // y <= x1 + x2 - 1.5 + 1.5 (1 - z)  <=>  y - x1 - x2 + 1.5 z <= 0
        lp.add_row(vec![(y, 1.0), (x1, -1.0), (x2, -1.0), (z, 1.5)], Sense::Le, 0.0);
        lp.add_row(vec![(y, 1.0), (z, -0.5)], Sense::Le, 0.0);
        lp
    }

    #[test]
    fn single_relu_relaxation_maximum() {
        let res = solve(&lp_single_relu_bigm()).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective - 0.5).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new(true);
        let x = lp.add_free_var(1.0);
        lp.add_row(vec![(x, 1.0)], Sense::Le, 1.0);
        lp.add_row(vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn free_variable_without_rows_is_unbounded() {
        let mut lp = LinearProgram::new(true);
        lp.add_free_var(1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn minimization_and_equalities() {
        // min x + 2y  s.t. x + y = 3, x <= 2, y >= 0
        let mut lp = LinearProgram::new(false);
        let x = lp.add_var(0.0, 2.0, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0);
        let res = solve(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective - 4.0).abs() < 1e-9);
        assert!((res.x[0] - 2.0).abs() < 1e-9);
        // dual of the equality in min sense is 2
        assert!((res.duals[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(true);
        lp.add_var(1.0, 0.0, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn single_precision_small_lp() {
        let mut lp = LinearProgram::<f32>::new(true);
        let x = lp.add_var(0.0, 4.0, 3.0);
        let y = lp.add_var(0.0, 4.0, 2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Le, 4.0);
        lp.add_row(vec![(x, 1.0), (y, 3.0)], Sense::Le, 6.0);
        let res = solve(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective - 12.0).abs() < 1e-4);
    }

    use proptest::prelude::*;

    fn random_lp() -> impl Strategy<Value = (LinearProgram<f64>, Vec<f64>)> {
        (1usize..6, 0usize..7).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(proptest::collection::vec(-4.0f64..4.0, n), m),
                proptest::collection::vec(0.0f64..2.0, m),
                proptest::collection::vec(0usize..3, m),
                proptest::collection::vec(-2.0f64..2.0, n),
                any::<bool>(),
            )
                .prop_map(move |(c, a, slack, senses, x0, maximize)| {
                    let mut lp = LinearProgram::new(maximize);
                    for &cj in &c {
                        lp.add_var(-2.0, 2.0, cj);
                    }
                    for (i, row) in a.iter().enumerate() {
                        let lhs: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum();
                        let (sense, rhs) = match senses[i] {
                            0 => (Sense::Le, lhs + slack[i]),
                            1 => (Sense::Ge, lhs - slack[i]),
                            _ => (Sense::Eq, lhs),
                        };
                        lp.add_row(row.iter().copied().enumerate().collect(), sense, rhs);
                    }
                    (lp, x0)
                })
        })
    }

    proptest! {
        #[test]
        fn strong_duality_holds((lp, _x0) in random_lp()) {
            let res = solve(&lp).unwrap();
            prop_assert_eq!(res.status, LpStatus::Optimal);
            prop_assert!(lp.max_violation(&res.x) < 1e-7);
            // Recompute reduced costs from the duals and bound the dual objective.
            let n = lp.num_vars();
            let mut d = lp.objective.clone();
            for (i, row) in lp.rows.iter().enumerate() {
                for &(j, a) in &row.terms {
                    d[j] -= res.duals[i] * a;
                }
            }
            let mut dual = res.duals.iter().zip(&lp.rows).map(|(y, r)| y * r.rhs).sum::<f64>();
            for j in 0..n {
                let (a, b) = (d[j] * lp.lower[j], d[j] * lp.upper[j]);
                dual += if lp.maximize { a.max(b) } else { a.min(b) };
            }
            prop_assert!((dual - res.objective).abs() < 1e-6 * (1.0 + res.objective.abs()),
                "primal {} dual {}", res.objective, dual);
            // Dual sign conventions.
            for (i, row) in lp.rows.iter().enumerate() {
                let y = if lp.maximize { res.duals[i] } else { -res.duals[i] };
                match row.sense {
                    Sense::Le => prop_assert!(y >= -1e-7),
                    Sense::Ge => prop_assert!(y <= 1e-7),
                    Sense::Eq => {}
                }
            }
        }

        #[test]
        fn solutions_are_vertices((lp, _x0) in random_lp()) {
            // At a basic solution, at most `m` structural columns sit strictly
            // between their bounds.
            let res = solve(&lp).unwrap();
            let interior = res.x.iter().enumerate()
                .filter(|&(j, &v)| v > lp.lower[j] + 1e-7 && v < lp.upper[j] - 1e-7)
                .count();
            prop_assert!(interior <= lp.rows.len());
        }

        #[test]
        fn repeated_solves_are_identical((lp, _x0) in random_lp()) {
            let a = solve(&lp).unwrap();
            let b = solve(&lp).unwrap();
            prop_assert_eq!(a.x, b.x);
            prop_assert_eq!(a.basis, b.basis);
        }
    }
}
