use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Sense};
use crate::model::{Activation, AffineFunc, Block, Domain, Interval, Region};
use crate::scalar::Scalar;

/// A block of a neuron's local input coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtxBlock {
    Interval(usize),
    Simplex { start: usize, len: usize },
}

/// Everything one neuron's formulation and separation need: its pieces, its
/// input domain and cached bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronContext<T> {
    pub pieces: Vec<AffineFunc<T>>,
    pub activation: Activation<T>,
    pub blocks: Vec<CtxBlock>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    /// Extra polytope rows `a·x <= c`.
    pub rows: Vec<(Vec<T>, T)>,
    /// Range of each piece over the context domain.
    pub ranges: Vec<Interval<T>>,
    /// `L̆` of the first piece: the bound minimizing `w_i x_i`.
    pub l_breve: Vec<T>,
    /// `Ŭ` of the first piece.
    pub u_breve: Vec<T>,
    /// Per coordinate, piece indices sorted by weight ascending (max neurons).
    pub coord_order: Vec<Vec<usize>>,
    /// Per simplex block, local coordinates sorted by `w̃ = w¹ − w²`
    /// ascending (two-piece neurons).
    pub simplex_order: Vec<Vec<usize>>,
}

fn cmp<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
}

impl<T: Scalar> NeuronContext<T> {
    pub fn new(
        pieces: Vec<AffineFunc<T>>,
        activation: Activation<T>,
        blocks: Vec<CtxBlock>,
        lo: Vec<T>,
        hi: Vec<T>,
    ) -> Result<Self> {
        Self::with_rows(pieces, activation, blocks, lo, hi, Vec::new())
    }

    pub fn with_rows(
        pieces: Vec<AffineFunc<T>>,
        activation: Activation<T>,
        blocks: Vec<CtxBlock>,
        lo: Vec<T>,
        hi: Vec<T>,
        rows: Vec<(Vec<T>, T)>,
    ) -> Result<Self> {
        let eta = lo.len();
        if pieces.is_empty() {
            return Err(Error::Parameter("neuron needs at least one piece".into()));
        }
        if hi.len() != eta {
            return Err(Error::LengthMismatch {
                expected: eta,
                found: hi.len(),
            });
        }
        for p in &pieces {
            if p.dim() != eta {
                return Err(Error::LengthMismatch {
                    expected: eta,
                    found: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(Error::Parameter("non-finite piece".into()));
            }
        }
        for (a, _) in &rows {
            if a.len() != eta {
                return Err(Error::LengthMismatch {
                    expected: eta,
                    found: a.len(),
                });
            }
        }
        for i in 0..eta {
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::Domain(format!("coordinate {i} is unbounded")));
            }
            if lo[i] > hi[i] {
                return Err(Error::Domain(format!("coordinate {i} has lo > hi")));
            }
        }
        let mut covered = 0;
        for b in &blocks {
            match *b {
                CtxBlock::Interval(i) if i == covered => covered += 1,
                CtxBlock::Simplex { start, len } if start == covered && len >= 1 => covered += len,
                _ => return Err(Error::Domain("context blocks must tile the coordinates in order".into())),
            }
        }
        if covered != eta {
            return Err(Error::Domain("context blocks must cover every coordinate".into()));
        }
        match activation {
            Activation::Leaky { alpha } if !(alpha > T::zero() && alpha < T::one()) => {
                return Err(Error::Parameter("leaky alpha must lie in (0,1)".into()))
            }
            Activation::Clipped { cap } if cap <= T::zero() => {
                return Err(Error::Parameter("clipped cap must be positive".into()))
            }
            Activation::Max if pieces.len() < 2 => {
                return Err(Error::Parameter("max neuron needs at least two pieces".into()))
            }
            Activation::Max => {}
            _ if pieces.len() != 1 => {
                return Err(Error::Parameter("scalar activation takes exactly one piece".into()))
            }
            _ => {}
        }
        let mut ctx = Self {
            pieces,
            activation,
            blocks,
            lo,
            hi,
            rows,
            ranges: Vec::new(),
            l_breve: Vec::new(),
            u_breve: Vec::new(),
            coord_order: Vec::new(),
            simplex_order: Vec::new(),
        };
        ctx.refresh();
        Ok(ctx)
    }

    /// Context over a box.
    pub fn from_box(pieces: Vec<AffineFunc<T>>, activation: Activation<T>, bounds: &[Interval<T>]) -> Result<Self> {
        Self::new(
            pieces,
            activation,
            (0..bounds.len()).map(CtxBlock::Interval).collect(),
            bounds.iter().map(|b| b.lo).collect(),
            bounds.iter().map(|b| b.hi).collect(),
        )
    }

    /// Context over a product of simplices.
    pub fn from_simplices(pieces: Vec<AffineFunc<T>>, activation: Activation<T>, ps: &[usize]) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut at = 0;
        for &p in ps {
            blocks.push(CtxBlock::Simplex { start: at, len: p });
            at += p;
        }
        Self::new(pieces, activation, blocks, vec![T::zero(); at], vec![T::one(); at])
    }

    /// Context over a region: interval coordinates take the region bounds,
    /// simplex blocks stay whole.
    pub fn from_region(pieces: Vec<AffineFunc<T>>, activation: Activation<T>, region: &Region<T>) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut at = 0;
        for b in &region.domain.blocks {
            match b {
                Block::Interval(_) => {
                    blocks.push(CtxBlock::Interval(at));
                    lo.push(region.bounds[at].lo);
                    hi.push(region.bounds[at].hi);
                    at += 1;
                }
                Block::Simplex(p) => {
                    blocks.push(CtxBlock::Simplex { start: at, len: *p });
                    lo.extend(std::iter::repeat(T::zero()).take(*p));
                    hi.extend(std::iter::repeat(T::one()).take(*p));
                    at += p;
                }
            }
        }
        Self::new(pieces, activation, blocks, lo, hi)
    }

    fn refresh(&mut self) {
        let eta = self.eta();
        self.ranges = self.pieces.iter().map(|p| self.range_of(p)).collect();
        let w = &self.pieces[0].weights;
        self.l_breve = (0..eta)
            .map(|i| if w[i] >= T::zero() { self.lo[i] } else { self.hi[i] })
            .collect();
        self.u_breve = (0..eta)
            .map(|i| if w[i] >= T::zero() { self.hi[i] } else { self.lo[i] })
            .collect();
        self.coord_order = if matches!(self.activation, Activation::Max) {
            (0..eta)
                .map(|i| {
                    let mut o: Vec<usize> = (0..self.pieces.len()).collect();
                    o.sort_by(|&a, &b| cmp(self.pieces[a].weights[i], self.pieces[b].weights[i]).then(a.cmp(&b)));
                    o
                })
                .collect()
        } else {
            Vec::new()
        };
        self.simplex_order = match self.two_pieces() {
            Some((g1, g2)) => self
                .simplex_blocks()
                .iter()
                .map(|&(s, p)| {
                    let wt: Vec<T> = (s..s + p).map(|j| g1.weights[j] - g2.weights[j]).collect();
                    let mut o: Vec<usize> = (s..s + p).collect();
                    o.sort_by(|&a, &b| cmp(wt[a - s], wt[b - s]).then(a.cmp(&b)));
                    o
                })
                .collect(),
            None => Vec::new(),
        };
    }

    /// Number of input coordinates `η`.
    pub fn eta(&self) -> usize {
        self.lo.len()
    }

    /// Number of binaries in the neuron's formulations.
    pub fn nz(&self) -> usize {
        match self.activation {
            Activation::Linear => 0,
            Activation::Relu | Activation::Leaky { .. } => 1,
            Activation::Clipped { .. } => 3,
            Activation::Max => self.pieces.len(),
        }
    }

    pub fn is_box(&self) -> bool {
        self.rows.is_empty() && self.blocks.iter().all(|b| matches!(b, CtxBlock::Interval(_)))
    }

    pub fn has_simplex(&self) -> bool {
        self.blocks.iter().any(|b| matches!(b, CtxBlock::Simplex { .. }))
    }

    pub fn simplex_blocks(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .filter_map(|b| match *b {
                CtxBlock::Simplex { start, len } => Some((start, len)),
                _ => None,
            })
            .collect()
    }

    pub fn interval_coords(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter_map(|b| match *b {
                CtxBlock::Interval(i) => Some(i),
                _ => None,
            })
            .collect()
    }

    /// The same neuron with every simplex block relaxed to its `[0,1]` box.
    pub fn boxed(&self) -> Self {
        let mut c = self.clone();
        c.blocks = (0..self.eta()).map(CtxBlock::Interval).collect();
        c.rows.clear();
        c.refresh();
        c
    }

    /// The neuron as a maximum of affine pieces, when it is one.
    pub fn max_pieces(&self) -> Option<Vec<AffineFunc<T>>> {
        let f = &self.pieces[0];
        match self.activation {
            Activation::Relu => Some(vec![f.clone(), AffineFunc::zero(self.eta())]),
            Activation::Leaky { alpha } => Some(vec![f.clone(), f.scale(alpha)]),
            Activation::Max => Some(self.pieces.clone()),
            Activation::Linear => Some(vec![f.clone()]),
            Activation::Clipped { .. } => None,
        }
    }

    /// `(g¹, g²)` for two-piece neurons; the single binary selects `g¹`.
    pub fn two_pieces(&self) -> Option<(AffineFunc<T>, AffineFunc<T>)> {
        match self.activation {
            Activation::Relu | Activation::Leaky { .. } => {
                let m = self.max_pieces()?;
                Some((m[0].clone(), m[1].clone()))
            }
            Activation::Max if self.pieces.len() == 2 => Some((self.pieces[0].clone(), self.pieces[1].clone())),
            _ => None,
        }
    }

    /// Output of the neuron at `x`.
    pub fn value(&self, x: &[T]) -> T {
        match self.activation {
            Activation::Max => self.pieces.iter().map(|p| p.eval(x)).fold(T::neg_infinity(), T::max),
            a => a.apply(self.pieces[0].eval(x)),
        }
    }

    /// Binary values of the activation pattern at `x` (ties choose the
    /// lowest-index active piece).
    pub fn pattern(&self, x: &[T]) -> Vec<T> {
        let f = self.pieces[0].eval(x);
        let one = T::one();
        let zero = T::zero();
        match self.activation {
            Activation::Linear => Vec::new(),
            Activation::Relu | Activation::Leaky { .. } => vec![if f >= zero { one } else { zero }],
            Activation::Clipped { cap } => {
                if f <= zero {
                    vec![one, zero, zero]
                } else if f >= cap {
                    vec![zero, zero, one]
                } else {
                    vec![zero, one, zero]
                }
            }
            Activation::Max => {
                let vals: Vec<T> = self.pieces.iter().map(|p| p.eval(x)).collect();
                let mut best = 0;
                for k in 1..vals.len() {
                    if vals[k] > vals[best] {
                        best = k;
                    }
                }
                (0..vals.len()).map(|k| if k == best { one } else { zero }).collect()
            }
        }
    }

    /// Exact range of an affine function over the box-and-simplex part of the
    /// domain (polytope rows are ignored, so the range is an outer bound then).
    pub fn range_of(&self, f: &AffineFunc<T>) -> Interval<T> {
        let mut lo = f.bias;
        let mut hi = f.bias;
        for b in &self.blocks {
            match *b {
                CtxBlock::Interval(i) => {
                    let a = f.weights[i] * self.lo[i];
                    let c = f.weights[i] * self.hi[i];
                    lo += a.min(c);
                    hi += a.max(c);
                }
                CtxBlock::Simplex { start, len } => {
                    let w = &f.weights[start..start + len];
                    lo += w.iter().copied().fold(T::infinity(), T::min);
                    hi += w.iter().copied().fold(T::neg_infinity(), T::max);
                }
            }
        }
        Interval::new(lo, hi)
    }

    /// Range of the neuron output.
    pub fn output_range(&self) -> Interval<T> {
        match self.activation {
            Activation::Max => Interval::new(
                self.ranges.iter().map(|r| r.lo).fold(T::neg_infinity(), T::max),
                self.ranges.iter().map(|r| r.hi).fold(T::neg_infinity(), T::max),
            ),
            a => Interval::new(a.apply(self.ranges[0].lo), a.apply(self.ranges[0].hi)),
        }
    }

    /// The context domain as a [`Region`] (polytope rows dropped).
    pub fn region(&self) -> Region<T> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| match *b {
                CtxBlock::Interval(i) => Block::Interval(Interval::new(self.lo[i], self.hi[i])),
                CtxBlock::Simplex { len, .. } => Block::Simplex(len),
            })
            .collect();
        Region {
            domain: Domain { blocks },
            bounds: (0..self.eta()).map(|i| Interval::new(self.lo[i], self.hi[i])).collect(),
        }
    }

    /// Adds `η` columns for `x` plus the domain rows to `lp`; returns the
    /// column indices.
    pub fn add_domain(&self, lp: &mut LinearProgram<T>) -> Vec<usize> {
        let cols: Vec<usize> = (0..self.eta()).map(|i| lp.add_var(self.lo[i], self.hi[i], T::zero())).collect();
        for (s, p) in self.simplex_blocks() {
            lp.add_row((s..s + p).map(|j| (cols[j], T::one())).collect(), Sense::Eq, T::one());
        }
        for (a, c) in &self.rows {
            lp.add_row(
                a.iter().enumerate().filter(|(_, &v)| v != T::zero()).map(|(j, &v)| (cols[j], v)).collect(),
                Sense::Le,
                *c,
            );
        }
        cols
    }

    /// Adds dominance rows `f^t(x) <= f^k(x)` for every piece `t != k` of `pieces`.
    pub fn add_dominance(lp: &mut LinearProgram<T>, cols: &[usize], pieces: &[AffineFunc<T>], k: usize) {
        for (t, p) in pieces.iter().enumerate() {
            if t == k {
                continue;
            }
            let terms: Vec<(usize, T)> = cols
                .iter()
                .enumerate()
                .map(|(i, &c)| (c, p.weights[i] - pieces[k].weights[i]))
                .filter(|&(_, v)| v != T::zero())
                .collect();
            lp.add_row(terms, Sense::Le, pieces[k].bias - p.bias);
        }
    }

    /// Whether `x` lies in the context domain.
    pub fn contains(&self, x: &[T], tol: T) -> bool {
        if x.len() != self.eta() {
            return false;
        }
        if (0..self.eta()).any(|i| x[i] < self.lo[i] - tol || x[i] > self.hi[i] + tol) {
            return false;
        }
        if self
            .simplex_blocks()
            .iter()
            .any(|&(s, p)| (x[s..s + p].iter().copied().sum::<T>() - T::one()).abs() > tol)
        {
            return false;
        }
        self.rows
            .iter()
            .all(|(a, c)| a.iter().zip(x).fold(T::zero(), |s, (&ai, &xi)| s + ai * xi) <= *c + tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> NeuronContext<f64> {
        NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0, 1.0], -1.5)],
            Activation::Relu,
            &[Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn ranges_and_breve_bounds() {
        let c = ex1();
        assert_eq!(c.ranges[0], Interval::new(-1.5, 0.5));
        assert_eq!(c.l_breve, vec![0.0, 0.0]);
        assert_eq!(c.u_breve, vec![1.0, 1.0]);
        assert_eq!(c.nz(), 1);
    }

    #[test]
    fn simplex_order_follows_weight_differences() {
        let c = NeuronContext::from_simplices(vec![AffineFunc::new(vec![3.0, 1.0, 2.0], 0.0)], Activation::Relu, &[3])
            .unwrap();
        assert_eq!(c.simplex_order, vec![vec![1, 2, 0]]);
        assert_eq!(c.range_of(&c.pieces[0]), Interval::new(1.0, 3.0));
    }

    #[test]
    fn rejects_bad_tiling_and_parameters() {
        let f = AffineFunc::new(vec![1.0], 0.0);
        assert!(NeuronContext::new(vec![f.clone()], Activation::Relu, vec![], vec![0.0], vec![1.0]).is_err());
        assert!(NeuronContext::from_box(vec![f.clone()], Activation::Leaky { alpha: 1.5 }, &[Interval::new(0.0, 1.0)]).is_err());
        assert!(NeuronContext::from_box(vec![f], Activation::Max, &[Interval::new(0.0, 1.0)]).is_err());
    }

    #[test]
    fn patterns() {
        let c = NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0], 0.0)],
            Activation::Clipped { cap: 1.0 },
            &[Interval::new(-1.0, 2.0)],
        )
        .unwrap();
        assert_eq!(c.pattern(&[-0.5]), vec![1.0, 0.0, 0.0]);
        assert_eq!(c.pattern(&[0.5]), vec![0.0, 1.0, 0.0]);
        assert_eq!(c.pattern(&[1.5]), vec![0.0, 0.0, 1.0]);
        assert_eq!(c.value(&[1.5]), 1.0);
    }
}
