//! Separation of the lazy cut families.
//!
//! Every family member is written in the neuron's local layout
//! `[x_0 .. x_{η−1}, y, z_0 ..]`. Each family has a member constructor taking
//! a witness, a `best_*` routine returning the most violated member, and a
//! `separate_*` wrapper that applies the emission tolerance.

mod clipped;
mod dual;
mod knapsack;
mod leaky;
mod maxd;
mod onehot;
mod relu;

pub use clipped::{best_clipped_lower, best_clipped_upper, clipped_lower_member, clipped_phi, clipped_upper_member, separate_clipped};
pub use dual::{separate_ideal_dual_subgradient, DualParams};
pub use knapsack::{knapsack_transport_d2, knapsack_transport_p2};
pub use leaky::{best_leaky, leaky_member, separate_leaky};
pub use maxd::{best_max_d_box, max_d_member, separate_max_d_box};
pub use onehot::{best_onehot, best_p2, onehot_member, onehot_options, onehot_seed_cuts, p2_member, p2_options, separate_onehot_relu};
pub use relu::{best_relu_ideal, relu_ideal_member, separate_relu_ideal};

use crate::error::{Error, Result};
use crate::formulation::{Bindings, FamilyKind, LinearConstraint, NeuronContext};
use crate::lp::Sense;
use crate::model::Activation;
use crate::scalar::Scalar;

/// Smallest violation for which a cut is emitted.
pub const EMIT_TOL: f64 = 1e-6;

/// What generated a cut.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness<T> {
    /// Coordinate subset `I` (0-based).
    Subset(Vec<usize>),
    /// Subset of the lower clipped family.
    LowerSubset(Vec<usize>),
    /// One option per coordinate or per block.
    Mapping(Vec<usize>),
    /// Dual vector `α`.
    Dual(Vec<T>),
    /// `z_k = 0` for a piece that is never maximal.
    Fixing(usize),
}

impl<T: Scalar> Witness<T> {
    /// Hashable key used to suppress duplicate cuts.
    pub fn key(&self) -> String {
        match self {
            Witness::Subset(s) => format!("S{s:?}"),
            Witness::LowerSubset(s) => format!("L{s:?}"),
            Witness::Mapping(m) => format!("M{m:?}"),
            Witness::Dual(a) => format!("D{:?}", a.iter().map(|v| format!("{:.9e}", v.as_f64())).collect::<Vec<_>>()),
            Witness::Fixing(k) => format!("F{k}"),
        }
    }
}

/// A family member in local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut<T> {
    pub coeffs: Vec<T>,
    pub sense: Sense,
    pub rhs: T,
    /// Violation at the query point that produced it (may be negative for
    /// members returned by `best_*`).
    pub violation: T,
    pub family: FamilyKind,
    pub witness: Witness<T>,
    /// Facet tag, for families that have one.
    pub facet: Option<bool>,
}

impl<T: Scalar> Cut<T> {
    /// `y <= a·x + c·z + k`, stored as `y − a·x − c·z <= k`.
    pub(crate) fn upper(a: &[T], c: &[T], k: T, family: FamilyKind, witness: Witness<T>) -> Self {
        let mut coeffs: Vec<T> = a.iter().map(|&v| -v).collect();
        coeffs.push(T::one());
        coeffs.extend(c.iter().map(|&v| -v));
        Self {
            coeffs,
            sense: Sense::Le,
            rhs: k,
            violation: T::zero(),
            family,
            witness,
            facet: None,
        }
    }

    /// `y >= a·x + c·z + k`.
    pub(crate) fn lower(a: &[T], c: &[T], k: T, family: FamilyKind, witness: Witness<T>) -> Self {
        let mut cut = Self::upper(a, c, k, family, witness);
        cut.sense = Sense::Ge;
        cut
    }

    pub fn lhs(&self, local: &[T]) -> T {
        self.coeffs.iter().zip(local).fold(T::zero(), |s, (&c, &v)| s + c * v)
    }

    /// Violation at a local point; positive means violated.
    pub fn violation_at(&self, local: &[T]) -> T {
        let l = self.lhs(local);
        match self.sense {
            Sense::Le => l - self.rhs,
            Sense::Ge => self.rhs - l,
            Sense::Eq => (l - self.rhs).abs(),
        }
    }

    pub(crate) fn at(mut self, q: &QueryPoint<T>) -> Self {
        self.violation = self.violation_at(&q.local());
        self
    }

    pub fn to_constraint(&self, bind: &Bindings, name: impl Into<String>) -> LinearConstraint<T> {
        LinearConstraint::new(
            name,
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| (bind.global(i), c))
                .collect(),
            self.sense,
            self.rhs,
        )
    }
}

/// A relaxation point restricted to one neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPoint<T> {
    pub x: Vec<T>,
    pub y: T,
    pub z: Vec<T>,
}

impl<T: Scalar> QueryPoint<T> {
    pub fn new(x: Vec<T>, y: T, z: Vec<T>) -> Self {
        Self { x, y, z }
    }

    /// Reads a neuron's values out of a model point and cleans up LP noise:
    /// single binaries are clamped to `[0,1]`, one-hot groups are projected
    /// onto the simplex.
    pub fn from_point(bind: &Bindings, point: &[T]) -> Self {
        let x = bind.x.iter().map(|&v| point[v]).collect();
        let y = point[bind.y];
        let z: Vec<T> = bind.z.iter().map(|&v| point[v]).collect();
        Self { x, y, z }.normalized()
    }

    pub fn normalized(mut self) -> Self {
        if self.z.len() == 1 {
            self.z[0] = self.z[0].max(T::zero()).min(T::one());
        } else if !self.z.is_empty() {
            self.z = project_simplex(&self.z);
        }
        self
    }

    pub fn local(&self) -> Vec<T> {
        let mut v = self.x.clone();
        v.push(self.y);
        v.extend(&self.z);
        v
    }

    fn check(&self, ctx: &NeuronContext<T>) -> Result<()> {
        if self.x.len() != ctx.eta() {
            return Err(Error::LengthMismatch {
                expected: ctx.eta(),
                found: self.x.len(),
            });
        }
        if self.z.len() != ctx.nz() {
            return Err(Error::LengthMismatch {
                expected: ctx.nz(),
                found: self.z.len(),
            });
        }
        Ok(())
    }

    /// `(ẑ₁, ẑ₂)` of a two-piece neuron.
    pub(crate) fn z_pair(&self) -> (T, T) {
        if self.z.len() == 1 {
            (self.z[0], T::one() - self.z[0])
        } else {
            (self.z[0], self.z[1])
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut css = T::zero();
    let mut theta = T::zero();
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - T::one()) / T::lit((i + 1) as f64);
        if ui - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(T::zero())).collect()
}

/// Coefficient vector of the `z` part for a two-piece neuron, given the
/// coefficients `(c₁, c₂)` of `z₁` and `z₂`. With a single binary `z₂ = 1 − z`.
pub(crate) fn pair_terms<T: Scalar>(nz: usize, c1: T, c2: T) -> (Vec<T>, T) {
    if nz == 1 {
        (vec![c1 - c2], c2)
    } else {
        (vec![c1, c2], T::zero())
    }
}

pub(crate) fn emit<T: Scalar>(cut: Cut<T>) -> Option<Cut<T>> {
    (cut.violation > T::lit(EMIT_TOL)).then_some(cut)
}

/// `v` is smaller than `best` by more than rounding noise.
pub(crate) fn better<T: Scalar>(v: T, best: T) -> bool {
    v < best - T::lit(1e-12) * (T::one() + best.abs())
}

/// Runs the separator of `kind` at `q`.
pub fn separate<T: Scalar>(kind: FamilyKind, q: &QueryPoint<T>, ctx: &NeuronContext<T>, dual: &DualParams) -> Result<Vec<Cut<T>>> {
    q.check(ctx)?;
    Ok(match kind {
        FamilyKind::ReluIdeal => separate_relu_ideal(q, ctx)?.into_iter().collect(),
        FamilyKind::MaxDBox => separate_max_d_box(q, ctx)?.into_iter().collect(),
        FamilyKind::OneHotRelu => separate_onehot_relu(q, ctx)?.into_iter().collect(),
        FamilyKind::Leaky => separate_leaky(q, ctx)?.into_iter().collect(),
        FamilyKind::Clipped => separate_clipped(q, ctx)?,
        FamilyKind::IdealDualSubgradient => separate_ideal_dual_subgradient(q, ctx, dual)?.into_iter().collect(),
    })
}

/// Every witness of a family on `ctx`, failing when there are more than
/// `limit`.
pub fn family_witnesses<T: Scalar>(kind: FamilyKind, ctx: &NeuronContext<T>, limit: usize) -> Result<Vec<Witness<T>>> {
    let guard = |size: usize| -> Result<()> {
        if size > limit {
            Err(Error::Guard {
                what: "family members",
                size,
                limit,
            })
        } else {
            Ok(())
        }
    };
    let eta = ctx.eta();
    let subsets = |lower: bool| -> Result<Vec<Witness<T>>> {
        if eta >= usize::BITS as usize - 1 {
            return Err(Error::Guard {
                what: "family members",
                size: usize::MAX,
                limit,
            });
        }
        guard(1 << eta)?;
        Ok((0..1usize << eta)
            .map(|mask| {
                let s: Vec<usize> = (0..eta).filter(|i| mask >> i & 1 == 1).collect();
                if lower {
                    Witness::LowerSubset(s)
                } else {
                    Witness::Subset(s)
                }
            })
            .collect())
    };
    let product = |sizes: Vec<usize>| -> Result<Vec<Witness<T>>> {
        let total = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).unwrap_or(usize::MAX);
        guard(total)?;
        let mut out = Vec::with_capacity(total);
        let mut cur = vec![0usize; sizes.len()];
        for _ in 0..total {
            out.push(Witness::Mapping(cur.clone()));
            for i in (0..cur.len()).rev() {
                cur[i] += 1;
                if cur[i] < sizes[i] {
                    break;
                }
                cur[i] = 0;
            }
        }
        Ok(out)
    };
    match kind {
        FamilyKind::ReluIdeal | FamilyKind::Leaky => subsets(false),
        FamilyKind::Clipped => {
            let mut all = subsets(false)?;
            guard(all.len() * 2)?;
            all.extend(subsets(true)?);
            Ok(all)
        }
        FamilyKind::MaxDBox => product(vec![ctx.pieces.len(); eta]),
        FamilyKind::OneHotRelu => product(onehot_options(ctx)),
        FamilyKind::IdealDualSubgradient => Err(Error::Unsupported("the dual family cannot be enumerated".into())),
    }
}

/// Member of `kind` named by `witness`.
pub fn member<T: Scalar>(kind: FamilyKind, ctx: &NeuronContext<T>, witness: &Witness<T>) -> Result<Cut<T>> {
    match (kind, witness) {
        (FamilyKind::ReluIdeal, Witness::Subset(s)) => relu_ideal_member(ctx, s),
        (FamilyKind::Leaky, Witness::Subset(s)) => leaky_member(ctx, s),
        (FamilyKind::Clipped, Witness::Subset(s)) => clipped_upper_member(ctx, s),
        (FamilyKind::Clipped, Witness::LowerSubset(s)) => clipped_lower_member(ctx, s),
        (FamilyKind::MaxDBox, Witness::Mapping(m)) => max_d_member(ctx, m),
        (FamilyKind::OneHotRelu, Witness::Mapping(m)) => onehot_member(ctx, m),
        _ => Err(Error::Parameter(format!("witness does not name a {} member", kind.name()))),
    }
}

/// The family the branch-and-cut loop separates for a neuron.
pub fn family_for<T: Scalar>(ctx: &NeuronContext<T>) -> Option<FamilyKind> {
    match ctx.activation {
        Activation::Linear => None,
        Activation::Relu if ctx.is_box() => Some(FamilyKind::ReluIdeal),
        Activation::Relu => Some(FamilyKind::OneHotRelu),
        Activation::Leaky { .. } => Some(FamilyKind::Leaky),
        Activation::Clipped { .. } => Some(FamilyKind::Clipped),
        Activation::Max if ctx.is_box() => Some(FamilyKind::MaxDBox),
        Activation::Max => Some(FamilyKind::IdealDualSubgradient),
    }
}

pub(crate) fn require(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Unsupported(what.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5 + 1e-10, 0.5, -1e-10]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn witness_keys_differ() {
        let a: Witness<f64> = Witness::Subset(vec![1]);
        let b: Witness<f64> = Witness::LowerSubset(vec![1]);
        assert_ne!(a.key(), b.key());
    }
}
