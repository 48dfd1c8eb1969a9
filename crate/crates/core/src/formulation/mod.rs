//! Mixed-integer models: variables, rows, per-neuron blocks and network
//! assembly.

mod assemble;
mod blocks;
mod context;

pub use assemble::{
    assemble_network_formulation, assemble_with_objective, lp_tightened_bounds, prepare_network, single_neuron_model,
    BoundMethod, FormulationOptions, Mode, PreparedNetwork,
};
pub use blocks::{
    box_coefficients, clipped_bigm, disjunctive_extended, leaky_bigm, max_d_bigm_box, max_d_bigm_polytope,
    onehot_relu_block, polytope_coefficients, relu_bigm, relu_extended, tjeng_coefficients, CoeffMode,
    PolytopeCoefficients, PolytopeScope,
};
pub use context::{CtxBlock, NeuronContext};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Sense};
use crate::model::Network;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    pub kind: VarKind,
    pub lo: T,
    pub hi: T,
}

/// Index into [`MipModel::vars`].
pub type VarRef = usize;

/// A sparse row; terms are sorted by variable and free of duplicates and zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub name: String,
    pub terms: Vec<(VarRef, T)>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T: Scalar> LinearConstraint<T> {
    pub fn new(name: impl Into<String>, mut terms: Vec<(VarRef, T)>, sense: Sense, rhs: T) -> Self {
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarRef, T)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != T::zero());
        Self {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        }
    }

    pub fn lhs(&self, x: &[T]) -> T {
        self.terms.iter().fold(T::zero(), |a, &(v, c)| a + c * x[v])
    }

    /// Positive when `x` violates the row.
    pub fn violation(&self, x: &[T]) -> T {
        let l = self.lhs(x);
        match self.sense {
            Sense::Le => l - self.rhs,
            Sense::Ge => self.rhs - l,
            Sense::Eq => (l - self.rhs).abs(),
        }
    }
}

/// Affine expression `Σ c_v v + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr<T> {
    pub terms: Vec<(VarRef, T)>,
    pub constant: T,
}

impl<T: Scalar> LinExpr<T> {
    pub fn zero() -> Self {
        Self {
            terms: Vec::new(),
            constant: T::zero(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarRef) -> Self {
        Self {
            terms: vec![(v, T::one())],
            constant: T::zero(),
        }
    }

    pub fn term(mut self, v: VarRef, c: T) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn plus(mut self, c: T) -> Self {
        self.constant += c;
        self
    }

    /// `self + s·other`.
    pub fn add_scaled(mut self, other: &LinExpr<T>, s: T) -> Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * s)));
        self.constant += other.constant * s;
        self
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(self.constant, |a, &(v, c)| a + c * x[v])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective<T> {
    pub maximize: bool,
    pub terms: Vec<(VarRef, T)>,
    pub constant: T,
}

/// Lazy families a neuron can register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyKind {
    ReluIdeal,
    MaxDBox,
    OneHotRelu,
    Leaky,
    Clipped,
    IdealDualSubgradient,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::ReluIdeal,
        FamilyKind::MaxDBox,
        FamilyKind::OneHotRelu,
        FamilyKind::Leaky,
        FamilyKind::Clipped,
        FamilyKind::IdealDualSubgradient,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::ReluIdeal => "relu_ideal",
            FamilyKind::MaxDBox => "max_d_box",
            FamilyKind::OneHotRelu => "onehot_relu",
            FamilyKind::Leaky => "leaky",
            FamilyKind::Clipped => "clipped",
            FamilyKind::IdealDualSubgradient => "ideal_dual",
        }
    }
}

/// Model variables of one neuron, in the local layout order
/// `x (inputs), y, z (binaries)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    pub x: Vec<VarRef>,
    pub y: VarRef,
    pub z: Vec<VarRef>,
    /// Auxiliary continuous variables (extended mode copies).
    pub aux: Vec<VarRef>,
}

impl Bindings {
    /// Model variable of local index `i`.
    pub fn global(&self, i: usize) -> VarRef {
        let eta = self.x.len();
        if i < eta {
            self.x[i]
        } else if i == eta {
            self.y
        } else {
            self.z[i - eta - 1]
        }
    }

    pub fn local_len(&self) -> usize {
        self.x.len() + 1 + self.z.len()
    }
}

/// A nonlinear neuron inside a model.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronEntry<T> {
    /// 1-based layer number.
    pub layer: usize,
    pub index: usize,
    pub ctx: NeuronContext<T>,
    pub bind: Bindings,
}

impl<T: Scalar> NeuronEntry<T> {
    pub fn tag(&self) -> String {
        format!("{}_{}", self.layer, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutFamily {
    pub kind: FamilyKind,
    /// Index into [`MipModel::neurons`].
    pub neuron: usize,
}

/// Variables, rows, objective, lazily separated families and the neuron
/// index of a formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MipModel<T> {
    pub vars: Vec<Variable<T>>,
    pub constraints: Vec<LinearConstraint<T>>,
    pub objective: Objective<T>,
    pub families: Vec<CutFamily>,
    pub neurons: Vec<NeuronEntry<T>>,
    pub inputs: Vec<VarRef>,
    /// Output variable of every neuron, per layer.
    pub outputs: Vec<Vec<VarRef>>,
    /// The network the model encodes, when there is one. Used by primal
    /// heuristics.
    pub network: Option<Network<T>>,
}

impl<T: Scalar> Default for MipModel<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> MipModel<T> {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                maximize: true,
                terms: Vec::new(),
                constant: T::zero(),
            },
            families: Vec::new(),
            neurons: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            network: None,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lo: T, hi: T) -> VarRef {
        let (lo, hi) = match kind {
            VarKind::Binary => (lo.max(T::zero()), hi.min(T::one())),
            VarKind::Continuous => (lo, hi),
        };
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lo,
            hi,
        });
        self.vars.len() - 1
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(VarRef, T)>, sense: Sense, rhs: T) -> usize {
        self.constraints.push(LinearConstraint::new(name, terms, sense, rhs));
        self.constraints.len() - 1
    }

    /// Adds `expr (sense) 0`.
    pub fn add_expr(&mut self, name: impl Into<String>, expr: LinExpr<T>, sense: Sense) -> usize {
        self.add_constraint(name, expr.terms, sense, -expr.constant)
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.vars.len() - self.num_binaries()
    }

    pub fn binaries(&self) -> Vec<VarRef> {
        (0..self.vars.len())
            .filter(|&v| self.vars[v].kind == VarKind::Binary)
            .collect()
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective
            .terms
            .iter()
            .fold(self.objective.constant, |a, &(v, c)| a + c * x[v])
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (v, var) in self.vars.iter().enumerate() {
            worst = worst.max(var.lo - x[v]).max(x[v] - var.hi);
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(x));
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for c in &self.constraints {
            for &(v, coef) in &c.terms {
                if v >= n {
                    return Err(Error::Parameter(format!("row {} references a missing variable", c.name)));
                }
                if !coef.is_finite() {
                    return Err(Error::Parameter(format!("row {} has a non-finite coefficient", c.name)));
                }
            }
            if !c.rhs.is_finite() {
                return Err(Error::Parameter(format!("row {} has a non-finite right-hand side", c.name)));
            }
        }
        for &(v, _) in &self.objective.terms {
            if v >= n {
                return Err(Error::Parameter("objective references a missing variable".into()));
            }
        }
        Ok(())
    }

    /// LP relaxation with optional bound overrides and extra rows.
    pub fn relaxation(&self, lo: &[T], hi: &[T], extra: &[LinearConstraint<T>]) -> LinearProgram<T> {
        let mut lp = LinearProgram::new(self.objective.maximize);
        for v in 0..self.vars.len() {
            lp.add_var(lo[v], hi[v], T::zero());
        }
        for &(v, c) in &self.objective.terms {
            lp.objective[v] += c;
        }
        lp.offset = self.objective.constant;
        for c in self.constraints.iter().chain(extra) {
            lp.add_row(c.terms.clone(), c.sense, c.rhs);
        }
        lp
    }

    pub fn lower_bounds(&self) -> Vec<T> {
        self.vars.iter().map(|v| v.lo).collect()
    }

    pub fn upper_bounds(&self) -> Vec<T> {
        self.vars.iter().map(|v| v.hi).collect()
    }

    /// Plain LP relaxation of the model.
    pub fn lp_relaxation(&self) -> LinearProgram<T> {
        self.relaxation(&self.lower_bounds(), &self.upper_bounds(), &[])
    }

    /// Replaces the objective with `max Σ c_v v`.
    pub fn set_objective(&mut self, maximize: bool, terms: Vec<(VarRef, T)>, constant: T) {
        self.objective = Objective {
            maximize,
            terms,
            constant,
        };
    }

    pub fn var_index(&self, name: &str) -> Option<VarRef> {
        self.vars.iter().position(|v| v.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_terms_are_normalized() {
        let c = LinearConstraint::new("r", vec![(2, 1.0), (0, 2.0), (2, -1.0), (1, 0.0)], Sense::Le, 1.0);
        assert_eq!(c.terms, vec![(0, 2.0)]);
    }

    #[test]
    fn bindings_map_local_indices() {
        let b = Bindings {
            x: vec![10, 11],
            y: 12,
            z: vec![20, 21],
            aux: vec![],
        };
        assert_eq!((0..b.local_len()).map(|i| b.global(i)).collect::<Vec<_>>(), vec![10, 11, 12, 20, 21]);
    }
}
