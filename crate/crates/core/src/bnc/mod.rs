//! Branch-and-cut over [`MipModel`]: LP relaxations, lazy separation of the
//! registered cut families, most-fractional branching and best-bound search.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use crate::cuts::{separate, DualParams, QueryPoint};
use crate::error::{Error, Result};
use crate::formulation::{LinearConstraint, MipModel};
use crate::lp::{solve, LpStatus};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    MostFractional,
    /// Lowest-index fractional binary.
    FirstFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Search {
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub root_rounds: usize,
    pub node_rounds: usize,
    pub cuts_per_neuron: usize,
    /// Minimum violation of an added cut.
    pub tolerance: f64,
    /// Nodes whose bound exceeds the incumbent by at most this much
    /// (absolute, or relative to the incumbent) are pruned.
    pub gap_tolerance: f64,
    pub integrality: f64,
    pub branching: Branching,
    pub search: Search,
    pub deterministic: bool,
    pub dual: DualParams,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            node_limit: 1_000_000,
            time_limit: None,
            root_rounds: 10,
            node_rounds: 2,
            cuts_per_neuron: 1,
            tolerance: 1e-6,
            gap_tolerance: 1e-7,
            integrality: 1e-6,
            branching: Branching::MostFractional,
            search: Search::BestBound,
            deterministic: true,
            dual: DualParams::default(),
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.node_limit > 0
            && self.time_limit.map_or(true, |t| !t.is_zero())
            && self.tolerance > 0.0
            && self.gap_tolerance >= 0.0
            && self.integrality > 0.0
            && self.integrality < 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter("solve limits and tolerances must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MipStatus<T> {
    Optimal,
    /// Stopped early (time limit or failed LPs) with this dual bound.
    BoundedBy(T),
    Infeasible,
    NodeLimit,
}

impl<T> MipStatus<T> {
    pub fn name(&self) -> &'static str {
        match self {
            MipStatus::Optimal => "optimal",
            MipStatus::BoundedBy(_) => "bounded",
            MipStatus::Infeasible => "infeasible",
            MipStatus::NodeLimit => "node_limit",
        }
    }
}

/// Bounds are in the model's own sense: upper bounds when maximizing.
#[derive(Debug, Clone)]
pub struct MipResult<T> {
    pub status: MipStatus<T>,
    pub incumbent: Option<T>,
    pub point: Option<Vec<T>>,
    pub bound: T,
    /// `|bound − incumbent|`, infinite without an incumbent.
    pub gap: T,
    pub nodes: usize,
    pub cuts: BTreeMap<String, usize>,
    pub time: Duration,
    pub root_bound_before_cuts: T,
    pub root_bound_after_cuts: T,
}

struct Node<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    /// Parent bound in maximization sense.
    bound: T,
    id: usize,
}

enum Outcome<T> {
    Pruned,
    Integral(T, Vec<T>),
    Fractional(T, Vec<T>),
}

struct Solver<'a, T> {
    model: &'a MipModel<T>,
    params: &'a SolveParams,
    sign: T,
    binaries: Vec<usize>,
    pool: Vec<LinearConstraint<T>>,
    seen: HashSet<(usize, String)>,
    cuts: BTreeMap<String, usize>,
    incumbent: Option<(T, Vec<T>)>,
    /// First and last LP value of the most recent cut loop.
    loop_values: (T, T),
}

impl<'a, T: Scalar> Solver<'a, T> {
    fn new(model: &'a MipModel<T>, params: &'a SolveParams) -> Self {
        Self {
            model,
            params,
            sign: if model.objective.maximize { T::one() } else { -T::one() },
            binaries: model.binaries(),
            pool: Vec::new(),
            seen: HashSet::new(),
            cuts: BTreeMap::new(),
            incumbent: None,
            loop_values: (T::neg_infinity(), T::neg_infinity()),
        }
    }

    fn tol(&self) -> T {
        T::lit(self.params.tolerance)
    }

    fn prunable(&self, v: T) -> bool {
        match &self.incumbent {
            Some((inc, _)) => v <= *inc + T::lit(self.params.gap_tolerance) * T::one().max(inc.abs()),
            None => false,
        }
    }

    /// LP over the node box plus the cut pool; value in maximization sense.
    fn lp(&self, lo: &[T], hi: &[T]) -> Result<Option<(T, Vec<T>)>> {
        let r = solve(&self.model.relaxation(lo, hi, &self.pool))?;
        match r.status {
            LpStatus::Optimal => Ok(Some((self.sign * r.objective, r.x))),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::Lp("unbounded relaxation".into())),
        }
    }

    /// Adds violated cuts at `x`; returns how many.
    fn separate_at(&mut self, x: &[T]) -> Result<usize> {
        let mut added = 0;
        for fam in &self.model.families {
            let entry = &self.model.neurons[fam.neuron];
            let q = QueryPoint::from_point(&entry.bind, x).normalized();
            let mut found = separate(fam.kind, &q, &entry.ctx, &self.params.dual)?;
            found.sort_by(|a, b| b.violation.partial_cmp(&a.violation).unwrap_or(std::cmp::Ordering::Equal));
            let mut taken = 0;
            for cut in found {
                if taken == self.params.cuts_per_neuron {
                    break;
                }
                let key = (fam.neuron, format!("{}:{}", cut.family.name(), cut.witness.key()));
                if self.seen.contains(&key) {
                    continue;
                }
                let row = cut.to_constraint(&entry.bind, format!("cut_{}_{}", entry.tag(), self.pool.len()));
                if row.violation(x) <= self.tol() {
                    continue;
                }
                self.seen.insert(key);
                self.pool.push(row);
                *self.cuts.entry(cut.family.name().to_string()).or_insert(0) += 1;
                taken += 1;
                added += 1;
            }
        }
        Ok(added)
    }

    fn fractional(&self, x: &[T], lo: &[T], hi: &[T]) -> Option<usize> {
        let int = T::lit(self.params.integrality);
        let mut best: Option<(usize, T)> = None;
        for &v in &self.binaries {
            if lo[v] >= hi[v] {
                continue;
            }
            let f = (x[v] - x[v].round()).abs();
            if f <= int {
                continue;
            }
            match self.params.branching {
                Branching::FirstFractional => return Some(v),
                Branching::MostFractional => {
                    if best.map_or(true, |(_, b)| f > b) {
                        best = Some((v, f));
                    }
                }
            }
        }
        best.map(|(v, _)| v)
    }

    /// Cut loop at a node.
    fn process(&mut self, lo: &[T], hi: &[T], rounds: usize) -> Result<Outcome<T>> {
        let mut round = 0;
        let mut first = None;
        loop {
            let Some((v, x)) = self.lp(lo, hi)? else {
                return Ok(Outcome::Pruned);
            };
            let first_value = *first.get_or_insert(v);
            self.loop_values = (first_value, v);
            if self.prunable(v) {
                return Ok(Outcome::Pruned);
            }
            if self.fractional(&x, lo, hi).is_none() {
                return Ok(Outcome::Integral(v, x));
            }
            if round == rounds || self.model.families.is_empty() || self.separate_at(&x)? == 0 {
                return Ok(Outcome::Fractional(v, x));
            }
            round += 1;
        }
    }

    fn offer(&mut self, v: T, x: Vec<T>) {
        if self.model.max_violation(&x) > T::lit(1e-6) {
            return;
        }
        if self.incumbent.as_ref().map_or(true, |(inc, _)| v > *inc) {
            self.incumbent = Some((v, x));
        }
    }

    /// Fixes every neuron's binaries to the activation pattern at `x` and
    /// re-solves.
    fn heuristic(&mut self, x: &[T], lo: &[T], hi: &[T]) -> Result<()> {
        if self.binaries.is_empty() || self.model.neurons.is_empty() {
            return Ok(());
        }
        let trace = self
            .model
            .network
            .as_ref()
            .map(|net| net.trace(&self.model.inputs.iter().map(|&v| x[v]).collect::<Vec<_>>()));
        let (mut lo, mut hi) = (lo.to_vec(), hi.to_vec());
        for entry in &self.model.neurons {
            let input: Vec<T> = match &trace {
                Some(t) if entry.layer >= 1 && entry.layer <= t.len() => t[entry.layer - 1].clone(),
                _ => entry.bind.x.iter().map(|&v| x[v]).collect(),
            };
            if input.len() != entry.ctx.eta() {
                return Ok(());
            }
            for (&z, v) in entry.bind.z.iter().zip(entry.ctx.pattern(&input)) {
                if v < lo[z] || v > hi[z] {
                    return Ok(());
                }
                lo[z] = v;
                hi[z] = v;
            }
        }
        if let Some((v, xs)) = self.lp(&lo, &hi)? {
            if self.fractional(&xs, &lo, &hi).is_none() {
                self.offer(v, xs);
            }
        }
        Ok(())
    }
}

fn check<T: Scalar>(model: &MipModel<T>, params: &SolveParams) -> Result<()> {
    params.validate()?;
    model.validate()
}

/// LP bound after the root cut rounds, without branching.
pub fn root_bound<T: Scalar>(model: &MipModel<T>, params: &SolveParams) -> Result<T> {
    check(model, params)?;
    let mut s = Solver::new(model, params);
    let (lo, hi) = (model.lower_bounds(), model.upper_bounds());
    Ok(match s.process(&lo, &hi, params.root_rounds)? {
        Outcome::Pruned => s.sign * T::neg_infinity(),
        Outcome::Integral(v, _) | Outcome::Fractional(v, _) => s.sign * v,
    })
}

/// Branch-and-cut to optimality or until a limit is hit.
pub fn solve_mip<T: Scalar>(model: &MipModel<T>, params: &SolveParams) -> Result<MipResult<T>> {
    check(model, params)?;
    let start = Instant::now();
    let mut s = Solver::new(model, params);
    let mut open = vec![Node {
        lo: model.lower_bounds(),
        hi: model.upper_bounds(),
        bound: T::infinity(),
        id: 0,
    }];
    let mut next_id = 1;
    let mut nodes = 0;
    let mut failed: Option<T> = None;
    let mut root = None;
    let mut timed_out = false;
    while !open.is_empty() {
        if nodes >= params.node_limit {
            break;
        }
        if params.time_limit.is_some_and(|t| start.elapsed() >= t) {
            timed_out = true;
            break;
        }
        let pick = if s.incumbent.is_none() || params.search == Search::DepthFirst {
            open.len() - 1
        } else {
            let mut b = 0;
            for i in 1..open.len() {
                if open[i].bound > open[b].bound || open[i].bound == open[b].bound && open[i].id < open[b].id {
                    b = i;
                }
            }
            b
        };
        let node = open.swap_remove(pick);
        if s.prunable(node.bound) {
            continue;
        }
        let rounds = if nodes == 0 { params.root_rounds } else { params.node_rounds };
        nodes += 1;
        let outcome = match s.process(&node.lo, &node.hi, rounds) {
            Ok(o) => o,
            Err(_) => {
                failed = Some(failed.map_or(node.bound, |f: T| f.max(node.bound)));
                continue;
            }
        };
        if root.is_none() {
            root = Some(match &outcome {
                Outcome::Pruned => (T::neg_infinity(), T::neg_infinity()),
                _ => s.loop_values,
            });
        }
        match outcome {
            Outcome::Pruned => {}
            Outcome::Integral(v, x) => s.offer(v, x),
            Outcome::Fractional(v, x) => {
                if s.heuristic(&x, &node.lo, &node.hi).is_err() {
                    failed = Some(failed.map_or(v, |f: T| f.max(v)));
                }
                if s.prunable(v) {
                    continue;
                }
                let b = s.fractional(&x, &node.lo, &node.hi).expect("fractional outcome");
                for val in [T::zero(), T::one()] {
                    let (mut lo, mut hi) = (node.lo.clone(), node.hi.clone());
                    lo[b] = val;
                    hi[b] = val;
                    open.push(Node {
                        lo,
                        hi,
                        bound: v,
                        id: next_id,
                    });
                    next_id += 1;
                }
            }
        }
    }
    let sign = s.sign;
    let inc = s.incumbent.as_ref().map(|(v, _)| *v);
    let mut bound = inc.unwrap_or(T::neg_infinity());
    for n in &open {
        if !s.prunable(n.bound) {
            bound = bound.max(n.bound);
        }
    }
    if let Some(f) = failed {
        if !s.prunable(f) {
            bound = bound.max(f);
        }
    }
    let unresolved = !open.iter().all(|n| s.prunable(n.bound)) || failed.is_some_and(|f| !s.prunable(f));
    let status = if !unresolved {
        if inc.is_some() {
            MipStatus::Optimal
        } else {
            MipStatus::Infeasible
        }
    } else if timed_out || open.is_empty() {
        MipStatus::BoundedBy(sign * bound)
    } else {
        MipStatus::NodeLimit
    };
    let gap = match inc {
        Some(v) => (bound - v).max(T::zero()),
        None => T::infinity(),
    };
    let (rb, ra) = root.unwrap_or((T::neg_infinity(), T::neg_infinity()));
    Ok(MipResult {
        status,
        incumbent: inc.map(|v| sign * v),
        point: s.incumbent.map(|(_, x)| x),
        bound: sign * bound,
        gap,
        nodes,
        cuts: s.cuts,
        time: start.elapsed(),
        root_bound_before_cuts: sign * rb,
        root_bound_after_cuts: sign * ra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{single_neuron_model, FormulationOptions, Mode, NeuronContext, VarKind};
    use crate::lp::Sense;
    use crate::model::{Activation, AffineFunc, Interval};

    fn ex1(mode: Mode) -> MipModel<f64> {
        let ctx = NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0, 1.0], -1.5)],
            Activation::Relu,
            &[Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)],
        )
        .unwrap();
        let mut m = single_neuron_model(&ctx, &FormulationOptions::with_mode(mode)).unwrap();
        let y = m.var_index("y_1_0").unwrap();
        let x2 = m.var_index("x_0_1").unwrap();
        m.set_objective(true, vec![(y, 1.0), (x2, -0.5)], 0.0);
        m
    }

    #[test]
    fn single_relu_separation_bigm_root_and_optimum() {
        let m = ex1(Mode::BigM);
        let r = solve_mip(&m, &SolveParams::default()).unwrap();
        assert!((r.root_bound_before_cuts - 0.25).abs() < 1e-9);
        assert_eq!(r.status, MipStatus::Optimal);
        assert!(r.incumbent.unwrap().abs() < 1e-9);
        assert!(r.bound >= r.incumbent.unwrap() - 1e-6);
    }

    #[test]
    fn single_relu_separation_cuts_close_root() {
        let m = ex1(Mode::BigMWithCuts);
        let one = SolveParams {
            root_rounds: 1,
            ..SolveParams::default()
        };
        assert!(root_bound(&m, &one).unwrap().abs() < 1e-9);
        let r = solve_mip(&m, &SolveParams::default()).unwrap();
        assert_eq!(r.nodes, 1);
        assert_eq!(r.cuts.get("relu_ideal"), Some(&1));
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut m = MipModel::<f64>::new();
        let x = m.add_var("x", VarKind::Continuous, 1.0, 0.0);
        let z = m.add_var("z", VarKind::Binary, 0.0, 1.0);
        m.add_constraint("r", vec![(x, 1.0), (z, 1.0)], Sense::Le, 2.0);
        m.set_objective(true, vec![(x, 1.0)], 0.0);
        assert_eq!(solve_mip(&m, &SolveParams::default()).unwrap().status, MipStatus::Infeasible);
    }

    #[test]
    fn pure_lp_root_bound() {
        let mut m = MipModel::<f64>::new();
        let a = m.add_var("a", VarKind::Continuous, 0.0, 3.0);
        let b = m.add_var("b", VarKind::Continuous, 0.0, 3.0);
        m.add_constraint("r", vec![(a, 1.0), (b, 2.0)], Sense::Le, 4.0);
        m.set_objective(false, vec![(a, -1.0), (b, -1.0)], 0.0);
        let lp = solve(&m.lp_relaxation()).unwrap().objective;
        assert!((root_bound(&m, &SolveParams::default()).unwrap() - lp).abs() < 1e-12);
        let r = solve_mip(&m, &SolveParams::default()).unwrap();
        assert!((r.incumbent.unwrap() - lp).abs() < 1e-12);
    }

    #[test]
    fn knapsack_needs_branching() {
        let mut m = MipModel::<f64>::new();
        let w = [5.0, 4.0, 3.0, 2.0];
        let p = [10.0, 7.0, 5.0, 3.0];
        let z: Vec<_> = (0..4).map(|i| m.add_var(format!("z{i}"), VarKind::Binary, 0.0, 1.0)).collect();
        m.add_constraint("cap", z.iter().zip(w).map(|(&v, c)| (v, c)).collect(), Sense::Le, 9.0);
        m.set_objective(true, z.iter().zip(p).map(|(&v, c)| (v, c)).collect(), 0.0);
        let r = solve_mip(&m, &SolveParams::default()).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        assert!((r.incumbent.unwrap() - 17.0).abs() < 1e-9);
        let lim = solve_mip(
            &m,
            &SolveParams {
                node_limit: 1,
                ..SolveParams::default()
            },
        )
        .unwrap();
        assert!(lim.bound >= 17.0 - 1e-9);
    }
}
