//! Brute-force ground truth: support functions of neuron graphs, exact
//! network optima by activation-pattern enumeration, transportation LPs and
//! exhaustive separation.

use crate::cuts::{
    clipped_lower_member, clipped_upper_member, leaky_member, max_d_member, onehot_member, onehot_options, p2_member,
    p2_options, relu_ideal_member, Cut, QueryPoint, Witness,
};
use crate::error::{Error, Result};
use crate::formulation::NeuronContext;
use crate::lp::{solve, LinearProgram, LpStatus, Sense};
use crate::model::{linearize_stable_neurons, propagate_bounds, Activation, AffineFunc, Network, Region};
use crate::scalar::Scalar;

/// Largest family enumerated exhaustively.
pub const FAMILY_GUARD: usize = 1 << 14;
/// Largest number of nonlinear neurons enumerated.
pub const NEURON_GUARD: usize = 20;

/// Objective over `(x, y)` and optionally over the binaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportQuery<T> {
    pub cx: Vec<T>,
    pub cy: T,
    pub cz: Option<Vec<T>>,
}

/// One linear piece of a neuron's graph: output `g` on `{x : r(x) <= 0 ∀r}`,
/// with the binary assignment that selects it.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPiece<T> {
    pub output: AffineFunc<T>,
    pub region: Vec<AffineFunc<T>>,
    pub z: Vec<T>,
}

fn constant<T: Scalar>(n: usize, c: T) -> AffineFunc<T> {
    let mut f = AffineFunc::zero(n);
    f.bias = c;
    f
}

/// Pieces of the graph in binary order (`z = 1` first for single-binary
/// neurons).
pub fn graph_pieces<T: Scalar>(ctx: &NeuronContext<T>) -> Vec<GraphPiece<T>> {
    neuron_graph_pieces(&ctx.pieces, ctx.activation)
}

/// [`graph_pieces`] from the raw pieces and activation.
pub fn neuron_graph_pieces<T: Scalar>(pieces: &[AffineFunc<T>], activation: Activation<T>) -> Vec<GraphPiece<T>> {
    let n = pieces[0].dim();
    let f = pieces[0].clone();
    let neg = f.scale(-T::one());
    let (one, zero) = (T::one(), T::zero());
    match activation {
        _ if pieces.len() == 1 && activation == Activation::Max => vec![GraphPiece {
            output: f,
            region: vec![],
            z: vec![],
        }],
        Activation::Linear => vec![GraphPiece {
            output: f,
            region: vec![],
            z: vec![],
        }],
        Activation::Relu => vec![
            GraphPiece {
                output: f.clone(),
                region: vec![neg],
                z: vec![one],
            },
            GraphPiece {
                output: AffineFunc::zero(n),
                region: vec![f],
                z: vec![zero],
            },
        ],
        Activation::Leaky { alpha } => vec![
            GraphPiece {
                output: f.clone(),
                region: vec![neg],
                z: vec![one],
            },
            GraphPiece {
                output: f.scale(alpha),
                region: vec![f],
                z: vec![zero],
            },
        ],
        Activation::Clipped { cap } => {
            let mut over = f.clone();
            over.bias -= cap;
            vec![
                GraphPiece {
                    output: AffineFunc::zero(n),
                    region: vec![f.clone()],
                    z: vec![one, zero, zero],
                },
                GraphPiece {
                    output: f.clone(),
                    region: vec![neg, over.clone()],
                    z: vec![zero, one, zero],
                },
                GraphPiece {
                    output: constant(n, cap),
                    region: vec![over.scale(-one)],
                    z: vec![zero, zero, one],
                },
            ]
        }
        Activation::Max => {
            let d = pieces.len();
            (0..d)
                .map(|k| GraphPiece {
                    output: pieces[k].clone(),
                    region: (0..d).filter(|&l| l != k).map(|l| pieces[l].sub(&pieces[k])).collect(),
                    z: (0..d).map(|t| if t == k { one } else { zero }).collect(),
                })
                .collect()
        }
    }
}

fn add_le<T: Scalar>(lp: &mut LinearProgram<T>, cols: &[usize], r: &AffineFunc<T>) {
    let terms = cols
        .iter()
        .zip(&r.weights)
        .filter(|(_, &w)| w != T::zero())
        .map(|(&c, &w)| (c, w))
        .collect();
    lp.add_row(terms, Sense::Le, -r.bias);
}

/// `max` of the query over the graph (or over the Cayley embedding when `cz`
/// is given), restricted to the graph pieces flagged in `allowed`. Pieces
/// with an empty region are skipped; `−∞` when none survives.
pub fn support_function_maxgraph<T: Scalar>(
    ctx: &NeuronContext<T>,
    q: &SupportQuery<T>,
    allowed: Option<&[bool]>,
) -> Result<T> {
    if q.cx.len() != ctx.eta() {
        return Err(Error::LengthMismatch {
            expected: ctx.eta(),
            found: q.cx.len(),
        });
    }
    let mut best = T::neg_infinity();
    for (k, piece) in graph_pieces(ctx).iter().enumerate() {
        if allowed.is_some_and(|a| !a[k]) {
            continue;
        }
        let mut lp = LinearProgram::new(true);
        let cols = ctx.add_domain(&mut lp);
        for r in &piece.region {
            add_le(&mut lp, &cols, r);
        }
        for (i, &c) in cols.iter().enumerate() {
            lp.objective[c] = q.cx[i] + q.cy * piece.output.weights[i];
        }
        lp.offset = q.cy * piece.output.bias;
        if let Some(cz) = &q.cz {
            lp.offset += cz.iter().zip(&piece.z).fold(T::zero(), |s, (&a, &b)| s + a * b);
        }
        let r = solve(&lp)?;
        match r.status {
            LpStatus::Optimal => best = best.max(r.objective),
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(Error::Domain("unbounded domain".into())),
        }
    }
    Ok(best)
}

/// Exact `max c·f(x)` over `region` by enumerating the activation pattern of
/// every neuron that stays nonlinear after linearization.
pub fn enumerate_activation_optimum<T: Scalar>(net: &Network<T>, region: &Region<T>, c: &[T]) -> Result<T> {
    if c.len() != net.output_dim() {
        return Err(Error::LengthMismatch {
            expected: net.output_dim(),
            found: c.len(),
        });
    }
    let bounds = propagate_bounds(net, region)?;
    let net = linearize_stable_neurons(net, &bounds)?;
    let count = net.nonlinear_count();
    if count > NEURON_GUARD {
        return Err(Error::Guard {
            what: "nonlinear neurons",
            size: count,
            limit: NEURON_GUARD,
        });
    }
    // Piece lists per neuron, in layer order.
    let mut options: Vec<Vec<GraphPiece<T>>> = Vec::new();
    for layer in &net.layers {
        for n in &layer.neurons {
            let ps = neuron_graph_pieces(&n.pieces, n.activation);
            options.push(ps);
        }
    }
    let mut choice = Vec::with_capacity(options.len());
    let mut best = T::neg_infinity();
    enumerate(&net, region, c, &options, &mut choice, &mut best)?;
    Ok(best)
}

/// LP of the network with the neurons before `choice.len()` fixed to their
/// chosen pieces; neurons after it are absent.
fn pattern_lp<T: Scalar>(
    net: &Network<T>,
    region: &Region<T>,
    options: &[Vec<GraphPiece<T>>],
    choice: &[usize],
) -> (LinearProgram<T>, Vec<usize>) {
    let mut lp = LinearProgram::new(true);
    let mut prev: Vec<usize> = region.bounds.iter().map(|b| lp.add_var(b.lo, b.hi, T::zero())).collect();
    for (s, p) in region.domain.simplex_blocks() {
        lp.add_row((s..s + p).map(|j| (prev[j], T::one())).collect(), Sense::Eq, T::one());
    }
    let mut at = 0;
    for layer in &net.layers {
        let mut outs = Vec::new();
        for _ in &layer.neurons {
            if at == choice.len() {
                return (lp, Vec::new());
            }
            let piece = &options[at][choice[at]];
            for r in &piece.region {
                add_le(&mut lp, &prev, r);
            }
            let v = lp.add_free_var(T::zero());
            let mut terms: Vec<(usize, T)> = vec![(v, T::one())];
            terms.extend(prev.iter().zip(&piece.output.weights).map(|(&c, &w)| (c, -w)));
            lp.add_row(terms, Sense::Eq, piece.output.bias);
            outs.push(v);
            at += 1;
        }
        prev = outs;
    }
    (lp, prev)
}

fn enumerate<T: Scalar>(
    net: &Network<T>,
    region: &Region<T>,
    c: &[T],
    options: &[Vec<GraphPiece<T>>],
    choice: &mut Vec<usize>,
    best: &mut T,
) -> Result<()> {
    let (mut lp, outs) = pattern_lp(net, region, options, choice);
    if choice.len() == options.len() {
        for (&v, &w) in outs.iter().zip(c) {
            lp.objective[v] = w;
        }
        let r = solve(&lp)?;
        match r.status {
            LpStatus::Optimal => *best = best.max(r.objective),
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(Error::Domain("unbounded network LP".into())),
        }
        return Ok(());
    }
    if !choice.is_empty() && solve(&lp)?.status == LpStatus::Infeasible {
        return Ok(());
    }
    for k in 0..options[choice.len()].len() {
        choice.push(k);
        enumerate(net, region, c, options, choice, best)?;
        choice.pop();
    }
    Ok(())
}

/// `max Σ_{j,k} w[k][j] γ_jk` over couplings `γ >= 0` with row sums `x` and
/// column sums `z`. The dual optimum is checked against the primal.
pub fn transport_lp<T: Scalar>(x: &[T], z: &[T], w: &[Vec<T>]) -> Result<T> {
    let tol = T::lit(1e-9);
    let sx: T = x.iter().copied().sum();
    let sz: T = z.iter().copied().sum();
    if (sx - T::one()).abs() > tol || (sz - T::one()).abs() > tol || x.iter().chain(z).any(|&v| v < -tol) {
        return Err(Error::Parameter("transport marginals are not normalized".into()));
    }
    if w.len() != z.len() || w.iter().any(|r| r.len() != x.len()) {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            found: w.len(),
        });
    }
    let (p, d) = (x.len(), z.len());
    let mut lp = LinearProgram::new(true);
    let g: Vec<Vec<usize>> = (0..p)
        .map(|j| (0..d).map(|k| lp.add_var(T::zero(), T::infinity(), w[k][j])).collect())
        .collect();
    for j in 0..p {
        lp.add_row((0..d).map(|k| (g[j][k], T::one())).collect(), Sense::Eq, x[j]);
    }
    for k in 0..d {
        lp.add_row((0..p).map(|j| (g[j][k], T::one())).collect(), Sense::Eq, z[k]);
    }
    let r = solve(&lp)?;
    if r.status != LpStatus::Optimal {
        return Err(Error::Lp("transport LP did not solve to optimality".into()));
    }
    let dual: T = (0..p).map(|j| r.duals[j] * x[j]).sum::<T>() + (0..d).map(|k| r.duals[p + k] * z[k]).sum::<T>();
    let scale = T::one() + r.objective.abs();
    if (dual - r.objective).abs() > T::lit(1e-8) * scale {
        return Err(Error::Lp("transport duality residual too large".into()));
    }
    Ok(r.objective)
}

/// Families that can be enumerated member by member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    ReluIdeal,
    MaxDBox,
    /// Two-piece family over simplices and intervals.
    OneHot,
    /// Max-of-d family over two-coordinate simplices.
    SimplexPairs,
    Leaky,
    ClippedUpper,
    ClippedLower,
}

fn guard(size: usize, limit: usize) -> Result<()> {
    if size > limit {
        Err(Error::Guard {
            what: "family members",
            size,
            limit,
        })
    } else {
        Ok(())
    }
}

fn subsets(eta: usize, limit: usize) -> Result<Vec<Vec<usize>>> {
    if eta >= 63 {
        return Err(Error::Guard {
            what: "family members",
            size: usize::MAX,
            limit,
        });
    }
    guard(1 << eta, limit)?;
    Ok((0..1usize << eta)
        .map(|m| (0..eta).filter(|i| m >> i & 1 == 1).collect())
        .collect())
}

fn mappings(sizes: &[usize], limit: usize) -> Result<Vec<Vec<usize>>> {
    let total = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).unwrap_or(usize::MAX);
    guard(total, limit)?;
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|m| {
                (0..s).map(move |o| {
                    let mut m = m.clone();
                    m.push(o);
                    m
                })
            })
            .collect();
    }
    Ok(out)
}

/// Every member of `family` on `ctx`, failing beyond `limit` members.
pub fn enumerate_family<T: Scalar>(ctx: &NeuronContext<T>, family: Family, limit: usize) -> Result<Vec<Cut<T>>> {
    match family {
        Family::ReluIdeal => subsets(ctx.eta(), limit)?.iter().map(|s| relu_ideal_member(ctx, s)).collect(),
        Family::Leaky => subsets(ctx.eta(), limit)?.iter().map(|s| leaky_member(ctx, s)).collect(),
        Family::ClippedUpper => subsets(ctx.eta(), limit)?.iter().map(|s| clipped_upper_member(ctx, s)).collect(),
        Family::ClippedLower => subsets(ctx.eta(), limit)?.iter().map(|s| clipped_lower_member(ctx, s)).collect(),
        Family::MaxDBox => mappings(&vec![ctx.pieces.len(); ctx.eta()], limit)?
            .iter()
            .map(|m| max_d_member(ctx, m))
            .collect(),
        Family::OneHot => mappings(&onehot_options(ctx), limit)?
            .iter()
            .map(|m| onehot_member(ctx, m))
            .collect(),
        Family::SimplexPairs => mappings(&p2_options(ctx)?, limit)?
            .iter()
            .map(|m| p2_member(ctx, m))
            .collect(),
    }
}

/// Most violated member by enumeration; the first one wins ties.
pub fn exhaustive_separation<T: Scalar>(
    q: &QueryPoint<T>,
    ctx: &NeuronContext<T>,
    family: Family,
) -> Result<(Witness<T>, T)> {
    let local = q.local();
    let mut best: Option<(Witness<T>, T)> = None;
    for cut in enumerate_family(ctx, family, FAMILY_GUARD)? {
        let v = cut.violation_at(&local);
        if best.as_ref().map_or(true, |b| v > b.1) {
            best = Some((cut.witness, v));
        }
    }
    best.ok_or_else(|| Error::Parameter("empty family".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Domain, Interval};

    fn ex1() -> NeuronContext<f64> {
        NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0, 1.0], -1.5)],
            Activation::Relu,
            &[Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_relu_separation_support_values() {
        let c = ex1();
        let q = |cx: Vec<f64>, cy: f64| SupportQuery { cx, cy, cz: None };
        assert!((support_function_maxgraph(&c, &q(vec![0.0, 0.0], 1.0), None).unwrap() - 0.5).abs() < 1e-12);
        assert!(support_function_maxgraph(&c, &q(vec![0.0, -0.5], 1.0), None).unwrap().abs() < 1e-12);
        assert!(support_function_maxgraph(&c, &q(vec![0.0, 0.0], -1.0), None).unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_relu_separation_enumeration() {
        let net = Network::dense(
            Domain::boxed(&[(0.0, 1.0), (0.0, 1.0)]).unwrap(),
            vec![(vec![vec![1.0, 1.0]], vec![-1.5], Activation::Relu)],
        )
        .unwrap();
        let r = Region::from_domain(&net.domain);
        assert!((enumerate_activation_optimum::<f64>(&net, &r, &[1.0]).unwrap() - 0.5).abs() < 1e-12);
        let id = Network::dense(
            Domain::boxed(&[(-1.0, 1.0)]).unwrap(),
            vec![(vec![vec![1.0]], vec![0.0], Activation::Relu)],
        )
        .unwrap();
        let r = Region::from_domain(&id.domain);
        assert!((enumerate_activation_optimum::<f64>(&id, &r, &[1.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transport_cells() {
        assert!((transport_lp::<f64>(&[1.0], &[1.0], &[vec![3.5]]).unwrap() - 3.5).abs() < 1e-12);
        let w = vec![vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 4.0]];
        let v = transport_lp::<f64>(&[0.2, 0.3, 0.5], &[1.0, 0.0], &w).unwrap();
        assert!((v - (0.2 + 0.6 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn single_relu_separation_exhaustive() {
        let q = QueryPoint::new(vec![1.0, 0.0], 0.25, vec![0.5]);
        let (w, v) = exhaustive_separation(&q, &ex1(), Family::ReluIdeal).unwrap();
        assert_eq!(w, Witness::Subset(vec![1]));
        assert!((v - 0.5).abs() < 1e-12);
        let q = QueryPoint::new(vec![1.0, 1.0], 0.5, vec![1.0]);
        assert!(exhaustive_separation(&q, &ex1(), Family::ReluIdeal).unwrap().1 <= 1e-12);
    }

    #[test]
    fn guard_fails_loudly() {
        let ctx = NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0; 15], 0.0)],
            Activation::Relu,
            &vec![Interval::new(-1.0, 1.0); 15],
        )
        .unwrap();
        assert!(matches!(enumerate_family(&ctx, Family::ReluIdeal, FAMILY_GUARD), Err(Error::Guard { .. })));
    }
}
