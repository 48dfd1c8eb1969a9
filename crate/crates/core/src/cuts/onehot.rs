use super::knapsack::{d2_block_min, p2_values};
use super::{better, emit, pair_terms, require, Cut, QueryPoint, Witness};
use crate::error::{Error, Result};
use crate::formulation::{CtxBlock, FamilyKind, NeuronContext};
use crate::model::{Activation, AffineFunc};
use crate::scalar::Scalar;

fn pieces<T: Scalar>(ctx: &NeuronContext<T>) -> Result<(AffineFunc<T>, AffineFunc<T>)> {
    require(ctx.rows.is_empty(), "the two-piece family does not take polytope rows")?;
    ctx.two_pieces()
        .ok_or_else(|| Error::Unsupported("the two-piece family needs a two-piece neuron".into()))
}

/// Options per block: two for an interval coordinate (as a two-point
/// simplex), `p` for a simplex block.
pub fn onehot_options<T: Scalar>(ctx: &NeuronContext<T>) -> Vec<usize> {
    ctx.blocks
        .iter()
        .map(|b| match *b {
            CtxBlock::Interval(_) => 2,
            CtxBlock::Simplex { len, .. } => len,
        })
        .collect()
}

/// `N` terms of an interval coordinate: `(max (w²−w¹)·[L,U], max (w¹−w²)·[L,U])`.
fn interval_n<T: Scalar>(g1: &AffineFunc<T>, g2: &AffineFunc<T>, ctx: &NeuronContext<T>, i: usize) -> (T, T) {
    let dw = g1.weights[i] - g2.weights[i];
    ((-dw * ctx.lo[i]).max(-dw * ctx.hi[i]), (dw * ctx.lo[i]).max(dw * ctx.hi[i]))
}

/// Member for one option per block. A simplex block with sorted position `J`
/// contributes `w̃_J z₁ + Σ_{pos>J}(w̃_pos − w̃_J)x_pos + Σ_j w²_j x_j`; an
/// interval coordinate contributes `w¹_i x_i + N¹²_i z₂` (option 0) or
/// `w²_i x_i + N²¹_i z₁` (option 1). Biases add `b¹z₁ + b²z₂`.
pub fn onehot_member<T: Scalar>(ctx: &NeuronContext<T>, map: &[usize]) -> Result<Cut<T>> {
    let (g1, g2) = pieces(ctx)?;
    let opts = onehot_options(ctx);
    if map.len() != opts.len() || map.iter().zip(&opts).any(|(&m, &o)| m >= o) {
        return Err(Error::Parameter("mapping must pick one option per block".into()));
    }
    let mut a = vec![T::zero(); ctx.eta()];
    let mut c1 = g1.bias;
    let mut c2 = g2.bias;
    let mut simplex = 0;
    for (b, &opt) in ctx.blocks.iter().zip(map) {
        match *b {
            CtxBlock::Interval(i) => {
                let (n12, n21) = interval_n(&g1, &g2, ctx, i);
                if opt == 0 {
                    a[i] += g1.weights[i];
                    c2 += n12;
                } else {
                    a[i] += g2.weights[i];
                    c1 += n21;
                }
            }
            CtxBlock::Simplex { start, len } => {
                let order = &ctx.simplex_order[simplex];
                simplex += 1;
                let wt = |j: usize| g1.weights[j] - g2.weights[j];
                let wj = wt(order[opt]);
                c1 += wj;
                for &j in &order[opt + 1..] {
                    a[j] += wt(j) - wj;
                }
                for j in start..start + len {
                    a[j] += g2.weights[j];
                }
            }
        }
    }
    let (cz, k) = pair_terms(ctx.nz(), c1, c2);
    Ok(Cut::upper(&a, &cz, k, FamilyKind::OneHotRelu, Witness::Mapping(map.to_vec())))
}

/// The two constant mappings (first and last option everywhere).
pub fn onehot_seed_cuts<T: Scalar>(ctx: &NeuronContext<T>) -> Result<Vec<Cut<T>>> {
    let opts = onehot_options(ctx);
    let first = vec![0; opts.len()];
    let last: Vec<usize> = opts.iter().map(|&o| o - 1).collect();
    Ok(vec![onehot_member(ctx, &first)?, onehot_member(ctx, &last)?])
}

/// Most violated member; each block is an independent knapsack.
pub fn best_onehot<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Cut<T>> {
    let (g1, g2) = pieces(ctx)?;
    let (z1, z2) = q.z_pair();
    let mut map = Vec::with_capacity(ctx.blocks.len());
    let mut simplex = 0;
    for b in &ctx.blocks {
        match *b {
            CtxBlock::Interval(i) => {
                let (n12, n21) = interval_n(&g1, &g2, ctx, i);
                let v0 = g1.weights[i] * q.x[i] + n12 * z2;
                let v1 = g2.weights[i] * q.x[i] + n21 * z1;
                map.push(if better(v1, v0) { 1 } else { 0 });
            }
            CtxBlock::Simplex { .. } => {
                let order = &ctx.simplex_order[simplex];
                simplex += 1;
                let (_, pos) = d2_block_min(order, |j| g1.weights[j] - g2.weights[j], |j| q.x[j], z1);
                map.push(pos);
            }
        }
    }
    Ok(onehot_member(ctx, &map)?.at(q))
}

pub fn separate_onehot_relu<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Option<Cut<T>>> {
    Ok(emit(best_onehot(q, ctx)?))
}

fn p2_check<T: Scalar>(ctx: &NeuronContext<T>) -> Result<()> {
    require(
        matches!(ctx.activation, Activation::Max)
            && ctx.rows.is_empty()
            && ctx
                .blocks
                .iter()
                .all(|b| matches!(b, CtxBlock::Simplex { len: 2, .. })),
        "the two-coordinate simplex family needs a max neuron over simplices with two coordinates",
    )
}

fn p2_order<T: Scalar>(ctx: &NeuronContext<T>, s: usize) -> Vec<usize> {
    let wt: Vec<T> = ctx.pieces.iter().map(|p| p.weights[s] - p.weights[s + 1]).collect();
    let mut o: Vec<usize> = (0..wt.len()).collect();
    o.sort_by(|&a, &b| wt[a].partial_cmp(&wt[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    o
}

/// Options per block of the two-coordinate simplex family: one per piece.
pub fn p2_options<T: Scalar>(ctx: &NeuronContext<T>) -> Result<Vec<usize>> {
    p2_check(ctx)?;
    Ok(vec![ctx.pieces.len(); ctx.blocks.len()])
}

/// Member of the max-of-d family over two-coordinate simplices. Block
/// `(x₁, x₂)` with sorted position `K` contributes
/// `w̃^K x₁ + Σ_{pos<=K} w^pos₂ z_pos + Σ_{pos>K}(w^pos₁ − w̃^K) z_pos`.
/// Every member is an inequality of the dual family, hence the tag.
pub fn p2_member<T: Scalar>(ctx: &NeuronContext<T>, map: &[usize]) -> Result<Cut<T>> {
    let opts = p2_options(ctx)?;
    if map.len() != opts.len() || map.iter().zip(&opts).any(|(&m, &o)| m >= o) {
        return Err(Error::Parameter("mapping must pick one piece position per block".into()));
    }
    let mut a = vec![T::zero(); ctx.eta()];
    let mut c: Vec<T> = ctx.pieces.iter().map(|p| p.bias).collect();
    for (b, &kk) in ctx.blocks.iter().zip(map) {
        let CtxBlock::Simplex { start: s, .. } = *b else { unreachable!() };
        let order = p2_order(ctx, s);
        let w = |k: usize| (ctx.pieces[k].weights[s], ctx.pieces[k].weights[s + 1]);
        let (p1, p2) = w(order[kk]);
        let wk = p1 - p2;
        a[s] += wk;
        for (pos, &k) in order.iter().enumerate() {
            c[k] += if pos <= kk { w(k).1 } else { w(k).0 - wk };
        }
    }
    Ok(Cut::upper(&a, &c, T::zero(), FamilyKind::IdealDualSubgradient, Witness::Mapping(map.to_vec())))
}

/// Most violated member of the two-coordinate simplex family.
pub fn best_p2<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Cut<T>> {
    p2_check(ctx)?;
    let mut map = Vec::new();
    for b in &ctx.blocks {
        let CtxBlock::Simplex { start: s, .. } = *b else { unreachable!() };
        let order = p2_order(ctx, s);
        let vals = p2_values(&order, |k| (ctx.pieces[k].weights[s], ctx.pieces[k].weights[s + 1]), q.x[s], &q.z);
        let mut best = 0;
        for pos in 1..vals.len() {
            if better(vals[pos], vals[best]) {
                best = pos;
            }
        }
        map.push(best);
    }
    Ok(p2_member(ctx, &map)?.at(q))
}
