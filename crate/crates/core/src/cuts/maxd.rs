use super::{better, emit, require, Cut, QueryPoint, Witness};
use crate::error::{Error, Result};
use crate::formulation::{FamilyKind, NeuronContext};
use crate::model::Activation;
use crate::scalar::Scalar;

fn check<T: Scalar>(ctx: &NeuronContext<T>) -> Result<()> {
    require(
        matches!(ctx.activation, Activation::Max) && ctx.is_box(),
        "the max-of-d box family needs a max neuron over a box",
    )
}

/// Coordinate `i` mapped to piece `ℓ = map[i]` contributes
/// `w^ℓ_i x_i + Σ_k max{(w^k_i − w^ℓ_i)L_i, (w^k_i − w^ℓ_i)U_i} z_k`; the
/// biases add `Σ_k b^k z_k`.
pub fn max_d_member<T: Scalar>(ctx: &NeuronContext<T>, map: &[usize]) -> Result<Cut<T>> {
    check(ctx)?;
    let d = ctx.pieces.len();
    if map.len() != ctx.eta() || map.iter().any(|&l| l >= d) {
        return Err(Error::Parameter("mapping must send each coordinate to a piece".into()));
    }
    let mut a = vec![T::zero(); ctx.eta()];
    let mut c: Vec<T> = ctx.pieces.iter().map(|p| p.bias).collect();
    for (i, &l) in map.iter().enumerate() {
        let wl = ctx.pieces[l].weights[i];
        a[i] = wl;
        for (k, p) in ctx.pieces.iter().enumerate() {
            let dw = p.weights[i] - wl;
            c[k] += (dw * ctx.lo[i]).max(dw * ctx.hi[i]);
        }
    }
    Ok(Cut::upper(&a, &c, T::zero(), FamilyKind::MaxDBox, Witness::Mapping(map.to_vec())))
}

/// Per coordinate, the piece minimizing its contribution at the query point,
/// found in `O(d)` from the presorted weights.
pub fn best_max_d_box<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Cut<T>> {
    check(ctx)?;
    let d = ctx.pieces.len();
    let zsum: T = q.z.iter().copied().sum();
    let mut map = Vec::with_capacity(ctx.eta());
    for i in 0..ctx.eta() {
        let order = &ctx.coord_order[i];
        let wsum: T = order.iter().map(|&k| ctx.pieces[k].weights[i] * q.z[k]).sum();
        let (lo, hi, xi) = (ctx.lo[i], ctx.hi[i], q.x[i]);
        let mut pre_z = T::zero();
        let mut pre_wz = T::zero();
        let mut best = (T::infinity(), d);
        let mut s = 0;
        while s < d {
            // Pieces with equal weight share one prefix.
            let v = ctx.pieces[order[s]].weights[i];
            let mut e = s;
            while e < d && ctx.pieces[order[e]].weights[i] == v {
                e += 1;
            }
            let term = v * xi + hi * ((wsum - pre_wz) - v * (zsum - pre_z)) + lo * (pre_wz - v * pre_z);
            let l = order[s..e].iter().copied().min().unwrap_or(order[s]);
            if better(term, best.0) || (!better(best.0, term) && l < best.1) {
                best = (term, l);
            }
            for &k in &order[s..e] {
                pre_z += q.z[k];
                pre_wz += ctx.pieces[k].weights[i] * q.z[k];
            }
            s = e;
        }
        map.push(best.1);
    }
    Ok(max_d_member(ctx, &map)?.at(q))
}

pub fn separate_max_d_box<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Option<Cut<T>>> {
    Ok(emit(best_max_d_box(q, ctx)?))
}
