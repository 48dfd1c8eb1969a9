use super::{require, Cut, QueryPoint, Witness, EMIT_TOL};
use crate::error::Result;
use crate::formulation::{FamilyKind, NeuronContext};
use crate::model::Activation;
use crate::scalar::Scalar;

fn cap<T: Scalar>(ctx: &NeuronContext<T>) -> Result<T> {
    match ctx.activation {
        Activation::Clipped { cap } if ctx.is_box() => Ok(cap),
        _ => {
            require(false, "the clipped family needs a clipped ReLU over a box")?;
            unreachable!()
        }
    }
}

fn membership(eta: usize, subset: &[usize]) -> Vec<bool> {
    let mut inside = vec![false; eta];
    for &i in subset {
        inside[i] = true;
    }
    inside
}

/// `φ(I) = Σ_{i∈I} w_i L̆_i + Σ_{i∉I} w_i Ŭ_i + b`.
pub fn clipped_phi<T: Scalar>(ctx: &NeuronContext<T>, subset: &[usize]) -> T {
    let f = &ctx.pieces[0];
    let inside = membership(ctx.eta(), subset);
    (0..ctx.eta()).fold(f.bias, |s, i| {
        s + f.weights[i] * if inside[i] { ctx.l_breve[i] } else { ctx.u_breve[i] }
    })
}

fn complement(eta: usize, subset: &[usize]) -> Vec<usize> {
    let inside = membership(eta, subset);
    (0..eta).filter(|&i| !inside[i]).collect()
}

/// `y <= Σ_{i∈I} w_i x_i + (b + Σ_{i∉I} w_i Ŭ_i)(z₂+z₃) − (Σ_{i∈I} w_i L̆_i) z₁`.
pub fn clipped_upper_member<T: Scalar>(ctx: &NeuronContext<T>, subset: &[usize]) -> Result<Cut<T>> {
    let c = cap(ctx)?;
    let f = &ctx.pieces[0];
    let inside = membership(ctx.eta(), subset);
    let mut a = vec![T::zero(); ctx.eta()];
    let mut on = f.bias;
    let mut off = T::zero();
    for i in 0..ctx.eta() {
        if inside[i] {
            a[i] = f.weights[i];
            off -= f.weights[i] * ctx.l_breve[i];
        } else {
            on += f.weights[i] * ctx.u_breve[i];
        }
    }
    let mut cut = Cut::upper(&a, &[off, on, on], T::zero(), FamilyKind::Clipped, Witness::Subset(subset.to_vec()));
    cut.facet = Some(clipped_phi(ctx, subset) < c);
    Ok(cut)
}

/// `y >= Σ_{i∈I} w_i x_i + (b + Σ_{i∉I} w_i L̆_i)(z₁+z₂) − (Σ_{i∈I} w_i Ŭ_i − C) z₃`.
pub fn clipped_lower_member<T: Scalar>(ctx: &NeuronContext<T>, subset: &[usize]) -> Result<Cut<T>> {
    let c = cap(ctx)?;
    let f = &ctx.pieces[0];
    let inside = membership(ctx.eta(), subset);
    let mut a = vec![T::zero(); ctx.eta()];
    let mut low = f.bias;
    let mut top = c;
    for i in 0..ctx.eta() {
        if inside[i] {
            a[i] = f.weights[i];
            top -= f.weights[i] * ctx.u_breve[i];
        } else {
            low += f.weights[i] * ctx.l_breve[i];
        }
    }
    let mut cut = Cut::lower(
        &a,
        &[low, low, top],
        T::zero(),
        FamilyKind::Clipped,
        Witness::LowerSubset(subset.to_vec()),
    );
    cut.facet = Some(clipped_phi(ctx, &complement(ctx.eta(), subset)) > T::zero());
    Ok(cut)
}

/// Upper member minimizing the right-hand side:
/// `i ∈ I` iff `w_i x̂_i − w_i L̆_i ẑ₁ < w_i Ŭ_i(ẑ₂+ẑ₃)`.
pub fn best_clipped_upper<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Cut<T>> {
    cap(ctx)?;
    let w = &ctx.pieces[0].weights;
    let subset: Vec<usize> = (0..ctx.eta())
        .filter(|&i| w[i] * q.x[i] - w[i] * ctx.l_breve[i] * q.z[0] < w[i] * ctx.u_breve[i] * (q.z[1] + q.z[2]))
        .collect();
    Ok(clipped_upper_member(ctx, &subset)?.at(q))
}

/// Lower member maximizing the right-hand side:
/// `i ∈ I` iff `w_i x̂_i − w_i Ŭ_i ẑ₃ > w_i L̆_i(ẑ₁+ẑ₂)`.
pub fn best_clipped_lower<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Cut<T>> {
    cap(ctx)?;
    let w = &ctx.pieces[0].weights;
    let subset: Vec<usize> = (0..ctx.eta())
        .filter(|&i| w[i] * q.x[i] - w[i] * ctx.u_breve[i] * q.z[2] > w[i] * ctx.l_breve[i] * (q.z[0] + q.z[1]))
        .collect();
    Ok(clipped_lower_member(ctx, &subset)?.at(q))
}

/// Up to one violated member of each clipped family, upper first.
pub fn separate_clipped<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Vec<Cut<T>>> {
    let tol = T::lit(EMIT_TOL);
    Ok([best_clipped_upper(q, ctx)?, best_clipped_lower(q, ctx)?]
        .into_iter()
        .filter(|c| c.violation > tol)
        .collect())
}
