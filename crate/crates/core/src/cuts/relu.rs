use super::{emit, require, Cut, QueryPoint, Witness};
use crate::error::Result;
use crate::formulation::{FamilyKind, NeuronContext};
use crate::model::Activation;
use crate::scalar::Scalar;

fn check<T: Scalar>(ctx: &NeuronContext<T>) -> Result<()> {
    require(
        matches!(ctx.activation, Activation::Relu) && ctx.is_box(),
        "the ReLU family needs a ReLU neuron over a box",
    )
}

/// `y <= Σ_{i∈I} w_i(x_i − L̆_i(1−z)) + (b + Σ_{i∉I} w_i Ŭ_i) z`.
pub fn relu_ideal_member<T: Scalar>(ctx: &NeuronContext<T>, subset: &[usize]) -> Result<Cut<T>> {
    check(ctx)?;
    let f = &ctx.pieces[0];
    let eta = ctx.eta();
    let mut inside = vec![false; eta];
    for &i in subset {
        inside[i] = true;
    }
    let mut a = vec![T::zero(); eta];
    let mut cz = f.bias;
    let mut k = T::zero();
    for i in 0..eta {
        let w = f.weights[i];
        if inside[i] {
            a[i] = w;
            cz += w * ctx.l_breve[i];
            k -= w * ctx.l_breve[i];
        } else {
            cz += w * ctx.u_breve[i];
        }
    }
    Ok(Cut::upper(&a, &[cz], k, FamilyKind::ReluIdeal, Witness::Subset(subset.to_vec())))
}

/// Most violated member: `i ∈ Î` iff `w_i x̂_i − w_i L̆_i(1−ẑ) < w_i Ŭ_i ẑ`.
pub fn best_relu_ideal<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Cut<T>> {
    check(ctx)?;
    let w = &ctx.pieces[0].weights;
    let z = q.z[0];
    let subset: Vec<usize> = (0..ctx.eta())
        .filter(|&i| w[i] * q.x[i] - w[i] * ctx.l_breve[i] * (T::one() - z) < w[i] * ctx.u_breve[i] * z)
        .collect();
    Ok(relu_ideal_member(ctx, &subset)?.at(q))
}

pub fn separate_relu_ideal<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Option<Cut<T>>> {
    Ok(emit(best_relu_ideal(q, ctx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineFunc, Interval};

    fn ex1() -> NeuronContext<f64> {
        NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0, 1.0], -1.5)],
            Activation::Relu,
            &[Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_relu_separation_cut() {
        let q = QueryPoint::new(vec![1.0, 0.0], 0.25, vec![0.5]);
        let c = separate_relu_ideal(&q, &ex1()).unwrap().unwrap();
        assert_eq!(c.witness, Witness::Subset(vec![1]));
        // y − x2 + 0.5 z <= 0
        assert_eq!(c.coeffs, vec![0.0, -1.0, 1.0, 0.5]);
        assert_eq!(c.rhs, 0.0);
        assert!((c.violation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integer_point_is_not_separated() {
        let q = QueryPoint::new(vec![1.0, 1.0], 0.5, vec![1.0]);
        let c = best_relu_ideal(&q, &ex1()).unwrap();
        assert_eq!(c.witness, Witness::Subset(vec![]));
        assert!(c.violation.abs() < 1e-12);
        assert!(separate_relu_ideal(&q, &ex1()).unwrap().is_none());
    }

    #[test]
    fn seeded_members_are_the_big_m_rows() {
        let ctx = ex1();
        let all = relu_ideal_member(&ctx, &[0, 1]).unwrap();
        // y <= x1 + x2 − 1.5 + 1.5(1 − z)
        assert_eq!(all.coeffs, vec![-1.0, -1.0, 1.0, 1.5]);
        assert_eq!(all.rhs, 0.0);
        let none = relu_ideal_member(&ctx, &[]).unwrap();
        assert_eq!(none.coeffs, vec![0.0, 0.0, 1.0, -0.5]);
    }
}
