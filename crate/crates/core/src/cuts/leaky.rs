use super::{emit, require, Cut, QueryPoint, Witness};
use crate::error::Result;
use crate::formulation::{FamilyKind, NeuronContext};
use crate::model::Activation;
use crate::scalar::Scalar;

fn alpha<T: Scalar>(ctx: &NeuronContext<T>) -> Result<T> {
    match ctx.activation {
        Activation::Leaky { alpha } if ctx.is_box() => Ok(alpha),
        _ => {
            require(false, "the leaky family needs a leaky ReLU over a box")?;
            unreachable!()
        }
    }
}

/// `y <= Σ_{i∈I}[w_i x_i − (1−α)w_i L̆_i(1−z)] + Σ_{i∉I}[α w_i x_i + (1−α)w_i Ŭ_i z] + bz + αb(1−z)`.
pub fn leaky_member<T: Scalar>(ctx: &NeuronContext<T>, subset: &[usize]) -> Result<Cut<T>> {
    let al = alpha(ctx)?;
    let s = T::one() - al;
    let f = &ctx.pieces[0];
    let mut inside = vec![false; ctx.eta()];
    for &i in subset {
        inside[i] = true;
    }
    let mut a = vec![T::zero(); ctx.eta()];
    let mut cz = f.bias - al * f.bias;
    let mut k = al * f.bias;
    for i in 0..ctx.eta() {
        let w = f.weights[i];
        if inside[i] {
            a[i] = w;
            cz += s * w * ctx.l_breve[i];
            k -= s * w * ctx.l_breve[i];
        } else {
            a[i] = al * w;
            cz += s * w * ctx.u_breve[i];
        }
    }
    Ok(Cut::upper(&a, &[cz], k, FamilyKind::Leaky, Witness::Subset(subset.to_vec())))
}

/// `i ∈ I` iff `w_i x̂_i − (1−α)w_i L̆_i(1−ẑ) < α w_i x̂_i + (1−α)w_i Ŭ_i ẑ`.
pub fn best_leaky<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Cut<T>> {
    let al = alpha(ctx)?;
    let s = T::one() - al;
    let w = &ctx.pieces[0].weights;
    let z = q.z[0];
    let subset: Vec<usize> = (0..ctx.eta())
        .filter(|&i| {
            w[i] * q.x[i] - s * w[i] * ctx.l_breve[i] * (T::one() - z) < al * w[i] * q.x[i] + s * w[i] * ctx.u_breve[i] * z
        })
        .collect();
    Ok(leaky_member(ctx, &subset)?.at(q))
}

pub fn separate_leaky<T: Scalar>(q: &QueryPoint<T>, ctx: &NeuronContext<T>) -> Result<Option<Cut<T>>> {
    Ok(emit(best_leaky(q, ctx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineFunc, Interval};

    fn ctx(alpha: f64) -> NeuronContext<f64> {
        NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0], 0.0)],
            Activation::Leaky { alpha },
            &[Interval::new(-1.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn members_are_the_big_m_rows_in_one_dimension() {
        let c = ctx(0.1);
        // I = {1}: y <= x − 0.9(−1)(1 − z) = x + 0.9 − 0.9z
        let m = leaky_member(&c, &[0]).unwrap();
        assert_eq!(m.coeffs, vec![-1.0, 1.0, 0.9]);
        assert!((m.rhs - 0.9).abs() < 1e-15);
        // I = ∅: y <= 0.1x + 0.9z
        let m = leaky_member(&c, &[]).unwrap();
        assert_eq!(m.coeffs, vec![-0.1, 1.0, -0.9]);
    }

    #[test]
    fn fractional_point_gets_the_smaller_member() {
        let c = ctx(0.1);
        let q = QueryPoint::new(vec![0.0], 0.45, vec![0.5]);
        let cut = best_leaky(&q, &c).unwrap();
        let direct: f64 = [vec![0usize], vec![]]
            .iter()
            .map(|s| leaky_member(&c, s).unwrap().violation_at(&q.local()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((cut.violation - direct).abs() < 1e-12);
        assert!(separate_leaky(&QueryPoint::new(vec![1.0], 1.0, vec![1.0]), &c).unwrap().is_none());
    }
}
