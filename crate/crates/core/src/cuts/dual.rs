use super::{emit, require, Cut, QueryPoint, Witness, EMIT_TOL};
use crate::error::{Error, Result};
use crate::formulation::{FamilyKind, NeuronContext};
use crate::lp::{solve, LinearProgram, LpStatus};
use crate::model::Activation;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualParams {
    pub iterations: usize,
}

impl Default for DualParams {
    fn default() -> Self {
        Self { iterations: 200 }
    }
}

/// `max {(w^k − α)·x : x ∈ D, f^k(x) >= f^ℓ(x) ∀ℓ}` for one piece.
struct PieceLp<T> {
    lp: LinearProgram<T>,
    cols: Vec<usize>,
}

impl<T: Scalar> PieceLp<T> {
    fn solve(&mut self, dir: &[T]) -> Result<(T, Vec<T>)> {
        for (i, &c) in self.cols.iter().enumerate() {
            self.lp.objective[c] = dir[i];
        }
        let r = solve(&self.lp)?;
        match r.status {
            LpStatus::Optimal => Ok((r.objective, self.cols.iter().map(|&c| r.x[c]).collect())),
            LpStatus::Unbounded => Err(Error::Domain("unbounded domain".into())),
            LpStatus::Infeasible => Err(Error::Lp("piece region became infeasible".into())),
        }
    }
}

/// Subgradient descent on `φ(α) = α·x̂ + Σ_k ẑ_k (max_{D_{|k}} (w^k − α)·x + b^k)`.
/// Every `α` yields the valid inequality `y <= α·x + Σ_k (h_k(α) + b^k) z_k`;
/// the best one found is returned if violated. A positive `ẑ_k` on a piece
/// that is never maximal yields the cut `z_k <= 0` instead.
pub fn separate_ideal_dual_subgradient<T: Scalar>(
    q: &QueryPoint<T>,
    ctx: &NeuronContext<T>,
    params: &DualParams,
) -> Result<Option<Cut<T>>> {
    require(matches!(ctx.activation, Activation::Max), "the dual family needs a max neuron")?;
    let d = ctx.pieces.len();
    let eta = ctx.eta();
    let mut lps: Vec<Option<PieceLp<T>>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut lp = LinearProgram::new(true);
        let cols = ctx.add_domain(&mut lp);
        NeuronContext::add_dominance(&mut lp, &cols, &ctx.pieces, k);
        let feasible = solve(&lp)?.status != LpStatus::Infeasible;
        if !feasible {
            if q.z[k] > T::lit(EMIT_TOL) {
                let mut coeffs = vec![T::zero(); eta + 1 + d];
                coeffs[eta + 1 + k] = T::one();
                return Ok(Some(Cut {
                    coeffs,
                    sense: crate::lp::Sense::Le,
                    rhs: T::zero(),
                    violation: q.z[k],
                    family: FamilyKind::IdealDualSubgradient,
                    witness: Witness::Fixing(k),
                    facet: None,
                }));
            }
            lps.push(None);
        } else {
            lps.push(Some(PieceLp { lp, cols }));
        }
    }
    let mut alpha: Vec<T> = (0..eta)
        .map(|i| (0..d).fold(T::zero(), |s, k| s + q.z[k] * ctx.pieces[k].weights[i]))
        .collect();
    let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
    for t in 1..=params.iterations.max(1) {
        let mut phi = alpha.iter().zip(&q.x).fold(T::zero(), |s, (&a, &x)| s + a * x);
        let mut h = vec![T::zero(); d];
        let mut g = q.x.clone();
        for k in 0..d {
            let Some(plp) = lps[k].as_mut() else { continue };
            let dir: Vec<T> = (0..eta).map(|i| ctx.pieces[k].weights[i] - alpha[i]).collect();
            let (v, xs) = plp.solve(&dir)?;
            h[k] = v;
            phi += q.z[k] * (v + ctx.pieces[k].bias);
            for i in 0..eta {
                g[i] -= q.z[k] * xs[i];
            }
        }
        if best.as_ref().map_or(true, |b| phi < b.0) {
            best = Some((phi, alpha.clone(), h));
        }
        let gnorm = g.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
        if gnorm <= T::lit(1e-12) {
            break;
        }
        let step = T::one() / T::lit(t as f64).sqrt();
        for i in 0..eta {
            alpha[i] -= step * g[i];
        }
    }
    let (_, alpha, h) = best.expect("at least one iteration");
    let c: Vec<T> = (0..d)
        .map(|k| if lps[k].is_some() { h[k] + ctx.pieces[k].bias } else { T::zero() })
        .collect();
    let cut = Cut::upper(&alpha, &c, T::zero(), FamilyKind::IdealDualSubgradient, Witness::Dual(alpha.clone())).at(q);
    Ok(emit(cut))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::best_max_d_box;
    use crate::model::{AffineFunc, Interval};

    fn fig() -> NeuronContext<f64> {
        NeuronContext::from_box(
            vec![
                AffineFunc::new(vec![-1.0], 1.0),
                AffineFunc::new(vec![0.0], 0.0),
                AffineFunc::new(vec![1.0], -2.0),
            ],
            Activation::Max,
            &[Interval::new(0.0, 2.0)],
        )
        .unwrap()
    }

    #[test]
    fn separates_a_point_the_sharp_family_misses() {
        let ctx = fig();
        let q = QueryPoint::new(vec![1.25], 0.0, vec![0.0, 0.5, 0.5]);
        // The box family is sharp here and reports no violation.
        assert!(best_max_d_box(&q, &ctx).unwrap().violation <= 1e-12);
        let cut = separate_ideal_dual_subgradient(&q, &ctx, &DualParams::default()).unwrap().unwrap();
        assert!(cut.violation > 1e-3);
    }

    #[test]
    fn graph_points_are_never_separated() {
        let ctx = fig();
        for (x, k) in [(0.5, 0usize), (1.5, 1), (2.0, 2)] {
            let mut z = vec![0.0; 3];
            z[k] = 1.0;
            let q = QueryPoint::new(vec![x], ctx.value(&[x]), z);
            assert!(separate_ideal_dual_subgradient(&q, &ctx, &DualParams::default()).unwrap().is_none());
        }
    }

    #[test]
    fn never_maximal_piece_is_fixed() {
        let ctx = NeuronContext::from_box(
            vec![AffineFunc::new(vec![1.0], 0.0), AffineFunc::new(vec![1.0], -1.0)],
            Activation::Max,
            &[Interval::new(0.0, 1.0)],
        )
        .unwrap();
        let q = QueryPoint::new(vec![0.5], 0.5, vec![0.5, 0.5]);
        let cut = separate_ideal_dual_subgradient(&q, &ctx, &DualParams::default()).unwrap().unwrap();
        assert_eq!(cut.witness, Witness::Fixing(1));
    }
}
