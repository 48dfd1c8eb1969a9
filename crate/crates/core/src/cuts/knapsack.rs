use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::better;

const NORM_TOL: f64 = 1e-9;

fn check_simplex<T: Scalar>(v: &[T], what: &str) -> Result<()> {
    let tol = T::lit(NORM_TOL);
    let sum: T = v.iter().copied().sum();
    if v.is_empty() || (sum - T::one()).abs() > tol || v.iter().any(|&a| a < -tol || !a.is_finite()) {
        return Err(Error::Parameter(format!("{what} is not normalized")));
    }
    Ok(())
}

fn ascending<T: Scalar>(key: &[T]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..key.len()).collect();
    o.sort_by(|&a, &b| key[a].partial_cmp(&key[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    o
}

/// Smallest value of `w̃_J z₁ + Σ_{pos>J}(w̃_pos − w̃_J)x_pos` over sorted
/// positions `J`; returns `(value, J)`, smallest `J` on ties.
pub(crate) fn d2_block_min<T: Scalar>(order: &[usize], wt: impl Fn(usize) -> T, x: impl Fn(usize) -> T, z1: T) -> (T, usize) {
    let p = order.len();
    let mut vals = vec![T::zero(); p];
    let mut s = T::zero();
    let mut t = T::zero();
    for pos in (0..p).rev() {
        let w = wt(order[pos]);
        vals[pos] = w * z1 + t - w * s;
        s += x(order[pos]);
        t += w * x(order[pos]);
    }
    let mut best = 0;
    for pos in 1..p {
        if better(vals[pos], vals[best]) {
            best = pos;
        }
    }
    (vals[best], best)
}

/// Closed form of the transport value for two pieces over one simplex:
/// `min_J w̃_J z₁ + Σ_{j>J}(w̃_j − w̃_J)x_j + Σ_j w²_j x_j` with `w̃ = w¹ − w²`
/// sorted ascending. Returns the value and the input index of the minimizing
/// `J`.
pub fn knapsack_transport_d2<T: Scalar>(x: &[T], z: &[T], w1: &[T], w2: &[T]) -> Result<(T, usize)> {
    check_simplex(x, "x")?;
    check_simplex(z, "z")?;
    if z.len() != 2 || w1.len() != x.len() || w2.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: w1.len().min(w2.len()),
        });
    }
    let wt: Vec<T> = w1.iter().zip(w2).map(|(&a, &b)| a - b).collect();
    let order = ascending(&wt);
    let (v, pos) = d2_block_min(&order, |j| wt[j], |j| x[j], z[0]);
    let base: T = w2.iter().zip(x).map(|(&w, &v)| w * v).sum();
    Ok((v + base, order[pos]))
}

/// Value of option `pos` for one two-coordinate simplex, pieces sorted by
/// `w̃^k = w^k₁ − w^k₂` in `order`.
pub(crate) fn p2_values<T: Scalar>(order: &[usize], w: impl Fn(usize) -> (T, T), x1: T, z: &[T]) -> Vec<T> {
    let d = order.len();
    // prefix of w₂ z over positions <= pos, suffix of w₁ z and z over > pos.
    let mut vals = vec![T::zero(); d];
    let mut suf_w1 = vec![T::zero(); d + 1];
    let mut suf_z = vec![T::zero(); d + 1];
    for pos in (0..d).rev() {
        let k = order[pos];
        suf_w1[pos] = suf_w1[pos + 1] + w(k).0 * z[k];
        suf_z[pos] = suf_z[pos + 1] + z[k];
    }
    let mut pre_w2 = T::zero();
    for pos in 0..d {
        let k = order[pos];
        let (a, b) = w(k);
        let wt = a - b;
        pre_w2 += b * z[k];
        vals[pos] = wt * x1 + pre_w2 + suf_w1[pos + 1] - wt * suf_z[pos + 1];
    }
    vals
}

/// Closed form of the transport value for a two-coordinate simplex and `d`
/// pieces: `min_K w̃^K x₁ + Σ_{k<=K} w^k₂ z_k + Σ_{k>K}(w^k₁ − w̃^K) z_k`.
/// Returns the value and the piece index of the minimizing `K`.
pub fn knapsack_transport_p2<T: Scalar>(x: &[T], z: &[T], pieces: &[[T; 2]]) -> Result<(T, usize)> {
    check_simplex(x, "x")?;
    check_simplex(z, "z")?;
    if x.len() != 2 || pieces.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            found: pieces.len(),
        });
    }
    let wt: Vec<T> = pieces.iter().map(|p| p[0] - p[1]).collect();
    let order = ascending(&wt);
    let vals = p2_values(&order, |k| (pieces[k][0], pieces[k][1]), x[0], z);
    let mut best = 0;
    for pos in 1..vals.len() {
        if better(vals[pos], vals[best]) {
            best = pos;
        }
    }
    Ok((vals[best], order[best]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_route() {
        let (v, j) = knapsack_transport_d2(&[1.0f64], &[0.3, 0.7], &[5.0], &[2.0]).unwrap();
        assert!((v - 2.9).abs() < 1e-12);
        assert_eq!(j, 0);
    }

    #[test]
    fn all_mass_to_first_piece() {
        let (v, j) = knapsack_transport_d2(&[0.5f64, 0.5], &[1.0, 0.0], &[1.0, 3.0], &[0.0, 0.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert_eq!(j, 0);
    }

    #[test]
    fn vertex_z_gives_piece_value() {
        let pieces = [[1.0f64, -2.0], [0.5, 3.0], [-1.0, 0.0]];
        let x = [0.3, 0.7];
        for k in 0..3 {
            let mut z = [0.0; 3];
            z[k] = 1.0;
            let (v, _) = knapsack_transport_p2(&x, &z, &pieces).unwrap();
            assert!((v - (pieces[k][0] * x[0] + pieces[k][1] * x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized_marginals() {
        assert!(knapsack_transport_d2(&[0.5, 0.6], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 0.0]).is_err());
        assert!(knapsack_transport_p2(&[0.5, 0.5], &[0.5, 0.0], &[[1.0, 0.0], [0.0, 1.0]]).is_err());
    }
}
