use super::{AffineFunc, Activation, Interval, Layer, Network, Neuron, Region};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Sense};
use crate::scalar::Scalar;

/// Piece `k` is irreducible when its margin exceeds this value.
pub const IRREDUCIBLE_TOL: f64 = 1e-7;

/// `(M⁻, M⁺)` of `f` over a box, in closed form.
pub fn affine_bounds<T: Scalar>(f: &AffineFunc<T>, bx: &[Interval<T>]) -> Result<Interval<T>> {
    if f.dim() != bx.len() {
        return Err(Error::LengthMismatch {
            expected: f.dim(),
            found: bx.len(),
        });
    }
    let mut lo = f.bias;
    let mut hi = f.bias;
    for (&w, iv) in f.weights.iter().zip(bx) {
        let a = w * iv.lo;
        let b = w * iv.hi;
        lo += a.min(b);
        hi += a.max(b);
    }
    Ok(Interval::new(lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBounds<T> {
    /// Range of each affine piece.
    pub pieces: Vec<Interval<T>>,
    pub post: Interval<T>,
}

impl<T: Scalar> NeuronBounds<T> {
    pub fn pre(&self) -> Interval<T> {
        self.pieces[0]
    }
}

/// Interval bounds for every neuron, layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable<T> {
    pub region: Region<T>,
    pub layers: Vec<Vec<NeuronBounds<T>>>,
}

impl<T: Scalar> BoundTable<T> {
    /// Box of the inputs feeding layer `l` (0-based).
    pub fn input_box(&self, l: usize) -> Vec<Interval<T>> {
        if l == 0 {
            self.region.bounds.clone()
        } else {
            self.layers[l - 1].iter().map(|b| b.post).collect()
        }
    }
}

fn post_interval<T: Scalar>(n: &Neuron<T>, pieces: &[Interval<T>]) -> Interval<T> {
    match n.activation {
        Activation::Max => Interval::new(
            pieces.iter().map(|p| p.lo).fold(T::neg_infinity(), T::max),
            pieces.iter().map(|p| p.hi).fold(T::neg_infinity(), T::max),
        ),
        // Every scalar activation is monotone non-decreasing.
        a => Interval::new(a.apply(pieces[0].lo), a.apply(pieces[0].hi)),
    }
}

/// Layer-by-layer interval arithmetic. The first layer sees the exact range
/// over the region (simplex blocks included).
pub fn propagate_bounds<T: Scalar>(net: &Network<T>, region: &Region<T>) -> Result<BoundTable<T>> {
    if region.dim() != net.input_dim {
        return Err(Error::LengthMismatch {
            expected: net.input_dim,
            found: region.dim(),
        });
    }
    let mut layers: Vec<Vec<NeuronBounds<T>>> = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let prev: Option<Vec<Interval<T>>> = (l > 0).then(|| layers[l - 1].iter().map(|b| b.post).collect());
        let mut out = Vec::with_capacity(layer.neurons.len());
        for n in &layer.neurons {
            let pieces = n
                .pieces
                .iter()
                .map(|p| match &prev {
                    None => region.affine_range(p),
                    Some(bx) => affine_bounds(p, bx),
                })
                .collect::<Result<Vec<_>>>()?;
            let post = post_interval(n, &pieces);
            out.push(NeuronBounds { pieces, post });
        }
        layers.push(out);
    }
    Ok(BoundTable {
        region: region.clone(),
        layers,
    })
}

/// For each piece `k`, `Δ* = max {Δ : x ∈ D, Δ <= f^k(x) − f^ℓ(x) ∀ℓ≠k}`.
pub fn irreducibility_margins<T: Scalar>(pieces: &[AffineFunc<T>], region: &Region<T>) -> Result<Vec<T>> {
    if pieces.len() < 2 {
        return Err(Error::Parameter("irreducibility needs at least two pieces".into()));
    }
    let n = region.dim();
    for p in pieces {
        if p.dim() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: p.dim(),
            });
        }
    }
    if pieces.len() == 2 && region.domain.is_box() {
        let diff = pieces[0].sub(&pieces[1]);
        let r = affine_bounds(&diff, &region.bounds)?;
        return Ok(vec![r.hi, -r.lo]);
    }
    let simplices = region.domain.simplex_blocks();
    let mut out = Vec::with_capacity(pieces.len());
    for k in 0..pieces.len() {
        let mut prob = LinearProgram::new(true);
        for b in &region.bounds {
            prob.add_var(b.lo, b.hi, T::zero());
        }
        let delta = prob.add_free_var(T::one());
        for &(s, p) in &simplices {
            prob.add_row((s..s + p).map(|j| (j, T::one())).collect(), Sense::Eq, T::one());
        }
        for (l, other) in pieces.iter().enumerate() {
            if l == k {
                continue;
            }
            // Δ − (w^k − w^ℓ)·x <= b^k − b^ℓ
            let diff = pieces[k].sub(other);
            let mut terms: Vec<(usize, T)> = diff.weights.iter().enumerate().map(|(j, &w)| (j, -w)).collect();
            terms.push((delta, T::one()));
            prob.add_row(terms, Sense::Le, diff.bias);
        }
        let res = lp::solve(&prob)?;
        match res.status {
            lp::LpStatus::Optimal => out.push(res.objective),
            lp::LpStatus::Infeasible => return Err(Error::Domain("region is empty".into())),
            lp::LpStatus::Unbounded => return Err(Error::Lp("irreducibility LP unbounded".into())),
        }
    }
    Ok(out)
}

/// Per-piece irreducibility flags (margin above [`IRREDUCIBLE_TOL`]).
pub fn check_irreducible<T: Scalar>(pieces: &[AffineFunc<T>], region: &Region<T>) -> Result<Vec<bool>> {
    let tol = T::lit(IRREDUCIBLE_TOL);
    Ok(irreducibility_margins(pieces, region)?
        .into_iter()
        .map(|m| m > tol)
        .collect())
}

/// Replaces neurons that act linearly over their propagated bounds.
///
/// ReLU, leaky and clipped neurons are rewritten from their pre-activation
/// interval. Max neurons drop pieces that never strictly win over the
/// neuron's input box, one at a time, and become linear when one piece is
/// left.
pub fn linearize_stable_neurons<T: Scalar>(net: &Network<T>, bounds: &BoundTable<T>) -> Result<Network<T>> {
    let mut layers = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let region = if l == 0 {
            bounds.region.clone()
        } else {
            let bx = bounds.input_box(l);
            Region {
                domain: super::Domain {
                    blocks: bx.iter().map(|&iv| super::Block::Interval(iv)).collect(),
                },
                bounds: bx,
            }
        };
        let mut neurons = Vec::with_capacity(layer.neurons.len());
        for (j, n) in layer.neurons.iter().enumerate() {
            let nb = &bounds.layers[l][j];
            neurons.push(linearize_neuron(n, nb, &region)?);
        }
        layers.push(Layer { neurons });
    }
    Network::new(net.input_dim, net.domain.clone(), layers)
}

fn linearize_neuron<T: Scalar>(n: &Neuron<T>, nb: &NeuronBounds<T>, region: &Region<T>) -> Result<Neuron<T>> {
    let zero = T::zero();
    let f = &n.pieces[0];
    let dim = f.dim();
    let pre = nb.pieces[0];
    let lin = |g: AffineFunc<T>| Neuron::single(g, Activation::Linear);
    let out = match n.activation {
        Activation::Linear => n.clone(),
        Activation::Relu => {
            if pre.lo >= zero {
                lin(f.clone())
            } else if pre.hi <= zero {
                lin(AffineFunc::zero(dim))
            } else {
                n.clone()
            }
        }
        Activation::Leaky { alpha } => {
            if pre.lo >= zero {
                lin(f.clone())
            } else if pre.hi <= zero {
                lin(f.scale(alpha))
            } else {
                n.clone()
            }
        }
        Activation::Clipped { cap } => {
            if pre.hi <= zero {
                lin(AffineFunc::zero(dim))
            } else if pre.lo >= cap {
                lin(AffineFunc::new(vec![zero; dim], cap))
            } else if pre.lo >= zero && pre.hi <= cap {
                lin(f.clone())
            } else {
                n.clone()
            }
        }
        Activation::Max => {
            let mut pieces = n.pieces.clone();
            while pieces.len() > 1 {
                let margins = irreducibility_margins(&pieces, region)?;
                let scale = pieces
                    .iter()
                    .flat_map(|p| p.weights.iter().chain(std::iter::once(&p.bias)))
                    .fold(T::one(), |a, &w| a.max(w.abs()));
                let thresh = T::epsilon() * T::lit(64.0) * scale;
                match margins.iter().position(|&m| m <= thresh) {
                    Some(k) => {
                        pieces.remove(k);
                    }
                    None => break,
                }
            }
            if pieces.len() == 1 {
                lin(pieces.pop().expect("one piece"))
            } else {
                Neuron::new(pieces, Activation::Max)
            }
        }
    };
    Ok(out)
}
