//! Networks, input domains and verification instances.

mod bounds;
mod io;

pub use bounds::{
    affine_bounds, check_irreducible, irreducibility_margins, linearize_stable_neurons,
    propagate_bounds, BoundTable, NeuronBounds, IRREDUCIBLE_TOL,
};
pub use io::{load_instance, load_network, InstanceFile, NetworkFile};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `lo <= hi`, both finite unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: T) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: T, tol: T) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }
}

/// `w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFunc<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> AffineFunc<T> {
    pub fn new(weights: Vec<T>, bias: T) -> Self {
        Self { weights, bias }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            weights: vec![T::zero(); n],
            bias: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.weights.len());
        self.weights
            .iter()
            .zip(x)
            .fold(self.bias, |acc, (&w, &v)| acc + w * v)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            weights: self.weights.iter().map(|&w| w * s).collect(),
            bias: self.bias * s,
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(&a, &b)| a - b)
                .collect(),
            bias: self.bias - other.bias,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation<T> {
    Linear,
    Relu,
    Leaky { alpha: T },
    Clipped { cap: T },
    /// Maximum over the neuron's pieces.
    Max,
}

impl<T: Scalar> Activation<T> {
    /// Applies a scalar activation. `Max` is the identity here; callers take
    /// the maximum over pieces first.
    pub fn apply(&self, v: T) -> T {
        match *self {
            Activation::Linear | Activation::Max => v,
            Activation::Relu => v.max(T::zero()),
            Activation::Leaky { alpha } => v.max(alpha * v),
            Activation::Clipped { cap } => v.max(T::zero()).min(cap),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Leaky { .. } => "leaky",
            Activation::Clipped { .. } => "clipped",
            Activation::Max => "max",
        }
    }
}

/// One output unit: a single affine piece for scalar activations, `d >= 2`
/// pieces for `Max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neuron<T> {
    pub pieces: Vec<AffineFunc<T>>,
    pub activation: Activation<T>,
}

impl<T: Scalar> Neuron<T> {
    pub fn new(pieces: Vec<AffineFunc<T>>, activation: Activation<T>) -> Self {
        Self { pieces, activation }
    }

    pub fn single(f: AffineFunc<T>, activation: Activation<T>) -> Self {
        Self {
            pieces: vec![f],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.pieces[0].dim()
    }

    /// Pre-activation value of the first piece (the only one unless `Max`).
    pub fn pre(&self, x: &[T]) -> T {
        self.pieces[0].eval(x)
    }

    pub fn eval(&self, x: &[T]) -> T {
        match self.activation {
            Activation::Max => self
                .pieces
                .iter()
                .map(|p| p.eval(x))
                .fold(T::neg_infinity(), T::max),
            a => a.apply(self.pieces[0].eval(x)),
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        !matches!(self.activation, Activation::Linear)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub neurons: Vec<Neuron<T>>,
}

impl<T: Scalar> Layer<T> {
    pub fn input_dim(&self) -> usize {
        self.neurons.first().map_or(0, |n| n.input_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.neurons.len()
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        self.neurons.iter().map(|n| n.eval(x)).collect()
    }
}

/// A block of consecutive input coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block<T> {
    Interval(Interval<T>),
    /// `p` coordinates in `[0,1]` summing to one.
    Simplex(usize),
}

impl<T> Block<T> {
    pub fn len(&self) -> usize {
        match self {
            Block::Interval(_) => 1,
            Block::Simplex(p) => *p,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Product of interval and simplex blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    pub blocks: Vec<Block<T>>,
}

impl<T: Scalar> Domain<T> {
    pub fn new(blocks: Vec<Block<T>>) -> Result<Self> {
        let d = Self { blocks };
        d.validate()?;
        Ok(d)
    }

    pub fn boxed(bounds: &[(T, T)]) -> Result<Self> {
        Self::new(
            bounds
                .iter()
                .map(|&(lo, hi)| Block::Interval(Interval::new(lo, hi)))
                .collect(),
        )
    }

    pub fn simplices(ps: &[usize]) -> Result<Self> {
        Self::new(ps.iter().map(|&p| Block::Simplex(p)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.blocks.iter().enumerate() {
            match b {
                Block::Interval(iv) => {
                    if !iv.lo.is_finite() || !iv.hi.is_finite() {
                        return Err(Error::Domain(format!("block {i}: interval bounds must be finite")));
                    }
                    if iv.lo > iv.hi {
                        return Err(Error::Domain(format!("block {i}: lower bound exceeds upper bound")));
                    }
                }
                Block::Simplex(p) => {
                    if *p < 2 {
                        return Err(Error::Domain(format!("block {i}: simplex needs p >= 2")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn is_box(&self) -> bool {
        self.blocks.iter().all(|b| matches!(b, Block::Interval(_)))
    }

    /// `(start, p)` for each simplex block.
    pub fn simplex_blocks(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        for b in &self.blocks {
            if let Block::Simplex(p) = b {
                out.push((at, *p));
            }
            at += b.len();
        }
        out
    }

    /// Per-coordinate bounds; simplex coordinates get `[0,1]`.
    pub fn coordinate_bounds(&self) -> Vec<Interval<T>> {
        let mut out = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            match b {
                Block::Interval(iv) => out.push(*iv),
                Block::Simplex(p) => {
                    out.extend(std::iter::repeat(Interval::new(T::zero(), T::one())).take(*p))
                }
            }
        }
        out
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        Region::from_domain(self).contains(x, tol)
    }

    /// Draws a point using a caller-supplied uniform `[0,1)` source. Simplex
    /// blocks are sampled uniformly via normalized exponentials.
    pub fn sample_with(&self, mut uniform: impl FnMut() -> T) -> Vec<T> {
        let mut x = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            match b {
                Block::Interval(iv) => x.push(iv.lo + (iv.hi - iv.lo) * uniform()),
                Block::Simplex(p) => {
                    let e: Vec<T> = (0..*p)
                        .map(|_| -(T::one() - uniform()).max(T::min_positive_value()).ln())
                        .collect();
                    let s: T = e.iter().copied().sum();
                    x.extend(e.into_iter().map(|v| v / s));
                }
            }
        }
        x
    }
}

/// A domain together with per-coordinate bounds that may be tighter than the
/// domain's own (the verification ball intersected with the domain).
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T> {
    pub domain: Domain<T>,
    pub bounds: Vec<Interval<T>>,
}

impl<T: Scalar> Region<T> {
    pub fn from_domain(domain: &Domain<T>) -> Self {
        Self {
            bounds: domain.coordinate_bounds(),
            domain: domain.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        if !x.iter().zip(&self.bounds).all(|(&v, b)| b.contains(v, tol)) {
            return false;
        }
        self.domain.simplex_blocks().iter().all(|&(s, p)| {
            let sum: T = x[s..s + p].iter().copied().sum();
            (sum - T::one()).abs() <= tol * T::lit(p as f64)
        })
    }

    /// Exact range of `f` over the region. Interval coordinates use the
    /// closed form; each simplex block is a fractional knapsack.
    pub fn affine_range(&self, f: &AffineFunc<T>) -> Result<Interval<T>> {
        if f.dim() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: f.dim(),
            });
        }
        let mut lo = f.bias;
        let mut hi = f.bias;
        let mut at = 0;
        for b in &self.domain.blocks {
            match b {
                Block::Interval(_) => {
                    let w = f.weights[at];
                    let iv = self.bounds[at];
                    lo += (w * iv.lo).min(w * iv.hi);
                    hi += (w * iv.lo).max(w * iv.hi);
                }
                Block::Simplex(p) => {
                    let w = &f.weights[at..at + p];
                    let bd = &self.bounds[at..at + p];
                    hi += bounded_simplex_max(w, bd)?;
                    let neg: Vec<T> = w.iter().map(|&v| -v).collect();
                    lo -= bounded_simplex_max(&neg, bd)?;
                }
            }
            at += b.len();
        }
        Ok(Interval::new(lo, hi))
    }
}

/// `max w·x` over `{x : Σx = 1, lo <= x <= hi}` by greedy filling.
fn bounded_simplex_max<T: Scalar>(w: &[T], bounds: &[Interval<T>]) -> Result<T> {
    let base: T = bounds.iter().map(|b| b.lo).sum();
    let cap: T = bounds.iter().map(|b| b.hi).sum();
    let tol = T::tolerances().feasibility;
    if base > T::one() + tol || cap < T::one() - tol {
        return Err(Error::Domain("restricted simplex block is empty".into()));
    }
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut value = bounds.iter().zip(w).fold(T::zero(), |acc, (b, &wi)| acc + wi * b.lo);
    let mut left = (T::one() - base).max(T::zero());
    for j in order {
        if left <= T::zero() {
            break;
        }
        let take = (bounds[j].hi - bounds[j].lo).min(left);
        value += w[j] * take;
        left -= take;
    }
    Ok(value)
}

/// A feed-forward network over a declared input domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub input_dim: usize,
    pub domain: Domain<T>,
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    /// Validates shapes, finiteness and activation parameters.
    pub fn new(input_dim: usize, domain: Domain<T>, layers: Vec<Layer<T>>) -> Result<Self> {
        let net = Self {
            input_dim,
            domain,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        self.domain.validate()?;
        if self.domain.dim() != self.input_dim {
            return Err(Error::Domain(format!(
                "domain has {} coordinates but input_dim is {}",
                self.domain.dim(),
                self.input_dim
            )));
        }
        let mut width = self.input_dim;
        for (l, layer) in self.layers.iter().enumerate() {
            let layer_no = l + 1;
            if layer.neurons.is_empty() {
                return Err(Error::Schema(format!("layer {layer_no} has no neurons")));
            }
            for (j, n) in layer.neurons.iter().enumerate() {
                if n.pieces.is_empty() {
                    return Err(Error::Activation {
                        layer: layer_no,
                        neuron: j,
                        reason: "no affine pieces".into(),
                    });
                }
                for p in &n.pieces {
                    if p.dim() != width {
                        return Err(Error::DimensionMismatch {
                            layer: layer_no,
                            expected: width,
                            found: p.dim(),
                        });
                    }
                    if !p.is_finite() {
                        return Err(Error::NonFinite {
                            layer: layer_no,
                            neuron: j,
                        });
                    }
                }
                let reason = match n.activation {
                    Activation::Leaky { alpha } if !(alpha > T::zero() && alpha < T::one()) => {
                        Some("leaky alpha must lie strictly inside (0,1)".to_string())
                    }
                    Activation::Clipped { cap } if !(cap > T::zero() && cap.is_finite()) => {
                        Some("clipped cap must be positive".to_string())
                    }
                    Activation::Max if n.pieces.len() < 2 => {
                        Some("max neurons need at least two pieces".to_string())
                    }
                    Activation::Max => None,
                    _ if n.pieces.len() != 1 => {
                        Some("scalar activations take exactly one piece".to_string())
                    }
                    _ => None,
                };
                if let Some(reason) = reason {
                    return Err(Error::Activation {
                        layer: layer_no,
                        neuron: j,
                        reason,
                    });
                }
            }
            width = layer.output_dim();
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_dim())
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer.eval(&v);
        }
        v
    }

    /// Post-activation values of every layer, input first.
    pub fn trace(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut out = vec![x.to_vec()];
        for layer in &self.layers {
            let next = layer.eval(out.last().expect("non-empty"));
            out.push(next);
        }
        out
    }

    pub fn nonlinear_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.neurons)
            .filter(|n| n.is_nonlinear())
            .count()
    }

    /// Builds a network from dense layers sharing one activation per layer.
    pub fn dense(
        domain: Domain<T>,
        layers: Vec<(Vec<Vec<T>>, Vec<T>, Activation<T>)>,
    ) -> Result<Self> {
        let input_dim = domain.dim();
        let layers = layers
            .into_iter()
            .map(|(w, b, act)| Layer {
                neurons: w
                    .into_iter()
                    .zip(b)
                    .map(|(row, bias)| Neuron::single(AffineFunc::new(row, bias), act))
                    .collect(),
            })
            .collect();
        Self::new(input_dim, domain, layers)
    }
}

/// Maximize `f_target − f_source` over the ∞-ball around `center`
/// intersected with the network's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationInstance<T> {
    pub id: Option<String>,
    pub center: Vec<T>,
    pub epsilon: T,
    /// `None` maximizes the target output alone.
    pub source_label: Option<usize>,
    pub target_label: usize,
}

impl<T: Scalar> VerificationInstance<T> {
    pub fn validate(&self, net: &Network<T>) -> Result<()> {
        if self.center.len() != net.input_dim {
            return Err(Error::Instance(format!(
                "center has length {} but the network takes {} inputs",
                self.center.len(),
                net.input_dim
            )));
        }
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::Instance("epsilon must be finite and non-negative".into()));
        }
        if self.center.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instance("center must be finite".into()));
        }
        let out = net.output_dim();
        if self.target_label >= out {
            return Err(Error::Instance(format!(
                "target label {} out of range for {} outputs",
                self.target_label, out
            )));
        }
        if let Some(s) = self.source_label {
            if s >= out {
                return Err(Error::Instance(format!(
                    "source label {s} out of range for {out} outputs"
                )));
            }
            if s == self.target_label {
                return Err(Error::Instance("source and target labels must differ".into()));
            }
        }
        if !net.domain.contains(&self.center, T::lit(1e-9)) {
            return Err(Error::Instance("center lies outside the declared domain".into()));
        }
        Ok(())
    }

    /// The ball intersected with the domain.
    pub fn region(&self, net: &Network<T>) -> Result<Region<T>> {
        self.validate(net)?;
        let mut region = Region::from_domain(&net.domain);
        for (b, &c) in region.bounds.iter_mut().zip(&self.center) {
            let ball = Interval::new(c - self.epsilon, c + self.epsilon);
            *b = b
                .intersect(&ball)
                .ok_or_else(|| Error::Instance("ball does not meet the domain".into()))?;
        }
        Ok(region)
    }

    /// Objective value at the network outputs.
    pub fn objective(&self, outputs: &[T]) -> T {
        let t = outputs[self.target_label];
        match self.source_label {
            Some(s) => t - outputs[s],
            None => t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_pass_of_each_activation() {
        let f = AffineFunc::<f64>::new(vec![1.0], -0.5);
        assert_eq!(Neuron::single(f.clone(), Activation::Relu).eval(&[0.2]), 0.0);
        assert_eq!(Neuron::single(f.clone(), Activation::Relu).eval(&[2.0]), 1.5);
        let leaky = Neuron::single(f.clone(), Activation::Leaky { alpha: 0.1 });
        assert!((leaky.eval(&[0.0]) + 0.05).abs() < 1e-15);
        let clip = Neuron::single(f, Activation::Clipped { cap: 1.0 });
        assert_eq!(clip.eval(&[3.0]), 1.0);
        let mx = Neuron::new(
            vec![AffineFunc::new(vec![1.0], 0.0), AffineFunc::new(vec![-1.0], 0.0)],
            Activation::Max,
        );
        assert_eq!(mx.eval(&[-2.0]), 2.0);
    }

    #[test]
    fn simplex_range_is_a_knapsack() {
        let dom = Domain::<f64>::simplices(&[3]).unwrap();
        let mut region = Region::from_domain(&dom);
        let f = AffineFunc::new(vec![1.0, 2.0, 5.0], 0.0);
        assert_eq!(region.affine_range(&f).unwrap(), Interval::new(1.0, 5.0));
        region.bounds[2] = Interval::new(0.0, 0.25);
        let r = region.affine_range(&f).unwrap();
        assert!((r.hi - (0.25 * 5.0 + 0.75 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn instance_region_clips_ball() {
        let dom = Domain::boxed(&[(0.0, 1.0)]).unwrap();
        let net = Network::dense(dom, vec![(vec![vec![1.0]], vec![0.0], Activation::Relu)]).unwrap();
        let inst = VerificationInstance {
            id: None,
            center: vec![0.9],
            epsilon: 0.5,
            source_label: None,
            target_label: 0,
        };
        let r = inst.region(&net).unwrap();
        assert_eq!(r.bounds[0], Interval::new(0.4, 1.0));
    }

    #[test]
    fn invalid_activation_parameters_are_rejected() {
        let dom = Domain::boxed(&[(0.0, 1.0)]).unwrap();
        let bad = Network::dense(
            dom,
            vec![(vec![vec![1.0]], vec![0.0], Activation::Leaky { alpha: 1.5 })],
        );
        assert!(matches!(bad, Err(Error::Activation { layer: 1, neuron: 0, .. })));
    }
}
