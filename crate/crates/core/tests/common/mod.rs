#![allow(dead_code)]

use pwlv::cuts::QueryPoint;
use pwlv::formulation::{single_neuron_model, CtxBlock, FormulationOptions, MipModel, Mode, NeuronContext};
use pwlv::model::{check_irreducible, Activation, AffineFunc, Block, Domain, Interval, Layer, Network, Neuron, Region};
use pwlv::oracle::{enumerate_family, Family, FAMILY_GUARD};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type R = ChaCha8Rng;

pub fn rng(seed: u64) -> R {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uni(r: &mut R, lo: f64, hi: f64) -> f64 {
    r.gen_range(lo..hi)
}

pub fn normal(r: &mut R) -> f64 {
    // Box-Muller.
    let u: f64 = r.gen_range(1e-12..1.0);
    let v: f64 = r.gen_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Uniform point of the `n`-simplex; with probability `sparse` a random
/// subset of coordinates is zeroed first.
pub fn simplex_point(r: &mut R, n: usize, sparse: f64) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n).map(|_| -(1.0 - r.gen::<f64>()).max(1e-300).ln()).collect();
    if r.gen_bool(sparse) {
        let keep = r.gen_range(0..n);
        for (i, v) in e.iter_mut().enumerate() {
            if i != keep && r.gen_bool(0.5) {
                *v = 0.0;
            }
        }
    }
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn random_box(r: &mut R, eta: usize) -> Vec<Interval<f64>> {
    (0..eta)
        .map(|_| {
            let lo = uni(r, -1.5, 0.0);
            Interval::new(lo, lo + uni(r, 0.5, 2.0))
        })
        .collect()
}

pub fn random_affine(r: &mut R, eta: usize) -> AffineFunc<f64> {
    AffineFunc::new((0..eta).map(|_| uni(r, -1.0, 1.0)).collect(), uni(r, -0.5, 0.5))
}

/// Affine function vanishing at `c`.
pub fn through(r: &mut R, c: &[f64]) -> AffineFunc<f64> {
    let w: Vec<f64> = c.iter().map(|_| uni(r, -1.0, 1.0)).collect();
    let b = -w.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
    AffineFunc::new(w, b)
}

pub fn sample_region(r: &mut R, region: &Region<f64>) -> Vec<f64> {
    let mut x = Vec::with_capacity(region.dim());
    for b in &region.domain.blocks {
        match b {
            Block::Interval(_) => {
                let iv = region.bounds[x.len()];
                x.push(uni(r, 0.0, 1.0) * (iv.hi - iv.lo) + iv.lo);
            }
            Block::Simplex(p) => x.extend(simplex_point(r, *p, 0.2)),
        }
    }
    x
}

pub fn sample_ctx(r: &mut R, ctx: &NeuronContext<f64>) -> Vec<f64> {
    let mut x = vec![0.0; ctx.eta()];
    for b in &ctx.blocks {
        match *b {
            CtxBlock::Interval(i) => x[i] = uni(r, 0.0, 1.0) * (ctx.hi[i] - ctx.lo[i]) + ctx.lo[i],
            CtxBlock::Simplex { start, len } => {
                for (k, v) in simplex_point(r, len, 0.2).into_iter().enumerate() {
                    x[start + k] = v;
                }
            }
        }
    }
    x
}

/// Unstable single-piece neuron over a random box.
pub fn box_neuron(r: &mut R, act: Activation<f64>, eta: usize) -> NeuronContext<f64> {
    let bx = random_box(r, eta);
    let c: Vec<f64> = bx.iter().map(|iv| uni(r, 0.2, 0.8) * (iv.hi - iv.lo) + iv.lo).collect();
    let f = through(r, &c);
    NeuronContext::from_box(vec![f], act, &bx).unwrap()
}

pub fn clipped_box_neuron(r: &mut R, eta: usize) -> NeuronContext<f64> {
    loop {
        let ctx = box_neuron(r, Activation::Relu, eta);
        let hi = ctx.ranges[0].hi;
        if hi <= 1e-3 {
            continue;
        }
        let cap = uni(r, 0.2, 0.8) * hi;
        return NeuronContext::from_box(ctx.pieces.clone(), Activation::Clipped { cap }, &ctx_box(&ctx)).unwrap();
    }
}

pub fn ctx_box(ctx: &NeuronContext<f64>) -> Vec<Interval<f64>> {
    ctx.lo.iter().zip(&ctx.hi).map(|(&a, &b)| Interval::new(a, b)).collect()
}

/// Max-of-d neuron whose pieces are all irreducible on the region.
pub fn max_neuron(r: &mut R, region: &Region<f64>, d: usize) -> NeuronContext<f64> {
    loop {
        let pieces: Vec<_> = (0..d).map(|_| random_affine(r, region.dim())).collect();
        if check_irreducible(&pieces, region).unwrap().iter().all(|&b| b) {
            return NeuronContext::from_region(pieces, Activation::Max, region).unwrap();
        }
    }
}

pub fn box_region(r: &mut R, eta: usize) -> Region<f64> {
    let bx = random_box(r, eta);
    let d = Domain::new(bx.iter().map(|&iv| Block::Interval(iv)).collect()).unwrap();
    Region::from_domain(&d)
}

pub fn simplex_region(ps: &[usize], intervals: usize) -> Region<f64> {
    let mut blocks: Vec<Block<f64>> = ps.iter().map(|&p| Block::Simplex(p)).collect();
    blocks.extend((0..intervals).map(|k| Block::Interval(Interval::new(-1.0 + 0.25 * k as f64, 1.0))));
    Region::from_domain(&Domain::new(blocks).unwrap())
}

/// ReLU neuron over a region, unstable through a sampled interior point.
pub fn relu_region_neuron(r: &mut R, region: &Region<f64>) -> NeuronContext<f64> {
    loop {
        let c = sample_region(r, region);
        let f = through(r, &c);
        let range = region.affine_range(&f).unwrap();
        if range.lo < -1e-3 && range.hi > 1e-3 {
            return NeuronContext::from_region(vec![f], Activation::Relu, region).unwrap();
        }
    }
}

pub fn random_query(r: &mut R, ctx: &NeuronContext<f64>) -> QueryPoint<f64> {
    let x = sample_ctx(r, ctx);
    let nz = ctx.nz();
    let z = if nz == 1 {
        let v = uni(r, 0.0, 1.0);
        vec![if r.gen_bool(0.1) { v.round() } else { v }]
    } else {
        simplex_point(r, nz, 0.2)
    };
    let out = ctx.output_range();
    let y = uni(r, out.lo - 0.5, out.hi + 0.5);
    QueryPoint::new(x, y, z)
}

/// Single-neuron big-M model plus every member of `family`.
pub fn enumerated_model(ctx: &NeuronContext<f64>, family: Family) -> MipModel<f64> {
    let mut m = single_neuron_model(ctx, &FormulationOptions::with_mode(Mode::BigM)).unwrap();
    let bind = m.neurons[0].bind.clone();
    for (i, c) in enumerate_family(ctx, family, FAMILY_GUARD).unwrap().iter().enumerate() {
        m.constraints.push(c.to_constraint(&bind, format!("member_{i}")));
    }
    m
}

pub fn random_activation(r: &mut R) -> Activation<f64> {
    match r.gen_range(0..5) {
        0 | 1 => Activation::Relu,
        2 => Activation::Leaky {
            alpha: uni(r, 0.05, 0.5),
        },
        3 => Activation::Clipped { cap: uni(r, 0.2, 1.0) },
        _ => Activation::Max,
    }
}

/// Small network with mixed activations over a box or simplex domain.
pub fn random_network(r: &mut R) -> Network<f64> {
    let domain = match r.gen_range(0..4) {
        0 => Domain::simplices(&[3]).unwrap(),
        1 => Domain::new(vec![Block::Simplex(2), Block::Interval(Interval::new(-1.0, 1.0))]).unwrap(),
        _ => {
            let n = r.gen_range(2..=3);
            let bx: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let lo = uni(r, -1.0, 0.0);
                    (lo, lo + uni(r, 0.5, 1.5))
                })
                .collect();
            Domain::boxed(&bx).unwrap()
        }
    };
    let mut width = domain.dim();
    let hidden = r.gen_range(1..=2);
    let mut layers = Vec::new();
    for _ in 0..hidden {
        let n = r.gen_range(1..=3);
        let neurons = (0..n)
            .map(|_| {
                let act = random_activation(r);
                let d = if act == Activation::Max { r.gen_range(2..=3) } else { 1 };
                let pieces = (0..d).map(|_| random_affine(r, width)).collect();
                Neuron::new(pieces, act)
            })
            .collect();
        layers.push(Layer { neurons });
        width = n;
    }
    let outputs = (0..2)
        .map(|_| Neuron::single(random_affine(r, width), Activation::Linear))
        .collect();
    layers.push(Layer { neurons: outputs });
    Network::new(domain.dim(), domain, layers).unwrap()
}

/// Dense ReLU network over a box for verification runs.
pub fn dense_relu_network(r: &mut R, input: usize, hidden: &[usize], outputs: usize) -> Network<f64> {
    let domain = Domain::boxed(&vec![(-1.0, 1.0); input]).unwrap();
    let mut w = input;
    let mut layers = Vec::new();
    for (k, &n) in hidden.iter().chain([outputs].iter()).enumerate() {
        let act = if k < hidden.len() { Activation::Relu } else { Activation::Linear };
        let neurons = (0..n)
            .map(|_| {
                let f = AffineFunc::new(
                    (0..w).map(|_| normal(r) / (w as f64).sqrt()).collect(),
                    0.1 * normal(r),
                );
                Neuron::single(f, act)
            })
            .collect();
        layers.push(Layer { neurons });
        w = n;
    }
    Network::new(input, domain, layers).unwrap()
}
