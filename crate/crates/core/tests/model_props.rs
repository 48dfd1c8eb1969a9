mod common;

use common::*;
use proptest::prelude::*;
use pwlv::lp::{solve, LinearProgram, LpStatus, Sense};
use pwlv::model::{
    check_irreducible, linearize_stable_neurons, propagate_bounds, Activation, AffineFunc, Block, Region,
};
use rand::Rng;

fn lp_range(region: &Region<f64>, f: &AffineFunc<f64>) -> (f64, f64) {
    let mut out = [0.0; 2];
    for (i, maximize) in [false, true].into_iter().enumerate() {
        let mut lp = LinearProgram::new(maximize);
        let cols: Vec<usize> = region
            .bounds
            .iter()
            .zip(&f.weights)
            .map(|(iv, &w)| lp.add_var(iv.lo, iv.hi, w))
            .collect();
        let mut at = 0;
        for b in &region.domain.blocks {
            if let Block::Simplex(p) = b {
                lp.add_row((at..at + p).map(|j| (cols[j], 1.0)).collect(), Sense::Eq, 1.0);
            }
            at += b.len();
        }
        lp.offset = f.bias;
        let r = solve(&lp).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        out[i] = r.objective;
    }
    (out[0], out[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn propagated_bounds_contain_every_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r);
        let region = Region::from_domain(&net.domain);
        let table = propagate_bounds(&net, &region).unwrap();
        for _ in 0..50 {
            let x = sample_region(&mut r, &region);
            let trace = net.trace(&x);
            for (l, layer) in net.layers.iter().enumerate() {
                for (j, n) in layer.neurons.iter().enumerate() {
                    let b = &table.layers[l][j];
                    for (p, iv) in n.pieces.iter().zip(&b.pieces) {
                        let v = p.eval(&trace[l]);
                        prop_assert!(iv.contains(v, 1e-9), "piece value {} outside {:?}", v, iv);
                    }
                    prop_assert!(b.post.contains(trace[l + 1][j], 1e-9));
                }
            }
        }
    }

    #[test]
    fn closed_form_range_matches_lp(seed in any::<u64>()) {
        let mut r = rng(seed);
        let region = match r.gen_range(0..3) {
            0 => { let eta = r.gen_range(1..=6); box_region(&mut r, eta) }
            1 => simplex_region(&[r.gen_range(2..=4), r.gen_range(2..=4)], 0),
            _ => simplex_region(&[r.gen_range(2..=4)], r.gen_range(1..=3)),
        };
        let f = random_affine(&mut r, region.dim());
        let iv = region.affine_range(&f).unwrap();
        let (lo, hi) = lp_range(&region, &f);
        prop_assert!((iv.lo - lo).abs() <= 1e-9 && (iv.hi - hi).abs() <= 1e-9,
            "closed form {:?} vs LP [{}, {}]", iv, lo, hi);
    }

    #[test]
    fn linearization_preserves_the_function(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r);
        let region = Region::from_domain(&net.domain);
        let table = propagate_bounds(&net, &region).unwrap();
        let lin = linearize_stable_neurons(&net, &table).unwrap();
        prop_assert!(lin.nonlinear_count() <= net.nonlinear_count());
        for _ in 0..50 {
            let x = sample_region(&mut r, &region);
            for (a, b) in net.forward(&x).iter().zip(lin.forward(&x)) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn irreducibility_agrees_with_a_grid(seed in any::<u64>()) {
        let mut r = rng(seed);
        let eta = r.gen_range(1..=2);
        let region = box_region(&mut r, eta);
        let d = r.gen_range(2..=4);
        let pieces: Vec<AffineFunc<f64>> = (0..d).map(|_| random_affine(&mut r, eta)).collect();
        let flags = check_irreducible(&pieces, &region).unwrap();
        let steps = 60;
        let mut margin = vec![f64::NEG_INFINITY; d];
        let grid = if eta == 1 { steps + 1 } else { (steps + 1) * (steps + 1) };
        for g in 0..grid {
            let idx = [g % (steps + 1), g / (steps + 1)];
            let x: Vec<f64> = (0..eta)
                .map(|i| {
                    let iv = region.bounds[i];
                    iv.lo + (iv.hi - iv.lo) * idx[i] as f64 / steps as f64
                })
                .collect();
            let vals: Vec<f64> = pieces.iter().map(|p| p.eval(&x)).collect();
            for k in 0..d {
                let rest = (0..d).filter(|&t| t != k).map(|t| vals[t]).fold(f64::NEG_INFINITY, f64::max);
                margin[k] = margin[k].max(vals[k] - rest);
            }
        }
        for k in 0..d {
            // A clear grid winner must be irreducible; a piece never reaching the
            // top on the grid or on the box cannot be.
            if margin[k] > 1e-6 {
                prop_assert!(flags[k], "piece {} wins by {} on the grid", k, margin[k]);
            }
            if !flags[k] {
                prop_assert!(margin[k] <= 1e-9);
            }
        }
    }
}

#[test]
fn activations_are_monotone() {
    let acts = [
        Activation::Relu,
        Activation::Leaky { alpha: 0.1 },
        Activation::Clipped { cap: 0.7 },
        Activation::Linear,
    ];
    for a in acts {
        let mut prev = f64::NEG_INFINITY;
        for i in -40..=40 {
            let v = a.apply(i as f64 / 10.0);
            assert!(v >= prev);
            prev = v;
        }
    }
}
