mod common;

use common::*;
use proptest::prelude::*;
use pwlv::bnc::{solve_mip, MipStatus, SolveParams};
use pwlv::formulation::{
    assemble_with_objective, single_neuron_model, BoundMethod, CoeffMode, FormulationOptions, MipModel, Mode,
    NeuronContext,
};
use pwlv::lp::{solve, LpStatus};
use pwlv::model::{Activation, AffineFunc, Interval, Region};
use pwlv::oracle::{graph_pieces, support_function_maxgraph, Family, SupportQuery};
use rand::Rng;

const MODES: [Mode; 3] = [Mode::BigM, Mode::Extended, Mode::BigMWithCuts];

fn lp_max(m: &MipModel<f64>) -> f64 {
    let r = solve(&m.lp_relaxation()).unwrap();
    assert_eq!(r.status, LpStatus::Optimal);
    r.objective
}

fn xy_objective(m: &mut MipModel<f64>, cx: &[f64], cy: f64) {
    let bind = m.neurons[0].bind.clone();
    let mut terms: Vec<(usize, f64)> = bind.x.iter().zip(cx).map(|(&v, &c)| (v, c)).collect();
    terms.push((bind.y, cy));
    m.set_objective(true, terms, 0.0);
}

fn box_ctx(r: &mut R) -> NeuronContext<f64> {
    let eta = r.gen_range(1..=4);
    match r.gen_range(0..4) {
        0 => box_neuron(r, Activation::Relu, eta),
        1 => {
            let alpha = uni(r, 0.05, 0.9);
            box_neuron(r, Activation::Leaky { alpha }, eta)
        }
        2 => clipped_box_neuron(r, eta),
        _ => {
            let reg = box_region(r, eta);
            let d = r.gen_range(2..=3);
            max_neuron(r, &reg, d)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// With the inputs pinned, every formulation has exactly one value for
    /// the outputs: the network's.
    #[test]
    fn pinned_inputs_reproduce_the_forward_pass(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r);
        let region = Region::from_domain(&net.domain);
        let c: Vec<f64> = (0..net.output_dim()).map(|_| normal(&mut r)).collect();
        let x = sample_region(&mut r, &region);
        let want: f64 = net.forward(&x).iter().zip(&c).map(|(a, b)| a * b).sum();
        for mode in MODES {
            for coeff in [CoeffMode::Box, CoeffMode::Tjeng] {
                for bounds in [BoundMethod::Interval, BoundMethod::Lp] {
                    let opts = FormulationOptions { mode, coeff, bounds, linearize: r.gen_bool(0.5) };
                    let mut m = assemble_with_objective(&net, &region, &c, &opts).unwrap();
                    for (&v, &xi) in m.inputs.clone().iter().zip(&x) {
                        m.vars[v].lo = xi;
                        m.vars[v].hi = xi;
                    }
                    for maximize in [true, false] {
                        let mut mm = m.clone();
                        mm.objective.maximize = maximize;
                        let res = solve_mip(&mm, &SolveParams::default()).unwrap();
                        prop_assert_eq!(res.status, MipStatus::Optimal, "{} {:?}", mode.name(), coeff);
                        let v = res.incumbent.unwrap();
                        prop_assert!((v - want).abs() <= 1e-6 * (1.0 + want.abs()),
                            "{} {:?} {:?}: {} vs forward {}", mode.name(), coeff, bounds, v, want);
                    }
                }
            }
        }
    }

    #[test]
    fn extended_relaxation_is_the_convex_hull(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ctx = box_ctx(&mut r);
        let base = single_neuron_model(&ctx, &FormulationOptions::with_mode(Mode::Extended)).unwrap();
        for _ in 0..20 {
            let cx: Vec<f64> = (0..ctx.eta()).map(|_| normal(&mut r)).collect();
            let cy = normal(&mut r);
            let mut m = base.clone();
            xy_objective(&mut m, &cx, cy);
            let sup = support_function_maxgraph(&ctx, &SupportQuery { cx, cy, cz: None }, None).unwrap();
            let lp = lp_max(&m);
            prop_assert!((lp - sup).abs() <= 1e-7, "{:?}: LP {} vs hull {}", ctx.activation, lp, sup);
        }
    }

    #[test]
    fn relaxations_are_nested(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ctx, family) = match r.gen_range(0..3) {
            0 => { let eta = r.gen_range(1..=4); (box_neuron(&mut r, Activation::Relu, eta), Family::ReluIdeal) }
            1 => { let eta = r.gen_range(1..=3); let reg = box_region(&mut r, eta); (max_neuron(&mut r, &reg, 3), Family::MaxDBox) }
            _ => { let eta = r.gen_range(1..=4); (box_neuron(&mut r, Activation::Leaky { alpha: 0.2 }, eta), Family::Leaky) }
        };
        let big = single_neuron_model(&ctx, &FormulationOptions::with_mode(Mode::BigM)).unwrap();
        let full = enumerated_model(&ctx, family);
        let tjeng = single_neuron_model(&ctx, &FormulationOptions { coeff: CoeffMode::Tjeng, ..Default::default() }).unwrap();
        for _ in 0..20 {
            let cx: Vec<f64> = (0..ctx.eta()).map(|_| normal(&mut r)).collect();
            let cy = normal(&mut r);
            let mut vals = Vec::new();
            for m in [&tjeng, &big, &full] {
                let mut m = m.clone();
                xy_objective(&mut m, &cx, cy);
                vals.push(lp_max(&m));
            }
            let sup = support_function_maxgraph(&ctx, &SupportQuery { cx, cy, cz: None }, None).unwrap();
            prop_assert!(vals[0] >= vals[1] - 1e-7 && vals[1] >= vals[2] - 1e-7 && vals[2] >= sup - 1e-7,
                "tjeng {} big-M {} full {} hull {}", vals[0], vals[1], vals[2], sup);
        }
    }
}

/// Fixing one of three binaries to zero does not cut away the region where
/// that piece is the maximum: the lower row `y >= f^k` survives.
#[test]
fn zeroed_piece_keeps_its_region_in_the_relaxation() {
    let pieces = vec![
        AffineFunc::new(vec![-1.0], 1.0),
        AffineFunc::new(vec![0.0], 0.0),
        AffineFunc::new(vec![1.0], -2.0),
    ];
    let ctx = NeuronContext::from_box(pieces, Activation::Max, &[Interval::new(0.0, 3.0)]).unwrap();
    let mut m = enumerated_model(&ctx, Family::MaxDBox);
    let bind = m.neurons[0].bind.clone();
    m.vars[bind.z[0]].hi = 0.0;
    m.set_objective(true, vec![(bind.x[0], -1.0)], 0.0);
    let lp = lp_max(&m);
    assert!((lp + 0.75).abs() < 1e-9, "min x = {}", -lp);
    let allowed: Vec<bool> = graph_pieces(&ctx).iter().map(|p| p.z[0] == 0.0).collect();
    let q = SupportQuery {
        cx: vec![-1.0],
        cy: 0.0,
        cz: None,
    };
    let hull = support_function_maxgraph(&ctx, &q, Some(&allowed)).unwrap();
    assert!((hull + 1.0).abs() < 1e-9);
    let mut mip = m.clone();
    mip.families.clear();
    let exact = solve_mip(&mip, &SolveParams::default()).unwrap();
    assert!((exact.incumbent.unwrap() + 1.0).abs() < 1e-9);
}
