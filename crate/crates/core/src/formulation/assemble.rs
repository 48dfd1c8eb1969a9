use super::blocks::{
    affine_expr, clipped_bigm, disjunctive_extended, leaky_bigm, max_d_bigm_box, max_d_bigm_polytope, onehot_relu_block,
    relu_bigm, CoeffMode, PolytopeScope,
};
use super::{Bindings, CutFamily, FamilyKind, LinExpr, MipModel, NeuronContext, NeuronEntry, VarKind, VarRef};
use crate::error::{Error, Result};
use crate::lp::{solve, LpStatus, Sense};
use crate::model::{
    affine_bounds, linearize_stable_neurons, propagate_bounds, Activation, BoundTable, Interval, Network, Region,
    VerificationInstance,
};
use crate::scalar::Scalar;

/// How each nonlinear neuron is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    BigM,
    Extended,
    BigMWithCuts,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::BigM => "bigm",
            Mode::Extended => "extended",
            Mode::BigMWithCuts => "bigm_with_cuts",
        }
    }
}

/// Pre-activation bound method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMethod {
    #[default]
    Interval,
    /// Interval bounds tightened layer by layer with big-M LP relaxations.
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulationOptions {
    pub mode: Mode,
    pub coeff: CoeffMode,
    pub bounds: BoundMethod,
    /// Replace stable neurons by linear ones before building.
    pub linearize: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        Self {
            mode: Mode::BigM,
            coeff: CoeffMode::Box,
            bounds: BoundMethod::Interval,
            linearize: true,
        }
    }
}

impl FormulationOptions {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// A network after bound propagation and linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedNetwork<T> {
    pub network: Network<T>,
    pub region: Region<T>,
    pub bounds: BoundTable<T>,
}

pub fn prepare_network<T: Scalar>(
    net: &Network<T>,
    region: &Region<T>,
    opts: &FormulationOptions,
) -> Result<PreparedNetwork<T>> {
    net.validate()?;
    let bounds = match opts.bounds {
        BoundMethod::Interval => propagate_bounds(net, region)?,
        BoundMethod::Lp => lp_tightened_bounds(net, region)?,
    };
    let network = if opts.linearize {
        linearize_stable_neurons(net, &bounds)?
    } else {
        net.clone()
    };
    Ok(PreparedNetwork {
        network,
        region: region.clone(),
        bounds,
    })
}

/// Adds the block of one nonlinear neuron and records it in the model.
pub(crate) fn add_neuron<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    layer: usize,
    index: usize,
    opts: &FormulationOptions,
) -> Result<()> {
    let tag = format!("{layer}_{index}");
    let (ctx, bind, kind): (NeuronContext<T>, Bindings, Option<FamilyKind>) = if opts.mode == Mode::Extended {
        let b = disjunctive_extended(model, &ctx, x, y, &tag)?;
        (ctx, b, None)
    } else {
        match ctx.activation {
            Activation::Relu if ctx.is_box() => {
                let b = relu_bigm(model, &ctx, x, y, &tag)?;
                (ctx, b, Some(FamilyKind::ReluIdeal))
            }
            Activation::Relu if ctx.rows.is_empty() => {
                let b = onehot_relu_block(model, &ctx, x, y, &tag)?;
                (ctx, b, Some(FamilyKind::OneHotRelu))
            }
            Activation::Leaky { alpha } => {
                let c = if ctx.is_box() { ctx } else { ctx.boxed() };
                let b = leaky_bigm(model, &c, x, y, &tag, alpha)?;
                (c, b, Some(FamilyKind::Leaky))
            }
            Activation::Clipped { cap } => {
                let c = if ctx.is_box() { ctx } else { ctx.boxed() };
                let b = clipped_bigm(model, &c, x, y, &tag, cap)?;
                (c, b, Some(FamilyKind::Clipped))
            }
            Activation::Max if ctx.is_box() => {
                let b = max_d_bigm_box(model, &ctx, x, y, &tag, opts.coeff)?;
                (ctx, b, Some(FamilyKind::MaxDBox))
            }
            Activation::Max => {
                let b = max_d_bigm_polytope(model, &ctx, x, y, &tag, PolytopeScope::PieceRegion)?;
                (ctx, b, Some(FamilyKind::IdealDualSubgradient))
            }
            Activation::Relu => {
                return Err(Error::Unsupported("ReLU over a general polytope".into()));
            }
            Activation::Linear => return Err(Error::Unsupported("linear neurons have no block".into())),
        }
    };
    model.neurons.push(NeuronEntry { layer, index, ctx, bind });
    if opts.mode == Mode::BigMWithCuts {
        if let Some(kind) = kind {
            model.families.push(CutFamily {
                kind,
                neuron: model.neurons.len() - 1,
            });
        }
    }
    Ok(())
}

fn add_inputs<T: Scalar>(model: &mut MipModel<T>, lo: &[T], hi: &[T], simplices: &[(usize, usize)]) {
    model.inputs = (0..lo.len())
        .map(|i| model.add_var(format!("x_0_{i}"), VarKind::Continuous, lo[i], hi[i]))
        .collect();
    for (b, &(s, p)) in simplices.iter().enumerate() {
        let terms = (s..s + p).map(|j| (model.inputs[j], T::one())).collect();
        model.add_constraint(format!("simplex_0_{b}"), terms, Sense::Eq, T::one());
    }
}

fn build_layers<T: Scalar>(prep: &PreparedNetwork<T>, opts: &FormulationOptions) -> Result<MipModel<T>> {
    let net = &prep.network;
    let mut model = MipModel::new();
    let lo: Vec<T> = prep.region.bounds.iter().map(|b| b.lo).collect();
    let hi: Vec<T> = prep.region.bounds.iter().map(|b| b.hi).collect();
    add_inputs(&mut model, &lo, &hi, &net.domain.simplex_blocks());
    let mut prev = model.inputs.clone();
    for (l, layer) in net.layers.iter().enumerate() {
        let input_box: Vec<Interval<T>> = prep.bounds.input_box(l);
        let mut outs = Vec::with_capacity(layer.neurons.len());
        for (j, neuron) in layer.neurons.iter().enumerate() {
            let tag = format!("{}_{}", l + 1, j);
            let post = prep.bounds.layers[l][j].post;
            let y = model.add_var(format!("y_{tag}"), VarKind::Continuous, post.lo, post.hi);
            outs.push(y);
            let linear = !neuron.is_nonlinear() || neuron.pieces.len() == 1 && neuron.activation == Activation::Max;
            if linear {
                let e = LinExpr::var(y).add_scaled(&affine_expr(&neuron.pieces[0], &prev), -T::one());
                model.add_expr(format!("lin_{tag}"), e, Sense::Eq);
                continue;
            }
            let ctx = if l == 0 {
                NeuronContext::from_region(neuron.pieces.clone(), neuron.activation, &prep.region)?
            } else {
                NeuronContext::from_box(neuron.pieces.clone(), neuron.activation, &input_box)?
            };
            add_neuron(&mut model, ctx, &prev, y, l + 1, j, opts)?;
        }
        model.outputs.push(outs.clone());
        prev = outs;
    }
    model.network = Some(net.clone());
    Ok(model)
}

/// Model of `net` over `region` maximizing `c · outputs`.
pub fn assemble_with_objective<T: Scalar>(
    net: &Network<T>,
    region: &Region<T>,
    c: &[T],
    opts: &FormulationOptions,
) -> Result<MipModel<T>> {
    if c.len() != net.output_dim() {
        return Err(Error::LengthMismatch {
            expected: net.output_dim(),
            found: c.len(),
        });
    }
    let prep = prepare_network(net, region, opts)?;
    let mut model = build_layers(&prep, opts)?;
    let outs = model.outputs.last().cloned().unwrap_or_default();
    model.set_objective(true, outs.iter().zip(c).map(|(&v, &w)| (v, w)).collect(), T::zero());
    model.validate()?;
    Ok(model)
}

/// Verification model: maximize `f_target − f_source` over the ball
/// intersected with the domain.
pub fn assemble_network_formulation<T: Scalar>(
    net: &Network<T>,
    inst: &VerificationInstance<T>,
    opts: &FormulationOptions,
) -> Result<MipModel<T>> {
    inst.validate(net)?;
    let region = inst.region(net)?;
    let mut c = vec![T::zero(); net.output_dim()];
    c[inst.target_label] += T::one();
    if let Some(s) = inst.source_label {
        c[s] -= T::one();
    }
    assemble_with_objective(net, &region, &c, opts)
}

/// Model of one neuron with inputs over the context domain and a zero
/// objective.
pub fn single_neuron_model<T: Scalar>(ctx: &NeuronContext<T>, opts: &FormulationOptions) -> Result<MipModel<T>> {
    let mut model = MipModel::new();
    add_inputs(&mut model, &ctx.lo, &ctx.hi, &ctx.simplex_blocks());
    for (r, (a, c)) in ctx.rows.iter().enumerate() {
        let terms = a.iter().enumerate().map(|(i, &v)| (model.inputs[i], v)).collect();
        model.add_constraint(format!("poly_0_{r}"), terms, Sense::Le, *c);
    }
    let out = ctx.output_range();
    let y = model.add_var("y_1_0", VarKind::Continuous, out.lo, out.hi);
    model.outputs.push(vec![y]);
    if ctx.activation == Activation::Linear {
        let e = LinExpr::var(y).add_scaled(&affine_expr(&ctx.pieces[0], &model.inputs), -T::one());
        model.add_expr("lin_1_0", e, Sense::Eq);
    } else {
        let x = model.inputs.clone();
        add_neuron(&mut model, ctx.clone(), &x, y, 1, 0, opts)?;
    }
    model.validate()?;
    Ok(model)
}

/// Interval bounds tightened by LP: each layer's pieces are optimized over
/// the big-M relaxation of the layers before it.
pub fn lp_tightened_bounds<T: Scalar>(net: &Network<T>, region: &Region<T>) -> Result<BoundTable<T>> {
    let mut table = propagate_bounds(net, region)?;
    let opts = FormulationOptions {
        linearize: false,
        ..FormulationOptions::default()
    };
    for l in 1..net.layers.len() {
        let input_box = table.input_box(l);
        for (j, n) in net.layers[l].neurons.iter().enumerate() {
            for (k, p) in n.pieces.iter().enumerate() {
                table.layers[l][j].pieces[k] = affine_bounds(p, &input_box)?;
            }
        }
        let head = Network {
            input_dim: net.input_dim,
            domain: net.domain.clone(),
            layers: net.layers[..l].to_vec(),
        };
        let prep = PreparedNetwork {
            network: head,
            region: region.clone(),
            bounds: BoundTable {
                region: region.clone(),
                layers: table.layers[..l].to_vec(),
            },
        };
        let model = build_layers(&prep, &opts)?;
        let outs = model.outputs.last().cloned().unwrap_or_default();
        for (j, n) in net.layers[l].neurons.iter().enumerate() {
            for (k, p) in n.pieces.iter().enumerate() {
                let mut range = table.layers[l][j].pieces[k];
                for maximize in [true, false] {
                    let mut lp = model.lp_relaxation();
                    lp.maximize = maximize;
                    lp.objective = vec![T::zero(); lp.num_vars()];
                    for (i, &v) in outs.iter().enumerate() {
                        lp.objective[v] = p.weights[i];
                    }
                    lp.offset = p.bias;
                    let r = solve(&lp)?;
                    if r.status != LpStatus::Optimal {
                        continue;
                    }
                    let slack = T::tolerances().feasibility * (T::one() + r.objective.abs());
                    if maximize {
                        range.hi = range.hi.min(r.objective + slack).max(range.lo);
                    } else {
                        range.lo = range.lo.max(r.objective - slack).min(range.hi);
                    }
                }
                table.layers[l][j].pieces[k] = range;
            }
            let pieces = table.layers[l][j].pieces.clone();
            table.layers[l][j].post = match n.activation {
                Activation::Max => Interval::new(
                    pieces.iter().map(|p| p.lo).fold(T::neg_infinity(), T::max),
                    pieces.iter().map(|p| p.hi).fold(T::neg_infinity(), T::max),
                ),
                a => Interval::new(a.apply(pieces[0].lo), a.apply(pieces[0].hi)),
            };
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve;
    use crate::model::{AffineFunc, Domain};

    fn single_relu_separation() -> Network<f64> {
        Network::dense(
            Domain::boxed(&[(0.0, 1.0), (0.0, 1.0)]).unwrap(),
            vec![(vec![vec![1.0, 1.0]], vec![-1.5], Activation::Relu)],
        )
        .unwrap()
    }

    fn maximize_y(net: &Network<f64>, mode: Mode) -> MipModel<f64> {
        let region = Region::from_domain(&net.domain);
        assemble_with_objective(net, &region, &[1.0], &FormulationOptions::with_mode(mode)).unwrap()
    }

    #[test]
    fn single_relu_separation_sizes() {
        let m = maximize_y(&single_relu_separation(), Mode::BigM);
        assert_eq!((m.num_continuous(), m.num_binaries(), m.constraints.len()), (3, 1, 4));
        assert!(m.families.is_empty());
        let e = maximize_y(&single_relu_separation(), Mode::Extended);
        assert_eq!(e.num_continuous(), 5);
        let c = maximize_y(&single_relu_separation(), Mode::BigMWithCuts);
        assert_eq!(c.families, vec![CutFamily { kind: FamilyKind::ReluIdeal, neuron: 0 }]);
        let r = solve(&m.lp_relaxation()).unwrap();
        assert!((r.objective - 0.5).abs() < 1e-9);
    }

    #[test]
    fn linearized_network_is_a_pure_lp() {
        let net = Network::dense(
            Domain::boxed(&[(0.5, 1.0)]).unwrap(),
            vec![
                (vec![vec![1.0]], vec![0.0], Activation::Relu),
                (vec![vec![-1.0]], vec![0.0], Activation::Relu),
            ],
        )
        .unwrap();
        let m = maximize_y(&net, Mode::BigM);
        assert_eq!(m.num_binaries(), 0);
        assert!(m.neurons.is_empty());
    }

    #[test]
    fn lp_bounds_are_no_looser() {
        let net = Network::dense(
            Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap(),
            vec![
                (vec![vec![1.0, 1.0], vec![1.0, -1.0]], vec![0.0, 0.0], Activation::Relu),
                (vec![vec![1.0, 1.0]], vec![0.0], Activation::Relu),
            ],
        )
        .unwrap();
        let region = Region::from_domain(&net.domain);
        let a = propagate_bounds(&net, &region).unwrap();
        let b = lp_tightened_bounds(&net, &region).unwrap();
        let (ia, ib) = (a.layers[1][0].pre(), b.layers[1][0].pre());
        assert!(ib.lo >= ia.lo - 1e-12 && ib.hi <= ia.hi + 1e-12);
        assert!(ib.hi < ia.hi - 1e-3);
    }

    #[test]
    fn single_neuron_over_a_polytope() {
        let mut ctx = NeuronContext::<f64>::from_box(
            vec![AffineFunc::new(vec![1.0, 0.0], 0.0), AffineFunc::new(vec![0.0, 1.0], 0.0)],
            Activation::Max,
            &[Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)],
        )
        .unwrap();
        ctx.rows.push((vec![1.0, 1.0], 1.0));
        let mut m = single_neuron_model(&ctx, &FormulationOptions::with_mode(Mode::BigMWithCuts)).unwrap();
        assert_eq!(m.families[0].kind, FamilyKind::IdealDualSubgradient);
        let y = m.outputs[0][0];
        m.set_objective(true, vec![(y, 1.0)], 0.0);
        let r = solve(&m.lp_relaxation()).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-9);
    }
}
