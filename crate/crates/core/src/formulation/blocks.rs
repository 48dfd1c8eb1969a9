use super::{Bindings, LinExpr, MipModel, NeuronContext, VarKind, VarRef};
use crate::cuts;
use crate::error::{Error, Result};
use crate::lp::{solve, LinearProgram, LpStatus, Sense};
use crate::model::{Activation, AffineFunc};
use crate::scalar::Scalar;

/// Big-M coefficient rule for max-of-d neurons on boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoeffMode {
    /// `N^{ℓ,k}` maximized jointly over the box.
    #[default]
    Box,
    /// Per-piece interval extremes compared separately.
    Tjeng,
}

/// Where the polytope coefficients `N^{ℓ,k,±}` are optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolytopeScope {
    /// Over the region where piece `k` is maximal (tightest).
    #[default]
    PieceRegion,
    /// Over the whole domain.
    Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeCoefficients<T> {
    /// Pieces that survive pruning, in their original order.
    pub kept: Vec<usize>,
    /// `plus[a][b]` is `N^{ℓ,k,+}` for `ℓ = kept[a]`, `k = kept[b]`.
    pub plus: Vec<Vec<T>>,
    pub minus: Vec<Vec<T>>,
}

pub(crate) fn affine_expr<T: Scalar>(f: &AffineFunc<T>, x: &[VarRef]) -> LinExpr<T> {
    LinExpr {
        terms: x.iter().zip(&f.weights).map(|(&v, &w)| (v, w)).collect(),
        constant: f.bias,
    }
}

fn require_box<T: Scalar>(ctx: &NeuronContext<T>, what: &str) -> Result<()> {
    if ctx.is_box() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{what} needs a box domain; simplex blocks present")))
    }
}

fn check_width<T: Scalar>(ctx: &NeuronContext<T>, x: &[VarRef]) -> Result<()> {
    if x.len() == ctx.eta() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: ctx.eta(),
            found: x.len(),
        })
    }
}

fn binaries<T: Scalar>(model: &mut MipModel<T>, tag: &str, n: usize) -> Vec<VarRef> {
    (0..n)
        .map(|k| model.add_var(format!("z_{tag}_{k}"), VarKind::Binary, T::zero(), T::one()))
        .collect()
}

fn one_hot<T: Scalar>(model: &mut MipModel<T>, tag: &str, z: &[VarRef]) {
    model.add_constraint(
        format!("onehot_{tag}"),
        z.iter().map(|&v| (v, T::one())).collect(),
        Sense::Eq,
        T::one(),
    );
}

/// Big-M block for a ReLU over a box.
pub fn relu_bigm<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
) -> Result<Bindings> {
    require_box(ctx, "relu big-M")?;
    check_width(ctx, x)?;
    let f = affine_expr(&ctx.pieces[0], x);
    let m_lo = ctx.ranges[0].lo;
    let m_hi = ctx.ranges[0].hi;
    let z = model.add_var(format!("z_{tag}_0"), VarKind::Binary, T::zero(), T::one());
    model.add_expr(format!("relu_lb_{tag}"), LinExpr::var(y).add_scaled(&f, -T::one()), Sense::Ge);
    model.add_expr(
        format!("relu_ub_{tag}"),
        LinExpr::var(y).add_scaled(&f, -T::one()).term(z, -m_lo).plus(m_lo),
        Sense::Le,
    );
    model.add_expr(format!("relu_ubz_{tag}"), LinExpr::var(y).term(z, -m_hi), Sense::Le);
    model.add_expr(format!("relu_nonneg_{tag}"), LinExpr::var(y), Sense::Ge);
    Ok(Bindings {
        x: x.to_vec(),
        y,
        z: vec![z],
        aux: Vec::new(),
    })
}

/// ReLU block over a domain with simplex blocks: `y >= f`, `y >= 0` and the
/// two seeded members of the one-hot family.
pub fn onehot_relu_block<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
) -> Result<Bindings> {
    check_width(ctx, x)?;
    if !matches!(ctx.activation, Activation::Relu) {
        return Err(Error::Unsupported("one-hot block is for ReLU neurons".into()));
    }
    if !ctx.rows.is_empty() {
        return Err(Error::Unsupported("one-hot block does not take polytope rows".into()));
    }
    let f = affine_expr(&ctx.pieces[0], x);
    let z = model.add_var(format!("z_{tag}_0"), VarKind::Binary, T::zero(), T::one());
    let bind = Bindings {
        x: x.to_vec(),
        y,
        z: vec![z],
        aux: Vec::new(),
    };
    model.add_expr(format!("relu_lb_{tag}"), LinExpr::var(y).add_scaled(&f, -T::one()), Sense::Ge);
    model.add_expr(format!("relu_nonneg_{tag}"), LinExpr::var(y), Sense::Ge);
    for (n, cut) in cuts::onehot_seed_cuts(ctx)?.iter().enumerate() {
        model.constraints.push(cut.to_constraint(&bind, format!("onehot_seed_{tag}_{n}")));
    }
    Ok(bind)
}

/// `N^{ℓ,k} = Σ_i max{(w^k_i − w^ℓ_i)L_i, (w^k_i − w^ℓ_i)U_i}`.
pub fn box_coefficients<T: Scalar>(ctx: &NeuronContext<T>) -> Vec<Vec<T>> {
    let d = ctx.pieces.len();
    (0..d)
        .map(|l| {
            (0..d)
                .map(|k| {
                    if k == l {
                        return T::zero();
                    }
                    (0..ctx.eta()).fold(T::zero(), |s, i| {
                        let dw = ctx.pieces[k].weights[i] - ctx.pieces[l].weights[i];
                        s + (dw * ctx.lo[i]).max(dw * ctx.hi[i])
                    })
                })
                .collect()
        })
        .collect()
}

/// Coefficients from the bound-comparison rule:
/// `N^{ℓ,k} = max_{t≠ℓ} M⁺(f^t) − (M⁻(f^ℓ) − b^ℓ) − b^k`.
pub fn tjeng_coefficients<T: Scalar>(ctx: &NeuronContext<T>) -> Vec<Vec<T>> {
    let d = ctx.pieces.len();
    (0..d)
        .map(|l| {
            let top = (0..d)
                .filter(|&t| t != l)
                .map(|t| ctx.ranges[t].hi)
                .fold(T::neg_infinity(), T::max);
            let low = ctx.ranges[l].lo - ctx.pieces[l].bias;
            (0..d)
                .map(|k| if k == l { T::zero() } else { top - low - ctx.pieces[k].bias })
                .collect()
        })
        .collect()
}

/// Rows `y <= w^ℓ·x + Σ_k (N^{ℓ,k} + b^k) z_k` for every `ℓ`.
fn max_upper_rows<T: Scalar>(
    model: &mut MipModel<T>,
    pieces: &[AffineFunc<T>],
    n: &[Vec<T>],
    x: &[VarRef],
    y: VarRef,
    z: &[VarRef],
    tag: &str,
    name: &str,
    sense: Sense,
) {
    for (l, p) in pieces.iter().enumerate() {
        let mut e = LinExpr::var(y).add_scaled(&affine_expr(&AffineFunc::new(p.weights.clone(), T::zero()), x), -T::one());
        for (k, q) in pieces.iter().enumerate() {
            e = e.term(z[k], -(n[l][k] + q.bias));
        }
        model.add_expr(format!("{name}_{tag}_{l}"), e, sense);
    }
}

/// Big-M block for a max-of-d neuron over a box.
pub fn max_d_bigm_box<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
    coeff: CoeffMode,
) -> Result<Bindings> {
    require_box(ctx, "max-of-d big-M")?;
    check_width(ctx, x)?;
    if ctx.pieces.len() < 2 {
        return Err(Error::Parameter("max-of-d needs at least two pieces".into()));
    }
    let n = match coeff {
        CoeffMode::Box => box_coefficients(ctx),
        CoeffMode::Tjeng => tjeng_coefficients(ctx),
    };
    let z = binaries(model, tag, ctx.pieces.len());
    max_upper_rows(model, &ctx.pieces, &n, x, y, &z, tag, "max_ub", Sense::Le);
    for (k, p) in ctx.pieces.iter().enumerate() {
        model.add_expr(
            format!("max_lb_{tag}_{k}"),
            LinExpr::var(y).add_scaled(&affine_expr(p, x), -T::one()),
            Sense::Ge,
        );
    }
    one_hot(model, tag, &z);
    Ok(Bindings {
        x: x.to_vec(),
        y,
        z,
        aux: Vec::new(),
    })
}

/// Optimizes `(w^k − w^ℓ)·x` for every ordered pair and prunes pieces that
/// are never maximal.
pub fn polytope_coefficients<T: Scalar>(ctx: &NeuronContext<T>, scope: PolytopeScope) -> Result<PolytopeCoefficients<T>> {
    let d = ctx.pieces.len();
    let mut kept = Vec::new();
    for k in 0..d {
        let mut lp = LinearProgram::new(true);
        let cols = ctx.add_domain(&mut lp);
        NeuronContext::add_dominance(&mut lp, &cols, &ctx.pieces, k);
        let r = solve(&lp)?;
        match r.status {
            LpStatus::Optimal => kept.push(k),
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(Error::Domain("unbounded polytope".into())),
        }
    }
    let mut plus = vec![vec![T::zero(); kept.len()]; kept.len()];
    let mut minus = plus.clone();
    for (a, &l) in kept.iter().enumerate() {
        for (b, &k) in kept.iter().enumerate() {
            if l == k {
                continue;
            }
            let dw: Vec<T> = (0..ctx.eta())
                .map(|i| ctx.pieces[k].weights[i] - ctx.pieces[l].weights[i])
                .collect();
            for maximize in [true, false] {
                let mut lp = LinearProgram::new(maximize);
                let cols = ctx.add_domain(&mut lp);
                if scope == PolytopeScope::PieceRegion {
                    NeuronContext::add_dominance(&mut lp, &cols, &ctx.pieces, k);
                }
                for (i, &c) in cols.iter().enumerate() {
                    lp.objective[c] = dw[i];
                }
                let r = solve(&lp)?;
                match r.status {
                    LpStatus::Optimal => {}
                    LpStatus::Unbounded => return Err(Error::Domain("unbounded polytope".into())),
                    LpStatus::Infeasible => return Err(Error::Lp("coefficient LP infeasible after pruning".into())),
                }
                if maximize {
                    plus[a][b] = r.objective;
                } else {
                    // On the region of piece k, f^k >= f^ℓ bounds the minimum below.
                    minus[a][b] = r.objective.max(ctx.pieces[l].bias - ctx.pieces[k].bias);
                }
            }
        }
    }
    Ok(PolytopeCoefficients { kept, plus, minus })
}

/// Big-M block for a max-of-d neuron over a polytope, with LP coefficients.
/// Binaries of pruned pieces are fixed to zero.
pub fn max_d_bigm_polytope<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
    scope: PolytopeScope,
) -> Result<Bindings> {
    check_width(ctx, x)?;
    if ctx.pieces.len() < 2 {
        return Err(Error::Parameter("max-of-d needs at least two pieces".into()));
    }
    let co = polytope_coefficients(ctx, scope)?;
    if co.kept.is_empty() {
        return Err(Error::Domain("empty domain".into()));
    }
    let z = binaries(model, tag, ctx.pieces.len());
    for k in 0..ctx.pieces.len() {
        if !co.kept.contains(&k) {
            model.vars[z[k]].hi = T::zero();
        }
    }
    let pieces: Vec<AffineFunc<T>> = co.kept.iter().map(|&k| ctx.pieces[k].clone()).collect();
    let zk: Vec<VarRef> = co.kept.iter().map(|&k| z[k]).collect();
    max_upper_rows(model, &pieces, &co.plus, x, y, &zk, tag, "max_ub", Sense::Le);
    max_upper_rows(model, &pieces, &co.minus, x, y, &zk, tag, "max_lb", Sense::Ge);
    one_hot(model, tag, &z);
    Ok(Bindings {
        x: x.to_vec(),
        y,
        z,
        aux: Vec::new(),
    })
}

/// Big-M block for a leaky ReLU over a box.
pub fn leaky_bigm<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
    alpha: T,
) -> Result<Bindings> {
    require_box(ctx, "leaky big-M")?;
    check_width(ctx, x)?;
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Parameter("leaky alpha must lie in (0,1)".into()));
    }
    let f = affine_expr(&ctx.pieces[0], x);
    let m_lo = ctx.ranges[0].lo;
    let m_hi = ctx.ranges[0].hi;
    let s = T::one() - alpha;
    let z = model.add_var(format!("z_{tag}_0"), VarKind::Binary, T::zero(), T::one());
    model.add_expr(format!("leaky_lb_{tag}"), LinExpr::var(y).add_scaled(&f, -T::one()), Sense::Ge);
    model.add_expr(format!("leaky_lba_{tag}"), LinExpr::var(y).add_scaled(&f, -alpha), Sense::Ge);
    // y <= f − (1−α)M⁻(1−z)
    model.add_expr(
        format!("leaky_ub_{tag}"),
        LinExpr::var(y).add_scaled(&f, -T::one()).plus(s * m_lo).term(z, -s * m_lo),
        Sense::Le,
    );
    // y <= αf + (1−α)M⁺z
    model.add_expr(
        format!("leaky_ubz_{tag}"),
        LinExpr::var(y).add_scaled(&f, -alpha).term(z, -s * m_hi),
        Sense::Le,
    );
    Ok(Bindings {
        x: x.to_vec(),
        y,
        z: vec![z],
        aux: Vec::new(),
    })
}

/// Big-M block for a clipped ReLU `min(max(0, f), C)` over a box.
pub fn clipped_bigm<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
    cap: T,
) -> Result<Bindings> {
    require_box(ctx, "clipped big-M")?;
    check_width(ctx, x)?;
    if cap <= T::zero() {
        return Err(Error::Parameter("clipped cap must be positive".into()));
    }
    let f = affine_expr(&ctx.pieces[0], x);
    let m_lo = ctx.ranges[0].lo;
    let m_hi = ctx.ranges[0].hi;
    let z = binaries(model, tag, 3);
    model.add_expr(format!("clip_lbz_{tag}"), LinExpr::var(y).term(z[2], -cap), Sense::Ge);
    model.add_expr(
        format!("clip_ubz_{tag}"),
        LinExpr::var(y).term(z[1], -cap).term(z[2], -cap),
        Sense::Le,
    );
    model.add_expr(
        format!("clip_ub_{tag}"),
        LinExpr::var(y).add_scaled(&f, -T::one()).term(z[0], m_lo),
        Sense::Le,
    );
    model.add_expr(
        format!("clip_lb_{tag}"),
        LinExpr::var(y).add_scaled(&f, -T::one()).term(z[2], m_hi - cap),
        Sense::Ge,
    );
    one_hot(model, tag, &z);
    Ok(Bindings {
        x: x.to_vec(),
        y,
        z,
        aux: Vec::new(),
    })
}

/// One branch of a disjunction: output `g` on the set `{x : a·x + β <= 0}`
/// within the context domain, selected with weight `λ = Σ c_k z_k + c_0`.
#[derive(Debug, Clone)]
pub(crate) struct Disjunct<T> {
    pub output: AffineFunc<T>,
    pub rows: Vec<AffineFunc<T>>,
    pub lambda: (Vec<(usize, T)>, T),
}

fn disjuncts<T: Scalar>(ctx: &NeuronContext<T>) -> Result<Vec<Disjunct<T>>> {
    let eta = ctx.eta();
    let f = ctx.pieces[0].clone();
    let zero = AffineFunc::zero(eta);
    let one = T::one();
    let on = |z: usize| (vec![(z, one)], T::zero());
    Ok(match ctx.activation {
        Activation::Relu | Activation::Leaky { .. } => {
            let off = match ctx.activation {
                Activation::Leaky { alpha } => f.scale(alpha),
                _ => zero,
            };
            vec![
                Disjunct {
                    output: f.clone(),
                    rows: vec![f.scale(-one)],
                    lambda: on(0),
                },
                Disjunct {
                    output: off,
                    rows: vec![f.clone()],
                    lambda: (vec![(0, -one)], one),
                },
            ]
        }
        Activation::Clipped { cap } => {
            let mut minus_cap = f.clone();
            minus_cap.bias -= cap;
            let mut cap_const = AffineFunc::zero(eta);
            cap_const.bias = cap;
            vec![
                Disjunct {
                    output: zero,
                    rows: vec![f.clone()],
                    lambda: on(0),
                },
                Disjunct {
                    output: f.clone(),
                    rows: vec![f.scale(-one), minus_cap.clone()],
                    lambda: on(1),
                },
                Disjunct {
                    output: cap_const,
                    rows: vec![minus_cap.scale(-one)],
                    lambda: on(2),
                },
            ]
        }
        Activation::Max => (0..ctx.pieces.len())
            .map(|k| Disjunct {
                output: ctx.pieces[k].clone(),
                rows: (0..ctx.pieces.len())
                    .filter(|&l| l != k)
                    .map(|l| ctx.pieces[l].sub(&ctx.pieces[k]))
                    .collect(),
                lambda: on(k),
            })
            .collect(),
        Activation::Linear => return Err(Error::Unsupported("linear neurons have no disjunctive block".into())),
    })
}

/// Convex-hull (multiple-choice) block: one domain copy per disjunct with the
/// first copy eliminated through `x¹ = x − Σ_{k>1} x^k`.
pub fn disjunctive_extended<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
) -> Result<Bindings> {
    check_width(ctx, x)?;
    let parts = disjuncts(ctx)?;
    let eta = ctx.eta();
    let z = binaries(model, tag, ctx.nz());
    let lam = |d: &Disjunct<T>| -> LinExpr<T> {
        let mut e = LinExpr::constant(d.lambda.1);
        for &(k, c) in &d.lambda.0 {
            e = e.term(z[k], c);
        }
        e
    };
    let mut aux = Vec::new();
    let mut copies: Vec<Vec<VarRef>> = Vec::new();
    for (k, d) in parts.iter().enumerate().skip(1) {
        let lk = lam(d);
        let cols: Vec<VarRef> = (0..eta)
            .map(|i| {
                model.add_var(
                    format!("v_{tag}_{k}_{i}"),
                    VarKind::Continuous,
                    ctx.lo[i].min(T::zero()),
                    ctx.hi[i].max(T::zero()),
                )
            })
            .collect();
        aux.extend(&cols);
        for i in 0..eta {
            model.add_expr(
                format!("ext_lo_{tag}_{k}_{i}"),
                LinExpr::var(cols[i]).add_scaled(&lk, -ctx.lo[i]),
                Sense::Ge,
            );
            model.add_expr(
                format!("ext_hi_{tag}_{k}_{i}"),
                LinExpr::var(cols[i]).add_scaled(&lk, -ctx.hi[i]),
                Sense::Le,
            );
        }
        for (b, (s, p)) in ctx.simplex_blocks().into_iter().enumerate() {
            let mut e = LinExpr::zero().add_scaled(&lk, -T::one());
            for j in s..s + p {
                e = e.term(cols[j], T::one());
            }
            model.add_expr(format!("ext_simplex_{tag}_{k}_{b}"), e, Sense::Eq);
        }
        for (r, (a, c)) in ctx.rows.iter().enumerate() {
            let e = affine_expr(&AffineFunc::new(a.clone(), T::zero()), &cols).add_scaled(&lk, -*c);
            model.add_expr(format!("ext_poly_{tag}_{k}_{r}"), e, Sense::Le);
        }
        for (r, row) in d.rows.iter().enumerate() {
            let e = affine_expr(&AffineFunc::new(row.weights.clone(), T::zero()), &cols).add_scaled(&lk, row.bias);
            model.add_expr(format!("ext_region_{tag}_{k}_{r}"), e, Sense::Le);
        }
        copies.push(cols);
    }
    // The eliminated copy x¹ = x − Σ x^k.
    let first = &parts[0];
    let l1 = lam(first);
    let x1 = |i: usize| -> LinExpr<T> {
        let mut e = LinExpr::var(x[i]);
        for c in &copies {
            e = e.term(c[i], -T::one());
        }
        e
    };
    let lin = |a: &[T]| -> LinExpr<T> {
        let mut e = LinExpr::zero();
        for (i, &ai) in a.iter().enumerate() {
            if ai != T::zero() {
                e = e.add_scaled(&x1(i), ai);
            }
        }
        e
    };
    for i in 0..eta {
        model.add_expr(format!("ext_lo_{tag}_0_{i}"), x1(i).add_scaled(&l1, -ctx.lo[i]), Sense::Ge);
        model.add_expr(format!("ext_hi_{tag}_0_{i}"), x1(i).add_scaled(&l1, -ctx.hi[i]), Sense::Le);
    }
    for (r, (a, c)) in ctx.rows.iter().enumerate() {
        model.add_expr(format!("ext_poly_{tag}_0_{r}"), lin(a).add_scaled(&l1, -*c), Sense::Le);
    }
    for (r, row) in first.rows.iter().enumerate() {
        model.add_expr(format!("ext_region_{tag}_0_{r}"), lin(&row.weights).add_scaled(&l1, row.bias), Sense::Le);
    }
    let mut out = LinExpr::var(y)
        .add_scaled(&lin(&first.output.weights), -T::one())
        .add_scaled(&l1, -first.output.bias);
    for (d, cols) in parts.iter().skip(1).zip(&copies) {
        out = out
            .add_scaled(&affine_expr(&AffineFunc::new(d.output.weights.clone(), T::zero()), cols), -T::one())
            .add_scaled(&lam(d), -d.output.bias);
    }
    model.add_expr(format!("ext_out_{tag}"), out, Sense::Eq);
    if z.len() > 1 {
        one_hot(model, tag, &z);
    }
    Ok(Bindings {
        x: x.to_vec(),
        y,
        z,
        aux,
    })
}

/// Extended block for a ReLU over a box.
pub fn relu_extended<T: Scalar>(
    model: &mut MipModel<T>,
    ctx: &NeuronContext<T>,
    x: &[VarRef],
    y: VarRef,
    tag: &str,
) -> Result<Bindings> {
    require_box(ctx, "relu extended")?;
    if !matches!(ctx.activation, Activation::Relu) {
        return Err(Error::Unsupported("relu extended block needs a ReLU neuron".into()));
    }
    disjunctive_extended(model, ctx, x, y, tag)
}
