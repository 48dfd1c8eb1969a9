use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{anyhow, Context};

use pwlv::bnc::{solve_mip, MipStatus, SolveParams};
use pwlv::cuts::{family_for, family_witnesses, member};
use pwlv::export::{write_lp, write_mps};
use pwlv::formulation::{
    assemble_network_formulation, lp_tightened_bounds, FamilyKind, FormulationOptions, LinearConstraint, MipModel,
};
use pwlv::model::{linearize_stable_neurons, load_instance, load_network, propagate_bounds, Activation, Network, Region, VerificationInstance};
use pwlv::oracle::{enumerate_activation_optimum, enumerate_family, Family};
use pwlv::Error;

use crate::report::RunReport;
use crate::{Bounds, Coeff, Format, Formulation, ModelArgs};

pub const ROBUST: u8 = 0;
pub const COUNTEREXAMPLE: u8 = 1;
pub const INPUT: u8 = 2;
pub const INCONCLUSIVE: u8 = 3;
pub const GUARD: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Guard { .. } => GUARD,
            Error::Lp(_) => INCONCLUSIVE,
            _ => INPUT,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

fn input(error: anyhow::Error) -> Failure {
    Failure { code: INPUT, error }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn network(path: &Path) -> Result<Network<f64>, Failure> {
    load_network(&read(path)?)
        .with_context(|| format!("invalid network {}", path.display()))
        .map_err(input)
}

fn instance(path: &Path, net: &Network<f64>) -> Result<(VerificationInstance<f64>, Region<f64>), Failure> {
    let inst: VerificationInstance<f64> = load_instance(&read(path)?)
        .with_context(|| format!("invalid instance {}", path.display()))
        .map_err(input)?;
    let region = inst
        .region(net)
        .with_context(|| format!("instance {} does not fit the network", path.display()))
        .map_err(input)?;
    Ok((inst, region))
}

fn classify(act: Activation<f64>, pre: (f64, f64), linear: bool) -> &'static str {
    let (lo, hi) = pre;
    match act {
        Activation::Linear => "linear",
        Activation::Relu | Activation::Leaky { .. } if lo >= 0.0 => "always-on",
        Activation::Relu | Activation::Leaky { .. } if hi <= 0.0 => "always-off",
        Activation::Clipped { .. } if hi <= 0.0 => "always-off",
        Activation::Clipped { cap } if lo >= cap => "saturated",
        Activation::Clipped { cap } if lo >= 0.0 && hi <= cap => "always-on",
        _ if linear => "stable",
        _ => "unstable",
    }
}

pub fn bounds(net_path: &Path, inst_path: Option<&Path>, method: Bounds) -> Outcome {
    let net = network(net_path)?;
    let region = match inst_path {
        Some(p) => instance(p, &net)?.1,
        None => Region::from_domain(&net.domain),
    };
    let table = match method {
        Bounds::Interval => propagate_bounds(&net, &region)?,
        Bounds::Lp => lp_tightened_bounds(&net, &region)?,
    };
    let lin = linearize_stable_neurons(&net, &table)?;
    let (mut total, mut stable) = (0, 0);
    println!("layer\tneuron\tactivation\tM-\tM+\tstatus");
    for (l, layer) in net.layers.iter().enumerate() {
        for (j, n) in layer.neurons.iter().enumerate() {
            let pre = table.layers[l][j].pre();
            let after = &lin.layers[l].neurons[j];
            let linear = !after.is_nonlinear() || after.pieces.len() == 1 && after.activation == Activation::Max;
            let class = classify(n.activation, (pre.lo, pre.hi), linear);
            if n.is_nonlinear() {
                total += 1;
                stable += usize::from(class != "unstable");
            }
            println!("{}\t{j}\t{}\t{}\t{}\t{class}", l + 1, n.activation.name(), pre.lo, pre.hi);
        }
    }
    if total == 0 || stable == total {
        println!("100% linearized ({stable} of {total} nonlinear neurons)");
    } else {
        println!("{:.1}% linearized ({stable} of {total} nonlinear neurons)", 100.0 * stable as f64 / total as f64);
    }
    Ok(0)
}

fn options(f: Formulation, c: Coeff, b: Bounds) -> FormulationOptions {
    FormulationOptions {
        mode: f.mode(),
        coeff: c.mode(),
        bounds: b.method(),
        linearize: true,
    }
}

pub struct VerifyArgs {
    pub network: PathBuf,
    pub instances: Vec<PathBuf>,
    pub formulation: Formulation,
    pub coeff: Coeff,
    pub bounds: Bounds,
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub seed: u64,
    pub jobs: usize,
    pub report: Option<PathBuf>,
}

fn verify_one(args: &VerifyArgs, net: &Network<f64>, path: &Path) -> Result<(u8, RunReport), Failure> {
    let (inst, _) = instance(path, net)?;
    let model = assemble_network_formulation(net, &inst, &options(args.formulation, args.coeff, args.bounds))?;
    let mut params = SolveParams::default();
    if let Some(t) = args.time_limit {
        if !(t > 0.0 && t.is_finite()) {
            return Err(input(anyhow!("time limit must be positive")));
        }
        params.time_limit = Some(Duration::from_secs_f64(t));
    }
    if let Some(n) = args.node_limit {
        params.node_limit = n;
    }
    let r = solve_mip(&model, &params)?;
    let point: Option<Vec<f64>> = r
        .point
        .as_ref()
        .map(|x| model.inputs.iter().map(|&v| x[v]).collect());
    let witnessed = point
        .as_ref()
        .filter(|p| inst.objective(&net.forward(p)) >= 0.0)
        .cloned();
    let (code, verdict) = if r.status == MipStatus::Infeasible || r.bound < 0.0 {
        (ROBUST, "robust")
    } else if witnessed.is_some() {
        (COUNTEREXAMPLE, "counterexample")
    } else {
        (INCONCLUSIVE, "inconclusive")
    };
    let id = inst.id.clone().unwrap_or_else(|| path.display().to_string());
    let mut rep = RunReport::new(id, args.formulation.name(), &r, verdict, args.seed);
    if code == COUNTEREXAMPLE {
        rep.counterexample = witnessed;
    }
    Ok((code, rep))
}

pub fn verify(args: VerifyArgs) -> Outcome {
    if args.jobs == 0 {
        return Err(input(anyhow!("--jobs must be positive")));
    }
    let net = network(&args.network)?;
    let sink = match &args.report {
        Some(p) => Some(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .with_context(|| format!("cannot open {}", p.display()))
                .map_err(input)?,
        ),
        None => None,
    };
    let sink = Mutex::new(sink);
    let next = AtomicUsize::new(0);
    let codes: Vec<Mutex<Option<Result<u8, Failure>>>> = args.instances.iter().map(|_| Mutex::new(None)).collect();
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= args.instances.len() {
            break;
        }
        let res = verify_one(&args, &net, &args.instances[i]).map(|(code, rep)| {
            let line = rep.line();
            let mut guard = sink.lock().expect("report lock");
            println!("{line}");
            if let Some(f) = guard.as_mut() {
                let _ = writeln!(f, "{line}");
            }
            code
        });
        *codes[i].lock().expect("result lock") = Some(res);
    };
    std::thread::scope(|s| {
        for _ in 1..args.jobs.min(args.instances.len()) {
            s.spawn(work);
        }
        work();
    });
    let mut worst = ROBUST;
    for c in codes {
        match c.into_inner().expect("result lock").expect("every instance ran") {
            Ok(code) => worst = worst.max(code),
            Err(f) if args.instances.len() == 1 => return Err(f),
            Err(f) => {
                eprintln!("error: {:#}", f.error);
                worst = worst.max(f.code);
            }
        }
    }
    Ok(worst)
}

fn parse_cuts(spec: &str) -> Result<Option<usize>, Failure> {
    if spec == "seeded" {
        return Ok(None);
    }
    let n = ["enumerate<=", "enumerate≤", "enumerate:"]
        .iter()
        .find_map(|p| spec.strip_prefix(p))
        .ok_or_else(|| input(anyhow!("--cuts must be `seeded` or `enumerate<=N`, got `{spec}`")))?;
    n.parse()
        .map(Some)
        .map_err(|_| input(anyhow!("invalid member limit `{n}`")))
}

/// Every member of each neuron's family as model rows.
fn enumerated_rows(model: &MipModel<f64>, limit: usize) -> Result<Vec<LinearConstraint<f64>>, Failure> {
    let mut rows = Vec::new();
    for entry in &model.neurons {
        let Some(kind) = family_for(&entry.ctx) else { continue };
        let cuts = if kind == FamilyKind::IdealDualSubgradient {
            enumerate_family(&entry.ctx, Family::SimplexPairs, limit)?
        } else {
            family_witnesses(kind, &entry.ctx, limit)?
                .iter()
                .map(|w| member(kind, &entry.ctx, w))
                .collect::<pwlv::Result<Vec<_>>>()?
        };
        for (i, c) in cuts.iter().enumerate() {
            rows.push(c.to_constraint(&entry.bind, format!("cut_{}_{i}", entry.tag())));
        }
    }
    Ok(rows)
}

pub fn emit(args: &ModelArgs, format: Format, cuts: &str, output: Option<&Path>) -> Outcome {
    let limit = parse_cuts(cuts)?;
    let net = network(&args.network)?;
    let (inst, _) = instance(&args.instance, &net)?;
    let mut model = assemble_network_formulation(&net, &inst, &options(args.formulation, args.coeff, args.bounds))?;
    if let Some(n) = limit {
        let rows = enumerated_rows(&model, n)?;
        model.constraints.extend(rows);
    }
    let name = inst.id.clone().unwrap_or_else(|| "pwlv".into());
    let text = match format {
        Format::Mps => write_mps(&model, &name),
        Format::Lp => write_lp(&model, &name),
    };
    match output {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(input)?,
        None => print!("{text}"),
    }
    Ok(0)
}

pub fn oracle(net_path: &Path, inst_path: &Path) -> Outcome {
    let net = network(net_path)?;
    let (inst, region) = instance(inst_path, &net)?;
    let mut c = vec![0.0; net.output_dim()];
    c[inst.target_label] += 1.0;
    if let Some(s) = inst.source_label {
        c[s] -= 1.0;
    }
    let v = enumerate_activation_optimum(&net, &region, &c)?;
    println!("{v}");
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_specs() {
        assert_eq!(parse_cuts("seeded").ok().unwrap(), None);
        assert_eq!(parse_cuts("enumerate<=16").ok().unwrap(), Some(16));
        assert_eq!(parse_cuts("enumerate≤4").ok().unwrap(), Some(4));
        assert!(parse_cuts("all").is_err());
    }

    #[test]
    fn stability_classes() {
        assert_eq!(classify(Activation::Relu, (-1.5, 0.5), false), "unstable");
        assert_eq!(classify(Activation::Relu, (0.0, 2.0), true), "always-on");
        assert_eq!(classify(Activation::Clipped { cap: 1.0 }, (1.5, 2.0), true), "saturated");
        assert_eq!(classify(Activation::Max, (0.0, 1.0), true), "stable");
    }
}
