use std::collections::BTreeMap;

use serde::Serialize;

use pwlv::bnc::MipResult;

/// One line of the run log. Field order is the serialization order.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub instance: String,
    pub mode: String,
    pub status: String,
    pub incumbent: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: usize,
    pub cuts: BTreeMap<String, usize>,
    pub time_s: f64,
    pub root_bound_before_cuts: Option<f64>,
    pub root_bound_after_cuts: Option<f64>,
    pub verdict: String,
    pub counterexample: Option<Vec<f64>>,
    pub seed: u64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl RunReport {
    pub fn new(instance: String, mode: &str, r: &MipResult<f64>, verdict: &str, seed: u64) -> Self {
        Self {
            instance,
            mode: mode.to_string(),
            status: r.status.name().to_string(),
            incumbent: r.incumbent,
            bound: finite(r.bound),
            gap: finite(r.gap),
            nodes: r.nodes,
            cuts: r.cuts.clone(),
            time_s: r.time.as_secs_f64(),
            root_bound_before_cuts: finite(r.root_bound_before_cuts),
            root_bound_after_cuts: finite(r.root_bound_after_cuts),
            verdict: verdict.to_string(),
            counterexample: None,
            seed,
        }
    }

    pub fn line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
