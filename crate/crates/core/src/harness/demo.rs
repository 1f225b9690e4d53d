//! One-shot reproductions of each lower-bound experiment, measured means
//! next to the matching √-rate.

use std::fmt;

use serde::Serialize;

use crate::adversaries::universal_k;
use crate::domain::{DecisionSet, ExplicitSet};
use crate::error::{Error, Result};
use crate::harness::config::{AdversaryKind, AdversarySpec, ExperimentConfig};
use crate::harness::runner::run_experiment;

pub const DEMO_IDS: [&str; 5] = ["universal", "mset-all", "mset-hedge", "multitask", "dag"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoRow {
    pub learner: String,
    pub mean_final_regret: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub id: String,
    pub setting: String,
    /// The rate the lower bound scales with, constants omitted.
    pub rate_label: String,
    pub rate: f64,
    pub rows: Vec<DemoRow>,
}

impl fmt::Display for DemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.id, self.setting)?;
        writeln!(f, "  rate {} = {:.3}", self.rate_label, self.rate)?;
        for r in &self.rows {
            writeln!(
                f,
                "  {:<24} mean regret {:>9.3} ± {:.3} (se, {} trials)  mean/rate {:.3}",
                r.learner,
                r.mean_final_regret,
                r.std_error,
                r.trials,
                r.mean_final_regret / self.rate
            )?;
        }
        Ok(())
    }
}

struct DemoSetup {
    setting: String,
    rate_label: &'static str,
    rate: f64,
    config: ExperimentConfig,
}

fn setup(id: &str, trials: usize, seed: u64) -> Result<DemoSetup> {
    let config = |set: Option<DecisionSet>, learners: &[&str], adversary: AdversaryKind, horizon: usize| {
        let learners = learners.iter().map(|l| l.parse()).collect::<Result<Vec<_>>>()?;
        let mut c = ExperimentConfig::new(set, learners, AdversarySpec::new(adversary), horizon);
        c.trials = trials;
        c.seed = seed;
        Ok::<_, Error>(c)
    };
    Ok(match id {
        "universal" => {
            let set = DecisionSet::Explicit(ExplicitSet::hypercube(4));
            let k = universal_k(&set);
            let horizon = 4000;
            DemoSetup {
                setting: format!("hypercube d=4, |I|={k}, T={horizon}, universal adversary"),
                rate_label: "√(T|I|/8)",
                rate: (horizon as f64 * k as f64 / 8.0).sqrt(),
                config: config(Some(set), &["hedge"], AdversaryKind::Universal { k: None }, horizon)?,
            }
        }
        "mset-all" => {
            let (d, m, horizon) = (16, 4, 4096);
            DemoSetup {
                setting: format!("m-set d={d}, m={m}, T={horizon}, mset-lb adversary"),
                rate_label: "√(T m ln(d/m))",
                rate: (horizon as f64 * m as f64 * (d as f64 / m as f64).ln()).sqrt(),
                config: config(Some(DecisionSet::mset(d, m)?), &["hedge", "omd-mset"], AdversaryKind::MSetLb, horizon)?,
            }
        }
        "mset-hedge" => {
            let (d, m, horizon) = (64, 8, 8192);
            DemoSetup {
                setting: format!("m-set d={d}, m={m}, T={horizon}, hedge-killer at Hedge's own rate"),
                rate_label: "√(T m ln(d/m))",
                rate: (horizon as f64 * m as f64 * (d as f64 / m as f64).ln()).sqrt(),
                config: config(Some(DecisionSet::mset(d, m)?), &["hedge"], AdversaryKind::HedgeKiller, horizon)?,
            }
        }
        "multitask" => {
            let blocks = vec![2, 4, 8, 16];
            let horizon = 4096;
            let set = DecisionSet::multitask(blocks.clone())?;
            let ln_card = set.ln_cardinality();
            DemoSetup {
                setting: format!("multitask blocks {blocks:?}, T={horizon}, phased expert adversary"),
                rate_label: "√(T ln|X|)",
                rate: (horizon as f64 * ln_card).sqrt(),
                config: config(Some(set), &["hedge"], AdversaryKind::MultitaskPhases, horizon)?,
            }
        }
        "dag" => {
            let (d, n_paths, horizon) = (16, 32u128, 2048);
            DemoSetup {
                setting: format!("layered DAG with ≤{d} edges and ≤{n_paths} paths, T={horizon}"),
                rate_label: "√(T ln N)",
                rate: (horizon as f64 * (n_paths as f64).ln()).sqrt(),
                config: config(None, &["hedge-dag", "omd-entropy-dag"], AdversaryKind::DagLayered { d, n_paths }, horizon)?,
            }
        }
        other => {
            return Err(Error::Parse(format!("unknown demo `{other}`; expected one of {}", DEMO_IDS.join(", "))))
        }
    })
}

/// Runs demo `id` with `trials` trials.
pub fn lb_demo(id: &str, trials: usize, seed: u64) -> Result<DemoReport> {
    let s = setup(id, trials, seed)?;
    let out = run_experiment(&s.config)?;
    let rows = s
        .config
        .learners
        .iter()
        .map(|l| {
            let label = l.to_string();
            let summary = &out.summary[&label];
            DemoRow {
                learner: label,
                mean_final_regret: summary.mean_final_regret,
                std_error: summary.std_error(),
                trials: summary.trials,
            }
        })
        .collect();
    Ok(DemoReport { id: id.to_string(), setting: s.setting, rate_label: s.rate_label.to_string(), rate: s.rate, rows })
}
