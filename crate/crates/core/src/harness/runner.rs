use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::adversaries::{
    dag_hard_instance, hedge_killer, mset_lb_adversary, multitask_adversary, universal_adversary, ConstantStream,
    LossStream, RandomFeasibleStream,
};
use crate::domain::{dot, dot_binary, validate_loss, DecisionSet, RegretLedger};
use crate::error::{Error, Result};
use crate::harness::config::{AdversaryKind, AdversarySpec, ExperimentConfig, LearnerKind, LearnerSpec, Mode};
use crate::learners::{
    default_learning_rate, entropy_dag_learning_rate, mset_omd_learning_rate, DagHedge, DilatedOmd, EntropyDagOmd,
    ExplicitHedge, Learner, MSetHedge, MSetOmd, MultitaskHedge,
};
use crate::sampling::{derive_seed, RngStream};

/// Slack on the Hedge regret tripwire.
const TRIPWIRE_SLACK: f64 = 1e-9;

/// The learning rate a learner spec resolves to.
pub fn resolve_eta(spec: &LearnerSpec, default_eta: Option<f64>, set: &DecisionSet, horizon: usize) -> Result<f64> {
    if let Some(eta) = spec.eta.or(default_eta) {
        return Ok(eta);
    }
    Ok(match spec.kind {
        LearnerKind::Hedge | LearnerKind::HedgeDag | LearnerKind::OmdDilated => default_learning_rate(set, horizon),
        LearnerKind::OmdMSet => match set {
            DecisionSet::MSet { d, m } => mset_omd_learning_rate(*d, *m, horizon),
            _ => return Err(Error::Precondition("omd-mset needs an m-set".into())),
        },
        LearnerKind::OmdEntropyDag => entropy_dag_learning_rate(set, horizon),
    })
}

pub fn build_learner(kind: LearnerKind, set: &DecisionSet, eta: f64) -> Result<Box<dyn Learner>> {
    let wrong_set = || Error::Precondition(format!("learner {} does not apply to a {} set", kind.as_str(), set.kind()));
    Ok(match (kind, set) {
        (LearnerKind::Hedge, DecisionSet::MSet { d, m }) => Box::new(MSetHedge::new(*d, *m, eta)?),
        (LearnerKind::Hedge, DecisionSet::Multitask { blocks }) => Box::new(MultitaskHedge::new(blocks.clone(), eta)?),
        (LearnerKind::Hedge, _) => Box::new(ExplicitHedge::new(set, eta)?),
        (LearnerKind::HedgeDag, DecisionSet::DagPaths(dag)) => Box::new(DagHedge::new(dag.clone(), eta)?),
        (LearnerKind::OmdMSet, DecisionSet::MSet { d, m }) => Box::new(MSetOmd::new(*d, *m, eta)?),
        (LearnerKind::OmdDilated, DecisionSet::DagPaths(dag)) => Box::new(DilatedOmd::new(dag.clone(), eta)?),
        (LearnerKind::OmdEntropyDag, DecisionSet::DagPaths(dag)) => Box::new(EntropyDagOmd::new(dag.clone(), eta)?),
        _ => return Err(wrong_set()),
    })
}

/// The decision set an experiment runs on.
pub fn experiment_set(config: &ExperimentConfig) -> Result<DecisionSet> {
    match (&config.set, &config.adversary.kind) {
        (_, AdversaryKind::DagLayered { d, n_paths }) => {
            DecisionSet::dag_paths(dag_hard_instance(*d, *n_paths, config.horizon)?.dag)
        }
        (Some(set), _) => Ok(set.clone()),
        (None, _) => Err(Error::Precondition("no decision set configured".into())),
    }
}

/// A fresh adversary for one (trial, learner) pair. Oblivious adversaries
/// depend only on the seed, so every learner of a trial sees the same losses.
pub fn build_adversary(
    spec: &AdversarySpec,
    set: &DecisionSet,
    horizon: usize,
    learner_eta: f64,
    rng: RngStream,
) -> Result<Box<dyn LossStream>> {
    let need = |what: &str| Error::Precondition(format!("adversary {} needs {what}", spec.name()));
    Ok(match &spec.kind {
        AdversaryKind::Universal { k } => Box::new(universal_adversary(set, horizon, *k, rng)?),
        AdversaryKind::MSetLb => match set {
            DecisionSet::MSet { d, m } => Box::new(mset_lb_adversary(*d, *m, rng)?),
            _ => return Err(need("an m-set")),
        },
        AdversaryKind::HedgeKiller => match set {
            DecisionSet::MSet { d, m } => Box::new(hedge_killer(*d, *m, horizon, learner_eta)?),
            _ => return Err(need("an m-set")),
        },
        AdversaryKind::MultitaskPhases => match set {
            DecisionSet::Multitask { blocks } => Box::new(multitask_adversary(blocks, horizon, rng)?),
            _ => return Err(need("a multitask set")),
        },
        AdversaryKind::DagLayered { d, n_paths } => Box::new(dag_hard_instance(*d, *n_paths, horizon)?.stream(rng)),
        AdversaryKind::Constant(y) => {
            if y.len() != set.dim() {
                return Err(Error::Precondition(format!(
                    "constant loss has {} entries, decision set has dimension {}",
                    y.len(),
                    set.dim()
                )));
            }
            Box::new(ConstantStream::new(y.clone()))
        }
        AdversaryKind::Random => Box::new(RandomFeasibleStream::new(set.clone(), rng)),
    })
}

/// One learner's ledger in one trial.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub trial: usize,
    pub learner: String,
    pub eta: f64,
    pub ledger: RegretLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerSummary {
    pub mean_final_regret: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub trials: usize,
}

impl LearnerSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        LearnerSummary {
            mean_final_regret: mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            trials: n,
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std / (self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Sorted by trial, then by learner order in the config.
    pub runs: Vec<TrialRun>,
    pub summary: BTreeMap<String, LearnerSummary>,
}

impl ExperimentOutput {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trial", "t", "learner", "loss", "cum_loss", "cum_best", "regret"])?;
        for run in &self.runs {
            for row in run.ledger.rows() {
                w.write_record([
                    run.trial.to_string(),
                    row.t.to_string(),
                    run.learner.clone(),
                    row.loss.to_string(),
                    row.cum_loss.to_string(),
                    row.cum_best.to_string(),
                    row.regret.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
    }
}

fn with_context(trial: usize, round: usize, learner: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::Context { trial, round, learner: learner.to_string(), source: Box::new(e) }
}

/// Runs one learner against one adversary for `horizon` rounds.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    set: &DecisionSet,
    learner: &mut dyn Learner,
    label: &str,
    adversary: &mut dyn LossStream,
    horizon: usize,
    mode: Mode,
    mut rng: RngStream,
    trial: usize,
    tripwire: bool,
) -> Result<RegretLedger> {
    let mut ledger = RegretLedger::new(set.dim());
    let ln_card = set.ln_cardinality();
    let eta = learner.eta();
    for t in 1..=horizon {
        let y = adversary.next_loss();
        validate_loss(set, &y).map_err(|v| with_context(trial, t, label)(Error::Validation(v)))?;
        let loss = match mode {
            Mode::Expected => dot(learner.policy(), &y),
            Mode::Sampled => dot_binary(&learner.sample(&mut rng).map_err(with_context(trial, t, label))?, &y),
        };
        let row = ledger.record(set, loss, &y);
        if tripwire && mode == Mode::Expected && eta > 0.0 {
            let bound = ln_card / eta + eta * t as f64 / 2.0;
            if row.regret > bound + TRIPWIRE_SLACK {
                return Err(with_context(trial, t, label)(Error::Internal(format!(
                    "Hedge regret {} exceeds ln|X|/η + ηt/2 = {bound}",
                    row.regret
                ))));
            }
        }
        learner.observe(&y).map_err(with_context(trial, t, label))?;
    }
    Ok(ledger)
}

/// Runs every (trial, learner) pair; trials execute in parallel and results
/// are ordered by trial index.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.check()?;
    let set = experiment_set(config)?;
    let etas: Vec<f64> = config
        .learners
        .iter()
        .map(|l| resolve_eta(l, config.eta, &set, config.horizon))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = config.learners.iter().map(|l| l.to_string()).collect();
    let adversary_seed = config.adversary.seed.unwrap_or(0);

    let per_trial: Vec<Vec<TrialRun>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(config.seed, trial as u64);
            config
                .learners
                .iter()
                .enumerate()
                .map(|(li, spec)| {
                    let adv_rng = RngStream::derive(derive_seed(trial_seed, 0), adversary_seed);
                    let mut adversary = build_adversary(&config.adversary, &set, config.horizon, etas[li], adv_rng)?;
                    let mut learner = build_learner(spec.kind, &set, etas[li])?;
                    let ledger = run_trial(
                        &set,
                        learner.as_mut(),
                        &labels[li],
                        adversary.as_mut(),
                        config.horizon,
                        config.mode,
                        RngStream::derive(trial_seed, 1 + li as u64),
                        trial,
                        spec.kind.is_hedge_equivalent(),
                    )?;
                    Ok(TrialRun { trial, learner: labels[li].clone(), eta: etas[li], ledger })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let runs: Vec<TrialRun> = per_trial.into_iter().flatten().collect();

    let mut summary = BTreeMap::new();
    for label in &labels {
        let finals: Vec<f64> = runs.iter().filter(|r| &r.learner == label).map(|r| r.ledger.final_regret()).collect();
        summary.insert(label.clone(), LearnerSummary::from_values(&finals));
    }
    Ok(ExperimentOutput { runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::AdversarySpec;

    #[test]
    fn zero_adversary_has_zero_regret() {
        let set = DecisionSet::mset(6, 2).unwrap();
        let learners = vec!["hedge".parse().unwrap(), "omd-mset".parse().unwrap()];
        let adversary = AdversarySpec::new(AdversaryKind::Constant(vec![0.0; 6]));
        let mut config = ExperimentConfig::new(Some(set), learners, adversary, 20);
        config.trials = 2;
        let out = run_experiment(&config).unwrap();
        assert_eq!(out.runs.len(), 4);
        assert!(out.runs.iter().all(|r| r.ledger.rows().iter().all(|row| row.regret == 0.0)));
    }

    #[test]
    fn two_experts_constant_loss() {
        let set = DecisionSet::explicit(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let adversary = AdversarySpec::new(AdversaryKind::Constant(vec![1.0, 0.0]));
        let config = ExperimentConfig::new(Some(set), vec!["hedge".parse().unwrap()], adversary, 400);
        let out = run_experiment(&config).unwrap();
        let regret = out.runs[0].ledger.final_regret();
        // Expert 1 carries weight 1 / (1 + e^{η(t−1)}) in round t.
        let eta = (2f64.ln() / 400.0).sqrt();
        let oracle: f64 = (0..400).map(|s| 1.0 / (1.0 + (eta * s as f64).exp())).sum();
        assert!((regret - oracle).abs() < 1e-9, "{regret} vs {oracle}");
        assert!(regret <= 2f64.ln() / eta + eta * 400.0 / 8.0);
        // √(T ln 2) = 16.65 is exceeded by the half-round discretization term.
        assert!(regret > (400.0 * 2f64.ln()).sqrt() && regret < (400.0 * 2f64.ln()).sqrt() + 0.5);
    }

    #[test]
    fn csv_is_reproducible() {
        let set = DecisionSet::mset(8, 2).unwrap();
        let mut config = ExperimentConfig::new(
            Some(set),
            vec!["hedge".parse().unwrap(), "omd-mset".parse().unwrap()],
            AdversarySpec::new(AdversaryKind::MSetLb),
            30,
        );
        config.trials = 3;
        config.mode = Mode::Sampled;
        let a = run_experiment(&config).unwrap().csv_string().unwrap();
        let b = run_experiment(&config).unwrap().csv_string().unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("trial,t,learner,loss,cum_loss,cum_best,regret\n"));
        assert_eq!(a.lines().count(), 1 + 3 * 2 * 30);
    }

    #[test]
    fn learner_set_mismatch_is_rejected() {
        let set = DecisionSet::mset(8, 2).unwrap();
        assert!(build_learner(LearnerKind::HedgeDag, &set, 0.1).is_err());
    }

    #[test]
    fn infeasible_constant_reports_context() {
        let set = DecisionSet::mset(4, 2).unwrap();
        let adversary = AdversarySpec::new(AdversaryKind::Constant(vec![1.0, 1.0, 0.0, 0.0]));
        let config = ExperimentConfig::new(Some(set), vec!["hedge".parse().unwrap()], adversary, 5);
        match run_experiment(&config) {
            Err(Error::Context { trial: 0, round: 1, source, .. }) => {
                assert!(matches!(*source, Error::Validation(_)))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
