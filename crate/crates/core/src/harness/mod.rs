//! Experiment runner, iterate-equivalence certifier, property suite and
//! lower-bound demos.

pub mod config;
pub mod demo;
pub mod equivalence;
pub mod gen;
pub mod props;
pub mod runner;

pub use config::{
    parse_set_spec, AdversaryKind, AdversarySpec, ExperimentConfig, LearnerKind, LearnerSpec, Mode,
};
pub use demo::{lb_demo, DemoReport, DemoRow, DEMO_IDS};
pub use equivalence::{check_iterate_equivalence, EquivalenceReport, DEFAULT_EQUIVALENCE_TOL};
pub use props::{run_property_suite, PropertyHooks, PropertyOutcome, PropertyReport, SCOPES};
pub use runner::{
    build_adversary, build_learner, experiment_set, resolve_eta, run_experiment, run_trial, ExperimentOutput,
    LearnerSummary, TrialRun,
};
