use crate::domain::{DecisionSet, Vertex};
use crate::error::{Error, Result};

/// Exact minimizer of the cumulative loss over X.
pub fn best_in_hindsight(set: &DecisionSet, losses: &[Vec<f64>]) -> Result<(Vertex, f64)> {
    if losses.is_empty() {
        return Err(Error::Precondition("best in hindsight needs at least one round".into()));
    }
    let mut cum = vec![0.0; set.dim()];
    for y in losses {
        for (c, v) in cum.iter_mut().zip(y) {
            *c += v;
        }
    }
    Ok(set.min_vertex(&cum))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretRow {
    pub t: usize,
    pub loss: f64,
    pub cum_loss: f64,
    pub cum_best: f64,
    pub regret: f64,
}

/// Per-round regret record. The comparator is recomputed at every horizon.
#[derive(Debug, Clone, Default)]
pub struct RegretLedger {
    rows: Vec<RegretRow>,
    cum_y: Vec<f64>,
}

impl RegretLedger {
    pub fn new(dim: usize) -> Self {
        RegretLedger { rows: Vec::new(), cum_y: vec![0.0; dim] }
    }

    /// Records a round where the learner paid `loss` against loss vector `y`.
    pub fn record(&mut self, set: &DecisionSet, loss: f64, y: &[f64]) -> RegretRow {
        for (c, v) in self.cum_y.iter_mut().zip(y) {
            *c += v;
        }
        let cum_loss = self.rows.last().map_or(0.0, |r| r.cum_loss) + loss;
        let (_, cum_best) = set.min_vertex(&self.cum_y);
        let row = RegretRow { t: self.rows.len() + 1, loss, cum_loss, cum_best, regret: cum_loss - cum_best };
        self.rows.push(row);
        row
    }

    pub fn rows(&self) -> &[RegretRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret)
    }
}

/// Regret at horizon t (1-based).
pub fn regret_of(ledger: &RegretLedger, t: usize) -> Result<f64> {
    if t == 0 || t > ledger.len() {
        return Err(Error::Range { t, len: ledger.len() });
    }
    Ok(ledger.rows()[t - 1].regret)
}
