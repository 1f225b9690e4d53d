use crate::adversaries::{dk_sample, LossStream};
use crate::domain::{block_ranges, ln_binomial, log_sum_exp, Dag};
use crate::error::{Error, Result};
use crate::sampling::RngStream;

/// Blockwise-constant m-set losses: z ~ D_{d/m}, block j carries z[j]/m on
/// each of its m coordinates.
#[derive(Debug, Clone)]
pub struct MSetLbStream {
    d: usize,
    m: usize,
    rng: RngStream,
}

pub fn mset_lb_adversary(d: usize, m: usize, rng: RngStream) -> Result<MSetLbStream> {
    if m == 0 || !d.is_multiple_of(m) {
        return Err(Error::Precondition(format!("m-set block adversary needs m | d, got d={d}, m={m}")));
    }
    if d / m < 2 {
        return Err(Error::Precondition(format!("m-set block adversary needs d/m ≥ 2, got d={d}, m={m}")));
    }
    Ok(MSetLbStream { d, m, rng })
}

impl MSetLbStream {
    /// Spreads a D_K draw over the blocks.
    pub fn expand(&self, z: &[f64]) -> Vec<f64> {
        let inv_m = 1.0 / self.m as f64;
        z.iter().flat_map(|&zj| std::iter::repeat_n(zj * inv_m, self.m)).collect()
    }
}

impl LossStream for MSetLbStream {
    fn name(&self) -> &str {
        "mset-lb"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn next_loss(&mut self) -> Vec<f64> {
        let z = dk_sample(self.d / self.m, &mut self.rng).expect("K = d/m ≥ 2 checked at construction");
        self.expand(&z)
    }
}

/// The η-aware instance against Hedge on m-sets.
#[derive(Debug, Clone)]
pub struct HedgeKillerStream {
    d: usize,
    m: usize,
    /// `None` in the small-η regime; otherwise the switch time t₀.
    t0: Option<f64>,
    t: usize,
}

/// η₀ = √(m ln(d/m) / T), the boundary between the two regimes.
pub fn hedge_killer_threshold(d: usize, m: usize, t: usize) -> f64 {
    (m as f64 * (d as f64 / m as f64).ln() / t.max(1) as f64).sqrt()
}

pub fn hedge_killer(d: usize, m: usize, t: usize, eta: f64) -> Result<HedgeKillerStream> {
    if m < 1 || 2 * m > d {
        return Err(Error::Precondition(format!("hedge killer needs 1 ≤ m ≤ d/2, got d={d}, m={m}")));
    }
    let t0 = if eta <= hedge_killer_threshold(d, m, t) {
        None
    } else {
        let raw = (d as f64 / m as f64).ln() / eta;
        let snapped = raw.round();
        Some(if (raw - snapped).abs() <= 1e-9 { snapped } else { raw })
    };
    Ok(HedgeKillerStream { d, m, t0, t: 0 })
}

impl HedgeKillerStream {
    pub fn is_small_eta(&self) -> bool {
        self.t0.is_none()
    }

    pub fn t0(&self) -> Option<f64> {
        self.t0
    }

    /// First-coordinate loss of round t in the large-η regime.
    fn first_coordinate(t0: f64, t: usize) -> f64 {
        let floor = t0.floor();
        let ceil = t0.ceil();
        let tf = t as f64;
        if tf <= floor {
            -1.0
        } else if tf <= ceil {
            -(t0 - floor)
        } else if (t - ceil as usize) % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

impl LossStream for HedgeKillerStream {
    fn name(&self) -> &str {
        "hedge-killer"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn next_loss(&mut self) -> Vec<f64> {
        self.t += 1;
        let mut y = vec![0.0; self.d];
        match self.t0 {
            None => {
                let v = 1.0 / self.m as f64;
                y[..self.m].fill(v);
            }
            Some(t0) => y[0] = Self::first_coordinate(t0, self.t),
        }
        y
    }
}

/// Largest-remainder apportionment of `total` rounds proportionally to
/// `weights`; ties go to the earlier part.
pub fn phase_lengths(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut lengths: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = lengths.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        lengths[i] += 1;
    }
    lengths
}

/// Phase adversary on a multitask product set: phase i has length ∝ ln d_i
/// and places a D_{d_i} draw on block i.
#[derive(Debug, Clone)]
pub struct MultitaskStream {
    blocks: Vec<usize>,
    phase_ends: Vec<usize>,
    t: usize,
    rng: RngStream,
}

pub fn multitask_adversary(blocks: &[usize], t: usize, rng: RngStream) -> Result<MultitaskStream> {
    if blocks.is_empty() || blocks.iter().any(|&b| b < 2) {
        return Err(Error::Precondition("multitask adversary needs blocks of size ≥ 2".into()));
    }
    if t < blocks.len() {
        return Err(Error::Precondition(format!("multitask adversary needs T ≥ {} rounds", blocks.len())));
    }
    let weights: Vec<f64> = blocks.iter().map(|&b| (b as f64).ln()).collect();
    let mut end = 0;
    let phase_ends = phase_lengths(t, &weights)
        .into_iter()
        .map(|len| {
            end += len;
            end
        })
        .collect();
    Ok(MultitaskStream { blocks: blocks.to_vec(), phase_ends, t: 0, rng })
}

impl MultitaskStream {
    pub fn phase_lengths(&self) -> Vec<usize> {
        let mut prev = 0;
        self.phase_ends
            .iter()
            .map(|&end| {
                let len = end - prev;
                prev = end;
                len
            })
            .collect()
    }
}

impl LossStream for MultitaskStream {
    fn name(&self) -> &str {
        "multitask-phases"
    }

    fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn next_loss(&mut self) -> Vec<f64> {
        self.t += 1;
        let mut y = vec![0.0; self.dim()];
        if let Some(phase) = self.phase_ends.iter().position(|&end| self.t <= end) {
            let r = block_ranges(&self.blocks)[phase].clone();
            let z = dk_sample(self.blocks[phase], &mut self.rng).expect("blocks have ≥ 2 experts");
            y[r].copy_from_slice(&z);
        }
        y
    }
}

/// The layered DAG of the path lower bound: m layers, each a bundle of
/// `width` two-edge detours from v_{i−1} to v_i.
#[derive(Debug, Clone)]
pub struct DagHardInstance {
    pub dag: Dag,
    pub layers: usize,
    pub width: usize,
    pub horizon: usize,
    /// Edge indices of the first hop of every detour, per layer.
    pub first_hops: Vec<Vec<usize>>,
}

pub fn dag_hard_instance(d: usize, n_paths: u128, t: usize) -> Result<DagHardInstance> {
    let budget_ok = 16 <= 2 * d && (2 * d) as u128 <= n_paths && (d >= 128 || n_paths <= 1u128 << d);
    if !budget_ok {
        return Err(Error::Precondition(format!("need 16 ≤ 2d ≤ N ≤ 2^d, got d={d}, N={n_paths}")));
    }
    let d0 = 8 * (d / 8);
    let ln_n0 = (n_paths as f64).ln().min(d0 as f64 / 4.0 * std::f64::consts::LN_2);
    let mut layers = 1;
    for m in 1..=d0 / 8 {
        let ln_paths = m as f64 * (d0 as f64 / (2.0 * m as f64)).ln();
        if ln_paths <= ln_n0 + 1e-12 {
            layers = m;
        }
    }
    let width = d0 / (2 * layers);

    // v_i is vertex i; detour vertex v_i^j is m + 1 + (i − 1)·width + (j − 1).
    let mut edges = Vec::with_capacity(2 * layers * width);
    let mut first_hops = Vec::with_capacity(layers);
    for i in 1..=layers {
        let mid = |j: usize| layers + 1 + (i - 1) * width + j;
        first_hops.push((0..width).map(|j| edges.len() + j).collect());
        edges.extend((0..width).map(|j| (i - 1, mid(j))));
        edges.extend((0..width).map(|j| (mid(j), i)));
    }
    let dag = Dag::new(layers + 1 + layers * width, edges, 0, layers)?;
    Ok(DagHardInstance { dag, layers, width, horizon: t, first_hops })
}

impl DagHardInstance {
    pub fn stream(&self, rng: RngStream) -> DagLayeredStream {
        DagLayeredStream { instance: self.clone(), phase_len: self.horizon / self.layers, t: 0, rng }
    }
}

/// Phase i places a D_width draw on layer i's first hops; after m phases the
/// losses are zero.
#[derive(Debug, Clone)]
pub struct DagLayeredStream {
    instance: DagHardInstance,
    phase_len: usize,
    t: usize,
    rng: RngStream,
}

impl LossStream for DagLayeredStream {
    fn name(&self) -> &str {
        "dag-layered"
    }

    fn dim(&self) -> usize {
        self.instance.dag.n_edges()
    }

    fn next_loss(&mut self) -> Vec<f64> {
        self.t += 1;
        let mut y = vec![0.0; self.dim()];
        if self.phase_len == 0 {
            return y;
        }
        let phase = (self.t - 1) / self.phase_len;
        if phase < self.instance.layers {
            let z = dk_sample(self.instance.width, &mut self.rng).expect("width ≥ 2");
            for (&e, v) in self.instance.first_hops[phase].iter().zip(z) {
                y[e] = v;
            }
        }
        y
    }
}

/// Largest d handled by [`bad_set_mass`].
pub const BAD_SET_MAX_DIM: usize = 4096;

/// Hedge's probability mass on the bad set S = {x : at least ⌊m/20⌋ of the
/// first m coordinates are off} under the fixed loss 1[i ≤ m]/m, when every
/// first-m coordinate carries η-scaled cumulative loss `scaled_loss`.
///
/// Vertices with k ones among the first m coordinates number
/// C(m,k)·C(d−m,m−k) and each has weight exp(−scaled_loss·k).
pub fn bad_set_mass(d: usize, m: usize, scaled_loss: f64) -> Result<f64> {
    if d > BAD_SET_MAX_DIM {
        return Err(Error::CapExceeded { what: format!("bad-set mass for d = {d}"), cap: BAD_SET_MAX_DIM });
    }
    if m < 1 || 2 * m > d {
        return Err(Error::Precondition(format!("need 1 ≤ m ≤ d/2, got d={d}, m={m}")));
    }
    let threshold = m / 20;
    let log_mass = |k: usize| ln_binomial(m, k) + ln_binomial(d - m, m - k) - scaled_loss * k as f64;
    let total = log_sum_exp((0..=m).map(log_mass));
    let bad = log_sum_exp((0..=m).filter(|&k| m - k >= threshold).map(log_mass));
    Ok((bad - total).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{binomial, validate_loss, DecisionSet};

    #[test]
    fn mset_lb_blocks() {
        let stream = mset_lb_adversary(4, 2, RngStream::new(0)).unwrap();
        assert_eq!(stream.expand(&[1.0, 0.0]), vec![0.5, 0.5, 0.0, 0.0]);
        assert!(mset_lb_adversary(10, 3, RngStream::new(0)).is_err());
        let set = DecisionSet::mset(12, 3).unwrap();
        let mut stream = mset_lb_adversary(12, 3, RngStream::new(2)).unwrap();
        for _ in 0..1000 {
            assert!(validate_loss(&set, &stream.next_loss()).is_ok());
        }
    }

    #[test]
    fn hedge_killer_regimes() {
        let mut small = hedge_killer(4, 2, 100, 0.0).unwrap();
        assert!(small.is_small_eta());
        assert_eq!(small.next_loss(), vec![0.5, 0.5, 0.0, 0.0]);

        let mut large = hedge_killer(4, 2, 100, std::f64::consts::LN_2).unwrap();
        assert_eq!(large.t0(), Some(1.0));
        let firsts: Vec<f64> = (0..5).map(|_| large.next_loss()[0]).collect();
        assert_eq!(firsts, vec![-1.0, 1.0, -1.0, 1.0, -1.0]);

        let mut frac = hedge_killer(8, 2, 100, 4f64.ln() / 2.5).unwrap();
        let firsts: Vec<f64> = (0..5).map(|_| frac.next_loss()[0]).collect();
        assert!((firsts[2] + 0.5).abs() < 1e-9);
        assert_eq!(&firsts[..2], &[-1.0, -1.0]);
        assert_eq!(&firsts[3..], &[1.0, -1.0]);
    }

    #[test]
    fn multitask_phases() {
        assert_eq!(multitask_adversary(&[2, 2], 100, RngStream::new(0)).unwrap().phase_lengths(), vec![50, 50]);
        assert_eq!(multitask_adversary(&[2, 4], 90, RngStream::new(0)).unwrap().phase_lengths(), vec![30, 60]);
        assert_eq!(phase_lengths(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert!(multitask_adversary(&[], 10, RngStream::new(0)).is_err());
    }

    #[test]
    fn layered_instance_sizes() {
        let inst = dag_hard_instance(16, 32, 100).unwrap();
        assert_eq!((inst.layers, inst.width), (2, 4));
        assert_eq!(inst.dag.n_edges(), 16);
        assert_eq!(inst.dag.path_count(), 16);
        assert!(dag_hard_instance(7, 32, 100).is_err());
        assert!(dag_hard_instance(16, 20, 100).is_err());
        for (d, n) in [(8u32, 16u128), (20, 1000), (40, 1 << 20), (64, 1 << 40)] {
            let inst = dag_hard_instance(d as usize, n, 64).unwrap();
            assert!(inst.dag.n_edges() <= d as usize);
            assert!(inst.dag.path_count() <= n);
            assert_eq!(inst.dag.path_count(), (inst.width as u128).pow(inst.layers as u32));
        }
    }

    #[test]
    fn bad_set_examples() {
        // With no loss the mass is the fraction |S|/|X|; for m < 20 every
        // vertex is bad.
        assert!((bad_set_mass(10, 4, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let good = 1.0 / binomial(40, 20) as f64;
        assert!((bad_set_mass(40, 20, 0.0).unwrap() - (1.0 - good)).abs() < 1e-12);
        assert!(good <= (-(20.0 / 20.0) * 2f64.ln()).exp());
        // At the end of the small-learning-rate window the scaled loss is ln(d/m)/20.
        assert!(bad_set_mass(40, 20, 2f64.ln() / 20.0).unwrap() >= 0.5);
    }
}
