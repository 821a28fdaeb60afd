use super::{DebtRankError, DistressTrigger, EconomicValueVector, PropagationWeights, Result};

/// Full trajectory of one DebtRank run. Index 0 of every trajectory is the
/// initial condition (t = 1); the last index is the convergence step T.
#[derive(Debug, Clone, PartialEq)]
pub struct DebtRankRun {
    pub seed_node: String,
    pub trigger: DistressTrigger,
    pub h: Vec<Vec<f64>>,
    pub distressed: Vec<Vec<bool>>,
    pub inactive: Vec<Vec<bool>>,
    /// Convergence step T (number of recorded states).
    pub steps: usize,
    pub dr: f64,
}

impl DebtRankRun {
    pub fn final_distress(&self) -> &[f64] {
        self.h
            .last()
            .expect("a run records at least its initial state")
    }
}

/// Reusable buffers for allocation-free DebtRank scoring in sweeps.
#[derive(Debug, Clone, Default)]
pub struct DebtRankWorkspace {
    h: Vec<f64>,
    next_h: Vec<f64>,
    distressed: Vec<bool>,
    inactive: Vec<bool>,
}

impl DebtRankWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            h: vec![0.0; n],
            next_h: vec![0.0; n],
            distressed: vec![false; n],
            inactive: vec![false; n],
        }
    }

    fn reset(&mut self, n: usize, seed: usize) {
        for buf in [&mut self.h, &mut self.next_h] {
            buf.clear();
            buf.resize(n, 0.0);
        }
        for buf in [&mut self.distressed, &mut self.inactive] {
            buf.clear();
            buf.resize(n, false);
        }
        self.h[seed] = 1.0;
        self.distressed[seed] = true;
    }

    /// One step of the recursion:
    /// `H(t) = min{H(t-1) + W (H(t-1) ∘ D(t-1)), 1}`,
    /// `I(t) = min{I(t-1) + D(t-1), 1}`,
    /// `d_i(t) = 1` iff the trigger fires on `h_i(t)` and `i` has never been
    /// distressed before. Returns whether any node is distressed at `t`.
    fn step(&mut self, w: &[f64], trigger: DistressTrigger) -> bool {
        let n = self.h.len();
        for i in 0..n {
            let row = &w[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                if self.distressed[j] {
                    acc += row[j] * self.h[j];
                }
            }
            self.next_h[i] = (self.h[i] + acc).min(1.0);
        }
        std::mem::swap(&mut self.h, &mut self.next_h);
        let mut any = false;
        for i in 0..n {
            self.inactive[i] |= self.distressed[i];
            let d = !self.inactive[i] && trigger.fires(self.h[i]);
            self.distressed[i] = d;
            any |= d;
        }
        any
    }

    /// DebtRank of `seed` without recording the trajectory.
    pub fn score(
        &mut self,
        weights: &PropagationWeights,
        v: &EconomicValueVector,
        seed: usize,
        trigger: DistressTrigger,
    ) -> f64 {
        let n = weights.n();
        self.reset(n, seed);
        while self.step(weights.matrix(), trigger) {}
        dr_from(&self.h, seed, &v.v)
    }
}

/// `DR = Σ_j (h_j(T) - h_j(1)) v_j` with `h(1)` the seed indicator.
fn dr_from(h_final: &[f64], seed: usize, v: &[f64]) -> f64 {
    h_final
        .iter()
        .zip(v)
        .enumerate()
        .map(|(j, (&h, &vj))| (h - if j == seed { 1.0 } else { 0.0 }) * vj)
        .sum()
}

fn check_lengths(weights: &PropagationWeights, v: &EconomicValueVector) -> Result<()> {
    if v.v.len() != weights.n() {
        return Err(DebtRankError::LengthMismatch {
            expected: weights.n(),
            actual: v.v.len(),
        });
    }
    Ok(())
}

/// Runs DebtRank from a single defaulted seed and records the trajectory.
pub fn run_debtrank(
    weights: &PropagationWeights,
    v: &EconomicValueVector,
    seed_node: &str,
    trigger: DistressTrigger,
) -> Result<DebtRankRun> {
    let seed = weights
        .nodes()
        .position(seed_node)
        .ok_or_else(|| DebtRankError::UnknownSeed(seed_node.to_string()))?;
    run_debtrank_at(weights, v, seed, trigger)
}

pub fn run_debtrank_at(
    weights: &PropagationWeights,
    v: &EconomicValueVector,
    seed: usize,
    trigger: DistressTrigger,
) -> Result<DebtRankRun> {
    check_lengths(weights, v)?;
    let n = weights.n();
    if seed >= n {
        return Err(DebtRankError::UnknownSeed(seed.to_string()));
    }
    let mut ws = DebtRankWorkspace::new(n);
    ws.reset(n, seed);
    let mut h = vec![ws.h.clone()];
    let mut distressed = vec![ws.distressed.clone()];
    let mut inactive = vec![ws.inactive.clone()];
    loop {
        let any = ws.step(weights.matrix(), trigger);
        h.push(ws.h.clone());
        distressed.push(ws.distressed.clone());
        inactive.push(ws.inactive.clone());
        if !any {
            break;
        }
    }
    let dr = dr_from(&ws.h, seed, &v.v);
    Ok(DebtRankRun {
        seed_node: weights.nodes().id(seed).to_string(),
        trigger,
        steps: h.len(),
        h,
        distressed,
        inactive,
        dr,
    })
}
