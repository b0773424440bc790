//! Optimization of the measurement-based initialization (intermediate abort
//! thresholds over a parity-readout trace) and of the spin-readout
//! parameters (repetition count and count threshold).

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::dd::TimeTrace;
use crate::error::{Error, Result};
use crate::rng::{derived_seed, rng_from_seed};

/// One intermediate abort check: after `position` parity measurements the
/// accumulated counts must reach `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdCheck {
    /// Measurement index Θ at which the check is evaluated.
    pub position: u32,
    /// Minimum accumulated counts Λ to continue.
    pub threshold: u32,
}

/// Initialization scheme: ordered intermediate checks followed by the final
/// count threshold over the full readout block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdScheme {
    pub checks: Vec<ThresholdCheck>,
    pub total_readouts: u32,
    pub final_threshold: u32,
}

impl Default for ThresholdScheme {
    fn default() -> Self {
        ThresholdScheme { checks: Vec::new(), total_readouts: 50, final_threshold: 15 }
    }
}

impl ThresholdScheme {
    pub fn with_single_check(position: u32, threshold: u32) -> Self {
        ThresholdScheme { checks: alloc::vec![ThresholdCheck { position, threshold }], ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let mut last = 0;
        for ch in &self.checks {
            if ch.position == 0 || ch.position > self.total_readouts {
                return Err(Error::InvalidArgument(
                    "check position must lie within the readout block".into(),
                ));
            }
            if ch.position < last {
                return Err(Error::InvalidArgument("checks must be ordered".into()));
            }
            if ch.threshold > ch.position {
                return Err(Error::InvalidArgument(
                    "check threshold cannot exceed its position".into(),
                ));
            }
            last = ch.position;
        }
        if self.final_threshold > self.total_readouts {
            return Err(Error::InvalidArgument("final threshold exceeds the block".into()));
        }
        Ok(())
    }
}

/// Monte-Carlo statistics of the initialization time, in measurement units.
#[derive(Debug, Clone, Copy)]
pub struct InitializationStats {
    pub mean_measurements: f64,
    pub std_measurements: f64,
    pub n_successes: usize,
}

impl InitializationStats {
    /// Wall time per success for a given per-measurement duration.
    pub fn mean_seconds(&self, seconds_per_measurement: f64) -> f64 {
        self.mean_measurements * seconds_per_measurement
    }
}

/// Emulates the initialization procedure on a recorded trace: start at a
/// random position, consume parity outcomes sequentially, abort and jump to
/// a new random position when an intermediate check fails, succeed when the
/// full block reaches the final threshold. The trace is read circularly;
/// `restart_overhead_measurements` is added per abort or failed block.
pub fn sample_initialization_time(
    trace: &TimeTrace,
    scheme: &ThresholdScheme,
    n_successes: usize,
    seed: u64,
    restart_overhead_measurements: f64,
) -> Result<InitializationStats> {
    scheme.validate()?;
    let clicks = &trace.clicks;
    if clicks.len() < scheme.total_readouts as usize {
        return Err(Error::InsufficientData);
    }
    let mut rng = rng_from_seed(seed);
    let mut per_success: Vec<f64> = Vec::with_capacity(n_successes);
    let mut current = 0.0f64;
    while per_success.len() < n_successes {
        let start = rng.random_range(0..clicks.len());
        let mut counts = 0u32;
        let mut consumed = 0u32;
        let mut check_idx = 0usize;
        let mut aborted = false;
        for j in 0..scheme.total_readouts {
            counts += u32::from(clicks[(start + j as usize) % clicks.len()]);
            consumed += 1;
            while check_idx < scheme.checks.len()
                && scheme.checks[check_idx].position == j + 1
            {
                if counts < scheme.checks[check_idx].threshold {
                    aborted = true;
                }
                check_idx += 1;
            }
            if aborted {
                break;
            }
        }
        current += f64::from(consumed);
        if !aborted && counts >= scheme.final_threshold {
            per_success.push(current);
            current = 0.0;
        } else {
            current += restart_overhead_measurements;
        }
    }
    let n = per_success.len() as f64;
    let mean = per_success.iter().sum::<f64>() / n;
    let var = per_success.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    Ok(InitializationStats {
        mean_measurements: mean,
        std_measurements: var.sqrt(),
        n_successes: per_success.len(),
    })
}

/// One cell of the (Θ, Λ) optimization surface.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdCell {
    pub position: u32,
    pub threshold: u32,
    pub mean_measurements: f64,
}

/// Grid search over single-check schemes. Returns the no-check baseline,
/// the full surface, and the best scheme (ties broken toward the smaller
/// check position, then the smaller threshold).
pub fn optimize_thresholds(
    trace: &TimeTrace,
    check_positions: &[u32],
    lambda_max: u32,
    n_successes: usize,
    seed: u64,
    restart_overhead_measurements: f64,
) -> Result<(f64, Vec<ThresholdCell>, ThresholdScheme)> {
    let baseline = sample_initialization_time(
        trace,
        &ThresholdScheme::default(),
        n_successes,
        derived_seed(seed, u64::MAX),
        restart_overhead_measurements,
    )?;
    let mut cells = Vec::new();
    for &theta in check_positions {
        for lambda in 0..=lambda_max.min(theta) {
            let scheme = ThresholdScheme::with_single_check(theta, lambda);
            let cell_seed = derived_seed(seed, u64::from(theta) << 16 | u64::from(lambda));
            let stats = sample_initialization_time(
                trace,
                &scheme,
                n_successes,
                cell_seed,
                restart_overhead_measurements,
            )?;
            cells.push(ThresholdCell {
                position: theta,
                threshold: lambda,
                mean_measurements: stats.mean_measurements,
            });
        }
    }
    let best = cells
        .iter()
        .min_by(|a, b| {
            a.mean_measurements
                .partial_cmp(&b.mean_measurements)
                .unwrap()
                .then(a.position.cmp(&b.position))
                .then(a.threshold.cmp(&b.threshold))
        })
        .expect("nonempty grid");
    Ok((
        baseline.mean_measurements,
        cells.clone(),
        ThresholdScheme::with_single_check(best.position, best.threshold),
    ))
}

/// Binomial per-state count model of the spin readout. Each of the `n`
/// readouts clicks with a state-dependent probability; an optional
/// per-readout contrast decay pulls both probabilities toward their
/// midpoint, modeling pseudo-spin dephasing during the readout block.
#[derive(Debug, Clone, Copy)]
pub struct BinomialReadoutModel {
    pub p_click_a: f64,
    pub p_click_b: f64,
    /// Exponential contrast decay rate per readout (0 = none).
    pub contrast_decay: f64,
}

impl BinomialReadoutModel {
    fn click_prob(&self, state_a: bool, k: u32) -> f64 {
        let p0 = if state_a { self.p_click_a } else { self.p_click_b };
        let mid = 0.5 * (self.p_click_a + self.p_click_b);
        mid + (p0 - mid) * (-self.contrast_decay * f64::from(k)).exp()
    }

    /// Exact count distribution over `n` readouts for the given state
    /// (Poisson-binomial convolution).
    pub fn count_distribution(&self, state_a: bool, n: u32) -> Vec<f64> {
        let mut dist = alloc::vec![0.0f64; n as usize + 1];
        dist[0] = 1.0;
        for k in 0..n {
            let p = self.click_prob(state_a, k);
            for m in (1..=(k as usize + 1)).rev() {
                dist[m] = dist[m] * (1.0 - p) + dist[m - 1] * p;
            }
            dist[0] *= 1.0 - p;
        }
        dist
    }

    fn sample_counts<R: Rng>(&self, state_a: bool, n: u32, rng: &mut R) -> u32 {
        let mut counts = 0;
        for k in 0..n {
            if rng.random::<f64>() < self.click_prob(state_a, k) {
                counts += 1;
            }
        }
        counts
    }
}

/// Combined initialization and readout fidelity
/// F = ½ P(N ≥ T | a) + ½ P(N < T | b), evaluated exactly from the count
/// model.
pub fn readout_fidelity_exact(model: &BinomialReadoutModel, n: u32, threshold: u32) -> f64 {
    let da = model.count_distribution(true, n);
    let db = model.count_distribution(false, n);
    let p_a: f64 = da.iter().skip(threshold as usize).sum();
    let p_b: f64 = db.iter().take(threshold as usize).sum();
    0.5 * p_a + 0.5 * p_b
}

/// Monte-Carlo estimate of the same fidelity.
pub fn readout_fidelity_mc(
    model: &BinomialReadoutModel,
    n: u32,
    threshold: u32,
    n_shots: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut hits = 0usize;
    for i in 0..n_shots {
        let state_a = i % 2 == 0;
        let counts = model.sample_counts(state_a, n, &mut rng);
        let assigned_a = counts >= threshold;
        if assigned_a == state_a {
            hits += 1;
        }
    }
    hits as f64 / n_shots as f64
}

/// Fidelity from recorded (initialization counts, readout counts) pairs:
/// conditioning on strict initialization thresholds N(k) > `n_a` for state a
/// and N(k) < `n_b` for state b.
pub fn readout_fidelity_empirical(
    records: &[(u32, u32)],
    threshold: u32,
    n_a: u32,
    n_b: u32,
) -> Result<f64> {
    let a: Vec<u32> = records.iter().filter(|(i, _)| *i > n_a).map(|(_, r)| *r).collect();
    let b: Vec<u32> = records.iter().filter(|(i, _)| *i < n_b).map(|(_, r)| *r).collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedFidelity);
    }
    let p_a = a.iter().filter(|&&r| r >= threshold).count() as f64 / a.len() as f64;
    let p_b = b.iter().filter(|&&r| r < threshold).count() as f64 / b.len() as f64;
    Ok(0.5 * p_a + 0.5 * p_b)
}

/// Optimal readout setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutOptimum {
    pub n: u32,
    pub threshold: u32,
    pub fidelity: f64,
}

/// Grid argmax of the exact fidelity over readout counts and thresholds;
/// also returns the per-n best-threshold curve. Ties break toward fewer
/// readouts, then the smaller threshold.
pub fn optimize_readout(
    model: &BinomialReadoutModel,
    n_max: u32,
) -> (ReadoutOptimum, Vec<ReadoutOptimum>) {
    let mut curve = Vec::new();
    let mut best = ReadoutOptimum { n: 0, threshold: 0, fidelity: -1.0 };
    for n in 1..=n_max {
        let mut best_n = ReadoutOptimum { n, threshold: 1, fidelity: -1.0 };
        for t in 1..=n {
            let f = readout_fidelity_exact(model, n, t);
            if f > best_n.fidelity + 1e-15 {
                best_n = ReadoutOptimum { n, threshold: t, fidelity: f };
            }
        }
        curve.push(best_n);
        if best_n.fidelity > best.fidelity + 1e-15 {
            best = best_n;
        }
    }
    (best, curve)
}
