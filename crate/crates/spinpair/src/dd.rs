//! Dynamical-decoupling simulation on the NV conditioned on the P1-pair
//! state: coherence signals, τ-spectra with photon statistics, readout
//! calibration, synthetic repetitive-readout time traces, and the
//! resonant-configuration bookkeeping.
//!
//! The NV enters through the two NV-conditional pair Hamiltonians (m_s = 0
//! and m_s = −1 branches); one decoupling unit is the pulse block
//! (τ, π, 2τ, π, τ).

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_composite_hamiltonian, dipolar_tensor, p1_embedded_operators, NvCoupling, Subsystem,
};
use crate::linalg::{eigh_sorted, eye, kron, propagator, CMatrix, CVector, HermitianOperator, C64};
use crate::rng::rng_from_seed;
use crate::linalg::kron_vec;
use crate::spectro::{extract_flip_flop, nv_system, resonant_tau, single_p1_system, SingleP1System};
use crate::spin::{
    DefectGeometry, ElectronSpin, JahnTellerAxis, JtAxis, MagneticField, NitrogenProjection,
    P1State, SphericalVector,
};

/// A decoupling sequence: `n_units` repetitions of (τ, π, 2τ, π, τ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdSequence {
    /// Half the interpulse spacing, µs; pulses are 2τ apart.
    pub tau_us: f64,
    pub n_units: u32,
}

impl DdSequence {
    pub fn new(tau_us: f64, n_units: u32) -> Result<Self> {
        if !(tau_us > 0.0) || n_units == 0 {
            return Err(Error::InvalidArgument("sequence requires tau > 0 and n_units >= 1".into()));
        }
        Ok(DdSequence { tau_us, n_units })
    }

    /// Total evolution time, µs.
    pub fn duration_us(&self) -> f64 {
        4.0 * self.tau_us * f64::from(self.n_units)
    }
}

/// Photon statistics of the repetitive NV readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonModel {
    /// Probability of a click when the NV is in m_s = 0.
    pub p_click_ms0: f64,
    /// Probability of no click when the NV is in m_s = −1.
    pub p_noclick_ms1: f64,
    /// Readout repetitions per point.
    pub repetitions: u32,
}

impl Default for PhotonModel {
    fn default() -> Self {
        PhotonModel { p_click_ms0: 0.70, p_noclick_ms1: 0.99, repetitions: 200 }
    }
}

impl PhotonModel {
    /// Click probability for a given probability of ending in m_s = 0.
    pub fn click_prob(&self, p_ms0: f64) -> f64 {
        p_ms0 * self.p_click_ms0 + (1.0 - p_ms0) * (1.0 - self.p_noclick_ms1)
    }

    /// Expected counts over `repetitions` readouts.
    pub fn expected_counts(&self, p_ms0: f64) -> f64 {
        f64::from(self.repetitions) * self.click_prob(p_ms0)
    }

    /// Binomial shot-noise draw of the counts.
    pub fn sample_counts<R: Rng>(&self, p_ms0: f64, rng: &mut R) -> u32 {
        let p = self.click_prob(p_ms0).clamp(0.0, 1.0);
        let mut n = 0;
        for _ in 0..self.repetitions {
            if rng.random::<f64>() < p {
                n += 1;
            }
        }
        n
    }
}

/// The two NV-conditional pair Hamiltonians (dim 36): the bare pair for
/// m_s = 0 and the pair with the m_s = −1 dephasing shifts from both NV-P1
/// couplings.
pub fn pair_branch_hamiltonians(
    b: &MagneticField,
    geometry: &DefectGeometry,
    jt1: &JahnTellerAxis,
    jt2: &JahnTellerAxis,
    c: &PhysicalConstants,
) -> Result<(HermitianOperator, HermitianOperator)> {
    let h_pair = build_composite_hamiltonian(
        b,
        geometry,
        jt1,
        jt2,
        Subsystem::P1Pair,
        NvCoupling::Full,
        c,
    )?;
    let nv = nv_system(b, c)?;
    let s_ops = crate::spin::spin_operators(1.0).expect("spin 1");
    let (_, j_emb) = p1_embedded_operators();
    let id6 = eye(6);
    let j1: [CMatrix; 3] = core::array::from_fn(|k| kron(&j_emb[k], &id6));
    let j2: [CMatrix; 3] = core::array::from_fn(|k| kron(&id6, &j_emb[k]));

    // ⟨S_j⟩ in the two NV eigenstates
    let shift_for = |m_s: i8| -> Result<CMatrix> {
        let v = nv.vector(m_s);
        let mut s_exp = [0.0f64; 3];
        for (j, op) in s_ops.iter().enumerate() {
            s_exp[j] = v.dotc(&(op * &v)).re;
        }
        let mut w = CMatrix::zeros(36, 36);
        for (r_vec, j_ops) in [
            (geometry.r12.to_cartesian(), &j1),
            (geometry.r13_cartesian(), &j2),
        ] {
            let ct = dipolar_tensor(&r_vec, c.dipolar_prefactor)?;
            for k in 0..3 {
                let coef: f64 = (0..3).map(|j| ct[(j, k)] * s_exp[j]).sum();
                w += j_ops[k].scale(coef);
            }
        }
        Ok(w)
    };

    let h0 = HermitianOperator::from_parts(h_pair.matrix() + shift_for(0)?);
    let h1 = HermitianOperator::from_parts(h_pair.matrix() + shift_for(-1)?);
    Ok((h0, h1))
}

/// Precomputed branch eigendecompositions for fast evaluation over many
/// sequences.
pub struct BranchPropagators {
    evals0: nalgebra::DVector<f64>,
    evecs0: CMatrix,
    evals1: nalgebra::DVector<f64>,
    evecs1: CMatrix,
}

fn matrix_power(m: &CMatrix, n: u32) -> CMatrix {
    let dim = m.nrows();
    let mut result = eye(dim);
    let mut base = m.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

impl BranchPropagators {
    pub fn new(h_ms0: &HermitianOperator, h_ms1: &HermitianOperator) -> Self {
        let (evals0, evecs0) = h_ms0.eigh();
        let (evals1, evecs1) = h_ms1.eigh();
        BranchPropagators { evals0, evecs0, evals1, evecs1 }
    }

    pub fn dim(&self) -> usize {
        self.evals0.len()
    }

    /// Eigenvalues and eigenvectors of the m_s = 0 branch.
    pub fn ms0_eigensystem(&self) -> (&nalgebra::DVector<f64>, &CMatrix) {
        (&self.evals0, &self.evecs0)
    }

    /// W₁† W₀ for the sequence: the operator whose expectation value on the
    /// initial state gives the NV coherence.
    pub fn echo_operator(&self, seq: &DdSequence) -> CMatrix {
        let e0t = propagator(&self.evals0, &self.evecs0, seq.tau_us);
        let e0tt = propagator(&self.evals0, &self.evecs0, 2.0 * seq.tau_us);
        let e1t = propagator(&self.evals1, &self.evecs1, seq.tau_us);
        let e1tt = propagator(&self.evals1, &self.evecs1, 2.0 * seq.tau_us);
        let b0 = &e0t * &e1tt * &e0t;
        let b1 = &e1t * &e0tt * &e1t;
        let w0 = matrix_power(&b0, seq.n_units);
        let w1 = matrix_power(&b1, seq.n_units);
        w1.adjoint() * w0
    }

    /// Readout fidelity (1 + Re⟨ψ|W₁†W₀|ψ⟩)/2 for one initial state.
    pub fn fidelity(&self, psi: &CVector, seq: &DdSequence) -> Result<f64> {
        if (psi.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("initial state must be normalized".into()));
        }
        let m = self.echo_operator(seq);
        Ok(0.5 * (1.0 + psi.dotc(&(&m * psi)).re))
    }

    /// Fidelities of every m_s = 0 branch eigenstate under the sequence.
    pub fn eigenstate_fidelities(&self, seq: &DdSequence) -> Vec<f64> {
        let m = self.echo_operator(seq);
        let folded = self.evecs0.adjoint() * m * &self.evecs0;
        (0..self.dim()).map(|k| 0.5 * (1.0 + folded[(k, k)].re)).collect()
    }
}

/// NV coherence signal after a decoupling sequence for a pair prepared in
/// `initial_state`: (1 + Re⟨ψ₀(T)|ψ₁(T)⟩)/2 with the two branch orderings.
pub fn nv_coherence_signal(
    h_ms0: &HermitianOperator,
    h_ms1: &HermitianOperator,
    initial_state: &CVector,
    seq: &DdSequence,
) -> Result<f64> {
    BranchPropagators::new(h_ms0, h_ms1).fidelity(initial_state, seq)
}

/// One row of a simulated decoupling spectrum.
#[derive(Debug, Clone)]
pub struct DdSpectrumRow {
    pub tau_us: f64,
    /// Mean sampled counts over all configurations, normalized by the
    /// repetition count.
    pub mean_signal: f64,
    /// Per-axis minimum eigenstate fidelity.
    pub min_fidelity: [f64; 4],
    /// Per-axis mean expected counts.
    pub mean_counts: [f64; 4],
}

/// Simulates the decoupling spectrum over a τ grid: for each equal-axis
/// pair configuration every pair eigenstate is propagated, fidelities are
/// converted to counts through the photon model with binomial shot noise,
/// and all configurations are mixed with equal probability.
pub fn dd_spectrum(
    b: &MagneticField,
    geometry: &DefectGeometry,
    tau_grid: &[f64],
    n_units: u32,
    photon: &PhotonModel,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<Vec<DdSpectrumRow>> {
    let mut branches = Vec::new();
    for axis in JtAxis::ALL {
        let jt = JahnTellerAxis::new(axis);
        let (h0, h1) = pair_branch_hamiltonians(b, geometry, &jt, &jt, c)?;
        branches.push(BranchPropagators::new(&h0, &h1));
    }
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let seq = DdSequence::new(tau, n_units)?;
        let mut min_fid = [1.0f64; 4];
        let mut mean_counts = [0.0f64; 4];
        let mut signal_sum = 0.0;
        let mut n_cfg = 0usize;
        for (a, br) in branches.iter().enumerate() {
            let fids = br.eigenstate_fidelities(&seq);
            for &f in &fids {
                min_fid[a] = min_fid[a].min(f);
                mean_counts[a] += photon.expected_counts(f);
                signal_sum +=
                    f64::from(photon.sample_counts(f, &mut rng)) / f64::from(photon.repetitions);
                n_cfg += 1;
            }
            mean_counts[a] /= 36.0;
        }
        rows.push(DdSpectrumRow {
            tau_us: tau,
            mean_signal: signal_sum / n_cfg as f64,
            min_fidelity: min_fid,
            mean_counts,
        });
    }
    Ok(rows)
}

/// Conditional phase accumulated per decoupling unit by the pseudo-spin at
/// its resonance, and the unit counts that calibrate the spin (±π/2) and
/// parity (±π) readouts.
pub fn readout_calibration(x_khz: f64, z_khz: f64) -> Result<(u32, u32)> {
    if z_khz == 0.0 {
        return Err(Error::NoConditionalPhase);
    }
    let tau_us = resonant_tau(x_khz, z_khz)?;
    let n_spin = smallest_units_for_phase(x_khz, z_khz, tau_us, core::f64::consts::FRAC_PI_2)?;
    let n_parity = smallest_units_for_phase(x_khz, z_khz, tau_us, core::f64::consts::PI)?;
    Ok((n_spin, n_parity))
}

/// Conditional phase arg⟨⇑|W₁†W₀|⇑⟩ of the pseudo-spin after `n` units.
pub fn conditional_phase(x_khz: f64, z_khz: f64, tau_us: f64, n_units: u32) -> f64 {
    // pseudo-spin branch Hamiltonians in MHz: H0 = X Sx, H1 = X Sx - Z Sz
    let x = x_khz * 1e-3;
    let z = z_khz * 1e-3;
    let mut h0 = CMatrix::zeros(2, 2);
    h0[(0, 1)] = C64::new(0.5 * x, 0.0);
    h0[(1, 0)] = C64::new(0.5 * x, 0.0);
    let mut h1 = h0.clone();
    h1[(0, 0)] = C64::new(-0.5 * z, 0.0);
    h1[(1, 1)] = C64::new(0.5 * z, 0.0);
    let (w0, v0) = eigh_sorted(&h0);
    let (w1, v1) = eigh_sorted(&h1);
    let e0t = propagator(&w0, &v0, tau_us);
    let e0tt = propagator(&w0, &v0, 2.0 * tau_us);
    let e1t = propagator(&w1, &v1, tau_us);
    let e1tt = propagator(&w1, &v1, 2.0 * tau_us);
    let b0 = &e0t * &e1tt * &e0t;
    let b1 = &e1t * &e0tt * &e1t;
    let m = matrix_power(&b1, n_units).adjoint() * matrix_power(&b0, n_units);
    m[(0, 0)].arg()
}

fn smallest_units_for_phase(x_khz: f64, z_khz: f64, tau_us: f64, target: f64) -> Result<u32> {
    let per_unit = conditional_phase(x_khz, z_khz, tau_us, 1);
    if per_unit.abs() < 1e-12 {
        return Err(Error::NoConditionalPhase);
    }
    let n_max = (1.5 * target / per_unit.abs()).ceil() as u32 + 2;
    for n in 1..=n_max {
        let phi = conditional_phase(x_khz, z_khz, tau_us, n).abs();
        if (phi - target).abs() <= 0.05 * target {
            return Ok(n);
        }
    }
    Err(Error::NoConditionalPhase)
}

/// Generative model of the repetitive parity-readout time trace.
#[derive(Debug, Clone, Copy)]
pub struct TimeTraceModel {
    /// Prior probability that the hidden pair configuration matches the
    /// probed resonance (uniform over Jahn-Teller, nitrogen, and electron
    /// states gives 2/576).
    pub signal_prior: f64,
    /// Probability per measurement of a scramble event that redraws the
    /// hidden configuration from the prior.
    pub scramble_prob: f64,
    /// Measurements per display bin.
    pub bin_size: u32,
    /// Probability of ending in m_s = 0 while the configuration is resonant
    /// (0.5 for an equal mixture of the two pseudo-spin phases).
    pub signal_p_ms0: f64,
    pub photon: PhotonModel,
}

impl Default for TimeTraceModel {
    fn default() -> Self {
        TimeTraceModel {
            signal_prior: 2.0 / 576.0,
            scramble_prob: 5e-4,
            bin_size: 200,
            signal_p_ms0: 0.5,
            photon: PhotonModel::default(),
        }
    }
}

impl TimeTraceModel {
    pub fn p_click_signal(&self) -> f64 {
        self.photon.click_prob(self.signal_p_ms0)
    }

    pub fn p_click_background(&self) -> f64 {
        self.photon.click_prob(0.0)
    }
}

/// Per-measurement click record of a synthetic trace.
#[derive(Debug, Clone)]
pub struct TimeTrace {
    pub clicks: Vec<u8>,
    pub bin_size: u32,
}

impl TimeTrace {
    /// Per-bin click counts.
    pub fn bin_counts(&self) -> Vec<u32> {
        self.clicks
            .chunks(self.bin_size as usize)
            .map(|c| c.iter().map(|&x| u32::from(x)).sum())
            .collect()
    }

    /// Fraction of bins with counts above `threshold`.
    pub fn high_bin_fraction(&self, threshold: u32) -> f64 {
        let bins = self.bin_counts();
        if bins.is_empty() {
            return 0.0;
        }
        bins.iter().filter(|&&n| n > threshold).count() as f64 / bins.len() as f64
    }
}

/// Synthesizes a stochastic measurement trace: the hidden configuration is
/// drawn from the prior, persists between scramble events, and produces
/// clicks at the signal or background rate.
pub fn synthesize_time_trace(
    model: &TimeTraceModel,
    n_measurements: usize,
    seed: u64,
    initial_resonant: Option<bool>,
) -> TimeTrace {
    let mut rng = rng_from_seed(seed);
    let p_sig = model.p_click_signal();
    let p_bg = model.p_click_background();
    let mut resonant =
        initial_resonant.unwrap_or_else(|| rng.random::<f64>() < model.signal_prior);
    let mut clicks = Vec::with_capacity(n_measurements);
    for _ in 0..n_measurements {
        if model.scramble_prob > 0.0 && rng.random::<f64>() < model.scramble_prob {
            resonant = rng.random::<f64>() < model.signal_prior;
        }
        let p = if resonant { p_sig } else { p_bg };
        clicks.push(u8::from(rng.random::<f64>() < p));
    }
    TimeTrace { clicks, bin_size: model.bin_size }
}

/// A pair configuration in the resonance bookkeeping: the state of each P1
/// center, including its Jahn-Teller axis.
pub type PairConfiguration = ((JtAxis, P1State), (JtAxis, P1State));

/// Enumerates all 576 ordered single-P1 state combinations (4 axes × 3
/// nitrogen projections × 2 electron states per center) and counts the
/// configurations whose flip-flop coupling magnitude lies within
/// `rel_window` of the probed configuration's. Returns (matching, total).
///
/// Parallel-electron combinations never flip-flop and never match.
pub fn resonant_configuration_count(
    b: &MagneticField,
    r23: &SphericalVector,
    probe_jt: JtAxis,
    probe_pair: (P1State, P1State),
    rel_window: f64,
    c: &PhysicalConstants,
) -> Result<(usize, usize)> {
    let probe = crate::spectro::flip_flop_coupling_general(
        b,
        r23,
        &JahnTellerAxis::new(probe_jt),
        &JahnTellerAxis::new(probe_jt),
        probe_pair.0,
        probe_pair.1,
        c,
    )?;
    let x_probe = probe.x_khz.abs();

    // cache the single-P1 systems and the pair eigensystems per axis pair
    let systems: Vec<SingleP1System> = {
        let mut v = Vec::new();
        for axis in JtAxis::ALL {
            v.push(single_p1_system(b, &JahnTellerAxis::new(axis), c)?);
        }
        v
    };
    let mut count = 0usize;
    let mut total = 0usize;
    for (i1, a1) in JtAxis::ALL.iter().enumerate() {
        for (i2, a2) in JtAxis::ALL.iter().enumerate() {
            let geom = DefectGeometry::new(SphericalVector::new(1.0, 0.0, 0.0), *r23);
            let h = build_composite_hamiltonian(
                b,
                &geom,
                &JahnTellerAxis::new(*a1),
                &JahnTellerAxis::new(*a2),
                Subsystem::P1Pair,
                NvCoupling::Full,
                c,
            )?;
            let (evals, evecs) = h.eigh();
            for s1 in P1State::all() {
                for s2 in P1State::all() {
                    total += 1;
                    if s1.electron == s2.electron {
                        continue; // parallel electrons: no flip-flop
                    }
                    if *a1 == *a2 && s1 == s2 {
                        continue;
                    }
                    if let Some(ff) =
                        extract_flip_flop(&systems[i1], &systems[i2], &evals, &evecs, s1, s2)
                    {
                        if (ff.x_khz.abs() - x_probe).abs() <= rel_window * x_probe {
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    Ok((count, total))
}


/// Convenience: the fixed-nitrogen probe pair (m_I ↑, m_I ↓).
pub fn fixed_nitrogen_pair(m_i: NitrogenProjection) -> (P1State, P1State) {
    (P1State::new(m_i, ElectronSpin::Up), P1State::new(m_i, ElectronSpin::Down))
}
