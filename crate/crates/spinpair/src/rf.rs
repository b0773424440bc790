//! Time-dependent simulation of RF pulses on a single P1 center and the
//! Rabi-response truth tables used to identify its Jahn-Teller axis and
//! nitrogen state.
//!
//! The drive is strong compared to the pair coupling (Ω ≫ X), so a single
//! P1 center is simulated; integration is in the lab frame with
//! piecewise-constant steps, at least [`MIN_STEPS_PER_PERIOD`] per RF
//! period.

use alloc::vec::Vec;

use num_traits::Float;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::hamiltonian::{build_p1_hamiltonian, p1_embedded_operators};
use crate::linalg::{eigh_sorted, CMatrix, C64};
use crate::spectro::single_p1_system;
use crate::spin::{JahnTellerAxis, JtAxis, MagneticField, P1State};

/// Lower bound on integration steps per RF period.
pub const MIN_STEPS_PER_PERIOD: usize = 48;

/// Retention threshold below which a Rabi response counts as observable.
pub const RESPONSE_THRESHOLD: f64 = 0.95;

/// Maximum allowed norm drift over a pulse.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// A rectangular RF pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfPulse {
    pub frequency_mhz: f64,
    /// Rabi amplitude Ω, kHz.
    pub rabi_khz: f64,
    pub phase_rad: f64,
    pub duration_us: f64,
}

impl RfPulse {
    /// Pulse with the default duration of two nominal Rabi periods, 2/Ω.
    pub fn with_default_duration(frequency_mhz: f64, rabi_khz: f64) -> Self {
        RfPulse {
            frequency_mhz,
            rabi_khz,
            phase_rad: 0.0,
            duration_us: 2.0 / (rabi_khz * 1e-3),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rabi_khz > 0.0) || !(self.duration_us >= 0.0) || !(self.frequency_mhz > 0.0) {
            return Err(Error::InvalidArgument(
                "RF pulse requires positive frequency and amplitude and nonnegative duration"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Population retention of each of the six P1 eigenstates under one pulse,
/// sampled over the pulse duration.
#[derive(Debug, Clone)]
pub struct RabiResponse {
    pub times_us: Vec<f64>,
    /// retention[s][t]: |⟨s|ψ_s(t)⟩|², indexed by [`P1State::basis_index`].
    pub retention: [Vec<f64>; 6],
}

impl RabiResponse {
    pub fn min_retention(&self, s: P1State) -> f64 {
        self.retention[s.basis_index()].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Integrates the lab-frame Schrödinger equation for all six eigenstate
/// preparations simultaneously under one RF pulse.
///
/// `include_nuclear_drive` keeps the (γn/γe)-scaled nuclear drive term; the
/// electron term dominates by γe/γn ≈ 9000.
pub fn rabi_response(
    b: &MagneticField,
    jt: &JahnTellerAxis,
    pulse: &RfPulse,
    n_samples: usize,
    include_nuclear_drive: bool,
    c: &PhysicalConstants,
) -> Result<RabiResponse> {
    pulse.validate()?;
    let sys = single_p1_system(b, jt, c)?;
    let h0 = build_p1_hamiltonian(b, jt, c).into_matrix();
    let (i_emb, j_emb) = p1_embedded_operators();
    let mut drive = j_emb[0].clone();
    if include_nuclear_drive {
        drive += i_emb[0].scale(c.gamma_n / c.gamma_e);
    }

    let period_us = 1.0 / pulse.frequency_mhz;
    let n_steps = ((pulse.duration_us / period_us) * MIN_STEPS_PER_PERIOD as f64).ceil() as usize;
    let n_steps = n_steps.max(1);
    let dt = pulse.duration_us / n_steps as f64;
    let omega_mhz = pulse.rabi_khz * 1e-3;

    // state columns: one per initial eigenstate
    let mut psi = CMatrix::zeros(6, 6);
    for s in P1State::all() {
        psi.set_column(s.basis_index(), &sys.vector(s));
    }
    let initial = psi.clone();

    let sample_every = (n_steps / n_samples.max(1)).max(1);
    let mut times = Vec::new();
    let mut retention: [Vec<f64>; 6] = core::array::from_fn(|_| Vec::new());
    {
        let mut record = |t: f64, psi: &CMatrix| {
            times.push(t);
            for s in P1State::all() {
                let i = s.basis_index();
                let ov = initial.column(i).dotc(&psi.column(i)).norm_sqr();
                retention[i].push(ov);
            }
        };
        record(0.0, &psi);

        for step in 0..n_steps {
            let t_mid = (step as f64 + 0.5) * dt;
            let phase = core::f64::consts::TAU * pulse.frequency_mhz * t_mid + pulse.phase_rad;
            let h = &h0 + drive.scale(omega_mhz * phase.cos());
            let (vals, vecs) = eigh_sorted(&h);
            let u = crate::linalg::propagator(&vals, &vecs, dt);
            psi = &u * psi;
            if (step + 1) % sample_every == 0 || step + 1 == n_steps {
                record((step + 1) as f64 * dt, &psi);
            }
        }
    }

    // unitary steps preserve norm to rounding; verify the contract anyway
    let mut drift = 0.0f64;
    for i in 0..6 {
        drift = drift.max((psi.column(i).norm() - 1.0).abs());
    }
    if drift > NORM_DRIFT_TOL {
        return Err(Error::IntegrationAccuracy { norm_drift: drift });
    }
    Ok(RabiResponse { times_us: times, retention })
}

/// Population-retention trace for a single initial eigenstate.
pub fn rabi_trace(
    b: &MagneticField,
    jt: &JahnTellerAxis,
    initial: P1State,
    pulse: &RfPulse,
    n_samples: usize,
    c: &PhysicalConstants,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let resp = rabi_response(b, jt, pulse, n_samples, true, c)?;
    Ok((resp.times_us, resp.retention[initial.basis_index()].clone()))
}

/// Column order of the truth tables: |+↓⟩, |0↓⟩, |−↓⟩, |−↑⟩, |0↑⟩, |+↑⟩.
pub const TRUTH_TABLE_COLUMNS: [&str; 6] = ["+d", "0d", "-d", "-u", "0u", "+u"];

fn column_of(s: P1State) -> usize {
    match s.label().as_str() {
        "+d" => 0,
        "0d" => 1,
        "-d" => 2,
        "-u" => 3,
        "0u" => 4,
        "+u" => 5,
        _ => unreachable!(),
    }
}

/// One row of a truth table: a drive frequency and the response bit of each
/// eigenstate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthTableRow {
    pub frequency_mhz: f64,
    /// Bits in [`TRUTH_TABLE_COLUMNS`] order.
    pub bits: [bool; 6],
}

impl TruthTableRow {
    pub fn bit(&self, s: P1State) -> bool {
        self.bits[column_of(s)]
    }
}

/// Per-axis map from drive frequency to the set of responding eigenstates.
#[derive(Debug, Clone)]
pub struct TruthTable {
    pub jt: JtAxis,
    pub rows: Vec<TruthTableRow>,
}

impl TruthTable {
    /// The row nearest `frequency`, if within `tol_mhz`.
    pub fn row_near(&self, frequency_mhz: f64, tol_mhz: f64) -> Option<&TruthTableRow> {
        self.rows
            .iter()
            .filter(|r| (r.frequency_mhz - frequency_mhz).abs() <= tol_mhz)
            .min_by(|a, b| {
                (a.frequency_mhz - frequency_mhz)
                    .abs()
                    .partial_cmp(&(b.frequency_mhz - frequency_mhz).abs())
                    .unwrap()
            })
    }
}

/// Simulates the Rabi response at each listed frequency and thresholds the
/// minimum retention at [`RESPONSE_THRESHOLD`] to produce the truth table.
pub fn truth_table(
    b: &MagneticField,
    jt: &JahnTellerAxis,
    frequencies_mhz: &[f64],
    rabi_khz: f64,
    duration_us: f64,
    c: &PhysicalConstants,
) -> Result<TruthTable> {
    let mut rows = Vec::with_capacity(frequencies_mhz.len());
    for &f in frequencies_mhz {
        let pulse = RfPulse { frequency_mhz: f, rabi_khz, phase_rad: 0.0, duration_us };
        let resp = rabi_response(b, jt, &pulse, 400, true, c)?;
        let mut bits = [false; 6];
        for s in P1State::all() {
            bits[column_of(s)] = resp.min_retention(s) < RESPONSE_THRESHOLD;
        }
        rows.push(TruthTableRow { frequency_mhz: f, bits });
    }
    Ok(TruthTable { jt: jt.axis, rows })
}

/// A transition line of the single-P1 spectrum: a level gap together with
/// its drive matrix element.
#[derive(Debug, Clone, Copy)]
pub struct TransitionLine {
    pub frequency_mhz: f64,
    pub state_a: P1State,
    pub state_b: P1State,
    /// |⟨a| Ĵx + (γn/γe) Îx |b⟩|
    pub drive_weight: f64,
}

/// All 15 level gaps of a single P1 with their drive weights, descending in
/// frequency.
pub fn transition_catalog(
    b: &MagneticField,
    jt: &JahnTellerAxis,
    c: &PhysicalConstants,
) -> Result<Vec<TransitionLine>> {
    let sys = single_p1_system(b, jt, c)?;
    let (i_emb, j_emb) = p1_embedded_operators();
    let drive = &j_emb[0] + i_emb[0].scale(c.gamma_n / c.gamma_e);
    let states = P1State::all();
    let mut out = Vec::new();
    for i in 0..6 {
        for j in (i + 1)..6 {
            let (a, bb) = (states[i], states[j]);
            let va = sys.vector(a);
            let vb = sys.vector(bb);
            let me: C64 = va.dotc(&(&drive * &vb));
            out.push(TransitionLine {
                frequency_mhz: (sys.energy(a) - sys.energy(bb)).abs(),
                state_a: a,
                state_b: bb,
                drive_weight: me.norm(),
            });
        }
    }
    out.sort_by(|x, y| y.frequency_mhz.partial_cmp(&x.frequency_mhz).unwrap());
    Ok(out)
}

/// Default probe frequencies for a truth table: the transition lines strong
/// enough to produce an observable Rabi response at the working amplitude.
pub fn default_probe_frequencies(
    b: &MagneticField,
    jt: &JahnTellerAxis,
    min_drive_weight: f64,
    c: &PhysicalConstants,
) -> Result<Vec<f64>> {
    Ok(transition_catalog(b, jt, c)?
        .into_iter()
        .filter(|l| l.drive_weight >= min_drive_weight)
        .map(|l| l.frequency_mhz)
        .collect())
}

/// An RF probe outcome: a drive frequency and whether a Rabi response was
/// observed there.
pub type RfObservation = (f64, bool);

/// Frequency-matching tolerance when comparing observations against table
/// rows, MHz.
pub const ASSIGNMENT_FREQ_TOL: f64 = 0.3;

/// Returns every (Jahn-Teller axis, flip-flop state pair) assignment
/// consistent with the probed responses. A candidate pair responds at a
/// frequency when either of its states has a `1` bit in the matching row;
/// probing a frequency absent from the table predicts no response.
pub fn assign_configuration(
    observations: &[RfObservation],
    tables: &[TruthTable],
) -> Result<Vec<(JtAxis, (P1State, P1State))>> {
    if observations.is_empty() {
        return Err(Error::InvalidArgument("no RF observations supplied".into()));
    }
    let mut candidates = Vec::new();
    for table in tables {
        for (_, pair) in crate::spectro::flip_flop_families() {
            let consistent = observations.iter().all(|&(f, responded)| {
                let predicted = table
                    .row_near(f, ASSIGNMENT_FREQ_TOL)
                    .map(|row| row.bit(pair.0) || row.bit(pair.1))
                    .unwrap_or(false);
                predicted == responded
            });
            if consistent {
                candidates.push((table.jt, pair));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::InconsistentObservation);
    }
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{ElectronSpin, NitrogenProjection};

    fn paper_field() -> MagneticField {
        MagneticField::new(2.43, 1.42, 45.552)
    }

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn off_resonant_drive_retains_population() {
        // far from every transition of axis A (nearest lines tens of MHz
        // away, i.e. thousands of Ω)
        let c = consts();
        let jt = JahnTellerAxis::new(JtAxis::A);
        let pulse = RfPulse::with_default_duration(150.0, 250.0);
        let resp = rabi_response(&paper_field(), &jt, &pulse, 100, true, &c).unwrap();
        for s in P1State::all() {
            assert!(resp.min_retention(s) >= 0.99, "{s}: {}", resp.min_retention(s));
        }
    }

    #[test]
    fn resonant_drive_flips_the_right_pair() {
        let c = consts();
        let jt = JahnTellerAxis::new(JtAxis::A);
        let pulse = RfPulse::with_default_duration(238.079, 250.0);
        let resp = rabi_response(&paper_field(), &jt, &pulse, 200, true, &c).unwrap();
        use ElectronSpin::{Down, Up};
        use NitrogenProjection::Plus;
        let dip_u = resp.min_retention(P1State::new(Plus, Up));
        let dip_d = resp.min_retention(P1State::new(Plus, Down));
        assert!(dip_u < 0.95 && dip_d < 0.95, "{dip_u} {dip_d}");
        for s in P1State::all() {
            if s.nitrogen != Plus {
                assert!(resp.min_retention(s) > 0.95, "{s}");
            }
        }
    }

    #[test]
    fn two_level_rotating_wave_period_oracle() {
        // On resonance the first retention minimum sits at half the
        // effective Rabi period 1/(Ω · 2|⟨a|drive|b⟩|) of the two-level
        // rotating-wave picture.
        let c = consts();
        let b = paper_field();
        let jt = JahnTellerAxis::new(JtAxis::A);
        let lines = transition_catalog(&b, &jt, &c).unwrap();
        let line = lines
            .iter()
            .find(|l| (l.frequency_mhz - 238.079).abs() < 0.1)
            .expect("electron transition line");
        let omega_khz = 250.0;
        let f_rabi_mhz = 2.0 * omega_khz * 1e-3 * line.drive_weight / 2.0; // cycles per µs
        let t_first_min = 0.5 / f_rabi_mhz;
        let pulse = RfPulse {
            frequency_mhz: line.frequency_mhz,
            rabi_khz: omega_khz,
            phase_rad: 0.0,
            duration_us: 1.2 * t_first_min,
        };
        let resp = rabi_response(&b, &jt, &pulse, 600, true, &c).unwrap();
        let idx = line.state_a.basis_index();
        let trace = &resp.retention[idx];
        let k_min = trace
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        let t_min = resp.times_us[k_min];
        assert!(
            (t_min - t_first_min).abs() / t_first_min < 0.05,
            "first minimum at {t_min} vs {t_first_min}"
        );
    }

    #[test]
    fn truth_table_reference_rows() {
        let c = consts();
        let b = paper_field();
        // axis D at 86.055 MHz → (0,1,1,0,0,0)
        let t =
            truth_table(&b, &JahnTellerAxis::new(JtAxis::D), &[86.055], 250.0, 8.0, &c).unwrap();
        assert_eq!(t.rows[0].bits, [false, true, true, false, false, false]);
        // axis B at 21.48 MHz → (0,0,0,0,1,1)
        let t =
            truth_table(&b, &JahnTellerAxis::new(JtAxis::B), &[21.48], 250.0, 8.0, &c).unwrap();
        assert_eq!(t.rows[0].bits, [false, false, false, false, true, true]);
    }

    #[test]
    fn all_zero_row_far_from_any_line() {
        let c = consts();
        let b = paper_field();
        let t =
            truth_table(&b, &JahnTellerAxis::new(JtAxis::A), &[150.0], 250.0, 8.0, &c).unwrap();
        assert_eq!(t.rows[0].bits, [false; 6]);
    }

    #[test]
    fn nuclear_drive_term_changes_no_bit() {
        let c = consts();
        let b = paper_field();
        let jt = JahnTellerAxis::new(JtAxis::B);
        for f in [28.441, 189.114] {
            let pulse =
                RfPulse { frequency_mhz: f, rabi_khz: 250.0, phase_rad: 0.0, duration_us: 8.0 };
            let with = rabi_response(&b, &jt, &pulse, 300, true, &c).unwrap();
            let without = rabi_response(&b, &jt, &pulse, 300, false, &c).unwrap();
            for s in P1State::all() {
                assert_eq!(
                    with.min_retention(s) < RESPONSE_THRESHOLD,
                    without.min_retention(s) < RESPONSE_THRESHOLD,
                    "bit flip at {f} MHz for {s}"
                );
            }
        }
    }

    #[test]
    fn assignment_reproduces_reference_multiplicities() {
        let c = consts();
        let b = paper_field();
        let tables: Vec<TruthTable> = JtAxis::ALL
            .iter()
            .map(|&axis| {
                let jt = JahnTellerAxis::new(axis);
                let freqs = default_probe_frequencies(&b, &jt, 0.05, &c).unwrap();
                truth_table(&b, &jt, &freqs, 250.0, 8.0, &c).unwrap()
            })
            .collect();

        use ElectronSpin::{Down, Up};
        use NitrogenProjection::{Plus, Zero};
        // Interpulse delay 16.4 µs: responses at the nitrogen-type lines of
        // axis A identify the fixed-nitrogen m_I = 0 pair uniquely.
        let obs_164 = [
            (27.645, true),
            (27.715, true),
            (80.127, true),
            (189.902, true),
            (189.831, true),
            (20.532, true),
            (238.079, false),
            (82.06, false),
        ];
        let cands = assign_configuration(&obs_164, &tables).unwrap();
        assert_eq!(cands.len(), 1, "{cands:?}");
        assert_eq!(cands[0].0, JtAxis::A);
        assert_eq!(cands[0].1, (P1State::new(Zero, Up), P1State::new(Zero, Down)));

        // Interpulse delay 11.2 µs: three probed responses leave two
        // candidates on axis B.
        let obs_112 = [(28.441, true), (239.035, true), (21.48, true)];
        let cands = assign_configuration(&obs_112, &tables).unwrap();
        let set: Vec<_> = cands.iter().filter(|(jt, _)| *jt == JtAxis::B).collect();
        assert_eq!(set.len(), 2, "{cands:?}");
        let pairs: Vec<_> = set.iter().map(|(_, p)| *p).collect();
        assert!(pairs.contains(&(P1State::new(Plus, Up), P1State::new(Plus, Down))));
        assert!(pairs.contains(&(P1State::new(Plus, Down), P1State::new(Zero, Up))));

        // zero matching candidates → inconsistent
        let bad = [(238.079, true), (257.994, true), (189.114, true), (86.055, true)];
        assert!(matches!(
            assign_configuration(&bad, &tables),
            Err(Error::InconsistentObservation)
        ));
    }
}
