//! Noise propagation and dephasing analysis: quasi-static conversions,
//! field-fluctuation effects on the couplings, the ¹³C bath sampler, and
//! pseudo-spin dephasing curves.

use alloc::vec::Vec;

use nalgebra::Vector3;
use num_traits::Float;
use rand::Rng;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::hamiltonian::build_pair_hamiltonian_with_fields;
use crate::rng::{derived_seed, rng_from_seed, sample_normal};
use crate::spectro::{extract_flip_flop, single_p1_system, FlipFlopCoupling};
use crate::spin::{JahnTellerAxis, MagneticField, P1State, SphericalVector};

/// Standard deviation of a quasi-static Gaussian frequency noise implied by
/// a dephasing time: σ_f = 1/(√2 π T₂*). T₂* in ms, σ in kHz.
pub fn sigma_from_t2(t2star_ms: f64) -> Result<f64> {
    if !(t2star_ms > 0.0) {
        return Err(Error::InvalidArgument("dephasing time must be positive".into()));
    }
    Ok(1.0 / (core::f64::consts::SQRT_2 * core::f64::consts::PI * t2star_ms))
}

/// Inverse of [`sigma_from_t2`]: T₂* (ms) from a frequency noise σ (kHz).
pub fn t2_from_sigma(sigma_khz: f64) -> Result<f64> {
    if !(sigma_khz > 0.0) {
        return Err(Error::InvalidArgument("frequency noise must be positive".into()));
    }
    Ok(1.0 / (core::f64::consts::SQRT_2 * core::f64::consts::PI * sigma_khz))
}

/// Quadrature remainder √(total² − component²).
pub fn quadrature_decompose(total: f64, component: f64) -> Result<f64> {
    if component.abs() > total.abs() {
        return Err(Error::InvalidArgument(
            "component noise exceeds the total it is subtracted from".into(),
        ));
    }
    Ok((total * total - component * component).sqrt())
}

/// Configuration of the ¹³C bath sampler.
#[derive(Debug, Clone, Copy)]
pub struct CarbonBathConfig {
    /// ¹³C occupancy per lattice site.
    pub concentration: f64,
    pub n_configs: usize,
    /// Sites with |coupling| above this are excluded (strongly coupled
    /// spins are resolvable, not bath).
    pub coupling_cutoff_khz: f64,
    /// Ball radius around the central electron, nm.
    pub radius_nm: f64,
}

impl Default for CarbonBathConfig {
    fn default() -> Self {
        CarbonBathConfig {
            concentration: 1e-4,
            n_configs: 10_000,
            coupling_cutoff_khz: 10.0,
            radius_nm: 8.0,
        }
    }
}

/// Diamond conventional lattice constant, nm.
const DIAMOND_A: f64 = 0.3567;

/// Secular electron-¹³C couplings (kHz) of every diamond lattice site within
/// the ball, excluding the origin and sites above the cutoff.
fn lattice_couplings(cfg: &CarbonBathConfig, c: &PhysicalConstants) -> Vec<f64> {
    // conventional cell: FCC + (1/4,1/4,1/4) basis
    let fcc = [[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
    let prefactor_khz = c.dipolar_prefactor * (c.gamma_c / c.gamma_e) * 1e3;
    let n = (cfg.radius_nm / DIAMOND_A).ceil() as i64 + 1;
    let r2max = cfg.radius_nm * cfg.radius_nm;
    let mut couplings = Vec::new();
    for ix in -n..=n {
        for iy in -n..=n {
            for iz in -n..=n {
                for base in &fcc {
                    for db in [0.0, 0.25] {
                        let x = (ix as f64 + base[0] + db) * DIAMOND_A;
                        let y = (iy as f64 + base[1] + db) * DIAMOND_A;
                        let z = (iz as f64 + base[2] + db) * DIAMOND_A;
                        let r2 = x * x + y * y + z * z;
                        if r2 == 0.0 || r2 > r2max {
                            continue;
                        }
                        let r = r2.sqrt();
                        let cos2 = (z * z) / r2;
                        let a = prefactor_khz * (3.0 * cos2 - 1.0) / (r * r * r);
                        if a.abs() <= cfg.coupling_cutoff_khz {
                            couplings.push(a);
                        }
                    }
                }
            }
        }
    }
    couplings
}

/// Distribution of the quasi-static field noise b (kHz) produced by random
/// ¹³C bath configurations around a central electron spin.
#[derive(Debug, Clone)]
pub struct BathDistribution {
    pub sigmas_khz: Vec<f64>,
}

impl BathDistribution {
    pub fn mean(&self) -> f64 {
        self.sigmas_khz.iter().sum::<f64>() / self.sigmas_khz.len() as f64
    }

    pub fn median(&self) -> f64 {
        let mut v = self.sigmas_khz.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }
}

/// Samples ¹³C bath configurations on the diamond lattice: each site is
/// occupied with the configured concentration and contributes its secular
/// coupling at spin-1/2 variance, b = √(Σ a_i²/4).
pub fn carbon_bath_sample(
    cfg: &CarbonBathConfig,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<BathDistribution> {
    if !(cfg.concentration > 0.0 && cfg.concentration < 1.0) {
        return Err(Error::InvalidArgument("concentration must be in (0, 1)".into()));
    }
    let couplings = lattice_couplings(cfg, c);
    let n_sites = couplings.len();
    let mut rng = rng_from_seed(seed);
    let mut sigmas = Vec::with_capacity(cfg.n_configs);
    for _ in 0..cfg.n_configs {
        // draw the occupied-site count, then sample sites
        let mean_occ = n_sites as f64 * cfg.concentration;
        let k = sample_poisson(&mut rng, mean_occ);
        let mut var = 0.0;
        for _ in 0..k {
            let idx = rng.random_range(0..n_sites);
            let a = couplings[idx];
            var += a * a * 0.25;
        }
        sigmas.push(var.sqrt());
    }
    Ok(BathDistribution { sigmas_khz: sigmas })
}

/// Poisson draw (inversion for small means, normal approximation above).
fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean > 256.0 {
        let x = sample_normal(rng, mean, mean.sqrt());
        return x.max(0.0).round() as usize;
    }
    let limit = (-mean).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.random::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

/// How a field fluctuation is shared between the two P1 centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCorrelation {
    /// The same draw is applied to both sites (global field noise).
    Correlated,
    /// The draw is applied to the first site only (local bath noise).
    SingleSite,
    /// Independent draws at the two sites.
    Independent,
}

/// Gaussian field-fluctuation model, component standard deviations in Gauss.
#[derive(Debug, Clone, Copy)]
pub struct FieldNoiseSpec {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    pub correlation: NoiseCorrelation,
}

impl FieldNoiseSpec {
    fn validate(&self) -> Result<()> {
        if self.sigma_x < 0.0 || self.sigma_y < 0.0 || self.sigma_z < 0.0 {
            return Err(Error::InvalidArgument("noise sigmas must be nonnegative".into()));
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        Vector3::new(
            sample_normal(rng, 0.0, self.sigma_x),
            sample_normal(rng, 0.0, self.sigma_y),
            sample_normal(rng, 0.0, self.sigma_z),
        )
    }
}

/// Monte-Carlo distribution of the flip-flop coupling under field noise.
#[derive(Debug, Clone)]
pub struct CouplingDistribution {
    /// Signed coupling per draw, kHz.
    pub x_khz: Vec<f64>,
    /// Coupling at the unperturbed field.
    pub x0_khz: f64,
}

impl CouplingDistribution {
    pub fn mean(&self) -> f64 {
        self.x_khz.iter().sum::<f64>() / self.x_khz.len() as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        let var =
            self.x_khz.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / self.x_khz.len() as f64;
        var.sqrt()
    }
}

/// Resamples the magnetic field per the noise specification and recomputes
/// the pair coupling for a fixed (axis, state-pair) configuration.
pub fn coupling_distribution(
    b: &MagneticField,
    r23: &SphericalVector,
    jt: &JahnTellerAxis,
    pair: (P1State, P1State),
    noise: &FieldNoiseSpec,
    n_samples: usize,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<CouplingDistribution> {
    noise.validate()?;
    let r23_cart = r23.to_cartesian();
    let x0 = eval_pair_coupling(b, b, &r23_cart, jt, pair, c)?.x_khz;
    let mut rng = rng_from_seed(seed);
    let mut xs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let (b1, b2) = match noise.correlation {
            NoiseCorrelation::Correlated => {
                let d = noise.draw(&mut rng);
                let bd = MagneticField::new(b.bx + d.x, b.by + d.y, b.bz + d.z);
                (bd, bd)
            }
            NoiseCorrelation::SingleSite => {
                let d = noise.draw(&mut rng);
                (MagneticField::new(b.bx + d.x, b.by + d.y, b.bz + d.z), *b)
            }
            NoiseCorrelation::Independent => {
                let d1 = noise.draw(&mut rng);
                let d2 = noise.draw(&mut rng);
                (
                    MagneticField::new(b.bx + d1.x, b.by + d1.y, b.bz + d1.z),
                    MagneticField::new(b.bx + d2.x, b.by + d2.y, b.bz + d2.z),
                )
            }
        };
        xs.push(eval_pair_coupling(&b1, &b2, &r23_cart, jt, pair, c)?.x_khz);
    }
    Ok(CouplingDistribution { x_khz: xs, x0_khz: x0 })
}

fn eval_pair_coupling(
    b1: &MagneticField,
    b2: &MagneticField,
    r23_cart: &Vector3<f64>,
    jt: &JahnTellerAxis,
    pair: (P1State, P1State),
    c: &PhysicalConstants,
) -> Result<FlipFlopCoupling> {
    let sys1 = single_p1_system(b1, jt, c)?;
    let sys2 = single_p1_system(b2, jt, c)?;
    let h = build_pair_hamiltonian_with_fields(b1, b2, r23_cart, jt, jt, c)?;
    let (evals, evecs) = h.eigh();
    extract_flip_flop(&sys1, &sys2, &evals, &evecs, pair.0, pair.1).ok_or(Error::NoFlipFlop)
}

/// Monte-Carlo pseudo-spin dephasing curve under quasi-static Gaussian
/// detuning noise ΔZ: H = X Ŝx + (m_s Z + ΔZ) Ŝz.
#[derive(Debug, Clone)]
pub struct DephasingCurve {
    pub times_ms: Vec<f64>,
    /// Length of the ensemble-averaged Bloch vector at each time.
    pub bloch_length: Vec<f64>,
    /// Interpolated 1/e crossing of the envelope, when reached within the
    /// sampled window.
    pub t2star_ms: Option<f64>,
    /// The model assumes the noise is static within each shot.
    pub quasi_static: bool,
}

/// Averages the pseudo-spin Bloch vector over Gaussian ΔZ draws. The spin
/// starts along +z of the pseudo-spin Bloch sphere (the |↑↓⟩ state);
/// each draw precesses it analytically about its tilted field axis.
pub fn dephasing_curve(
    x_khz: f64,
    z_khz: f64,
    delta_z_sigma_khz: f64,
    m_s: i8,
    times_ms: &[f64],
    n_samples: usize,
    seed: u64,
) -> DephasingCurve {
    let mut sums: Vec<Vector3<f64>> = alloc::vec![Vector3::zeros(); times_ms.len()];
    for i in 0..n_samples {
        let mut rng = rng_from_seed(derived_seed(seed, i as u64));
        let dz = sample_normal(&mut rng, 0.0, delta_z_sigma_khz);
        let zeta = f64::from(m_s) * z_khz + dz;
        let f = (x_khz * x_khz + zeta * zeta).sqrt(); // kHz
        let axis = if f > 0.0 {
            Vector3::new(x_khz / f, 0.0, zeta / f)
        } else {
            Vector3::new(0.0, 0.0, 1.0)
        };
        let z_hat = Vector3::new(0.0, 0.0, 1.0);
        for (k, &t) in times_ms.iter().enumerate() {
            let phi = core::f64::consts::TAU * f * t; // kHz·ms = cycles
            // Rodrigues rotation of ẑ about the field axis
            let (s, co) = (phi.sin(), phi.cos());
            let v = z_hat * co + axis.cross(&z_hat) * s + axis * (axis.dot(&z_hat)) * (1.0 - co);
            sums[k] += v;
        }
    }
    let bloch: Vec<f64> = sums.iter().map(|v| (v / n_samples as f64).norm()).collect();
    let t2 = one_over_e_crossing(times_ms, &bloch);
    DephasingCurve {
        times_ms: times_ms.to_vec(),
        bloch_length: bloch,
        t2star_ms: t2,
        quasi_static: true,
    }
}

fn one_over_e_crossing(times: &[f64], bloch: &[f64]) -> Option<f64> {
    let target = (-1.0f64).exp();
    for k in 1..bloch.len() {
        if bloch[k] <= target && bloch[k - 1] > target {
            let frac = (bloch[k - 1] - target) / (bloch[k - 1] - bloch[k]);
            return Some(times[k - 1] + frac * (times[k] - times[k - 1]));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{ElectronSpin, JtAxis, NitrogenProjection};

    #[test]
    fn quasi_static_conversions_reference_values() {
        // NV dephasing 94 µs → 2.39 kHz
        let s = sigma_from_t2(0.094).unwrap();
        assert!((s - 2.39).abs() / 2.39 < 0.01, "{s}");
        // 30 Hz → 7.5 ms
        let t = t2_from_sigma(0.030).unwrap();
        assert!((t - 7.5).abs() / 7.5 < 0.01, "{t}");
        // 2.7 Hz → 83 ms
        let t = t2_from_sigma(0.0027).unwrap();
        assert!((t - 83.0).abs() / 83.0 < 0.01, "{t}");
        // roundtrip is the identity
        let x = 1.234;
        assert!((sigma_from_t2(t2_from_sigma(x).unwrap()).unwrap() - x).abs() < 1e-14);
    }

    #[test]
    fn quadrature_reference_and_edges() {
        let r = quadrature_decompose(2.39, 0.89).unwrap();
        assert!((r - 2.22).abs() / 2.22 < 0.01, "{r}");
        assert_eq!(quadrature_decompose(3.0, 0.0).unwrap(), 3.0);
        assert_eq!(quadrature_decompose(3.0, 3.0).unwrap(), 0.0);
        assert!(quadrature_decompose(1.0, 2.0).is_err());
    }

    #[test]
    fn carbon_bath_mean_and_skew() {
        let c = PhysicalConstants::default();
        let cfg = CarbonBathConfig { n_configs: 4000, ..CarbonBathConfig::default() };
        let dist = carbon_bath_sample(&cfg, 42, &c).unwrap();
        let mean = dist.mean();
        assert!((mean - 1.2).abs() / 1.2 < 0.25, "mean {mean} kHz");
        assert!(mean > dist.median(), "right skew: mean {mean} median {}", dist.median());
    }

    #[test]
    fn carbon_bath_vanishes_with_concentration() {
        let c = PhysicalConstants::default();
        let cfg = CarbonBathConfig {
            concentration: 1e-9,
            n_configs: 200,
            ..CarbonBathConfig::default()
        };
        let dist = carbon_bath_sample(&cfg, 1, &c).unwrap();
        assert!(dist.mean() < 1e-3, "{}", dist.mean());
    }

    #[test]
    fn zero_noise_zero_width() {
        let c = PhysicalConstants::default();
        let b = MagneticField::new(2.43, 1.42, 45.552);
        let jt = JahnTellerAxis::new(JtAxis::A);
        let pair = (
            P1State::new(NitrogenProjection::Zero, ElectronSpin::Up),
            P1State::new(NitrogenProjection::Zero, ElectronSpin::Down),
        );
        let noise = FieldNoiseSpec {
            sigma_x: 0.0,
            sigma_y: 0.0,
            sigma_z: 0.0,
            correlation: NoiseCorrelation::Correlated,
        };
        let d = coupling_distribution(
            &b,
            &SphericalVector::new(4.05, 1.1, 0.7),
            &jt,
            pair,
            &noise,
            32,
            9,
            &c,
        )
        .unwrap();
        assert!(d.std() < 1e-9, "{}", d.std());
    }

    #[test]
    fn correlated_field_noise_relative_width() {
        // σ(X)/X ≈ 0.2% for ~30 mG transverse field fluctuations at a
        // geometry with X near 15 kHz.
        let c = PhysicalConstants::default();
        let b = MagneticField::new(2.43, 1.42, 45.552);
        let jt = JahnTellerAxis::new(JtAxis::A);
        let pair = (
            P1State::new(NitrogenProjection::Zero, ElectronSpin::Up),
            P1State::new(NitrogenProjection::Zero, ElectronSpin::Down),
        );
        let noise = FieldNoiseSpec {
            sigma_x: 0.030,
            sigma_y: 0.030,
            sigma_z: 0.003,
            correlation: NoiseCorrelation::Correlated,
        };
        let d = coupling_distribution(
            &b,
            &SphericalVector::new(4.05, 1.1, 0.7),
            &jt,
            pair,
            &noise,
            400,
            4,
            &c,
        )
        .unwrap();
        let rel = d.std() / d.x0_khz.abs();
        assert!(d.x0_khz.abs() > 10.0, "coupling scale {}", d.x0_khz);
        assert!(rel > 0.001 && rel < 0.0035, "relative width {rel}");
        // worst case (peak-to-peak drifts): still below 1%
        let worst = FieldNoiseSpec {
            sigma_x: 0.100,
            sigma_y: 0.100,
            sigma_z: 0.020,
            correlation: NoiseCorrelation::Correlated,
        };
        let d = coupling_distribution(
            &b,
            &SphericalVector::new(4.05, 1.1, 0.7),
            &jt,
            pair,
            &worst,
            400,
            5,
            &c,
        )
        .unwrap();
        assert!(d.std() / d.x0_khz.abs() < 0.01, "{}", d.std() / d.x0_khz.abs());
    }

    #[test]
    fn uncorrelated_single_site_noise_is_one_sided() {
        let c = PhysicalConstants::default();
        let b = MagneticField::new(2.43, 1.42, 45.552);
        let jt = JahnTellerAxis::new(JtAxis::A);
        let pair = (
            P1State::new(NitrogenProjection::Minus, ElectronSpin::Up),
            P1State::new(NitrogenProjection::Minus, ElectronSpin::Down),
        );
        let noise = FieldNoiseSpec {
            sigma_x: 0.0,
            sigma_y: 0.0,
            sigma_z: 0.010,
            correlation: NoiseCorrelation::SingleSite,
        };
        let d = coupling_distribution(
            &b,
            &SphericalVector::new(4.05, 1.1, 0.7),
            &jt,
            pair,
            &noise,
            300,
            6,
            &c,
        )
        .unwrap();
        // |X| only grows when one site is detuned: one-sided distribution
        let x0 = d.x0_khz.abs();
        let below = d.x_khz.iter().filter(|x| x.abs() < x0 - 1e-4).count();
        assert!(below == 0, "{below} draws below the unperturbed coupling");
        assert!(d.mean().abs() > x0, "mean {} vs x0 {x0}", d.mean());
    }

    #[test]
    fn dephasing_curve_limits() {
        // no noise → unit Bloch length at all times
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 2.0).collect();
        let curve = dephasing_curve(18.114, 0.0, 0.0, 0, &times, 64, 3);
        for &l in &curve.bloch_length {
            assert!((l - 1.0).abs() < 1e-12);
        }

        // X → 0: the dephasing time collapses to the bare quasi-static value
        let sigma = 0.8407; // kHz
        let t2_bare = t2_from_sigma(sigma).unwrap();
        let times: Vec<f64> = (0..400).map(|k| k as f64 * t2_bare / 100.0).collect();
        let curve = dephasing_curve(1e-6, 0.0, sigma, 0, &times, 4000, 7);
        let t2 = curve.t2star_ms.expect("crossing in window");
        assert!((t2 - t2_bare).abs() / t2_bare < 0.1, "{t2} vs {t2_bare}");
    }

    #[test]
    fn clock_transition_protection_timescale() {
        // X = 18.114 kHz with 0.3 mG-equivalent detuning noise: dephasing
        // in the tens of milliseconds
        let gamma_e = PhysicalConstants::default().gamma_e;
        let sigma = gamma_e * 0.3e-3 * 1e3; // kHz
        let times: Vec<f64> = (0..300).map(|k| k as f64 * 0.5).collect();
        let curve = dephasing_curve(18.114, 0.0, sigma, 0, &times, 3000, 11);
        let t2 = curve.t2star_ms.expect("crossing in window");
        assert!(t2 > 20.0 && t2 < 80.0, "T2* = {t2} ms");
        for &l in &curve.bloch_length {
            assert!((0.0..=1.0 + 1e-12).contains(&l));
        }
    }

    #[test]
    fn quadratic_sensitivity_of_clock_transition() {
        // f(ΔZ) − f(0) = ΔZ²/(2X) within 5% for ΔZ/X ≤ 0.1
        let x = 18.114;
        for frac in [0.02, 0.05, 0.1] {
            let dz = frac * x;
            let shift = crate::spectro::pseudo_spin_frequency(x, dz, -1)
                - crate::spectro::pseudo_spin_frequency(x, 0.0, -1);
            let quadratic = dz * dz / (2.0 * x);
            assert!(
                (shift - quadratic).abs() / quadratic < 0.05,
                "dz/X = {frac}: {shift} vs {quadratic}"
            );
        }
    }
}
