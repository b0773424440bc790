//! Geometry reconstruction from measured effective couplings: multi-start
//! damped least squares over the spherical separation vectors, permutation
//! search over ambiguous state assignments, and the synthetic benchmark
//! harness.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand::Rng;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_composite_hamiltonian, build_dipolar_hamiltonian, p1_embedded_operators, NvCoupling,
    Subsystem,
};
use crate::linalg::{eye, kron, CMatrix};
use crate::rng::{derived_seed, rng_from_seed};
use crate::spectro::{
    extract_flip_flop, labeled_eigensystem, nv_system, single_p1_system, LabeledBasis, NvSystem,
    SingleP1System,
};
use crate::spin::{
    spin_operators, DefectGeometry, ElectronSpin, JahnTellerAxis, JtAxis, MagneticField,
    NitrogenProjection, P1State, SphericalVector,
};

/// Which P1 center an NV coupling refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P1Site {
    First,
    Second,
}

/// What a coupling observation measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    /// Flip-flop coupling |X| of the P1 pair.
    P1PairX,
    /// Effective NV-P1 coupling D of one site.
    NvP1D(P1Site),
}

/// One measured coupling with its candidate state assignments.
#[derive(Debug, Clone)]
pub struct CouplingObservation {
    /// Interpulse delay the resonance was found at (bookkeeping only).
    pub tau_us: f64,
    pub jt: JtAxis,
    pub candidates: Vec<(P1State, P1State)>,
    pub value_khz: f64,
    pub kind: CouplingKind,
}

impl CouplingObservation {
    fn validate(&self) -> Result<()> {
        if !self.value_khz.is_finite() {
            return Err(Error::InvalidArgument("observation value must be finite".into()));
        }
        if self.candidates.is_empty() {
            return Err(Error::InvalidArgument(
                "observation needs at least one candidate state pair".into(),
            ));
        }
        Ok(())
    }
}

/// Candidate index per observation.
pub type Assignment = Vec<usize>;

/// Fitted spherical vector with per-parameter standard errors.
#[derive(Debug, Clone, Copy)]
pub struct FittedVector {
    pub vector: SphericalVector,
    /// Standard errors of (r, θ, φ) from the covariance at the optimum.
    pub stderr: [f64; 3],
}

/// Result of a multi-start geometry fit. Solutions are reported up to the
/// documented inversion symmetry of the dipolar couplings.
#[derive(Debug, Clone)]
pub struct GeometryFit {
    pub r12: Option<FittedVector>,
    pub r23: Option<FittedVector>,
    /// Residual sum of squares at the returned solution, kHz².
    pub rss: f64,
    /// 1-based index of the assignment this fit used (set by the
    /// permutation search).
    pub permutation_index: Option<usize>,
    pub n_starts: usize,
    pub n_converged: usize,
    /// Fewer observations than parameters.
    pub underdetermined: bool,
}

/// Cached per-axis machinery for fast repeated coupling evaluation during a
/// fit: the geometry-independent pair matrices and single-P1 systems.
pub struct PairCouplingEvaluator {
    systems: Vec<SingleP1System>,
    bases: Vec<CMatrix>,
    j_emb: [CMatrix; 3],
    prefactor: f64,
}

impl PairCouplingEvaluator {
    pub fn new(b: &MagneticField, c: &PhysicalConstants) -> Result<Self> {
        let mut systems = Vec::new();
        let mut bases = Vec::new();
        let id6 = eye(6);
        for axis in JtAxis::ALL {
            let jt = JahnTellerAxis::new(axis);
            systems.push(single_p1_system(b, &jt, c)?);
            let h1 = crate::hamiltonian::build_p1_hamiltonian(b, &jt, c);
            bases.push(kron(h1.matrix(), &id6) + kron(&id6, h1.matrix()));
        }
        let (_, j_emb) = p1_embedded_operators();
        Ok(PairCouplingEvaluator { systems, bases, j_emb, prefactor: c.dipolar_prefactor })
    }

    fn axis_index(jt: JtAxis) -> usize {
        match jt {
            JtAxis::A => 0,
            JtAxis::B => 1,
            JtAxis::C => 2,
            JtAxis::D => 3,
        }
    }

    /// Signed flip-flop coupling X (kHz) for an equal-axis pair at the given
    /// separation.
    pub fn x_coupling(
        &self,
        jt: JtAxis,
        pair: (P1State, P1State),
        r23: &SphericalVector,
    ) -> Result<f64> {
        let i = Self::axis_index(jt);
        let hd = build_dipolar_hamiltonian(
            &r23.to_cartesian(),
            &self.j_emb,
            &self.j_emb,
            self.prefactor,
        )?;
        let h = &self.bases[i] + hd.matrix();
        let (evals, evecs) = crate::linalg::eigh_sorted(&h);
        extract_flip_flop(&self.systems[i], &self.systems[i], &evals, &evecs, pair.0, pair.1)
            .map(|f| f.x_khz)
            .ok_or(Error::NoFlipFlop)
    }
}

/// Cached machinery for the NV-P1 coupling along a fit.
pub struct NvCouplingEvaluator {
    nv: NvSystem,
    systems: Vec<SingleP1System>,
    bases: Vec<CMatrix>,
    bases_labels: Vec<LabeledBasis>,
    s_ops: [CMatrix; 3],
    j_emb: [CMatrix; 3],
    prefactor: f64,
}

impl NvCouplingEvaluator {
    pub fn new(b: &MagneticField, c: &PhysicalConstants) -> Result<Self> {
        let nv = nv_system(b, c)?;
        let hnv = crate::hamiltonian::build_nv_hamiltonian(b, c);
        let id6 = eye(6);
        let id3 = eye(3);
        let mut systems = Vec::new();
        let mut bases = Vec::new();
        let mut bases_labels = Vec::new();
        for axis in JtAxis::ALL {
            let jt = JahnTellerAxis::new(axis);
            let sys = single_p1_system(b, &jt, c)?;
            let h1 = crate::hamiltonian::build_p1_hamiltonian(b, &jt, c);
            bases.push(kron(hnv.matrix(), &id6) + kron(&id3, h1.matrix()));
            bases_labels.push(crate::spectro::nv_p1_product_basis(&nv, &sys));
            systems.push(sys);
        }
        let s_ops = spin_operators(1.0).expect("spin 1");
        let (_, j_emb) = p1_embedded_operators();
        Ok(NvCouplingEvaluator {
            nv,
            systems,
            bases,
            bases_labels,
            s_ops,
            j_emb,
            prefactor: c.dipolar_prefactor,
        })
    }

    /// Effective coupling D (kHz) of a P1 at separation `r` from the NV.
    pub fn d_coupling(
        &self,
        jt: JtAxis,
        pair: (P1State, P1State),
        r: &SphericalVector,
    ) -> Result<f64> {
        let i = PairCouplingEvaluator::axis_index(jt);
        let hd = build_dipolar_hamiltonian(
            &r.to_cartesian(),
            &self.s_ops,
            &self.j_emb,
            self.prefactor,
        )?;
        let h = crate::linalg::HermitianOperator::from_parts(&self.bases[i] + hd.matrix());
        let sys = labeled_eigensystem(&h, &self.bases_labels[i])?;
        let (a, bb) = pair;
        let lam = |m_s: i8, s: P1State| sys.eigenvalue(&alloc::format!("({m_s},{s})"));
        let d_mhz = (lam(-1, bb)? - lam(-1, a)?) + (lam(0, a)? - lam(0, bb)?);
        let _ = &self.nv;
        Ok(d_mhz * 1e3)
    }
}

/// Computes the model coupling vector for a fixed assignment; the generic
/// forward model of the fit.
pub fn forward_couplings(
    b: &MagneticField,
    geometry: &DefectGeometry,
    observations: &[CouplingObservation],
    assignment: &Assignment,
    c: &PhysicalConstants,
) -> Result<Vec<f64>> {
    if assignment.len() != observations.len() {
        return Err(Error::InvalidArgument("assignment length mismatch".into()));
    }
    let pair_eval = PairCouplingEvaluator::new(b, c)?;
    let nv_eval = NvCouplingEvaluator::new(b, c)?;
    let mut out = Vec::with_capacity(observations.len());
    for (obs, &cand) in observations.iter().zip(assignment) {
        obs.validate()?;
        let pair = *obs
            .candidates
            .get(cand)
            .ok_or_else(|| Error::InvalidArgument("candidate index out of range".into()))?;
        let value = match obs.kind {
            CouplingKind::P1PairX => {
                pair_eval.x_coupling(obs.jt, pair, &geometry.r23)?.abs()
            }
            CouplingKind::NvP1D(site) => {
                let r = match site {
                    P1Site::First => geometry.r12,
                    P1Site::Second => SphericalVector::from_cartesian(&geometry.r13_cartesian()),
                };
                nv_eval.d_coupling(obs.jt, pair, &r)?
            }
        };
        out.push(value);
    }
    Ok(out)
}

/// Levenberg-Marquardt options.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub lambda_init: f64,
    /// Convergence threshold on the step norm.
    pub xtol: f64,
    /// Convergence threshold on the relative RSS decrease.
    pub ftol: f64,
    /// Relative finite-difference step for the Jacobian.
    pub jacobian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 60,
            lambda_init: 1e-3,
            xtol: 1e-10,
            ftol: 1e-13,
            jacobian_step: 1e-5,
        }
    }
}

/// A converged start.
#[derive(Debug, Clone, Copy)]
pub struct LmSolution {
    pub params: [f64; 3],
    pub rss: f64,
    pub stderr: [f64; 3],
    pub n_iterations: usize,
}

/// Damped least squares over 3 parameters with a forward-difference
/// Jacobian. Returns `None` when the residual function fails everywhere or
/// the normal equations stay singular.
fn levenberg_marquardt<F>(
    residuals: &F,
    start: [f64; 3],
    opts: &FitOptions,
) -> Option<LmSolution>
where
    F: Fn(&[f64; 3]) -> Option<DVector<f64>>,
{
    let mut params = start;
    let mut r = residuals(&params)?;
    let mut rss = r.norm_squared();
    let mut lambda = opts.lambda_init;
    let m = r.len();
    let mut jac = DMatrix::<f64>::zeros(m, 3);
    let mut n_iter = 0;
    for iter in 0..opts.max_iterations {
        n_iter = iter + 1;
        // forward-difference Jacobian
        for j in 0..3 {
            let h = opts.jacobian_step * params[j].abs().max(1e-2);
            let mut shifted = params;
            shifted[j] += h;
            let rj = residuals(&shifted)?;
            for i in 0..m {
                jac[(i, j)] = (rj[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let jtr = &jt * &r;
        let mut stepped = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..3 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let delta = match a.lu().solve(&(-&jtr)) {
                Some(d) => d,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial = params;
            for d in 0..3 {
                trial[d] += delta[d];
            }
            if let Some(rt) = residuals(&trial) {
                let rss_t = rt.norm_squared();
                if rss_t < rss {
                    let step_norm = delta.norm();
                    let improvement = (rss - rss_t) / rss.max(1e-300);
                    params = trial;
                    r = rt;
                    rss = rss_t;
                    lambda = (lambda / 10.0).max(1e-12);
                    stepped = true;
                    if step_norm < opts.xtol || improvement < opts.ftol {
                        return Some(finish(residuals, params, rss, opts));
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !stepped {
            // damping exhausted: local minimum
            return Some(finish(residuals, params, rss, opts));
        }
    }
    let mut sol = finish(residuals, params, rss, opts);
    sol.n_iterations = n_iter;
    Some(sol)
}

/// Standard errors from the covariance at the optimum:
/// cov = rss/(m−n) · (JᵀJ)⁻¹.
fn finish<F>(residuals: &F, params: [f64; 3], rss: f64, opts: &FitOptions) -> LmSolution
where
    F: Fn(&[f64; 3]) -> Option<DVector<f64>>,
{
    let mut stderr = [0.0f64; 3];
    if let Some(r) = residuals(&params) {
        let m = r.len();
        if m > 3 {
            let mut jac = DMatrix::<f64>::zeros(m, 3);
            let mut ok = true;
            for j in 0..3 {
                let h = opts.jacobian_step * params[j].abs().max(1e-2);
                let mut shifted = params;
                shifted[j] += h;
                match residuals(&shifted) {
                    Some(rj) => {
                        for i in 0..m {
                            jac[(i, j)] = (rj[i] - r[i]) / h;
                        }
                    }
                    None => ok = false,
                }
            }
            if ok {
                let jtj = jac.transpose() * &jac;
                if let Some(cov) = jtj.try_inverse() {
                    let sigma2 = rss / (m - 3) as f64;
                    for d in 0..3 {
                        stderr[d] = (sigma2 * cov[(d, d)]).max(0.0).sqrt();
                    }
                }
            }
        }
    }
    LmSolution { params, rss, stderr, n_iterations: 0 }
}

/// Uniform random starting points: r ∈ [r_min, r_max] nm, θ ∈ [0, π],
/// φ ∈ [0, 2π).
pub fn random_starts(n: usize, r_min: f64, r_max: f64, seed: u64) -> Vec<SphericalVector> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            SphericalVector::new(
                r_min + (r_max - r_min) * rng.random::<f64>(),
                core::f64::consts::PI * rng.random::<f64>(),
                core::f64::consts::TAU * rng.random::<f64>(),
            )
        })
        .collect()
}

fn params_of(v: &SphericalVector) -> [f64; 3] {
    [v.r, v.theta, v.phi]
}

fn vector_of(p: &[f64; 3]) -> SphericalVector {
    SphericalVector::new(p[0].abs(), p[1], p[2]).canonicalize()
}

fn resolved_pairs(
    observations: &[CouplingObservation],
    assignment: &Assignment,
) -> Result<Vec<(P1State, P1State)>> {
    observations
        .iter()
        .zip(assignment)
        .map(|(obs, &i)| {
            obs.validate()?;
            obs.candidates
                .get(i)
                .copied()
                .ok_or_else(|| Error::InvalidArgument("candidate index out of range".into()))
        })
        .collect()
}

/// One start of the P1-pair fit: least squares over r23 against the |X|
/// observations.
pub fn fit_p1_pair_single_start(
    b: &MagneticField,
    observations: &[CouplingObservation],
    assignment: &Assignment,
    start: &SphericalVector,
    opts: &FitOptions,
    c: &PhysicalConstants,
) -> Result<Option<LmSolution>> {
    let pairs = resolved_pairs(observations, assignment)?;
    let eval = PairCouplingEvaluator::new(b, c)?;
    let residuals = |p: &[f64; 3]| -> Option<DVector<f64>> {
        let r23 = vector_of(p);
        if !(r23.r > 0.2) || r23.r > 200.0 {
            return None;
        }
        let mut out = DVector::zeros(observations.len());
        for (k, (obs, pair)) in observations.iter().zip(&pairs).enumerate() {
            match eval.x_coupling(obs.jt, *pair, &r23) {
                Ok(x) => out[k] = x.abs() - obs.value_khz,
                Err(_) => return None,
            }
        }
        Some(out)
    };
    Ok(levenberg_marquardt(&residuals, params_of(start), opts))
}

/// One start of the NV-position fit: least squares over r12 against the D
/// observations with r23 locked.
pub fn fit_nv_single_start(
    b: &MagneticField,
    observations: &[CouplingObservation],
    assignment: &Assignment,
    r23_fixed: &SphericalVector,
    start: &SphericalVector,
    opts: &FitOptions,
    c: &PhysicalConstants,
) -> Result<Option<LmSolution>> {
    let pairs = resolved_pairs(observations, assignment)?;
    let eval = NvCouplingEvaluator::new(b, c)?;
    let r23_cart = r23_fixed.to_cartesian();
    let residuals = |p: &[f64; 3]| -> Option<DVector<f64>> {
        let r12 = vector_of(p);
        if !(r12.r > 0.2) || r12.r > 200.0 {
            return None;
        }
        let r13 = SphericalVector::from_cartesian(&(r12.to_cartesian() + r23_cart));
        if r13.r < 0.2 {
            return None;
        }
        let mut out = DVector::zeros(observations.len());
        for (k, (obs, pair)) in observations.iter().zip(&pairs).enumerate() {
            let r = match obs.kind {
                CouplingKind::NvP1D(P1Site::First) => &r12,
                CouplingKind::NvP1D(P1Site::Second) => &r13,
                CouplingKind::P1PairX => return None,
            };
            match eval.d_coupling(obs.jt, *pair, r) {
                Ok(d) => out[k] = d - obs.value_khz,
                Err(_) => return None,
            }
        }
        Some(out)
    };
    Ok(levenberg_marquardt(&residuals, params_of(start), opts))
}

fn best_solution(solutions: Vec<LmSolution>, n_starts: usize) -> Result<LmSolution> {
    solutions
        .into_iter()
        .min_by(|a, b| a.rss.partial_cmp(&b.rss).unwrap())
        .ok_or(Error::FitFailure { n_starts })
}

/// Multi-start least-squares fit of the P1-P1 separation from |X|
/// observations; the lowest-RSS converged start is returned.
pub fn fit_p1_pair(
    b: &MagneticField,
    observations: &[CouplingObservation],
    assignment: &Assignment,
    n_starts: usize,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<GeometryFit> {
    let opts = FitOptions::default();
    let starts = random_starts(n_starts, 1.0, 30.0, seed);
    let mut solutions = Vec::new();
    for s in &starts {
        if let Some(sol) = fit_p1_pair_single_start(b, observations, assignment, s, &opts, c)? {
            solutions.push(sol);
        }
    }
    let n_converged = solutions.len();
    let best = best_solution(solutions, n_starts)?;
    Ok(GeometryFit {
        r12: None,
        r23: Some(FittedVector { vector: vector_of(&best.params), stderr: best.stderr }),
        rss: best.rss,
        permutation_index: None,
        n_starts,
        n_converged,
        underdetermined: observations.len() < 3,
    })
}

/// Multi-start fit of the NV position against the D observations with the
/// pair separation fixed. Two inversion-symmetric global solutions exist;
/// the returned one is whichever attained the lowest RSS.
pub fn fit_nv_position(
    b: &MagneticField,
    observations: &[CouplingObservation],
    assignment: &Assignment,
    r23_fixed: &SphericalVector,
    n_starts: usize,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<GeometryFit> {
    let opts = FitOptions::default();
    let starts = random_starts(n_starts, 1.0, 30.0, seed);
    let mut solutions = Vec::new();
    for s in &starts {
        if let Some(sol) =
            fit_nv_single_start(b, observations, assignment, r23_fixed, s, &opts, c)?
        {
            solutions.push(sol);
        }
    }
    let n_converged = solutions.len();
    let best = best_solution(solutions, n_starts)?;
    Ok(GeometryFit {
        r12: Some(FittedVector { vector: vector_of(&best.params), stderr: best.stderr }),
        r23: Some(FittedVector { vector: *r23_fixed, stderr: [0.0; 3] }),
        rss: best.rss,
        permutation_index: None,
        n_starts,
        n_converged,
        underdetermined: observations.len() < 3,
    })
}

/// Enumerates the cartesian product of candidate assignments (first
/// observation slowest) and fits each one; results are sorted ascending by
/// RSS and carry their 1-based permutation index.
pub fn permutation_search(
    b: &MagneticField,
    observations: &[CouplingObservation],
    n_starts: usize,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<Vec<(Assignment, GeometryFit)>> {
    for obs in observations {
        obs.validate()?;
    }
    let mut results = Vec::new();
    let n_perms: usize = observations.iter().map(|o| o.candidates.len()).product();
    for index in 0..n_perms {
        // decode index into one candidate choice per observation
        let mut rem = index;
        let mut assignment = Assignment::with_capacity(observations.len());
        for obs in observations.iter().rev() {
            assignment.push(rem % obs.candidates.len());
            rem /= obs.candidates.len();
        }
        assignment.reverse();
        let mut fit = fit_p1_pair(b, observations, &assignment, n_starts, derived_seed(seed, index as u64), c)?;
        fit.permutation_index = Some(index + 1);
        results.push((assignment, fit));
    }
    results.sort_by(|a, b| a.1.rss.partial_cmp(&b.1.rss).unwrap());
    Ok(results)
}

/// The five-coupling pair observation set used for benchmarks, matching the
/// resolved experimental assignments: (axis, state pair) per resonance.
pub fn standard_pair_configurations() -> [(JtAxis, (P1State, P1State)); 5] {
    use ElectronSpin::{Down, Up};
    use NitrogenProjection::{Minus, Plus, Zero};
    [
        (JtAxis::B, (P1State::new(Plus, Up), P1State::new(Plus, Down))),
        (JtAxis::A, (P1State::new(Minus, Up), P1State::new(Minus, Down))),
        (JtAxis::A, (P1State::new(Zero, Up), P1State::new(Zero, Down))),
        (JtAxis::D, (P1State::new(Plus, Up), P1State::new(Plus, Down))),
        (JtAxis::B, (P1State::new(Zero, Up), P1State::new(Zero, Down))),
    ]
}

/// The NV-coupling observation set used for benchmarks: both sites at three
/// axis/nitrogen configurations each.
pub fn standard_nv_configurations() -> [(JtAxis, NitrogenProjection, P1Site); 6] {
    [
        (JtAxis::A, NitrogenProjection::Plus, P1Site::First),
        (JtAxis::B, NitrogenProjection::Zero, P1Site::First),
        (JtAxis::D, NitrogenProjection::Minus, P1Site::First),
        (JtAxis::A, NitrogenProjection::Plus, P1Site::Second),
        (JtAxis::B, NitrogenProjection::Zero, P1Site::Second),
        (JtAxis::D, NitrogenProjection::Minus, P1Site::Second),
    ]
}

/// A synthetic benchmark position: a known geometry with its exact coupling
/// observations.
#[derive(Debug, Clone)]
pub struct BenchmarkPosition {
    pub geometry: DefectGeometry,
    pub x_observations: Vec<CouplingObservation>,
    pub d_observations: Vec<CouplingObservation>,
}

/// Benchmark configuration.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkConfig {
    pub n_positions: usize,
    pub n_noisy_sets: usize,
    /// Relative Gaussian noise applied to each coupling.
    pub noise_rel: f64,
    pub n_starts_pair: usize,
    pub n_starts_nv: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            n_positions: 10,
            n_noisy_sets: 200,
            noise_rel: 0.002,
            n_starts_pair: 300,
            n_starts_nv: 400,
        }
    }
}

/// Draws random defect geometries (r23 ∈ [2, 15] nm, r12 ∈ [3, 12] nm, both
/// uniformly oriented) and computes their exact coupling sets. Geometries
/// whose couplings fall outside the measurable window (0.5 kHz to 150 kHz
/// for |X|) are redrawn.
pub fn generate_benchmark_positions(
    cfg: &BenchmarkConfig,
    b: &MagneticField,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<Vec<BenchmarkPosition>> {
    let pair_eval = PairCouplingEvaluator::new(b, c)?;
    let nv_eval = NvCouplingEvaluator::new(b, c)?;
    let mut rng = rng_from_seed(seed);
    let mut positions = Vec::with_capacity(cfg.n_positions);
    'outer: while positions.len() < cfg.n_positions {
        let r23 = SphericalVector::new(
            2.0 + 13.0 * rng.random::<f64>(),
            core::f64::consts::PI * rng.random::<f64>(),
            core::f64::consts::TAU * rng.random::<f64>(),
        );
        let r12 = SphericalVector::new(
            3.0 + 9.0 * rng.random::<f64>(),
            core::f64::consts::PI * rng.random::<f64>(),
            core::f64::consts::TAU * rng.random::<f64>(),
        );
        let geometry = DefectGeometry::new(r12, r23);
        let mut x_obs = Vec::new();
        for (jt, pair) in standard_pair_configurations() {
            let x = match pair_eval.x_coupling(jt, pair, &r23) {
                Ok(x) => x.abs(),
                Err(_) => continue 'outer,
            };
            if !(0.5..=150.0).contains(&x) {
                continue 'outer;
            }
            x_obs.push(CouplingObservation {
                tau_us: crate::spectro::resonant_tau(x, 0.0).unwrap_or(0.0),
                jt,
                candidates: alloc::vec![pair],
                value_khz: x,
                kind: CouplingKind::P1PairX,
            });
        }
        let r13 = SphericalVector::from_cartesian(&geometry.r13_cartesian());
        if r13.r < 1.5 {
            continue 'outer;
        }
        let mut d_obs = Vec::new();
        for (jt, m_i, site) in standard_nv_configurations() {
            let r = match site {
                P1Site::First => &r12,
                P1Site::Second => &r13,
            };
            let pair =
                (P1State::new(m_i, ElectronSpin::Up), P1State::new(m_i, ElectronSpin::Down));
            let d = match nv_eval.d_coupling(jt, pair, r) {
                Ok(d) => d,
                Err(_) => continue 'outer,
            };
            if d.abs() < 0.05 || d.abs() > 500.0 {
                continue 'outer;
            }
            d_obs.push(CouplingObservation {
                tau_us: 0.0,
                jt,
                candidates: alloc::vec![pair],
                value_khz: d,
                kind: CouplingKind::NvP1D(site),
            });
        }
        positions.push(BenchmarkPosition { geometry, x_observations: x_obs, d_observations: d_obs });
    }
    Ok(positions)
}

/// Errors of one noisy-set reconstruction, Cartesian nm, resolved over the
/// inversion symmetry.
#[derive(Debug, Clone, Copy)]
pub struct SetErrors {
    pub pair_error_nm: f64,
    pub nv_error_nm: f64,
    pub pair_rss: f64,
    pub nv_rss: f64,
}

/// Runs the full fit pipeline on one noisy replica of a benchmark position:
/// perturb the couplings, fit the pair separation, lock it, fit the NV
/// position, and score both against the ground truth (mirror-resolved).
pub fn run_noisy_fit(
    position: &BenchmarkPosition,
    cfg: &BenchmarkConfig,
    b: &MagneticField,
    set_seed: u64,
    c: &PhysicalConstants,
) -> Result<SetErrors> {
    let mut rng = rng_from_seed(set_seed);
    let noisy = |obs: &[CouplingObservation], rng: &mut rand_chacha::ChaCha12Rng| {
        obs.iter()
            .map(|o| {
                let mut o2 = o.clone();
                o2.value_khz *= 1.0 + cfg.noise_rel * crate::rng::sample_standard_normal(rng);
                o2
            })
            .collect::<Vec<_>>()
    };
    let x_noisy = noisy(&position.x_observations, &mut rng);
    let d_noisy = noisy(&position.d_observations, &mut rng);
    let assignment_x: Assignment = alloc::vec![0; x_noisy.len()];
    let assignment_d: Assignment = alloc::vec![0; d_noisy.len()];

    let pair_fit = fit_p1_pair(
        b,
        &x_noisy,
        &assignment_x,
        cfg.n_starts_pair,
        derived_seed(set_seed, 1),
        c,
    )?;
    let r23_hat = pair_fit.r23.as_ref().unwrap().vector;
    let r23_true = position.geometry.r23.to_cartesian();
    let r23_hat_cart = r23_hat.to_cartesian();
    let direct = (r23_hat_cart - r23_true).norm();
    let mirrored = (r23_hat_cart + r23_true).norm();
    let pair_error = direct.min(mirrored);

    let nv_fit = fit_nv_position(
        b,
        &d_noisy,
        &assignment_d,
        &r23_hat,
        cfg.n_starts_nv,
        derived_seed(set_seed, 2),
        c,
    )?;
    let r12_hat = nv_fit.r12.as_ref().unwrap().vector.to_cartesian();
    // the NV truth follows the mirror branch the pair stage selected
    let r12_true = if direct <= mirrored {
        position.geometry.r12.to_cartesian()
    } else {
        -position.geometry.r12.to_cartesian()
    };
    let nv_error = (r12_hat - r12_true).norm();
    Ok(SetErrors {
        pair_error_nm: pair_error,
        nv_error_nm: nv_error,
        pair_rss: pair_fit.rss,
        nv_rss: nv_fit.rss,
    })
}

/// Per-position benchmark summary.
#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub pair_errors_nm: Vec<Vec<f64>>,
    pub nv_errors_nm: Vec<Vec<f64>>,
}

impl BenchmarkReport {
    pub fn median_pair_error(&self) -> f64 {
        median(self.pair_errors_nm.iter().flatten().copied().collect())
    }

    pub fn median_nv_error(&self) -> f64 {
        median(self.nv_errors_nm.iter().flatten().copied().collect())
    }

    pub fn max_nv_error(&self) -> f64 {
        self.nv_errors_nm.iter().flatten().copied().fold(0.0, f64::max)
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return f64::NAN;
    }
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sequential benchmark driver: generate positions, run every noisy set,
/// collect the per-position error tables.
pub fn benchmark(
    cfg: &BenchmarkConfig,
    b: &MagneticField,
    seed: u64,
    c: &PhysicalConstants,
) -> Result<BenchmarkReport> {
    let positions = generate_benchmark_positions(cfg, b, seed, c)?;
    let mut pair_errors = Vec::new();
    let mut nv_errors = Vec::new();
    for (i, pos) in positions.iter().enumerate() {
        let mut pe = Vec::new();
        let mut ne = Vec::new();
        for s in 0..cfg.n_noisy_sets {
            let set_seed = derived_seed(seed, (1 + i as u64) * 100_000 + s as u64);
            let errs = run_noisy_fit(pos, cfg, b, set_seed, c)?;
            pe.push(errs.pair_error_nm);
            ne.push(errs.nv_error_nm);
        }
        pair_errors.push(pe);
        nv_errors.push(ne);
    }
    Ok(BenchmarkReport { pair_errors_nm: pair_errors, nv_errors_nm: nv_errors })
}
