//! Construction of the NV, P1, dipolar, and composite Hamiltonians.
//!
//! Basis conventions, fixed crate-wide:
//! * single P1 (dim 6): |m_I⟩ ⊗ |m_S⟩ with m_I ∈ {+1, 0, −1} outer and
//!   m_S ∈ {↑, ↓} inner;
//! * NV (dim 3): |m_s⟩ ∈ {+1, 0, −1};
//! * composites: NV ⊗ P1₁ ⊗ P1₂ in that order.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use num_traits::Float;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::linalg::{eye, kron, CMatrix, HermitianOperator, C64};
use crate::spin::{spin_operators, JahnTellerAxis, MagneticField, rotate_tensor};

/// Nitrogen (spin-1) and electron (spin-1/2) operator triples embedded in
/// the 6-dimensional single-P1 space.
pub fn p1_embedded_operators() -> ([CMatrix; 3], [CMatrix; 3]) {
    let i_ops = spin_operators(1.0).expect("spin 1");
    let j_ops = spin_operators(0.5).expect("spin 1/2");
    let id3 = eye(3);
    let id2 = eye(2);
    let i_emb = [kron(&i_ops[0], &id2), kron(&i_ops[1], &id2), kron(&i_ops[2], &id2)];
    let j_emb = [kron(&id3, &j_ops[0]), kron(&id3, &j_ops[1]), kron(&id3, &j_ops[2])];
    (i_emb, j_emb)
}

/// Single-P1 Hamiltonian (dim 6, MHz): electron and nuclear Zeeman terms,
/// hyperfine coupling, and quadrupole interaction, with the tensors rotated
/// onto the Jahn-Teller axis.
///
/// The nuclear Zeeman term enters with the opposite sign to the electron
/// term: in the electron-positive convention the two magnetic moments have
/// opposite signs.
pub fn build_p1_hamiltonian(
    b: &MagneticField,
    jt: &JahnTellerAxis,
    c: &PhysicalConstants,
) -> HermitianOperator {
    let i_ops = spin_operators(1.0).expect("spin 1");
    let j_ops = spin_operators(0.5).expect("spin 1/2");
    let id3 = eye(3);
    let id2 = eye(2);
    let a = rotate_tensor(c.a_diag, jt);
    let p = rotate_tensor(c.p_diag, jt);
    let bv = b.vector();
    let mut h = CMatrix::zeros(6, 6);
    for k in 0..3 {
        h -= kron(&i_ops[k], &id2).scale(c.gamma_n * bv[k]);
        h += kron(&id3, &j_ops[k]).scale(c.gamma_e * bv[k]);
    }
    for j in 0..3 {
        for k in 0..3 {
            if a[(j, k)] != 0.0 {
                // J_j A_jk I_k = A_jk (I_k ⊗ J_j) in the nitrogen ⊗ electron
                // ordering.
                h += kron(&i_ops[k], &j_ops[j]).scale(a[(j, k)]);
            }
            if p[(j, k)] != 0.0 {
                h += kron(&(&i_ops[j] * &i_ops[k]), &id2).scale(p[(j, k)]);
            }
        }
    }
    HermitianOperator::from_parts(h)
}

/// NV electron spin-1 Hamiltonian (dim 3, MHz): zero-field splitting plus
/// Zeeman term. The NV nitrogen spin is omitted.
pub fn build_nv_hamiltonian(b: &MagneticField, c: &PhysicalConstants) -> HermitianOperator {
    let s_ops = spin_operators(1.0).expect("spin 1");
    let bv = b.vector();
    let mut h = (&s_ops[2] * &s_ops[2]).scale(c.zfs_delta);
    for k in 0..3 {
        h += s_ops[k].scale(c.gamma_e * bv[k]);
    }
    HermitianOperator::from_parts(h)
}

/// Dipolar coupling tensor c_jk = D (3 û_j û_k − δ_jk) with
/// D = −prefactor/r³ (MHz), for unit separation direction û.
pub fn dipolar_tensor(r_vec: &Vector3<f64>, prefactor: f64) -> Result<Matrix3<f64>> {
    let r = r_vec.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument("dipolar separation must be positive and finite".into()));
    }
    let u = r_vec / r;
    let d = -prefactor / (r * r * r);
    let mut m = Matrix3::zeros();
    for j in 0..3 {
        for k in 0..3 {
            m[(j, k)] = d * (3.0 * u[j] * u[k] - if j == k { 1.0 } else { 0.0 });
        }
    }
    Ok(m)
}

/// Full (non-secular) dipole-dipole Hamiltonian
/// D·(3(A·r̂)(B·r̂) − A·B) on the tensor product of the two operand spaces,
/// with `ops_a` acting on the left factor and `ops_b` on the right.
pub fn build_dipolar_hamiltonian(
    r_vec: &Vector3<f64>,
    ops_a: &[CMatrix; 3],
    ops_b: &[CMatrix; 3],
    prefactor: f64,
) -> Result<HermitianOperator> {
    let c = dipolar_tensor(r_vec, prefactor)?;
    let dim_a = ops_a[0].nrows();
    let dim_b = ops_b[0].nrows();
    // (A_j ⊗ 1)(1 ⊗ B_k) = A_j ⊗ B_k, so each term is a single Kronecker
    // product.
    let mut h = CMatrix::zeros(dim_a * dim_b, dim_a * dim_b);
    for j in 0..3 {
        for k in 0..3 {
            if c[(j, k)] != 0.0 {
                h += kron(&ops_a[j], &ops_b[k]).scale(c[(j, k)]);
            }
        }
    }
    Ok(HermitianOperator::from_parts(h))
}

/// P1-pair Hamiltonian with a different magnetic field at each site, used
/// to model spatially uncorrelated field noise.
pub fn build_pair_hamiltonian_with_fields(
    b1: &MagneticField,
    b2: &MagneticField,
    r23: &Vector3<f64>,
    jt1: &JahnTellerAxis,
    jt2: &JahnTellerAxis,
    c: &PhysicalConstants,
) -> Result<HermitianOperator> {
    let h1 = build_p1_hamiltonian(b1, jt1, c);
    let h2 = build_p1_hamiltonian(b2, jt2, c);
    let id6 = eye(6);
    let (_, j_emb) = p1_embedded_operators();
    let mut h = kron(h1.matrix(), &id6) + kron(&id6, h2.matrix());
    h += build_dipolar_hamiltonian(r23, &j_emb, &j_emb, c.dipolar_prefactor)?.into_matrix();
    Ok(HermitianOperator::from_parts(h))
}

/// Which defects the composite Hamiltonian includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    /// P1₁ ⊗ P1₂, dim 36.
    P1Pair,
    /// NV ⊗ P1₁, dim 18.
    NvP1,
    /// NV ⊗ P1₁ ⊗ P1₂, dim 108.
    NvP1P1,
}

/// Treatment of the NV-P1 dipolar terms in composites containing the NV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NvCoupling {
    /// Full non-secular dipole-dipole Hamiltonian.
    #[default]
    Full,
    /// Pure-dephasing approximation: the dipolar term is projected onto the
    /// NV eigenbasis (block-diagonal in m_s), so the NV conditions the P1
    /// evolution without exchanging energy. For an NV quantized along z this
    /// reduces to the Ŝz Ĵz form.
    Secular,
}

/// Separation vectors for a composite, in Cartesian nm.
struct Separations {
    r12: Option<Vector3<f64>>,
    r23: Option<Vector3<f64>>,
    r13: Option<Vector3<f64>>,
}

fn validated_separation(v: Vector3<f64>, what: &str) -> Result<Vector3<f64>> {
    let r = v.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!(
            "geometry component {what} must have positive finite length"
        )));
    }
    Ok(v)
}

/// NV-P1 dipolar term in the pure-dephasing (NV-block-diagonal) form:
/// Σ_{m_s} |m_s⟩⟨m_s| ⊗ Σ_k (Σ_j c_jk ⟨S_j⟩_{m_s}) J_k.
fn secular_nv_p1_term(
    nv_h: &HermitianOperator,
    c_tensor: &Matrix3<f64>,
    j_p1: &[CMatrix; 3],
) -> CMatrix {
    let (_, nv_vecs) = nv_h.eigh();
    let s_ops = spin_operators(1.0).expect("spin 1");
    let mut out = CMatrix::zeros(3 * j_p1[0].nrows(), 3 * j_p1[0].nrows());
    for m in 0..3 {
        let v = nv_vecs.column(m).into_owned();
        let mut s_exp = [0.0f64; 3];
        for (j, op) in s_ops.iter().enumerate() {
            s_exp[j] = v.dotc(&(op * &v)).re;
        }
        let proj = &v * v.adjoint();
        let mut w = CMatrix::zeros(j_p1[0].nrows(), j_p1[0].nrows());
        for k in 0..3 {
            let coef: f64 = (0..3).map(|j| c_tensor[(j, k)] * s_exp[j]).sum();
            w += j_p1[k].scale(coef);
        }
        out += kron(&proj, &w);
    }
    out
}

/// Composite Hamiltonian of the chosen subsystem: single-defect terms
/// embedded with identity factors plus all pairwise dipolar couplings among
/// the included electron spins.
pub fn build_composite_hamiltonian(
    b: &MagneticField,
    geometry: &crate::spin::DefectGeometry,
    jt1: &JahnTellerAxis,
    jt2: &JahnTellerAxis,
    subsystem: Subsystem,
    nv_coupling: NvCoupling,
    c: &PhysicalConstants,
) -> Result<HermitianOperator> {
    let seps = match subsystem {
        Subsystem::P1Pair => Separations {
            r12: None,
            r23: Some(validated_separation(geometry.r23.to_cartesian(), "r23")?),
            r13: None,
        },
        Subsystem::NvP1 => Separations {
            r12: Some(validated_separation(geometry.r12.to_cartesian(), "r12")?),
            r23: None,
            r13: None,
        },
        Subsystem::NvP1P1 => Separations {
            r12: Some(validated_separation(geometry.r12.to_cartesian(), "r12")?),
            r23: Some(validated_separation(geometry.r23.to_cartesian(), "r23")?),
            r13: Some(validated_separation(geometry.r13_cartesian(), "r12 + r23")?),
        },
    };

    let (_, j_emb) = p1_embedded_operators();
    let s_ops = spin_operators(1.0).expect("spin 1");

    match subsystem {
        Subsystem::P1Pair => {
            let h1 = build_p1_hamiltonian(b, jt1, c);
            let h2 = build_p1_hamiltonian(b, jt2, c);
            let id6 = eye(6);
            let mut h = kron(h1.matrix(), &id6) + kron(&id6, h2.matrix());
            h += build_dipolar_hamiltonian(
                &seps.r23.unwrap(),
                &j_emb,
                &j_emb,
                c.dipolar_prefactor,
            )?
            .into_matrix();
            Ok(HermitianOperator::from_parts(h))
        }
        Subsystem::NvP1 => {
            let hnv = build_nv_hamiltonian(b, c);
            let h1 = build_p1_hamiltonian(b, jt1, c);
            let id6 = eye(6);
            let id3 = eye(3);
            let mut h = kron(hnv.matrix(), &id6) + kron(&id3, h1.matrix());
            let r12 = seps.r12.unwrap();
            match nv_coupling {
                NvCoupling::Full => {
                    h += build_dipolar_hamiltonian(&r12, &s_ops, &j_emb, c.dipolar_prefactor)?
                        .into_matrix();
                }
                NvCoupling::Secular => {
                    let ct = dipolar_tensor(&r12, c.dipolar_prefactor)?;
                    h += secular_nv_p1_term(&hnv, &ct, &j_emb);
                }
            }
            Ok(HermitianOperator::from_parts(h))
        }
        Subsystem::NvP1P1 => {
            let hnv = build_nv_hamiltonian(b, c);
            let h1 = build_p1_hamiltonian(b, jt1, c);
            let h2 = build_p1_hamiltonian(b, jt2, c);
            let id3 = eye(3);
            let id6 = eye(6);
            let id36 = eye(36);
            let mut h = kron(hnv.matrix(), &id36)
                + kron(&id3, &kron(h1.matrix(), &id6))
                + kron(&id3, &kron(&id6, h2.matrix()));
            // P1-P1 dipolar on the pair factor, NV as identity.
            let hd23 =
                build_dipolar_hamiltonian(&seps.r23.unwrap(), &j_emb, &j_emb, c.dipolar_prefactor)?;
            h += kron(&id3, hd23.matrix());
            // NV-P1 couplings: embed P1 electron ops in the 36-dim pair space.
            let j1_pair: [CMatrix; 3] = core::array::from_fn(|k| kron(&j_emb[k], &id6));
            let j2_pair: [CMatrix; 3] = core::array::from_fn(|k| kron(&id6, &j_emb[k]));
            for (r, j_pair) in
                [(seps.r12.unwrap(), &j1_pair), (seps.r13.unwrap(), &j2_pair)]
            {
                match nv_coupling {
                    NvCoupling::Full => {
                        h += build_dipolar_hamiltonian(&r, &s_ops, j_pair, c.dipolar_prefactor)?
                            .into_matrix();
                    }
                    NvCoupling::Secular => {
                        let ct = dipolar_tensor(&r, c.dipolar_prefactor)?;
                        h += secular_nv_p1_term(&hnv, &ct, j_pair);
                    }
                }
            }
            Ok(HermitianOperator::from_parts(h))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{DefectGeometry, JtAxis, SphericalVector};

    fn paper_field() -> MagneticField {
        MagneticField::new(2.43, 1.42, 45.552)
    }

    fn geometry() -> DefectGeometry {
        DefectGeometry::new(
            SphericalVector::new(9.0, 1.9, 2.5),
            SphericalVector::new(6.0, 1.1, 0.7),
        )
    }

    #[test]
    fn p1_hamiltonian_is_hermitian() {
        let h = build_p1_hamiltonian(&paper_field(), &JahnTellerAxis::new(JtAxis::A), &PhysicalConstants::default());
        let m = h.matrix();
        assert!((m - m.adjoint()).norm() / m.norm() < 1e-12);
    }

    #[test]
    fn nv_zero_field_eigenvalues() {
        let c = PhysicalConstants::default();
        let h = build_nv_hamiltonian(&MagneticField::new(0.0, 0.0, 0.0), &c);
        let (vals, _) = h.eigh();
        assert!(vals[0].abs() < 1e-9);
        assert!((vals[1] - c.zfs_delta).abs() < 1e-9);
        assert!((vals[2] - c.zfs_delta).abs() < 1e-9);
    }

    #[test]
    fn nv_axial_field_eigenvalues() {
        let c = PhysicalConstants::default();
        let bz = 45.552;
        let h = build_nv_hamiltonian(&MagneticField::new(0.0, 0.0, bz), &c);
        let (vals, _) = h.eigh();
        let gz = c.gamma_e * bz;
        assert!(vals[0].abs() < 1e-9);
        assert!((vals[1] - (c.zfs_delta - gz)).abs() < 1e-9);
        assert!((vals[2] - (c.zfs_delta + gz)).abs() < 1e-9);
    }

    #[test]
    fn nv_misaligned_splitting_near_perturbative_estimate() {
        let c = PhysicalConstants::default();
        let b = paper_field();
        let h = build_nv_hamiltonian(&b, &c);
        let (vals, _) = h.eigh();
        // ascending: {~0, Δ-γBz-ish, Δ+γBz-ish}
        let gap = vals[1] - vals[0];
        let estimate = c.zfs_delta - c.gamma_e * 45.552;
        assert!((gap - estimate).abs() < 1.0, "gap {gap} vs {estimate}");
    }

    #[test]
    fn dipolar_inverse_cube_scaling() {
        let c = PhysicalConstants::default();
        let j = spin_operators(0.5).unwrap();
        let r1 = Vector3::new(0.4, 0.7, 0.9);
        let h1 = build_dipolar_hamiltonian(&r1, &j, &j, c.dipolar_prefactor).unwrap();
        let h2 = build_dipolar_hamiltonian(&(r1 * 2.0), &j, &j, c.dipolar_prefactor).unwrap();
        let diff = (h1.matrix().scale(1.0 / 8.0) - h2.matrix()).norm() / h1.matrix().norm();
        assert!(diff < 1e-12);
    }

    #[test]
    fn dipolar_exchange_symmetry() {
        // Swapping operand order together with r̂ → −r̂ permutes the tensor
        // factors.
        let c = PhysicalConstants::default();
        let i_ops = spin_operators(1.0).unwrap();
        let j_ops = spin_operators(0.5).unwrap();
        let r = Vector3::new(0.3, -0.8, 1.1);
        let h_ab = build_dipolar_hamiltonian(&r, &i_ops, &j_ops, c.dipolar_prefactor).unwrap();
        let h_ba = build_dipolar_hamiltonian(&(-r), &j_ops, &i_ops, c.dipolar_prefactor).unwrap();
        // permutation matrix: (a ⊗ b) -> (b ⊗ a) for dims 3 ⊗ 2
        let mut p = CMatrix::zeros(6, 6);
        for a in 0..3 {
            for b in 0..2 {
                p[(b * 3 + a, a * 2 + b)] = C64::new(1.0, 0.0);
            }
        }
        let mapped = &p * h_ab.matrix() * p.adjoint();
        assert!((mapped - h_ba.matrix()).norm() < 1e-12);
    }

    #[test]
    fn dipolar_is_traceless() {
        let c = PhysicalConstants::default();
        let j = spin_operators(0.5).unwrap();
        let h = build_dipolar_hamiltonian(&Vector3::new(1.0, 2.0, 3.0), &j, &j, c.dipolar_prefactor)
            .unwrap();
        let tr: C64 = h.matrix().diagonal().iter().sum();
        assert!(tr.norm() < 1e-12);
    }

    #[test]
    fn dipolar_zero_separation_rejected() {
        let j = spin_operators(0.5).unwrap();
        assert!(build_dipolar_hamiltonian(&Vector3::zeros(), &j, &j, 52.0).is_err());
    }

    #[test]
    fn composite_dimensions() {
        let c = PhysicalConstants::default();
        let b = paper_field();
        let g = geometry();
        let a1 = JahnTellerAxis::new(JtAxis::A);
        let a2 = JahnTellerAxis::new(JtAxis::B);
        for (sub, dim) in [
            (Subsystem::P1Pair, 36),
            (Subsystem::NvP1, 18),
            (Subsystem::NvP1P1, 108),
        ] {
            let h = build_composite_hamiltonian(&b, &g, &a1, &a2, sub, NvCoupling::Full, &c)
                .unwrap();
            assert_eq!(h.dim(), dim);
            let m = h.matrix();
            assert!((m - m.adjoint()).norm() / m.norm() < 1e-12);
        }
    }

    #[test]
    fn composite_noninteracting_limit() {
        // With the dipolar prefactor forced to zero the spectrum is the
        // multiset of single-defect eigenvalue sums.
        let mut c = PhysicalConstants::default();
        c.dipolar_prefactor = 0.0;
        let b = paper_field();
        let g = geometry();
        let a1 = JahnTellerAxis::new(JtAxis::A);
        let a2 = JahnTellerAxis::new(JtAxis::D);
        let h = build_composite_hamiltonian(&b, &g, &a1, &a2, Subsystem::P1Pair, NvCoupling::Full, &c)
            .unwrap();
        let (vals, _) = h.eigh();
        let (v1, _) = build_p1_hamiltonian(&b, &a1, &c).eigh();
        let (v2, _) = build_p1_hamiltonian(&b, &a2, &c).eigh();
        let mut sums: Vec<f64> = Vec::new();
        for x in v1.iter() {
            for y in v2.iter() {
                sums.push(x + y);
            }
        }
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in vals.iter().zip(sums.iter()) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn p1_orientation_invariance() {
        let c = PhysicalConstants::default();
        let b = paper_field();
        for axis in JtAxis::ALL {
            let hp = build_p1_hamiltonian(&b, &JahnTellerAxis::new(axis), &c);
            let hm = build_p1_hamiltonian(&b, &JahnTellerAxis::mirrored(axis), &c);
            let rel = (hp.matrix() - hm.matrix()).norm() / hp.matrix().norm();
            assert!(rel < 1e-10, "axis {axis:?}: {rel}");
        }
    }
}
