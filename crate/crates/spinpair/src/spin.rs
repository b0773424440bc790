//! Spin operators, rotation algebra, Jahn-Teller axes, and the geometric
//! types of the defect system.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Standard angular-momentum matrices `[Sx, Sy, Sz]` in the Zeeman basis
/// ordered from highest to lowest projection.
///
/// Supported spin quantum numbers are 1/2 and 1.
pub fn spin_operators(s: f64) -> Result<[CMatrix; 3]> {
    if (s - 0.5).abs() > 1e-12 && (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("unsupported spin quantum number {s}")));
    }
    let n = (2.0 * s + 1.0).round() as usize;
    let m = |k: usize| s - k as f64;
    let mut sp = CMatrix::zeros(n, n); // raising operator
    for k in 1..n {
        let amp = (s * (s + 1.0) - m(k) * (m(k) + 1.0)).sqrt();
        sp[(k - 1, k)] = C64::new(amp, 0.0);
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm).scale(0.5);
    let sy = (&sp - &sm) * C64::new(0.0, -0.5);
    let mut sz = CMatrix::zeros(n, n);
    for k in 0..n {
        sz[(k, k)] = C64::new(m(k), 0.0);
    }
    Ok([sx, sy, sz])
}

/// Two-angle rotation matrix (the gamma = 0 form valid for axially symmetric
/// tensors). Angles in degrees. Orthogonal with determinant +1.
pub fn rotation_matrix(alpha_deg: f64, beta_deg: f64) -> Matrix3<f64> {
    let a = alpha_deg.to_radians();
    let b = beta_deg.to_radians();
    let (sa, ca) = (a.sin(), a.cos());
    let (sb, cb) = (b.sin(), b.cos());
    Matrix3::new(
        cb * ca, cb * sa, -sb, //
        -sa, ca, 0.0, //
        sb * ca, sb * sa, cb,
    )
}

/// One of the four Jahn-Teller distortion axes of a P1 center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JtAxis {
    A,
    B,
    C,
    D,
}

impl JtAxis {
    pub const ALL: [JtAxis; 4] = [JtAxis::A, JtAxis::B, JtAxis::C, JtAxis::D];

    pub fn letter(&self) -> char {
        match self {
            JtAxis::A => 'A',
            JtAxis::B => 'B',
            JtAxis::C => 'C',
            JtAxis::D => 'D',
        }
    }

    pub fn from_letter(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'A' => Ok(JtAxis::A),
            'B' => Ok(JtAxis::B),
            'C' => Ok(JtAxis::C),
            'D' => Ok(JtAxis::D),
            other => Err(Error::InvalidArgument(format!("unknown Jahn-Teller axis '{other}'"))),
        }
    }
}

/// The two lattice orientations a P1 center can take for a given axis.
/// They produce identical single-P1 Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Orientation {
    #[default]
    Primary,
    Mirror,
}

/// Jahn-Teller axis together with its lattice orientation variant; carries
/// the Euler angles that rotate the hyperfine and quadrupole tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JahnTellerAxis {
    pub axis: JtAxis,
    pub orientation: Orientation,
}

impl JahnTellerAxis {
    pub fn new(axis: JtAxis) -> Self {
        JahnTellerAxis { axis, orientation: Orientation::Primary }
    }

    pub fn mirrored(axis: JtAxis) -> Self {
        JahnTellerAxis { axis, orientation: Orientation::Mirror }
    }

    /// Euler angles (alpha, beta) in degrees for this axis and orientation.
    pub fn euler_angles_deg(&self) -> (f64, f64) {
        let (alpha, beta) = match self.axis {
            JtAxis::A => (0.0, 109.5),
            JtAxis::B => (120.0, 109.5),
            JtAxis::C => (240.0, 109.5),
            JtAxis::D => (0.0, 0.0),
        };
        match self.orientation {
            Orientation::Primary => (alpha, beta),
            Orientation::Mirror => ((alpha + 180.0) % 360.0, 180.0 - beta),
        }
    }
}

/// Rotates an axially symmetric diagonal tensor onto a Jahn-Teller axis:
/// Rᵀ·diag·R with the axial principal value aligned with the axis direction.
///
/// `m_diag = [axial, t, t]` carries the axial value first and the two
/// degenerate transverse values in positions 2 and 3.
pub fn rotate_tensor(m_diag: [f64; 3], jt: &JahnTellerAxis) -> Matrix3<f64> {
    let (alpha, beta) = jt.euler_angles_deg();
    let r = rotation_matrix(alpha, beta);
    // The axial direction is the third row of R (polar angle beta, azimuth
    // alpha), so the axial value occupies the third principal slot.
    let d = Matrix3::from_diagonal(&Vector3::new(m_diag[1], m_diag[2], m_diag[0]));
    r.transpose() * d * r
}

/// Static magnetic field in Gauss, components along the NV frame axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticField {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl MagneticField {
    pub fn new(bx: f64, by: f64, bz: f64) -> Self {
        MagneticField { bx, by, bz }
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.bx, self.by, self.bz)
    }

    pub fn magnitude(&self) -> f64 {
        self.vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.bx.is_finite() && self.by.is_finite() && self.bz.is_finite()
    }
}

/// Spherical vector (r in nm, polar angle theta and azimuth phi in rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalVector {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphericalVector {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        SphericalVector { r, theta, phi }
    }

    pub fn to_cartesian(&self) -> Vector3<f64> {
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        Vector3::new(self.r * st * cp, self.r * st * sp, self.r * ct)
    }

    pub fn from_cartesian(v: &Vector3<f64>) -> Self {
        let r = v.norm();
        if r == 0.0 {
            return SphericalVector { r: 0.0, theta: 0.0, phi: 0.0 };
        }
        let theta = (v.z / r).clamp(-1.0, 1.0).acos();
        let mut phi = v.y.atan2(v.x);
        if phi < 0.0 {
            phi += core::f64::consts::TAU;
        }
        SphericalVector { r, theta, phi }
    }

    /// Canonical form: r > 0, theta in [0, pi], phi in [0, 2 pi).
    pub fn canonicalize(&self) -> Self {
        Self::from_cartesian(&self.to_cartesian())
    }
}

/// Relative positions of the three defects: NV → P1₁ and P1₁ → P1₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectGeometry {
    pub r12: SphericalVector,
    pub r23: SphericalVector,
}

impl DefectGeometry {
    pub fn new(r12: SphericalVector, r23: SphericalVector) -> Self {
        DefectGeometry { r12, r23 }
    }

    /// NV → P1₂ separation in Cartesian nm.
    pub fn r13_cartesian(&self) -> Vector3<f64> {
        self.r12.to_cartesian() + self.r23.to_cartesian()
    }
}

/// Electron spin-1/2 projection label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElectronSpin {
    Up,
    Down,
}

impl ElectronSpin {
    pub const ALL: [ElectronSpin; 2] = [ElectronSpin::Up, ElectronSpin::Down];

    pub fn flipped(&self) -> Self {
        match self {
            ElectronSpin::Up => ElectronSpin::Down,
            ElectronSpin::Down => ElectronSpin::Up,
        }
    }
}

/// ¹⁴N spin-1 projection label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NitrogenProjection {
    Plus,
    Zero,
    Minus,
}

impl NitrogenProjection {
    pub const ALL: [NitrogenProjection; 3] =
        [NitrogenProjection::Plus, NitrogenProjection::Zero, NitrogenProjection::Minus];

    pub fn m_i(&self) -> i8 {
        match self {
            NitrogenProjection::Plus => 1,
            NitrogenProjection::Zero => 0,
            NitrogenProjection::Minus => -1,
        }
    }

    pub fn symbol(&self) -> char {
        match self {
            NitrogenProjection::Plus => '+',
            NitrogenProjection::Zero => '0',
            NitrogenProjection::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Result<Self> {
        match c {
            '+' => Ok(NitrogenProjection::Plus),
            '0' => Ok(NitrogenProjection::Zero),
            '-' => Ok(NitrogenProjection::Minus),
            other => Err(Error::InvalidArgument(format!("unknown nitrogen projection '{other}'"))),
        }
    }
}

/// Label of the six single-P1 eigenstates in the high-field notation
/// |m_I, m_S⟩. At finite field the labels refer to the eigenstates with
/// maximum overlap on the corresponding product kets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct P1State {
    pub nitrogen: NitrogenProjection,
    pub electron: ElectronSpin,
}

impl P1State {
    pub fn new(nitrogen: NitrogenProjection, electron: ElectronSpin) -> Self {
        P1State { nitrogen, electron }
    }

    /// All six states in the fixed basis order |+↑⟩,|+↓⟩,|0↑⟩,|0↓⟩,|−↑⟩,|−↓⟩.
    pub fn all() -> [P1State; 6] {
        let mut out = [P1State::new(NitrogenProjection::Plus, ElectronSpin::Up); 6];
        let mut k = 0;
        for n in NitrogenProjection::ALL {
            for e in ElectronSpin::ALL {
                out[k] = P1State::new(n, e);
                k += 1;
            }
        }
        out
    }

    /// Index in the fixed product-basis ordering.
    pub fn basis_index(&self) -> usize {
        let ni = match self.nitrogen {
            NitrogenProjection::Plus => 0,
            NitrogenProjection::Zero => 1,
            NitrogenProjection::Minus => 2,
        };
        let ei = match self.electron {
            ElectronSpin::Up => 0,
            ElectronSpin::Down => 1,
        };
        ni * 2 + ei
    }

    /// Compact label such as `+u`, `0d`, `-u`.
    pub fn label(&self) -> String {
        let e = match self.electron {
            ElectronSpin::Up => 'u',
            ElectronSpin::Down => 'd',
        };
        format!("{}{}", self.nitrogen.symbol(), e)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 2 {
            return Err(Error::InvalidArgument(format!("bad P1 state label '{s}'")));
        }
        let nitrogen = NitrogenProjection::from_symbol(chars[0])?;
        let electron = match chars[1] {
            'u' => ElectronSpin::Up,
            'd' => ElectronSpin::Down,
            other => {
                return Err(Error::InvalidArgument(format!("unknown electron label '{other}'")))
            }
        };
        Ok(P1State { nitrogen, electron })
    }
}

impl core::fmt::Display for P1State {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.label())
    }
}
