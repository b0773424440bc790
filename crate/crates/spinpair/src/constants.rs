//! Physical constants of the NV-P1 system.

/// Planck constant, J·s.
const H_PLANCK: f64 = 6.626_070_15e-34;
/// mu_0 / 4 pi, T^2 m^3 / J.
const MU0_OVER_4PI: f64 = 1e-7;

/// Constants entering the spin Hamiltonians.
///
/// All values are in the unit system used crate-wide: MHz, Gauss, nm.
/// Defaults are compiled in; every field can be overridden from a run
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConstants {
    /// Electron gyromagnetic ratio magnitude, MHz/G.
    pub gamma_e: f64,
    /// ¹⁴N nuclear gyromagnetic ratio magnitude, MHz/G.
    ///
    /// In the electron-positive sign convention used here the nuclear Zeeman
    /// term enters the Hamiltonian with the opposite sign to the electron
    /// term (the two moments precess in opposite senses).
    pub gamma_n: f64,
    /// ¹³C nuclear gyromagnetic ratio magnitude, MHz/G.
    pub gamma_c: f64,
    /// NV ground-state zero-field splitting, MHz.
    pub zfs_delta: f64,
    /// Electron-electron dipolar constant mu0 gamma_e^2 hbar / 4 pi expressed
    /// as MHz·nm³; the coupling at separation r is `-dipolar_prefactor / r³`.
    pub dipolar_prefactor: f64,
    /// P1 hyperfine principal values [axial, transverse, transverse], MHz.
    /// The axial value lies along the Jahn-Teller axis.
    pub a_diag: [f64; 3],
    /// P1 quadrupole principal values [axial, transverse, transverse], MHz.
    /// Signed, near-traceless; the axial value lies along the Jahn-Teller
    /// axis.
    pub p_diag: [f64; 3],
}

impl PhysicalConstants {
    /// Dipolar prefactor implied by an electron gyromagnetic ratio in MHz/G.
    ///
    /// gamma in MHz/G equals gamma·1e10 Hz/T; the prefactor
    /// mu0/(4 pi) · h · gamma_SI² is converted to MHz·nm³.
    pub fn dipolar_prefactor_from_gamma(gamma_e_mhz_per_g: f64) -> f64 {
        let gamma_si = gamma_e_mhz_per_g * 1e10; // Hz/T
        MU0_OVER_4PI * H_PLANCK * gamma_si * gamma_si * 1e21
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        let gamma_e = 2.8024;
        PhysicalConstants {
            gamma_e,
            gamma_n: 3.078e-4,
            gamma_c: 1.0705e-3,
            zfs_delta: 2870.0,
            dipolar_prefactor: Self::dipolar_prefactor_from_gamma(gamma_e),
            a_diag: [114.03, 81.31, 81.31],
            // Printed magnitudes [2.65, 1.32, 1.32]; the axial component is
            // negative (traceless quadrupole tensor, axial minus twice the
            // transverse value).
            p_diag: [-2.65, 1.32, 1.32],
        }
    }
}
