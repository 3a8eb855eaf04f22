//! Fourier modes on the periodic interface `omega = [0, 2*pi)`.
//!
//! Modes are L2-normalized and have zero mean (`k >= 1` only): the volume of
//! the channel is conserved exactly when the wall moves along these modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of the periodic interface.
pub const OMEGA_LEN: f64 = std::f64::consts::TAU;

/// `1/sqrt(pi)`: L2 normalization of `cos(k y)` and `sin(k y)` on `[0, 2*pi)`.
pub const NORM: f64 = 0.564_189_583_547_756_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// A normalized Fourier mode `cos(k y)/sqrt(pi)` or `sin(k y)/sqrt(pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShellMode {
    pub k: u32,
    pub parity: Parity,
}

impl ShellMode {
    pub fn new(k: u32, parity: Parity) -> Result<Self> {
        if k == 0 {
            return Err(Error::Geometry(
                "k = 0 shell mode rejected: zero-mean modes only (volume conservation)".into(),
            ));
        }
        Ok(ShellMode { k, parity })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let ky = self.k as f64 * y;
        match self.parity {
            Parity::Cos => NORM * ky.cos(),
            Parity::Sin => NORM * ky.sin(),
        }
    }

    /// n-th derivative in `y`.
    pub fn deriv(&self, y: f64, order: u32) -> f64 {
        let k = self.k as f64;
        let ky = k * y;
        let kn = k.powi(order as i32);
        let (c, s) = (ky.cos(), ky.sin());
        let base = match (self.parity, order % 4) {
            (Parity::Cos, 0) => c,
            (Parity::Cos, 1) => -s,
            (Parity::Cos, 2) => -c,
            (Parity::Cos, 3) => s,
            (Parity::Sin, 0) => s,
            (Parity::Sin, 1) => c,
            (Parity::Sin, 2) => -s,
            (Parity::Sin, 3) => -c,
            _ => unreachable!(),
        };
        NORM * kn * base
    }

    /// Antiderivative `P` with `P' = psi`, itself periodic (zero-mean input).
    pub fn antiderivative(&self, y: f64) -> f64 {
        let k = self.k as f64;
        let ky = k * y;
        match self.parity {
            Parity::Cos => NORM * ky.sin() / k,
            Parity::Sin => -NORM * ky.cos() / k,
        }
    }
}

/// The canonical mode ordering: (1,cos), (1,sin), (2,cos), (2,sin), ...
pub fn mode_table(n: usize) -> Vec<ShellMode> {
    (0..n)
        .map(|i| ShellMode {
            k: (i / 2 + 1) as u32,
            parity: if i % 2 == 0 { Parity::Cos } else { Parity::Sin },
        })
        .collect()
}

/// A scalar field on the interface expressed in the canonical mode basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalProfile {
    pub coeffs: Vec<f64>,
}

impl ModalProfile {
    pub fn zeros(n: usize) -> Self {
        ModalProfile {
            coeffs: vec![0.0; n],
        }
    }

    pub fn modes(&self) -> Vec<ShellMode> {
        mode_table(self.coeffs.len())
    }

    pub fn value(&self, y: f64) -> f64 {
        self.deriv(y, 0)
    }

    pub fn deriv(&self, y: f64, order: u32) -> f64 {
        mode_table(self.coeffs.len())
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| c * m.deriv(y, order))
            .sum()
    }

    /// Sup norm estimated on a dense uniform sample.
    pub fn sup_norm(&self) -> f64 {
        let n = 64.max(8 * self.coeffs.len());
        (0..n)
            .map(|i| self.value(i as f64 * OMEGA_LEN / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// L2 norm over the interface (Parseval; modes are orthonormal).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Spectral cutoff: zero every coefficient with wavenumber above `k_max`.
    pub fn cutoff(&self, k_max: u32) -> Self {
        let modes = mode_table(self.coeffs.len());
        ModalProfile {
            coeffs: self
                .coeffs
                .iter()
                .zip(&modes)
                .map(|(c, m)| if m.k <= k_max { *c } else { 0.0 })
                .collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &ModalProfile) {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        ModalProfile {
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    pub fn lerp(&self, other: &ModalProfile, theta: f64) -> Self {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        ModalProfile {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::periodic_uniform;

    #[test]
    fn modes_are_l2_normalized_and_zero_mean() {
        let (y, w) = periodic_uniform(256, OMEGA_LEN);
        for m in mode_table(8) {
            let norm2: f64 = y.iter().zip(&w).map(|(y, w)| w * m.eval(*y).powi(2)).sum();
            let mean: f64 = y.iter().zip(&w).map(|(y, w)| w * m.eval(*y)).sum();
            assert!((norm2 - 1.0).abs() < 1e-13, "norm of {m:?}");
            assert!(mean.abs() < 1e-13, "mean of {m:?}");
        }
    }

    #[test]
    fn k0_is_rejected() {
        assert!(ShellMode::new(0, Parity::Cos).is_err());
    }

    #[test]
    fn second_derivative_is_eigenfunction() {
        let m = ShellMode::new(2, Parity::Cos).unwrap();
        for y in [0.1, 1.0, 3.7] {
            assert!((m.deriv(y, 2) + 4.0 * m.eval(y)).abs() < 1e-13);
        }
    }

    #[test]
    fn antiderivative_differentiates_back() {
        for m in mode_table(6) {
            for y in [0.2, 2.3] {
                let h = 1e-6;
                let fd = (m.antiderivative(y + h) - m.antiderivative(y - h)) / (2.0 * h);
                assert!((fd - m.eval(y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cutoff_drops_high_modes_only() {
        let mut p = ModalProfile::zeros(6);
        p.coeffs[0] = 1.0; // k=1 cos
        p.coeffs[4] = 2.0; // k=3 cos
        let q = p.cutoff(2);
        assert_eq!(q.coeffs[0], 1.0);
        assert_eq!(q.coeffs[4], 0.0);
        // Parseval: the energy drop equals the dropped modal energy.
        let drop = p.l2_norm().powi(2) - q.l2_norm().powi(2);
        assert!((drop - 4.0).abs() < 1e-14);
    }
}
