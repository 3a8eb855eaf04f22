//! Divergence-free velocity bases on the reference channel and their
//! push-forward to the moving domain.
//!
//! Interior modes are stream functions `Phi = trig(k x) B_m(s)` with
//! `B_m(s) = sin^2(pi s) sin(m pi s)`, clamped at both walls. Boundary modes
//! lift the interface Fourier modes into the channel through
//! `Phi = -P_k(x) g(s)` with `g(s) = s^2 (3 - 2 s)` and `P_k' = psi_k`; their
//! trace at the top wall is exactly `psi_k n` and they vanish at the bottom.
//! The global basis interleaves the two families: even index interior, odd
//! index boundary.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HanzawaMap;
use crate::modes::{mode_table, Parity, ShellMode};

pub use crate::modes::ModalProfile;

/// Trig factor in `x`: `1` (k = 0), `cos(k x)` or `sin(k x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrigX {
    One,
    Cos(u32),
    Sin(u32),
}

impl TrigX {
    fn eval(&self, x: f64, order: u32) -> f64 {
        match *self {
            TrigX::One => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            TrigX::Cos(k) => trig_deriv(k as f64, x, order, true),
            TrigX::Sin(k) => trig_deriv(k as f64, x, order, false),
        }
    }

    pub fn wavenumber(&self) -> u32 {
        match *self {
            TrigX::One => 0,
            TrigX::Cos(k) | TrigX::Sin(k) => k,
        }
    }
}

fn trig_deriv(k: f64, x: f64, order: u32, cos: bool) -> f64 {
    let kx = k * x;
    let kn = k.powi(order as i32);
    let (c, s) = (kx.cos(), kx.sin());
    let base = match (cos, order % 4) {
        (true, 0) => c,
        (true, 1) => -s,
        (true, 2) => -c,
        (true, 3) => s,
        (false, 0) => s,
        (false, 1) => c,
        (false, 2) => -s,
        (false, 3) => -c,
        _ => unreachable!(),
    };
    kn * base
}

/// Interior divergence-free mode with zero trace on both walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteriorMode {
    pub trig: TrigX,
    pub m: u32,
}

impl InteriorMode {
    pub fn new(trig: TrigX, m: u32) -> Self {
        assert!(m >= 1);
        InteriorMode { trig, m }
    }

    /// Wall profile `B_m(s) = sin^2(pi s) sin(m pi s)` and derivatives.
    fn b(&self, s: f64, order: u32) -> f64 {
        use std::f64::consts::PI;
        let m = self.m as f64;
        let sp = (PI * s).sin();
        let s2p = (2.0 * PI * s).sin();
        let c2p = (2.0 * PI * s).cos();
        let sm = (m * PI * s).sin();
        let cm = (m * PI * s).cos();
        match order {
            0 => sp * sp * sm,
            1 => PI * s2p * sm + m * PI * sp * sp * cm,
            2 => {
                2.0 * PI * PI * c2p * sm + 2.0 * m * PI * PI * s2p * cm
                    - m * m * PI * PI * sp * sp * sm
            }
            _ => unimplemented!("B_m derivatives above order 2"),
        }
    }

    /// Velocity `(d_s Phi, -d_x Phi)` and its reference gradient.
    pub fn eval(&self, x: f64, s: f64) -> FieldJet {
        let t0 = self.trig.eval(x, 0);
        let t1 = self.trig.eval(x, 1);
        let t2 = self.trig.eval(x, 2);
        let b0 = self.b(s, 0);
        let b1 = self.b(s, 1);
        let b2 = self.b(s, 2);
        FieldJet {
            v: Vector2::new(t0 * b1, -t1 * b0),
            // rows: components, cols: d/dx, d/ds
            grad: Matrix2::new(t1 * b1, t0 * b2, -t2 * b0, -t1 * b1),
        }
    }
}

/// Boundary lift mode: divergence-free, trace `psi_k n` at the top wall,
/// zero at the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryMode {
    pub shell: ShellMode,
}

impl BoundaryMode {
    pub fn new(k: u32, parity: Parity) -> Result<Self> {
        Ok(BoundaryMode {
            shell: ShellMode::new(k, parity)?,
        })
    }

    /// Lift profile `g(s) = s^2 (3 - 2s)`: `g(0) = g'(0) = 0`, `g(1) = 1`,
    /// `g'(1) = 0`.
    fn g(s: f64, order: u32) -> f64 {
        match order {
            0 => s * s * (3.0 - 2.0 * s),
            1 => 6.0 * s * (1.0 - s),
            2 => 6.0 - 12.0 * s,
            _ => unimplemented!(),
        }
    }

    /// `Y = (-P g', psi g)` with `P' = psi`.
    pub fn eval(&self, x: f64, s: f64) -> FieldJet {
        let psi = self.shell.eval(x);
        let dpsi = self.shell.deriv(x, 1);
        let p = self.shell.antiderivative(x);
        let g0 = Self::g(s, 0);
        let g1 = Self::g(s, 1);
        let g2 = Self::g(s, 2);
        FieldJet {
            v: Vector2::new(-p * g1, psi * g0),
            grad: Matrix2::new(-psi * g1, -p * g2, dpsi * g0, psi * g1),
        }
    }
}

/// Field value and reference gradient at a point; `grad[(i, j)] = d v_i / d x_j`.
#[derive(Debug, Clone, Copy)]
pub struct FieldJet {
    pub v: Vector2<f64>,
    pub grad: Matrix2<f64>,
}

/// One entry of the interleaved coupled basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GlobalMode {
    Interior(InteriorMode),
    Boundary(BoundaryMode),
}

impl GlobalMode {
    pub fn eval(&self, x: f64, s: f64) -> FieldJet {
        match self {
            GlobalMode::Interior(m) => m.eval(x, s),
            GlobalMode::Boundary(m) => m.eval(x, s),
        }
    }

    /// Shell counterpart: the scalar interface mode whose normal motion the
    /// fluid trace matches. `None` for interior (zero-trace) modes.
    pub fn shell_mode(&self) -> Option<ShellMode> {
        match self {
            GlobalMode::Interior(_) => None,
            GlobalMode::Boundary(m) => Some(m.shell),
        }
    }

    /// x-wavenumber, used by the spectral mollifier.
    pub fn wavenumber(&self) -> u32 {
        match self {
            GlobalMode::Interior(m) => m.trig.wavenumber(),
            GlobalMode::Boundary(m) => m.shell.k,
        }
    }
}

/// The interleaved global basis. With equal family sizes (the default) even
/// global indices are interior modes and odd ones are boundary modes; with
/// unequal sizes the interleave runs until the shorter family is exhausted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalBasis {
    pub modes: Vec<GlobalMode>,
    /// Number of shell modes carried by the coupled system (= boundary
    /// modes); shell displacement vectors use [`mode_table`] of this length.
    pub n_shell: usize,
    /// Global index of the boundary mode carrying shell mode `i`.
    boundary_globals: Vec<usize>,
    /// Inverse map: shell index of each global mode, if any.
    shell_of_global: Vec<Option<usize>>,
}

impl GlobalBasis {
    /// `n` global modes: `n/2` interior, `n/2` boundary. `n` must be even.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::Config {
                key: "basis.n_modes".into(),
                message: format!("need a positive even mode count, got {n}"),
            });
        }
        Self::with_counts(n / 2, n / 2)
    }

    /// Independently sized families: `n_interior` stream-function modes and
    /// `n_shell` boundary lifts, interleaved.
    pub fn with_counts(n_interior: usize, n_shell: usize) -> Result<Self> {
        if n_shell == 0 {
            return Err(Error::config("basis.n_shell", "need at least one shell mode"));
        }
        let boundary: Vec<BoundaryMode> = mode_table(n_shell)
            .into_iter()
            .map(|shell| BoundaryMode { shell })
            .collect();
        let interior = interior_table(n_interior);
        let mut modes = Vec::with_capacity(n_interior + n_shell);
        let mut boundary_globals = Vec::with_capacity(n_shell);
        let mut shell_of_global = Vec::with_capacity(n_interior + n_shell);
        for i in 0..n_interior.max(n_shell) {
            if i < n_interior {
                modes.push(GlobalMode::Interior(interior[i]));
                shell_of_global.push(None);
            }
            if i < n_shell {
                boundary_globals.push(modes.len());
                modes.push(GlobalMode::Boundary(boundary[i]));
                shell_of_global.push(Some(i));
            }
        }
        Ok(GlobalBasis {
            modes,
            n_shell,
            boundary_globals,
            shell_of_global,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Global index of the boundary mode carrying shell mode `i` (in
    /// canonical shell ordering).
    pub fn boundary_global_index(&self, shell_index: usize) -> usize {
        self.boundary_globals[shell_index]
    }

    /// Shell-mode index of a global mode, if it has a shell counterpart.
    pub fn shell_index(&self, global: usize) -> Option<usize> {
        self.shell_of_global[global]
    }

    /// Largest x-wavenumber present in the basis.
    pub fn max_wavenumber(&self) -> u32 {
        self.modes.iter().map(|m| m.wavenumber()).max().unwrap_or(0)
    }

    /// Shell velocity profile induced by a coefficient vector: the trace of
    /// the velocity expansion on the interface (interior modes contribute
    /// nothing).
    pub fn shell_velocity(&self, alpha: &[f64]) -> ModalProfile {
        let mut coeffs = vec![0.0; self.n_shell];
        for (i, si) in self.shell_of_global.iter().enumerate() {
            if let Some(si) = si {
                coeffs[*si] += alpha[i];
            }
        }
        ModalProfile { coeffs }
    }
}

/// Interior mode ordering: by `(k + m, k, parity)` so low-order content in
/// both directions comes first.
fn interior_table(n: usize) -> Vec<InteriorMode> {
    let mut list = Vec::new();
    let mut level = 1;
    while list.len() < n {
        // k + m == level, m >= 1, k >= 0.
        for k in 0..level {
            let m = level - k;
            if k == 0 {
                list.push(InteriorMode::new(TrigX::One, m));
            } else {
                list.push(InteriorMode::new(TrigX::Cos(k), m));
                list.push(InteriorMode::new(TrigX::Sin(k), m));
            }
        }
        level += 1;
    }
    list.truncate(n);
    list
}

/// A reference mode pushed through the Piola transform of `map`, expressed in
/// reference coordinates: `w = grad Psi v / J` so that the moving-domain
/// field is `w o Psi^-1`. Gradients are physical (moving-domain) gradients.
pub struct PushedMode<'a> {
    pub map: &'a HanzawaMap,
    pub mode: GlobalMode,
}

impl<'a> PushedMode<'a> {
    pub fn new(map: &'a HanzawaMap, mode: GlobalMode) -> Result<Self> {
        map.require_admissible()?;
        Ok(PushedMode { map, mode })
    }

    /// Pushed value at the reference point `(x, s)`.
    pub fn value(&self, x: f64, s: f64) -> Vector2<f64> {
        let jet = self.mode.eval(x, s);
        let cj = self.map.jacobian_with_derivs(x, s);
        let g = Matrix2::new(1.0, 0.0, cj.p, cj.q);
        g * jet.v / cj.q
    }

    /// Pushed value and physical gradient at the reference point.
    pub fn value_and_physical_grad(&self, x: f64, s: f64) -> (Vector2<f64>, Matrix2<f64>) {
        let jet = self.mode.eval(x, s);
        let cj = self.map.jacobian_with_derivs(x, s);
        push_jet(&cj, &jet)
    }

    /// Trace at the moving top wall, evaluated at interface coordinate `y`.
    pub fn trace_at_wall(&self, y: f64) -> Vector2<f64> {
        self.value(y, 1.0)
    }
}

/// Push `v` through the channel map at one point: returns `w = grad Psi v/J`
/// and the physical gradient `grad_hat w = grad_ref(w) (grad Psi)^-1`.
pub fn push_jet(cj: &crate::geometry::ChannelJet, jet: &FieldJet) -> (Vector2<f64>, Matrix2<f64>) {
    let g = Matrix2::new(1.0, 0.0, cj.p, cj.q);
    let w = g * jet.v / cj.q;

    // d/dc w = (d/dc g) v / q + g (d/dc v) / q - (d/dc q / q) w.
    let gx = Matrix2::new(0.0, 0.0, cj.p_x, cj.q_x);
    let gs = Matrix2::new(0.0, 0.0, cj.p_s, cj.q_s);
    let vx = Vector2::new(jet.grad[(0, 0)], jet.grad[(1, 0)]);
    let vs = Vector2::new(jet.grad[(0, 1)], jet.grad[(1, 1)]);
    let wx = gx * jet.v / cj.q + g * vx / cj.q - w * (cj.q_x / cj.q);
    let ws = gs * jet.v / cj.q + g * vs / cj.q - w * (cj.q_s / cj.q);
    let grad_ref = Matrix2::new(wx.x, ws.x, wx.y, ws.y);

    // (grad Psi)^-1 = [[1, 0], [-p/q, 1/q]].
    let ginv = Matrix2::new(1.0, 0.0, -cj.p / cj.q, 1.0 / cj.q);
    (w, grad_ref * ginv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{ModalProfile, NORM, OMEGA_LEN};

    fn cos_profile(c: f64) -> ModalProfile {
        let mut p = ModalProfile::zeros(2);
        p.coeffs[0] = c / NORM;
        p
    }

    #[test]
    fn interior_modes_are_divergence_free_and_clamped() {
        for mode in interior_table(9) {
            for &(x, s) in &[(0.3, 0.4), (2.0, 0.9), (5.5, 0.1)] {
                let jet = mode.eval(x, s);
                let div = jet.grad[(0, 0)] + jet.grad[(1, 1)];
                assert!(div.abs() < 1e-13, "{mode:?} at ({x}, {s})");
            }
            for &s in &[0.0, 1.0] {
                for &x in &[0.0, 1.0, 4.0] {
                    let jet = mode.eval(x, s);
                    assert!(jet.v.norm() < 1e-13, "trace of {mode:?}");
                }
            }
        }
    }

    #[test]
    fn interior_k0_is_pure_shear() {
        let mode = InteriorMode::new(TrigX::One, 1);
        let jet = mode.eval(1.7, 0.33);
        assert_eq!(jet.v.y, 0.0);
        // u_1 = B_1'(s), independent of x.
        let other = mode.eval(0.2, 0.33);
        assert!((jet.v.x - other.v.x).abs() < 1e-15);
        assert!(jet.v.x.abs() > 0.1);
    }

    #[test]
    fn boundary_mode_traces() {
        let mode = BoundaryMode::new(1, Parity::Cos).unwrap();
        for &x in &[0.0, 0.9, 3.3] {
            let top = mode.eval(x, 1.0);
            // (0, cos(x)/sqrt(pi)) at the top wall.
            assert!((top.v - Vector2::new(0.0, NORM * x.cos())).norm() < 1e-13);
            let bottom = mode.eval(x, 0.0);
            assert!(bottom.v.norm() < 1e-15);
            let jet = mode.eval(x, 0.37);
            let div = jet.grad[(0, 0)] + jet.grad[(1, 1)];
            assert!(div.abs() < 1e-13);
        }
        assert!(BoundaryMode::new(0, Parity::Cos).is_err());
    }

    #[test]
    fn global_index_interleaving_round_trips() {
        let basis = GlobalBasis::new(12).unwrap();
        for (i, mode) in basis.modes.iter().enumerate() {
            match mode {
                GlobalMode::Interior(_) => {
                    assert_eq!(i % 2, 0);
                    assert!(basis.shell_index(i).is_none());
                }
                GlobalMode::Boundary(_) => {
                    assert_eq!(i % 2, 1);
                    let si = basis.shell_index(i).unwrap();
                    assert_eq!(basis.boundary_global_index(si), i);
                }
            }
        }
        assert!(GlobalBasis::new(7).is_err());
    }

    #[test]
    fn pushed_mode_is_identity_at_rest() {
        let map = HanzawaMap::channel(ModalProfile::zeros(2), 0.5);
        let basis = GlobalBasis::new(4).unwrap();
        for mode in &basis.modes {
            let pushed = PushedMode::new(&map, *mode).unwrap();
            for &(x, s) in &[(0.3, 0.2), (4.0, 0.8)] {
                let jet = mode.eval(x, s);
                assert!((pushed.value(x, s) - jet.v).norm() < 1e-14);
                let (_, grad) = pushed.value_and_physical_grad(x, s);
                assert!((grad - jet.grad).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn pushed_gradient_matches_finite_differences() {
        let map = HanzawaMap::channel(cos_profile(0.1), 0.5);
        let mode = GlobalMode::Boundary(BoundaryMode::new(2, Parity::Sin).unwrap());
        let pushed = PushedMode::new(&map, mode).unwrap();
        let (x, s) = (1.234, 0.56);
        let (_, grad) = pushed.value_and_physical_grad(x, s);
        // FD of the moving-domain field w o Psi^-1 around Psi(x, s).
        let xhat = map.forward(nalgebra::Vector2::new(x, s));
        let h = 1e-6;
        let eval_at = |p: Vector2<f64>| {
            let r = map.inverse(p).unwrap();
            pushed.value(r.x, r.y)
        };
        let dx = (eval_at(xhat + Vector2::new(h, 0.0)) - eval_at(xhat - Vector2::new(h, 0.0)))
            / (2.0 * h);
        let ds = (eval_at(xhat + Vector2::new(0.0, h)) - eval_at(xhat - Vector2::new(0.0, h)))
            / (2.0 * h);
        assert!((grad[(0, 0)] - dx.x).abs() < 1e-7);
        assert!((grad[(1, 0)] - dx.y).abs() < 1e-7);
        assert!((grad[(0, 1)] - ds.x).abs() < 1e-7);
        assert!((grad[(1, 1)] - ds.y).abs() < 1e-7);
    }

    /// Interface match: the pushed boundary-mode trace equals the shell mode
    /// times the reference normal on the moving wall (the interface scaling
    /// of the channel trace is identically 1).
    #[test]
    fn pushed_trace_matches_shell_mode() {
        let map = HanzawaMap::channel(cos_profile(0.1), 0.5);
        let mode = BoundaryMode::new(1, Parity::Cos).unwrap();
        let pushed = PushedMode::new(&map, GlobalMode::Boundary(mode)).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            let y = i as f64 * OMEGA_LEN / 64.0;
            let trace = pushed.trace_at_wall(y);
            let scale = map.interface_scale(y).unwrap();
            let expect = Vector2::new(0.0, scale * mode.shell.eval(y));
            worst = worst.max((trace - expect).norm());
            // and the scale itself is 1 on the channel
            assert!((scale - 1.0).abs() < 1e-13);
        }
        assert!(worst < 1e-10, "interface residual {worst}");
    }

    /// Arc-length of the displaced wall: sqrt(1 + (d_x zeta)^2); constant
    /// displacement gives factor 1.
    #[test]
    fn wall_arc_length_formula() {
        let map = HanzawaMap::channel(crate::geometry::Displacement::Constant(0.2), 0.5);
        for y in [0.0, 2.0] {
            let d1 = map.eta.deriv(y, 1);
            assert_eq!((1.0 + d1 * d1).sqrt(), 1.0);
        }
    }

    #[test]
    fn zero_mean_shell_velocity_reconstruction() {
        let basis = GlobalBasis::new(8).unwrap();
        let mut alpha = vec![0.0; 8];
        alpha[1] = 0.7; // first boundary mode
        alpha[2] = 0.3; // an interior mode: no trace
        let prof = basis.shell_velocity(&alpha);
        assert_eq!(prof.coeffs[0], 0.7);
        assert!(prof.coeffs[1..].iter().all(|c| *c == 0.0));
    }
}
