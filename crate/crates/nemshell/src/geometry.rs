//! Boundary parametrization, Hanzawa transform, Piola transform and the
//! pullback tensors mapping the fixed reference channel to the moving domain.
//!
//! The default geometry is a periodic channel `(x mod 2*pi, s) in [0,2*pi) x
//! [0,1]` with a flexible top wall at `s = 1` and a rigid bottom at `s = 0`.
//! The wall displaces along the reference normal, the displacement is pulled
//! into the interior by a clamped cubic cutoff, and the resulting map has a
//! closed-form Jacobian. An annulus (unit disk with a flexible circular wall)
//! is supported for the geometry kernels themselves; all dynamics run on the
//! channel.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{ModalProfile, OMEGA_LEN};
use crate::quad::gauss_legendre;

const DEGENERATE_TANGENT: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 50;

/// Clamped cubic cutoff `chi(s) = s^2 (3 - 2 s)` on `[0, 1]`.
///
/// `chi(0) = chi'(0) = 0`, `chi(1) = 1`, `chi'(1) = 0`; the displacement
/// vanishes to second order at the rigid wall and is passed through
/// unchanged at the flexible one.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Cutoff;

impl Cutoff {
    pub fn value(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        s * s * (3.0 - 2.0 * s)
    }

    pub fn deriv(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        6.0 * s * (1.0 - s)
    }

    pub fn deriv2(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        6.0 - 12.0 * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryKind {
    /// Periodic channel; flexible wall at `s = 1` parametrized by `(y, 1)`.
    Channel,
    /// Unit circle parametrized clockwise, `(cos y, -sin y)`, so that the
    /// normal formula yields the outward normal.
    Annulus,
}

/// Parametrized flexible boundary with tangent and outward unit normal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub kind: GeometryKind,
}

impl BoundaryCurve {
    pub fn channel() -> Self {
        BoundaryCurve {
            kind: GeometryKind::Channel,
        }
    }

    pub fn annulus() -> Result<Self> {
        let curve = BoundaryCurve {
            kind: GeometryKind::Annulus,
        };
        // The parametrization direction must make the normal point outward;
        // validated against the centroid.
        let centroid = Vector2::new(0.0, 0.0);
        for i in 0..16 {
            let y = i as f64 * OMEGA_LEN / 16.0;
            let (p, _, n) = curve.frame(y)?;
            if (p - centroid).dot(&n) <= 0.0 {
                return Err(Error::Geometry(
                    "annulus parametrization yields an inward normal".into(),
                ));
            }
        }
        Ok(curve)
    }

    pub fn point(&self, y: f64) -> Vector2<f64> {
        match self.kind {
            GeometryKind::Channel => Vector2::new(y, 1.0),
            GeometryKind::Annulus => Vector2::new(y.cos(), -y.sin()),
        }
    }

    pub fn tangent(&self, y: f64) -> Vector2<f64> {
        match self.kind {
            GeometryKind::Channel => Vector2::new(1.0, 0.0),
            GeometryKind::Annulus => Vector2::new(-y.sin(), -y.cos()),
        }
    }

    fn tangent_deriv(&self, y: f64) -> Vector2<f64> {
        match self.kind {
            GeometryKind::Channel => Vector2::new(0.0, 0.0),
            GeometryKind::Annulus => Vector2::new(-y.cos(), y.sin()),
        }
    }

    /// `(phi(y), d_y phi(y), n(y))` with `n = perp(d_y phi)/|d_y phi|`,
    /// `perp(a, b) = (-b, a)`.
    pub fn frame(&self, y: f64) -> Result<(Vector2<f64>, Vector2<f64>, Vector2<f64>)> {
        let t = self.tangent(y);
        let len = t.norm();
        if len < DEGENERATE_TANGENT {
            return Err(Error::Geometry(format!("degenerate tangent at y = {y}")));
        }
        let n = Vector2::new(-t.y, t.x) / len;
        Ok((self.point(y), t, n))
    }

    pub fn normal(&self, y: f64) -> Result<Vector2<f64>> {
        Ok(self.frame(y)?.2)
    }

    /// `div n(phi + tau n)`: divergence of the normal field extended along
    /// normal rays, `kappa / (|d_y phi| + tau kappa)` with `kappa = n' . t_hat`.
    pub fn div_normal_extension(&self, y: f64, tau: f64) -> Result<f64> {
        let t = self.tangent(y);
        let len = t.norm();
        if len < DEGENERATE_TANGENT {
            return Err(Error::Geometry(format!("degenerate tangent at y = {y}")));
        }
        let that = t / len;
        let tp = self.tangent_deriv(y);
        // n = perp(t)/|t|; n' = perp(t')/|t| - perp(t) (t.t')/|t|^3.
        let perp = |v: Vector2<f64>| Vector2::new(-v.y, v.x);
        let nprime = perp(tp) / len - perp(t) * (t.dot(&tp)) / len.powi(3);
        let kappa = nprime.dot(&that);
        let denom = len + tau * kappa;
        if denom.abs() < DEGENERATE_TANGENT {
            return Err(Error::Geometry(format!(
                "normal ray caustic at y = {y}, tau = {tau}"
            )));
        }
        Ok(kappa / denom)
    }
}

/// Wall displacement as seen by the geometry: a modal profile for dynamics,
/// or a constant (useful for diagnostics and closed-form checks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Displacement {
    Modal(ModalProfile),
    Constant(f64),
}

impl Displacement {
    pub fn value(&self, y: f64) -> f64 {
        match self {
            Displacement::Modal(p) => p.value(y),
            Displacement::Constant(c) => *c,
        }
    }

    pub fn deriv(&self, y: f64, order: u32) -> f64 {
        match self {
            Displacement::Modal(p) => p.deriv(y, order),
            Displacement::Constant(_) => 0.0,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Displacement::Modal(p) => p.sup_norm(),
            Displacement::Constant(c) => c.abs(),
        }
    }
}

impl From<ModalProfile> for Displacement {
    fn from(p: ModalProfile) -> Self {
        Displacement::Modal(p)
    }
}

/// The domain map `Psi_eta`: identity deep inside, `x + n(y(x)) eta(y(x))
/// chi(depth)` in the tubular neighbourhood of the flexible wall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HanzawaMap {
    pub curve: BoundaryCurve,
    pub eta: Displacement,
    pub cutoff: Cutoff,
    /// Tubular half-width. Channel: 1 (the full depth). Annulus: < 1 so the
    /// disk center stays out of the tube.
    pub tube_width: f64,
    /// Admissibility margin: the map is used only while `|eta|_inf < alpha`.
    pub alpha: f64,
}

impl HanzawaMap {
    pub fn channel(eta: impl Into<Displacement>, alpha: f64) -> Self {
        HanzawaMap {
            curve: BoundaryCurve::channel(),
            eta: eta.into(),
            cutoff: Cutoff,
            tube_width: 1.0,
            alpha,
        }
    }

    pub fn annulus(eta: impl Into<Displacement>, alpha: f64) -> Result<Self> {
        Ok(HanzawaMap {
            curve: BoundaryCurve::annulus()?,
            eta: eta.into(),
            cutoff: Cutoff,
            tube_width: 0.5,
            alpha,
        })
    }

    pub fn is_channel(&self) -> bool {
        matches!(self.curve.kind, GeometryKind::Channel)
    }

    /// `|eta|_inf < alpha`, sampled densely.
    pub fn displacement_admissible(&self) -> bool {
        self.eta.sup_norm() < self.alpha
    }

    pub fn require_admissible(&self) -> Result<()> {
        if !self.displacement_admissible() {
            return Err(Error::Admissibility(format!(
                "|eta|_inf = {:.6} >= alpha = {}",
                self.eta.sup_norm(),
                self.alpha
            )));
        }
        if !self.jacobian_positive_on_grid(64, 17) {
            return Err(Error::Admissibility(
                "Jacobian determinant is not positive on the sample grid".into(),
            ));
        }
        Ok(())
    }

    /// Cutoff in the channel's `s in [0,1]` coordinate: `chi(s)` directly for
    /// the channel; for the annulus the depth below the wall is rescaled by
    /// the tube width.
    fn cutoff_at_depth(&self, depth: f64) -> (f64, f64, f64) {
        // depth in [-tube_width, 0], 0 at the wall.
        let l = self.tube_width;
        let tau = 1.0 + depth / l;
        (
            self.cutoff.value(tau),
            self.cutoff.deriv(tau) / l,
            self.cutoff.deriv2(tau) / (l * l),
        )
    }

    /// Forward map. Channel points are `(x, s)`; annulus points Cartesian.
    pub fn forward(&self, x: Vector2<f64>) -> Vector2<f64> {
        match self.curve.kind {
            GeometryKind::Channel => {
                let chi = self.cutoff.value(x.y);
                Vector2::new(x.x, x.y + self.eta.value(x.x) * chi)
            }
            GeometryKind::Annulus => {
                let r = x.norm();
                let depth = r - 1.0;
                if depth < -self.tube_width || r == 0.0 {
                    return x;
                }
                let y = -x.y.atan2(x.x);
                let n = x / r; // outward radial
                let (chi, _, _) = self.cutoff_at_depth(depth);
                x + n * (self.eta.value(y) * chi)
            }
        }
    }

    /// Inverse map by 1D Newton on the depth coordinate.
    pub fn inverse(&self, xhat: Vector2<f64>) -> Result<Vector2<f64>> {
        match self.curve.kind {
            GeometryKind::Channel => {
                let eta = self.eta.value(xhat.x);
                let top = 1.0 + eta;
                if xhat.y < -1e-12 || xhat.y > top + 1e-12 {
                    return Err(Error::Domain(format!(
                        "point ({}, {}) outside the moving channel (top = {top})",
                        xhat.x, xhat.y
                    )));
                }
                // Solve s + eta chi(s) = xhat.y; monotone since det > 0.
                let mut s = (xhat.y / top).clamp(0.0, 1.0);
                for _ in 0..NEWTON_MAX_ITER {
                    let f = s + eta * self.cutoff.value(s) - xhat.y;
                    let df = 1.0 + eta * self.cutoff.deriv(s);
                    let ds = f / df;
                    s = (s - ds).clamp(0.0, 1.0);
                    if ds.abs() < NEWTON_TOL {
                        return Ok(Vector2::new(xhat.x, s));
                    }
                }
                Err(Error::Inversion(format!(
                    "Newton stalled inverting channel map at x = {}",
                    xhat.x
                )))
            }
            GeometryKind::Annulus => {
                let rhat = xhat.norm();
                let y = -xhat.y.atan2(xhat.x);
                let eta = self.eta.value(y);
                if rhat > 1.0 + eta + 1e-12 {
                    return Err(Error::Domain(format!(
                        "point outside the moving disk: |x| = {rhat}, wall = {}",
                        1.0 + eta
                    )));
                }
                if rhat < 1.0 - self.tube_width {
                    return Ok(xhat);
                }
                // Solve r + eta chi_d(r - 1) = rhat along the ray.
                let mut r = rhat.min(1.0);
                for _ in 0..NEWTON_MAX_ITER {
                    let (chi, dchi, _) = self.cutoff_at_depth(r - 1.0);
                    let f = r + eta * chi - rhat;
                    let df = 1.0 + eta * dchi;
                    let dr = f / df;
                    r -= dr;
                    if dr.abs() < NEWTON_TOL {
                        return Ok(Vector2::new(y.cos(), -y.sin()) * r);
                    }
                }
                Err(Error::Inversion(format!(
                    "Newton stalled inverting annulus map at y = {y}"
                )))
            }
        }
    }

    /// `grad Psi` and its determinant: analytic for the channel, central
    /// finite differences for generic geometries.
    pub fn jacobian(&self, x: Vector2<f64>) -> (Matrix2<f64>, f64) {
        match self.curve.kind {
            GeometryKind::Channel => {
                let eta = self.eta.value(x.x);
                let deta = self.eta.deriv(x.x, 1);
                let chi = self.cutoff.value(x.y);
                let dchi = self.cutoff.deriv(x.y);
                let g = Matrix2::new(1.0, 0.0, deta * chi, 1.0 + eta * dchi);
                let det = 1.0 + eta * dchi;
                (g, det)
            }
            GeometryKind::Annulus => {
                let h = 1e-6;
                let dx = (self.forward(x + Vector2::new(h, 0.0))
                    - self.forward(x - Vector2::new(h, 0.0)))
                    / (2.0 * h);
                let dy = (self.forward(x + Vector2::new(0.0, h))
                    - self.forward(x - Vector2::new(0.0, h)))
                    / (2.0 * h);
                let g = Matrix2::new(dx.x, dy.x, dx.y, dy.y);
                (g, g.determinant())
            }
        }
    }

    /// Channel-only: `grad Psi`, its `x`- and `s`-derivatives, and the same
    /// for the determinant. Used by the assembly to differentiate pushed
    /// fields in closed form.
    pub fn jacobian_with_derivs(&self, x: f64, s: f64) -> ChannelJet {
        debug_assert!(self.is_channel());
        let eta = self.eta.value(x);
        let d1 = self.eta.deriv(x, 1);
        let d2 = self.eta.deriv(x, 2);
        let chi = self.cutoff.value(s);
        let dchi = self.cutoff.deriv(s);
        let d2chi = self.cutoff.deriv2(s);
        ChannelJet {
            p: d1 * chi,
            q: 1.0 + eta * dchi,
            p_x: d2 * chi,
            p_s: d1 * dchi,
            q_x: d1 * dchi,
            q_s: eta * d2chi,
        }
    }

    /// Positivity of `det grad Psi` on an `ny x ns` sample grid.
    pub fn jacobian_positive_on_grid(&self, ny: usize, ns: usize) -> bool {
        for j in 0..ns {
            for i in 0..ny {
                let x = match self.curve.kind {
                    GeometryKind::Channel => Vector2::new(
                        i as f64 * OMEGA_LEN / ny as f64,
                        j as f64 / (ns - 1) as f64,
                    ),
                    GeometryKind::Annulus => {
                        let y = i as f64 * OMEGA_LEN / ny as f64;
                        let r = 1.0 - self.tube_width + self.tube_width * j as f64 / (ns - 1) as f64;
                        Vector2::new(y.cos(), -y.sin()) * r
                    }
                };
                if self.jacobian(x).1 <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Pullback tensors `J`, `B = J (grad Psi)^-1`, `A = (grad Psi)^-T B`
    /// sampled on a uniform reference grid.
    pub fn pullback_tensors(&self, nx: usize, ns: usize) -> Result<PullbackTensors> {
        self.require_admissible()?;
        let mut t = PullbackTensors {
            nx,
            ns,
            j: Vec::with_capacity(nx * ns),
            b: Vec::with_capacity(nx * ns),
            a: Vec::with_capacity(nx * ns),
        };
        for jj in 0..ns {
            for ii in 0..nx {
                let x = Vector2::new(
                    ii as f64 * OMEGA_LEN / nx as f64,
                    jj as f64 / (ns - 1) as f64,
                );
                let (g, det) = self.jacobian(x);
                let ginv = g
                    .try_inverse()
                    .ok_or_else(|| Error::Geometry("singular Jacobian".into()))?;
                let b = ginv * det;
                let a = ginv.transpose() * b;
                t.j.push(det);
                t.b.push(b);
                t.a.push(a);
            }
        }
        Ok(t)
    }

    /// Piola push `J_eta v = (grad Psi (det grad Psi)^-1 v) o Psi^-1`,
    /// evaluated at a moving-domain point.
    pub fn piola_push(
        &self,
        v: &dyn Fn(Vector2<f64>) -> Vector2<f64>,
        xhat: Vector2<f64>,
    ) -> Result<Vector2<f64>> {
        let x = self.inverse(xhat)?;
        let (g, det) = self.jacobian(x);
        Ok(g * v(x) / det)
    }

    /// Piola pull `J_eta^-1 w = ((grad Psi)^-1 (det grad Psi) w) o Psi`,
    /// evaluated at a reference point.
    pub fn piola_pull(
        &self,
        w: &dyn Fn(Vector2<f64>) -> Vector2<f64>,
        x: Vector2<f64>,
    ) -> Result<Vector2<f64>> {
        let (g, det) = self.jacobian(x);
        let ginv = g
            .try_inverse()
            .ok_or_else(|| Error::Geometry("singular Jacobian".into()))?;
        Ok(ginv * w(self.forward(x)) * det)
    }

    /// Exact interface scaling of the Piola push: the pushed trace of a field
    /// with boundary values `psi n` equals `scale * psi n`, with
    /// `scale = (n . grad Psi n) / det` at the wall. Identically 1 for the
    /// channel (the cutoff is flat at the wall), `1/(1 + eta)` on the unit
    /// circle.
    pub fn interface_scale(&self, y: f64) -> Result<f64> {
        let (p, _, n) = self.curve.frame(y)?;
        let x = match self.curve.kind {
            GeometryKind::Channel => Vector2::new(y, 1.0),
            GeometryKind::Annulus => p,
        };
        let (g, det) = self.jacobian(x);
        Ok(n.dot(&(g * n)) / det)
    }
}

/// Channel map derivatives at a point: `grad Psi = [[1, 0], [p, q]]`,
/// `det = q`, plus first derivatives of `p` and `q`.
#[derive(Debug, Clone, Copy)]
pub struct ChannelJet {
    pub p: f64,
    pub q: f64,
    pub p_x: f64,
    pub p_s: f64,
    pub q_x: f64,
    pub q_s: f64,
}

/// `J`, `B`, `A` of the transform sampled on the reference grid.
#[derive(Debug, Clone)]
pub struct PullbackTensors {
    pub nx: usize,
    pub ns: usize,
    pub j: Vec<f64>,
    pub b: Vec<Matrix2<f64>>,
    pub a: Vec<Matrix2<f64>>,
}

impl PullbackTensors {
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Corrected interface speed `exp(-int_{eta0}^{eta_moll} div n(phi + tau n)
/// d tau) * eta_star`, pointwise on interface nodes.
///
/// The correction keeps the lifted initial velocity solenoidal when the
/// starting profile is replaced by its mollification. The integral is done by
/// Gauss quadrature; for the channel the normal is constant and the factor
/// is identically 1.
pub fn corrected_interface_velocity(
    curve: &BoundaryCurve,
    eta0: &ModalProfile,
    eta_moll: &ModalProfile,
    eta_star: &ModalProfile,
    alpha: f64,
    y_nodes: &[f64],
) -> Result<Vec<f64>> {
    if eta0.sup_norm() >= alpha || eta_moll.sup_norm() >= alpha {
        return Err(Error::Admissibility(
            "interface-velocity correction needs admissible profiles".into(),
        ));
    }
    y_nodes
        .iter()
        .map(|&y| {
            let a = eta0.value(y);
            let b = eta_moll.value(y);
            let integral = if (b - a).abs() < 1e-15 {
                0.0
            } else {
                let (taus, ws) = gauss_legendre(8, a, b);
                let mut acc = 0.0;
                for (tau, w) in taus.iter().zip(&ws) {
                    acc += w * curve.div_normal_extension(y, *tau)?;
                }
                acc
            };
            Ok((-integral).exp() * eta_star.value(y))
        })
        .collect()
}
