//! Windowed Picard coupling of the fluid/shell Galerkin system with the
//! director field.
//!
//! One window advances the state by `window_steps * dt`. Each Picard pass
//! freezes the geometry/velocity pair at the (mollified) previous iterate,
//! solves the director over the window with that pair, then assembles and
//! integrates the Galerkin ODE with the new director. Passes repeat until
//! the iterates agree in the discrete X-norm (sup over window steps of the
//! fluid L2 norm plus the shell velocity and bending norms). Geometry is
//! rebuilt from the new displacement on every pass.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::basis::GlobalBasis;
use crate::director::{
    reaction_substep_exact, transport_diffusion_substep, DirectorOperators, DirectorState,
    GlParams, Grid, GridMapData, SubstepOptions, SubstepReport,
};
use crate::error::{Error, Result};
use crate::fluid_assembly::{
    assemble_coefficients, assemble_ericksen_forcing, bending_matrix, initial_bending_load,
    memory_kernel_matrix, AssemblyInput, FluidQuadrature, GridJets, QuadJets,
};
use crate::geometry::HanzawaMap;
use crate::modes::{mode_table, ModalProfile};
use crate::shell::ShellState;

/// Full coupled state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub t: f64,
    /// Velocity coefficients over the interleaved global basis.
    pub alpha: Vec<f64>,
    pub shell: ShellState,
    pub director: DirectorState,
}

impl CoupledState {
    pub fn rest(n_modes: usize, n_shell: usize, grid: Grid, d: [f64; 2]) -> Self {
        CoupledState {
            t: 0.0,
            alpha: vec![0.0; n_modes],
            shell: ShellState::zeros(n_shell),
            director: DirectorState::constant(grid, d),
        }
    }

    /// Interface kinematics defect: the shell velocity must equal the trace
    /// of the velocity expansion coefficient-by-coefficient (sup over modes).
    pub fn interface_mismatch(&self, basis: &GlobalBasis) -> f64 {
        let trace = basis.shell_velocity(&self.alpha);
        trace
            .coeffs
            .iter()
            .zip(&self.shell.velocity.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Picard controls: window length (in steps), tolerance, iteration cap and
/// the spectral mollifier cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub window_steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Spectral cutoff wavenumber; `None` disables the mollifier.
    pub mollifier_k: Option<u32>,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            window_steps: 10,
            tol: 1e-8,
            max_iter: 25,
            mollifier_k: None,
        }
    }
}

/// Spectral mollification of a given geometry/velocity pair: both the shell
/// profile and the velocity coefficients keep only x-wavenumbers `<= k`.
/// Acting on coefficient histories, the cutoff commutes with d/dt.
pub fn mollify_given_pair(
    basis: &GlobalBasis,
    zeta: &ModalProfile,
    v_alpha: &[f64],
    k: Option<u32>,
) -> (ModalProfile, Vec<f64>) {
    match k {
        None => (zeta.clone(), v_alpha.to_vec()),
        Some(k) => {
            let z = zeta.cutoff(k);
            let v = basis
                .modes
                .iter()
                .zip(v_alpha)
                .map(|(m, a)| if m.wavenumber() <= k { *a } else { 0.0 })
                .collect();
            (z, v)
        }
    }
}

/// Time-dependent coefficient provider for the Galerkin ODE.
pub trait GalerkinSystem {
    /// Mass and dynamic matrices at time `t`.
    fn matrices(&mut self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
    /// State-independent forcing at time `t`.
    fn forcing(&mut self, t: f64) -> DVector<f64>;
    /// State-dependent forcing from the auxiliary shell displacement.
    fn bending(&self, h: &DVector<f64>) -> DVector<f64>;
    /// `dh/dt` from the velocity coefficients.
    fn shell_rate(&self, alpha: &DVector<f64>) -> DVector<f64>;
    fn n_shell(&self) -> usize;
}

/// RK4 trajectory of `a(t) da/dt = b(t) a + bending(h) + f(t)`,
/// `dh/dt = shell_rate(a)`. Returns states at the step boundaries
/// (`steps + 1` samples including the initial one).
pub fn integrate_galerkin_ode(
    system: &mut dyn GalerkinSystem,
    alpha0: DVector<f64>,
    h0: DVector<f64>,
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let mut traj = Vec::with_capacity(steps + 1);
    let mut alpha = alpha0;
    let mut h = h0;
    traj.push((alpha.clone(), h.clone()));
    for step in 0..steps {
        let t = t0 + step as f64 * dt;
        // Stage matrices at t, t + dt/2, t + dt.
        let (a0, b0) = system.matrices(t)?;
        let f0 = system.forcing(t);
        let (am, bm) = system.matrices(t + 0.5 * dt)?;
        let fm = system.forcing(t + 0.5 * dt);
        let (a1, b1) = system.matrices(t + dt)?;
        let f1 = system.forcing(t + dt);

        let eval = |a: &DMatrix<f64>,
                    b: &DMatrix<f64>,
                    f: &DVector<f64>,
                    alpha: &DVector<f64>,
                    h: &DVector<f64>|
         -> Result<(DVector<f64>, DVector<f64>)> {
            let rhs = b * alpha + system.bending(h) + f;
            let chol = a
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Solver("mass matrix not SPD at stage".into()))?;
            Ok((chol.solve(&rhs), system.shell_rate(alpha)))
        };

        let (k1a, k1h) = eval(&a0, &b0, &f0, &alpha, &h)?;
        let (k2a, k2h) = eval(
            &am,
            &bm,
            &fm,
            &(&alpha + &k1a * (0.5 * dt)),
            &(&h + &k1h * (0.5 * dt)),
        )?;
        let (k3a, k3h) = eval(
            &am,
            &bm,
            &fm,
            &(&alpha + &k2a * (0.5 * dt)),
            &(&h + &k2h * (0.5 * dt)),
        )?;
        let (k4a, k4h) = eval(&a1, &b1, &f1, &(&alpha + &k3a * dt), &(&h + &k3h * dt))?;

        alpha += (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * (dt / 6.0);
        h += (k1h + k2h * 2.0 + k3h * 2.0 + k4h) * (dt / 6.0);
        if alpha.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver(format!(
                "NaN in Galerkin trajectory at step {step}; last good state retained"
            )));
        }
        traj.push((alpha.clone(), h.clone()));
    }
    Ok(traj)
}

/// Per-window diagnostics.
#[derive(Debug, Clone, Default)]
pub struct WindowReport {
    pub iterations: usize,
    pub converged: bool,
    pub distances: Vec<f64>,
    pub cg_iterations: usize,
    pub max_cfl: f64,
    pub min_admissibility_margin: f64,
    pub window_steps: usize,
    pub halvings: usize,
}

impl WindowReport {
    /// Measured contraction factors between consecutive Picard distances.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// States at the window's step boundaries, for bookkeeping by the caller.
#[derive(Debug, Clone)]
pub struct WindowTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub displacement: Vec<ModalProfile>,
    pub velocity: Vec<ModalProfile>,
    pub director: Vec<DirectorState>,
}

/// Everything fixed across a run: basis, grids, quadrature, caches, physics.
pub struct CoupledSystem {
    pub basis: GlobalBasis,
    pub grid: Grid,
    pub quad: FluidQuadrature,
    pub quad_jets: QuadJets,
    pub grid_jets: GridJets,
    pub gl: GlParams,
    pub alpha_margin: f64,
    pub dt: f64,
    pub picard: PicardConfig,
    /// Assemble the memory term from the raw kernel + stored history instead
    /// of the folded running-displacement form (equivalence testing).
    pub raw_memory_kernel: bool,
    /// Disable the interface stabilization term (drift demonstration).
    pub disable_stabilization: bool,
    pub substep: SubstepOptions,
    /// Raw-kernel path: `int_0^t alpha ds` accumulated at committed steps.
    pub alpha_history_integral: DVector<f64>,
    pub eta0: ModalProfile,
    k_bend: DMatrix<f64>,
    memory_kernel: DMatrix<f64>,
}

impl CoupledSystem {
    pub fn new(
        basis: GlobalBasis,
        grid: Grid,
        gl: GlParams,
        alpha_margin: f64,
        dt: f64,
        picard: PicardConfig,
        quad_factor: usize,
        eta0: ModalProfile,
    ) -> Self {
        let quad = FluidQuadrature::for_basis(&basis, quad_factor);
        let quad_jets = QuadJets::build(&basis, &quad);
        let grid_jets = GridJets::build(&basis, grid);
        let k_bend = bending_matrix(&basis);
        let memory_kernel = memory_kernel_matrix(&basis);
        let n = basis.len();
        CoupledSystem {
            basis,
            grid,
            quad,
            quad_jets,
            grid_jets,
            gl,
            alpha_margin,
            dt,
            picard,
            raw_memory_kernel: false,
            disable_stabilization: false,
            substep: SubstepOptions::default(),
            alpha_history_integral: DVector::zeros(n),
            eta0,
            k_bend,
            memory_kernel,
        }
    }

    pub fn map_for(&self, displacement: &ModalProfile) -> HanzawaMap {
        HanzawaMap::channel(displacement.clone(), self.alpha_margin)
    }

    /// ALE relative transport velocity on the director grid, pulled back to
    /// reference contravariant components:
    /// `w = (grad Psi)^-1 (u o Psi - Psi_dot)`.
    fn ale_velocity(
        &self,
        map: &HanzawaMap,
        v_alpha: &[f64],
        dzeta_dt: &ModalProfile,
    ) -> Vec<Vector2<f64>> {
        let grid = self.grid;
        crate::exec::map_indexed(grid.len(), |idx| {
            let (i, j) = (idx % grid.nx, idx / grid.nx);
            let (x, s) = (grid.x(i), grid.s(j));
            let cj = map.jacobian_with_derivs(x, s);
            let g = Matrix2::new(1.0, 0.0, cj.p, cj.q);
            let mut u = Vector2::zeros();
            for (k, a) in v_alpha.iter().enumerate() {
                if *a != 0.0 {
                    u += g * self.grid_jets.at(idx, k).v * (*a / cj.q);
                }
            }
            let psi_dot = Vector2::new(0.0, dzeta_dt.value(x) * map.cutoff.value(s));
            let ginv = Matrix2::new(1.0, 0.0, -cj.p / cj.q, 1.0 / cj.q);
            ginv * (u - psi_dot)
        })
    }

    /// Director solve over the window, given the frozen (mollified) pair.
    #[allow(clippy::too_many_arguments)]
    fn solve_director_window(
        &self,
        d0: &DirectorState,
        times: &[f64],
        zeta: &[ModalProfile],
        dzeta: &[ModalProfile],
        valpha: &[Vec<f64>],
        report: &mut WindowReport,
    ) -> Result<Vec<DirectorState>> {
        let steps = times.len() - 1;
        let dt = self.dt;
        let mut out = Vec::with_capacity(times.len());
        out.push(d0.clone());
        let mut d = d0.clone();
        let interp = |traj: &[ModalProfile], frac: f64| -> ModalProfile {
            let i = frac.floor() as usize;
            let theta = frac - i as f64;
            if i + 1 >= traj.len() {
                traj[traj.len() - 1].clone()
            } else {
                traj[i].lerp(&traj[i + 1], theta)
            }
        };
        let interp_alpha = |frac: f64| -> Vec<f64> {
            let i = frac.floor() as usize;
            let theta = frac - i as f64;
            if i + 1 >= valpha.len() {
                valpha[valpha.len() - 1].clone()
            } else {
                valpha[i]
                    .iter()
                    .zip(&valpha[i + 1])
                    .map(|(a, b)| (1.0 - theta) * a + theta * b)
                    .collect()
            }
        };
        for step in 0..steps {
            let sf = step as f64;
            // Mid-step geometry for the diffusion operator.
            let z_mid = interp(zeta, sf + 0.5);
            let map_mid = self.map_for(&z_mid);
            let ops = DirectorOperators::new(GridMapData::build(self.grid, &map_mid)?);

            // Quarter-time transport velocities (mid-step map geometry).
            let w1 = self.ale_velocity(&map_mid, &interp_alpha(sf + 0.25), &interp(dzeta, sf + 0.25));
            let w2 = self.ale_velocity(&map_mid, &interp_alpha(sf + 0.75), &interp(dzeta, sf + 0.75));

            d = reaction_substep_exact(&d, 0.5 * dt, self.gl);
            let (next, rep): (DirectorState, SubstepReport) =
                transport_diffusion_substep(&d, &w1, &w2, &ops, dt, &self.substep)?;
            d = reaction_substep_exact(&next, 0.5 * dt, self.gl);

            report.cg_iterations += rep.cg_iterations;
            report.max_cfl = report.max_cfl.max(rep.cfl);
            out.push(d.clone());
        }
        Ok(out)
    }

    /// One Picard window (single attempt, no halving).
    pub fn picard_advance_window(
        &mut self,
        state: &CoupledState,
        window_steps: usize,
    ) -> Result<(CoupledState, WindowReport, WindowTrajectory)> {
        let dt = self.dt;
        let n = self.basis.len();
        let n_shell = self.basis.n_shell;
        let times: Vec<f64> = (0..=window_steps).map(|i| state.t + i as f64 * dt).collect();
        let mut report = WindowReport {
            window_steps,
            min_admissibility_margin: f64::INFINITY,
            ..WindowReport::default()
        };

        // Previous iterate: constant extension of the window-start state.
        let mut prev_alpha: Vec<Vec<f64>> = vec![state.alpha.clone(); window_steps + 1];
        let mut prev_disp: Vec<ModalProfile> =
            vec![state.shell.displacement.clone(); window_steps + 1];
        let mut prev_vel: Vec<ModalProfile> = vec![state.shell.velocity.clone(); window_steps + 1];
        let mut new_director: Vec<DirectorState> = Vec::new();
        let mut converged = false;

        let mut accepted_alpha = prev_alpha.clone();
        let mut accepted_h: Vec<DVector<f64>> = vec![DVector::from_vec(
            state.shell.displacement.coeffs.clone(),
        ); window_steps + 1];

        for iter in 1..=self.picard.max_iter {
            report.iterations = iter;
            // (i) Mollified frozen pair.
            let mut zeta_k = Vec::with_capacity(window_steps + 1);
            let mut dzeta_k = Vec::with_capacity(window_steps + 1);
            let mut valpha_k = Vec::with_capacity(window_steps + 1);
            for i in 0..=window_steps {
                let (z, v) = mollify_given_pair(
                    &self.basis,
                    &prev_disp[i],
                    &prev_alpha[i],
                    self.picard.mollifier_k,
                );
                let (dz, _) = mollify_given_pair(
                    &self.basis,
                    &prev_vel[i],
                    &prev_alpha[i],
                    self.picard.mollifier_k,
                );
                zeta_k.push(z);
                dzeta_k.push(dz);
                valpha_k.push(v);
            }
            for z in &zeta_k {
                let margin = self.alpha_margin - z.sup_norm();
                report.min_admissibility_margin = report.min_admissibility_margin.min(margin);
                if margin <= 0.0 {
                    return Err(Error::Admissibility(
                        "geometry left the admissible ball inside a window; \
                         shrink the window"
                            .into(),
                    ));
                }
            }

            // (ii) Director subproblem on the frozen pair.
            new_director = self.solve_director_window(
                &state.director,
                &times,
                &zeta_k,
                &dzeta_k,
                &valpha_k,
                &mut report,
            )?;

            // Ericksen forcing at the step times.
            let mut evecs = Vec::with_capacity(window_steps + 1);
            for i in 0..=window_steps {
                let map_i = self.map_for(&zeta_k[i]);
                let ops = DirectorOperators::new(GridMapData::build(self.grid, &map_i)?);
                evecs.push(assemble_ericksen_forcing(
                    &self.basis,
                    &map_i,
                    &new_director[i],
                    &ops,
                    &self.grid_jets,
                ));
            }

            // (iii) Galerkin integration with the new director.
            let mut system = WindowOde {
                sys: self,
                t0: state.t,
                zeta: &zeta_k,
                dzeta: &dzeta_k,
                valpha: &valpha_k,
                evecs: &evecs,
                gram_cache: Vec::new(),
            };
            let traj = integrate_galerkin_ode(
                &mut system,
                DVector::from_vec(state.alpha.clone()),
                DVector::from_vec(state.shell.displacement.coeffs.clone()),
                state.t,
                dt,
                window_steps,
            )?;
            let gram_cache = system.gram_cache;

            // (iv) Distance in the discrete X-norm.
            let mut distance: f64 = 0.0;
            for i in 0..=window_steps {
                let (alpha_i, h_i) = &traj[i];
                let d_alpha = DVector::from_iterator(
                    n,
                    alpha_i.iter().zip(&prev_alpha[i]).map(|(a, b)| a - b),
                );
                let gram = gram_cache
                    .iter()
                    .find(|(t, _)| (*t - times[i]).abs() < 0.25 * dt)
                    .map(|(_, a)| a);
                let u_norm = match gram {
                    Some(a) => (d_alpha.dot(&(a * &d_alpha))).max(0.0).sqrt(),
                    None => d_alpha.norm(),
                };
                let modes = mode_table(n_shell);
                let mut vel_norm = 0.0;
                let mut bend_norm = 0.0;
                for (si, m) in modes.iter().enumerate() {
                    let g = self.basis.boundary_global_index(si);
                    let dv = alpha_i[g] - prev_vel[i].coeffs[si];
                    vel_norm += dv * dv;
                    let dh = h_i[si] - prev_disp[i].coeffs[si];
                    bend_norm += (m.k as f64).powi(4) * dh * dh;
                }
                distance = distance.max(u_norm + vel_norm.sqrt() + bend_norm.sqrt());
            }
            report.distances.push(distance);

            // Adopt the new iterate.
            for i in 0..=window_steps {
                let (alpha_i, h_i) = &traj[i];
                prev_alpha[i] = alpha_i.iter().cloned().collect();
                prev_disp[i] = ModalProfile {
                    coeffs: h_i.iter().cloned().collect(),
                };
                prev_vel[i] = self.basis.shell_velocity(&prev_alpha[i]);
                accepted_alpha[i] = prev_alpha[i].clone();
                accepted_h[i] = h_i.clone();
            }

            if distance < self.picard.tol {
                converged = true;
                break;
            }
        }

        if !converged {
            let last = report.distances.last().copied().unwrap_or(f64::INFINITY);
            if last > 10.0 * self.picard.tol {
                return Err(Error::NonConvergence(format!(
                    "window at t = {:.6}: distance {last:.3e} after {} passes",
                    state.t, report.iterations
                )));
            }
        }
        report.converged = converged;

        // Commit: raw-kernel history integral over the accepted steps.
        if self.raw_memory_kernel {
            for i in 0..window_steps {
                let a0 = DVector::from_vec(accepted_alpha[i].clone());
                let a1 = DVector::from_vec(accepted_alpha[i + 1].clone());
                self.alpha_history_integral += (a0 + a1) * (0.5 * dt);
            }
        }

        let final_alpha = accepted_alpha[window_steps].clone();
        let final_h = &accepted_h[window_steps];
        let shell = ShellState {
            displacement: ModalProfile {
                coeffs: final_h.iter().cloned().collect(),
            },
            velocity: self.basis.shell_velocity(&final_alpha),
        };
        let new_state = CoupledState {
            t: times[window_steps],
            alpha: final_alpha,
            shell,
            director: new_director[window_steps].clone(),
        };
        let trajectory = WindowTrajectory {
            times,
            alpha: accepted_alpha,
            displacement: prev_disp,
            velocity: prev_vel,
            director: new_director,
        };
        Ok((new_state, report, trajectory))
    }

    /// Window advance with the halve-and-retry rule (up to 4 halvings). The
    /// returned trajectories cover exactly one nominal window worth of steps.
    pub fn advance_window_with_retry(
        &mut self,
        state: &CoupledState,
    ) -> Result<(CoupledState, Vec<WindowReport>, Vec<WindowTrajectory>)> {
        let nominal = self.picard.window_steps;
        let mut halvings = 0usize;
        let mut steps_left = nominal;
        let mut cur = state.clone();
        let mut reports = Vec::new();
        let mut trajectories = Vec::new();
        while steps_left > 0 {
            let attempt_steps = (nominal >> halvings).max(1).min(steps_left);
            match self.picard_advance_window(&cur, attempt_steps) {
                Ok((next, mut rep, traj)) => {
                    rep.halvings = halvings;
                    cur = next;
                    steps_left -= attempt_steps;
                    reports.push(rep);
                    trajectories.push(traj);
                }
                Err(e @ (Error::NonConvergence(_) | Error::Admissibility(_))) => {
                    halvings += 1;
                    if halvings > 4 {
                        return Err(e);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok((cur, reports, trajectories))
    }
}

/// Galerkin provider over one window: interpolates the frozen pair to stage
/// times, assembles on demand, and caches step-boundary Grams for the
/// X-norm.
struct WindowOde<'a> {
    sys: &'a CoupledSystem,
    t0: f64,
    zeta: &'a [ModalProfile],
    dzeta: &'a [ModalProfile],
    valpha: &'a [Vec<f64>],
    evecs: &'a [DVector<f64>],
    gram_cache: Vec<(f64, DMatrix<f64>)>,
}

impl WindowOde<'_> {
    fn frac(&self, t: f64) -> f64 {
        ((t - self.t0) / self.sys.dt).clamp(0.0, (self.zeta.len() - 1) as f64)
    }

    fn interp_profile(&self, traj: &[ModalProfile], t: f64) -> ModalProfile {
        let f = self.frac(t);
        let i = (f.floor() as usize).min(traj.len() - 1);
        if i + 1 >= traj.len() {
            traj[i].clone()
        } else {
            traj[i].lerp(&traj[i + 1], f - i as f64)
        }
    }
}

impl GalerkinSystem for WindowOde<'_> {
    fn matrices(&mut self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let zeta = self.interp_profile(self.zeta, t);
        let mut dzeta = self.interp_profile(self.dzeta, t);
        if self.sys.disable_stabilization {
            dzeta = ModalProfile::zeros(dzeta.coeffs.len());
        }
        let f = self.frac(t);
        let i = (f.floor() as usize).min(self.valpha.len() - 1);
        let theta = f - i as f64;
        let v_alpha: Vec<f64> = if i + 1 >= self.valpha.len() {
            self.valpha[i].clone()
        } else {
            self.valpha[i]
                .iter()
                .zip(&self.valpha[i + 1])
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect()
        };
        let map = self.sys.map_for(&zeta);
        let out = assemble_coefficients(&AssemblyInput {
            basis: &self.sys.basis,
            map: &map,
            dzeta_dt: &dzeta,
            v_alpha: &v_alpha,
            quad: &self.sys.quad,
            jets: &self.sys.quad_jets,
        })?;
        // Cache step-boundary Grams for the X-norm distance.
        let step_pos = (t - self.t0) / self.sys.dt;
        if (step_pos - step_pos.round()).abs() < 1e-9
            && !self
                .gram_cache
                .iter()
                .any(|(tc, _)| (tc - t).abs() < 0.25 * self.sys.dt)
        {
            self.gram_cache.push((t, out.a.clone()));
        }
        Ok((out.a, out.b))
    }

    fn forcing(&mut self, t: f64) -> DVector<f64> {
        let f = self.frac(t);
        let i = (f.floor() as usize).min(self.evecs.len() - 1);
        let theta = f - i as f64;
        let mut e = if i + 1 >= self.evecs.len() {
            self.evecs[i].clone()
        } else {
            &self.evecs[i] * (1.0 - theta) + &self.evecs[i + 1] * theta
        };
        if self.sys.raw_memory_kernel {
            // c . int_0^t alpha ds + d, with the within-window partial
            // integral extended from the last committed step.
            let mut hist = self.sys.alpha_history_integral.clone();
            let steps_in = f.floor() as usize;
            for k in 0..steps_in.min(self.valpha.len() - 1) {
                let a0 = DVector::from_vec(self.valpha[k].clone());
                let a1 = DVector::from_vec(self.valpha[k + 1].clone());
                hist += (a0 + a1) * (0.5 * self.sys.dt);
            }
            let rem = (f - f.floor()) * self.sys.dt;
            if rem > 0.0 && steps_in < self.valpha.len() {
                hist += DVector::from_vec(self.valpha[steps_in].clone()) * rem;
            }
            e += &self.sys.memory_kernel * hist
                + initial_bending_load(&self.sys.basis, &self.sys.eta0);
        }
        e
    }

    fn bending(&self, h: &DVector<f64>) -> DVector<f64> {
        if self.sys.raw_memory_kernel {
            DVector::zeros(self.sys.basis.len())
        } else {
            -(&self.sys.k_bend * h)
        }
    }

    fn shell_rate(&self, alpha: &DVector<f64>) -> DVector<f64> {
        let prof = self.sys.basis.shell_velocity(alpha.as_slice());
        DVector::from_vec(prof.coeffs)
    }

    fn n_shell(&self) -> usize {
        self.sys.basis.n_shell
    }
}
