//! Minimal quantum dynamical semigroup by Picard iteration, with an RK4
//! master-equation oracle, Choi matrices and the classical drift-diffusion
//! comparison.
//!
//! The iteration solves
//!
//! ```text
//! T_t(X) = P(t)† X P(t) + ∫₀ᵗ P(t−s)† Z(s) P(t−s) ds,   Z(s) = Σ L_l† T_s(X) L_l
//! ```
//!
//! with `P(t) = e^{tG}`, using `Z` from the previous iterate. On the uniform
//! time grid the integral is advanced one step at a time:
//!
//! ```text
//! T_{m+1} = P(Δ)† T_m P(Δ) + ∫₀^Δ P(r)† Z(t_{m+1} − r) P(r) dr
//! ```
//!
//! where `Z` is linear between nodes and the local integral uses Gauss–Legendre
//! sub-nodes with exact propagators. All weights are positive, so every sweep
//! is a completely positive map and successive iterates are non-decreasing
//! for positive `X`.

use std::path::Path;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{derivative_operator, laplacian, DiscreteOperator, GridSpec, Structure};
use crate::lindblad::{wave_packets, LindbladSystem};
use crate::linalg::{self, c64, mul_into, real, CMat, ONE};

/// Contraction slack allowed on `‖P(t)‖₂`.
pub const CONTRACTION_SLACK: f64 = 1e-10;
/// Largest `M` for which the `M²×M²` Choi matrix is built.
pub const CHOI_CAP: usize = 32;

/// A bounded operator on the grid space.
#[derive(Debug, Clone)]
pub struct Observable {
    pub matrix: CMat,
    pub hermitian: bool,
    /// Label of the scalar field when the observable is a multiplication operator.
    pub diagonal_of: Option<String>,
}

impl Observable {
    pub fn new(matrix: CMat, hermitian: bool) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!("observable is {}x{}", matrix.nrows(), matrix.ncols())));
        }
        if !linalg::is_finite(matrix.as_ref()) {
            return Err(Error::NonFinite {
                context: "observable".into(),
                value: f64::NAN,
            });
        }
        if hermitian {
            let defect = linalg::hermitian_defect(matrix.as_ref());
            if defect > 1e-12 * linalg::max_abs(matrix.as_ref()) {
                return Err(Error::InvalidArgument(format!("hermitian flag but ‖X − X†‖ = {defect:e}")));
            }
        }
        Ok(Observable {
            matrix,
            hermitian,
            diagonal_of: None,
        })
    }

    /// Hermitian iff `‖X − X†‖_max ≤ 10⁻¹²‖X‖_max`.
    pub fn detect(matrix: CMat) -> Result<Self> {
        let hermitian = linalg::hermitian_defect(matrix.as_ref()) <= 1e-12 * linalg::max_abs(matrix.as_ref());
        Self::new(matrix, hermitian)
    }

    pub fn identity(m: usize) -> Self {
        Observable {
            matrix: linalg::identity(m),
            hermitian: true,
            diagonal_of: None,
        }
    }

    pub fn multiplication(g: &GridSpec, f: &ScalarField) -> Result<Self> {
        let op = crate::grid::multiplication_from_values(g, &f.sample(g))?;
        Ok(Observable {
            matrix: op.matrix,
            hermitian: true,
            diagonal_of: Some(f.label().to_string()),
        })
    }

    /// `|u⟩⟨u| / ‖u‖²`.
    pub fn projector(u: &[c64]) -> Result<Self> {
        let n = linalg::norm2(u);
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("projector onto the zero vector".into()));
        }
        let m = u.len();
        let mut p = CMat::from_fn(m, m, |i, j| u[i] * u[j].conj() / (n * n));
        linalg::symmetrize_in_place(&mut p);
        Ok(Observable {
            matrix: p,
            hermitian: true,
            diagonal_of: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("time horizon must be positive, got {horizon}")));
        }
        if steps < 2 {
            return Err(Error::InvalidArgument(format!("quadrature needs at least 2 steps, got {steps}")));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        self.horizon * m as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|m| self.time(m)).collect()
    }
}

/// `P(t) = e^{tG}`, certified to be a contraction.
pub fn propagator(sys: &LindbladSystem, t: f64) -> Result<DiscreteOperator> {
    let p = propagator_matrix(sys, t)?;
    DiscreteOperator::new(p, Structure::General, *sys.grid())
}

fn propagator_matrix(sys: &LindbladSystem, t: f64) -> Result<CMat> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("propagator time must be ≥ 0, got {t}")));
    }
    let m = sys.size();
    if t == 0.0 {
        return Ok(linalg::identity(m));
    }
    let tg = CMat::from_fn(m, m, |i, j| sys.g()[(i, j)] * t);
    let p = linalg::expm(&tg)?;
    if !linalg::is_finite(p.as_ref()) {
        return Err(Error::NonFinite {
            context: format!("e^{{tG}} at t = {t}"),
            value: f64::NAN,
        });
    }
    let norm = linalg::spectral_norm(&p)?;
    if norm > 1.0 + CONTRACTION_SLACK {
        return Err(Error::ContractionViolated { time: t, norm });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Gauss–Legendre sub-nodes with exact propagators and `Z` linear between nodes.
    ExponentialGauss,
    /// Composite trapezoid on the time-grid nodes.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub quadrature: Quadrature,
    /// Record `λ_min(T⁽ⁿ⁺¹⁾ − T⁽ⁿ⁾)` over nodes when `X ⪰ 0`.
    pub monotonicity: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-9,
            max_iter: 200,
            quadrature: Quadrature::ExponentialGauss,
            monotonicity: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationEvent {
    pub iteration: usize,
    pub correction: f64,
}

#[derive(Debug, Clone)]
pub struct SemigroupRun {
    pub time_grid: TimeGrid,
    /// `T_{t_m}(X)` for `m = 0..=Mₜ`.
    pub nodes: Vec<CMat>,
    pub iterations: usize,
    /// `r_n = max_m ‖T⁽ⁿ⁾ − T⁽ⁿ⁻¹⁾‖_F`, one entry per sweep after the first.
    pub residuals: Vec<f64>,
    /// `min_m λ_min(T⁽ⁿ⁾ − T⁽ⁿ⁻¹⁾) / ‖X‖₂`, recorded only for `X ⪰ 0`.
    pub monotonicity: Vec<f64>,
    pub symmetrization: Vec<SymmetrizationEvent>,
    pub converged: bool,
}

impl SemigroupRun {
    pub fn last(&self) -> &CMat {
        self.nodes.last().expect("time grid has at least three nodes")
    }

    /// `max_m ‖T_{t_m} − I‖_max`; the conservativity defect when `X = I`.
    pub fn identity_defect(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|t| {
                let mut d = t.clone();
                for i in 0..d.nrows() {
                    d[(i, i)] -= ONE;
                }
                linalg::max_abs(d.as_ref())
            })
            .collect()
    }
}

// 5-point Gauss–Legendre on [−1, 1]
const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// One quadrature node of the local integral: `P(r)† (a Z_{m+1} + b Z_m) P(r)`.
struct LocalNode {
    a: f64,
    b: f64,
    p: CMat,
}

struct Stepper<'a> {
    sys: &'a LindbladSystem,
    step: CMat,
    local: Vec<LocalNode>,
}

impl<'a> Stepper<'a> {
    fn new(sys: &'a LindbladSystem, dt: f64, quadrature: Quadrature) -> Result<Self> {
        let step = propagator_matrix(sys, dt)?;
        let local = match quadrature {
            Quadrature::Trapezoid => vec![
                LocalNode {
                    a: 0.5 * dt,
                    b: 0.0,
                    p: linalg::identity(sys.size()),
                },
                LocalNode {
                    a: 0.0,
                    b: 0.5 * dt,
                    p: step.clone(),
                },
            ],
            Quadrature::ExponentialGauss => {
                let g_norm = linalg::spectral_norm(sys.g())?;
                let n_sub = ((dt * 2.0 * g_norm).ceil() as usize).max(1);
                let h = dt / n_sub as f64;
                let mut nodes = Vec::with_capacity(5 * n_sub);
                for s in 0..n_sub {
                    for q in 0..5 {
                        let r = h * (s as f64 + 0.5 * (GL_NODES[q] + 1.0));
                        let w = 0.5 * h * GL_WEIGHTS[q];
                        let frac = r / dt;
                        nodes.push(LocalNode {
                            a: w * (1.0 - frac),
                            b: w * frac,
                            p: propagator_matrix(sys, r)?,
                        });
                    }
                }
                nodes
            }
        };
        Ok(Stepper { sys, step, local })
    }

    fn jump_term(&self, t: &CMat, out: &mut CMat, scratch: &mut CMat) {
        let mut first = true;
        for l in self.sys.lindblad_ops() {
            mul_into(scratch.as_mut(), Accum::Replace, t.as_ref(), l.as_ref(), ONE);
            let accum = if first { Accum::Replace } else { Accum::Add };
            matmul(out.as_mut(), accum, l.adjoint(), scratch.as_ref(), ONE, Par::Seq);
            first = false;
        }
    }

    /// One sweep over the time grid. `prev = None` gives `T⁽⁰⁾ = P† X P`.
    fn sweep(&self, x: &CMat, steps: usize, prev: Option<&[CMat]>) -> Vec<CMat> {
        let m = x.nrows();
        let mut out = Vec::with_capacity(steps + 1);
        out.push(x.clone());
        let mut scratch = CMat::zeros(m, m);
        let mut z_lo = CMat::zeros(m, m);
        let mut z_hi = CMat::zeros(m, m);
        let mut mix = CMat::zeros(m, m);
        if let Some(p) = prev {
            self.jump_term(&p[0], &mut z_lo, &mut scratch);
        }
        for k in 0..steps {
            let mut next = CMat::zeros(m, m);
            linalg::sandwich_add(&mut next, &self.step, &out[k], 1.0, &mut scratch);
            if let Some(p) = prev {
                self.jump_term(&p[k + 1], &mut z_hi, &mut scratch);
                for node in &self.local {
                    for j in 0..m {
                        for i in 0..m {
                            mix[(i, j)] = z_hi[(i, j)] * node.a + z_lo[(i, j)] * node.b;
                        }
                    }
                    linalg::sandwich_add(&mut next, &node.p, &mix, 1.0, &mut scratch);
                }
                std::mem::swap(&mut z_lo, &mut z_hi);
            }
            out.push(next);
        }
        out
    }
}

fn is_positive_semidefinite(x: &CMat) -> Result<bool> {
    let scale = linalg::max_abs(x.as_ref());
    if scale == 0.0 {
        return Ok(true);
    }
    Ok(linalg::min_eigenvalue(x)? >= -1e-14 * scale * x.nrows() as f64)
}

/// Runs the Picard iteration to convergence or `max_iter` sweeps.
pub fn picard_run(sys: &LindbladSystem, x: &Observable, tg: TimeGrid, opts: &PicardOptions) -> Result<SemigroupRun> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if x.dim() != sys.size() {
        return Err(Error::DimensionMismatch(format!("observable is {0}x{0}, system has M = {1}", x.dim(), sys.size())));
    }
    let tg = TimeGrid::new(tg.horizon, tg.steps)?;
    let stepper = Stepper::new(sys, tg.dt(), opts.quadrature)?;
    let track = opts.monotonicity && x.hermitian && is_positive_semidefinite(&x.matrix)?;
    let x_norm = if track { linalg::spectral_norm(&x.matrix)?.max(f64::MIN_POSITIVE) } else { 1.0 };

    let mut symmetrization = Vec::new();
    let mut finish = |nodes: &mut [CMat], iteration: usize| {
        if x.hermitian {
            let moved = nodes.iter_mut().map(linalg::symmetrize_in_place).fold(0.0, f64::max);
            if moved > 1e-10 {
                symmetrization.push(SymmetrizationEvent {
                    iteration,
                    correction: moved,
                });
            }
        }
    };

    let mut current = stepper.sweep(&x.matrix, tg.steps, None);
    finish(&mut current, 0);
    let mut residuals = Vec::new();
    let mut monotonicity = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for n in 1..=opts.max_iter {
        let mut next = stepper.sweep(&x.matrix, tg.steps, Some(&current));
        finish(&mut next, n);
        let mut residual = 0.0_f64;
        let mut min_step = f64::INFINITY;
        for (a, b) in next.iter().zip(&current) {
            let diff = a - b;
            residual = residual.max(linalg::frobenius(diff.as_ref()));
            if track {
                min_step = min_step.min(linalg::min_eigenvalue(&diff)? / x_norm);
            }
        }
        if !residual.is_finite() {
            return Err(Error::Diverged(format!("Picard residual became {residual} at sweep {n}")));
        }
        residuals.push(residual);
        if track {
            monotonicity.push(min_step);
        }
        current = next;
        iterations = n;
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(SemigroupRun {
        time_grid: tg,
        nodes: current,
        iterations,
        residuals,
        monotonicity,
        symmetrization: std::mem::take(&mut symmetrization),
        converged,
    })
}

/// RK4 integrator of `dY/ds = ℒ(Y)` with a precomputed `‖ℒ‖` estimate.
pub struct MasterOracle<'a> {
    sys: &'a LindbladSystem,
    norm: f64,
}

impl<'a> MasterOracle<'a> {
    /// Estimates `‖ℒ‖` (Hilbert–Schmidt) by power iteration on `ℒ†ℒ`.
    pub fn new(sys: &'a LindbladSystem) -> Result<Self> {
        let m = sys.size();
        let mut y = CMat::from_fn(m, m, |i, j| c64::new((0.7 * i as f64 + 1.3 * j as f64).sin(), (0.4 * i as f64 - 0.9 * j as f64).cos()));
        let mut estimate = 0.0_f64;
        for _ in 0..60 {
            let n = linalg::frobenius(y.as_ref());
            if n == 0.0 {
                break;
            }
            y = &y * faer::Scale(real(1.0 / n));
            let ly = sys.generator_apply(&y)?;
            estimate = linalg::frobenius(ly.as_ref());
            y = sys.generator_adjoint_apply(&ly)?;
        }
        Ok(MasterOracle { sys, norm: estimate })
    }

    pub fn generator_norm(&self) -> f64 {
        self.norm
    }

    /// `Y(t)` from `Y(0) = X` with `⌈t/dt⌉` equal steps.
    pub fn evolve(&self, x: &CMat, t: f64, dt: f64) -> Result<CMat> {
        let m = self.sys.size();
        if x.nrows() != m || x.ncols() != m {
            return Err(Error::DimensionMismatch(format!("observable is {}x{}, system has M = {m}", x.nrows(), x.ncols())));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time must be ≥ 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(x.clone());
        }
        if !(dt > 0.0 && dt <= t) {
            return Err(Error::InvalidArgument(format!("need 0 < dt ≤ t, got dt = {dt}, t = {t}")));
        }
        let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let product = h * self.norm;
        if product > 1.0 {
            return Err(Error::StepTooLarge { dt: h, product });
        }
        let limit = 10.0 * (m as f64).sqrt() * linalg::frobenius(x.as_ref()).max(f64::MIN_POSITIVE);
        let mut y = x.clone();
        let mut k = [CMat::zeros(m, m), CMat::zeros(m, m), CMat::zeros(m, m), CMat::zeros(m, m)];
        let mut stage = CMat::zeros(m, m);
        let mut scratch = CMat::zeros(m, m);
        for step in 0..steps {
            self.sys.generator_apply_into(&y, &mut k[0], &mut scratch);
            for (s, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
                for j in 0..m {
                    for i in 0..m {
                        stage[(i, j)] = y[(i, j)] + k[s - 1][(i, j)] * (c * h);
                    }
                }
                self.sys.generator_apply_into(&stage, &mut k[s], &mut scratch);
            }
            for j in 0..m {
                for i in 0..m {
                    y[(i, j)] += (k[0][(i, j)] + (k[1][(i, j)] + k[2][(i, j)]) * 2.0 + k[3][(i, j)]) * (h / 6.0);
                }
            }
            let n = linalg::frobenius(y.as_ref());
            if !(n <= limit) {
                return Err(Error::Diverged(format!("RK4 norm {n:e} exceeds {limit:e} at step {}", step + 1)));
            }
        }
        Ok(y)
    }
}

/// RK4 solution of `dY/ds = ℒ(Y)`, `Y(0) = X`, at time `t`.
pub fn master_oracle(sys: &LindbladSystem, x: &CMat, t: f64, dt: f64) -> Result<CMat> {
    MasterOracle::new(sys)?.evolve(x, t, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiReport {
    pub time: f64,
    pub dim: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `λ_min ≥ −10⁻⁸ λ_max`.
    pub completely_positive: bool,
}

/// Choi matrix `Σ E_ij ⊗ T_t(E_ij)` from oracle evolutions of all matrix units.
pub fn choi_map(sys: &LindbladSystem, t: f64, dt: f64) -> Result<ChoiReport> {
    let m = sys.size();
    if m > CHOI_CAP {
        return Err(Error::DimensionCap(format!("Choi matrix needs M ≤ {CHOI_CAP}, got M = {m}")));
    }
    let oracle = MasterOracle::new(sys)?;
    let mut choi = CMat::zeros(m * m, m * m);
    for i in 0..m {
        for j in i..m {
            let mut e = CMat::zeros(m, m);
            e[(i, j)] = ONE;
            let te = oracle.evolve(&e, t, dt)?;
            // T(E_ji) = T(E_ij)†
            for a in 0..m {
                for b in 0..m {
                    choi[(i * m + a, j * m + b)] = te[(a, b)];
                    choi[(j * m + b, i * m + a)] = te[(a, b)].conj();
                }
            }
        }
    }
    let ev = linalg::hermitian_eigenvalues(&choi)?;
    let lambda_min = ev[0];
    let lambda_max = ev[ev.len() - 1];
    Ok(ChoiReport {
        time: t,
        dim: m,
        lambda_min,
        lambda_max,
        completely_positive: lambda_min >= -1e-8 * lambda_max,
    })
}

/// Crank–Nicolson solution of `∂_t f = ½Δ_h f − 2 Σ W_l D_l f` with Dirichlet
/// boundaries, from `f0` sampled on `g`.
pub fn classical_solve(w: &VectorField, g: &GridSpec, f0: &ScalarField, t: f64, dt: f64) -> Result<Vec<f64>> {
    if w.dim() != g.dim || f0.dim() != g.dim {
        return Err(Error::DimensionMismatch(format!("field d={}, data d={}, grid d={}", w.dim(), f0.dim(), g.dim)));
    }
    let values = f0.sample(g);
    check_bulk_support(g, &values)?;
    classical_solve_values(w, g, &values, t, dt)
}

fn check_bulk_support(g: &GridSpec, values: &[f64]) -> Result<()> {
    let peak = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let edge = (0..g.size()).filter(|&p| !g.is_bulk(p)).fold(0.0_f64, |a, p| a.max(values[p].abs()));
    if edge > 1e-8 * peak {
        return Err(Error::BoundaryContamination(format!(
            "initial data reaches {edge:e} (peak {peak:e}) inside the boundary layers"
        )));
    }
    Ok(())
}

pub fn classical_solve_values(w: &VectorField, g: &GridSpec, f0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    if f0.len() != g.size() {
        return Err(Error::DimensionMismatch(format!("{} samples for {} points", f0.len(), g.size())));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be ≥ 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(f0.to_vec());
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let m = g.size();
    let lap = laplacian(g).matrix;
    let mut a = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * lap[(i, j)].re);
    for l in 0..g.dim {
        let d = derivative_operator(g, l)?.matrix;
        let wl = g.sample(|x| w.value(x, l));
        for i in 0..m {
            for j in 0..m {
                let dij = d[(i, j)].re;
                if dij != 0.0 {
                    a[(i, j)] -= 2.0 * wl[i] * dij;
                }
            }
        }
    }
    let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let lhs = Mat::<f64>::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - 0.5 * h * a[(i, j)]);
    let rhs_op = Mat::<f64>::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } + 0.5 * h * a[(i, j)]);
    let lu = lhs.partial_piv_lu();
    let peak0 = f0.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut f = Mat::<f64>::from_fn(m, 1, |i, _| f0[i]);
    for step in 0..steps {
        let rhs = &rhs_op * &f;
        f = faer::linalg::solvers::Solve::solve(&lu, &rhs);
        let peak = (0..m).fold(0.0_f64, |a, i| a.max(f[(i, 0)].abs()));
        if !peak.is_finite() || peak > 10.0 * peak0.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged(format!(
                "classical solution grew to {peak:e} (from {peak0:e}) at step {}; advection-dominated, refine the grid",
                step + 1
            )));
        }
    }
    Ok((0..m).map(|i| f[(i, 0)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalComparison {
    pub time: f64,
    pub points: usize,
    pub spacing: f64,
    /// `max_u |⟨u, T_t(X)u⟩ − ⟨u, f_t u⟩| / ‖u‖²` over bulk wave packets.
    pub error: f64,
    /// Frobenius norm of the off-diagonal part of `T_t(X)`.
    pub leakage: f64,
    pub picard_iterations: usize,
    pub converged: bool,
}

/// Evolves `diag(f0)` with the semigroup and `f0` with the classical solver
/// and compares them on bulk wave packets.
pub fn compare_classical(sys: &LindbladSystem, f0: &ScalarField, tg: TimeGrid, opts: &PicardOptions) -> Result<ClassicalComparison> {
    let g = *sys.grid();
    let x = Observable::multiplication(&g, f0)?;
    check_bulk_support(&g, &f0.sample(&g))?;
    let run = picard_run(sys, &x, tg, opts)?;
    let ft = classical_solve(sys.field(), &g, f0, tg.horizon, tg.dt())?;
    let tx = run.last();
    let mut error = 0.0_f64;
    for u in wave_packets(&g) {
        let lhs = linalg::quadratic_form(tx, &u);
        let rhs: f64 = u.iter().zip(&ft).map(|(z, f)| z.norm_sqr() * f).sum();
        let n2 = linalg::norm2(&u).powi(2);
        error = error.max((lhs - real(rhs)).norm() / n2);
    }
    let m = g.size();
    let mut off = 0.0_f64;
    for j in 0..m {
        for i in 0..m {
            if i != j {
                off += tx[(i, j)].norm_sqr();
            }
        }
    }
    Ok(ClassicalComparison {
        time: tg.horizon,
        points: g.points,
        spacing: g.spacing(),
        error,
        leakage: off.sqrt(),
        picard_iterations: run.iterations,
        converged: run.converged,
    })
}

/// One row of a time-series CSV: `iteration,node_time,metric,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub iteration: Option<usize>,
    pub node_time: Option<f64>,
    pub metric: String,
    pub value: f64,
}

impl SemigroupRun {
    pub fn residual_rows(&self) -> Vec<MetricRow> {
        let mut rows: Vec<MetricRow> = self
            .residuals
            .iter()
            .enumerate()
            .map(|(n, &r)| MetricRow {
                iteration: Some(n + 1),
                node_time: None,
                metric: "residual".into(),
                value: r,
            })
            .collect();
        rows.extend(self.monotonicity.iter().enumerate().map(|(n, &v)| MetricRow {
            iteration: Some(n + 1),
            node_time: None,
            metric: "monotonicity_min_eigenvalue".into(),
            value: v,
        }));
        rows.extend(self.symmetrization.iter().map(|e| MetricRow {
            iteration: Some(e.iteration),
            node_time: None,
            metric: "symmetrization_correction".into(),
            value: e.correction,
        }));
        rows
    }

    /// Per-node rows for `metric` with the final iteration number.
    pub fn node_rows(&self, metric: &str, values: &[f64]) -> Vec<MetricRow> {
        values
            .iter()
            .enumerate()
            .map(|(m, &v)| MetricRow {
                iteration: Some(self.iterations),
                node_time: Some(self.time_grid.time(m)),
                metric: metric.to_string(),
                value: v,
            })
            .collect()
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{other:?}")),
    })?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::fields;
    use crate::lindblad::assemble;
    use crate::linalg::max_abs;

    fn sys_linear(n: usize, r: f64) -> LindbladSystem {
        assemble(&fields::linear(), &GridSpec::new(1, r, n, 3).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn propagator_basics() {
        let sys = sys_linear(32, 6.0);
        let p0 = propagator(&sys, 0.0).unwrap();
        assert_eq!(max_abs((&p0.matrix - linalg::identity(32)).as_ref()), 0.0);
        for t in [0.1, 0.5, 1.0] {
            let p = propagator(&sys, t).unwrap();
            assert!(linalg::spectral_norm(&p.matrix).unwrap() <= 1.0 + 1e-10);
        }
        let ps = propagator(&sys, 0.1).unwrap().matrix;
        let pt = propagator(&sys, 0.2).unwrap().matrix;
        let pst = propagator(&sys, 0.3).unwrap().matrix;
        let prod = linalg::mul(ps.as_ref(), pt.as_ref());
        assert!(max_abs((&pst - &prod).as_ref()) <= 1e-10);
        assert!(propagator(&sys, -1.0).is_err());
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        let tg = TimeGrid::new(0.5, 4).unwrap();
        assert_eq!(tg.times(), vec![0.0, 0.125, 0.25, 0.375, 0.5]);
    }

    #[test]
    fn identity_is_conserved() {
        let sys = sys_linear(24, 5.0);
        let run = picard_run(&sys, &Observable::identity(24), TimeGrid::new(0.3, 32).unwrap(), &PicardOptions::default()).unwrap();
        assert!(run.converged);
        assert_eq!(max_abs((&run.nodes[0] - linalg::identity(24)).as_ref()), 0.0);
        let worst = run.identity_defect().into_iter().fold(0.0, f64::max);
        assert!(worst <= 1e-8, "{worst}");
        assert!(run.monotonicity.iter().all(|&v| v >= -1e-10), "{:?}", run.monotonicity);
    }

    #[test]
    fn picard_matches_oracle() {
        let n = 24;
        let sys = sys_linear(n, 6.0);
        let g = *sys.grid();
        let x = Observable::multiplication(&g, &ScalarField::gaussian(vec![0.0], 1.0).unwrap()).unwrap();
        let tg = TimeGrid::new(0.1, 64).unwrap();
        let run = picard_run(&sys, &x, tg, &PicardOptions::default()).unwrap();
        assert!(run.converged);
        let oracle = master_oracle(&sys, &x.matrix, 0.1, tg.dt() / 10.0).unwrap();
        let err = max_abs((run.last() - &oracle).as_ref());
        assert!(err <= 1e-6, "{err}");
        for w in run.residuals.windows(2).skip(1) {
            assert!(w[1] <= 1.1 * w[0], "{:?}", run.residuals);
        }
    }

    #[test]
    fn trapezoid_is_available_but_coarse() {
        let sys = sys_linear(16, 4.0);
        let opts = PicardOptions {
            quadrature: Quadrature::Trapezoid,
            ..PicardOptions::default()
        };
        let run = picard_run(&sys, &Observable::identity(16), TimeGrid::new(0.1, 16).unwrap(), &opts).unwrap();
        assert!(run.converged);
        let worst = run.identity_defect().into_iter().fold(0.0, f64::max);
        assert!(worst > 1e-8 && worst < 1.0, "{worst}");
    }

    #[test]
    fn oracle_fixed_points_and_order() {
        let sys = sys_linear(16, 4.0);
        let id = linalg::identity(16);
        let y = master_oracle(&sys, &id, 1.0, 1e-3).unwrap();
        assert!(max_abs((&y - &id).as_ref()) <= 1e-10);
        let z = master_oracle(&sys, &CMat::zeros(16, 16), 0.5, 1e-2).unwrap();
        assert_eq!(max_abs(z.as_ref()), 0.0);

        let x = Observable::multiplication(sys.grid(), &ScalarField::gaussian(vec![0.5], 0.8).unwrap()).unwrap();
        let oracle = MasterOracle::new(&sys).unwrap();
        let dt = 0.5 / oracle.generator_norm();
        let y1 = oracle.evolve(&x.matrix, 0.2, dt).unwrap();
        let y2 = oracle.evolve(&x.matrix, 0.2, dt / 2.0).unwrap();
        let y4 = oracle.evolve(&x.matrix, 0.2, dt / 4.0).unwrap();
        let e1 = max_abs((&y1 - &y2).as_ref());
        let e2 = max_abs((&y2 - &y4).as_ref());
        assert!(e1 / e2 >= 12.0, "{e1} {e2}");
        assert!(matches!(oracle.evolve(&x.matrix, 0.2, 0.2), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn choi_examples() {
        let g = GridSpec::new(1, 3.0, 8, 1).unwrap();
        let sys = assemble(&fields::linear(), &g, 1.0).unwrap();
        let r0 = choi_map(&sys, 0.0, 1e-3).unwrap();
        assert!(r0.lambda_min.abs() <= 1e-12);
        assert!((r0.lambda_max - 8.0).abs() <= 1e-12);
        let r = choi_map(&sys, 0.05, 1e-3).unwrap();
        assert!(r.completely_positive, "{r:?}");
        let big = sys_linear(40, 4.0);
        assert!(matches!(choi_map(&big, 0.1, 1e-3), Err(Error::DimensionCap(_))));
    }

    #[test]
    fn classical_solver_heat_kernel() {
        // closed form: Gaussian variance s² + t, amplitude s/√(s² + t)
        let g = GridSpec::new(1, 8.0, 129, 3).unwrap();
        let s2 = 0.5;
        let t = 0.2;
        let f0 = ScalarField::gaussian(vec![0.0], s2).unwrap();
        let ft = classical_solve(&VectorField::zero(1), &g, &f0, t, 1e-3).unwrap();
        let amp = (s2 / (s2 + t)).sqrt();
        let err = g
            .axis_coordinates()
            .iter()
            .zip(&ft)
            .map(|(x, f)| (f - amp * (-x * x / (2.0 * (s2 + t))).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
        let same = classical_solve(&VectorField::zero(1), &g, &f0, 0.0, 1e-3).unwrap();
        assert_eq!(same, f0.sample(&g));
        let wide = ScalarField::gaussian(vec![0.0], 20.0).unwrap();
        assert!(matches!(
            classical_solve(&VectorField::zero(1), &g, &wide, t, 1e-3),
            Err(Error::BoundaryContamination(_))
        ));
    }

    #[test]
    fn classical_comparison_at_time_zero_like_start() {
        let g = GridSpec::new(1, 6.0, 32, 3).unwrap();
        let sys = assemble(&VectorField::zero(1), &g, 1.0).unwrap();
        let f0 = ScalarField::gaussian(vec![0.0], 0.7).unwrap();
        let c = compare_classical(&sys, &f0, TimeGrid::new(0.05, 16).unwrap(), &PicardOptions::default()).unwrap();
        assert!(c.converged);
        assert!(c.error < 5e-2, "{c:?}");
    }

    #[test]
    fn metrics_csv_has_fixed_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![
            MetricRow {
                iteration: Some(1),
                node_time: None,
                metric: "residual".into(),
                value: 0.5,
            },
            MetricRow {
                iteration: Some(2),
                node_time: Some(0.25),
                metric: "defect".into(),
                value: 1e-12,
            },
        ];
        write_metrics_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iteration,node_time,metric,value"));
        assert_eq!(lines.next(), Some("1,,residual,0.5"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn hermitian(vals: &[f64], m: usize, psd: bool) -> CMat {
            let a = CMat::from_fn(m, m, |i, j| c64::new(vals[2 * (i * m + j)], vals[2 * (i * m + j) + 1]));
            let x = if psd { linalg::mul(a.as_ref(), a.adjoint()) } else { &a + a.adjoint() };
            linalg::hermitian_part(&x)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]
            #[test]
            fn converged_runs_contract_and_preserve_positivity(vals in proptest::collection::vec(-1.0f64..1.0, 2 * 12 * 12), psd in any::<bool>()) {
                let sys = assemble(&fields::linear(), &GridSpec::new(1, 3.0, 12, 2).unwrap(), 1.0).unwrap();
                let x = hermitian(&vals, 12, psd);
                let xn = linalg::spectral_norm(&x).unwrap();
                let run = picard_run(&sys, &Observable::new(x, true).unwrap(), TimeGrid::new(0.1, 10).unwrap(), &PicardOptions::default()).unwrap();
                prop_assert!(run.converged);
                prop_assert!(*run.residuals.last().unwrap() <= 1e-9);
                for node in &run.nodes {
                    prop_assert!(linalg::spectral_norm(node).unwrap() <= xn * (1.0 + 1e-8));
                    if psd {
                        prop_assert!(linalg::min_eigenvalue(node).unwrap() >= -1e-8 * xn);
                    }
                }
                if psd {
                    prop_assert!(run.monotonicity.iter().all(|&v| v >= -1e-10));
                }
                for r in run.residuals.windows(2).skip(1) {
                    prop_assert!(r[1] <= 1.1 * r[0]);
                }
            }
        }
    }
}
