//! Lindblad operators of a drift field on a grid.
//!
//! With `D_l` the centered difference along axis `l` and `W_l` the sampled
//! field,
//!
//! ```text
//! L_l = −(W_l + D_l)
//! H   = (i/2) Σ (W_l D_l + D_l W_l)
//! Φ   = Σ L_l† L_l,   G₀ = −Φ/2,   G = −iH + G₀,   C = Φ + σ
//! ```
//!
//! `H` is exactly Hermitian and `G + G† + Φ = 0` holds to round-off, so any
//! loss of conservativity downstream comes from time stepping alone.

use std::path::{Path, PathBuf};

use faer::Accum;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{derivative_operator, GridSpec};
use crate::linalg::{self, c64, mul, mul_into, real, CMat, ONE, ZERO};
use crate::mtx;

pub const DEFAULT_SHIFT: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct LindbladSystem {
    grid: GridSpec,
    field: VectorField,
    shift: f64,
    w: Vec<Vec<f64>>,
    d: Vec<CMat>,
    l: Vec<CMat>,
    h: CMat,
    g0: CMat,
    g: CMat,
    phi: CMat,
    c: CMat,
}

pub fn assemble(field: &VectorField, g: &GridSpec, shift: f64) -> Result<LindbladSystem> {
    g.validate()?;
    if field.dim() != g.dim {
        return Err(Error::DimensionMismatch(format!("field d={} vs grid d={}", field.dim(), g.dim)));
    }
    if !(shift >= 0.0 && shift.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift must be finite and ≥ 0, got {shift}")));
    }
    let m = g.size();
    let mut w = Vec::with_capacity(g.dim);
    for l in 0..g.dim {
        let values = g.sample(|x| field.value(x, l));
        if let Some((p, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("W_{} at {:?}", l + 1, g.point(p)),
                value: v,
            });
        }
        w.push(values);
    }
    let d: Vec<CMat> = (0..g.dim)
        .map(|l| derivative_operator(g, l).map(|op| op.matrix))
        .collect::<Result<_>>()?;

    let l_ops: Vec<CMat> = (0..g.dim)
        .map(|l| CMat::from_fn(m, m, |i, j| {
            let wd = if i == j { real(w[l][i]) } else { ZERO };
            -(wd + d[l][(i, j)])
        }))
        .collect();

    // entrywise so that H_ji = conj(H_ij) exactly
    let mut h = linalg::zeros(m);
    for l in 0..g.dim {
        for j in 0..m {
            for i in 0..m {
                let dij = d[l][(i, j)].re;
                if dij != 0.0 {
                    h[(i, j)] += c64::new(0.0, 0.5 * (w[l][i] * dij + dij * w[l][j]));
                }
            }
        }
    }

    let mut phi = linalg::zeros(m);
    for op in &l_ops {
        faer::linalg::matmul::matmul(phi.as_mut(), Accum::Add, op.adjoint(), op.as_ref(), ONE, faer::Par::Seq);
    }
    linalg::symmetrize_in_place(&mut phi);
    // snap the diagonal so that (Φ + σ) − Φ = σ exactly
    for i in 0..m {
        let v = phi[(i, i)].re;
        phi[(i, i)] = real((v + shift) - shift);
    }
    let g0 = CMat::from_fn(m, m, |i, j| phi[(i, j)] * -0.5);
    let gen = CMat::from_fn(m, m, |i, j| c64::new(0.0, -1.0) * h[(i, j)] + g0[(i, j)]);
    let mut c = phi.clone();
    for i in 0..m {
        c[(i, i)] = real(phi[(i, i)].re + shift);
    }

    Ok(LindbladSystem {
        grid: *g,
        field: field.clone(),
        shift,
        w,
        d,
        l: l_ops,
        h,
        g0,
        g: gen,
        phi,
        c,
    })
}

impl LindbladSystem {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Matrix size `M = N^d`.
    pub fn size(&self) -> usize {
        self.grid.size()
    }

    pub fn field_values(&self, l: usize) -> &[f64] {
        &self.w[l]
    }

    pub fn derivative(&self, l: usize) -> &CMat {
        &self.d[l]
    }

    pub fn lindblad_ops(&self) -> &[CMat] {
        &self.l
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.h
    }

    pub fn g0(&self) -> &CMat {
        &self.g0
    }

    pub fn g(&self) -> &CMat {
        &self.g
    }

    pub fn phi(&self) -> &CMat {
        &self.phi
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    /// `‖G + G† + Φ‖_max`.
    pub fn form_identity_defect(&self) -> f64 {
        let m = self.size();
        let mut worst = 0.0_f64;
        for j in 0..m {
            for i in 0..m {
                let v = self.g[(i, j)] + self.g[(j, i)].conj() + self.phi[(i, j)];
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    fn check_square(&self, x: &CMat) -> Result<()> {
        let m = self.size();
        if x.nrows() != m || x.ncols() != m {
            return Err(Error::DimensionMismatch(format!("observable is {}x{}, system has M = {m}", x.nrows(), x.ncols())));
        }
        Ok(())
    }

    /// `ℒ(X) = G†X + XG + Σ L_l† X L_l`.
    pub fn generator_apply(&self, x: &CMat) -> Result<CMat> {
        self.check_square(x)?;
        let m = self.size();
        let mut out = CMat::zeros(m, m);
        let mut scratch = CMat::zeros(m, m);
        self.generator_apply_into(x, &mut out, &mut scratch);
        Ok(out)
    }

    /// Allocation-free form of [`generator_apply`](Self::generator_apply).
    pub(crate) fn generator_apply_into(&self, x: &CMat, out: &mut CMat, scratch: &mut CMat) {
        use faer::linalg::matmul::matmul;
        matmul(out.as_mut(), Accum::Replace, self.g.adjoint(), x.as_ref(), ONE, faer::Par::Seq);
        mul_into(out.as_mut(), Accum::Add, x.as_ref(), self.g.as_ref(), ONE);
        for l in &self.l {
            mul_into(scratch.as_mut(), Accum::Replace, x.as_ref(), l.as_ref(), ONE);
            matmul(out.as_mut(), Accum::Add, l.adjoint(), scratch.as_ref(), ONE, faer::Par::Seq);
        }
    }

    /// Adjoint superoperator `ℒ†(Y) = GY + YG† + Σ L_l Y L_l†` with respect
    /// to the Hilbert–Schmidt inner product.
    pub fn generator_adjoint_apply(&self, y: &CMat) -> Result<CMat> {
        use faer::linalg::matmul::matmul;
        self.check_square(y)?;
        let m = self.size();
        let mut out = mul(self.g.as_ref(), y.as_ref());
        matmul(out.as_mut(), Accum::Add, y.as_ref(), self.g.adjoint(), ONE, faer::Par::Seq);
        let mut scratch = CMat::zeros(m, m);
        for l in &self.l {
            matmul(scratch.as_mut(), Accum::Replace, y.as_ref(), l.adjoint(), ONE, faer::Par::Seq);
            mul_into(out.as_mut(), Accum::Add, l.as_ref(), scratch.as_ref(), ONE);
        }
        Ok(out)
    }

    /// Writes `L1.mtx` (… `Ld.mtx`), `H.mtx`, `G0.mtx`, `G.mtx`, `C.mtx` and
    /// `Phi.mtx` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut meta = mtx::grid_metadata(&self.grid);
        meta.push(("field".into(), self.field.label().to_string()));
        meta.push(("shift".into(), format!("{:?}", self.shift)));
        let mut named: Vec<(String, &CMat)> = self.l.iter().enumerate().map(|(i, l)| (format!("L{}", i + 1), l)).collect();
        named.push(("H".into(), &self.h));
        named.push(("G0".into(), &self.g0));
        named.push(("G".into(), &self.g));
        named.push(("C".into(), &self.c));
        named.push(("Phi".into(), &self.phi));
        let mut paths = Vec::new();
        for (name, m) in named {
            let path = dir.join(format!("{name}.mtx"));
            let mut entry_meta = meta.clone();
            entry_meta.insert(0, ("operator".into(), name));
            mtx::write_file(&path, m, &entry_meta)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalResidual {
    /// Worst `‖ℒ(diag f)u − diag(½Δf − 2W·∇f)u‖ / (‖u‖·scale)` over the test vectors.
    pub residual: f64,
    /// `f` is not negligible inside the boundary layers.
    pub boundary_contaminated: bool,
}

/// Compares `ℒ(diag f)` with the classical drift-diffusion operator on
/// bulk-supported Gaussian wave packets.
pub fn classical_generator_residual(sys: &LindbladSystem, f: &ScalarField) -> Result<ClassicalResidual> {
    let g = sys.grid();
    if f.dim() != g.dim {
        return Err(Error::DimensionMismatch(format!("scalar field d={} vs grid d={}", f.dim(), g.dim)));
    }
    let fv = f.sample(g);
    let fmax = fv.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let edge = (0..g.size())
        .filter(|&p| !g.is_bulk(p))
        .fold(0.0_f64, |a, p| a.max(fv[p].abs()));
    let boundary_contaminated = edge > 1e-8 * fmax.max(f64::MIN_POSITIVE);

    let lx = sys.generator_apply(&linalg::diag(&fv))?;
    let target: Vec<f64> = g
        .points_iter()
        .enumerate()
        .map(|(p, x)| {
            let drift: f64 = (0..g.dim).map(|l| sys.field_values(l)[p] * f.gradient(&x, l)).sum();
            0.5 * f.laplacian(&x) - 2.0 * drift
        })
        .collect();
    let bulk = g.bulk_indices();
    let target_max = bulk.iter().map(|&p| target[p].abs()).fold(0.0_f64, f64::max);
    let scale = if target_max > 0.0 { target_max } else { fmax.max(1.0) };

    let mut worst = 0.0_f64;
    for u in wave_packets(g) {
        let lu = linalg::apply(&lx, &u);
        let r: Vec<c64> = lu.iter().zip(&u).zip(&target).map(|((a, b), t)| a - b * t).collect();
        let denom = linalg::norm2(&u) * scale;
        worst = worst.max(linalg::norm2(&r) / denom);
    }
    Ok(ClassicalResidual {
        residual: worst,
        boundary_contaminated,
    })
}

/// Gaussian packets `exp(−|x − c|²/(2s²) + i k·x)` with `s = R/8`, centered
/// on a small lattice inside the half box and zeroed off the bulk.
pub fn wave_packets(g: &GridSpec) -> Vec<Vec<c64>> {
    let r = g.half_width;
    let s = r / 8.0;
    let offsets = [-0.25 * r, 0.0, 0.25 * r];
    let momenta = [0.0, 1.0];
    let mut centers: Vec<Vec<f64>> = Vec::new();
    if g.dim == 1 {
        centers.extend(offsets.iter().map(|&a| vec![a]));
    } else {
        for &a in &offsets {
            for &b in &offsets {
                centers.push(vec![a, b]);
            }
        }
    }
    let mut out = Vec::new();
    for c in &centers {
        for &k in &momenta {
            let u = g
                .points_iter()
                .enumerate()
                .map(|(p, x)| {
                    if !g.is_bulk(p) {
                        return ZERO;
                    }
                    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    let phase: f64 = k * x.iter().sum::<f64>();
                    c64::from_polar((-r2 / (2.0 * s * s)).exp(), phase)
                })
                .collect();
            out.push(u);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{fields, grad_potential, PolynomialPotential, PotentialTerm};
    use crate::linalg::{max_abs, min_eigenvalue};
    use proptest::prelude::*;

    fn quartic_2d() -> VectorField {
        let terms = [
            PotentialTerm { exponents: vec![4, 0], coeff: 1.0 },
            PotentialTerm { exponents: vec![0, 4], coeff: 1.0 },
            PotentialTerm { exponents: vec![1, 1], coeff: 1.0 },
        ];
        grad_potential(&PolynomialPotential::new(2, &terms).unwrap()).unwrap()
    }

    #[test]
    fn flat_field_reduces_to_wide_laplacian() {
        let g = GridSpec::new(1, 4.0, 24, 2).unwrap();
        let sys = assemble(&VectorField::zero(1), &g, 1.0).unwrap();
        let d = sys.derivative(0);
        let d2 = mul(d.as_ref(), d.as_ref());
        assert_eq!(max_abs((&sys.lindblad_ops()[0] + d).as_ref()), 0.0);
        assert_eq!(max_abs(sys.hamiltonian().as_ref()), 0.0);
        let scale = max_abs(d2.as_ref());
        assert!(max_abs((sys.g() - &d2 * faer::Scale(real(0.5))).as_ref()) <= 1e-14 * scale);
        assert!(max_abs((sys.phi() + &d2).as_ref()) <= 1e-14 * scale);
    }

    #[test]
    fn structural_identities_hold() {
        for (field, g) in [
            (fields::linear(), GridSpec::new(1, 6.0, 64, 3).unwrap()),
            (fields::cubic(1.0), GridSpec::new(1, 3.0, 48, 3).unwrap()),
            (quartic_2d(), GridSpec::new(2, 2.0, 10, 2).unwrap()),
            (fields::rotation(), GridSpec::new(2, 3.0, 10, 2).unwrap()),
        ] {
            let sys = assemble(&field, &g, 1.0).unwrap();
            let phi_max = max_abs(sys.phi().as_ref());
            assert!(sys.form_identity_defect() <= 1e-12 * (1.0 + phi_max));
            assert_eq!(linalg::hermitian_defect(sys.hamiltonian().as_ref()), 0.0);
            assert_eq!(linalg::hermitian_defect(sys.phi().as_ref()), 0.0);
            let phi_norm = linalg::spectral_norm(sys.phi()).unwrap();
            assert!(min_eigenvalue(sys.phi()).unwrap() >= -1e-10 * phi_norm);
            assert!(linalg::max_eigenvalue(sys.g0()).unwrap() <= 1e-10 * phi_norm);
            let diff = sys.c() - sys.phi();
            assert_eq!(max_abs((&diff - linalg::identity(g.size())).as_ref()), 0.0);
            assert_eq!(max_abs((sys.phi() + sys.g0() * faer::Scale(real(2.0))).as_ref()), 0.0);
            let li = sys.generator_apply(&linalg::identity(g.size())).unwrap();
            assert!(max_abs(li.as_ref()) <= 1e-12 * (1.0 + phi_max));
        }
    }

    #[test]
    fn dissipation_identity_on_vectors() {
        let g = GridSpec::new(1, 5.0, 40, 3).unwrap();
        let sys = assemble(&fields::cubic(1.0), &g, 1.0).unwrap();
        let u: Vec<c64> = (0..40).map(|i| c64::new((i as f64 * 0.3).sin(), (i as f64 * 0.11).cos())).collect();
        let lhs = -2.0 * linalg::quadratic_form(sys.g(), &u).re;
        let rhs: f64 = sys.lindblad_ops().iter().map(|l| linalg::norm2(&linalg::apply(l, &u)).powi(2)).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let g = GridSpec::new(1, 4.0, 16, 2).unwrap();
        assert!(assemble(&quartic_2d(), &g, 1.0).is_err());
        assert!(assemble(&fields::linear(), &g, -1.0).is_err());
        let sys = assemble(&fields::linear(), &g, 1.0).unwrap();
        assert!(sys.generator_apply(&linalg::identity(3)).is_err());
    }

    #[test]
    fn multiplication_operator_matches_stencil_oracle() {
        // W = 0: ℒ(F) = ½[D,[D,F]]; entries from direct stencil arithmetic
        let n = 20;
        let g = GridSpec::new(1, 3.0, n, 2).unwrap();
        let h = g.spacing();
        let sys = assemble(&VectorField::zero(1), &g, 1.0).unwrap();
        let f: Vec<f64> = g.axis_coordinates().iter().map(|x| (0.7 * x).sin() + 0.2 * x * x).collect();
        let lx = sys.generator_apply(&linalg::diag(&f)).unwrap();
        let dd = |i: usize, j: usize| -> f64 {
            if j == i + 1 {
                0.5 / h
            } else if i == j + 1 {
                -0.5 / h
            } else {
                0.0
            }
        };
        let mut oracle = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in [i.wrapping_sub(1), i + 1] {
                    if k < n {
                        acc += dd(i, k) * dd(k, j) * (f[j] - 2.0 * f[k] + f[i]);
                    }
                }
                oracle[i][j] = 0.5 * acc;
            }
        }
        let scale = 1.0 / (h * h);
        for i in 0..n {
            for j in 0..n {
                assert!((lx[(i, j)] - real(oracle[i][j])).norm() <= 1e-13 * scale, "({i},{j})");
            }
        }
        // bulk diagonal is a quarter of the compact Laplacian at spacing 2h
        for i in 2..n - 2 {
            let wide = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (4.0 * h * h);
            assert!((lx[(i, i)].re - wide).abs() <= 1e-12 * scale);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn generator_preserves_hermiticity(vals in proptest::collection::vec(-1.0f64..1.0, 2 * 16 * 16)) {
            let g = GridSpec::new(1, 3.0, 16, 2).unwrap();
            let sys = assemble(&fields::cubic(1.0), &g, 1.0).unwrap();
            let a = CMat::from_fn(16, 16, |i, j| c64::new(vals[2 * (i * 16 + j)], vals[2 * (i * 16 + j) + 1]));
            let x = linalg::hermitian_part(&a);
            let lx = sys.generator_apply(&x).unwrap();
            prop_assert!(linalg::hermitian_defect(lx.as_ref()) <= 1e-12 * max_abs(lx.as_ref()));
        }

        #[test]
        fn adjoint_superoperator_is_hilbert_schmidt_adjoint(vals in proptest::collection::vec(-1.0f64..1.0, 4 * 12 * 12)) {
            let g = GridSpec::new(1, 3.0, 12, 2).unwrap();
            let sys = assemble(&fields::linear(), &g, 1.0).unwrap();
            let x = CMat::from_fn(12, 12, |i, j| c64::new(vals[2 * (i * 12 + j)], vals[2 * (i * 12 + j) + 1]));
            let y = CMat::from_fn(12, 12, |i, j| c64::new(vals[288 + 2 * (i * 12 + j)], vals[289 + 2 * (i * 12 + j)]));
            let lhs = hs_inner(&y, &sys.generator_apply(&x).unwrap());
            let rhs = hs_inner(&sys.generator_adjoint_apply(&y).unwrap(), &x);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
        }
    }

    fn hs_inner(a: &CMat, b: &CMat) -> c64 {
        let mut acc = ZERO;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                acc += a[(i, j)].conj() * b[(i, j)];
            }
        }
        acc
    }

    #[test]
    fn gaussian_is_near_kernel_of_l() {
        let g = GridSpec::new(1, 6.0, 64, 3).unwrap();
        let h = g.spacing();
        let sys = assemble(&fields::linear(), &g, 1.0).unwrap();
        let gh: Vec<c64> = g.axis_coordinates().iter().map(|x| real((-x * x / 2.0).exp())).collect();
        let lg = linalg::apply(&sys.lindblad_ops()[0], &gh);
        let ratio = linalg::norm2(&lg) / linalg::norm2(&gh);
        assert!(ratio <= 5.0 * h * h, "{ratio} vs {}", 5.0 * h * h);

        let bulk = g.bulk_indices();
        let phi_b = linalg::restrict(sys.phi(), &bulk);
        let eig = phi_b.self_adjoint_eigen(faer::Side::Lower).unwrap();
        let v = eig.U().col(0);
        let gb: Vec<c64> = bulk.iter().map(|&p| gh[p]).collect();
        let norm = linalg::norm2(&gb);
        let overlap: c64 = (0..bulk.len()).map(|i| v[i].conj() * gb[i]).sum::<c64>() / norm;
        assert!(overlap.norm() >= 0.999, "overlap {}", overlap.norm());
        assert!(eig.S().column_vector()[0].re >= 0.0);
    }

    #[test]
    fn classical_residual_examples() {
        let g = GridSpec::new(1, 6.0, 48, 3).unwrap();
        let sys = assemble(&fields::linear(), &g, 1.0).unwrap();
        let r = classical_generator_residual(&sys, &ScalarField::constant(1, 2.5)).unwrap();
        assert!(r.residual <= 1e-12, "{}", r.residual);
        assert!(r.boundary_contaminated);

        let f = ScalarField::gaussian(vec![0.0], 0.5).unwrap();
        let mut res = Vec::new();
        let mut g = GridSpec::new(1, 6.0, 65, 3).unwrap();
        for _ in 0..3 {
            let sys = assemble(&VectorField::zero(1), &g, 1.0).unwrap();
            let r = classical_generator_residual(&sys, &f).unwrap();
            assert!(!r.boundary_contaminated);
            res.push(r.residual);
            g = g.refined().unwrap();
        }
        assert!(res[0] / res[1] >= 3.5 && res[1] / res[2] >= 3.5, "{res:?}");
    }

    #[test]
    fn classical_residual_second_order_with_drift() {
        let f = ScalarField::gaussian(vec![0.0], 1.0).unwrap();
        let g1 = GridSpec::new(1, 8.0, 65, 3).unwrap();
        let g2 = g1.refined().unwrap();
        let r1 = classical_generator_residual(&assemble(&fields::linear(), &g1, 1.0).unwrap(), &f).unwrap();
        let r2 = classical_generator_residual(&assemble(&fields::linear(), &g2, 1.0).unwrap(), &f).unwrap();
        let c = r1.residual / g1.spacing().powi(2);
        assert!(r2.residual <= 1.1 * c * g2.spacing().powi(2), "{} {}", r1.residual, r2.residual);
    }

    #[test]
    fn export_writes_named_operators() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(2, 2.0, 8, 2).unwrap();
        let sys = assemble(&quartic_2d(), &g, 1.0).unwrap();
        let paths = sys.export(dir.path()).unwrap();
        let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["L1.mtx", "L2.mtx", "H.mtx", "G0.mtx", "G.mtx", "C.mtx", "Phi.mtx"]);
        let back = mtx::read_file(&dir.path().join("G.mtx")).unwrap();
        assert_eq!(max_abs((&back.matrix - sys.g()).as_ref()), 0.0);
        assert_eq!(back.metadata["operator"], "G");
    }
}
