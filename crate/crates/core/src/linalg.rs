//! Dense complex matrix helpers on top of `faer`.
//!
//! Everything in the crate works with `Mat<c64>` (`CMat`). This module holds
//! the handful of kernels the rest of the code leans on: sandwiches `P† Z P`,
//! norms, Hermitian eigenvalues, the scaling-and-squaring exponential and the
//! Hermitian-definite pencil solver.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::prelude::*;
use faer::{Accum, Side};

use crate::error::{Error, Result};

pub use faer::c64;

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

#[inline]
pub fn real(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    let mut m = zeros(n);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = real(v);
    }
    m
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

/// `a * b` without parallelism.
pub fn mul<A, B>(a: MatRef<'_, A>, b: MatRef<'_, B>) -> CMat
where
    A: faer::traits::Conjugate<Canonical = c64>,
    B: faer::traits::Conjugate<Canonical = c64>,
{
    let mut out = CMat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, Par::Seq);
    out
}

/// `out (+)= alpha * a * b`.
pub fn mul_into(out: MatMut<'_, c64>, accum: Accum, a: MatRef<'_, c64>, b: MatRef<'_, c64>, alpha: c64) {
    matmul(out, accum, a, b, alpha, Par::Seq);
}

/// `p† z p`.
pub fn sandwich(p: &CMat, z: &CMat) -> CMat {
    let zp = mul(z.as_ref(), p.as_ref());
    let mut out = CMat::zeros(p.ncols(), p.ncols());
    matmul(out.as_mut(), Accum::Replace, p.adjoint(), zp.as_ref(), ONE, Par::Seq);
    out
}

/// Accumulates `weight * p† z p` into `out`, using `scratch` for `z p`.
pub fn sandwich_add(out: &mut CMat, p: &CMat, z: &CMat, weight: f64, scratch: &mut CMat) {
    mul_into(scratch.as_mut(), Accum::Replace, z.as_ref(), p.as_ref(), ONE);
    matmul(out.as_mut(), Accum::Add, p.adjoint(), scratch.as_ref(), real(weight), Par::Seq);
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)].norm();
            if v > m || v.is_nan() {
                m = v;
            }
        }
    }
    m
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

pub fn one_norm(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_finite(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// `‖a − a†‖_max`.
pub fn hermitian_defect(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn hermitian_part(a: &CMat) -> CMat {
    let n = a.nrows();
    CMat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Replaces `a` by `(a + a†)/2` and returns the largest entry that moved.
pub fn symmetrize_in_place(a: &mut CMat) -> f64 {
    let n = a.nrows();
    let mut moved = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            moved = moved.max((a[(i, j)] - avg).norm());
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    moved
}

/// Eigenvalues (ascending) of the Hermitian part of `a`.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    hermitian_part(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolve(format!("{e:?}")))
}

pub fn min_eigenvalue(a: &CMat) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.first().copied().unwrap_or(0.0))
}

pub fn max_eigenvalue(a: &CMat) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.last().copied().unwrap_or(0.0))
}

pub fn spectral_norm(a: &CMat) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::Eigensolve(format!("svd: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// Submatrix on the index set `keep` (rows and columns).
pub fn restrict(a: &CMat, keep: &[usize]) -> CMat {
    CMat::from_fn(keep.len(), keep.len(), |i, j| a[(keep[i], keep[j])])
}

/// `⟨u, a u⟩`.
pub fn quadratic_form(a: &CMat, u: &[c64]) -> c64 {
    let n = u.len();
    let mut acc = ZERO;
    for j in 0..n {
        if u[j] == ZERO {
            continue;
        }
        let mut col = ZERO;
        for i in 0..n {
            col += u[i].conj() * a[(i, j)];
        }
        acc += col * u[j];
    }
    acc
}

pub fn apply(a: &CMat, u: &[c64]) -> Vec<c64> {
    let n = a.nrows();
    let mut out = vec![ZERO; n];
    for (j, &uj) in u.iter().enumerate() {
        if uj == ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += a[(i, j)] * uj;
        }
    }
    out
}

pub fn norm2(u: &[c64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

// Padé coefficients b_0..b_m for degrees 3, 5, 7, 9, 13 and the matching
// 1-norm thresholds (Higham 2005).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn scaled_add(out: &mut CMat, a: &CMat, alpha: f64) {
    let n = out.nrows();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] += a[(i, j)] * alpha;
        }
    }
}

fn add_identity(out: &mut CMat, alpha: f64) {
    for i in 0..out.nrows() {
        out[(i, i)] += real(alpha);
    }
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("expm needs a square matrix".into()));
    }
    if !is_finite(a.as_ref()) {
        return Err(Error::NonFinite {
            context: "expm input".into(),
            value: f64::NAN,
        });
    }
    let norm = one_norm(a.as_ref());
    for &(m, theta) in &THETA {
        if norm <= theta {
            return pade_low(a, m);
        }
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Scale(real(0.5_f64.powi(s)));
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = mul(r.as_ref(), r.as_ref());
    }
    if !is_finite(r.as_ref()) {
        return Err(Error::NonFinite {
            context: "expm result".into(),
            value: f64::INFINITY,
        });
    }
    Ok(r)
}

fn pade_low(a: &CMat, m: usize) -> Result<CMat> {
    let n = a.nrows();
    let b: &[f64] = match m {
        3 => &PADE3,
        5 => &PADE5,
        7 => &PADE7,
        _ => &PADE9,
    };
    let a2 = mul(a.as_ref(), a.as_ref());
    let mut powers = vec![identity(n), a2.clone()];
    while powers.len() * 2 <= m {
        let next = mul(powers.last().unwrap().as_ref(), a2.as_ref());
        powers.push(next);
    }
    let mut u_inner = zeros(n);
    let mut v = zeros(n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k < m {
            scaled_add(&mut u_inner, p, b[2 * k + 1]);
        }
        scaled_add(&mut v, p, b[2 * k]);
    }
    let u = mul(a.as_ref(), u_inner.as_ref());
    solve_pade(&u, &v)
}

fn pade13(a: &CMat) -> Result<CMat> {
    let b = &PADE13;
    let a2 = mul(a.as_ref(), a.as_ref());
    let a4 = mul(a2.as_ref(), a2.as_ref());
    let a6 = mul(a4.as_ref(), a2.as_ref());
    let n = a.nrows();

    let mut inner = zeros(n);
    scaled_add(&mut inner, &a6, b[13]);
    scaled_add(&mut inner, &a4, b[11]);
    scaled_add(&mut inner, &a2, b[9]);
    let mut u_inner = mul(a6.as_ref(), inner.as_ref());
    scaled_add(&mut u_inner, &a6, b[7]);
    scaled_add(&mut u_inner, &a4, b[5]);
    scaled_add(&mut u_inner, &a2, b[3]);
    add_identity(&mut u_inner, b[1]);
    let u = mul(a.as_ref(), u_inner.as_ref());

    let mut inner = zeros(n);
    scaled_add(&mut inner, &a6, b[12]);
    scaled_add(&mut inner, &a4, b[10]);
    scaled_add(&mut inner, &a2, b[8]);
    let mut v = mul(a6.as_ref(), inner.as_ref());
    scaled_add(&mut v, &a6, b[6]);
    scaled_add(&mut v, &a4, b[4]);
    scaled_add(&mut v, &a2, b[2]);
    add_identity(&mut v, b[0]);
    solve_pade(&u, &v)
}

fn solve_pade(u: &CMat, v: &CMat) -> Result<CMat> {
    let q = v - u;
    let p = v + u;
    let lu = q.partial_piv_lu();
    let r = lu.solve(&p);
    if !is_finite(r.as_ref()) {
        return Err(Error::LinearSolve("Padé denominator is singular".into()));
    }
    Ok(r)
}

/// Extremal generalized eigenpair of a Hermitian-definite pencil `(a, b)`.
#[derive(Debug, Clone)]
pub struct PencilExtreme {
    pub value: f64,
    pub vector: Vec<c64>,
}

/// Largest `λ` with `a x = λ b x`, `a` Hermitian, `b` Hermitian positive
/// definite. Reduced to a standard problem through the Cholesky factor of `b`.
pub fn pencil_max(a: &CMat, b: &CMat) -> Result<PencilExtreme> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil ({}x{}, {}x{})",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty pencil".into()));
    }
    let b_h = hermitian_part(b);
    let llt = b_h
        .llt(Side::Lower)
        .map_err(|e| Error::SingularPencil(format!("right-hand form not positive definite ({e:?})")))?;
    let l = llt.L();

    // c = L⁻¹ a L⁻†
    let mut x = hermitian_part(a);
    solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut c = adjoint(&x);
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let c = hermitian_part(&c);

    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolve(format!("{e:?}")))?;
    let values = eig.S().column_vector();
    let top = n - 1;
    let value = values[top].re;
    let mut y = CMat::from_fn(n, 1, |i, _| eig.U()[(i, top)]);
    solve_upper_triangular_in_place(l.adjoint(), y.as_mut(), Par::Seq);
    let vector: Vec<c64> = (0..n).map(|i| y[(i, 0)]).collect();
    let scale = norm2(&vector);
    let vector = vector.into_iter().map(|z| z / scale).collect();
    Ok(PencilExtreme { value, vector })
}

/// Rayleigh quotient `⟨x, a x⟩ / ⟨x, b x⟩`.
pub fn rayleigh_quotient(a: &CMat, b: &CMat, x: &[c64]) -> f64 {
    quadratic_form(a, x).re / quadratic_form(b, x).re
}
