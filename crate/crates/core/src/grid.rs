//! Uniform box discretization of `L²(ℝᵈ)`, `d ∈ {1, 2}`, with Dirichlet
//! truncation.
//!
//! Grid points are `x_i = −R + i·h`, `h = 2R/(N−1)`. In two dimensions the
//! linear index of point `(i₀, i₁)` is `i₀ + N·i₁`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};

/// Largest points-per-axis for dense observables, by dimension.
pub const DENSE_CAP_1D: usize = 256;
pub const DENSE_CAP_2D: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    pub bulk_width: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points: usize, bulk_width: usize) -> Result<Self> {
        let g = GridSpec {
            dim,
            half_width,
            points,
            bulk_width,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!("dimension {} not in {{1, 2}}", self.dim)));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width {} must be positive", self.half_width)));
        }
        if self.points < 8 {
            return Err(Error::InvalidGrid(format!("need at least 8 points per axis, got {}", self.points)));
        }
        if self.bulk_width < 1 || 2 * self.bulk_width >= self.points {
            return Err(Error::InvalidGrid(format!(
                "bulk width {} incompatible with {} points",
                self.bulk_width, self.points
            )));
        }
        Ok(())
    }

    /// Rejects grids whose dense `M×M` observables exceed the default caps.
    pub fn check_dense_cap(&self) -> Result<()> {
        let cap = if self.dim == 1 { DENSE_CAP_1D } else { DENSE_CAP_2D };
        if self.points > cap {
            return Err(Error::DimensionCap(format!(
                "{} points per axis exceeds the d={} cap of {}",
                self.points, self.dim, cap
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points as f64 - 1.0)
    }

    /// Total number of grid points `M = N^d`.
    pub fn size(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.axis_coordinate(i)).collect()
    }

    /// Per-axis indices of linear index `p`.
    pub fn multi_index(&self, p: usize) -> [usize; 2] {
        match self.dim {
            1 => [p, 0],
            _ => [p % self.points, p / self.points],
        }
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.points
        }
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        let idx = self.multi_index(p);
        (0..self.dim).map(|a| self.axis_coordinate(idx[a])).collect()
    }

    pub fn points_iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.size()).map(move |p| self.point(p))
    }

    /// Distance (in layers) from `p` to the nearest box face.
    pub fn layer(&self, p: usize) -> usize {
        let idx = self.multi_index(p);
        (0..self.dim)
            .map(|a| idx[a].min(self.points - 1 - idx[a]))
            .min()
            .unwrap_or(0)
    }

    /// Whether `p` lies outside all boundary layers of width `width`.
    pub fn is_bulk_with(&self, p: usize, width: usize) -> bool {
        self.layer(p) >= width
    }

    pub fn is_bulk(&self, p: usize) -> bool {
        self.is_bulk_with(p, self.bulk_width)
    }

    pub fn bulk_indices_with(&self, width: usize) -> Vec<usize> {
        (0..self.size()).filter(|&p| self.is_bulk_with(p, width)).collect()
    }

    pub fn bulk_indices(&self) -> Vec<usize> {
        self.bulk_indices_with(self.bulk_width)
    }

    /// Samples a scalar function on every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.points_iter().map(|x| f(&x)).collect()
    }

    /// Same box with `points` per axis.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        GridSpec::new(self.dim, self.half_width, points, self.bulk_width)
    }

    /// Same box refined so that `h` halves.
    pub fn refined(&self) -> Result<Self> {
        self.with_points(2 * self.points - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Hermitian,
    AntiHermitian,
    Diagonal,
    General,
}

/// A complex `M×M` operator on a grid with a checked structural tag.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: CMat,
    pub structure: Structure,
    pub grid: GridSpec,
}

impl DiscreteOperator {
    pub fn new(matrix: CMat, structure: Structure, grid: GridSpec) -> Result<Self> {
        let m = grid.size();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, grid has {} points",
                matrix.nrows(),
                matrix.ncols(),
                m
            )));
        }
        let scale = linalg::max_abs(matrix.as_ref());
        match structure {
            Structure::Hermitian => {
                let defect = linalg::hermitian_defect(matrix.as_ref());
                if defect > 1e-14 * scale {
                    return Err(Error::InvalidArgument(format!("hermitian tag but ‖A − A†‖ = {defect:e}")));
                }
            }
            Structure::AntiHermitian => {
                let mut defect = 0.0_f64;
                for j in 0..m {
                    for i in 0..=j {
                        defect = defect.max((matrix[(i, j)] + matrix[(j, i)].conj()).norm());
                    }
                }
                if defect > 1e-14 * scale {
                    return Err(Error::InvalidArgument(format!("anti-hermitian tag but ‖A + A†‖ = {defect:e}")));
                }
            }
            Structure::Diagonal => {
                for j in 0..m {
                    for i in 0..m {
                        if i != j && matrix[(i, j)] != linalg::ZERO {
                            return Err(Error::InvalidArgument(format!("diagonal tag but entry ({i}, {j}) nonzero")));
                        }
                    }
                }
            }
            Structure::General => {}
        }
        Ok(DiscreteOperator {
            matrix,
            structure,
            grid,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Centered second-order difference `∂_axis` (0-based axis) with zero values
/// outside the box. Exactly antisymmetric.
pub fn derivative_operator(g: &GridSpec, axis: usize) -> Result<DiscreteOperator> {
    if axis >= g.dim {
        return Err(Error::AxisOutOfRange { axis, dim: g.dim });
    }
    let m = g.size();
    let c = 0.5 / g.spacing();
    let stride = g.stride(axis);
    let mut d = linalg::zeros(m);
    for p in 0..m {
        let i = g.multi_index(p)[axis];
        if i + 1 < g.points {
            d[(p, p + stride)] = c64::new(c, 0.0);
        }
        if i > 0 {
            d[(p, p - stride)] = c64::new(-c, 0.0);
        }
    }
    DiscreteOperator::new(d, Structure::AntiHermitian, *g)
}

/// Compact 3-point-per-axis Laplacian with Dirichlet truncation.
pub fn laplacian(g: &GridSpec) -> DiscreteOperator {
    let m = g.size();
    let c = 1.0 / (g.spacing() * g.spacing());
    let mut a = linalg::zeros(m);
    for p in 0..m {
        let idx = g.multi_index(p);
        for axis in 0..g.dim {
            let stride = g.stride(axis);
            a[(p, p)] -= c64::new(2.0 * c, 0.0);
            if idx[axis] + 1 < g.points {
                a[(p, p + stride)] = c64::new(c, 0.0);
            }
            if idx[axis] > 0 {
                a[(p, p - stride)] = c64::new(c, 0.0);
            }
        }
    }
    DiscreteOperator::new(a, Structure::Hermitian, *g).expect("stencil is symmetric by construction")
}

/// `diag(f(x_p))`.
pub fn multiplication_operator(g: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<DiscreteOperator> {
    let values = g.sample(f);
    multiplication_from_values(g, &values)
}

pub fn multiplication_from_values(g: &GridSpec, values: &[f64]) -> Result<DiscreteOperator> {
    if values.len() != g.size() {
        return Err(Error::DimensionMismatch(format!("{} samples for {} points", values.len(), g.size())));
    }
    if let Some((p, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("grid point {:?}", g.point(p)),
            value: v,
        });
    }
    DiscreteOperator::new(linalg::diag(values), Structure::Diagonal, *g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, mul, quadratic_form};
    use proptest::prelude::*;

    fn grid1(n: usize, r: f64) -> GridSpec {
        GridSpec::new(1, r, n, 1).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(3, 1.0, 16, 1).is_err());
        assert!(GridSpec::new(1, 1.0, 7, 1).is_err());
        assert!(GridSpec::new(1, 1.0, 16, 0).is_err());
        assert!(GridSpec::new(1, 1.0, 16, 8).is_err());
        assert!(GridSpec::new(1, -1.0, 16, 1).is_err());
        assert!(GridSpec::new(1, 1.0, 300, 1).unwrap().check_dense_cap().is_err());
        assert!(GridSpec::new(2, 1.0, 25, 1).unwrap().check_dense_cap().is_err());
    }

    #[test]
    fn coordinates_span_box() {
        let g = grid1(9, 4.0);
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.axis_coordinates(), vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let g2 = GridSpec::new(2, 1.0, 8, 2).unwrap();
        assert_eq!(g2.size(), 64);
        assert_eq!(g2.multi_index(11), [3, 1]);
        assert_eq!(g2.bulk_indices().len(), 16);
    }

    #[test]
    fn derivative_axis_out_of_range() {
        let g = grid1(16, 1.0);
        assert!(matches!(derivative_operator(&g, 1), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn derivative_exact_on_quadratics_and_antisymmetric() {
        let g = grid1(17, 2.0);
        let d = derivative_operator(&g, 0).unwrap().matrix;
        let xs = g.axis_coordinates();
        let f: Vec<c64> = xs.iter().map(|x| c64::new(x * x, 0.0)).collect();
        let df = linalg::apply(&d, &f);
        for i in 1..16 {
            assert!((df[i].re - 2.0 * xs[i]).abs() < 1e-13);
        }
        for i in 0..17 {
            for j in 0..17 {
                assert_eq!(d[(i, j)] + d[(j, i)], linalg::ZERO);
            }
        }
    }

    #[test]
    fn derivative_taylor_bound_on_sine() {
        let g = grid1(65, 3.0);
        let h = g.spacing();
        let d = derivative_operator(&g, 0).unwrap().matrix;
        let xs = g.axis_coordinates();
        let f: Vec<c64> = xs.iter().map(|x| c64::new(x.sin(), 0.0)).collect();
        let df = linalg::apply(&d, &f);
        for i in 1..64 {
            let err = (df[i].re - xs[i].cos()).abs();
            assert!(err <= h * h / 6.0 + 1e-15, "point {i}: {err}");
        }
    }

    #[test]
    fn laplacian_annihilates_constants_in_bulk() {
        let g = GridSpec::new(2, 1.0, 10, 1).unwrap();
        let lap = laplacian(&g).matrix;
        let ones = vec![linalg::ONE; g.size()];
        let out = linalg::apply(&lap, &ones);
        for p in g.bulk_indices() {
            assert!(out[p].norm() < 1e-12);
        }
    }

    #[test]
    fn laplacian_spectrum_matches_dirichlet_closed_form() {
        // eigenvalues of the N-point Dirichlet stencil: −(4/h²) sin²(kπ/(2(N+1)))
        let g = grid1(40, 5.0);
        let h = g.spacing();
        let lap = laplacian(&g).matrix;
        let ev = linalg::hermitian_eigenvalues(&lap).unwrap();
        let n = g.points as f64;
        let smallest = -(4.0 / (h * h)) * (std::f64::consts::PI / (2.0 * (n + 1.0))).sin().powi(2);
        let largest = -(4.0 / (h * h)) * (40.0 * std::f64::consts::PI / (2.0 * (n + 1.0))).sin().powi(2);
        assert!((ev[ev.len() - 1] - smallest).abs() < 1e-11);
        assert!((ev[0] - largest).abs() < 1e-9);
        assert!(ev.iter().all(|&e| e <= 0.0));
    }

    #[test]
    fn multiplication_operators() {
        let g = grid1(9, 4.0);
        let zero = multiplication_operator(&g, |_| 0.0).unwrap();
        assert_eq!(max_abs(zero.matrix.as_ref()), 0.0);
        let one = multiplication_operator(&g, |_| 1.0).unwrap();
        assert_eq!(max_abs((&one.matrix - &linalg::identity(9)).as_ref()), 0.0);
        let x = multiplication_operator(&g, |p| p[0]).unwrap();
        let expected = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(x.matrix[(i, i)].re, *e);
        }
        assert!(matches!(
            multiplication_operator(&g, |p| if p[0] > 3.5 { f64::NAN } else { 1.0 }),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn axis_derivatives_commute_on_bulk_vectors() {
        let g = GridSpec::new(2, 2.0, 12, 2).unwrap();
        let d0 = derivative_operator(&g, 0).unwrap().matrix;
        let d1 = derivative_operator(&g, 1).unwrap().matrix;
        let comm = &mul(d0.as_ref(), d1.as_ref()) - &mul(d1.as_ref(), d0.as_ref());
        let u: Vec<c64> = (0..g.size())
            .map(|p| if g.is_bulk_with(p, 2) { c64::new((p as f64 * 0.37).sin(), (p as f64).cos()) } else { linalg::ZERO })
            .collect();
        let r = linalg::apply(&comm, &u);
        assert_eq!(linalg::norm2(&r), 0.0);
    }

    #[test]
    fn consistency_order_on_bulk_rows() {
        // compactly supported C⁵ bump, refined twice
        let bump = |x: f64| {
            let s = x / 2.0;
            if s.abs() < 1.0 { (1.0 - s * s).powi(6) } else { 0.0 }
        };
        let dbump = |x: f64| {
            let s = x / 2.0;
            if s.abs() < 1.0 { -6.0 * s * (1.0 - s * s).powi(5) } else { 0.0 }
        };
        let d2bump = |x: f64| {
            let s = x / 2.0;
            if s.abs() < 1.0 {
                0.5 * (-6.0 * (1.0 - s * s).powi(5) + 60.0 * s * s * (1.0 - s * s).powi(4))
            } else {
                0.0
            }
        };
        let mut errs = Vec::new();
        for n in [41, 81, 161] {
            let g = grid1(n, 3.0);
            let xs = g.axis_coordinates();
            let f: Vec<c64> = xs.iter().map(|&x| c64::new(bump(x), 0.0)).collect();
            let df = linalg::apply(&derivative_operator(&g, 0).unwrap().matrix, &f);
            let lf = linalg::apply(&laplacian(&g).matrix, &f);
            let bulk: Vec<usize> = (0..n).filter(|&p| g.is_bulk(p)).collect();
            let e1 = bulk.iter().map(|&p| (df[p].re - dbump(xs[p])).abs()).fold(0.0, f64::max);
            let e2 = bulk.iter().map(|&p| (lf[p].re - d2bump(xs[p])).abs()).fold(0.0, f64::max);
            errs.push((e1, e2));
        }
        for w in errs.windows(2) {
            let o1 = (w[0].0 / w[1].0).log2();
            let o2 = (w[0].1 / w[1].1).log2();
            assert!(o1 >= 1.8 && o2 >= 1.8, "observed orders {o1} {o2} ({errs:?})");
        }
    }

    proptest! {
        #[test]
        fn laplacian_is_negative_semidefinite(seed in proptest::collection::vec(-1.0f64..1.0, 24)) {
            let g = GridSpec::new(1, 2.0, 12, 1).unwrap();
            let lap = laplacian(&g).matrix;
            let u: Vec<c64> = seed.chunks(2).map(|c| c64::new(c[0], c[1])).collect();
            let q = quadratic_form(&lap, &u);
            prop_assert!(q.re <= 1e-12);
            prop_assert!(q.im.abs() <= 1e-12);
        }
    }
}
