//! Drift vector fields `W = (W_1, …, W_d)` and numerical checks of the
//! growth conditions the construction relies on:
//!
//! * C-1: `W_l ∈ C²`,
//! * C-2: `|(W_l)_k| ≤ ε|W| + c(ε)` for every `ε ∈ (0, 1)`,
//! * C-3: `|(W_l)_{jk}| ≤ c₁|W| + c₂`,
//! * C-4: the Jacobian form `Σ ξ̄_k (W_l)_k ξ_l ≥ −c₄|ξ|²`.
//!
//! A box can never prove boundedness over `ℝᵈ`. The checkers report the
//! constants realized on the sample lattice and raise a growth flag when the
//! running maximum over nested shells is still strictly increasing at the
//! outermost shells.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Polynomial in `d` variables, keyed by exponent multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut map: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (exps, coeff) in terms {
            if exps.len() != dim {
                return Err(Error::InvalidPotential(format!(
                    "term {exps:?} has {} exponents, expected {dim}",
                    exps.len()
                )));
            }
            if !coeff.is_finite() {
                return Err(Error::InvalidPotential(format!("coefficient {coeff} of {exps:?} is not finite")));
            }
            *map.entry(exps).or_insert(0.0) += coeff;
        }
        map.retain(|_, c| *c != 0.0);
        Ok(Polynomial { dim, terms: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn derivative(&self, axis: usize) -> Polynomial {
        let mut terms = BTreeMap::new();
        for (exps, &c) in &self.terms {
            let e = exps[axis];
            if e == 0 {
                continue;
            }
            let mut next = exps.clone();
            next[axis] -= 1;
            *terms.entry(next).or_insert(0.0) += c * e as f64;
        }
        Polynomial { dim: self.dim, terms }
    }

    pub fn scaled(&self, factor: f64) -> Polynomial {
        Polynomial {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, &c)| (e.clone(), c * factor)).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(exps, &c)| c * exps.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>())
            .sum()
    }
}

/// One term of a potential as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTerm {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// `V(x) = Σ a_l x_l^{2n} + Q(x)` with `a_l > 0` and `deg Q ≤ 2n − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    poly: Polynomial,
    leading_degree: u32,
}

impl PolynomialPotential {
    pub fn new(dim: usize, terms: &[PotentialTerm]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPotential("dimension must be at least 1".into()));
        }
        let poly = Polynomial::new(dim, terms.iter().map(|t| (t.exponents.clone(), t.coeff)))?;
        Self::from_polynomial(poly)
    }

    pub fn from_polynomial(poly: Polynomial) -> Result<Self> {
        let leading_degree = poly.degree();
        let p = PolynomialPotential { poly, leading_degree };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.poly.dim;
        let deg = self.leading_degree;
        if deg < 2 || !deg.is_multiple_of(2) {
            return Err(Error::InvalidPotential(format!("leading degree {deg} must be even and at least 2")));
        }
        for l in 0..dim {
            let mut exps = vec![0; dim];
            exps[l] = deg;
            let a = self.poly.coefficient(&exps);
            if a <= 0.0 {
                return Err(Error::InvalidPotential(format!(
                    "leading coefficient of x_{}^{deg} is {a}, must be positive",
                    l + 1
                )));
            }
        }
        for (exps, _) in self.poly.terms() {
            let total: u32 = exps.iter().sum();
            let pure = exps.iter().filter(|&&e| e > 0).count() == 1;
            if total == deg && !pure {
                return Err(Error::InvalidPotential(format!(
                    "mixed term {exps:?} has the leading degree {deg}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.poly.dim
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    /// `2n`.
    pub fn leading_degree(&self) -> u32 {
        self.leading_degree
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.poly.eval(x)
    }
}

/// Pointwise evaluators of a drift field. Indices are 0-based:
/// `first(x, l, k) = ∂W_l/∂x_k`, `second(x, l, j, k) = ∂²W_l/∂x_j∂x_k`.
pub trait FieldEval: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], l: usize) -> f64;
    fn first(&self, x: &[f64], l: usize, k: usize) -> f64;
    fn second(&self, x: &[f64], l: usize, j: usize, k: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    GradientOfPotential,
    Analytic,
    Tabulated,
}

#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    provenance: Provenance,
    label: String,
    eval: Arc<dyn FieldEval>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .field("label", &self.label)
            .finish()
    }
}

impl VectorField {
    pub fn from_eval(provenance: Provenance, label: impl Into<String>, eval: Arc<dyn FieldEval>) -> Self {
        VectorField {
            dim: eval.dim(),
            provenance,
            label: label.into(),
            eval,
        }
    }

    /// Field given by closures for the values and both derivative levels.
    pub fn analytic<V, D1, D2>(dim: usize, label: impl Into<String>, value: V, first: D1, second: D2) -> Self
    where
        V: Fn(&[f64], usize) -> f64 + Send + Sync + 'static,
        D1: Fn(&[f64], usize, usize) -> f64 + Send + Sync + 'static,
        D2: Fn(&[f64], usize, usize, usize) -> f64 + Send + Sync + 'static,
    {
        let eval = ClosureField {
            dim,
            value: Box::new(value),
            first: Box::new(first),
            second: Box::new(second),
        };
        Self::from_eval(Provenance::Analytic, label, Arc::new(eval))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn zero(dim: usize) -> Self {
        Self::analytic(dim, "W = 0", |_, _| 0.0, |_, _, _| 0.0, |_, _, _, _| 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, x: &[f64], l: usize) -> f64 {
        self.eval.value(x, l)
    }

    pub fn first(&self, x: &[f64], l: usize, k: usize) -> f64 {
        self.eval.first(x, l, k)
    }

    pub fn second(&self, x: &[f64], l: usize, j: usize, k: usize) -> f64 {
        self.eval.second(x, l, j, k)
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|l| self.value(x, l)).collect()
    }

    /// `|W(x)| = (Σ W_l²)^{1/2}`.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.values(x).iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

type ValueFn = Box<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;
type FirstFn = Box<dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync>;
type SecondFn = Box<dyn Fn(&[f64], usize, usize, usize) -> f64 + Send + Sync>;

struct ClosureField {
    dim: usize,
    value: ValueFn,
    first: FirstFn,
    second: SecondFn,
}

impl FieldEval for ClosureField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64], l: usize) -> f64 {
        (self.value)(x, l)
    }
    fn first(&self, x: &[f64], l: usize, k: usize) -> f64 {
        (self.first)(x, l, k)
    }
    fn second(&self, x: &[f64], l: usize, j: usize, k: usize) -> f64 {
        (self.second)(x, l, j, k)
    }
}

/// `W = ¼∇V` with symbolic derivatives.
#[derive(Debug)]
struct PolynomialGradient {
    dim: usize,
    value: Vec<Polynomial>,
    first: Vec<Vec<Polynomial>>,
    second: Vec<Vec<Vec<Polynomial>>>,
}

impl FieldEval for PolynomialGradient {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64], l: usize) -> f64 {
        self.value[l].eval(x)
    }
    fn first(&self, x: &[f64], l: usize, k: usize) -> f64 {
        self.first[l][k].eval(x)
    }
    fn second(&self, x: &[f64], l: usize, j: usize, k: usize) -> f64 {
        self.second[l][j][k].eval(x)
    }
}

/// `W = ¼∇V`.
pub fn grad_potential(v: &PolynomialPotential) -> Result<VectorField> {
    v.validate()?;
    let dim = v.dim();
    let value: Vec<Polynomial> = (0..dim).map(|l| v.polynomial().derivative(l).scaled(0.25)).collect();
    let first: Vec<Vec<Polynomial>> = value.iter().map(|w| (0..dim).map(|k| w.derivative(k)).collect()).collect();
    let second = first
        .iter()
        .map(|row| row.iter().map(|dw| (0..dim).map(|j| dw.derivative(j)).collect()).collect())
        .collect();
    let label = format!("W = ∇V/4, V of degree {}", v.leading_degree());
    Ok(VectorField::from_eval(
        Provenance::GradientOfPotential,
        label,
        Arc::new(PolynomialGradient {
            dim,
            value,
            first,
            second,
        }),
    ))
}

/// Field values tabulated on a uniform lattice; evaluated by multilinear
/// interpolation, derivatives by centered differences on the lattice.
#[derive(Debug, Clone)]
pub struct TabulatedField {
    dim: usize,
    lower: Vec<f64>,
    spacing: Vec<f64>,
    counts: Vec<usize>,
    // values[l][linear lattice index], axis 0 fastest
    values: Vec<Vec<f64>>,
}

impl TabulatedField {
    pub fn new(dim: usize, lower: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(1..=2).contains(&dim) || lower.len() != dim || spacing.len() != dim || counts.len() != dim || values.len() != dim {
            return Err(Error::InvalidArgument("tabulated field shape mismatch".into()));
        }
        let total: usize = counts.iter().product();
        if counts.iter().any(|&c| c < 3) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidArgument("tabulated lattice needs ≥ 3 points and positive spacing per axis".into()));
        }
        for comp in &values {
            if comp.len() != total {
                return Err(Error::InvalidArgument("tabulated component has wrong length".into()));
            }
            if let Some(v) = comp.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "tabulated field".into(),
                    value: *v,
                });
            }
        }
        Ok(TabulatedField {
            dim,
            lower,
            spacing,
            counts,
            values,
        })
    }

    /// Whitespace-separated columns `x_1 … x_d W_1 … W_d`, one lattice point
    /// per line; `#` starts a comment.
    pub fn parse(dim: usize, text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            let row = row.map_err(|e| Error::Config(format!("tabulated field line {}: {e}", lineno + 1)))?;
            if row.len() != 2 * dim {
                return Err(Error::Config(format!(
                    "tabulated field line {}: expected {} columns, found {}",
                    lineno + 1,
                    2 * dim,
                    row.len()
                )));
            }
            rows.push(row);
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for row in &rows {
            for a in 0..dim {
                if !axes[a].iter().any(|&v| v == row[a]) {
                    axes[a].push(row[a]);
                }
            }
        }
        for axis in &mut axes {
            axis.sort_by(f64::total_cmp);
        }
        let counts: Vec<usize> = axes.iter().map(Vec::len).collect();
        if counts.iter().any(|&c| c < 3) {
            return Err(Error::Config("tabulated field needs at least 3 lattice points per axis".into()));
        }
        let spacing: Vec<f64> = axes.iter().map(|a| (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64).collect();
        for (a, axis) in axes.iter().enumerate() {
            for w in axis.windows(2) {
                if ((w[1] - w[0]) - spacing[a]).abs() > 1e-9 * spacing[a] {
                    return Err(Error::Config("tabulated field lattice is not uniform".into()));
                }
            }
        }
        let total: usize = counts.iter().product();
        if rows.len() != total {
            return Err(Error::Config(format!("tabulated field has {} rows, lattice needs {total}", rows.len())));
        }
        let mut values = vec![vec![f64::NAN; total]; dim];
        for row in &rows {
            let mut idx = 0;
            let mut stride = 1;
            for a in 0..dim {
                let i = ((row[a] - axes[a][0]) / spacing[a]).round() as usize;
                idx += i * stride;
                stride *= counts[a];
            }
            for l in 0..dim {
                values[l][idx] = row[dim + l];
            }
        }
        let lower = axes.iter().map(|a| a[0]).collect();
        TabulatedField::new(dim, lower, spacing, counts, values)
    }

    pub fn from_file(dim: usize, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(dim, &text)
    }

    /// Tabulates `field` on the lattice of `g`.
    pub fn sample(field: &VectorField, g: &GridSpec) -> Result<Self> {
        let values = (0..field.dim()).map(|l| g.sample(|x| field.value(x, l))).collect();
        TabulatedField::new(
            g.dim,
            vec![-g.half_width; g.dim],
            vec![g.spacing(); g.dim],
            vec![g.points; g.dim],
            values,
        )
    }

    fn lattice_value(&self, l: usize, idx: &[usize]) -> f64 {
        let mut p = 0;
        let mut stride = 1;
        for a in 0..self.dim {
            p += idx[a] * stride;
            stride *= self.counts[a];
        }
        self.values[l][p]
    }

    /// Centered difference along `axis` at a lattice node, one-sided at edges.
    fn lattice_diff(&self, l: usize, idx: &[usize], axis: usize) -> f64 {
        let n = self.counts[axis];
        let h = self.spacing[axis];
        let mut lo = idx.to_vec();
        let mut hi = idx.to_vec();
        let i = idx[axis];
        let span = if i == 0 {
            hi[axis] = 1;
            1.0
        } else if i == n - 1 {
            lo[axis] = n - 2;
            1.0
        } else {
            lo[axis] = i - 1;
            hi[axis] = i + 1;
            2.0
        };
        (self.lattice_value(l, &hi) - self.lattice_value(l, &lo)) / (span * h)
    }

    fn lattice_second(&self, l: usize, idx: &[usize], j: usize, k: usize) -> f64 {
        let n = self.counts[j];
        let h = self.spacing[j];
        let i = idx[j];
        let (lo_i, hi_i, span) = if i == 0 {
            (0, 1, 1.0)
        } else if i == n - 1 {
            (n - 2, n - 1, 1.0)
        } else {
            (i - 1, i + 1, 2.0)
        };
        let mut lo = idx.to_vec();
        let mut hi = idx.to_vec();
        lo[j] = lo_i;
        hi[j] = hi_i;
        (self.lattice_diff(l, &hi, k) - self.lattice_diff(l, &lo, k)) / (span * h)
    }

    fn interpolate(&self, x: &[f64], f: impl Fn(&[usize]) -> f64) -> f64 {
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..self.dim {
            let t = ((x[a] - self.lower[a]) / self.spacing[a]).clamp(0.0, (self.counts[a] - 1) as f64);
            let i = (t.floor() as usize).min(self.counts[a] - 2);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let corners = 1usize << self.dim;
        let mut acc = 0.0;
        for c in 0..corners {
            let mut idx = [0usize; 2];
            let mut w = 1.0;
            for a in 0..self.dim {
                let bit = (c >> a) & 1;
                idx[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * f(&idx[..self.dim]);
            }
        }
        acc
    }
}

impl FieldEval for TabulatedField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64], l: usize) -> f64 {
        self.interpolate(x, |idx| self.lattice_value(l, idx))
    }
    fn first(&self, x: &[f64], l: usize, k: usize) -> f64 {
        self.interpolate(x, |idx| self.lattice_diff(l, idx, k))
    }
    fn second(&self, x: &[f64], l: usize, j: usize, k: usize) -> f64 {
        self.interpolate(x, |idx| self.lattice_second(l, idx, j, k))
    }
}

impl TabulatedField {
    pub fn into_field(self, label: impl Into<String>) -> VectorField {
        VectorField::from_eval(Provenance::Tabulated, label, Arc::new(self))
    }
}

/// Axis-aligned sampling box with `points` lattice points per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: usize,
}

/// Number of nested shells used by the growth heuristic.
pub const SHELLS: usize = 8;
/// Consecutive strictly increasing shell maxima that raise the growth flag.
const GROWTH_RUN: usize = 3;

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points: usize) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidArgument("box bounds must have matching non-zero length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::InvalidArgument(format!("degenerate box {lower:?} .. {upper:?}")));
        }
        if points < 2 {
            return Err(Error::EmptySampleSet);
        }
        Ok(SampleBox { lower, upper, points })
    }

    pub fn symmetric(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim], points)
    }

    /// The discretization lattice of `g`.
    pub fn from_grid(g: &GridSpec) -> Self {
        SampleBox {
            lower: vec![-g.half_width; g.dim],
            upper: vec![g.half_width; g.dim],
            points: g.points,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        let mut rem = p;
        (0..self.dim())
            .map(|a| {
                let i = rem % self.points;
                rem /= self.points;
                self.lower[a] + (self.upper[a] - self.lower[a]) * i as f64 / (self.points - 1) as f64
            })
            .collect()
    }

    /// Shell index in `1..=SHELLS`: the smallest scaled box (about the center)
    /// containing the point.
    fn shell(&self, x: &[f64]) -> usize {
        let r = (0..self.dim())
            .map(|a| {
                let c = 0.5 * (self.lower[a] + self.upper[a]);
                let hw = 0.5 * (self.upper[a] - self.lower[a]);
                (x[a] - c).abs() / hw
            })
            .fold(0.0, f64::max);
        ((r * SHELLS as f64 - 1e-9).ceil() as usize).clamp(1, SHELLS)
    }
}

/// Per-sample quantity with its shell, used for constants and the growth flag.
struct Scan {
    shells: Vec<usize>,
    points: Vec<Vec<f64>>,
}

impl Scan {
    fn new(b: &SampleBox) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let points: Vec<Vec<f64>> = (0..b.len()).map(|p| b.point(p)).collect();
        let shells = points.iter().map(|x| b.shell(x)).collect();
        Ok(Scan { shells, points })
    }

    /// Running maxima over nested shells and the argmax of each shell prefix.
    fn running_max(&self, q: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let mut best = vec![f64::NEG_INFINITY; SHELLS];
        let mut arg = vec![usize::MAX; SHELLS];
        for (p, &s) in self.shells.iter().enumerate() {
            if q[p] > best[s - 1] {
                best[s - 1] = q[p];
                arg[s - 1] = p;
            }
        }
        for s in 1..SHELLS {
            if best[s - 1] >= best[s] {
                best[s] = best[s - 1];
                arg[s] = arg[s - 1];
            }
        }
        (best, arg)
    }
}

fn strictly_growing(running: &[f64]) -> bool {
    let n = running.len();
    (n - GROWTH_RUN..n).all(|s| running[s] > running[s - 1] + 1e-12 * running[s - 1].abs())
}

fn check_finite(v: f64, x: &[f64], what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: format!("{what} at {x:?}"),
            value: v,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "C-1")]
    C1,
    #[serde(rename = "C-2")]
    C2,
    #[serde(rename = "C-3")]
    C3,
    #[serde(rename = "C-4")]
    C4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    SatisfiedOnBox,
    Violated,
    AssumedByConstruction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonConstant {
    pub epsilon: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constants {
    None,
    /// C-1 on non-polynomial fields: worst finite-difference discrepancy.
    Smoothness { max_discrepancy: f64, observed_order: Option<f64> },
    Epsilon { pairs: Vec<EpsilonConstant> },
    Pareto { pairs: Vec<ParetoPoint> },
    Jacobian { c4: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub condition: Condition,
    pub status: Status,
    pub growth_violation: bool,
    pub constants: Constants,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub field: String,
    #[serde(rename = "box")]
    pub sample_box: SampleBox,
    pub entries: Vec<ConditionEntry>,
}

impl AssumptionReport {
    pub fn entry(&self, c: Condition) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.condition == c)
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Violated)
    }
}

pub const DEFAULT_EPSILONS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
pub const DEFAULT_C1_SWEEP: [f64; 8] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

/// C-1. Polynomial fields are smooth by construction; other fields are checked
/// for finite-difference consistency of their derivative evaluators.
pub fn check_c1(w: &VectorField, b: &SampleBox) -> Result<ConditionEntry> {
    if w.provenance() == Provenance::GradientOfPotential {
        return Ok(ConditionEntry {
            condition: Condition::C1,
            status: Status::AssumedByConstruction,
            growth_violation: false,
            constants: Constants::None,
            witnesses: vec![],
        });
    }
    let scan = Scan::new(b)?;
    let d = w.dim();
    let width = (0..d).map(|a| b.upper[a] - b.lower[a]).fold(f64::INFINITY, f64::min);
    let tabulated = w.provenance() == Provenance::Tabulated;
    let spacing = width / (b.points - 1) as f64;
    // analytic fields: differences at δ and δ/2; tabulated fields: lattice
    // differences against differences at twice the spacing, away from edges
    let delta = if tabulated { 2.0 * spacing } else { width / (b.points as f64 * 4.0) };
    let margin = if tabulated { 3.0 * spacing * (1.0 - 1e-9) } else { 0.0 };

    let mut err_coarse = 0.0_f64;
    let mut err_fine = 0.0_f64;
    let mut scale = 0.0_f64;
    let mut worst: Option<Witness> = None;
    let inside = |x: &[f64]| (0..d).all(|a| x[a] - b.lower[a] >= margin && b.upper[a] - x[a] >= margin);
    for x in scan.points.iter().filter(|x| inside(x)) {
        for l in 0..d {
            for k in 0..d {
                let exact = check_finite(w.first(x, l, k), x, "first derivative")?;
                let (fd_c, fd_f) = (
                    centered(|y| w.value(y, l), x, k, delta),
                    centered(|y| w.value(y, l), x, k, delta / 2.0),
                );
                scale = scale.max(exact.abs());
                let e = (fd_c - exact).abs();
                if e > err_coarse {
                    err_coarse = e;
                    worst = Some(Witness {
                        point: x.clone(),
                        value: e,
                    });
                }
                err_fine = err_fine.max((fd_f - exact).abs());
                for j in 0..d {
                    let exact2 = check_finite(w.second(x, l, j, k), x, "second derivative")?;
                    let fd2 = centered(|y| w.first(y, l, k), x, j, delta);
                    let fd2f = centered(|y| w.first(y, l, k), x, j, delta / 2.0);
                    scale = scale.max(exact2.abs());
                    let e2 = (fd2 - exact2).abs();
                    if e2 > err_coarse {
                        err_coarse = e2;
                        worst = Some(Witness {
                            point: x.clone(),
                            value: e2,
                        });
                    }
                    err_fine = err_fine.max((fd2f - exact2).abs());
                }
            }
        }
    }
    let floor = 1e-7 * (1.0 + scale);
    let (ok, order) = if tabulated {
        // interpolated lattice differences: agreement to a fraction of the scale
        (err_coarse <= 0.05 * (1.0 + scale), None)
    } else if err_coarse <= floor {
        (true, None)
    } else {
        let order = (err_coarse / err_fine.max(f64::MIN_POSITIVE)).log2();
        (order >= 1.8 || err_fine <= floor, Some(order))
    };
    Ok(ConditionEntry {
        condition: Condition::C1,
        status: if ok { Status::SatisfiedOnBox } else { Status::Violated },
        growth_violation: false,
        constants: Constants::Smoothness {
            max_discrepancy: err_coarse,
            observed_order: order,
        },
        witnesses: if ok { vec![] } else { worst.into_iter().collect() },
    })
}

fn centered(f: impl Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> f64 {
    let mut hi = x.to_vec();
    let mut lo = x.to_vec();
    hi[axis] += h;
    lo[axis] -= h;
    (f(&hi) - f(&lo)) / (2.0 * h)
}

/// C-2: `c(ε) = max (|(W_l)_k| − ε|W|)⁺` over samples and `l, k`.
pub fn check_c2(w: &VectorField, b: &SampleBox, eps_list: &[f64]) -> Result<ConditionEntry> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("no ε values".into()));
    }
    if let Some(e) = eps_list.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidArgument(format!("ε = {e} not in (0, 1)")));
    }
    let scan = Scan::new(b)?;
    let d = w.dim();
    let mut jac_max = Vec::with_capacity(scan.points.len());
    let mut mag = Vec::with_capacity(scan.points.len());
    for x in &scan.points {
        let mut m = 0.0_f64;
        for l in 0..d {
            for k in 0..d {
                m = m.max(check_finite(w.first(x, l, k), x, "(W_l)_k")?.abs());
            }
        }
        jac_max.push(m);
        mag.push(check_finite(w.magnitude(x), x, "|W|")?);
    }
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(f64::total_cmp);
    let mut pairs = Vec::new();
    let mut all_growing = true;
    let mut witness = None;
    for &eps in &eps_sorted {
        let q: Vec<f64> = jac_max.iter().zip(&mag).map(|(j, m)| (j - eps * m).max(0.0)).collect();
        let (running, arg) = scan.running_max(&q);
        pairs.push(EpsilonConstant {
            epsilon: eps,
            c: running[SHELLS - 1],
        });
        if strictly_growing(&running) {
            let p = arg[SHELLS - 1];
            witness = Some(Witness {
                point: scan.points[p].clone(),
                value: q[p],
            });
        } else {
            all_growing = false;
        }
    }
    Ok(growth_entry(Condition::C2, all_growing, Constants::Epsilon { pairs }, witness))
}

/// C-3: Pareto set of `(c₁, c₂)` with `|(W_l)_{jk}| ≤ c₁|W| + c₂` on samples.
pub fn check_c3(w: &VectorField, b: &SampleBox, c1_sweep: &[f64]) -> Result<ConditionEntry> {
    if c1_sweep.is_empty() || c1_sweep.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument("c₁ sweep must be non-empty and non-negative".into()));
    }
    let scan = Scan::new(b)?;
    let d = w.dim();
    let mut hess_max = Vec::with_capacity(scan.points.len());
    let mut mag = Vec::with_capacity(scan.points.len());
    for x in &scan.points {
        let mut m = 0.0_f64;
        for l in 0..d {
            for j in 0..d {
                for k in 0..d {
                    m = m.max(check_finite(w.second(x, l, j, k), x, "(W_l)_jk")?.abs());
                }
            }
        }
        hess_max.push(m);
        mag.push(check_finite(w.magnitude(x), x, "|W|")?);
    }
    let mut sweep = c1_sweep.to_vec();
    sweep.sort_by(f64::total_cmp);
    let mut pairs = Vec::new();
    let mut all_growing = true;
    let mut witness = None;
    for &c1 in &sweep {
        let q: Vec<f64> = hess_max.iter().zip(&mag).map(|(h, m)| (h - c1 * m).max(0.0)).collect();
        let (running, arg) = scan.running_max(&q);
        pairs.push(ParetoPoint {
            c1,
            c2: running[SHELLS - 1],
        });
        if strictly_growing(&running) {
            let p = arg[SHELLS - 1];
            witness = Some(Witness {
                point: scan.points[p].clone(),
                value: q[p],
            });
        } else {
            all_growing = false;
        }
    }
    Ok(growth_entry(Condition::C3, all_growing, Constants::Pareto { pairs }, witness))
}

/// Smallest eigenvalue of the symmetric part of `J_{kl} = (W_l)_k` at `x`.
pub fn jacobian_min_eigenvalue(w: &VectorField, x: &[f64]) -> Result<f64> {
    let d = w.dim();
    let j = |k: usize, l: usize| w.first(x, l, k);
    let lam = match d {
        1 => j(0, 0),
        2 => {
            let a = j(0, 0);
            let c = j(1, 1);
            let b = 0.5 * (j(0, 1) + j(1, 0));
            0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
        }
        _ => {
            let sym = faer::Mat::<f64>::from_fn(d, d, |k, l| 0.5 * (j(k, l) + j(l, k)));
            let ev = sym
                .self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|e| Error::Eigensolve(format!("{d}x{d} Jacobian: {e:?}")))?;
            ev[0]
        }
    };
    check_finite(lam, x, "Jacobian eigenvalue")
}

/// C-4: `c₄ = max(0, −min_x λ_min(sym J(x)))`.
pub fn check_c4(w: &VectorField, b: &SampleBox) -> Result<ConditionEntry> {
    let scan = Scan::new(b)?;
    let q: Vec<f64> = scan
        .points
        .iter()
        .map(|x| jacobian_min_eigenvalue(w, x).map(|l| (-l).max(0.0)))
        .collect::<Result<_>>()?;
    let (running, arg) = scan.running_max(&q);
    let growing = strictly_growing(&running);
    let witness = growing.then(|| {
        let p = arg[SHELLS - 1];
        Witness {
            point: scan.points[p].clone(),
            value: -q[p],
        }
    });
    Ok(growth_entry(
        Condition::C4,
        growing,
        Constants::Jacobian {
            c4: running[SHELLS - 1],
        },
        witness,
    ))
}

fn growth_entry(condition: Condition, growing: bool, constants: Constants, witness: Option<Witness>) -> ConditionEntry {
    ConditionEntry {
        condition,
        status: if growing { Status::Violated } else { Status::SatisfiedOnBox },
        growth_violation: growing,
        constants,
        witnesses: if growing { witness.into_iter().collect() } else { vec![] },
    }
}

pub fn check_all(w: &VectorField, b: &SampleBox) -> Result<AssumptionReport> {
    if w.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("field d={} vs box d={}", w.dim(), b.dim())));
    }
    Ok(AssumptionReport {
        field: w.label().to_string(),
        sample_box: b.clone(),
        entries: vec![
            check_c1(w, b)?,
            check_c2(w, b, &DEFAULT_EPSILONS)?,
            check_c3(w, b, &DEFAULT_C1_SWEEP)?,
            check_c4(w, b)?,
        ],
    })
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ScalarGradFn = Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>;

/// Smooth scalar function with analytic gradient and Laplacian, used as
/// multiplication-operator data and as classical initial data.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    label: String,
    value: ScalarFn,
    gradient: ScalarGradFn,
    laplacian: ScalarFn,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("dim", &self.dim).field("label", &self.label).finish()
    }
}

impl ScalarField {
    pub fn new<V, G, L>(dim: usize, label: impl Into<String>, value: V, gradient: G, laplacian: L) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], usize) -> f64 + Send + Sync + 'static,
        L: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            label: label.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            laplacian: Arc::new(laplacian),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, format!("f = {c}"), move |_| c, |_, _| 0.0, |_| 0.0)
    }

    /// `exp(−|x − c|² / (2v))`, peak value 1.
    pub fn gaussian(center: Vec<f64>, variance: f64) -> Result<Self> {
        if center.is_empty() || !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("gaussian needs a center and variance > 0, got {variance}")));
        }
        let dim = center.len();
        let label = format!("gaussian(center={center:?}, variance={variance})");
        let c1 = center.clone();
        let c2 = center.clone();
        let c3 = center;
        let r2 = move |x: &[f64], c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        Ok(Self::new(
            dim,
            label,
            move |x| (-r2(x, &c1) / (2.0 * variance)).exp(),
            move |x, k| -(x[k] - c2[k]) / variance * (-r2(x, &c2) / (2.0 * variance)).exp(),
            move |x| {
                let r = r2(x, &c3);
                (r / (variance * variance) - dim as f64 / variance) * (-r / (2.0 * variance)).exp()
            },
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64], k: usize) -> f64 {
        (self.gradient)(x, k)
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        (self.laplacian)(x)
    }

    pub fn sample(&self, g: &GridSpec) -> Vec<f64> {
        g.sample(|x| self.value(x))
    }
}

/// Handy analytic fields used by tests and examples.
pub mod fields {
    use super::VectorField;

    /// `W(x) = x` in one dimension (`V = 2x²`).
    pub fn linear() -> VectorField {
        VectorField::analytic(1, "W = x", |x, _| x[0], |_, _, _| 1.0, |_, _, _, _| 0.0)
    }

    pub fn cubic(sign: f64) -> VectorField {
        VectorField::analytic(
            1,
            if sign > 0.0 { "W = x^3" } else { "W = -x^3" },
            move |x, _| sign * x[0].powi(3),
            move |x, _, _| sign * 3.0 * x[0] * x[0],
            move |x, _, _, _| sign * 6.0 * x[0],
        )
    }

    pub fn exponential() -> VectorField {
        VectorField::analytic(1, "W = exp(x)", |x, _| x[0].exp(), |x, _, _| x[0].exp(), |x, _, _, _| x[0].exp())
    }

    pub fn gaussian_growth() -> VectorField {
        VectorField::analytic(
            1,
            "W = exp(x^2)",
            |x, _| (x[0] * x[0]).exp(),
            |x, _, _| 2.0 * x[0] * (x[0] * x[0]).exp(),
            |x, _, _, _| (2.0 + 4.0 * x[0] * x[0]) * (x[0] * x[0]).exp(),
        )
    }

    /// `W(x, y) = (y, −x)`.
    pub fn rotation() -> VectorField {
        VectorField::analytic(
            2,
            "W = (y, -x)",
            |x, l| if l == 0 { x[1] } else { -x[0] },
            |_, l, k| match (l, k) {
                (0, 1) => 1.0,
                (1, 0) => -1.0,
                _ => 0.0,
            },
            |_, _, _, _| 0.0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(exponents: &[u32], coeff: f64) -> PotentialTerm {
        PotentialTerm {
            exponents: exponents.to_vec(),
            coeff,
        }
    }

    fn quartic_2d() -> VectorField {
        let v = PolynomialPotential::new(2, &[term(&[4, 0], 1.0), term(&[0, 4], 1.0), term(&[1, 1], 1.0)]).unwrap();
        grad_potential(&v).unwrap()
    }

    #[test]
    fn gradient_of_harmonic_potential() {
        let w = grad_potential(&PolynomialPotential::new(1, &[term(&[2], 2.0)]).unwrap()).unwrap();
        for x in [-3.0, -0.5, 0.0, 1.7] {
            assert_eq!(w.value(&[x], 0), x);
            assert_eq!(w.first(&[x], 0, 0), 1.0);
            assert_eq!(w.second(&[x], 0, 0, 0), 0.0);
        }
    }

    #[test]
    fn gradient_of_quartics() {
        let w = grad_potential(&PolynomialPotential::new(1, &[term(&[4], 1.0)]).unwrap()).unwrap();
        assert_eq!(w.value(&[2.0], 0), 8.0);
        let w = quartic_2d();
        let (x, y) = (1.5, -0.5);
        assert!((w.value(&[x, y], 0) - (x * x * x + y / 4.0)).abs() < 1e-15);
        assert!((w.value(&[x, y], 1) - (y * y * y + x / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_potentials() {
        let bad = [
            vec![term(&[2], -1.0)],
            vec![term(&[3], 1.0)],
            vec![term(&[4, 0], 1.0)],
            vec![term(&[4, 0], 1.0), term(&[0, 4], 1.0), term(&[2, 2], 1.0)],
            vec![term(&[4, 0], 1.0), term(&[0, 4], 0.0)],
        ];
        for terms in bad {
            let d = terms[0].exponents.len();
            assert!(PolynomialPotential::new(d, &terms).is_err(), "{terms:?}");
        }
        assert!(PolynomialPotential::new(1, &[term(&[2, 0], 1.0)]).is_err());
    }

    #[test]
    fn mixed_partials_are_symmetric() {
        let v = PolynomialPotential::new(
            2,
            &[term(&[6, 0], 0.5), term(&[0, 6], 2.0), term(&[2, 3], -1.0), term(&[1, 1], 0.3), term(&[4, 1], 0.7)],
        )
        .unwrap();
        let w = grad_potential(&v).unwrap();
        for x in [[0.3, -1.2], [2.0, 0.7], [-1.5, -1.5]] {
            assert!((w.first(&x, 0, 1) - w.first(&x, 1, 0)).abs() <= 1e-12 * (1.0 + w.first(&x, 0, 1).abs()));
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences_to_second_order() {
        let w = quartic_2d();
        let x = [0.7, -1.1];
        for l in 0..2 {
            for k in 0..2 {
                let exact = w.first(&x, l, k);
                let e1 = (centered(|y| w.value(y, l), &x, k, 1e-2) - exact).abs();
                let e2 = (centered(|y| w.value(y, l), &x, k, 5e-3) - exact).abs();
                if e1 > 1e-12 {
                    assert!((e1 / e2).log2() >= 1.8, "l={l} k={k}: {e1} {e2}");
                }
            }
        }
    }

    #[test]
    fn c2_linear_field() {
        let b = SampleBox::symmetric(1, 5.0, 101).unwrap();
        let e = check_c2(&fields::linear(), &b, &[0.5]).unwrap();
        assert_eq!(e.status, Status::SatisfiedOnBox);
        match e.constants {
            Constants::Epsilon { pairs } => assert_eq!(pairs[0].c, 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn c2_cubic_field_matches_scan_oracle() {
        let b = SampleBox::symmetric(1, 10.0, 201).unwrap();
        // oracle: direct scan of 3x² − ε|x|³ over the same lattice
        let oracle = (0..201)
            .map(|i| -10.0 + 20.0 * i as f64 / 200.0)
            .map(|x: f64| (3.0 * x * x - 0.5 * x.abs().powi(3)).max(0.0))
            .fold(0.0, f64::max);
        assert!((oracle - 16.0).abs() < 1e-12);
        let e = check_c2(&fields::cubic(1.0), &b, &[0.5]).unwrap();
        assert_eq!(e.status, Status::SatisfiedOnBox);
        match e.constants {
            Constants::Epsilon { pairs } => assert!((pairs[0].c - oracle).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn c2_exponential_flags_growth_at_right_boundary() {
        let b = SampleBox::symmetric(1, 5.0, 101).unwrap();
        let e = check_c2(&fields::exponential(), &b, &DEFAULT_EPSILONS).unwrap();
        assert!(e.growth_violation);
        assert_eq!(e.status, Status::Violated);
        assert_eq!(e.witnesses[0].point, vec![5.0]);
    }

    #[test]
    fn c2_constants_non_increasing_in_epsilon() {
        let b = SampleBox::symmetric(2, 2.0, 21).unwrap();
        let e = check_c2(&quartic_2d(), &b, &[0.9, 0.1, 0.5, 0.25]).unwrap();
        let Constants::Epsilon { pairs } = e.constants else { panic!() };
        for w in pairs.windows(2) {
            assert!(w[0].epsilon < w[1].epsilon);
            assert!(w[1].c <= w[0].c);
        }
    }

    #[test]
    fn c2_rejects_bad_epsilon_and_nan() {
        let b = SampleBox::symmetric(1, 1.0, 11).unwrap();
        assert!(check_c2(&fields::linear(), &b, &[1.0]).is_err());
        assert!(check_c2(&fields::linear(), &b, &[]).is_err());
        let nan = VectorField::analytic(1, "nan", |_, _| f64::NAN, |_, _, _| 0.0, |_, _, _, _| 0.0);
        assert!(matches!(check_c2(&nan, &b, &[0.5]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn c3_examples() {
        let b = SampleBox::symmetric(1, 5.0, 101).unwrap();
        let e = check_c3(&fields::linear(), &b, &[0.0]).unwrap();
        assert_eq!(e.constants, Constants::Pareto { pairs: vec![ParetoPoint { c1: 0.0, c2: 0.0 }] });

        let b = SampleBox::symmetric(1, 5.0, 1001).unwrap();
        let oracle = (0..1001)
            .map(|i| -5.0 + 10.0 * i as f64 / 1000.0)
            .map(|x: f64| (6.0 * x.abs() - x.abs().powi(3)).max(0.0))
            .fold(0.0, f64::max);
        // continuum maximum 4√2 at |x| = √2
        assert!((oracle - 4.0 * 2f64.sqrt()).abs() < 1e-4);
        let e = check_c3(&fields::cubic(1.0), &b, &[1.0]).unwrap();
        let Constants::Pareto { pairs } = e.constants else { panic!() };
        assert!((pairs[0].c2 - oracle).abs() < 1e-12);

        let b = SampleBox::symmetric(1, 3.0, 61).unwrap();
        let e = check_c3(&fields::gaussian_growth(), &b, &DEFAULT_C1_SWEEP).unwrap();
        assert!(e.growth_violation);
        assert!(!e.witnesses.is_empty());
    }

    #[test]
    fn c4_examples() {
        let b = SampleBox::symmetric(1, 5.0, 101).unwrap();
        let e = check_c4(&fields::linear(), &b).unwrap();
        assert_eq!(e.constants, Constants::Jacobian { c4: 0.0 });
        assert!(!e.growth_violation);

        let b2 = SampleBox::symmetric(2, 3.0, 31).unwrap();
        let e = check_c4(&fields::rotation(), &b2).unwrap();
        assert_eq!(e.constants, Constants::Jacobian { c4: 0.0 });

        let e = check_c4(&fields::cubic(-1.0), &b).unwrap();
        assert_eq!(e.constants, Constants::Jacobian { c4: 75.0 });
        assert!(e.growth_violation);
        assert_eq!(e.status, Status::Violated);
        assert_eq!(e.witnesses[0].point[0].abs(), 5.0);
    }

    #[test]
    fn c4_matches_quarter_hessian_of_potential() {
        let v = PolynomialPotential::new(2, &[term(&[4, 0], 1.0), term(&[0, 4], 1.0), term(&[1, 1], 1.0), term(&[2, 1], -0.4)])
            .unwrap();
        let w = grad_potential(&v).unwrap();
        let b = SampleBox::symmetric(2, 2.0, 41).unwrap();
        let hess: Vec<Vec<Polynomial>> = (0..2)
            .map(|j| (0..2).map(|k| v.polynomial().derivative(j).derivative(k)).collect())
            .collect();
        let mut worst = 0.0_f64;
        for p in 0..b.len() {
            let x = b.point(p);
            let m = faer::Mat::<f64>::from_fn(2, 2, |j, k| 0.25 * hess[j][k].eval(&x));
            let ev = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            worst = worst.max(-ev[0]);
        }
        let Constants::Jacobian { c4 } = check_c4(&w, &b).unwrap().constants else { panic!() };
        assert!((c4 - worst.max(0.0)).abs() < 1e-12, "{c4} vs {worst}");
    }

    #[test]
    fn example_potentials_pass_everything() {
        let cases = [
            (1, vec![term(&[2], 2.0)], 6.0),
            (1, vec![term(&[4], 1.0)], 4.0),
            (2, vec![term(&[4, 0], 1.0), term(&[0, 4], 1.0), term(&[1, 1], 1.0)], 3.0),
        ];
        for (d, terms, r) in cases {
            let w = grad_potential(&PolynomialPotential::new(d, &terms).unwrap()).unwrap();
            let b = SampleBox::symmetric(d, r, if d == 1 { 64 } else { 24 }).unwrap();
            let report = check_all(&w, &b).unwrap();
            assert!(report.all_hold(), "{report:#?}");
            assert_eq!(report.entry(Condition::C1).unwrap().status, Status::AssumedByConstruction);
        }
    }

    #[test]
    fn analytic_c1_consistency() {
        let b = SampleBox::symmetric(1, 2.0, 21).unwrap();
        assert_eq!(check_c1(&fields::cubic(1.0), &b).unwrap().status, Status::SatisfiedOnBox);
        // wrong derivative evaluator
        let broken = VectorField::analytic(1, "broken", |x, _| x[0].sin(), |x, _, _| x[0].cos() + 0.1, |x, _, _, _| -x[0].sin());
        let e = check_c1(&broken, &b).unwrap();
        assert_eq!(e.status, Status::Violated);
        assert_eq!(e.witnesses.len(), 1);
    }

    #[test]
    fn tabulated_field_roundtrip() {
        let g = GridSpec::new(1, 3.0, 61, 1).unwrap();
        let mut text = String::from("# x W\n");
        for x in g.axis_coordinates() {
            text.push_str(&format!("{x} {}\n", x * x * x));
        }
        let w = TabulatedField::parse(1, &text).unwrap().into_field("tab");
        assert_eq!(w.provenance(), Provenance::Tabulated);
        assert!((w.value(&[1.0], 0) - 1.0).abs() < 1e-2);
        assert!((w.first(&[1.0], 0, 0) - 3.0).abs() < 2e-2);
        let b = SampleBox::from_grid(&g);
        let report = check_all(&w, &b).unwrap();
        assert_eq!(report.entry(Condition::C1).unwrap().status, Status::SatisfiedOnBox);
        assert!(TabulatedField::parse(1, "0 1\n1 2\n").is_err());
        assert!(TabulatedField::parse(1, "0 1\n1 2\n3 4\n").is_err());
    }

    #[test]
    fn gaussian_scalar_derivatives() {
        let f = ScalarField::gaussian(vec![0.3, -0.2], 0.7).unwrap();
        let x = [0.9, 0.4];
        let h = 1e-4;
        for k in 0..2 {
            let fd = centered(|y| f.value(y), &x, k, h);
            assert!((fd - f.gradient(&x, k)).abs() < 1e-7);
        }
        let lap: f64 = (0..2)
            .map(|k| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[k] += h;
                lo[k] -= h;
                (f.value(&hi) - 2.0 * f.value(&x) + f.value(&lo)) / (h * h)
            })
            .sum();
        assert!((lap - f.laplacian(&x)).abs() < 1e-5);
        assert!(ScalarField::gaussian(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn report_json_field_names() {
        let b = SampleBox::symmetric(1, 5.0, 51).unwrap();
        let r = check_all(&fields::exponential(), &b).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let e = &v["entries"][1];
        assert_eq!(e["condition"], "C-2");
        assert_eq!(e["status"], "violated");
        assert!(e["constants"]["pairs"].is_array());
        assert!(e["witnesses"][0]["point"].is_array());
        for entry in &r.entries {
            if entry.status == Status::Violated {
                assert!(!entry.witnesses.is_empty());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn potential_1d() -> impl Strategy<Value = VectorField> {
            (1u32..=3, 0.1f64..3.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(n, a, b, c)| {
                let v = PolynomialPotential::new(1, &[term(&[2 * n], a), term(&[1], b), term(&[2], c * 0.1)]).unwrap();
                grad_potential(&v).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn c2_constant_non_increasing_in_epsilon(w in potential_1d(), half in 1.0f64..6.0) {
                let b = SampleBox::symmetric(1, half, 61).unwrap();
                let e = check_c2(&w, &b, &DEFAULT_EPSILONS).unwrap();
                let Constants::Epsilon { pairs } = e.constants else { panic!("wrong constants") };
                for p in pairs.windows(2) {
                    prop_assert!(p[0].epsilon < p[1].epsilon);
                    prop_assert!(p[1].c <= p[0].c);
                }
            }

            #[test]
            fn c3_offset_non_increasing_in_slope(w in potential_1d(), half in 1.0f64..6.0) {
                let b = SampleBox::symmetric(1, half, 61).unwrap();
                let e = check_c3(&w, &b, &DEFAULT_C1_SWEEP).unwrap();
                let Constants::Pareto { pairs } = e.constants else { panic!("wrong constants") };
                for p in pairs.windows(2) {
                    prop_assert!(p[1].c2 <= p[0].c2);
                }
            }

            #[test]
            fn gradient_jacobian_symmetric(a in 0.1f64..2.0, b in 0.1f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
                                           x in -3.0f64..3.0, y in -3.0f64..3.0) {
                let v = PolynomialPotential::new(2, &[term(&[4, 0], a), term(&[0, 4], b), term(&[1, 1], c), term(&[2, 1], d)]).unwrap();
                let w = grad_potential(&v).unwrap();
                let p = [x, y];
                prop_assert_eq!(w.first(&p, 0, 1), w.first(&p, 1, 0));
            }

            #[test]
            fn violated_entries_carry_witnesses(sign in prop_oneof![Just(-1.0f64), Just(1.0)], half in 2.0f64..6.0) {
                let b = SampleBox::symmetric(1, half, 81).unwrap();
                for w in [fields::cubic(sign), fields::exponential()] {
                    let r = check_all(&w, &b).unwrap();
                    for e in &r.entries {
                        if e.status == Status::Violated {
                            prop_assert!(!e.witnesses.is_empty());
                        }
                    }
                }
            }

            #[test]
            fn c4_is_quarter_hessian_bound(a in 0.1f64..2.0, c in -2.0f64..2.0, half in 1.0f64..4.0) {
                // V = a x⁴ + c x², so ¼V'' = 3a x² + c/2 with minimum c/2 at x = 0
                let v = PolynomialPotential::new(1, &[term(&[4], a), term(&[2], c)]).unwrap();
                let w = grad_potential(&v).unwrap();
                let b = SampleBox::symmetric(1, half, 41).unwrap();
                let Constants::Jacobian { c4 } = check_c4(&w, &b).unwrap().constants else { panic!("wrong constants") };
                prop_assert!((c4 - (-c / 2.0).max(0.0)).abs() <= 1e-12);
            }
        }
    }
}
