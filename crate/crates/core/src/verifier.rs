//! Conservativity conditions and optimal constants of the relative-bound and
//! commutator inequalities, estimated as Hermitian-definite pencil problems.
//!
//! Every inequality is evaluated on the bulk subspace: vectors vanishing on
//! the outer `w` layers. Dirichlet truncation puts `O(1/h)` artifacts into
//! commutator forms at the box faces, and those have no continuum counterpart.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::GridSpec;
use crate::lindblad::{assemble, LindbladSystem};
use crate::linalg::{self, c64, mul, CMat, ONE};

pub const DEFAULT_BULK_WIDTH: usize = 3;
/// Largest tolerated relative change of `k` between resolutions.
pub const MAX_K_DRIFT: f64 = 0.10;
/// Values of `k` below this are round-off; the drift is measured against it.
pub const K_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Subspace {
    Full,
    Bulk { width: usize },
}

impl Subspace {
    pub fn indices(&self, g: &GridSpec) -> Vec<usize> {
        match *self {
            Subspace::Full => (0..g.size()).collect(),
            Subspace::Bulk { width } => g.bulk_indices_with(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilEstimate {
    /// The bound constant (`a`, `c̃(ε)`, `k`, …).
    pub value: f64,
    /// Companion offset (`a·b`, `ε`, …), see `description`.
    pub offset: f64,
    /// Largest generalized eigenvalue before clipping at zero.
    pub raw: f64,
    pub description: String,
    pub subspace: Subspace,
    /// Extremal vector on the full grid (zero off the subspace), as `[re, im]`.
    pub witness: Vec<[f64; 2]>,
    pub points: usize,
}

impl PencilEstimate {
    pub fn witness_vector(&self) -> Vec<c64> {
        self.witness.iter().map(|&[re, im]| c64::new(re, im)).collect()
    }
}

/// Embeds a vector on `keep` into the full index range.
fn embed(v: &[c64], keep: &[usize], m: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0, 0.0]; m];
    for (z, &p) in v.iter().zip(keep) {
        out[p] = [z.re, z.im];
    }
    out
}

fn check_pair(a: &CMat, b: &CMat, g: &GridSpec) -> Result<()> {
    let m = g.size();
    for (name, x) in [("A", a), ("B", b)] {
        if x.nrows() != m || x.ncols() != m {
            return Err(Error::DimensionMismatch(format!("{name} is {}x{}, grid has M = {m}", x.nrows(), x.ncols())));
        }
    }
    Ok(())
}

fn gram(a: &CMat) -> CMat {
    let mut out = CMat::zeros(a.ncols(), a.ncols());
    faer::linalg::matmul::matmul(out.as_mut(), faer::Accum::Replace, a.adjoint(), a.as_ref(), ONE, faer::Par::Seq);
    linalg::hermitian_part(&out)
}

/// For each offset `b > 0`, the smallest `a` with
/// `‖Bu‖² ≤ a (‖Au‖² + b‖u‖²)` on the subspace, i.e. the top eigenvalue of the
/// pencil `(B†B, A†A + b)`. The companion offset reported is `a·b`.
pub fn relative_bound(a: &CMat, b: &CMat, g: &GridSpec, b_samples: &[f64], sub: Subspace) -> Result<Vec<PencilEstimate>> {
    check_pair(a, b, g)?;
    let keep = sub.indices(g);
    let ata = linalg::restrict(&gram(a), &keep);
    let btb = linalg::restrict(&gram(b), &keep);
    let mut out = Vec::with_capacity(b_samples.len());
    for &offset in b_samples {
        if !(offset > 0.0 && offset.is_finite()) {
            return Err(Error::SingularPencil(format!("offset b = {offset} must be positive")));
        }
        let mut rhs = ata.clone();
        for i in 0..rhs.nrows() {
            rhs[(i, i)] += linalg::real(offset);
        }
        let ext = linalg::pencil_max(&btb, &rhs)?;
        let value = ext.value.max(0.0);
        out.push(PencilEstimate {
            value,
            offset: value * offset,
            raw: ext.value,
            description: format!("‖Bu‖² ≤ a‖Au‖² + a·b‖u‖² with b = {offset}"),
            subspace: sub,
            witness: embed(&ext.vector, &keep, g.size()),
            points: g.points,
        });
    }
    Ok(out)
}

/// For each `ε > 0` and both signs, `c̃ = max(0, λ_max(K± − εA†A))` with
/// `K± = ±i(A†B − B†A)`, so that `±i(⟨Au,Bu⟩ − ⟨Bu,Au⟩) ≤ ε‖Au‖² + c̃‖u‖²`.
pub fn commutator_bound(a: &CMat, b: &CMat, g: &GridSpec, eps_list: &[f64], sub: Subspace) -> Result<Vec<PencilEstimate>> {
    check_pair(a, b, g)?;
    let keep = sub.indices(g);
    let atb = mul(a.adjoint(), b.as_ref());
    let n = g.size();
    let k_plus = CMat::from_fn(n, n, |i, j| c64::new(0.0, 1.0) * (atb[(i, j)] - atb[(j, i)].conj()));
    let k_plus = linalg::restrict(&linalg::hermitian_part(&k_plus), &keep);
    let ata = linalg::restrict(&gram(a), &keep);
    let id = linalg::identity(keep.len());
    let mut out = Vec::with_capacity(2 * eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("ε = {eps} must be positive")));
        }
        for (sign, label) in [(1.0, "+"), (-1.0, "−")] {
            let form = CMat::from_fn(keep.len(), keep.len(), |i, j| k_plus[(i, j)] * sign - ata[(i, j)] * eps);
            let ext = linalg::pencil_max(&form, &id)?;
            out.push(PencilEstimate {
                value: ext.value.max(0.0),
                offset: eps,
                raw: ext.value,
                description: format!("{label}i(⟨Au,Bu⟩ − ⟨Bu,Au⟩) ≤ ε‖Au‖² + c‖u‖² with ε = {eps}"),
                subspace: sub,
                witness: embed(&ext.vector, &keep, g.size()),
                points: g.points,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryStatus {
    Satisfied,
    Informational,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CFEntry {
    pub condition: String,
    pub status: EntryStatus,
    pub value: Option<f64>,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionEstimate {
    pub points: usize,
    pub spacing: f64,
    /// `k = b₈`.
    pub k: f64,
    /// Smallest `b₉` with `sym M ⪯ kΦ + b₉` on the subspace.
    pub b9: f64,
    pub estimate: PencilEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Supported,
    NotSupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CFReport {
    pub field: String,
    pub shift: f64,
    pub entries: Vec<CFEntry>,
    pub k: f64,
    pub b8: f64,
    pub b9: f64,
    /// `b₉/b₈`, absent when `b₈ = 0`.
    pub implied_shift: Option<f64>,
    pub trend: Vec<ResolutionEstimate>,
    /// `|k_last − k_first| / max(k_first, K_FLOOR)`.
    pub drift: f64,
    pub verdict: Verdict,
}

impl CFReport {
    pub fn entry(&self, condition: &str) -> Option<&CFEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }
}

/// `max |G + G† + Φ|`, computed directly from the stored matrices.
pub fn form_residual(sys: &LindbladSystem) -> f64 {
    let (g, phi) = (sys.g(), sys.phi());
    let m = sys.size();
    let mut worst = 0.0_f64;
    for j in 0..m {
        for i in 0..m {
            worst = worst.max((g[(i, j)] + g[(j, i)].conj() + phi[(i, j)]).norm());
        }
    }
    worst
}

/// Whether `C − Φ` equals `σI` entry by entry.
pub fn shift_is_exact(sys: &LindbladSystem) -> bool {
    let m = sys.size();
    let sigma = linalg::real(sys.shift());
    (0..m).all(|j| {
        (0..m).all(|i| {
            let d = sys.c()[(i, j)] - sys.phi()[(i, j)];
            if i == j {
                d == sigma
            } else {
                d == linalg::ZERO
            }
        })
    })
}

/// `sym(CG + G†C + Σ L_l† C L_l)`.
pub fn dissipation_form(sys: &LindbladSystem) -> CMat {
    use faer::linalg::matmul::matmul;
    use faer::{Accum, Par};
    let c = sys.c();
    let mut out = mul(c.as_ref(), sys.g().as_ref());
    matmul(out.as_mut(), Accum::Add, sys.g().adjoint(), c.as_ref(), ONE, Par::Seq);
    let m = sys.size();
    let mut scratch = CMat::zeros(m, m);
    for l in sys.lindblad_ops() {
        linalg::mul_into(scratch.as_mut(), Accum::Replace, c.as_ref(), l.as_ref(), ONE);
        matmul(out.as_mut(), Accum::Add, l.adjoint(), scratch.as_ref(), ONE, Par::Seq);
    }
    linalg::hermitian_part(&out)
}

/// `k = max(0, λ_max(sym M, C))` and the implied `b₉` on the subspace.
pub fn dissipation_constant(sys: &LindbladSystem, sub: Subspace) -> Result<ResolutionEstimate> {
    let g = sys.grid();
    let keep = sub.indices(g);
    let form = linalg::restrict(&dissipation_form(sys), &keep);
    let c = linalg::restrict(sys.c(), &keep);
    if linalg::min_eigenvalue(&c)? <= 0.0 {
        return Err(Error::SingularPencil("C is not positive definite on the subspace; use a positive shift".into()));
    }
    let ext = linalg::pencil_max(&form, &c)?;
    let k = ext.value.max(0.0);
    let phi = linalg::restrict(sys.phi(), &keep);
    let rest = CMat::from_fn(keep.len(), keep.len(), |i, j| form[(i, j)] - phi[(i, j)] * k);
    let b9 = linalg::max_eigenvalue(&rest)?.max(0.0);
    Ok(ResolutionEstimate {
        points: g.points,
        spacing: g.spacing(),
        k,
        b9,
        estimate: PencilEstimate {
            value: k,
            offset: b9,
            raw: ext.value,
            description: "sym(CG + G†C + ΣL†CL) ⪯ k C".into(),
            subspace: sub,
            witness: embed(&ext.vector, &keep, g.size()),
            points: g.points,
        },
    })
}

/// Checks conditions (a)–(e) on `sys` and estimates `k` at each resolution in
/// `resolutions` (points per axis, same box and field).
pub fn cf_check(sys: &LindbladSystem, resolutions: &[usize], bulk_width: usize) -> Result<CFReport> {
    if resolutions.is_empty() {
        return Err(Error::InvalidArgument("cf_check needs at least one resolution".into()));
    }
    let sub = Subspace::Bulk { width: bulk_width };
    let phi_max = linalg::max_abs(sys.phi().as_ref());
    let residual = form_residual(sys);
    let exact = shift_is_exact(sys);
    let c_minus_phi = sys.c() - sys.phi();
    let lam = linalg::min_eigenvalue(&c_minus_phi)?;

    let mut trend = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let est = if n == sys.grid().points {
            dissipation_constant(sys, sub)?
        } else {
            let g = sys.grid().with_points(n)?;
            let other = assemble(sys.field(), &g, sys.shift())?;
            dissipation_constant(&other, sub)?
        };
        trend.push(est);
    }
    let first = trend[0].k;
    let last = trend[trend.len() - 1].k;
    let drift = (last - first).abs() / first.abs().max(K_FLOOR);
    let own = trend
        .iter()
        .find(|t| t.points == sys.grid().points)
        .unwrap_or(&trend[trend.len() - 1]);
    let (k, b9) = (own.k, own.b9);
    let finite = trend.iter().all(|t| t.k.is_finite());
    let trend_ok = finite && (trend.len() < 2 || drift <= MAX_K_DRIFT);

    let residual_ok = residual <= 1e-12 * (1.0 + phi_max);
    let entries = vec![
        CFEntry {
            condition: "a".into(),
            status: EntryStatus::Informational,
            value: None,
            evidence: "finite dimension: every operator is everywhere defined, domain inclusions are vacuous".into(),
        },
        CFEntry {
            condition: "b".into(),
            status: EntryStatus::Informational,
            value: None,
            evidence: "finite dimension: the whole space is a core".into(),
        },
        CFEntry {
            condition: "c".into(),
            status: if residual_ok { EntryStatus::Satisfied } else { EntryStatus::Failed },
            value: Some(residual),
            evidence: format!("max |G + G† + Φ| = {residual:e} (limit {:e})", 1e-12 * (1.0 + phi_max)),
        },
        CFEntry {
            condition: "d".into(),
            status: if exact { EntryStatus::Satisfied } else { EntryStatus::Failed },
            value: Some(lam),
            evidence: format!("C − Φ = σI entrywise: {exact}; λ_min(C − Φ) = {lam} with σ = {}", sys.shift()),
        },
        CFEntry {
            condition: "e".into(),
            status: if trend_ok { EntryStatus::Satisfied } else { EntryStatus::Failed },
            value: Some(k),
            evidence: format!(
                "k = {k} on bulk({bulk_width}); per resolution {:?}; drift {drift:.3} (limit {MAX_K_DRIFT})",
                trend.iter().map(|t| (t.points, t.k)).collect::<Vec<_>>()
            ),
        },
    ];
    let verdict = if entries.iter().all(|e| e.status != EntryStatus::Failed) {
        Verdict::Supported
    } else {
        Verdict::NotSupported
    };
    Ok(CFReport {
        field: sys.field().label().to_string(),
        shift: sys.shift(),
        entries,
        k,
        b8: k,
        b9,
        implied_shift: (k > 0.0).then(|| b9 / k),
        trend,
        drift,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormBound {
    pub c4: f64,
    /// `min_x (4c₄|W|² − F(x))` with `F = −4 Σ W_l (W_k)_l W_k`.
    pub margin: f64,
    pub witness: Vec<f64>,
    /// `margin ≥ −10⁻¹⁰`.
    pub holds: bool,
}

/// Pointwise comparison of the diagonal form `F` with `4c₄|W|²` on the grid.
pub fn c4_form_bound(w: &VectorField, g: &GridSpec, c4: f64) -> Result<FormBound> {
    if w.dim() != g.dim {
        return Err(Error::DimensionMismatch(format!("field d={} vs grid d={}", w.dim(), g.dim)));
    }
    if !(c4 >= 0.0 && c4.is_finite()) {
        return Err(Error::InvalidArgument(format!("c₄ = {c4} must be finite and ≥ 0")));
    }
    let d = g.dim;
    let mut margin = f64::INFINITY;
    let mut witness = Vec::new();
    for x in g.points_iter() {
        let wv = w.values(&x);
        let mut f = 0.0;
        for l in 0..d {
            for k in 0..d {
                let jac = w.first(&x, k, l);
                if !jac.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("(W_{})_{} at {x:?}", k + 1, l + 1),
                        value: jac,
                    });
                }
                f -= 4.0 * wv[l] * jac * wv[k];
            }
        }
        let w2: f64 = wv.iter().map(|v| v * v).sum();
        let gap = 4.0 * c4 * w2 - f;
        if gap < margin {
            margin = gap;
            witness = x;
        }
    }
    Ok(FormBound {
        c4,
        margin,
        witness,
        holds: margin >= -1e-10,
    })
}

/// Writes a witness as `index re im` columns.
pub fn write_witness(path: &Path, est: &PencilEstimate) -> Result<()> {
    let mut buf = Vec::new();
    let io = |e| Error::io(path, e);
    writeln!(buf, "# {}", est.description).map_err(io)?;
    for (i, [re, im]) in est.witness.iter().enumerate() {
        writeln!(buf, "{i} {re:.17e} {im:.17e}").map_err(io)?;
    }
    std::fs::write(path, buf).map_err(io)
}
