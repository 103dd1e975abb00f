//! Constraint operators, the quadratic forms counting violated
//! independence constraints, and their spectra.
//!
//! The operators act on `R^{S_m^n} ⊗ R^{m−1}`: one row of an encoding `g`
//! at a time, rows being independent. Dense matrices are indexed by
//! `profile * (m − 1) + column`.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::Model;
use crate::perm::{factorial, ProfileSpace};
use crate::repr::{eye, project_to_lin, Basis, Mat, MatrixField};

/// Largest `m` for which the `m!×m!` one-voter matrices are materialized.
pub const MAX_DENSE_M: usize = 6;

/// Default largest dimension handed to the dense eigensolver.
pub const DEFAULT_DENSE_LIMIT: usize = 5000;

/// Work budget for exhaustive neighbourhood sums, in visited pairs.
pub const PAIR_BUDGET: f64 = 2e9;

/// Eigenvalues closer than this are counted as one cluster.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Eigenvalues below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-9;

/// Dense one-voter operators.
#[derive(Clone, Debug)]
pub struct LaplacianBundle {
    pub m: usize,
    /// `X^j_{xy} = 1[x⁻¹(j) = y⁻¹(j)]`.
    pub x: Vec<Mat>,
    /// `D^j = C_jᵀ C_j`.
    pub d: Vec<Mat>,
}

impl LaplacianBundle {
    /// `Y^j = (m−1)!·I − X^j`, the Laplacian of the graph `X^j`.
    pub fn y(&self, j: usize) -> Mat {
        let n = self.x[j - 1].nrows();
        eye(n) * factorial(self.m - 1) as f64 - &self.x[j - 1]
    }

    /// `L = Σ_j Y^j ⊗ D^j`.
    pub fn fourier_operator(&self) -> Mat {
        (1..=self.m).fold(Mat::zeros(0, 0), |acc, j| {
            let term = self.y(j).kronecker(&self.d[j - 1]);
            if acc.is_empty() {
                term
            } else {
                acc + term
            }
        })
    }
}

pub fn build_one_voter(m: usize, basis: &Basis) -> Result<LaplacianBundle> {
    if !(2..=MAX_DENSE_M).contains(&m) {
        return Err(Error::OutOfRange {
            m,
            min: 2,
            max: MAX_DENSE_M,
        });
    }
    if basis.m() != m {
        return Err(Error::Shape("basis has a different m".into()));
    }
    let group = crate::perm::SymmetricGroup::new(m)?;
    let s = group.order();
    let x = (1..=m)
        .map(|j| {
            Mat::from_fn(s, s, |a, b| {
                if group.rank(a, j) == group.rank(b, j) {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect();
    let d = (1..=m).map(|j| basis.d(j)).collect();
    Ok(LaplacianBundle { m, x, d })
}

#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
}

/// Groups sorted eigenvalues whose consecutive gaps are below `tol`.
pub fn cluster(sorted: &[f64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some((sum, count, last)) if (v - *last).abs() <= tol => {
                *sum += v;
                *count += 1;
                *last = v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter()
        .map(|(sum, count, _)| Cluster {
            value: sum / count as f64,
            multiplicity: count,
        })
        .collect()
}

fn sorted_eigen(m: Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// The reduced one-voter operator on the standard-representation block.
#[derive(Clone, Debug)]
pub struct HatL1System {
    pub m: usize,
    /// `(1/(m−1))((m−1)/m·I − Σ_j D^j ⊗ D^j)`.
    pub matrix: Mat,
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// Eigenvectors for the zero, `1/(m(m−1))` and `1/m` eigenvalues.
    pub u0: Mat,
    pub u1: Mat,
    pub u2: Mat,
    /// Rows `C_j ⊗ C_j`.
    pub e: Mat,
}

impl HatL1System {
    /// `max |EEᵀ − ((m−2)/m·I + J/m²)|`.
    pub fn eet_residual(&self) -> f64 {
        let m = self.m as f64;
        let expect = eye(self.m) * ((m - 2.0) / m)
            + Mat::from_element(self.m, self.m, 1.0 / (m * m));
        (&self.e * self.e.transpose() - expect).abs().max()
    }

    /// The kernel vector read as an `(m−1)×(m−1)` matrix, scaled to unit
    /// diagonal.
    pub fn u0_matrix(&self) -> Mat {
        let d = self.m - 1;
        let v = self.u0.column(0);
        let scale = v[0];
        Mat::from_fn(d, d, |a, b| v[a * d + b] / scale)
    }
}

pub fn hat_l1(m: usize) -> Result<HatL1System> {
    if m < 3 {
        return Err(Error::Degenerate(format!(
            "the reduced operator needs m ≥ 3 (got m = {m})"
        )));
    }
    if m > crate::perm::MAX_ENUM_M {
        return Err(Error::OutOfRange {
            m,
            min: 3,
            max: crate::perm::MAX_ENUM_M,
        });
    }
    let basis = Basis::helmert(m)?;
    let d = m - 1;
    let mf = m as f64;
    let mut sum = Mat::zeros(d * d, d * d);
    let mut e = Mat::zeros(m, d * d);
    for j in 1..=m {
        let dj = basis.d(j);
        sum += dj.kronecker(&dj);
        let cj = basis.row(j);
        let row = cj.kronecker(&cj);
        e.row_mut(j - 1).copy_from(&row);
    }
    let matrix = (eye(d * d) * ((mf - 1.0) / mf) - sum) / (mf - 1.0);
    let (eigenvalues, vectors) = sorted_eigen(matrix.clone());
    let clusters = cluster(&eigenvalues, CLUSTER_TOL);
    let pick = |target: f64| {
        let cols: Vec<usize> = (0..eigenvalues.len())
            .filter(|&i| (eigenvalues[i] - target).abs() < 1e-7)
            .collect();
        Mat::from_fn(d * d, cols.len(), |r, c| vectors[(r, cols[c])])
    };
    let u0 = pick(0.0);
    let u1 = pick(1.0 / (mf * (mf - 1.0)));
    let u2 = pick(1.0 / mf);
    Ok(HatL1System {
        m,
        matrix,
        eigenvalues,
        clusters,
        u0,
        u1,
        u2,
        e,
    })
}

/// Which quadratic form to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormVariant {
    /// `Σ_j X^j ⊗ X̄^j` on the indicator tensor: counts pairs whose
    /// `j`-profiles differ.
    Indicator,
    /// `Σ_j Y^j ⊗ X^j` on the indicator tensor.
    Laplacian,
    /// `Σ_j Y^j ⊗ D^j` on the matrix encoding.
    Fourier,
}

/// Indicator tensor `F_{x,K}`; weights need not come from a function.
#[derive(Clone, Debug)]
pub struct IndicatorField {
    pub space: ProfileSpace,
    pub cosets: usize,
    /// Row-major `[profile][coset]`.
    pub weights: Vec<f64>,
}

impl IndicatorField {
    /// `F_{x,K} = 1[f(x) = K]`.
    pub fn from_table(space: ProfileSpace, cosets: usize, table: &[u32]) -> Result<Self> {
        if table.len() != space.size {
            return Err(Error::Shape("table size differs from profile count".into()));
        }
        let mut weights = vec![0.0; space.size * cosets];
        for (p, &k) in table.iter().enumerate() {
            weights[p * cosets + k as usize] = 1.0;
        }
        Ok(IndicatorField {
            space,
            cosets,
            weights,
        })
    }

    fn row(&self, p: usize) -> &[f64] {
        &self.weights[p * self.cosets..(p + 1) * self.cosets]
    }
}

pub enum FormInput<'a> {
    Indicator(&'a IndicatorField),
    Encoding(&'a MatrixField),
}

fn check_budget(model: &Model, n: usize, what: &str) -> Result<()> {
    let work = n as f64 * model.m() as f64 * (model.order() as f64).powi(n as i32 + 1);
    if work > PAIR_BUDGET {
        return Err(Error::budget(what, work, PAIR_BUDGET));
    }
    Ok(())
}

/// Profiles whose voter-`i` digit is zero: one per slice `x^{−i}`.
fn slice_bases(space: ProfileSpace, i: usize) -> Vec<usize> {
    (0..space.size).filter(|&p| space.digit(p, i) == 0).collect()
}

/// Evaluates a form divided by `|S_m|^{n+1}`, before any rescaling to the
/// canonical independence measure.
pub fn apply_quadratic_form(
    input: FormInput<'_>,
    model: &Model,
    variant: FormVariant,
    exec: Exec,
) -> Result<f64> {
    let space = match &input {
        FormInput::Indicator(f) => f.space,
        FormInput::Encoding(g) => g.space,
    };
    if space.group_order != model.order() {
        return Err(Error::Shape("input is over a different group".into()));
    }
    check_budget(model, space.n, "quadratic form evaluation")?;
    let raw = match (variant, input) {
        (FormVariant::Fourier, FormInput::Encoding(g)) => fourier_sum(g, model, exec)?,
        (FormVariant::Indicator | FormVariant::Laplacian, FormInput::Indicator(f)) => {
            if f.cosets != model.h.coset_count() {
                return Err(Error::Shape("indicator width differs from coset count".into()));
            }
            indicator_sum(f, model, variant, exec)
        }
        _ => {
            return Err(Error::Shape(format!(
                "{variant:?} form needs the other encoding"
            )))
        }
    };
    Ok(raw / (model.order() as f64).powi(space.n as i32 + 1))
}

fn indicator_sum(f: &IndicatorField, model: &Model, variant: FormVariant, exec: Exec) -> f64 {
    let space = f.space;
    let m = model.m();
    let k = f.cosets;
    let deg = factorial(m - 1) as f64;
    let mut total = 0.0;
    for i in 0..space.n {
        let w = space.weight(i);
        let bases = slice_bases(space, i);
        total += exec.sum_f64(bases.len(), |b| {
            let base = bases[b];
            let mut acc = 0.0;
            for j in 1..=m {
                let nprof = model.h.distinct_profiles(j).len();
                let mut grouped = vec![0.0; nprof];
                let grouped_sq = |v: &[f64], grouped: &mut Vec<f64>| {
                    grouped.iter_mut().for_each(|g| *g = 0.0);
                    for (kk, &val) in v.iter().enumerate() {
                        grouped[model.h.profile_id(kk, j)] += val;
                    }
                    grouped.iter().map(|g| g * g).sum::<f64>()
                };
                let mut class_term = 0.0;
                let mut s = vec![0.0; k];
                for class in &model.classes[j - 1] {
                    s.iter_mut().for_each(|v| *v = 0.0);
                    for &e in class {
                        for (sv, fv) in s.iter_mut().zip(f.row(base + e as usize * w)) {
                            *sv += fv;
                        }
                    }
                    let sq = grouped_sq(&s, &mut grouped);
                    class_term += match variant {
                        FormVariant::Indicator => {
                            let tot: f64 = s.iter().sum();
                            tot * tot - sq
                        }
                        _ => -sq,
                    };
                }
                if variant == FormVariant::Laplacian {
                    for e in 0..model.order() {
                        class_term += deg * grouped_sq(f.row(base + e * w), &mut grouped);
                    }
                }
                acc += class_term;
            }
            acc
        });
    }
    total
}

fn fourier_sum(g: &MatrixField, model: &Model, exec: Exec) -> Result<f64> {
    let m = model.m();
    if g.cols != m - 1 {
        return Err(Error::Shape(format!(
            "encoding has {} columns, expected {}",
            g.cols,
            m - 1
        )));
    }
    let space = g.space;
    let deg = factorial(m - 1) as f64;
    let cols: Vec<_> = (1..=m).map(|j| model.basis.row(j).transpose()).collect();
    let mut total = 0.0;
    for i in 0..space.n {
        let w = space.weight(i);
        let bases = slice_bases(space, i);
        total += exec.sum_f64(bases.len(), |b| {
            let base = bases[b];
            let mut acc = 0.0;
            for j in 1..=m {
                let cj = &cols[j - 1];
                let u: Vec<_> = (0..model.order())
                    .map(|e| &g.values[base + e * w] * cj)
                    .collect();
                acc += deg * u.iter().map(|v| v.norm_squared()).sum::<f64>();
                for class in &model.classes[j - 1] {
                    let mut s = nalgebra::DVector::zeros(g.rows);
                    for &e in class {
                        s += &u[e as usize];
                    }
                    acc -= s.norm_squared();
                }
            }
            acc
        });
    }
    Ok(total)
}

/// Rescaling of the Fourier form to the canonical measure: the form counts
/// each unordered pair once and the canonical measure counts ordered pairs.
pub const FOURIER_KAPPA: f64 = 2.0;

/// Canonical (ordered-pair, squared profile distance) independence measure
/// of an encoding, evaluated through the Fourier form.
pub fn apply_ln(g: &MatrixField, model: &Model, exec: Exec) -> Result<f64> {
    Ok(FOURIER_KAPPA * apply_quadratic_form(FormInput::Encoding(g), model, FormVariant::Fourier, exec)?)
}

/// Closed-form rescaling of a form to the canonical measure, when one
/// exists for the subgroup.
pub fn derived_kappa(model: &Model, variant: FormVariant) -> Option<f64> {
    match variant {
        FormVariant::Fourier => Some(FOURIER_KAPPA),
        FormVariant::Indicator | FormVariant::Laplacian => {
            // Constant only when every pair of distinct j-profiles sits at
            // the same distance.
            let mut value: Option<f64> = None;
            for j in 1..=model.m() {
                let profs = model.h.distinct_profiles(j);
                for a in 0..profs.len() {
                    for b in a + 1..profs.len() {
                        let d = profs[a].dist2(&profs[b]);
                        match value {
                            None => value = Some(d),
                            Some(v) if (v - d).abs() > 1e-12 => return None,
                            _ => {}
                        }
                    }
                }
            }
            value
        }
    }
}

/// Dense `L^n / |S_m|`.
pub fn dense_ln(model: &Model, n: usize, dense_limit: usize) -> Result<Mat> {
    let m = model.m();
    let s = model.order();
    let space = ProfileSpace::new(s, n)?;
    let d = m - 1;
    let dim = space.size.saturating_mul(d);
    if dim > dense_limit {
        return Err(Error::budget("dense operator", dim as f64, dense_limit as f64));
    }
    let dmats: Vec<Mat> = (1..=m).map(|j| model.basis.d(j)).collect();
    let mut out = Mat::zeros(dim, dim);
    let diag = n as f64 * (factorial(m - 1) as f64 - 1.0);
    for p in 0..space.size {
        for a in 0..d {
            out[(p * d + a, p * d + a)] = diag;
        }
        for i in 0..n {
            let e = space.digit(p, i);
            for e2 in 0..s {
                if e2 == e {
                    continue;
                }
                let q = space.with_voter(p, i, e2);
                for j in 1..=m {
                    if model.group.rank(e, j) == model.group.rank(e2, j) {
                        let dj = &dmats[j - 1];
                        for a in 0..d {
                            for b in 0..d {
                                out[(p * d + a, q * d + b)] -= dj[(a, b)];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out / s as f64)
}

/// Applies `L^n / |S_m|` to a one-row field without materializing it.
pub fn apply_ln_operator(v: &MatrixField, model: &Model, exec: Exec) -> MatrixField {
    let m = model.m();
    let s = model.order();
    let space = v.space;
    let deg = factorial(m - 1) as f64;
    let dmats: Vec<Mat> = (1..=m).map(|j| model.basis.d(j)).collect();
    let values = exec.map(space.size, |p| {
        let mut acc = Mat::zeros(v.rows, v.cols);
        for i in 0..space.n {
            let e = space.digit(p, i);
            for j in 1..=m {
                let r = model.group.rank(e, j);
                let mut class_sum = Mat::zeros(v.rows, v.cols);
                for &e2 in &model.classes[j - 1][r - 1] {
                    class_sum += &v.values[space.with_voter(p, i, e2 as usize)];
                }
                acc += (&v.values[p] * deg - class_sum) * &dmats[j - 1];
            }
        }
        acc / s as f64
    });
    MatrixField::new(space, values).unwrap()
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub m: usize,
    pub n: usize,
    pub normalization: String,
    pub dimension: usize,
    /// True when every eigenvalue was computed.
    pub exhaustive: bool,
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
    pub kernel_dimension: Option<usize>,
    pub min_eigenvalue: Option<f64>,
    /// Exact smallest nonzero eigenvalue, or a Rayleigh-quotient upper
    /// bound on it when not exhaustive.
    pub gap: f64,
    pub bracket_lower: f64,
    pub bracket_upper: f64,
    pub within_bracket: bool,
}

/// Lower and upper ends of the bracket the gap must fall into.
pub fn gap_bracket(m: usize, n: usize) -> (f64, f64) {
    let mf = m as f64;
    let upper = 1.0 / (mf * (mf - 1.0));
    let lower = if n >= 2 {
        (mf - 2.0) / (mf * (mf - 1.0) * (mf - 1.0))
    } else {
        upper
    };
    (lower, upper)
}

pub fn spectral_gap(m: usize, n: usize, dense_limit: usize, exec: Exec) -> Result<SpectralReport> {
    if m < 3 {
        return Err(Error::Degenerate(format!(
            "the spectral gap is only meaningful for m ≥ 3 (got m = {m})"
        )));
    }
    let model = Model::trivial(m)?;
    spectral_gap_with(&model, n, dense_limit, exec, 0)
}

/// As [`spectral_gap`] on a prepared model; `seed` drives the matrix-free
/// fallback.
pub fn spectral_gap_with(
    model: &Model,
    n: usize,
    dense_limit: usize,
    exec: Exec,
    seed: u64,
) -> Result<SpectralReport> {
    let m = model.m();
    let space = ProfileSpace::new(model.order(), n)?;
    let dimension = space.size.saturating_mul(m - 1);
    let (lower, upper) = gap_bracket(m, n);
    let normalization = "1/|S_m|".to_string();
    if dimension <= dense_limit {
        let (eigenvalues, _) = sorted_eigen(dense_ln(model, n, dense_limit)?);
        let clusters = cluster(&eigenvalues, CLUSTER_TOL);
        let kernel = eigenvalues.iter().filter(|&&v| v < ZERO_TOL).count();
        let gap = eigenvalues
            .iter()
            .copied()
            .find(|&v| v > ZERO_TOL)
            .ok_or_else(|| Error::Degenerate("operator has no nonzero eigenvalue".into()))?;
        return Ok(SpectralReport {
            m,
            n,
            normalization,
            dimension,
            exhaustive: true,
            min_eigenvalue: eigenvalues.first().copied(),
            kernel_dimension: Some(kernel),
            within_bracket: gap >= lower - 1e-9 && gap <= upper + 1e-9,
            eigenvalues,
            clusters,
            gap,
            bracket_lower: lower,
            bracket_upper: upper,
        });
    }
    let gap = rayleigh_gap_bound(model, space, exec, seed, 300)?;
    Ok(SpectralReport {
        m,
        n,
        normalization,
        dimension,
        exhaustive: false,
        eigenvalues: Vec::new(),
        clusters: Vec::new(),
        kernel_dimension: None,
        min_eigenvalue: None,
        within_bracket: gap >= lower - 1e-9 && gap <= upper + 1e-9,
        gap,
        bracket_lower: lower,
        bracket_upper: upper,
    })
}

/// Shifted power iteration on the orthocomplement of the kernel. Every
/// Rayleigh quotient there bounds the gap from above; the smallest seen is
/// returned.
fn rayleigh_gap_bound(
    model: &Model,
    space: ProfileSpace,
    exec: Exec,
    seed: u64,
    iterations: usize,
) -> Result<f64> {
    let d = model.m() - 1;
    let shift = space.n as f64 / model.m() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..space.size * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut v = MatrixField::from_flat(space, 1, d, &flat)?;
    let deflate = |v: &MatrixField| -> Result<MatrixField> {
        let (lin, _) = project_to_lin(v, &model.rho, exec)?;
        let l = lin.to_field(space, &model.rho, exec);
        let values = v.values.iter().zip(&l.values).map(|(a, b)| a - b).collect();
        MatrixField::new(space, values)
    };
    let normalize = |v: MatrixField| -> MatrixField {
        let norm = v.mean_sq_norm(exec).sqrt();
        let values = v.values.into_iter().map(|x| x / norm).collect();
        MatrixField::new(space, values).unwrap()
    };
    v = normalize(deflate(&v)?);
    let mut best = f64::INFINITY;
    for _ in 0..iterations {
        let lv = apply_ln_operator(&v, model, exec);
        let num = exec.sum_f64(space.size, |p| v.values[p].dot(&lv.values[p]));
        let den = exec.sum_f64(space.size, |p| v.values[p].norm_squared());
        best = best.min(num / den);
        let values = v
            .values
            .iter()
            .zip(&lv.values)
            .map(|(a, b)| a * shift - b)
            .collect();
        v = normalize(deflate(&MatrixField::new(space, values)?)?);
    }
    Ok(best)
}

/// Smallest eigenvalue of `L/|S_m|` (one voter) on the orthocomplement of
/// `span{1, ρ¹_ab} ⊗ R^{m−1}`.
pub fn higher_block_floor(model: &Model) -> Result<f64> {
    let m = model.m();
    let d = m - 1;
    let s = model.order();
    let l = dense_ln(model, 1, usize::MAX)?;
    let span_dim = (1 + d * d) * d;
    let mut span = Mat::zeros(s * d, span_dim);
    let mut col = 0;
    for c in 0..d {
        for x in 0..s {
            span[(x * d + c, col)] = 1.0;
        }
        col += 1;
    }
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for x in 0..s {
                    span[(x * d + c, col)] = model.rho.get(x)[(a, b)];
                }
                col += 1;
            }
        }
    }
    let q = span.qr().q();
    let proj = eye(s * d) - &q * q.transpose();
    let restricted = &proj * l * &proj;
    let (values, _) = sorted_eigen(restricted);
    Ok(values[span_dim..].iter().copied().fold(f64::INFINITY, f64::min))
}
