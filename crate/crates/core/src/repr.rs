//! Permutation representation, the standard representation and projection
//! onto functions that are linear in each voter's standard representation.
//!
//! `P(x)_{ij} = 1[x(i) = j]`. With `compose(x, y)(r) = x(y(r))` this gives
//! `P(x)P(y) = P(compose(y, x))`, so `P` and `ρ¹` turn composition around:
//! `ρ¹(compose(x, y)) = ρ¹(y)ρ¹(x)`.

use nalgebra::{DMatrix, RowDVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::perm::{factorial, Permutation, ProfileSpace, SymmetricGroup};

pub type Mat = DMatrix<f64>;

/// `n×n` identity.
pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Orthonormal `U = [𝟏/√m | C]`.
#[derive(Clone, Debug)]
pub struct Basis {
    m: usize,
    c: Mat,
}

impl Basis {
    /// Helmert completion: column `k` is `(1, …, 1, −k, 0, …, 0)/√(k(k+1))`.
    pub fn helmert(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::OutOfRange { m, min: 2, max: usize::MAX });
        }
        let c = Mat::from_fn(m, m - 1, |i, k| {
            let k1 = k + 1;
            let norm = ((k1 * (k1 + 1)) as f64).sqrt();
            if i < k1 {
                1.0 / norm
            } else if i == k1 {
                -(k1 as f64) / norm
            } else {
                0.0
            }
        });
        Ok(Basis { m, c })
    }

    /// Another completion `C·O` for an orthogonal `(m−1)×(m−1)` matrix `O`.
    pub fn rotated(&self, o: &Mat) -> Result<Self> {
        if o.nrows() != self.m - 1 || o.ncols() != self.m - 1 {
            return Err(Error::Shape(format!(
                "rotation must be {0}x{0}",
                self.m - 1
            )));
        }
        let resid = (o.transpose() * o - eye(self.m - 1)).abs().max();
        if resid > 1e-10 {
            return Err(Error::Precondition(format!(
                "rotation is not orthogonal (residual {resid:.2e})"
            )));
        }
        Ok(Basis {
            m: self.m,
            c: &self.c * o,
        })
    }

    /// Helmert basis rotated by the orthogonal factor of a random matrix.
    pub fn random<R: Rng>(m: usize, rng: &mut R) -> Result<Self> {
        let base = Self::helmert(m)?;
        let g = Mat::from_fn(m - 1, m - 1, |_, _| rng.gen_range(-1.0..1.0));
        let q = g.qr().q();
        base.rotated(&q)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn u(&self) -> Mat {
        let m = self.m;
        let mut u = Mat::zeros(m, m);
        u.column_mut(0).fill(1.0 / (m as f64).sqrt());
        u.columns_mut(1, m - 1).copy_from(&self.c);
        u
    }

    /// Row `C_j` (1-based `j`).
    pub fn row(&self, j: usize) -> RowDVector<f64> {
        self.c.row(j - 1).into_owned()
    }

    /// `D^j = C_jᵀ C_j`.
    pub fn d(&self, j: usize) -> Mat {
        let r = self.row(j);
        r.transpose() * r
    }

    /// Largest deviation among `UᵀU = I`, `CCᵀ = I − J/m`, `CᵀC = I`,
    /// `𝟏C = 0`.
    pub fn invariant_residual(&self) -> f64 {
        let m = self.m;
        let u = self.u();
        let r1 = (u.transpose() * &u - eye(m)).abs().max();
        let proj = eye(m) - Mat::from_element(m, m, 1.0 / m as f64);
        let r2 = (&self.c * self.c.transpose() - proj).abs().max();
        let r3 = (self.c.transpose() * &self.c - eye(m - 1)).abs().max();
        let r4 = self.c.row_sum().abs().max();
        r1.max(r2).max(r3).max(r4)
    }
}

pub fn build_basis(m: usize) -> Result<Basis> {
    Basis::helmert(m)
}

pub fn perm_matrix(x: &Permutation) -> Mat {
    let m = x.m();
    Mat::from_fn(m, m, |i, j| if x.at(i + 1) == j + 1 { 1.0 } else { 0.0 })
}

/// `ρ¹(x) = Cᵀ P(x) C`.
pub fn rho1(x: &Permutation, basis: &Basis) -> Mat {
    let c = basis.c();
    let d = basis.m() - 1;
    let mut out = Mat::zeros(d, d);
    for i in 0..basis.m() {
        let xi = x.at(i + 1) - 1;
        for a in 0..d {
            let cia = c[(i, a)];
            if cia == 0.0 {
                continue;
            }
            for b in 0..d {
                out[(a, b)] += cia * c[(xi, b)];
            }
        }
    }
    out
}

/// `ρ¹` of every element of `S_m`, indexed lexicographically.
#[derive(Clone, Debug)]
pub struct Rho1Table {
    m: usize,
    mats: Vec<Mat>,
}

impl Rho1Table {
    pub fn new(group: &SymmetricGroup, basis: &Basis) -> Self {
        Rho1Table {
            m: group.m(),
            mats: group.elements().iter().map(|x| rho1(x, basis)).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, idx: usize) -> &Mat {
        &self.mats[idx]
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }
}

/// A matrix-valued function on `S_m^n`, stored per profile index.
#[derive(Clone, Debug)]
pub struct MatrixField {
    pub space: ProfileSpace,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Mat>,
}

impl MatrixField {
    pub fn new(space: ProfileSpace, values: Vec<Mat>) -> Result<Self> {
        if values.len() != space.size {
            return Err(Error::Shape(format!(
                "field has {} values for {} profiles",
                values.len(),
                space.size
            )));
        }
        let (rows, cols) = values.first().map(|v| v.shape()).unwrap_or((0, 0));
        if values.iter().any(|v| v.shape() != (rows, cols)) {
            return Err(Error::Shape("field values have differing shapes".into()));
        }
        Ok(MatrixField {
            space,
            rows,
            cols,
            values,
        })
    }

    /// Reads a flat vector laid out as `[profile][row][col]`.
    pub fn from_flat(space: ProfileSpace, rows: usize, cols: usize, v: &[f64]) -> Result<Self> {
        if v.len() != space.size * rows * cols {
            return Err(Error::Shape("flat vector has the wrong length".into()));
        }
        let block = rows * cols;
        let values = (0..space.size)
            .map(|p| Mat::from_row_slice(rows, cols, &v[p * block..(p + 1) * block]))
            .collect();
        Self::new(space, values)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.space.size * self.rows * self.cols);
        for v in &self.values {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    out.push(v[(r, c)]);
                }
            }
        }
        out
    }

    /// `E_x ‖g(x)‖²_F`.
    pub fn mean_sq_norm(&self, exec: Exec) -> f64 {
        exec.sum_f64(self.space.size, |p| self.values[p].norm_squared()) / self.space.size as f64
    }

    /// `E_x ‖g(x) − h(x)‖²_F`.
    pub fn mean_sq_dist(&self, other: &MatrixField, exec: Exec) -> f64 {
        exec.sum_f64(self.space.size, |p| (&self.values[p] - &other.values[p]).norm_squared())
            / self.space.size as f64
    }
}

/// `g(x) = B + Σ_i A[i]·ρ¹(x_i)`.
#[derive(Clone, Debug, Serialize)]
pub struct LinFunction {
    pub n: usize,
    #[serde(serialize_with = "ser_mat")]
    pub b: Mat,
    #[serde(serialize_with = "ser_mats")]
    pub a: Vec<Mat>,
}

impl LinFunction {
    pub fn evaluate(&self, digits: &[usize], table: &Rho1Table) -> Mat {
        let mut out = self.b.clone();
        for (ai, &d) in self.a.iter().zip(digits) {
            out += ai * table.get(d);
        }
        out
    }

    pub fn to_field(&self, space: ProfileSpace, table: &Rho1Table, exec: Exec) -> MatrixField {
        let values = exec.map(space.size, |p| self.evaluate(&space.decode(p), table));
        MatrixField::new(space, values).unwrap()
    }

    /// `E‖lin‖² = ‖B‖² + Σ‖A^i‖²`, by orthogonality of the coordinates.
    pub fn mean_sq_norm(&self) -> f64 {
        self.b.norm_squared() + self.a.iter().map(|a| a.norm_squared()).sum::<f64>()
    }
}

/// Least-squares projection onto `span{1, ρ¹_ab(x_i)}`:
/// `B = E g`, `A^i = E[g(x) ρ¹(x_i)ᵀ]`. Returns the projection and the
/// root-mean-square residual.
pub fn project_to_lin(
    field: &MatrixField,
    table: &Rho1Table,
    exec: Exec,
) -> Result<(LinFunction, f64)> {
    let s = table.len();
    if field.space.group_order != s {
        return Err(Error::Shape("field and table are over different groups".into()));
    }
    if field.cols != table.m() - 1 {
        return Err(Error::Shape(format!(
            "field has {} columns, expected {}",
            field.cols,
            table.m() - 1
        )));
    }
    let space = field.space;
    let total = space.size as f64;
    let zero = Mat::zeros(field.rows, field.cols);
    let b = exec
        .map_blocks(space.size, crate::exec::BLOCK, |r| {
            r.fold(zero.clone(), |acc, p| acc + &field.values[p])
        })
        .into_iter()
        .fold(zero.clone(), |acc, x| acc + x)
        / total;
    let mut a = Vec::with_capacity(space.n);
    for i in 0..space.n {
        let w = space.weight(i);
        // Sum of g over profiles whose voter-i digit is e, times ρ¹(e)ᵀ.
        let parts = exec.map(s, |e| {
            let mut acc = zero.clone();
            for p in 0..space.size {
                if (p / w) % s == e {
                    acc += &field.values[p];
                }
            }
            acc * table.get(e).transpose()
        });
        let ai = parts.into_iter().fold(zero.clone(), |acc, x| acc + x) / total;
        a.push(ai);
    }
    let lin = LinFunction { n: space.n, b, a };
    let resid2 = exec.sum_f64(space.size, |p| {
        (&field.values[p] - lin.evaluate(&space.decode(p), table)).norm_squared()
    }) / total;
    Ok((lin, resid2.sqrt()))
}

/// `E_x[(tr P(x))^k]`: multiplicity of the trivial representation in
/// `P^{⊗k}`.
pub fn trivial_multiplicity(m: usize, k: u32) -> Result<u64> {
    let group = SymmetricGroup::new(m)?;
    let total: u64 = group
        .elements()
        .iter()
        .map(|x| (x.fixed_points() as u64).pow(k))
        .sum();
    let order = factorial(m) as u64;
    if !total.is_multiple_of(order) {
        return Err(Error::Degenerate(format!(
            "character sum {total} is not divisible by {order}"
        )));
    }
    Ok(total / order)
}

#[derive(Clone, Debug, Serialize)]
pub struct SchurReport {
    pub m: usize,
    /// Max over `(a,b,c,d)` of `|Σ_x ρ¹_ab ρ¹_cd − (m!/(m−1))δ_ac δ_bd|`.
    pub residual: f64,
}

pub fn schur_diagnostics(m: usize) -> Result<SchurReport> {
    if m > 8 {
        return Err(Error::OutOfRange { m, min: 2, max: 8 });
    }
    let group = SymmetricGroup::new(m)?;
    let basis = Basis::helmert(m)?;
    let table = Rho1Table::new(&group, &basis);
    let d = m - 1;
    let mut gram = Mat::zeros(d * d, d * d);
    for x in 0..table.len() {
        let r = table.get(x);
        let v: Vec<f64> = (0..d * d).map(|k| r[(k / d, k % d)]).collect();
        for p in 0..d * d {
            if v[p] == 0.0 {
                continue;
            }
            for q in 0..d * d {
                gram[(p, q)] += v[p] * v[q];
            }
        }
    }
    let scale = factorial(m) as f64 / d as f64;
    let residual = (gram - eye(d * d) * scale).abs().max();
    Ok(SchurReport { m, residual })
}

pub(crate) fn ser_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    mat_rows(m).serialize(s)
}

pub(crate) fn ser_mats<S: serde::Serializer>(
    ms: &[Mat],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    ms.iter().map(mat_rows).collect::<Vec<_>>().serialize(s)
}

/// Row-major nested vectors.
pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}
