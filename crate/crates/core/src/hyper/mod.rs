//! Exact moment calculus for functions on S_m whose Fourier transform lives
//! on the trivial and standard representations. Every such function has the
//! form `f(x) = tr(A·P(x))` for an m×m coefficient matrix `A` with equal row
//! and column sums.
//!
//! All arithmetic here is over the rationals.

mod tables;
mod sweep;

pub use tables::{
    audit_tables, build_tables, contraction_brute_force, contraction_term, det_formula,
    gram_determinant, gram_matrix, norm4_exact, TableAudit, MomentTables,
    AuditEntry, BlockTerm, Composite, SourceAudit, PATTERN_LABELS,
};
pub use sweep::{
    hypercontractivity_check, hypercontractivity_sweep, HyperCheck, HyperSweep, Sigma,
    SIGMA_GRID,
};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::perm::enumerate_group;

pub type BigQ = BigRational;

pub(crate) fn q_int(v: i128) -> BigQ {
    BigQ::from_integer(BigInt::from(v))
}

pub(crate) fn q_frac(p: i64, q: i64) -> BigQ {
    BigQ::new(BigInt::from(p), BigInt::from(q))
}

pub(crate) fn m_pow(m: usize, k: i32) -> BigQ {
    let base = BigInt::from(m);
    if k >= 0 {
        BigQ::from_integer(num_traits::pow(base, k as usize))
    } else {
        BigQ::new(BigInt::one(), num_traits::pow(base, (-k) as usize))
    }
}

pub fn big_to_f64(q: &BigQ) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn ser_big<S: Serializer>(q: &BigQ, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

/// Square rational matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMatrix {
    m: usize,
    entries: Vec<BigQ>,
}

impl Serialize for QMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.m)
            .map(|i| (0..self.m).map(|j| self.get(i, j).to_string()).collect())
            .collect();
        rows.serialize(s)
    }
}

impl QMatrix {
    pub fn new(m: usize, entries: Vec<BigQ>) -> Result<Self> {
        if m == 0 || entries.len() != m * m {
            return Err(Error::Shape(format!(
                "expected {} entries for a {m}x{m} matrix, got {}",
                m * m,
                entries.len()
            )));
        }
        Ok(QMatrix { m, entries })
    }

    pub fn from_ints(m: usize, ints: &[i64]) -> Result<Self> {
        Self::new(m, ints.iter().map(|&v| q_int(v as i128)).collect())
    }

    pub fn identity(m: usize) -> Self {
        let entries = (0..m * m)
            .map(|k| if k / m == k % m { BigQ::one() } else { BigQ::zero() })
            .collect();
        QMatrix { m, entries }
    }

    pub fn ones(m: usize) -> Self {
        QMatrix {
            m,
            entries: vec![BigQ::one(); m * m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> &BigQ {
        &self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[BigQ] {
        &self.entries
    }

    pub fn scale(&self, c: &BigQ) -> QMatrix {
        QMatrix {
            m: self.m,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    pub fn transpose(&self) -> QMatrix {
        let m = self.m;
        QMatrix {
            m,
            entries: (0..m * m).map(|k| self.get(k % m, k / m).clone()).collect(),
        }
    }

    /// The common value of all row and column sums, if there is one.
    pub fn common_margin(&self) -> Option<BigQ> {
        let m = self.m;
        let first: BigQ = (0..m).map(|j| self.get(0, j)).sum();
        for i in 0..m {
            let row: BigQ = (0..m).map(|j| self.get(i, j)).sum();
            let col: BigQ = (0..m).map(|j| self.get(j, i)).sum();
            if row != first || col != first {
                return None;
            }
        }
        Some(first)
    }

    /// `f(x) = tr(A·P(x)) = Σ_r A[x(r)][r]` with `P(x)_{ij} = 1[x(i) = j]`.
    pub fn evaluate(&self, word: &[u8]) -> BigQ {
        word.iter()
            .enumerate()
            .map(|(r, &name)| self.get(name as usize - 1, r))
            .sum()
    }
}

fn require_margin(a: &QMatrix) -> Result<BigQ> {
    a.common_margin().ok_or_else(|| {
        Error::Precondition(
            "coefficient matrix must have all row and column sums equal".to_string(),
        )
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MomentVector {
    #[serde(serialize_with = "ser_big")]
    pub m1: BigQ,
    #[serde(serialize_with = "ser_big")]
    pub m2: BigQ,
    #[serde(serialize_with = "ser_big")]
    pub m3: BigQ,
    #[serde(serialize_with = "ser_big")]
    pub m4: BigQ,
    /// Σ_i (Σ_j A_ij²)²
    #[serde(serialize_with = "ser_big")]
    pub mr: BigQ,
    /// Σ_j (Σ_i A_ij²)²
    #[serde(serialize_with = "ser_big")]
    pub mc: BigQ,
    /// tr(A Aᵀ A Aᵀ)
    #[serde(serialize_with = "ser_big")]
    pub mq: BigQ,
}

pub fn moments(a: &QMatrix) -> MomentVector {
    let m = a.m;
    let mut m1 = BigQ::zero();
    let mut m2 = BigQ::zero();
    let mut m3 = BigQ::zero();
    let mut m4 = BigQ::zero();
    let mut rows = vec![BigQ::zero(); m];
    let mut cols = vec![BigQ::zero(); m];
    for i in 0..m {
        for j in 0..m {
            let v = a.get(i, j);
            let sq = v * v;
            m1 += v;
            m3 += &sq * v;
            m4 += &sq * &sq;
            rows[i] += &sq;
            cols[j] += &sq;
            m2 += sq;
        }
    }
    let mr = rows.iter().map(|r| r * r).sum();
    let mc = cols.iter().map(|c| c * c).sum();
    let mut mq = BigQ::zero();
    for i in 0..m {
        for j in 0..m {
            let g: BigQ = (0..m).map(|k| a.get(i, k) * a.get(j, k)).sum();
            mq += &g * &g;
        }
    }
    MomentVector {
        m1,
        m2,
        m3,
        m4,
        mr,
        mc,
        mq,
    }
}

/// Same as [`moments`] for an integer matrix, computed in `i128`.
pub fn moments_of_ints(m: usize, a: &[i64]) -> MomentVector {
    let at = |i: usize, j: usize| a[i * m + j] as i128;
    let (mut m1, mut m2, mut m3, mut m4) = (0i128, 0i128, 0i128, 0i128);
    let mut rows = vec![0i128; m];
    let mut cols = vec![0i128; m];
    for i in 0..m {
        for j in 0..m {
            let v = at(i, j);
            m1 += v;
            m2 += v * v;
            m3 += v * v * v;
            m4 += v * v * v * v;
            rows[i] += v * v;
            cols[j] += v * v;
        }
    }
    let mut mq = 0i128;
    for i in 0..m {
        for j in 0..m {
            let g: i128 = (0..m).map(|k| at(i, k) * at(j, k)).sum();
            mq += g * g;
        }
    }
    MomentVector {
        m1: q_int(m1),
        m2: q_int(m2),
        m3: q_int(m3),
        m4: q_int(m4),
        mr: q_int(rows.iter().map(|r| r * r).sum()),
        mc: q_int(cols.iter().map(|c| c * c).sum()),
        mq: q_int(mq),
    }
}

/// `E f` and `E f²` from the moments of an equal-margin coefficient matrix.
pub fn mean_and_norm2_from(mv: &MomentVector, m: usize) -> Result<(BigQ, BigQ)> {
    if m < 2 {
        return Err(Error::OutOfRange { m, min: 2, max: usize::MAX });
    }
    let mean = &mv.m1 / m_pow(m, 1);
    let cross = &mv.m1 * &mv.m1 * q_int(m as i128 - 2) / m_pow(m, 2);
    let norm2 = (&mv.m2 + cross) / q_int(m as i128 - 1);
    Ok((mean, norm2))
}

pub fn mean_and_norm2(a: &QMatrix) -> Result<(BigQ, BigQ)> {
    require_margin(a)?;
    mean_and_norm2_from(&moments(a), a.m)
}

/// `E_x f(x)^k` by enumerating S_m.
pub fn exhaustive_moment(a: &QMatrix, k: u32) -> Result<BigQ> {
    if a.m > 8 {
        return Err(Error::OutOfRange { m: a.m, min: 1, max: 8 });
    }
    let group = enumerate_group(a.m)?;
    let total: BigQ = group
        .iter()
        .map(|x| num_traits::pow(a.evaluate(x.word()), k as usize))
        .sum();
    Ok(total / q_int(group.len() as i128))
}

fn check_sigma(sigma: &BigQ) -> Result<()> {
    if sigma.is_negative() || sigma > &BigQ::one() {
        return Err(Error::Precondition(format!(
            "noise parameter must lie in [0, 1], got {sigma}"
        )));
    }
    Ok(())
}

/// Coefficient matrix of `T_t f` where `σ = e^{-t}`:
/// `A' = σA + (1 − σ)(M1/m²)J`.
pub fn apply_tt(a: &QMatrix, sigma: &BigQ) -> Result<QMatrix> {
    check_sigma(sigma)?;
    let m = a.m;
    let m1: BigQ = a.entries.iter().sum();
    let shift = (BigQ::one() - sigma) * m1 / m_pow(m, 2);
    Ok(QMatrix {
        m,
        entries: a.entries.iter().map(|v| v * sigma + &shift).collect(),
    })
}

/// Moments of `A'` from the moments of `A` alone. Exact for equal-margin `A`.
pub fn moments_after_tt(mv: &MomentVector, sigma: &BigQ, m: usize) -> Result<MomentVector> {
    check_sigma(sigma)?;
    let s = sigma;
    let tau = (BigQ::one() - s) / m_pow(m, 2);
    let m1 = &mv.m1;
    let p = |q: &BigQ, k: usize| num_traits::pow(q.clone(), k);
    let mm = |k: i32| m_pow(m, k);
    let s2 = p(s, 2);
    let s3 = p(s, 3);
    let s4 = p(s, 4);
    let t2 = p(&tau, 2);
    let t3 = p(&tau, 3);
    let t4 = p(&tau, 4);
    let m1_2 = p(m1, 2);
    let m1_3 = p(m1, 3);
    let m1_4 = p(m1, 4);
    let two = q_int(2);
    let three = q_int(3);
    let four = q_int(4);
    let six = q_int(6);

    let m2 = &s2 * &mv.m2 + &two * s * &tau * &m1_2 + &t2 * &m1_2 * mm(2);
    let m3 = &s3 * &mv.m3
        + &three * &s2 * &tau * m1 * &mv.m2
        + &three * s * &t2 * &m1_3
        + &t3 * &m1_3 * mm(2);
    let m4 = &s4 * &mv.m4
        + &four * &s3 * &tau * m1 * &mv.m3
        + &six * &s2 * &t2 * &m1_2 * &mv.m2
        + &four * s * &t3 * &m1_4
        + &t4 * &m1_4 * mm(2);
    let margin_term = |base: &BigQ| {
        &s4 * base
            + &four * &s3 * &tau * &m1_2 * &mv.m2 / mm(1)
            + &two * &s2 * &t2 * &m1_2 * &mv.m2 * mm(1)
            + &four * &s2 * &t2 * &m1_4 / mm(1)
            + &four * s * &t3 * &m1_4 * mm(1)
            + &t4 * &m1_4 * mm(3)
    };
    let mr = margin_term(&mv.mr);
    let mc = margin_term(&mv.mc);
    let mq = &s4 * &mv.mq
        + &four * &s3 * &tau * &m1_4 / mm(2)
        + &six * &s2 * &t2 * &m1_4
        + &four * s * &t3 * &m1_4 * mm(2)
        + &t4 * &m1_4 * mm(4);
    Ok(MomentVector {
        m1: m1.clone(),
        m2,
        m3,
        m4,
        mr,
        mc,
        mq,
    })
}

/// Random integer matrix with all row and column sums equal to `m·alpha`.
///
/// A uniform integer matrix `W` with entries in `-spread..=spread` is
/// projected onto zero margins and scaled by `m²` to stay integral:
/// `D = m²W − m·(row sums) − m·(column sums) + ΣW`. Then `A = alpha·J + D`.
pub fn random_equal_margin<R: Rng>(m: usize, rng: &mut R, spread: i64, alpha: i64) -> Vec<i64> {
    let w: Vec<i64> = (0..m * m).map(|_| rng.gen_range(-spread..=spread)).collect();
    project_margins(m, &w, alpha)
}

/// Like [`random_equal_margin`] but `W` has at most `support` nonzero entries.
pub fn random_sparse_equal_margin<R: Rng>(
    m: usize,
    rng: &mut R,
    support: usize,
    spread: i64,
    alpha: i64,
) -> Vec<i64> {
    let mut w = vec![0i64; m * m];
    for _ in 0..support.max(1) {
        let k = rng.gen_range(0..m * m);
        let mut v = 0;
        while v == 0 {
            v = rng.gen_range(-spread..=spread);
        }
        w[k] = v;
    }
    project_margins(m, &w, alpha)
}

fn project_margins(m: usize, w: &[i64], alpha: i64) -> Vec<i64> {
    let mi = m as i64;
    let rows: Vec<i64> = (0..m).map(|i| w[i * m..(i + 1) * m].iter().sum()).collect();
    let cols: Vec<i64> = (0..m).map(|j| (0..m).map(|i| w[i * m + j]).sum()).collect();
    let total: i64 = w.iter().sum();
    (0..m * m)
        .map(|k| {
            let (i, j) = (k / m, k % m);
            alpha + mi * mi * w[k] - mi * rows[i] - mi * cols[j] + total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ints(v: &[i128]) -> Vec<BigQ> {
        v.iter().map(|&x| q_int(x)).collect()
    }

    #[test]
    fn moment_examples() {
        let mv = moments(&QMatrix::ones(3));
        assert_eq!(
            vec![mv.m1, mv.m2, mv.m3, mv.m4, mv.mr, mv.mc, mv.mq],
            ints(&[9, 9, 9, 9, 27, 27, 81])
        );
        let mv = moments(&QMatrix::identity(3));
        assert_eq!(
            vec![mv.m1, mv.m2, mv.m3, mv.m4, mv.mr, mv.mc, mv.mq],
            ints(&[3; 7])
        );
        let mv = moments(&QMatrix::identity(3).scale(&q_int(2)));
        assert_eq!(mv.m4, q_int(48));
        assert_eq!(mv.mq, q_int(48));
    }

    #[test]
    fn integer_moments_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 2..7 {
            let a = random_equal_margin(m, &mut rng, 4, 2);
            assert_eq!(
                moments_of_ints(m, &a),
                moments(&QMatrix::from_ints(m, &a).unwrap())
            );
        }
    }

    #[test]
    fn projection_has_equal_margins() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 2..9 {
            let a = QMatrix::from_ints(m, &random_equal_margin(m, &mut rng, 5, 3)).unwrap();
            assert_eq!(a.common_margin(), Some(q_int(3 * m as i128)));
            let s = random_sparse_equal_margin(m, &mut rng, 2, 3, 0);
            let s = QMatrix::from_ints(m, &s).unwrap();
            assert_eq!(s.common_margin(), Some(BigQ::zero()));
        }
    }

    #[test]
    fn mean_and_norm2_examples() {
        let (mean, n2) = mean_and_norm2(&QMatrix::identity(3)).unwrap();
        assert_eq!(mean, q_int(1));
        assert_eq!(n2, q_int(2));
        for m in 2..6 {
            let (mean, n2) = mean_and_norm2(&QMatrix::ones(m)).unwrap();
            assert_eq!(mean, q_int(m as i128));
            assert_eq!(n2, q_int((m * m) as i128));
        }
        let mut rough = QMatrix::identity(3).entries().to_vec();
        rough[1] = q_int(5);
        assert!(mean_and_norm2(&QMatrix::new(3, rough).unwrap()).is_err());
    }

    #[test]
    fn norm2_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 2..=6 {
            for _ in 0..5 {
                let alpha = rng.gen_range(-3..=3);
                let raw = random_equal_margin(m, &mut rng, 3, alpha);
                let a = QMatrix::from_ints(m, &raw).unwrap().scale(&q_frac(1, 7));
                let (mean, n2) = mean_and_norm2(&a).unwrap();
                assert_eq!(mean, exhaustive_moment(&a, 1).unwrap());
                assert_eq!(n2, exhaustive_moment(&a, 2).unwrap());
            }
        }
    }

    #[test]
    fn semigroup_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = QMatrix::from_ints(4, &random_equal_margin(4, &mut rng, 3, 2)).unwrap();
        assert_eq!(apply_tt(&a, &BigQ::one()).unwrap(), a);
        let flat = apply_tt(&a, &BigQ::zero()).unwrap();
        let mean = mean_and_norm2(&a).unwrap().0;
        for x in enumerate_group(4).unwrap() {
            assert_eq!(flat.evaluate(x.word()), mean);
        }
        assert!(apply_tt(&a, &q_int(2)).is_err());
        assert!(moments_after_tt(&moments(&a), &q_int(-1), 4).is_err());
    }

    #[test]
    fn transfer_formulas_match_direct_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 3..=6 {
            for k in 0..6 {
                let a = QMatrix::from_ints(m, &random_equal_margin(m, &mut rng, 4, k - 2))
                    .unwrap()
                    .scale(&q_frac(1, 3));
                let sigma = q_frac(rng.gen_range(0..=8), 8);
                let direct = moments(&apply_tt(&a, &sigma).unwrap());
                let transfer = moments_after_tt(&moments(&a), &sigma, m).unwrap();
                assert_eq!(direct, transfer, "m={m} sigma={sigma}");
            }
        }
    }

    #[test]
    fn semigroup_scales_centered_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = QMatrix::from_ints(4, &random_equal_margin(4, &mut rng, 3, 1)).unwrap();
        let sigma = q_frac(1, 2);
        let b = apply_tt(&a, &sigma).unwrap();
        let mean = mean_and_norm2(&a).unwrap().0;
        for x in enumerate_group(4).unwrap() {
            let expect = &sigma * a.evaluate(x.word()) + (BigQ::one() - &sigma) * &mean;
            assert_eq!(b.evaluate(x.word()), expect);
        }
    }
}
