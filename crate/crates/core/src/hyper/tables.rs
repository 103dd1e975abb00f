//! The fourth moment `E f⁴ = tr(A⊗⁴ Q)` where `Q = E_x P(x)⊗⁴` is the
//! projector onto the vectors of `(R^m)⊗⁴` fixed by every `P(x)⊗⁴`.
//!
//! For m ≥ 4 that space has dimension 15, one basis vector per set partition
//! of the four tensor slots `{i,j,k,l}`: the vector is 1 on index tuples that
//! are constant on each block. With `E` the 15×m⁴ matrix of these vectors and
//! `C = EEᵀ`, `Q = Eᵀ C⁻¹ E` and `E f⁴ = tr(E A⊗⁴ Eᵀ C⁻¹)`.
//!
//! Each entry of `E A⊗⁴ Eᵀ` is a contraction of four copies of `A` whose row
//! indices are tied by one partition and column indices by another. For an
//! equal-margin `A` it reduces to a single monomial in the seven moments,
//! derived here by peeling pendant edges off the contraction multigraph.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    exhaustive_moment, m_pow, moments_of_ints, q_int, random_equal_margin, require_margin,
    moments, BigQ, MomentVector, QMatrix,
};
use crate::error::{Error, Result};

/// Slot partitions in basis order. Entry `p` is the block label of slot `p`.
const PATTERNS: [[u8; 4]; 15] = [
    [0, 1, 2, 3],
    [0, 0, 1, 2],
    [0, 1, 0, 2],
    [0, 1, 2, 0],
    [0, 1, 1, 2],
    [0, 1, 2, 1],
    [0, 1, 2, 2],
    [0, 0, 1, 1],
    [0, 1, 0, 1],
    [0, 1, 1, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
    [0, 1, 1, 1],
    [0, 0, 0, 0],
];

/// Tied slots of each basis vector, in basis order.
pub const PATTERN_LABELS: [&str; 15] = [
    "-", "ij", "ik", "il", "jk", "jl", "kl", "ij|kl", "ik|jl", "il|jk", "ijk", "ijl", "ikl",
    "jkl", "ijkl",
];

const GROUP_OFFSETS: [usize; 6] = [0, 1, 7, 10, 14, 15];

fn group_of(a: usize) -> usize {
    GROUP_OFFSETS.iter().rposition(|&o| o <= a).unwrap() + 1
}

fn label(a: usize) -> String {
    format!("E{}[{}]", group_of(a), PATTERN_LABELS[a])
}

fn block_count(p: &[u8; 4]) -> usize {
    *p.iter().max().unwrap() as usize + 1
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra] = rb;
    }
}

/// Number of blocks of the finest partition coarser than both.
fn join_blocks(a: &[u8; 4], b: &[u8; 4]) -> usize {
    let mut parent = [0, 1, 2, 3];
    for p in 0..4 {
        for q in p + 1..4 {
            if a[p] == a[q] || b[p] == b[q] {
                union(&mut parent, p, q);
            }
        }
    }
    (0..4).filter(|&p| find(&mut parent, p) == p).count()
}

/// Products of moments that can appear in a block entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Composite {
    #[serde(rename = "M1^4")]
    M1Pow4,
    #[serde(rename = "M1*M3")]
    M1M3,
    #[serde(rename = "M1^2*M2")]
    M1SqM2,
    #[serde(rename = "M2^2")]
    M2Sq,
    M4,
    Mr,
    Mc,
    Mq,
}

impl Composite {
    pub const ALL: [Composite; 8] = [
        Composite::M1Pow4,
        Composite::M1M3,
        Composite::M1SqM2,
        Composite::M2Sq,
        Composite::M4,
        Composite::Mr,
        Composite::Mc,
        Composite::Mq,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Composite::M1Pow4 => "M1^4",
            Composite::M1M3 => "M1*M3",
            Composite::M1SqM2 => "M1^2*M2",
            Composite::M2Sq => "M2^2",
            Composite::M4 => "M4",
            Composite::Mr => "Mr",
            Composite::Mc => "Mc",
            Composite::Mq => "Mq",
        }
    }

    pub fn eval(self, mv: &MomentVector) -> BigQ {
        match self {
            Composite::M1Pow4 => num_traits::pow(mv.m1.clone(), 4),
            Composite::M1M3 => &mv.m1 * &mv.m3,
            Composite::M1SqM2 => &mv.m1 * &mv.m1 * &mv.m2,
            Composite::M2Sq => &mv.m2 * &mv.m2,
            Composite::M4 => mv.m4.clone(),
            Composite::Mr => mv.mr.clone(),
            Composite::Mc => mv.mc.clone(),
            Composite::Mq => mv.mq.clone(),
        }
    }

    /// Single-letter names used by the transcribed tables.
    fn from_letter(c: char) -> Option<Composite> {
        let idx = "abcdefgh".find(c)?;
        Some(Composite::ALL[idx])
    }

    #[cfg(test)]
    fn swap_orientation(self) -> Composite {
        match self {
            Composite::Mr => Composite::Mc,
            Composite::Mc => Composite::Mr,
            other => other,
        }
    }
}

/// `composite · m^m_power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockTerm {
    pub composite: Composite,
    pub m_power: i32,
}

impl BlockTerm {
    pub fn eval(&self, mv: &MomentVector, m: usize) -> BigQ {
        self.composite.eval(mv) * m_pow(m, self.m_power)
    }

    /// Parses `x`, `x*m`, `x*m^k`, `x/m`, `x/m^k` with `x` one of `a..h`.
    fn parse(text: &str) -> Result<BlockTerm> {
        let bad = || Error::Input(format!("bad block term {text:?}"));
        let text = text.trim();
        let mut chars = text.chars();
        let composite = chars.next().and_then(Composite::from_letter).ok_or_else(bad)?;
        let rest = chars.as_str();
        let m_power = if rest.is_empty() {
            0
        } else {
            let (sign, tail) = match (rest.strip_prefix("*m"), rest.strip_prefix("/m")) {
                (Some(t), _) => (1, t),
                (_, Some(t)) => (-1, t),
                _ => return Err(bad()),
            };
            let k = if tail.is_empty() {
                1
            } else {
                tail.strip_prefix('^')
                    .and_then(|d| d.parse::<i32>().ok())
                    .ok_or_else(bad)?
            };
            sign * k
        };
        Ok(BlockTerm { composite, m_power })
    }
}

impl std::fmt::Display for BlockTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.composite.symbol())?;
        match self.m_power {
            0 => Ok(()),
            1 => write!(f, "*m"),
            -1 => write!(f, "/m"),
            k if k > 0 => write!(f, "*m^{k}"),
            k => write!(f, "/m^{}", -k),
        }
    }
}

/// Entry `(a, b)` of `E A⊗⁴ Eᵀ` for an equal-margin `A`.
///
/// Vertices are the row blocks of pattern `a` and the column blocks of `b`;
/// slot `p` is an edge carrying `A[row][col]`. A pendant edge sums to the
/// common margin `M1/m`. What remains of each component after peeling is a
/// single edge (`M1`), a bundle of parallel edges (`M2`, `M3`, `M4`), two
/// double edges at a row (`Mr`) or column (`Mc`) vertex, or a 4-cycle (`Mq`).
pub fn contraction_term(a: usize, b: usize) -> BlockTerm {
    let edges: Vec<(usize, usize)> = (0..4)
        .map(|p| (PATTERNS[a][p] as usize, 4 + PATTERNS[b][p] as usize))
        .collect();
    let mut parent: Vec<usize> = (0..8).collect();
    for &(r, c) in &edges {
        union(&mut parent, r, c);
    }
    let mut roots: Vec<usize> = edges.iter().map(|&(r, _)| find(&mut parent, r)).collect();
    roots.sort_unstable();
    roots.dedup();

    let (mut m1, mut m2, mut m3, mut m4, mut mr, mut mc, mut mq) = (0, 0, 0, 0, 0, 0, 0);
    let mut m_power = 0;
    for root in roots {
        let mut comp: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(r, _)| find(&mut parent, r) == root)
            .collect();
        loop {
            if comp.len() == 1 {
                m1 += 1;
                break;
            }
            let degree = |v: usize, es: &[(usize, usize)]| {
                es.iter().filter(|&&(r, c)| r == v || c == v).count()
            };
            let pendant = comp
                .iter()
                .position(|&(r, c)| degree(r, &comp) == 1 || degree(c, &comp) == 1);
            if let Some(k) = pendant {
                comp.remove(k);
                m1 += 1;
                m_power -= 1;
                continue;
            }
            let mut verts: Vec<usize> = comp.iter().flat_map(|&(r, c)| [r, c]).collect();
            verts.sort_unstable();
            verts.dedup();
            match (verts.len(), comp.len()) {
                (2, 2) => m2 += 1,
                (2, 3) => m3 += 1,
                (2, 4) => m4 += 1,
                (3, 4) => {
                    let centre = verts.iter().copied().find(|&v| degree(v, &comp) == 4).unwrap();
                    if centre < 4 {
                        mr += 1;
                    } else {
                        mc += 1;
                    }
                }
                (4, 4) => mq += 1,
                shape => unreachable!("unexpected contraction core {shape:?}"),
            }
            break;
        }
    }
    let composite = match (m1, m2, m3, m4, mr, mc, mq) {
        (4, 0, 0, 0, 0, 0, 0) => Composite::M1Pow4,
        (1, 0, 1, 0, 0, 0, 0) => Composite::M1M3,
        (2, 1, 0, 0, 0, 0, 0) => Composite::M1SqM2,
        (0, 2, 0, 0, 0, 0, 0) => Composite::M2Sq,
        (0, 0, 0, 1, 0, 0, 0) => Composite::M4,
        (0, 0, 0, 0, 1, 0, 0) => Composite::Mr,
        (0, 0, 0, 0, 0, 1, 0) => Composite::Mc,
        (0, 0, 0, 0, 0, 0, 1) => Composite::Mq,
        other => unreachable!("unexpected moment product {other:?}"),
    };
    BlockTerm { composite, m_power }
}

/// Entry `(a, b)` of `E A⊗⁴ Eᵀ` by direct index summation.
pub fn contraction_brute_force(a: usize, b: usize, m: usize, ints: &[i64]) -> i128 {
    let (pa, pb) = (&PATTERNS[a], &PATTERNS[b]);
    let (na, nb) = (block_count(pa), block_count(pb));
    let total = m.pow((na + nb) as u32);
    let mut labels = vec![0usize; na + nb];
    let mut sum = 0i128;
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % m;
            c /= m;
        }
        let mut prod = 1i128;
        for p in 0..4 {
            let r = labels[pa[p] as usize];
            let col = labels[na + pb[p] as usize];
            prod *= ints[r * m + col] as i128;
        }
        sum += prod;
    }
    sum
}

/// `C = EEᵀ`: entry `(a, b)` is `m` to the number of blocks of the join.
pub fn gram_matrix(m: usize) -> Vec<Vec<BigInt>> {
    (0..15)
        .map(|a| {
            (0..15)
                .map(|b| num_traits::pow(BigInt::from(m), join_blocks(&PATTERNS[a], &PATTERNS[b])))
                .collect()
        })
        .collect()
}

/// `m¹⁵(m−1)¹⁴(m−2)⁷(m−3)`.
pub fn det_formula(m: usize) -> BigInt {
    let m = BigInt::from(m as i64);
    let one = BigInt::one();
    num_traits::pow(m.clone(), 15)
        * num_traits::pow(&m - &one, 14)
        * num_traits::pow(&m - BigInt::from(2), 7)
        * (&m - BigInt::from(3))
}

/// Determinant and, when nonsingular, inverse by exact Gauss–Jordan.
fn det_and_inverse(c: &[Vec<BigInt>]) -> (BigQ, Option<Vec<Vec<BigQ>>>) {
    let n = c.len();
    let mut a: Vec<Vec<BigQ>> = c
        .iter()
        .map(|row| row.iter().map(|v| BigQ::from_integer(v.clone())).collect())
        .collect();
    let mut inv: Vec<Vec<BigQ>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigQ::one() } else { BigQ::zero() }).collect())
        .collect();
    let mut det = BigQ::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return (BigQ::zero(), None);
        };
        if pivot != col {
            a.swap(pivot, col);
            inv.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= &p;
        for j in 0..n {
            a[col][j] /= &p;
            inv[col][j] /= &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for j in 0..n {
                let da = &factor * &a[col][j];
                a[r][j] -= da;
                let di = &factor * &inv[col][j];
                inv[r][j] -= di;
            }
        }
    }
    (det, Some(inv))
}

pub fn gram_determinant(m: usize) -> BigInt {
    det_and_inverse(&gram_matrix(m)).0.to_integer()
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightEntry {
    pub composite: Composite,
    /// Coefficient of the composite in `E f⁴`.
    pub coefficient: String,
    /// The same coefficient times `(m−1)(m−2)(m−3)`.
    pub scaled: String,
}

/// Exact tables for the fourth moment at a fixed m.
#[derive(Clone, Debug, Serialize)]
pub struct MomentTables {
    pub m: usize,
    #[serde(skip)]
    pub c15: Vec<Vec<BigInt>>,
    #[serde(serialize_with = "ser_bigint")]
    pub det: BigInt,
    pub det_matches_formula: bool,
    #[serde(skip)]
    pub c15_inv: Vec<Vec<BigQ>>,
    #[serde(skip)]
    pub terms: Vec<Vec<BlockTerm>>,
    pub weights: Vec<WeightEntry>,
    #[serde(skip)]
    weight_values: Vec<BigQ>,
}

fn ser_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn derived_table() -> Vec<Vec<BlockTerm>> {
    (0..15)
        .map(|a| (0..15).map(|b| contraction_term(a, b)).collect())
        .collect()
}

pub fn build_tables(m: usize) -> Result<MomentTables> {
    if m == 0 {
        return Err(Error::OutOfRange { m, min: 4, max: usize::MAX });
    }
    let c15 = gram_matrix(m);
    let (det, inv) = det_and_inverse(&c15);
    let det = det.to_integer();
    let Some(c15_inv) = inv else {
        return Err(Error::Degenerate(format!(
            "the 15x15 Gram matrix is singular at m = {m}; its determinant \
             m^15 (m-1)^14 (m-2)^7 (m-3) vanishes for m <= 3"
        )));
    };
    let terms = derived_table();
    let weight_values: Vec<BigQ> = Composite::ALL
        .iter()
        .map(|&k| {
            let mut w = BigQ::zero();
            for a in 0..15 {
                for b in 0..15 {
                    let t = terms[a][b];
                    if t.composite == k {
                        w += m_pow(m, t.m_power) * &c15_inv[b][a];
                    }
                }
            }
            w
        })
        .collect();
    let cubic = q_int(((m - 1) * (m - 2) * (m - 3)) as i128);
    let weights = Composite::ALL
        .iter()
        .zip(&weight_values)
        .map(|(&composite, w)| WeightEntry {
            composite,
            coefficient: w.to_string(),
            scaled: (w * &cubic).to_string(),
        })
        .collect();
    Ok(MomentTables {
        m,
        det_matches_formula: det == det_formula(m),
        c15,
        det,
        c15_inv,
        terms,
        weights,
        weight_values,
    })
}

impl MomentTables {
    /// The 15×15 matrix `E A⊗⁴ Eᵀ` assembled from the moments.
    pub fn block_matrix(&self, mv: &MomentVector) -> Vec<Vec<BigQ>> {
        self.terms
            .iter()
            .map(|row| row.iter().map(|t| t.eval(mv, self.m)).collect())
            .collect()
    }

    /// `tr(X C⁻¹)` for an arbitrary block matrix `X`.
    pub fn trace_against_inverse(&self, x: &[Vec<BigQ>]) -> BigQ {
        let mut acc = BigQ::zero();
        for a in 0..15 {
            for b in 0..15 {
                acc += &x[a][b] * &self.c15_inv[b][a];
            }
        }
        acc
    }

    /// `E f⁴` as a linear combination of the eight moment products.
    pub fn fourth_moment(&self, mv: &MomentVector) -> BigQ {
        Composite::ALL
            .iter()
            .zip(&self.weight_values)
            .map(|(k, w)| k.eval(mv) * w)
            .sum()
    }
}

pub fn norm4_exact(a: &QMatrix, tables: &MomentTables) -> Result<BigQ> {
    if a.m() != tables.m {
        return Err(Error::Shape(format!(
            "matrix is {0}x{0} but the tables are for m = {1}",
            a.m(),
            tables.m
        )));
    }
    require_margin(a)?;
    Ok(tables.fourth_moment(&moments(a)))
}

/// The block-by-block display. Blocks below the diagonal that are not listed
/// are the transposes of their mirror blocks.
fn transcribed_blocks() -> Result<Vec<Vec<BlockTerm>>> {
    let diag_off = |n: usize, d: &'static str, o: &'static str| -> Vec<Vec<&'static str>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { d } else { o }).collect())
            .collect()
    };
    let fill = |r: usize, c: usize, v: &'static str| vec![vec![v; c]; r];
    let (x, y) = ("c/m", "a/m^3");
    type Block = ((usize, usize), Vec<Vec<&'static str>>);
    let blocks: Vec<Block> = vec![
        ((1, 1), fill(1, 1, "a")),
        ((1, 2), fill(1, 6, "a/m")),
        ((1, 3), fill(1, 3, "a*m")),
        ((1, 4), fill(1, 4, "a*m")),
        ((1, 5), fill(1, 1, "a/m^2")),
        ((2, 2), diag_off(6, "c/m^2", "a/m")),
        (
            (2, 3),
            vec![
                vec![x, y, y],
                vec![y, x, y],
                vec![y, y, x],
                vec![y, y, x],
                vec![y, x, y],
                vec![x, y, y],
            ],
        ),
        (
            (2, 4),
            vec![
                vec![x, x, y, y],
                vec![x, y, x, y],
                vec![y, x, x, y],
                vec![x, y, y, x],
                vec![y, x, y, x],
                vec![y, y, x, x],
            ],
        ),
        ((2, 5), fill(6, 1, "c/m^2")),
        ((3, 3), diag_off(3, "d", "h")),
        ((3, 4), fill(3, 4, "c/m^2")),
        ((3, 5), fill(3, 1, "g")),
        ((4, 4), diag_off(4, "b/m^3", "c/m^2")),
        ((4, 5), fill(4, 1, "b/m")),
        ((5, 3), fill(1, 3, "g")),
        ((5, 5), fill(1, 1, "e")),
    ];
    let mut grid: Vec<Vec<Option<BlockTerm>>> = vec![vec![None; 15]; 15];
    for ((gi, gj), rows) in &blocks {
        let (r0, c0) = (GROUP_OFFSETS[gi - 1], GROUP_OFFSETS[gj - 1]);
        for (i, row) in rows.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                grid[r0 + i][c0 + j] = Some(BlockTerm::parse(s)?);
            }
        }
    }
    for a in 0..15 {
        for b in 0..15 {
            if grid[a][b].is_none() {
                grid[a][b] = grid[b][a];
            }
        }
    }
    Ok(grid
        .into_iter()
        .map(|row| row.into_iter().map(|t| t.expect("every block is covered")).collect())
        .collect())
}

/// The program listing of the same matrix, whose entries carry an extra
/// factor `m³`.
const LISTING: [&str; 15] = [
    "a*m^3, a*m^2,a*m^2,a*m^2,a*m^2,a*m^2,a*m^2, a*m,a*m,a*m, a*m,a*m,a*m,a*m, a",
    "a*m^2, c,a*m,a*m,a*m,a*m,a*m, c*m^2,a,a, c*m^2,c*m^2,a,a, c*m",
    "a*m^2, a*m,c,a*m,a*m,a*m,a*m, a,c*m^2,a, c*m^2,a,c*m^2,a, c*m",
    "a*m^2, a*m,a*m,c,a*m,a*m,a*m, a,a,c*m^2, a,c*m^2,c*m^2,a, c*m",
    "a*m^2, a*m,a*m,a*m,c,a*m,a*m, a,a,c*m^2, c*m^2,a,a,c*m^2, c*m",
    "a*m^2, a*m,a*m,a*m,a*m,c,a*m, a,c*m^2,a, a,c*m^2,a,c*m^2, c*m",
    "a*m^2, a*m,a*m,a*m,a*m,a*m,c, c*m^2,a,a, a,a,c*m^2,c*m^2, c*m",
    "a*m, c*m^2,a,a,a,a,c*m^2, d*m^3,h*m^3,h*m^3, c*m,c*m,c*m,c*m, f*m^3",
    "a*m, a,c*m^2,a,a,c*m^2,a, h*m^3,d*m^3,h*m^3, c*m,c*m,c*m,c*m, f*m^3",
    "a*m, a,a,c*m^2,c*m^2,a,a, h*m^3,h*m^3,d*m^3, c*m,c*m,c*m,c*m, f*m^3",
    "a*m, c*m^2,c*m^2,a,c*m^2,a,a, c*m,c*m,c*m, b,c*m,c*m,c*m, b*m^2",
    "a*m, c*m^2,a,c*m^2,a,c*m^2,a, c*m,c*m,c*m, c*m,b,c*m,c*m, b*m^2",
    "a*m, a,c*m^2,c*m^2,a,a,c*m^2, c*m,c*m,c*m, c*m,c*m,b,c*m, b*m^2",
    "a*m, a,a,a,c*m^2,c*m^2,c*m^2, c*m,c*m,c*m, c*m,c*m,c*m,b, b*m^2",
    "a, c*m,c*m,c*m,c*m,c*m,c*m, g*m^3,g*m^3,g*m^3, b*m^2,b*m^2,b*m^2,b*m^2, e*m^3",
];

fn transcribed_listing() -> Result<Vec<Vec<BlockTerm>>> {
    LISTING
        .iter()
        .map(|row| {
            row.split(',')
                .map(|s| {
                    BlockTerm::parse(s).map(|t| BlockTerm {
                        m_power: t.m_power - 3,
                        ..t
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Exponents of `m` in the transcribed Gram matrix.
const GRAM_EXPONENTS: [&str; 15] = [
    "433333322222221",
    "332222221122111",
    "323222212121211",
    "322322211212211",
    "322232211221121",
    "322223212112121",
    "322222321111221",
    "221111221111111",
    "212112112111111",
    "211221111211111",
    "222121111121111",
    "221212111112111",
    "212211211111211",
    "211122211111121",
    "111111111111111",
];

#[derive(Clone, Debug, Serialize)]
pub struct AuditEntry {
    pub row: String,
    pub col: String,
    pub transcribed: String,
    pub audited: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SourceAudit {
    pub source: String,
    pub entries_checked: usize,
    pub agreeing: usize,
    pub mismatches: Vec<AuditEntry>,
    /// Whether `tr(X C⁻¹)` with this source's table reproduces the
    /// enumerated `E f⁴` on every sample.
    pub reproduces_fourth_moment: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableAudit {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub gram_matches_transcription: bool,
    pub derived_matches_brute_force: bool,
    pub derived_reproduces_fourth_moment: bool,
    pub sources: Vec<SourceAudit>,
    /// The audited 15×15 table, row by row.
    pub audited: Vec<Vec<String>>,
}

/// Checks both transcribed tables entry by entry against index summation on
/// random equal-margin integer matrices. An entry agrees when it matches on
/// every sample.
pub fn audit_tables(m: usize, samples: usize, seed: u64) -> Result<TableAudit> {
    if !(4..=6).contains(&m) {
        return Err(Error::OutOfRange { m, min: 4, max: 6 });
    }
    let tables = build_tables(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats: Vec<Vec<i64>> = (0..samples.max(1))
        .map(|k| random_equal_margin(m, &mut rng, 3, k as i64 % 5 - 2))
        .collect();
    let moment_vs: Vec<MomentVector> = mats.iter().map(|a| moments_of_ints(m, a)).collect();
    let brute: Vec<Vec<Vec<BigQ>>> = mats
        .iter()
        .map(|a| {
            (0..15)
                .map(|i| (0..15).map(|j| q_int(contraction_brute_force(i, j, m, a))).collect())
                .collect()
        })
        .collect();
    let exhaustive: Vec<BigQ> = mats
        .iter()
        .map(|a| exhaustive_moment(&QMatrix::from_ints(m, a)?, 4))
        .collect::<Result<_>>()?;

    let agrees = |t: &BlockTerm, a: usize, b: usize| {
        moment_vs
            .iter()
            .zip(&brute)
            .all(|(mv, bf)| t.eval(mv, m) == bf[a][b])
    };
    let reproduces = |table: &[Vec<BlockTerm>]| {
        moment_vs.iter().zip(&exhaustive).all(|(mv, ex)| {
            let x: Vec<Vec<BigQ>> = table
                .iter()
                .map(|row| row.iter().map(|t| t.eval(mv, m)).collect())
                .collect();
            &tables.trace_against_inverse(&x) == ex
        })
    };

    let derived = &tables.terms;
    let derived_ok = (0..15).all(|a| (0..15).all(|b| agrees(&derived[a][b], a, b)));

    let mut sources = Vec::new();
    for (name, table) in [
        ("block display", transcribed_blocks()?),
        ("program listing", transcribed_listing()?),
    ] {
        let mut mismatches = Vec::new();
        for a in 0..15 {
            for b in 0..15 {
                if !agrees(&table[a][b], a, b) {
                    mismatches.push(AuditEntry {
                        row: label(a),
                        col: label(b),
                        transcribed: table[a][b].to_string(),
                        audited: derived[a][b].to_string(),
                    });
                }
            }
        }
        sources.push(SourceAudit {
            source: name.to_string(),
            entries_checked: 225,
            agreeing: 225 - mismatches.len(),
            mismatches,
            reproduces_fourth_moment: reproduces(&table),
        });
    }

    let gram = gram_matrix(m);
    let gram_ok = GRAM_EXPONENTS.iter().enumerate().all(|(a, row)| {
        row.bytes().enumerate().all(|(b, d)| {
            gram[a][b] == num_traits::pow(BigInt::from(m), (d - b'0') as usize)
        })
    });

    Ok(TableAudit {
        m,
        samples: mats.len(),
        seed,
        gram_matches_transcription: gram_ok,
        derived_matches_brute_force: derived_ok,
        derived_reproduces_fourth_moment: reproduces(derived),
        sources,
        audited: derived
            .iter()
            .map(|row| row.iter().map(|t| t.to_string()).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::{q_frac, random_sparse_equal_margin};

    #[test]
    fn gram_is_symmetric_with_known_determinant() {
        for m in 4..=8 {
            let c = gram_matrix(m);
            for a in 0..15 {
                for b in 0..15 {
                    assert_eq!(c[a][b], c[b][a]);
                }
            }
            assert_eq!(gram_determinant(m), det_formula(m), "m={m}");
        }
        let expect = num_traits::pow(BigInt::from(4), 15)
            * num_traits::pow(BigInt::from(3), 14)
            * num_traits::pow(BigInt::from(2), 7);
        assert_eq!(gram_determinant(4), expect);
    }

    #[test]
    fn singular_below_four() {
        assert!(gram_determinant(3).is_zero());
        let err = build_tables(3).unwrap_err();
        assert!(err.to_string().contains("(m-3)"));
        assert!(build_tables(2).is_err());
    }

    #[test]
    fn derived_terms_match_index_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in 4..=5 {
            for k in 0..3 {
                let a = if k == 2 {
                    random_sparse_equal_margin(m, &mut rng, 2, 3, 1)
                } else {
                    random_equal_margin(m, &mut rng, 3, k - 1)
                };
                let mv = moments_of_ints(m, &a);
                for i in 0..15 {
                    for j in 0..15 {
                        assert_eq!(
                            contraction_term(i, j).eval(&mv, m),
                            q_int(contraction_brute_force(i, j, m, &a)),
                            "m={m} ({},{})",
                            label(i),
                            label(j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mirror_blocks_swap_orientation() {
        for a in 0..15 {
            for b in 0..15 {
                let (s, t) = (contraction_term(a, b), contraction_term(b, a));
                assert_eq!(s.m_power, t.m_power);
                assert_eq!(s.composite, t.composite.swap_orientation());
            }
        }
    }

    #[test]
    fn fourth_moment_examples() {
        for m in 4..=6 {
            let t = build_tables(m).unwrap();
            let j = norm4_exact(&QMatrix::ones(m), &t).unwrap();
            assert_eq!(j, q_int((m as i128).pow(4)));
        }
        let t = build_tables(4).unwrap();
        let id = QMatrix::identity(4);
        assert_eq!(
            norm4_exact(&id, &t).unwrap(),
            exhaustive_moment(&id, 4).unwrap()
        );
        // Fixed points of a uniform permutation of 4 have fourth moment 15.
        assert_eq!(norm4_exact(&id, &t).unwrap(), q_int(15));
    }

    #[test]
    fn fourth_moment_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in 4..=6 {
            let t = build_tables(m).unwrap();
            for k in 0..4 {
                let a = QMatrix::from_ints(m, &random_equal_margin(m, &mut rng, 3, k - 1))
                    .unwrap()
                    .scale(&q_frac(2, 5));
                let mv = moments(&a);
                let via_trace = t.trace_against_inverse(&t.block_matrix(&mv));
                let direct = exhaustive_moment(&a, 4).unwrap();
                assert_eq!(via_trace, direct);
                assert_eq!(norm4_exact(&a, &t).unwrap(), direct);
            }
        }
    }

    #[test]
    fn unequal_margins_are_refused() {
        let t = build_tables(4).unwrap();
        let mut e = vec![0i64; 16];
        e[0] = 1;
        assert!(norm4_exact(&QMatrix::from_ints(4, &e).unwrap(), &t).is_err());
        assert!(norm4_exact(&QMatrix::identity(5), &t).is_err());
    }

    #[test]
    fn transcriptions_parse_and_audit_runs() {
        assert_eq!(transcribed_blocks().unwrap().len(), 15);
        assert!(transcribed_listing().unwrap().iter().all(|r| r.len() == 15));
        let audit = audit_tables(4, 3, 1).unwrap();
        assert!(audit.gram_matches_transcription);
        assert!(audit.derived_matches_brute_force);
        assert!(audit.derived_reproduces_fourth_moment);
        let display = &audit.sources[0];
        assert!(display
            .mismatches
            .iter()
            .any(|e| e.row == "E5[ijkl]" && e.col == "E3[ij|kl]" && e.audited == "Mr"));
        assert!(!display.reproduces_fourth_moment);
    }

    #[test]
    fn term_parsing() {
        let t = BlockTerm::parse("c*m^2").unwrap();
        assert_eq!(t.composite, Composite::M1SqM2);
        assert_eq!(t.m_power, 2);
        assert_eq!(BlockTerm::parse("b/m").unwrap().m_power, -1);
        assert_eq!(BlockTerm::parse("a/m^3").unwrap().to_string(), "M1^4/m^3");
        assert!(BlockTerm::parse("z").is_err());
        assert!(BlockTerm::parse("a+m").is_err());
    }
}
