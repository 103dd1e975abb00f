//! Distance to the kernel, extraction of the nearest dictator and the
//! moment diagnostics of `r = h·hᵀ − M`.

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::aggregators::{encode_g, make_constant, make_dictator, Aggregator};
use crate::error::Result;
use crate::exec::Exec;
use crate::laplacian::{gap_bracket, spectral_gap_with};
use crate::metrics::{ir_exact, q_to_f64};
use crate::model::Model;
use crate::perm::{compose, inverse, Permutation};
use crate::repr::{project_to_lin, LinFunction, Mat, MatrixField};

/// Spectral gap used for the distance bound and where it came from.
#[derive(Clone, Debug, Serialize)]
pub struct GapInfo {
    pub value: f64,
    pub source: String,
}

/// Exact gap by dense eigensolve when the operator fits `dense_limit`;
/// otherwise the lower end of the proven bracket.
pub fn measured_gap(model: &Model, n: usize, dense_limit: usize, exec: Exec) -> Result<GapInfo> {
    let report = spectral_gap_with(model, n, dense_limit, exec, 0)?;
    if report.exhaustive {
        Ok(GapInfo {
            value: report.gap,
            source: "dense eigensolve".into(),
        })
    } else {
        Ok(GapInfo {
            value: gap_bracket(model.m(), n).0,
            source: "bracket lower end".into(),
        })
    }
}

/// `(lin, E‖g − lin‖²)`.
pub fn kernel_distance(g: &MatrixField, model: &Model, exec: Exec) -> Result<(LinFunction, f64)> {
    let (lin, resid) = project_to_lin(g, &model.rho, exec)?;
    Ok((lin, resid * resid))
}

/// `argmax_i ‖A^i‖²`, lowest index on ties. Returns a 1-based voter.
pub fn nearest_dictator(lin: &LinFunction) -> (usize, Mat) {
    let mut best = 0;
    for (i, a) in lin.a.iter().enumerate() {
        if a.norm_squared() > lin.a[best].norm_squared() {
            best = i;
        }
    }
    (best + 1, lin.a[best].clone())
}

/// `argmin_y ‖A − M_H·ρ¹(y)‖` over coset representatives `y`; returns the
/// representative and the distance.
pub fn round_to_consistent(a: &Mat, model: &Model) -> (Permutation, f64) {
    model
        .h
        .cosets()
        .iter()
        .map(|c| {
            let target = &model.m_h * model.rho.get(c.representative.lex_index());
            (c.representative.clone(), (a - target).norm())
        })
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

/// Nearest coset encoding to a constant matrix.
fn round_constant(b: &Mat, model: &Model) -> (Permutation, f64) {
    model
        .h
        .cosets()
        .iter()
        .zip(&model.coset_g)
        .map(|(c, g)| (c.representative.clone(), (b - g).norm()))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Rounded {
    Dictator { voter: usize, sigma: Permutation },
    Constant { output: Permutation },
}

#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    pub rounded: Rounded,
    /// `E‖g − h′‖²` for the rounded aggregator `h′`.
    pub distance2: f64,
    /// `‖g − h′‖ / ‖g − h‖` with `h` the unrounded kernel term.
    pub rounding_factor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatCsReport {
    pub pairs: usize,
    /// Largest `‖AB‖₁ / (d‖A‖₂‖B‖₂)` over the random pairs.
    pub max_ratio: f64,
    /// The same ratio at `A = B = J`.
    pub all_ones_ratio: f64,
}

/// Entrywise-ℓ1 versus Frobenius check on random pairs.
pub fn matcs_check<R: Rng>(d: usize, pairs: usize, rng: &mut R) -> MatCsReport {
    let ratio = |a: &Mat, b: &Mat| (a * b).abs().sum() / (d as f64 * a.norm() * b.norm());
    let max_ratio = (0..pairs)
        .map(|_| {
            let a = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            let b = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            ratio(&a, &b)
        })
        .fold(0.0, f64::max);
    let j = Mat::from_element(d, d, 1.0);
    MatCsReport {
        pairs,
        max_ratio,
        all_ones_ratio: ratio(&j, &j),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FknDiagnostics {
    /// `ε`: the measure after scaling `g` by `1/√tr(M)`.
    pub epsilon: f64,
    /// `E‖r‖²` (Frobenius).
    pub r_second_moment: f64,
    /// `E Σ_ab r_ab⁴`.
    pub r_fourth_moment: f64,
    pub alpha: f64,
    /// `Pr[‖r‖ > α]`.
    pub tail_mass: f64,
    /// `E‖r‖² / ε`, absent when `ε = 0`.
    pub ratio_to_epsilon: Option<f64>,
    /// `108(m−1)⁴m⁴ε`.
    pub stated_bound: f64,
    pub bound_holds: bool,
    /// Mean-square mass of `r` outside degree ≤ 2, summed over entries.
    pub degree2_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessReport {
    pub centered: bool,
    pub ir: f64,
    pub trace_m: f64,
    pub kernel_distance2: f64,
    pub gap: GapInfo,
    /// `IR / gap`.
    pub kernel_bound: f64,
    pub kernel_bound_holds: bool,
    /// `‖A^i‖² / tr(M)` per voter.
    pub voter_weights: Vec<f64>,
    pub chosen_voter: usize,
    #[serde(serialize_with = "crate::repr::ser_mat")]
    pub chosen_coefficient: Mat,
    pub dictator: Candidate,
    pub constant: Candidate,
    /// The closer of the two candidates.
    pub best: Candidate,
    pub dictator_distance2: f64,
    pub diagnostics: FknDiagnostics,
}

/// `f′(x, y) = y∘f(y⁻¹∘x_1, …, y⁻¹∘x_n)`: an extra dummy voter `y` that
/// makes the encoding mean-zero. Independence is preserved, dictators are
/// unchanged and constants become dictators of the dummy voter.
pub fn center(agg: &Aggregator, model: &Model, exec: Exec) -> Result<Aggregator> {
    let n = agg.n;
    let space = agg.space();
    let group = &model.group;
    let s = group.order();
    let inverses: Vec<usize> = (0..s).map(|y| inverse(group.get(y)).lex_index()).collect();
    let table = exec.map(space.size * s, |p| {
        let y = p % s;
        let digits = space.decode(p / s);
        let moved: Vec<usize> = digits.iter().map(|&d| group.compose_idx(inverses[y], d)).collect();
        let k = agg.output(space.encode(&moved));
        let rep = &model.h.cosets()[k].representative;
        model.h.coset_of(&compose(group.get(y), rep).unwrap()) as u32
    });
    Aggregator::from_table(model, n + 1, table)
}

pub fn robustness(
    agg: &Aggregator,
    model: &Model,
    gap: &GapInfo,
    centered: bool,
    exec: Exec,
) -> Result<RobustnessReport> {
    let work;
    let agg = if centered {
        work = center(agg, model, exec)?;
        &work
    } else {
        agg
    };
    let (ir_q, _) = ir_exact(agg, model, exec)?;
    let ir = q_to_f64(&ir_q);
    let g = encode_g(agg, model, exec);
    let (lin, kd2) = kernel_distance(&g, model, exec)?;
    let trace_m = model.m_h.trace();
    let voter_weights: Vec<f64> = lin.a.iter().map(|a| a.norm_squared() / trace_m).collect();
    let (voter, a_star) = nearest_dictator(&lin);

    let space = agg.space();
    let lin_dict = LinFunction {
        n: lin.n,
        b: Mat::zeros(lin.b.nrows(), lin.b.ncols()),
        a: (0..lin.n)
            .map(|i| if i + 1 == voter { a_star.clone() } else { Mat::zeros(a_star.nrows(), a_star.ncols()) })
            .collect(),
    };
    let h_dict = lin_dict.to_field(space, &model.rho, exec);
    let (sigma, _) = round_to_consistent(&a_star, model);
    let rounded_dict = make_dictator(model, agg.n, voter, &sigma, exec)?;
    let dict_field = encode_g(&rounded_dict, model, exec);
    let dictator = candidate(
        &g,
        &h_dict,
        &dict_field,
        Rounded::Dictator { voter, sigma },
        exec,
    );

    let h_const = MatrixField::new(space, vec![lin.b.clone(); space.size])?;
    let (output, _) = round_constant(&lin.b, model);
    let rounded_const = make_constant(model, agg.n, &output, exec)?;
    let const_field = encode_g(&rounded_const, model, exec);
    let constant = candidate(&g, &h_const, &const_field, Rounded::Constant { output }, exec);

    let best = if constant.distance2 < dictator.distance2 {
        constant.clone()
    } else {
        dictator.clone()
    };
    let kernel_bound = if gap.value > 0.0 { ir / gap.value } else { f64::INFINITY };
    let diagnostics = diagnostics(&lin, ir / trace_m, trace_m, model, space, exec);
    Ok(RobustnessReport {
        centered,
        ir,
        trace_m,
        kernel_distance2: kd2,
        gap: gap.clone(),
        kernel_bound,
        kernel_bound_holds: kd2 <= kernel_bound + 1e-9,
        voter_weights,
        chosen_voter: voter,
        chosen_coefficient: a_star,
        dictator_distance2: best.distance2,
        dictator,
        constant,
        best,
        diagnostics,
    })
}

fn candidate(g: &MatrixField, h: &MatrixField, rounded: &MatrixField, kind: Rounded, exec: Exec) -> Candidate {
    let to_h = g.mean_sq_dist(h, exec).sqrt();
    let distance2 = g.mean_sq_dist(rounded, exec);
    let to_rounded = distance2.sqrt();
    let rounding_factor = if to_h <= 1e-12 && to_rounded <= 1e-12 {
        1.0
    } else {
        to_rounded / to_h
    };
    Candidate {
        rounded: kind,
        distance2,
        rounding_factor,
    }
}

fn diagnostics(
    lin: &LinFunction,
    epsilon: f64,
    trace_m: f64,
    model: &Model,
    space: crate::perm::ProfileSpace,
    exec: Exec,
) -> FknDiagnostics {
    let m = model.m() as f64;
    let scale = 1.0 / trace_m.sqrt();
    let m_norm = &model.m_h / trace_m;
    let r_at = |p: usize| {
        let h = lin.evaluate(&space.decode(p), &model.rho) * scale;
        &h * h.transpose() - &m_norm
    };
    let alpha = 6.0 * (m - 1.0) * m * m * epsilon.sqrt();
    let total = space.size as f64;
    let stats = exec.map_blocks(space.size, crate::exec::BLOCK, |range| {
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        let mut tail = 0.0;
        for p in range {
            let r = r_at(p);
            let n2 = r.norm_squared();
            s2 += n2;
            s4 += r.iter().map(|v| v.powi(4)).sum::<f64>();
            if n2.sqrt() > alpha {
                tail += 1.0;
            }
        }
        (s2, s4, tail)
    });
    let (s2, s4, tail) = stats
        .into_iter()
        .fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let r2 = s2 / total;
    let stated_bound = 108.0 * (m - 1.0).powi(4) * m.powi(4) * epsilon;
    let values: Vec<Mat> = exec.map(space.size, r_at);
    FknDiagnostics {
        epsilon,
        r_second_moment: r2,
        r_fourth_moment: s4 / total,
        alpha,
        tail_mass: tail / total,
        ratio_to_epsilon: (epsilon > 0.0).then(|| r2 / epsilon),
        stated_bound,
        bound_holds: r2 <= stated_bound + 1e-12,
        degree2_residual: degree2_residual(&values, model, space),
    }
}

/// Mean square of the part of each entry of `r` orthogonal to
/// `span{1, ρ¹_ab(x_i), ρ¹_ab(x_i)ρ¹_cd(x_j) : i < j}`.
pub fn degree2_residual(values: &[Mat], model: &Model, space: crate::perm::ProfileSpace) -> f64 {
    let n = space.n;
    let d = model.m() - 1;
    let dd = d * d;
    let total = space.size as f64;
    let rows = values[0].nrows();
    let cols = values[0].ncols();
    let mut resid2 = 0.0;
    for a in 0..rows {
        for b in 0..cols {
            let mut mean = 0.0;
            let mut sq = 0.0;
            let mut lin = vec![vec![0.0; dd]; n];
            let mut quad = vec![vec![0.0; dd * dd]; n * n];
            for (p, v) in values.iter().enumerate() {
                let x = v[(a, b)];
                mean += x;
                sq += x * x;
                let digits = space.decode(p);
                for i in 0..n {
                    let ri = model.rho.get(digits[i]);
                    for k in 0..dd {
                        lin[i][k] += x * ri[(k / d, k % d)];
                    }
                    for j in i + 1..n {
                        let rj = model.rho.get(digits[j]);
                        let q = &mut quad[i * n + j];
                        for k in 0..dd {
                            let u = x * ri[(k / d, k % d)];
                            for l in 0..dd {
                                q[k * dd + l] += u * rj[(l / d, l % d)];
                            }
                        }
                    }
                }
            }
            mean /= total;
            sq /= total;
            // Coefficient c = E[rφ]/‖φ‖²; captured mass c²‖φ‖² = E[rφ]²/‖φ‖².
            let norm1 = 1.0 / d as f64;
            let norm2 = norm1 * norm1;
            let mut captured = mean * mean;
            for li in &lin {
                captured += li.iter().map(|s| (s / total).powi(2)).sum::<f64>() / norm1;
            }
            for i in 0..n {
                for j in i + 1..n {
                    captured += quad[i * n + j].iter().map(|s| (s / total).powi(2)).sum::<f64>() / norm2;
                }
            }
            resid2 += (sq - captured).max(0.0);
        }
    }
    resid2
}

/// Replaces `k` distinct table entries with a different, random coset.
pub fn corrupt<R: Rng>(agg: &Aggregator, model: &Model, k: usize, rng: &mut R) -> Aggregator {
    let cosets = model.h.coset_count() as u32;
    let mut out = agg.clone();
    for p in sample(rng, agg.space().size, k.min(agg.space().size)) {
        let old = agg.table()[p];
        let mut new = rng.gen_range(0..cosets - 1);
        if new >= old {
            new += 1;
        }
        out = out.with_entry(p, new);
    }
    out
}
