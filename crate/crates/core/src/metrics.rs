//! Independence measures, the census of independent aggregators, and
//! manipulation power.
//!
//! The canonical measure sums, over voters `i` and alternatives `j`, the
//! expected squared distance between the `j`-profiles of `f(x^{−i}, x_i)` and
//! `f(x^{−i}, y_i)` for independent uniform `x_i, y_i` that rank `j` equally.

use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregators::{encode_g, make_dictator, Aggregator};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::laplacian::{apply_ln, PAIR_BUDGET};
use crate::model::Model;
use crate::perm::{factorial, format_partition, Permutation, ProfileSpace};

pub type Q = Ratio<i128>;

/// Largest census (number of candidate functions) attempted.
pub const CENSUS_LIMIT: f64 = 1e7;

pub fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Serialized as `{"exact": "p/q", "value": float}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exact(pub Q);

impl Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Exact", 2)?;
        st.serialize_field("exact", &self.0.to_string())?;
        st.serialize_field("value", &q_to_f64(&self.0))?;
        st.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IrValue {
    /// Ordered-pair expected squared `j`-profile distance.
    pub profile_distance_ir: Exact,
    /// Ordered-pair probability that the `j`-profiles differ.
    pub indicator_ir: Exact,
    /// The canonical measure recomputed through the Fourier form.
    pub quadratic_ir: f64,
}

/// Squared distances between distinct `j`-profiles, scaled by `|H|²`.
fn distance_tables(model: &Model) -> Vec<Vec<Vec<i64>>> {
    (1..=model.m())
        .map(|j| {
            let profs = model.h.distinct_profiles(j);
            profs
                .iter()
                .map(|a| {
                    profs
                        .iter()
                        .map(|b| {
                            a.counts
                                .iter()
                                .zip(&b.counts)
                                .map(|(&x, &y)| (x as i64 - y as i64).pow(2))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn check_pairs(model: &Model, n: usize, what: &str) -> Result<()> {
    let work = n as f64 * model.m() as f64 * (model.order() as f64).powi(n as i32 + 1);
    if work > PAIR_BUDGET {
        return Err(Error::budget(what, work, PAIR_BUDGET));
    }
    Ok(())
}

fn pair_denominator(model: &Model, n: usize) -> i128 {
    (model.order() as i128).pow(n as u32 + 1)
}

/// Exact measures by direct enumeration of constrained pairs.
pub fn ir_combinatorial(agg: &Aggregator, model: &Model, exec: Exec) -> Result<IrValue> {
    let (dist, ind) = ir_exact(agg, model, exec)?;
    let g = encode_g(agg, model, exec);
    Ok(IrValue {
        profile_distance_ir: Exact(dist),
        indicator_ir: Exact(ind),
        quadratic_ir: apply_ln(&g, model, exec)?,
    })
}

/// `(profile-distance measure, indicator measure)` as exact rationals.
pub fn ir_exact(agg: &Aggregator, model: &Model, exec: Exec) -> Result<(Q, Q)> {
    check_pairs(model, agg.n, "independence measure")?;
    let space = agg.space();
    let dist = distance_tables(model);
    let m = model.m();
    let sums = exec.map_blocks(space.size, crate::exec::BLOCK, |range| {
        let mut d = 0i128;
        let mut c = 0i128;
        for p in range {
            let kp = agg.output(p);
            for i in 0..space.n {
                let e = space.digit(p, i);
                for j in 1..=m {
                    let pid = model.h.profile_id(kp, j);
                    let class = &model.classes[j - 1][model.group.rank(e, j) - 1];
                    for &e2 in class {
                        let q = space.with_voter(p, i, e2 as usize);
                        let qid = model.h.profile_id(agg.output(q), j);
                        if qid != pid {
                            d += dist[j - 1][pid][qid] as i128;
                            c += 1;
                        }
                    }
                }
            }
        }
        (d, c)
    });
    let (d, c) = sums
        .into_iter()
        .fold((0i128, 0i128), |(a, b), (x, y)| (a + x, b + y));
    let denom = pair_denominator(model, agg.n);
    let h2 = (model.h.order() as i128).pow(2);
    Ok((Q::new(d, denom * h2), Q::new(c, denom)))
}

/// True when no constrained single-voter switch changes any `j`-profile.
pub fn is_ir_single_switch(table: &[u32], space: ProfileSpace, model: &Model) -> bool {
    let m = model.m();
    for i in 0..space.n {
        let w = space.weight(i);
        for base in (0..space.size).filter(|&p| space.digit(p, i) == 0) {
            for j in 1..=m {
                for class in &model.classes[j - 1] {
                    let first = model.h.profile_id(table[base + class[0] as usize * w] as usize, j);
                    if class[1..]
                        .iter()
                        .any(|&e| model.h.profile_id(table[base + e as usize * w] as usize, j) != first)
                    {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// True when profiles that rank `j` identically for every voter always
/// receive the same `j`-profile.
pub fn is_ir_many_voter(table: &[u32], space: ProfileSpace, model: &Model) -> bool {
    for j in 1..=model.m() {
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for (p, &k) in table.iter().enumerate() {
            let key: Vec<usize> = space
                .decode(p)
                .into_iter()
                .map(|e| model.group.rank(e, j))
                .collect();
            let pid = model.h.profile_id(k as usize, j);
            if *seen.entry(key).or_insert(pid) != pid {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MemberClass {
    Constant,
    /// Equal to `x ↦ compose(x_voter, sigma)∘H` for the listed `sigma`
    /// (the lexicographically least one).
    Dictator { voter: usize, sigma: Permutation },
    Other,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusMember {
    /// Output coset representative for each profile, in profile order.
    pub outputs: Vec<Permutation>,
    pub class: MemberClass,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub m: usize,
    pub n: usize,
    pub partition: String,
    pub functions_examined: u64,
    pub constants: usize,
    pub dictators: usize,
    pub other: usize,
    pub members: Vec<CensusMember>,
    /// Present when the configuration admits no independence constraints.
    pub degenerate: Option<String>,
}

/// Every aggregator with zero independence measure, classified.
pub fn census_ir_functions(model: &Model, n: usize, exec: Exec) -> Result<CensusReport> {
    let space = ProfileSpace::new(model.order(), n)?;
    let k = model.h.coset_count();
    let estimate = (k as f64).powf(space.size as f64);
    if estimate > CENSUS_LIMIT {
        return Err(Error::Budget {
            what: "census of all functions".into(),
            estimate: format!("{k}^{} ≈ {estimate:.3e}", space.size),
            limit: format!("{CENSUS_LIMIT:.0e}"),
        });
    }
    let total = estimate.round() as u64;

    let mut known: HashMap<Vec<u32>, MemberClass> = HashMap::new();
    for i in 1..=n {
        for sigma in model.group.elements() {
            let d = make_dictator(model, n, i, sigma, Exec::Sequential)?;
            known
                .entry(d.table().to_vec())
                .or_insert(MemberClass::Dictator { voter: i, sigma: sigma.clone() });
        }
    }
    for c in 0..k as u32 {
        known.insert(vec![c; space.size], MemberClass::Constant);
    }

    let block = 4096usize;
    let found = exec.map_blocks(total as usize, block, |range| {
        let mut out = Vec::new();
        let mut table = vec![0u32; space.size];
        for idx in range {
            let mut rest = idx;
            for slot in table.iter_mut().rev() {
                *slot = (rest % k) as u32;
                rest /= k;
            }
            if is_ir_single_switch(&table, space, model) {
                out.push(table.clone());
            }
        }
        out
    });
    let members: Vec<CensusMember> = found
        .into_iter()
        .flatten()
        .map(|table| {
            let class = known.get(&table).cloned().unwrap_or(MemberClass::Other);
            CensusMember {
                outputs: table
                    .iter()
                    .map(|&c| model.h.cosets()[c as usize].representative.clone())
                    .collect(),
                class,
            }
        })
        .collect();
    let count = |f: fn(&MemberClass) -> bool| members.iter().filter(|m| f(&m.class)).count();
    let constants = count(|c| matches!(c, MemberClass::Constant));
    let dictators = count(|c| matches!(c, MemberClass::Dictator { .. }));
    let other = count(|c| matches!(c, MemberClass::Other));
    let degenerate = (model.m() == 2).then(|| {
        "m = 2: a voter's ranking is fixed by the rank of any one alternative, so \
         no switch is constrained and every function is independent"
            .to_string()
    });
    Ok(CensusReport {
        m: model.m(),
        n,
        partition: format_partition(model.h.partition()),
        functions_examined: total,
        constants,
        dictators,
        other,
        members,
        degenerate,
    })
}

/// Strict preference orders over distinct `j`-profiles, one per `(r, j)`.
#[derive(Clone, Debug, Serialize)]
pub struct Orders {
    pub label: String,
    /// `ranking[j-1][r-1]`: profile ids, most preferred first.
    pub ranking: Vec<Vec<Vec<usize>>>,
}

impl Orders {
    fn positions(&self) -> Vec<Vec<Vec<usize>>> {
        self.ranking
            .iter()
            .map(|per_r| {
                per_r
                    .iter()
                    .map(|list| {
                        let mut pos = vec![0; list.len()];
                        for (at, &pid) in list.iter().enumerate() {
                            pos[pid] = at;
                        }
                        pos
                    })
                    .collect()
            })
            .collect()
    }

    /// Independently shuffled orders.
    pub fn random<R: Rng>(model: &Model, rng: &mut R) -> Orders {
        let mut o = default_orders(model);
        for per_r in &mut o.ranking {
            for list in per_r.iter_mut() {
                list.shuffle(rng);
            }
        }
        o.label = "random".into();
        o
    }
}

/// Ascending squared distance to the unit vector at rank `r`, ties broken
/// by the lexicographic order of the profile vectors.
pub fn default_orders(model: &Model) -> Orders {
    let m = model.m();
    let ranking = (1..=m)
        .map(|j| {
            let profs = model.h.distinct_profiles(j);
            (1..=m)
                .map(|r| {
                    let mut ids: Vec<usize> = (0..profs.len()).collect();
                    let key = |pid: usize| -> i64 {
                        let p = &profs[pid];
                        p.counts
                            .iter()
                            .enumerate()
                            .map(|(s, &c)| {
                                let target = if s + 1 == r { p.denom as i64 } else { 0 };
                                (c as i64 - target).pow(2)
                            })
                            .sum()
                    };
                    ids.sort_by(|&a, &b| key(a).cmp(&key(b)).then(profs[a].counts.cmp(&profs[b].counts)));
                    ids
                })
                .collect()
        })
        .collect();
    Orders {
        label: "nearest-unit-vector".into(),
        ranking,
    }
}

/// One `(j, r)` override read from JSON.
#[derive(Clone, Debug, Deserialize)]
pub struct OrderOverride {
    pub j: usize,
    pub r: usize,
    /// Profile vectors, most preferred first; entries are numbers or
    /// `"p/q"` strings.
    pub ranking: Vec<Vec<serde_json::Value>>,
}

fn parse_entry(v: &serde_json::Value) -> Result<Q> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(|i| Q::from_integer(i as i128))
            .ok_or_else(|| Error::Input(format!("profile entry {n} is not an integer or fraction"))),
        serde_json::Value::String(s) => {
            let (a, b) = s.split_once('/').unwrap_or((s.as_str(), "1"));
            let a: i128 = a.trim().parse().map_err(|_| Error::Input(format!("bad fraction {s:?}")))?;
            let b: i128 = b.trim().parse().map_err(|_| Error::Input(format!("bad fraction {s:?}")))?;
            if b == 0 {
                return Err(Error::Input(format!("zero denominator in {s:?}")));
            }
            Ok(Q::new(a, b))
        }
        other => Err(Error::Input(format!("profile entry {other} is not a number"))),
    }
}

/// Applies overrides on top of the default orders.
pub fn orders_from_json(model: &Model, text: &str) -> Result<Orders> {
    let overrides: Vec<OrderOverride> = serde_json::from_str(text)?;
    let mut orders = default_orders(model);
    let m = model.m();
    for o in overrides {
        if !(1..=m).contains(&o.j) || !(1..=m).contains(&o.r) {
            return Err(Error::Input(format!("override (j={}, r={}) out of range", o.j, o.r)));
        }
        let profs = model.h.distinct_profiles(o.j);
        let mut ids = Vec::with_capacity(o.ranking.len());
        for vec in &o.ranking {
            let v: Vec<Q> = vec.iter().map(parse_entry).collect::<Result<_>>()?;
            let pid = profs
                .iter()
                .position(|p| {
                    p.counts.len() == v.len()
                        && p.counts
                            .iter()
                            .zip(&v)
                            .all(|(&c, x)| Q::new(c as i128, p.denom as i128) == *x)
                })
                .ok_or_else(|| Error::Input(format!("{vec:?} is not a {}-profile", o.j)))?;
            ids.push(pid);
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != profs.len() || ids.len() != profs.len() {
            return Err(Error::Input(format!(
                "override for (j={}, r={}) must list each of the {} profiles once",
                o.j,
                o.r,
                profs.len()
            )));
        }
        orders.ranking[o.j - 1][o.r - 1] = ids;
    }
    orders.label = "json".into();
    Ok(orders)
}

/// `max_j max_{K1,K2} ‖n_K1 − n_K2‖²`.
pub fn profile_spread(model: &Model) -> Q {
    let h2 = (model.h.order() as i128).pow(2);
    let max = distance_tables(model)
        .into_iter()
        .flatten()
        .flatten()
        .max()
        .unwrap_or(0);
    Q::new(max as i128, h2)
}

#[derive(Clone, Debug, Serialize)]
pub struct ManipulationReport {
    pub per_voter: Vec<Exact>,
    pub total: Exact,
    pub c: Exact,
    pub ir: Exact,
    /// `c·M(f) ≥ IR(f)`, compared exactly.
    pub bound_holds: bool,
    /// `2c·M(f) ≥ IR(f)`: each unordered constrained pair with differing
    /// profiles yields at least one manipulation but two ordered IR terms.
    pub unordered_bound_holds: bool,
    pub orders: String,
}

pub fn manipulation_power(agg: &Aggregator, model: &Model, orders: &Orders, exec: Exec) -> Result<ManipulationReport> {
    check_pairs(model, agg.n, "manipulation power")?;
    let space = agg.space();
    let m = model.m();
    let s = model.order();
    let pos = orders.positions();
    let mut per_voter = Vec::with_capacity(space.n);
    for i in 0..space.n {
        let count: i128 = exec.sum_i128(space.size, |p| {
            let e = space.digit(p, i);
            let kp = agg.output(p);
            let mut c = 0i128;
            for j in 1..=m {
                let r = model.group.rank(e, j);
                let order = &pos[j - 1][r - 1];
                let truthful = order[model.h.profile_id(kp, j)];
                for e2 in 0..s {
                    let q = space.with_voter(p, i, e2);
                    if order[model.h.profile_id(agg.output(q), j)] < truthful {
                        c += 1;
                    }
                }
            }
            c
        });
        per_voter.push(Q::new(count, pair_denominator(model, agg.n)));
    }
    let total = per_voter.iter().fold(Q::zero(), |a, b| a + b);
    let c = profile_spread(model);
    let (ir, _) = ir_exact(agg, model, exec)?;
    Ok(ManipulationReport {
        bound_holds: c * total >= ir,
        unordered_bound_holds: c * total * Q::from_integer(2) >= ir,
        per_voter: per_voter.into_iter().map(Exact).collect(),
        total: Exact(total),
        c: Exact(c),
        ir: Exact(ir),
        orders: orders.label.clone(),
    })
}

/// Upper bound on how much one table entry can add to the canonical
/// measure: every constrained pair touching it, in both orders, at the
/// largest profile distance for its alternative.
pub fn single_entry_bound(model: &Model, n: usize) -> Q {
    let h2 = (model.h.order() as i128).pow(2);
    let peers = factorial(model.m() - 1) as i128 - 1;
    let per_j: i128 = distance_tables(model)
        .iter()
        .map(|t| t.iter().flatten().copied().max().unwrap_or(0) as i128)
        .sum();
    Q::new(2 * n as i128 * peers * per_j, pair_denominator(model, n) * h2)
}
