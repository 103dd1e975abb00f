//! Aggregators `S_m^n → S_m/H`, their encodings, and the consistency
//! identity `g(x)g(x)ᵀ = M_H`.
//!
//! Every aggregator is materialized as a table of coset ids indexed by the
//! mixed-radix profile index (voter 1 most significant, each digit the
//! lexicographic index of that voter's ranking).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::laplacian::IndicatorField;
use crate::model::Model;
use crate::perm::{compose, format_partition, Permutation, Profile, ProfileSpace};
use crate::repr::{mat_rows, Mat, MatrixField};

/// Largest table the crate will materialize.
pub const MAX_TABLE: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Rule {
    Table,
    /// `x ↦ compose(x_voter, sigma)∘H`, voter 1-based.
    Dictator { voter: usize, sigma: Permutation },
    Constant { output: Permutation },
    Plurality,
    Borda,
    /// `x ↦ compose(sigma, x_1)∘H`: renames alternatives in voter 1's
    /// ranking.
    Relabel { sigma: Permutation },
}

#[derive(Clone, Debug)]
pub struct Aggregator {
    pub m: usize,
    pub n: usize,
    pub partition: Vec<Vec<usize>>,
    pub rule: Rule,
    space: ProfileSpace,
    table: Vec<u32>,
}

fn profile_space(model: &Model, n: usize) -> Result<ProfileSpace> {
    let space = ProfileSpace::new(model.order(), n)?;
    if space.size > MAX_TABLE {
        return Err(Error::budget(
            "aggregator table",
            space.size as f64,
            MAX_TABLE as f64,
        ));
    }
    Ok(space)
}

impl Aggregator {
    fn build(model: &Model, n: usize, rule: Rule, exec: Exec, f: impl Fn(&[usize]) -> u32 + Sync + Send) -> Result<Self> {
        let space = profile_space(model, n)?;
        let table = exec.map(space.size, |p| f(&space.decode(p)));
        Ok(Aggregator {
            m: model.m(),
            n,
            partition: model.h.partition().to_vec(),
            rule,
            space,
            table,
        })
    }

    pub fn from_table(model: &Model, n: usize, table: Vec<u32>) -> Result<Self> {
        let space = profile_space(model, n)?;
        if table.len() != space.size {
            return Err(Error::Shape(format!(
                "table has {} entries, expected {}",
                table.len(),
                space.size
            )));
        }
        if let Some(&bad) = table.iter().find(|&&k| k as usize >= model.h.coset_count()) {
            return Err(Error::Input(format!("coset id {bad} out of range")));
        }
        Ok(Aggregator {
            m: model.m(),
            n,
            partition: model.h.partition().to_vec(),
            rule: Rule::Table,
            space,
            table,
        })
    }

    pub fn space(&self) -> ProfileSpace {
        self.space
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    /// Coset id at profile index `p`.
    pub fn output(&self, p: usize) -> usize {
        self.table[p] as usize
    }

    pub fn evaluate(&self, model: &Model, profile: &Profile) -> Result<Permutation> {
        if profile.n() != self.n || profile.m() != self.m {
            return Err(Error::Shape(format!(
                "profile is {}x{}, aggregator expects {}x{}",
                profile.n(),
                profile.m(),
                self.n,
                self.m
            )));
        }
        let digits: Vec<usize> = profile.votes.iter().map(|v| v.lex_index()).collect();
        let k = self.table[self.space.encode(&digits)] as usize;
        Ok(model.h.cosets()[k].representative.clone())
    }

    /// Copy with the entry at profile `p` replaced; the rule becomes a table.
    pub fn with_entry(&self, p: usize, coset: u32) -> Aggregator {
        let mut out = self.clone();
        out.table[p] = coset;
        out.rule = Rule::Table;
        out
    }

    pub fn indicator(&self, model: &Model) -> IndicatorField {
        IndicatorField::from_table(self.space, model.h.coset_count(), &self.table).unwrap()
    }

    pub fn to_json(&self, model: &Model) -> AggregatorJson {
        let entries = match self.rule {
            Rule::Table => (0..self.space.size)
                .map(|p| Entry {
                    profile: self
                        .space
                        .decode(p)
                        .into_iter()
                        .map(|d| model.group.get(d).clone())
                        .collect(),
                    output: model.h.cosets()[self.table[p] as usize].representative.clone(),
                })
                .collect(),
            _ => Vec::new(),
        };
        AggregatorJson {
            m: self.m,
            n: self.n,
            partition: format_partition(&self.partition),
            rule: self.rule.clone(),
            entries,
        }
    }
}

pub fn make_dictator(model: &Model, n: usize, voter: usize, sigma: &Permutation, exec: Exec) -> Result<Aggregator> {
    if voter == 0 || voter > n {
        return Err(Error::Input(format!("voter {voter} outside 1..={n}")));
    }
    if sigma.m() != model.m() {
        return Err(Error::Shape("sigma has a different m".into()));
    }
    let rule = Rule::Dictator { voter, sigma: sigma.clone() };
    Aggregator::build(model, n, rule, exec, |d| {
        let y = compose(model.group.get(d[voter - 1]), sigma).unwrap();
        model.h.coset_of(&y) as u32
    })
}

pub fn make_constant(model: &Model, n: usize, output: &Permutation, exec: Exec) -> Result<Aggregator> {
    if output.m() != model.m() {
        return Err(Error::Shape("output has a different m".into()));
    }
    let k = model.h.coset_of(output) as u32;
    let rep = model.h.cosets()[k as usize].representative.clone();
    Aggregator::build(model, n, Rule::Constant { output: rep }, exec, |_| k)
}

pub fn make_relabel(model: &Model, n: usize, sigma: &Permutation, exec: Exec) -> Result<Aggregator> {
    if sigma.m() != model.m() {
        return Err(Error::Shape("sigma has a different m".into()));
    }
    Aggregator::build(model, n, Rule::Relabel { sigma: sigma.clone() }, exec, |d| {
        let y = compose(sigma, model.group.get(d[0])).unwrap();
        model.h.coset_of(&y) as u32
    })
}

/// Ranking by descending score, ties broken by ascending name.
fn ranking_from_scores(scores: &[i64]) -> Permutation {
    let mut names: Vec<usize> = (1..=scores.len()).collect();
    names.sort_by(|&a, &b| scores[b - 1].cmp(&scores[a - 1]).then(a.cmp(&b)));
    Permutation::from_word(names.into_iter().map(|x| x as u8).collect()).unwrap()
}

pub fn plurality_ranking(votes: &[&Permutation]) -> Permutation {
    let m = votes[0].m();
    let mut scores = vec![0i64; m];
    for v in votes {
        scores[v.at(1) - 1] += 1;
    }
    ranking_from_scores(&scores)
}

pub fn borda_ranking(votes: &[&Permutation]) -> Permutation {
    let m = votes[0].m();
    let mut scores = vec![0i64; m];
    for v in votes {
        for r in 1..=m {
            scores[v.at(r) - 1] += (m - r) as i64;
        }
    }
    ranking_from_scores(&scores)
}

pub fn make_plurality(model: &Model, n: usize, exec: Exec) -> Result<Aggregator> {
    Aggregator::build(model, n, Rule::Plurality, exec, |d| {
        let votes: Vec<_> = d.iter().map(|&e| model.group.get(e)).collect();
        model.h.coset_of(&plurality_ranking(&votes)) as u32
    })
}

pub fn make_borda(model: &Model, n: usize, exec: Exec) -> Result<Aggregator> {
    Aggregator::build(model, n, Rule::Borda, exec, |d| {
        let votes: Vec<_> = d.iter().map(|&e| model.group.get(e)).collect();
        model.h.coset_of(&borda_ranking(&votes)) as u32
    })
}

/// Uniformly random table.
pub fn random_aggregator<R: Rng>(model: &Model, n: usize, rng: &mut R) -> Result<Aggregator> {
    let space = profile_space(model, n)?;
    let k = model.h.coset_count() as u32;
    let table = (0..space.size).map(|_| rng.gen_range(0..k)).collect();
    Aggregator::from_table(model, n, table)
}

/// Builds an aggregator from a rule.
pub fn from_rule(model: &Model, n: usize, rule: &Rule, exec: Exec) -> Result<Aggregator> {
    match rule {
        Rule::Dictator { voter, sigma } => make_dictator(model, n, *voter, sigma, exec),
        Rule::Constant { output } => make_constant(model, n, output, exec),
        Rule::Plurality => make_plurality(model, n, exec),
        Rule::Borda => make_borda(model, n, exec),
        Rule::Relabel { sigma } => make_relabel(model, n, sigma, exec),
        Rule::Table => Err(Error::Input("a table rule needs entries".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub profile: Vec<Permutation>,
    pub output: Permutation,
}

/// Serialized aggregator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatorJson {
    pub m: usize,
    pub n: usize,
    /// Blocks of rank positions, e.g. `"1|2,3"`.
    pub partition: String,
    #[serde(flatten)]
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<Entry>,
}

impl AggregatorJson {
    pub fn partition(&self) -> Result<Vec<Vec<usize>>> {
        crate::perm::parse_partition(&self.partition)
    }

    /// Materializes the aggregator against a model built for the same
    /// `(m, partition)`.
    pub fn load(&self, model: &Model, exec: Exec) -> Result<Aggregator> {
        if self.m != model.m() || self.partition()? != model.h.partition() {
            return Err(Error::Input("aggregator does not match the model".into()));
        }
        if self.rule != Rule::Table {
            return from_rule(model, self.n, &self.rule, exec);
        }
        let space = profile_space(model, self.n)?;
        let mut table = vec![u32::MAX; space.size];
        for e in &self.entries {
            if e.profile.len() != self.n || e.profile.iter().any(|v| v.m() != self.m) {
                return Err(Error::Input(format!("entry {:?} has the wrong shape", e.profile)));
            }
            let digits: Vec<usize> = e.profile.iter().map(|v| v.lex_index()).collect();
            let k = model.h.coset_id_of_rep(&e.output).ok_or_else(|| {
                Error::Input(format!(
                    "output {} is not a canonical coset representative",
                    e.output
                ))
            })?;
            let p = space.encode(&digits);
            if table[p] != u32::MAX {
                return Err(Error::Input(format!("duplicate entry for {:?}", e.profile)));
            }
            table[p] = k as u32;
        }
        if let Some(p) = table.iter().position(|&k| k == u32::MAX) {
            return Err(Error::Input(format!(
                "table is not total: profile index {p} missing"
            )));
        }
        Aggregator::from_table(model, self.n, table)
    }
}

/// `g(x) = E_{y∈f(x)} ρ¹(y)`.
pub fn encode_g(agg: &Aggregator, model: &Model, exec: Exec) -> MatrixField {
    let values = exec.map(agg.space.size, |p| model.coset_g[agg.output(p)].clone());
    MatrixField::new(agg.space, values).unwrap()
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    #[serde(serialize_with = "crate::repr::ser_mat")]
    pub m_h: Mat,
    /// `max_x |g(x)g(x)ᵀ − M_H|`.
    pub deviation: f64,
    /// `|M_H² − M_H|` and `|M_H − M_Hᵀ|`.
    pub idempotence_residual: f64,
    pub trace: f64,
    /// `M_H ≠ 0`.
    pub fixing: bool,
}

pub fn consistency_check(agg: &Aggregator, model: &Model, exec: Exec) -> ConsistencyReport {
    let m_h = &model.m_h;
    let deviation = exec
        .map(agg.space.size, |p| {
            let g = &model.coset_g[agg.output(p)];
            (g * g.transpose() - m_h).abs().max()
        })
        .into_iter()
        .fold(0.0, f64::max);
    let (idempotence_residual, fixing) = projector_residual(m_h);
    ConsistencyReport {
        m_h: m_h.clone(),
        deviation,
        idempotence_residual,
        trace: m_h.trace(),
        fixing,
    }
}

/// Residual of `M` being a symmetric idempotent, and whether `M ≠ 0`.
pub fn projector_residual(m: &Mat) -> (f64, bool) {
    let idem = (m * m - m).abs().max();
    let sym = (m - m.transpose()).abs().max();
    (idem.max(sym), m.abs().max() > 1e-9)
}

impl Serialize for Aggregator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Aggregator", 4)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("partition", &format_partition(&self.partition))?;
        st.serialize_field("rule", &self.rule)?;
        st.end()
    }
}

/// Row-major rows of `M_H`, for reports.
pub fn m_h_rows(model: &Model) -> Vec<Vec<f64>> {
    mat_rows(&model.m_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_representation;
    use crate::perm::{enumerate_group, parse_any, parse_perm, FixingSubgroup};
    use crate::repr::eye;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> Permutation {
        parse_any(s).unwrap()
    }

    #[test]
    fn dictator_identity_returns_voter() {
        let model = Model::trivial(3).unwrap();
        let f = make_dictator(&model, 2, 1, &Permutation::identity(3), Exec::Sequential).unwrap();
        for a in enumerate_group(3).unwrap() {
            for b in enumerate_group(3).unwrap() {
                let prof = Profile::new(vec![a.clone(), b]).unwrap();
                assert_eq!(f.evaluate(&model, &prof).unwrap(), a);
            }
        }
        assert!(make_dictator(&model, 2, 3, &Permutation::identity(3), Exec::Sequential).is_err());
    }

    #[test]
    fn scf_dictator_names_top_choice() {
        let model = Model::winner(3).unwrap();
        let f = make_dictator(&model, 1, 1, &Permutation::identity(3), Exec::Sequential).unwrap();
        for x in enumerate_group(3).unwrap() {
            let out = f.evaluate(&model, &Profile::new(vec![x.clone()]).unwrap()).unwrap();
            assert_eq!(out.at(1), x.at(1));
        }
    }

    #[test]
    fn plurality_and_borda() {
        let model = Model::winner(3).unwrap();
        let f = make_plurality(&model, 3, Exec::Parallel).unwrap();
        let unanimous = Profile::new(vec![p("123"); 3]).unwrap();
        assert_eq!(f.evaluate(&model, &unanimous).unwrap().at(1), 1);

        let votes = [p("123"), p("231")];
        assert_eq!(borda_ranking(&[&votes[0], &votes[1]]), p("213"));
        let trivial = Model::trivial(3).unwrap();
        let b = make_borda(&trivial, 2, Exec::Sequential).unwrap();
        let prof = Profile::new(votes.to_vec()).unwrap();
        assert_eq!(b.evaluate(&trivial, &prof).unwrap(), p("213"));
        // Tie on scores 1:1, 2:1, 3:0 resolved by name.
        assert_eq!(plurality_ranking(&[&p("123"), &p("213")]), p("123"));
    }

    #[test]
    fn constant_and_shape_errors() {
        let model = Model::trivial(3).unwrap();
        let f = make_constant(&model, 2, &p("312"), Exec::Sequential).unwrap();
        assert!(f.table().iter().all(|&k| model.h.cosets()[k as usize].representative == p("312")));
        let bad = Profile::new(vec![p("123")]).unwrap();
        assert!(f.evaluate(&model, &bad).is_err());
    }

    #[test]
    fn encodings_and_consistency() {
        let swf = Model::trivial(4).unwrap();
        let d = make_dictator(&swf, 1, 1, &p("2143"), Exec::Sequential).unwrap();
        let g = encode_g(&d, &swf, Exec::Sequential);
        for (idx, v) in g.values.iter().enumerate() {
            let y = compose(swf.group.get(idx), &p("2143")).unwrap();
            assert!((v - swf.rho.get(y.lex_index())).abs().max() < 1e-12);
            assert!((v * v.transpose() - eye(3)).abs().max() < 1e-10);
        }
        let rep = consistency_check(&d, &swf, Exec::Sequential);
        assert!((rep.trace - 3.0).abs() < 1e-12);
        assert!(rep.deviation < 1e-9);

        let scf = Model::winner(3).unwrap();
        let f = make_plurality(&scf, 2, Exec::Sequential).unwrap();
        let rep = consistency_check(&f, &scf, Exec::Parallel);
        assert!(rep.fixing);
        assert!((rep.trace - 1.0).abs() < 1e-12);
        assert!(rep.deviation < 1e-9);
        assert!(rep.idempotence_residual < 1e-9);
        // M_H from any single encoding value agrees with the mean over H.
        let g0 = &scf.coset_g[0];
        assert!((g0 * g0.transpose() - &scf.m_h).abs().max() < 1e-10);
    }

    #[test]
    fn alternating_group_is_not_fixing() {
        let model = Model::trivial(3).unwrap();
        let even = [p("123"), p("231"), p("312")];
        let m = mean_representation(&even, &model.rho);
        let (_, fixing) = projector_residual(&m);
        assert!(!fixing);
    }

    #[test]
    fn json_round_trip() {
        let model = Model::new(3, &[vec![1], vec![2, 3]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_aggregator(&model, 2, &mut rng).unwrap();
        let text = serde_json::to_string(&f.to_json(&model)).unwrap();
        let back: AggregatorJson = serde_json::from_str(&text).unwrap();
        let g = back.load(&model, Exec::Sequential).unwrap();
        assert_eq!(f.table(), g.table());

        let d = make_dictator(&model, 2, 2, &parse_perm("213", 3).unwrap(), Exec::Sequential).unwrap();
        let text = serde_json::to_string(&d.to_json(&model)).unwrap();
        assert!(text.contains("\"type\":\"dictator\""));
        let back: AggregatorJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.load(&model, Exec::Sequential).unwrap().table(), d.table());
    }

    #[test]
    fn json_rejects_bad_tables() {
        let model = Model::winner(3).unwrap();
        let text = r#"{"m":3,"n":1,"partition":"1|2,3","type":"table",
            "entries":[{"profile":["123"],"output":"132"}]}"#;
        let j: AggregatorJson = serde_json::from_str(text).unwrap();
        assert!(matches!(j.load(&model, Exec::Sequential), Err(Error::Input(_))));
        let h = FixingSubgroup::winner(3).unwrap();
        assert_eq!(h.coset_count(), 3);
    }
}
