use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use irspec::aggregators::{from_rule, random_aggregator, Aggregator, AggregatorJson};
use irspec::fkn::{corrupt, measured_gap, robustness, Rounded};
use irspec::hyper::{
    audit_tables, build_tables, hypercontractivity_check, hypercontractivity_sweep, HyperCheck,
    Sigma,
};
use irspec::laplacian::{hat_l1, spectral_gap_with};
use irspec::metrics::{
    census_ir_functions, default_orders, ir_combinatorial, manipulation_power, orders_from_json,
};
use irspec::perm::parse_partition;
use irspec::{Exec, Model};

use crate::rule::{parse_rule, RuleSpec};
use crate::{AnalyzeArgs, CensusArgs, MomentsArgs, SpectraArgs};

const EXEC: Exec = Exec::Parallel;

#[derive(Debug)]
pub struct CliError {
    message: String,
    feasibility: bool,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { message: message.into(), feasibility: false }
    }

    pub fn exit_code(&self) -> u8 {
        if self.feasibility {
            3
        } else {
            2
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<irspec::Error> for CliError {
    fn from(e: irspec::Error) -> Self {
        CliError { feasibility: e.is_feasibility(), message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(format!("invalid JSON: {e}"))
    }
}

pub struct Report {
    pub json: Value,
    pub summary: Vec<String>,
}

type Outcome = Result<Report, CliError>;

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn model_for(m: usize, partition: Option<&str>) -> Result<Model, CliError> {
    Ok(match partition {
        Some(text) => Model::new(m, &parse_partition(text)?)?,
        None => Model::trivial(m)?,
    })
}

pub fn spectra(a: &SpectraArgs) -> Outcome {
    if a.m < 3 {
        return Err(CliError::input(format!(
            "spectra needs m ≥ 3: for m = {} every ranking is determined by one rank and no constraint binds",
            a.m
        )));
    }
    if a.n == 0 {
        return Err(CliError::input("n must be at least 1"));
    }
    let sys = hat_l1(a.m)?;
    let model = Model::trivial(a.m)?;
    let gap = spectral_gap_with(&model, a.n, a.dense_limit, EXEC, a.seed)?;
    let summary = vec![
        format!(
            "reduced one-voter spectrum (m = {}): {}",
            a.m,
            sys.clusters
                .iter()
                .map(|c| format!("{:.6} x{}", if c.value.abs() < 1e-12 { 0.0 } else { c.value }, c.multiplicity))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        format!(
            "gap (m = {}, n = {}): {:.6} [{}], bracket [{:.6}, {:.6}]",
            a.m,
            a.n,
            gap.gap,
            if gap.exhaustive { "exact" } else { "upper estimate" },
            gap.bracket_lower,
            gap.bracket_upper
        ),
    ];
    Ok(Report {
        json: json!({
            "command": "spectra",
            "config": { "m": a.m, "n": a.n, "dense_limit": a.dense_limit, "seed": a.seed },
            "reduced": {
                "eigenvalues": sys.eigenvalues,
                "clusters": sys.clusters,
                "eet_residual": sys.eet_residual(),
            },
            "gap": gap,
        }),
        summary,
    })
}

fn load_aggregator(a: &AnalyzeArgs, rng: &mut ChaCha8Rng) -> Result<(Model, Aggregator), CliError> {
    if let Some(path) = &a.input {
        let spec: AggregatorJson = serde_json::from_str(&read(path)?)?;
        if a.m.is_some_and(|m| m != spec.m) || a.n.is_some_and(|n| n != spec.n) {
            return Err(CliError::input("--m/--n disagree with the input file"));
        }
        let model = Model::new(spec.m, &spec.partition()?)?;
        let agg = spec.load(&model, EXEC)?;
        return Ok((model, agg));
    }
    let text = a
        .rule
        .as_deref()
        .ok_or_else(|| CliError::input("analyze needs --input or --rule"))?;
    let m = a.m.ok_or_else(|| CliError::input("--rule needs --m"))?;
    let n = a.n.unwrap_or(1);
    let model = model_for(m, a.partition.as_deref())?;
    let agg = match parse_rule(text, m)? {
        RuleSpec::Named(rule) => from_rule(&model, n, &rule, EXEC)?,
        RuleSpec::Random => random_aggregator(&model, n, rng)?,
    };
    Ok((model, agg))
}

pub fn analyze(a: &AnalyzeArgs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (model, mut agg) = load_aggregator(a, &mut rng)?;
    if a.corrupt > 0 {
        agg = corrupt(&agg, &model, a.corrupt, &mut rng);
    }
    let orders = match &a.orders {
        Some(path) => orders_from_json(&model, &read(path)?)?,
        None => default_orders(&model),
    };
    let ir = ir_combinatorial(&agg, &model, EXEC)?;
    let manipulation = manipulation_power(&agg, &model, &orders, EXEC)?;
    let gap = measured_gap(&model, agg.n + usize::from(a.center), a.dense_limit, EXEC)?;
    let rob = robustness(&agg, &model, &gap, a.center, EXEC)?;
    let rounded = match &rob.best.rounded {
        Rounded::Dictator { voter, sigma } => format!("dictator of voter {voter} with sigma = {sigma}"),
        Rounded::Constant { output } => format!("constant {output}"),
    };
    let summary = vec![
        format!(
            "m = {}, n = {}, partition {}, rule {}",
            agg.m,
            agg.n,
            irspec::perm::format_partition(&agg.partition),
            serde_json::to_string(&agg.rule)?
        ),
        format!(
            "IR = {} ({:.6}), indicator rate = {}",
            ir.profile_distance_ir.0, ir.quadratic_ir, ir.indicator_ir.0
        ),
        format!(
            "manipulation power = {}, c = {}, cM >= IR: {}, 2cM >= IR: {}",
            manipulation.total.0, manipulation.c.0, manipulation.bound_holds, manipulation.unordered_bound_holds
        ),
        format!(
            "kernel distance^2 = {:.6} (bound {:.6}), nearest: {rounded}, distance^2 = {:.6}",
            rob.kernel_distance2, rob.kernel_bound, rob.best.distance2
        ),
    ];
    Ok(Report {
        json: json!({
            "command": "analyze",
            "config": {
                "input": a.input.as_ref().map(|p| p.display().to_string()),
                "rule": a.rule,
                "corrupt": a.corrupt,
                "center": a.center,
                "orders": orders.label,
                "dense_limit": a.dense_limit,
                "seed": a.seed,
            },
            "aggregator": {
                "m": agg.m,
                "n": agg.n,
                "partition": irspec::perm::format_partition(&agg.partition),
                "rule": agg.rule,
            },
            "ir": ir,
            "manipulation": manipulation,
            "robustness": rob,
        }),
        summary,
    })
}

pub fn census(a: &CensusArgs) -> Outcome {
    let model = model_for(a.m, a.partition.as_deref())?;
    let report = census_ir_functions(&model, a.n, EXEC)?;
    let mut summary = vec![format!(
        "examined {} functions (m = {}, n = {}, partition {}): {} constants, {} dictators, {} other",
        report.functions_examined,
        report.m,
        report.n,
        report.partition,
        report.constants,
        report.dictators,
        report.other
    )];
    summary.extend(report.degenerate.clone());
    Ok(Report {
        json: json!({ "command": "census", "report": report }),
        summary,
    })
}

fn parse_range(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::input(format!("range {text:?} is not of the form a-b"));
    let (lo, hi) = text.split_once('-').unwrap_or((text, text));
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn first_clean_tail(rows: &[HyperCheck]) -> Option<usize> {
    let mut m0 = None;
    for row in rows.iter().rev() {
        if row.violations > 0 {
            break;
        }
        m0 = Some(row.m);
    }
    m0
}

pub fn moments(a: &MomentsArgs) -> Outcome {
    let ms = parse_range(&a.range)?;
    let sigma = Sigma::parse(&a.sigma_hyper)?;
    let mut dets = Vec::new();
    for &m in &ms {
        let t = build_tables(m)?;
        dets.push(json!({ "m": m, "det": t.det.to_string(), "matches_formula": t.det_matches_formula }));
    }
    let det_ok = dets.iter().all(|d| d["matches_formula"] == true);
    let audit = audit_tables(a.m, a.audit_samples, a.seed)?;
    let tables = build_tables(a.m)?;
    let sweep = hypercontractivity_sweep(&ms, a.samples, a.seed, EXEC)?;
    let headline = match sigma {
        Sigma::InverseSqrtM => sweep.at_inverse_sqrt.clone(),
        _ => ms
            .iter()
            .map(|&m| hypercontractivity_check(m, &sigma, a.samples, a.seed, EXEC))
            .collect::<irspec::Result<Vec<_>>>()?,
    };
    let m0 = first_clean_tail(&headline);
    let mut summary = vec![format!(
        "determinant identity for m = {}-{}: {}",
        ms[0],
        ms[ms.len() - 1],
        if det_ok { "exact" } else { "MISMATCH" }
    )];
    for s in &audit.sources {
        summary.push(format!(
            "{} at m = {}: {}/{} entries agree, reproduces the fourth moment: {}",
            s.source, audit.m, s.agreeing, s.entries_checked, s.reproduces_fourth_moment
        ));
    }
    summary.push(format!(
        "audited table matches index sums: {}, reproduces the fourth moment: {}",
        audit.derived_matches_brute_force, audit.derived_reproduces_fourth_moment
    ));
    summary.push(format!(
        "violations at sigma = {}: {}",
        sigma.label(),
        headline
            .iter()
            .map(|r| format!("m={}:{}", r.m, r.violations))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    summary.push(match m0 {
        Some(m0) => format!("empirical m0 = {m0}"),
        None => "empirical m0: violations persist at the largest m".to_string(),
    });
    Ok(Report {
        json: json!({
            "command": "moments",
            "config": {
                "m": a.m,
                "range": ms,
                "sigma_hyper": sigma.label(),
                "samples": a.samples,
                "audit_samples": a.audit_samples,
                "seed": a.seed,
            },
            "determinant": { "all_match": det_ok, "per_m": dets },
            "audit": audit,
            "fourth_moment_weights": { "m": a.m, "weights": tables.weights },
            "hypercontractivity": {
                "sigma": sigma.label(),
                "rows": headline,
                "empirical_m0": m0,
                "grid": sweep.grid,
                "violations_nonincreasing": sweep.violations_nonincreasing,
            },
        }),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("4-6").unwrap(), vec![4, 5, 6]);
        assert_eq!(parse_range("5").unwrap(), vec![5]);
        assert!(parse_range("6-4").is_err());
        assert!(parse_range("a-b").is_err());
    }

    #[test]
    fn error_codes() {
        let refusal: CliError = irspec::Error::Budget {
            what: "census".into(),
            estimate: "24^24".into(),
            limit: "1e9".into(),
        }
        .into();
        assert_eq!(refusal.exit_code(), 3);
        assert_eq!(CliError::input("x").exit_code(), 2);
    }
}
