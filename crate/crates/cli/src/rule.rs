//! `--rule` specifications such as `dictator:i=1,sigma=213`.

use irspec::aggregators::Rule;
use irspec::perm::parse_perm;

use crate::commands::CliError;

#[derive(Debug, PartialEq)]
pub enum RuleSpec {
    Named(Rule),
    Random,
}

pub fn parse_rule(text: &str, m: usize) -> Result<RuleSpec, CliError> {
    let (name, params) = text.split_once(':').unwrap_or((text, ""));
    let mut fields = Vec::new();
    for part in params.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("rule parameter {part:?} is not key=value")))?;
        fields.push((k.trim(), v.trim()));
    }
    let get = |key: &str| {
        fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| CliError::input(format!("rule {name:?} needs {key}=...")))
    };
    let allow = |keys: &[&str]| match fields.iter().find(|(k, _)| !keys.contains(k)) {
        Some((k, _)) => Err(CliError::input(format!("rule {name:?} has no parameter {k:?}"))),
        None => Ok(()),
    };
    let spec = match name.trim() {
        "dictator" => {
            allow(&["i", "sigma"])?;
            let voter = get("i")?
                .parse()
                .map_err(|_| CliError::input("dictator voter i must be a positive integer"))?;
            let sigma = parse_perm(get("sigma")?, m)?;
            RuleSpec::Named(Rule::Dictator { voter, sigma })
        }
        "constant" => {
            allow(&["output"])?;
            RuleSpec::Named(Rule::Constant { output: parse_perm(get("output")?, m)? })
        }
        "relabel" => {
            allow(&["sigma"])?;
            RuleSpec::Named(Rule::Relabel { sigma: parse_perm(get("sigma")?, m)? })
        }
        "plurality" => {
            allow(&[])?;
            RuleSpec::Named(Rule::Plurality)
        }
        "borda" => {
            allow(&[])?;
            RuleSpec::Named(Rule::Borda)
        }
        "random" => {
            allow(&[])?;
            RuleSpec::Random
        }
        other => return Err(CliError::input(format!("unknown rule {other:?}"))),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use irspec::perm::parse_any;

    #[test]
    fn parses_rules() {
        assert_eq!(
            parse_rule("dictator:i=2,sigma=213", 3).unwrap(),
            RuleSpec::Named(Rule::Dictator { voter: 2, sigma: parse_any("213").unwrap() })
        );
        assert_eq!(parse_rule("borda", 3).unwrap(), RuleSpec::Named(Rule::Borda));
        assert_eq!(parse_rule("random", 4).unwrap(), RuleSpec::Random);
        for bad in ["dictator:i=1", "dictator:i=x,sigma=213", "borda:k=1", "veto", "constant:output=12"] {
            assert!(parse_rule(bad, 3).is_err(), "{bad}");
        }
    }
}
