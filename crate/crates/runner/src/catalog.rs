//! Scenarios compiled into the binary.

use crate::error::ScenarioError;
use crate::scenario::Scenario;

const BUNDLED: &[(&str, &str)] = &[
    (
        "paper_eq3",
        include_str!("../../../scenarios/paper_eq3.toml"),
    ),
    (
        "paper_eq6",
        include_str!("../../../scenarios/paper_eq6.toml"),
    ),
    ("converse", include_str!("../../../scenarios/converse.toml")),
    (
        "two_slit_inconsistency",
        include_str!("../../../scenarios/two_slit_inconsistency.toml"),
    ),
    ("figure2", include_str!("../../../scenarios/figure2.toml")),
    ("figure3", include_str!("../../../scenarios/figure3.toml")),
    (
        "decohered",
        include_str!("../../../scenarios/decohered.toml"),
    ),
    (
        "fringe_scan",
        include_str!("../../../scenarios/fringe_scan.toml"),
    ),
    (
        "equivariance",
        include_str!("../../../scenarios/equivariance.toml"),
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<Scenario, ScenarioError> {
    let src = source(name).ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
    Scenario::parse(src, &format!("<bundled {name}>"))
}

pub fn all() -> Result<Vec<Scenario>, ScenarioError> {
    names().map(load).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_scenario_parses_and_is_named_after_its_key() {
        for n in names() {
            let s = load(n).unwrap();
            assert_eq!(s.name, n);
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(
            load("nope"),
            Err(ScenarioError::UnknownBundled(_))
        ));
    }
}
