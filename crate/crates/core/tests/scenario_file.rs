use airsim::ScenarioConfig;

const SHIPPED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/default.conf");

#[test]
fn shipped_scenario_matches_defaults() {
    let cfg = ScenarioConfig::load(SHIPPED).unwrap();
    assert_eq!(cfg, ScenarioConfig::default());
}

#[test]
fn shipped_scenario_lists_every_key() {
    let text = std::fs::read_to_string(SHIPPED).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && l.contains('='))
        .map(|l| l.split('=').next().unwrap().trim())
        .collect();
    let expected: Vec<String> = ScenarioConfig::default()
        .to_text()
        .lines()
        .filter(|l| l.contains('='))
        .map(|l| l.split('=').next().unwrap().trim().to_string())
        .collect();
    assert_eq!(keys, expected);
}
