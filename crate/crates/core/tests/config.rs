use delay_hjb::config::ScenarioConfig;

#[test]
fn readme_scenario_parses_to_the_defaults() {
    let readme = include_str!("../../../README.md");
    let block = readme
        .split("```toml\n")
        .nth(1)
        .and_then(|s| s.split("```").next())
        .expect("toml block in README");
    let cfg = ScenarioConfig::from_toml_str(block).unwrap();
    let model = cfg.model::<f64>(cfg.grid_n().unwrap(), Some(block)).unwrap();
    assert_eq!(model.n(), 200);
    assert_eq!(cfg.value_opts::<f64>().unwrap(), ScenarioConfig::default().value_opts().unwrap());
}
