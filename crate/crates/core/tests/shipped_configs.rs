use std::path::PathBuf;

use risce::harness::HarnessConfig;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn desk_file_matches_builtin() {
    let loaded = HarnessConfig::load(&shipped("desk.toml")).unwrap();
    assert_eq!(loaded, HarnessConfig::desk());
}

#[test]
fn full_file_matches_builtin() {
    let loaded = HarnessConfig::load(&shipped("full.toml")).unwrap();
    assert_eq!(loaded, HarnessConfig::full());
}

#[test]
fn builtin_configs_round_trip_through_toml() {
    for hc in [HarnessConfig::desk(), HarnessConfig::full()] {
        assert_eq!(HarnessConfig::from_toml_str(&hc.to_toml()).unwrap(), hc);
    }
}
