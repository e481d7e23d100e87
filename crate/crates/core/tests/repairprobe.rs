//! scratch: trace solver calls during the fig1 repair
use std::time::Duration;

use relfix_core::loc;
use relfix_core::repair::{repair, RepairConfig};
use relfix_core::parse;

#[test]
#[ignore]
fn probe_repair() {
    let path = format!("{}/../../figures/list.rspec", env!("CARGO_MANIFEST_DIR"));
    let spec = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let locs = loc::validate_inline_markers(&spec).unwrap();
    let cfg = RepairConfig {
        max_depth: 2,
        timeout: Duration::from_secs(290),
        deterministic: true,
        bitwidth: Some(3),
        ..RepairConfig::default()
    };
    let t = std::time::Instant::now();
    let out = repair(&spec, &locs, &cfg).unwrap();
    println!("total {:?} stats {:?}", t.elapsed(), out.stats);
}
