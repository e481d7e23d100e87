//! scratch: time level materialization
use relfix_core::{loc, mutate, parse};

#[test]
#[ignore]
fn probe_levels() {
    let path = format!("{}/../../figures/list.rspec", env!("CARGO_MANIFEST_DIR"));
    let spec = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let locs = loc::validate_inline_markers(&spec).unwrap();
    for (i, l) in locs.iter().enumerate() {
        let t = std::time::Instant::now();
        let lv = mutate::mutant_levels(&spec, l, 2);
        println!(
            "loc{} d1={} d2={} elapsed={:?}",
            i,
            lv[0].len(),
            lv[1].len(),
            t.elapsed()
        );
    }
}
