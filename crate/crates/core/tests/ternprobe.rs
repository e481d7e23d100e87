use relfix_core::repair::{repair_with, RepairConfig, Verdict};
use relfix_core::testkit::{ternary_spec, Ternary};

#[test]
#[ignore]
fn probe() {
    for d in 1..=3usize {
        let (spec, loc) = ternary_spec();
        let cfg = RepairConfig {
            max_depth: d,
            bitwidth: Some(8),
            deterministic: true,
            ..Default::default()
        };
        let out = repair_with(&Ternary, &spec, &[loc], &cfg).expect("repair runs");
        let st = &out.stats;
        println!(
            "d={d}: verdict={:?} generated={} visited={} pruned={} remaining={}",
            matches!(out.verdict, Verdict::SpaceExhausted),
            st.generated, st.visited, st.pruned, st.remaining
        );
    }
}
