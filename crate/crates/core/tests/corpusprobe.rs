use relfix_core::loc;
use relfix_core::repair::{repair, PruneReason, RepairConfig, Verdict};
use relfix_core::{parse, print_spec};
use std::time::Duration;

fn load(name: &str) -> (relfix_core::Spec, Vec<relfix_core::Location>) {
    let dir = format!("{}/../../corpus", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(format!("{dir}/{name}.rspec")).unwrap();
    let spec = parse(&src).unwrap();
    let locs = match std::fs::read_to_string(format!("{dir}/{name}.locs")) {
        Ok(text) => {
            let markers: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect();
            loc::resolve_markers(&spec, &markers).unwrap()
        }
        Err(_) => loc::validate_inline_markers(&spec).unwrap(),
    };
    (spec, locs)
}

fn cfg(prune: bool) -> RepairConfig {
    RepairConfig {
        max_depth: 1,
        timeout: Duration::from_secs(120),
        prune_partial: prune,
        prune_variabilization: prune,
        deterministic: true,
        bitwidth: Some(3),
        ..Default::default()
    }
}

#[test]
#[ignore]
fn probe() {
    let t0 = std::time::Instant::now();
    for i in 1..=12 {
        let name = format!("c{i:02}");
        let (spec, locs) = load(&name);
        let all = repair(&spec, &locs, &cfg(true)).unwrap();
        let none = repair(&spec, &locs, &cfg(false)).unwrap();
        let verdict = |v: &Verdict| match v {
            Verdict::Fixed { .. } => "fixed",
            Verdict::SpaceExhausted => "exhausted",
            Verdict::Timeout { .. } => "timeout",
        };
        let va = verdict(&all.verdict);
        let vn = verdict(&none.verdict);
        let patch_eq = match (&all.verdict, &none.verdict) {
            (Verdict::Fixed { spec: a, .. }, Verdict::Fixed { spec: b, .. }) => {
                print_spec(a) == print_spec(b)
            }
            (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
        };
        let fired = all
            .records
            .iter()
            .filter(|r| matches!(r.reason, PruneReason::Variabilization { .. }))
            .count();
        println!(
            "{name}: {va}/{vn} agree={patch_eq} locs={} gen={} vis {} vs {} calls {} vs {} var-fired={fired}",
            locs.len(),
            all.stats.generated,
            all.stats.visited,
            none.stats.visited,
            all.stats.solver_calls,
            none.stats.solver_calls,
        );
        assert!(patch_eq, "{name}: modes disagree");
        assert!(all.stats.solver_calls <= none.stats.solver_calls, "{name}: call count");
    }
    println!("corpus sweep in {:?}", t0.elapsed());
}
