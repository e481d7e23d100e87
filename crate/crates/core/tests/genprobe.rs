use relfix_core::solve::{solve_command, SolveOptions};
use relfix_core::testkit;

#[test]
#[ignore]
fn probe() {
    let t0 = std::time::Instant::now();
    let mut runs = 0;
    let mut checks = 0;
    let mut sat = 0;
    for seed in 0..200u64 {
        let g = testkit::random_spec(seed);
        let cmd = &g.spec.commands[0];
        match cmd.kind {
            relfix_core::ast::CmdKind::Run => runs += 1,
            relfix_core::ast::CmdKind::Check => checks += 1,
        }
        let naive = testkit::naive_solve(&g.spec, cmd).expect("in scope");
        let fast = match solve_command(&g.spec, cmd, &SolveOptions::default()) {
            Ok((found, _)) => found.is_some(),
            Err(e) => panic!("seed {seed}: solver error {e}\n{}", g.text),
        };
        if naive {
            sat += 1;
        }
        assert_eq!(naive, fast, "seed {seed} disagrees\n{}", g.text);
    }
    println!(
        "200 seeds in {:?}: {runs} runs, {checks} checks, {sat} satisfiable",
        t0.elapsed()
    );
}
