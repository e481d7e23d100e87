//! Breadth-first repair over per-location mutant assignments.
//!
//! The candidate space is the product of per-location mutant pools (levels
//! 1..=max_depth, plus Original at depth 0). Candidates are visited in
//! ascending total depth; within one total, depth vectors ascend
//! lexicographically and the last location's mutant index moves fastest.
//! Two sound prunes cut the product:
//!
//! * partial repair: a failing command that depends on a proper subset S of
//!   the locations condemns the assignment restricted to S, because no
//!   change outside S can alter that command's verdict;
//! * variabilization: a failing check with a counterexample, one location
//!   freed to range over every relation value; if no value dissolves the
//!   counterexample, the other locations' current picks are condemned.
//!
//! Both emit a [`PruneRecord`] and any later candidate extending a recorded
//! fragment is skipped without solver work. Verdicts are memoized per
//! (command, dependency-restricted fragment); the same locality argument
//! that justifies the prunes makes the memo sound.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ast::{CmdKind, Location, Spec};
use crate::deps::command_deps;
use crate::instance::Instance;
use crate::loc::{self, LocError};
use crate::mutate::{mutant_levels_with, Catalog, Mutant, MutantSource};
use crate::solve::{check_command, exists_witness, SolveError, SolveOptions, WitnessOutcome};

#[derive(Debug, Clone)]
pub struct RepairConfig {
    /// Mutation budget per location.
    pub max_depth: usize,
    pub timeout: Duration,
    pub prune_partial: bool,
    pub prune_variabilization: bool,
    /// Witness domain cap for variabilization; above it the query answers
    /// Unknown and nothing is pruned.
    pub witness_cap: u32,
    pub deterministic: bool,
    /// Worker threads for candidate evaluation. Deterministic mode forces 1.
    pub jobs: usize,
    /// Scope overrides applied to every command before solving.
    pub scope_overrides: Vec<(String, u32, bool)>,
    pub bitwidth: Option<u32>,
    pub solve: SolveOptions,
}

impl Default for RepairConfig {
    fn default() -> RepairConfig {
        RepairConfig {
            max_depth: 2,
            timeout: Duration::from_secs(3600),
            prune_partial: true,
            prune_variabilization: true,
            witness_cap: 24,
            deterministic: false,
            jobs: 1,
            scope_overrides: Vec::new(),
            bitwidth: None,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("no oracle commands in the spec")]
    NoOracles,
    #[error("all oracle commands already pass")]
    NoFaults,
    #[error("bad repair locations: {0}")]
    BadLocations(String),
    #[error(transparent)]
    Loc(#[from] LocError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A failing oracle command, with its counterexample when one exists
/// (failing checks and unexpectedly satisfiable `expect 0` runs).
#[derive(Debug, Clone)]
pub struct Fault {
    pub cmd: usize,
    pub witness: Option<Instance>,
}

#[derive(Debug, Clone)]
pub struct OracleVerdict {
    pub cmd: usize,
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub enum PruneReason {
    /// The command depends only on the fragment's locations.
    PartialRepair { cmd: usize },
    /// No relation value at `loc` dissolves `cex` for `cmd`.
    Variabilization { cmd: usize, loc: usize, cex: Instance },
}

#[derive(Debug, Clone)]
pub struct PruneRecord {
    /// Pinned (location index, code) pairs, ascending by location. Code 0
    /// is Original, anything else names a mutant; see
    /// [`RepairOutcome::mutant_for`]. May be empty: the whole space.
    pub fragment: Vec<(usize, u32)>,
    pub reason: PruneReason,
    /// Candidates skipped on this record's account.
    pub hits: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RepairStats {
    /// Size of the bounded candidate space, root excluded.
    pub generated: u64,
    pub visited: u64,
    pub pruned: u64,
    pub pruned_partial: u64,
    pub pruned_variabilization: u64,
    /// Unvisited candidates at timeout; zero otherwise.
    pub remaining: u64,
    /// check_command invocations, detection and re-verification included.
    pub solver_calls: u64,
    pub memo_hits: u64,
    pub witness_calls: u64,
    pub witness_unknown: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Fixed {
        /// Per-location replacement, None = kept original.
        assignment: Vec<Option<Mutant>>,
        spec: Spec,
    },
    SpaceExhausted,
    Timeout {
        cause: String,
    },
}

#[derive(Debug)]
pub struct RepairOutcome {
    pub verdict: Verdict,
    pub stats: RepairStats,
    pub records: Vec<PruneRecord>,
    pub oracle_before: Vec<OracleVerdict>,
    /// Populated on Fixed: fresh verdicts on the patched spec.
    pub oracle_after: Vec<OracleVerdict>,
    pub locs: Vec<Location>,
    /// levels[loc][d-1] = the depth-d mutant pool, in visit order.
    pub levels: Vec<Vec<Vec<Mutant>>>,
}

impl RepairOutcome {
    /// Decode a fragment/assignment code. None = Original.
    pub fn mutant_for(&self, loc: usize, code: u32) -> Option<&Mutant> {
        decode(&self.levels[loc], code)
    }
}

fn decode(levels: &[Vec<Mutant>], code: u32) -> Option<&Mutant> {
    if code == 0 {
        return None;
    }
    let mut rest = code as usize - 1;
    for lvl in levels {
        if rest < lvl.len() {
            return Some(&lvl[rest]);
        }
        rest -= lvl.len();
    }
    panic!("code {code} out of range");
}

/// Apply the config's scope and bitwidth overrides to every command.
pub fn apply_config_scopes(spec: &Spec, cfg: &RepairConfig) -> Spec {
    if cfg.scope_overrides.is_empty() && cfg.bitwidth.is_none() {
        return spec.clone();
    }
    let mut s = spec.clone();
    for cmd in &mut s.commands {
        if let Some(bw) = cfg.bitwidth {
            cmd.scope.bitwidth = bw;
        }
        for (name, n, exact) in &cfg.scope_overrides {
            match cmd.scope.overrides.iter_mut().find(|(m, _, _)| m == name) {
                Some(e) => {
                    e.1 = *n;
                    e.2 = *exact;
                }
                None => cmd.scope.overrides.push((name.clone(), *n, *exact)),
            }
        }
    }
    s
}

/// Run every oracle command; return the failures. Errors when the spec has
/// no oracles at all.
pub fn detect_faults(spec: &Spec, opts: &SolveOptions) -> Result<Vec<Fault>, RepairError> {
    let mut faults = Vec::new();
    let mut any = false;
    for (i, cmd) in spec.commands.iter().enumerate() {
        if !cmd.is_oracle {
            continue;
        }
        any = true;
        let out = check_command(spec, cmd, opts)?;
        if !out.passed {
            faults.push(Fault {
                cmd: i,
                witness: out.witness,
            });
        }
    }
    if !any {
        return Err(RepairError::NoOracles);
    }
    Ok(faults)
}

/// One verdict, memoized per (command, dependency-restricted fragment).
#[derive(Clone)]
struct MemoV {
    passed: bool,
    witness: Option<Instance>,
}

/// Lexicographic walk over depth vectors of a fixed sum, odometer over
/// mutant indices inside each vector. Yields assignment code vectors.
struct Cands {
    counts: Vec<Vec<usize>>, // [loc][depth], depth 0 counts the original
    bases: Vec<Vec<u32>>,    // code of (loc, depth, 0)
    dmax: usize,
    sum: usize,
    max_sum: usize,
    vec: Vec<usize>,
    idx: Vec<usize>,
    fresh: bool, // idx not yet consumed for the current vec
    done: bool,
}

impl Cands {
    fn new(counts: Vec<Vec<usize>>, dmax: usize) -> Cands {
        let nlocs = counts.len();
        let bases = counts
            .iter()
            .map(|c| {
                let mut b = vec![0u32; c.len()];
                let mut acc = 1u32;
                for d in 1..c.len() {
                    b[d] = acc;
                    acc += c[d] as u32;
                }
                b
            })
            .collect();
        let mut s = Cands {
            counts,
            bases,
            dmax,
            sum: 0,
            max_sum: nlocs * dmax,
            vec: vec![0; nlocs],
            idx: vec![0; nlocs],
            fresh: false,
            done: false,
        };
        s.done = !s.next_vector();
        s
    }

    /// Smallest lex vector of the current sum, or step the sum. Vectors
    /// touching an empty mutant level are skipped whole.
    fn next_vector(&mut self) -> bool {
        loop {
            if !self.advance_vec() {
                return false;
            }
            if (0..self.vec.len()).all(|i| self.counts[i][self.vec[i]] > 0) {
                self.idx.iter_mut().for_each(|x| *x = 0);
                self.fresh = true;
                return true;
            }
        }
    }

    fn advance_vec(&mut self) -> bool {
        let n = self.vec.len();
        loop {
            if self.sum == 0 {
                self.sum = 1;
                if self.fill_tail(0, self.sum) {
                    return true;
                }
                continue;
            }
            // Bump the rightmost bumpable slot, refill the tail minimally.
            let mut i = n;
            let mut tail = 0usize;
            for j in (0..n).rev() {
                tail += self.vec[j];
                if j < n - 1 && self.vec[j] < self.dmax && tail - self.vec[j] >= 1 {
                    i = j;
                    break;
                }
            }
            if i == n {
                self.sum += 1;
                if self.sum > self.max_sum {
                    return false;
                }
                if self.fill_tail(0, self.sum) {
                    return true;
                }
                continue;
            }
            let spare = tail - self.vec[i] - 1;
            self.vec[i] += 1;
            if self.fill_tail(i + 1, spare) {
                return true;
            }
            unreachable!("tail refill cannot exceed capacity it just held");
        }
    }

    /// Pack `total` into vec[from..], heaviest at the right.
    fn fill_tail(&mut self, from: usize, total: usize) -> bool {
        let n = self.vec.len();
        let mut rem = total;
        for j in (from..n).rev() {
            let take = rem.min(self.dmax);
            self.vec[j] = take;
            rem -= take;
        }
        rem == 0
    }

    fn current_codes(&self) -> Vec<u32> {
        (0..self.vec.len())
            .map(|i| {
                let d = self.vec[i];
                if d == 0 {
                    0
                } else {
                    self.bases[i][d] + self.idx[i] as u32
                }
            })
            .collect()
    }

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        if self.fresh {
            self.fresh = false;
            return Some(self.current_codes());
        }
        // Odometer: last location fastest; positions at depth 0 are fixed.
        let n = self.vec.len();
        for j in (0..n).rev() {
            if self.vec[j] == 0 {
                continue;
            }
            self.idx[j] += 1;
            if self.idx[j] < self.counts[j][self.vec[j]] {
                return Some(self.current_codes());
            }
            self.idx[j] = 0;
        }
        if self.next_vector() {
            self.fresh = false;
            return Some(self.current_codes());
        }
        self.done = true;
        None
    }
}

/// Everything immutable that candidate evaluation needs, shareable across
/// worker threads.
struct Engine<'a> {
    spec: &'a Spec,
    locs: &'a [Location],
    levels: &'a [Vec<Vec<Mutant>>],
    /// Oracle command indices, cheapest dependency set first.
    plan: Vec<usize>,
    /// Per-command location-dependency bitmask.
    dep_mask: Vec<u64>,
    full_mask: u64,
    cfg: &'a RepairConfig,
}

impl Engine<'_> {
    fn restrict(&self, cand: &[u32], mask: u64) -> Vec<u32> {
        (0..self.locs.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| cand[i])
            .collect()
    }

    fn fragment(&self, cand: &[u32], mask: u64) -> Vec<(usize, u32)> {
        (0..self.locs.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| (i, cand[i]))
            .collect()
    }

    fn patches(&self, cand: &[u32]) -> Vec<(Location, crate::ast::Subtree)> {
        let mut out = Vec::new();
        for (i, &code) in cand.iter().enumerate() {
            if let Some(m) = decode(&self.levels[i], code) {
                out.push((self.locs[i].clone(), m.replacement.clone()));
            }
        }
        out
    }

    fn patched(&self, cand: &[u32]) -> Result<Spec, SolveError> {
        loc::apply_patch(self.spec, &self.patches(cand)).map_err(|e| {
            // Mutants are validated one location at a time and locations are
            // disjoint, so a combined patch that fails to typecheck is a bug.
            SolveError::Invalid(format!("candidate patch rejected: {e}"))
        })
    }

    /// Evaluate one candidate against the oracle plan. Reads the memo but
    /// never writes; all effects come back in the result for in-order merge.
    fn eval(&self, cand: Vec<u32>, memo: &HashMap<(usize, Vec<u32>), MemoV>) -> CandResult {
        let mut res = CandResult {
            cand,
            verdicts: Vec::new(),
            prunes: Vec::new(),
            passed_all: false,
            memo_hits: 0,
            solver_calls: 0,
            witness_calls: 0,
            witness_unknown: 0,
            err: None,
        };
        let mut patched: Option<Spec> = None;
        for &ci in &self.plan {
            let key = self.restrict(&res.cand, self.dep_mask[ci]);
            let v = match memo.get(&(ci, key.clone())) {
                Some(v) => {
                    res.memo_hits += 1;
                    v.clone()
                }
                None => {
                    if patched.is_none() {
                        match self.patched(&res.cand) {
                            Ok(s) => patched = Some(s),
                            Err(e) => {
                                res.err = Some(e);
                                return res;
                            }
                        }
                    }
                    let s = patched.as_ref().unwrap();
                    let t0 = Instant::now();
                    match check_command(s, &s.commands[ci], &self.cfg.solve) {
                        Ok(out) => {
                            res.solver_calls += 1;
                            if std::env::var_os("RELFIX_TRACE").is_some() {
                                eprintln!(
                                    "solve cmd={ci} cand={:?} passed={} instances={} {:?}",
                                    res.cand, out.passed, out.stats.instances,
                                    t0.elapsed()
                                );
                            }
                            let v = MemoV {
                                passed: out.passed,
                                witness: out.witness,
                            };
                            res.verdicts.push((ci, key.clone(), v.clone()));
                            v
                        }
                        Err(e) => {
                            res.err = Some(e);
                            return res;
                        }
                    }
                }
            };
            if v.passed {
                continue;
            }
            self.post_fail(&mut res, ci, &v);
            return res;
        }
        res.passed_all = true;
        res
    }

    /// A command failed on this candidate: derive whatever prune records
    /// the enabled strategies support.
    fn post_fail(&self, res: &mut CandResult, ci: usize, v: &MemoV) {
        let deps = self.dep_mask[ci];
        if self.cfg.prune_partial && deps != self.full_mask {
            res.prunes.push((
                deps,
                self.fragment(&res.cand, deps),
                PruneReason::PartialRepair { cmd: ci },
            ));
            return;
        }
        if !self.cfg.prune_variabilization {
            return;
        }
        let cmd = &self.spec.commands[ci];
        let (CmdKind::Check, Some(cex)) = (cmd.kind, v.witness.as_ref()) else {
            return;
        };
        // Free one location at a time, most recently advanced first: the
        // innermost odometer position among mutated locations, then the
        // untouched ones. Order is a heuristic; any choice is sound.
        let mut order: Vec<usize> = (0..self.locs.len()).collect();
        order.sort_by_key(|&i| (res.cand[i] == 0, std::cmp::Reverse(i)));
        for l1 in order {
            let others: Vec<u32> = res
                .cand
                .iter()
                .enumerate()
                .map(|(i, &c)| if i == l1 { 0 } else { c })
                .collect();
            let Ok(base) = self.patched(&others) else {
                continue;
            };
            let cmd = &base.commands[ci];
            res.witness_calls += 1;
            let w = exists_witness(
                &base,
                cmd,
                std::slice::from_ref(&self.locs[l1]),
                cex,
                self.cfg.witness_cap,
            );
            match w.outcome {
                WitnessOutcome::Exhausted => {
                    let mask = self.full_mask & !(1 << l1);
                    res.prunes.push((
                        mask,
                        self.fragment(&res.cand, mask),
                        PruneReason::Variabilization {
                            cmd: ci,
                            loc: l1,
                            cex: cex.clone(),
                        },
                    ));
                    return;
                }
                WitnessOutcome::Unknown => res.witness_unknown += 1,
                WitnessOutcome::Found => {}
            }
        }
    }
}

struct CandResult {
    cand: Vec<u32>,
    /// Memo entries discovered by this evaluation (misses only).
    verdicts: Vec<(usize, Vec<u32>, MemoV)>,
    prunes: Vec<(u64, Vec<(usize, u32)>, PruneReason)>,
    passed_all: bool,
    memo_hits: u64,
    solver_calls: u64,
    witness_calls: u64,
    witness_unknown: u64,
    err: Option<SolveError>,
}

/// Mutable search state threaded through the merge loop.
struct SearchState {
    memo: HashMap<(usize, Vec<u32>), MemoV>,
    records: Vec<PruneRecord>,
    /// Dedup of recorded fragments across reasons.
    seen_frags: HashSet<Vec<(usize, u32)>>,
    stats: RepairStats,
}

impl SearchState {
    /// First covering record, if any. Linear scan: the record list stays
    /// small and insertion order keeps attribution deterministic.
    fn covered(&mut self, cand: &[u32]) -> bool {
        for rec in &mut self.records {
            if rec.fragment.iter().all(|&(i, c)| cand[i] == c) {
                rec.hits += 1;
                self.stats.pruned += 1;
                match rec.reason {
                    PruneReason::PartialRepair { .. } => self.stats.pruned_partial += 1,
                    PruneReason::Variabilization { .. } => {
                        self.stats.pruned_variabilization += 1
                    }
                }
                return true;
            }
        }
        false
    }

    fn absorb(&mut self, res: &CandResult) {
        self.stats.memo_hits += res.memo_hits;
        self.stats.solver_calls += res.solver_calls;
        self.stats.witness_calls += res.witness_calls;
        self.stats.witness_unknown += res.witness_unknown;
        for (ci, key, v) in &res.verdicts {
            self.memo.entry((*ci, key.clone())).or_insert_with(|| v.clone());
        }
        for (_, frag, reason) in &res.prunes {
            if self.seen_frags.insert(frag.clone()) {
                self.records.push(PruneRecord {
                    fragment: frag.clone(),
                    reason: reason.clone(),
                    hits: 0,
                });
            }
        }
    }
}

pub fn repair(
    spec: &Spec,
    locs: &[Location],
    cfg: &RepairConfig,
) -> Result<RepairOutcome, RepairError> {
    repair_with(&Catalog, spec, locs, cfg)
}

/// Repair with a custom mutant source (tests substitute synthetic shapes).
pub fn repair_with(
    src: &dyn MutantSource,
    spec: &Spec,
    locs: &[Location],
    cfg: &RepairConfig,
) -> Result<RepairOutcome, RepairError> {
    if locs.is_empty() {
        return Err(RepairError::BadLocations("no locations given".into()));
    }
    if locs.len() > 64 {
        return Err(RepairError::BadLocations(format!(
            "{} locations exceed the supported 64",
            locs.len()
        )));
    }
    loc::validate_disjoint(locs)?;
    if cfg.max_depth == 0 {
        return Err(RepairError::BadLocations("max depth must be >= 1".into()));
    }
    let start = Instant::now();
    let spec = apply_config_scopes(spec, cfg);
    let jobs = if cfg.deterministic { 1 } else { cfg.jobs.max(1) };

    // Mutant pools, space size, codebook.
    let levels: Vec<Vec<Vec<Mutant>>> = locs
        .iter()
        .map(|l| mutant_levels_with(src, &spec, l, cfg.max_depth))
        .collect();
    let counts: Vec<Vec<usize>> = levels
        .iter()
        .map(|ls| {
            let mut c = vec![1usize];
            c.extend(ls.iter().map(|l| l.len()));
            c
        })
        .collect();
    let generated = counts
        .iter()
        .map(|c| c.iter().map(|&n| n as u64).sum::<u64>())
        .fold(1u64, u64::saturating_mul)
        .saturating_sub(1);

    let dep_mask = command_deps(&spec, locs);
    let mut plan: Vec<usize> = (0..spec.commands.len())
        .filter(|&i| spec.commands[i].is_oracle)
        .collect();
    if plan.is_empty() {
        return Err(RepairError::NoOracles);
    }
    plan.sort_by_key(|&i| (dep_mask[i].count_ones(), i));
    let full_mask = if locs.len() == 64 {
        u64::MAX
    } else {
        (1u64 << locs.len()) - 1
    };
    let engine = Engine {
        spec: &spec,
        locs,
        levels: &levels,
        plan,
        dep_mask,
        full_mask,
        cfg,
    };

    let mut st = SearchState {
        memo: HashMap::new(),
        records: Vec::new(),
        seen_frags: HashSet::new(),
        stats: RepairStats {
            generated,
            ..RepairStats::default()
        },
    };

    macro_rules! finish {
        ($verdict:expr, $st:expr, $before:expr, $after:expr) => {{
            let verdict = $verdict;
            let mut st = $st;
            st.stats.remaining = generated - st.stats.visited - st.stats.pruned;
            if matches!(verdict, Verdict::SpaceExhausted) {
                debug_assert_eq!(st.stats.remaining, 0, "space not accounted for");
            }
            st.stats.wall_ms = start.elapsed().as_millis() as u64;
            return Ok(RepairOutcome {
                verdict,
                stats: st.stats,
                records: st.records,
                oracle_before: $before,
                oracle_after: $after,
                locs: locs.to_vec(),
                levels,
            });
        }};
    }

    // Detection: verdicts seed the memo (the root assignment is all
    // Original) and failures feed the same prune derivations candidates use.
    let root = vec![0u32; locs.len()];
    let mut before = Vec::new();
    let mut any_fail = false;
    for &ci in &engine.plan {
        if start.elapsed() > cfg.timeout {
            finish!(
                Verdict::Timeout {
                    cause: "wall-clock budget exhausted during fault detection".into(),
                },
                st,
                before,
                Vec::new()
            );
        }
        let cmd = &spec.commands[ci];
        let out = match check_command(&spec, cmd, &cfg.solve) {
            Ok(out) => out,
            Err(SolveError::Resource { limit }) => finish!(
                Verdict::Timeout {
                    cause: format!("solver work limit {limit} hit during detection"),
                },
                st,
                before,
                Vec::new()
            ),
            Err(e) => return Err(e.into()),
        };
        st.stats.solver_calls += 1;
        before.push(OracleVerdict {
            cmd: ci,
            name: cmd.display_name(),
            passed: out.passed,
        });
        let v = MemoV {
            passed: out.passed,
            witness: out.witness,
        };
        let key = engine.restrict(&root, engine.dep_mask[ci]);
        st.memo.insert((ci, key), v.clone());
        if !out.passed {
            any_fail = true;
            let mut res = CandResult {
                cand: root.clone(),
                verdicts: Vec::new(),
                prunes: Vec::new(),
                passed_all: false,
                memo_hits: 0,
                solver_calls: 0,
                witness_calls: 0,
                witness_unknown: 0,
                err: None,
            };
            engine.post_fail(&mut res, ci, &v);
            st.absorb(&res);
        }
    }
    before.sort_by_key(|v| v.cmd);
    if !any_fail {
        return Err(RepairError::NoFaults);
    }

    // Breadth-first sweep. With jobs > 1, up to `jobs` unpruned candidates
    // are claimed and evaluated against a frozen memo, then merged in claim
    // order; records landing mid-batch only waste work, never unsoundness.
    let mut cands = Cands::new(counts, cfg.max_depth);
    loop {
        if start.elapsed() > cfg.timeout {
            finish!(
                Verdict::Timeout {
                    cause: "wall-clock budget exhausted".into(),
                },
                st,
                before,
                Vec::new()
            );
        }
        let mut batch = Vec::new();
        while batch.len() < jobs {
            let Some(cand) = cands.next() else { break };
            if st.covered(&cand) {
                continue;
            }
            batch.push(cand);
        }
        if batch.is_empty() {
            finish!(Verdict::SpaceExhausted, st, before, Vec::new());
        }
        let results: Vec<CandResult> = if batch.len() == 1 {
            vec![engine.eval(batch.pop().unwrap(), &st.memo)]
        } else {
            let memo = &st.memo;
            let eng = &engine;
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .drain(..)
                    .map(|c| s.spawn(move || eng.eval(c, memo)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            })
        };
        for res in results {
            if let Some(err) = res.err {
                match err {
                    SolveError::Resource { limit } => finish!(
                        Verdict::Timeout {
                            cause: format!("solver work limit {limit} hit"),
                        },
                        st,
                        before,
                        Vec::new()
                    ),
                    e => return Err(e.into()),
                }
            }
            // A record merged from an earlier batch member may cover this
            // candidate; sequential order would have pruned it, so prune it.
            if st.covered(&res.cand) {
                continue;
            }
            st.stats.visited += 1;
            st.absorb(&res);
            if !res.passed_all {
                continue;
            }
            // Independent re-verification, no memo.
            let patched = engine.patched(&res.cand)?;
            let mut after = Vec::new();
            let mut ok = true;
            for (ci, cmd) in patched.commands.iter().enumerate() {
                if !cmd.is_oracle {
                    continue;
                }
                let out = check_command(&patched, cmd, &cfg.solve)?;
                st.stats.solver_calls += 1;
                ok &= out.passed;
                after.push(OracleVerdict {
                    cmd: ci,
                    name: cmd.display_name(),
                    passed: out.passed,
                });
            }
            debug_assert!(ok, "memoized pass contradicted by re-verification");
            if !ok {
                continue;
            }
            let assignment: Vec<Option<Mutant>> = res
                .cand
                .iter()
                .enumerate()
                .map(|(i, &c)| decode(&levels[i], c).cloned())
                .collect();
            finish!(
                Verdict::Fixed {
                    assignment,
                    spec: patched,
                },
                st,
                before,
                after
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::Cands;

    // counts[loc][depth]: loc0 has 2 mutants at depth 1 and 2 at depth 2,
    // loc1 has 3 at depth 1 and none deeper.
    fn codes(counts: Vec<Vec<usize>>, dmax: usize) -> Vec<Vec<u32>> {
        let mut c = Cands::new(counts, dmax);
        let mut out = Vec::new();
        while let Some(v) = c.next() {
            out.push(v);
        }
        out
    }

    #[test]
    fn candidates_ascend_by_total_depth_then_vector_then_index() {
        let got = codes(vec![vec![1, 2, 2], vec![1, 3, 0]], 2);
        let want: Vec<Vec<u32>> = [
            // total 1: vectors (0,1) then (1,0)
            [0, 1], [0, 2], [0, 3],
            [1, 0], [2, 0],
            // total 2: (0,2) is empty for loc1 and skipped; (1,1); (2,0)
            [1, 1], [1, 2], [1, 3],
            [2, 1], [2, 2], [2, 3],
            [3, 0], [4, 0],
            // total 3: (1,2) skipped; (2,1)
            [3, 1], [3, 2], [3, 3],
            [4, 1], [4, 2], [4, 3],
            // total 4: (2,2) skipped
        ]
        .iter()
        .map(|p| p.to_vec())
        .collect();
        assert_eq!(got, want);
        // Space size check: (1+2+2) * (1+3) - 1 == 19.
        assert_eq!(got.len(), 19);
    }

    #[test]
    fn single_location_space_is_the_level_sum() {
        let got = codes(vec![vec![1, 3, 9, 27]], 3);
        assert_eq!(got.len(), 3 + 9 + 27);
        // Strictly ascending codes: depth levels in order, indices in order.
        assert!(got.windows(2).all(|w| w[0][0] + 1 == w[1][0]));
    }

    #[test]
    fn all_original_vector_is_never_yielded() {
        let got = codes(vec![vec![1, 1], vec![1, 1]], 1);
        assert_eq!(got, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    use super::*;
    use crate::loc::resolve_marker;
    use crate::parse::parse;

    const BROKEN: &str = "sig A { f: set A } pred P { 0 = 1 } run P for 2 expect 1";

    fn quick() -> RepairConfig {
        RepairConfig {
            max_depth: 1,
            deterministic: true,
            ..RepairConfig::default()
        }
    }

    #[test]
    fn single_location_fix_with_no_partial_records() {
        let spec = parse(BROKEN).unwrap();
        let loc = resolve_marker(&spec, "P").unwrap();
        let out = repair(&spec, &[loc], &quick()).unwrap();
        let Verdict::Fixed { assignment, spec: fixed } = &out.verdict else {
            panic!("expected a fix, got {:?}", out.verdict);
        };
        assert_eq!(assignment.len(), 1);
        assert!(assignment[0].is_some(), "the broken body must change");
        assert!(out.oracle_before.iter().any(|v| !v.passed));
        assert!(out.oracle_after.iter().all(|v| v.passed));
        assert!(detect_faults(fixed, &SolveOptions::default()).unwrap().is_empty());
        // Partial-repair pruning needs a proper sub-fragment; with one
        // location and its command depending on it there is none.
        assert!(out
            .records
            .iter()
            .all(|r| !matches!(r.reason, PruneReason::PartialRepair { .. })));
        assert!(out.stats.visited >= 1);
        assert!(out.stats.solver_calls >= 2, "detection plus re-verification");
    }

    #[test]
    fn exhausted_wall_clock_reports_the_untouched_space() {
        let spec = parse(BROKEN).unwrap();
        let loc = resolve_marker(&spec, "P").unwrap();
        let cfg = RepairConfig {
            timeout: Duration::from_nanos(1),
            ..quick()
        };
        let out = repair(&spec, &[loc], &cfg).unwrap();
        assert!(matches!(out.verdict, Verdict::Timeout { .. }));
        assert_eq!(out.stats.visited, 0);
        assert_eq!(out.stats.pruned, 0);
        assert_eq!(out.stats.remaining, out.stats.generated);
    }

    #[test]
    fn healthy_specs_have_nothing_to_repair() {
        let spec = parse("sig A {} pred P { no none } run P for 2 expect 1").unwrap();
        assert!(detect_faults(&spec, &SolveOptions::default()).unwrap().is_empty());
        let loc = resolve_marker(&spec, "P").unwrap();
        assert!(matches!(
            repair(&spec, &[loc], &quick()),
            Err(RepairError::NoFaults)
        ));
    }

    #[test]
    fn opted_out_commands_leave_no_oracle() {
        let spec = parse("sig A {} pred P { 0 = 1 }\n//@no-oracle\nrun P for 2 expect 1").unwrap();
        assert!(matches!(
            detect_faults(&spec, &SolveOptions::default()),
            Err(RepairError::NoOracles)
        ));
        let loc = resolve_marker(&spec, "P").unwrap();
        assert!(matches!(
            repair(&spec, &[loc], &quick()),
            Err(RepairError::NoOracles)
        ));
    }

    #[test]
    fn degenerate_inputs_are_rejected_up_front() {
        let spec = parse(BROKEN).unwrap();
        let loc = resolve_marker(&spec, "P").unwrap();
        assert!(matches!(
            repair(&spec, &[], &quick()),
            Err(RepairError::BadLocations(_))
        ));
        let cfg = RepairConfig { max_depth: 0, ..quick() };
        assert!(matches!(
            repair(&spec, &[loc.clone()], &cfg),
            Err(RepairError::BadLocations(_))
        ));
        assert!(matches!(
            repair(&spec, &[loc.clone(), loc], &quick()),
            Err(RepairError::Loc(_))
        ));
    }
}
