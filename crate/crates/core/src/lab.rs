//! Cross-checks between independently computed verdicts: the four deflator
//! statements, the characterization of T̃, stability under filtration
//! enlargement, and a seeded instance fuzzer.

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundedness::{check_nupbr_loc, NupbrVerdict};
use crate::deflator::{before_plan, live_plan, solve_plan, strict_plan, verify_smd, SupportMode, SynthResult, VerifySpec};
use crate::instance::{Instance, InstanceFile};
use crate::process::{cemetery_structure, sample_closure, GeneratorSet, Ray, Recipe};
use crate::rational::{fmt_q, q, qi, Q};
use crate::tree::{EventTree, NodeMap, NodeSpec, Process, StopValue, StoppingTime, TreeSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementVerdict {
    pub statement: String,
    pub holds: bool,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub statements: Vec<StatementVerdict>,
    pub absorbing: bool,
    /// `matrix[i][j]`: "(i+1) ⇒ (j+1)" is not contradicted by this instance.
    pub matrix: Vec<Vec<bool>>,
    /// The strict extension of a (2)-deflator passed re-verification.
    pub extension_ok: bool,
    pub consistent: bool,
    pub violations: Vec<String>,
}

impl EquivalenceReport {
    pub fn verdicts(&self) -> [bool; 4] {
        [self.statements[0].holds, self.statements[1].holds, self.statements[2].holds, self.statements[3].holds]
    }
}

fn lp_witness(r: &SynthResult) -> String {
    match (&r.deflator, &r.certificate) {
        (Some(_), _) => format!("delta = {}", fmt_q(&r.delta)),
        (None, Some(c)) => {
            let rows: Vec<&str> = c.multipliers.iter().map(|(l, _)| l.as_str()).collect();
            format!("delta = 0; certificate rows {}", rows.join(", "))
        }
        (None, None) => "delta = 0".into(),
    }
}

const LABELS: [&str; 4] = [
    "strictly positive deflator",
    "deflator positive where some process is",
    "NUPBR_loc",
    "deflator strictly positive before the cemetery time",
];

pub fn check_theorem_equivalences(gens: &GeneratorSet) -> EquivalenceReport {
    let tree = &gens.tree;
    let r1 = solve_plan(tree, &strict_plan(gens), SupportMode::StrictEverywhere).expect("origin-feasible LP");
    let r2 = solve_plan(tree, &live_plan(gens), SupportMode::StrictEverywhere).expect("origin-feasible LP");
    let nupbr = check_nupbr_loc(gens);
    let ttilde = cemetery_structure(gens).ttilde;
    let r4 = solve_plan(tree, &before_plan(gens, &ttilde), SupportMode::StrictBeforeTtilde).expect("origin-feasible LP");

    let mut extension_ok = true;
    if let Some(d) = &r2.deflator {
        let ext = Process(d.y.0.iter().map(|v| if v.is_zero() { Q::one() } else { v.clone() }).collect());
        let spec = VerifySpec { mode: SupportMode::StrictEverywhere, delta: None, xhat: None };
        extension_ok = verify_smd(gens, &ext, &spec, &[]).passes();
    }
    let w3 = match &nupbr.verdict {
        NupbrVerdict::Holds => "all levels bounded".to_string(),
        NupbrVerdict::Fails { time, node } => format!("unbounded at time {time}, node {node}"),
    };
    let holds = [r1.feasible(), r2.feasible(), nupbr.verdict.holds(), r4.feasible()];
    let witnesses = [lp_witness(&r1), lp_witness(&r2), w3, lp_witness(&r4)];
    let statements = (0..4)
        .map(|i| StatementVerdict { statement: format!("({}) {}", i + 1, LABELS[i]), holds: holds[i], witness: witnesses[i].clone() })
        .collect();
    let matrix = (0..4).map(|i| (0..4).map(|j| !holds[i] || holds[j]).collect()).collect();
    let absorbing = gens.is_absorbing();
    let mut violations = Vec::new();
    if holds[0] != holds[1] {
        violations.push("(1) and (2) disagree".to_string());
    }
    if !extension_ok {
        violations.push("extension of the (2)-deflator fails verification".into());
    }
    if holds[1] && !holds[2] {
        violations.push("(2) holds without (3)".into());
    }
    if holds[2] && !holds[3] {
        violations.push("(3) holds without (4)".into());
    }
    if absorbing && holds[3] && !holds[1] {
        violations.push("absorbing instance: (4) holds without (2)".into());
    }
    EquivalenceReport { statements, absorbing, matrix, extension_ok, consistent: violations.is_empty(), violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Some element is positive on [0, s] given τ ∈ (s, t].
    PositiveBefore,
    /// Every element is zero on [t, ∞) given τ ∈ (s, t].
    ZeroAfter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharFailure {
    pub s: usize,
    pub t: StopValue,
    pub hypothesis: Hypothesis,
    pub leaf: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharTimeReport {
    pub pairs_checked: usize,
    pub failure: Option<CharFailure>,
    pub equal: bool,
    /// False only if the hypotheses hold and τ ≠ T̃.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabError {
    #[error("random time must be positive; leaf {0:?} has value 0")]
    NotPositive(String),
    #[error("random time has {got} values for {expected} leaves")]
    Length { got: usize, expected: usize },
}

/// Leafwise check of the hypotheses characterizing T̃, then τ = T̃.
pub fn verify_char_time(gens: &GeneratorSet, tau: &StoppingTime) -> Result<CharTimeReport, LabError> {
    let tree = &gens.tree;
    let leaves = tree.leaves();
    if tau.0.len() != leaves.len() {
        return Err(LabError::Length { got: tau.0.len(), expected: leaves.len() });
    }
    if let Some(k) = tau.0.iter().position(|v| *v == StopValue::At(0)) {
        return Err(LabError::NotPositive(tree.id(leaves[k]).into()));
    }
    let live: Vec<bool> = gens.dead_nodes().into_iter().map(|d| !d).collect();
    let horizon = tree.horizon();
    let mut ends: Vec<StopValue> = (1..=horizon + 1).map(StopValue::At).collect();
    ends.push(StopValue::Never);
    let mut pairs = 0;
    let mut failure = None;
    'outer: for s in 0..=horizon {
        for &t in ends.iter().filter(|t| **t > StopValue::At(s)) {
            let event: Vec<usize> = (0..leaves.len()).filter(|&k| tau.0[k] > StopValue::At(s) && tau.0[k] <= t).collect();
            if event.is_empty() {
                continue;
            }
            pairs += 1;
            for &k in &event {
                let path = tree.path(leaves[k]);
                if path.iter().take(s.min(horizon) + 1).any(|&n| !live[n]) {
                    failure = Some(CharFailure { s, t, hypothesis: Hypothesis::PositiveBefore, leaf: tree.id(leaves[k]).into() });
                    break 'outer;
                }
                if let StopValue::At(tt) = t {
                    if path.iter().skip(tt.min(horizon)).any(|&n| live[n]) {
                        failure = Some(CharFailure { s, t, hypothesis: Hypothesis::ZeroAfter, leaf: tree.id(leaves[k]).into() });
                        break 'outer;
                    }
                }
            }
        }
    }
    let equal = *tau == cemetery_structure(gens).ttilde;
    Ok(CharTimeReport { pairs_checked: pairs, consistent: failure.is_some() || equal, failure, equal })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnlargementReport {
    pub base_holds: bool,
    pub refined_holds: bool,
    /// Base holds ⇒ refined holds.
    pub preserved: bool,
    pub samples_checked: usize,
    /// Sampled refined elements that match no base element on some cell.
    pub decomposition_failures: Vec<String>,
}

impl EnlargementReport {
    pub fn passes(&self) -> bool {
        self.preserved && self.decomposition_failures.is_empty()
    }
}

/// Rewrites a refined-tree recipe as a base-tree recipe seen from one cell.
fn project_recipe(r: &Recipe, refined: &EventTree, map: &NodeMap, base: &EventTree, on_cell: &[bool]) -> Recipe {
    match r {
        Recipe::Single { .. } | Recipe::RayMember { .. } => r.clone(),
        Recipe::Cc { alpha, left, right } => Recipe::Cc {
            alpha: alpha.clone(),
            left: Box::new(project_recipe(left, refined, map, base, on_cell)),
            right: Box::new(project_recipe(right, refined, map, base, on_cell)),
        },
        Recipe::Sw { t, atoms, left, right } => Recipe::Sw {
            t: *t,
            atoms: atoms
                .iter()
                .filter_map(|id| refined.index_of(id))
                .filter(|&a| on_cell[a])
                .map(|a| base.id(map.orig[a]).to_string())
                .collect(),
            left: Box::new(project_recipe(left, refined, map, base, on_cell)),
            right: Box::new(project_recipe(right, refined, map, base, on_cell)),
        },
    }
}

pub fn check_enlargement_stability(
    gens: &GeneratorSet,
    cells: &[Vec<usize>],
    reveal: &[usize],
    seed: u64,
) -> Result<EnlargementReport, crate::tree::RefineError> {
    let base = &gens.tree;
    let (refined, map) = base.refine_by_partition(cells, reveal)?;
    let lifted = gens.lift(&refined, &map).expect("lifted generators keep initial values");
    let base_holds = check_nupbr_loc(gens).verdict.holds();
    let refined_holds = check_nupbr_loc(&lifted).verdict.holds();

    let mut cell_of_base = vec![usize::MAX; base.len()];
    for (k, c) in cells.iter().enumerate() {
        for &l in c {
            cell_of_base[l] = k;
        }
    }
    let ray_values = [Q::zero(), Q::one(), qi(3)];
    let samples = sample_closure(&lifted, 2, seed, &ray_values).elements;
    let mut failures = Vec::new();
    for (k, _) in cells.iter().enumerate() {
        let on_cell: Vec<bool> = (0..refined.len())
            .map(|v| refined.leaves_under(v).iter().any(|&l| cell_of_base[map.orig[l]] == k))
            .collect();
        for (i, s) in samples.iter().enumerate() {
            let projected = project_recipe(&s.recipe, &refined, &map, base, &on_cell);
            let ok = match projected.evaluate(gens) {
                Ok(x) => (0..refined.len()).filter(|&v| on_cell[v]).all(|v| s.value.0[v] == x.0[map.orig[v]]),
                Err(_) => false,
            };
            if !ok {
                failures.push(format!("sample #{i} on cell {k}"));
            }
        }
    }
    Ok(EnlargementReport {
        base_holds,
        refined_holds,
        preserved: !base_holds || refined_holds,
        samples_checked: samples.len(),
        decomposition_failures: failures,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzConfig {
    pub max_steps: usize,
    pub max_branch: usize,
    pub max_generators: usize,
    pub max_rays: usize,
    pub absorbing: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { max_steps: 4, max_branch: 3, max_generators: 3, max_rays: 1, absorbing: true }
    }
}

fn value_pool() -> Vec<Q> {
    vec![Q::zero(), q(1, 2), Q::one(), q(3, 2), qi(2), qi(3)]
}

/// Random tree (ids `n0`, `n1`, … in breadth-first order) and generators.
pub fn random_instance(rng: &mut ChaCha8Rng, cfg: &FuzzConfig) -> GeneratorSet {
    let horizon = rng.gen_range(1..=cfg.max_steps);
    let mut specs = vec![NodeSpec { id: "n0".into(), time: 0, parent: None, prob: Q::one() }];
    let mut frontier = vec![0usize];
    for t in 1..=horizon {
        let mut next = Vec::new();
        for &p in &frontier {
            let k = rng.gen_range(1..=cfg.max_branch);
            let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
            let total: i64 = weights.iter().sum();
            for w in weights {
                let idx = specs.len();
                specs.push(NodeSpec { id: format!("n{idx}"), time: t, parent: Some(format!("n{p}")), prob: q(w, total) });
                next.push(idx);
            }
        }
        frontier = next;
    }
    let tree = EventTree::build(&TreeSpec { nodes: specs, horizon }).expect("generated tree is valid");
    let pool = value_pool();
    let rays = if cfg.max_rays > 0 && rng.gen_bool(0.4) { 1 } else { 0 };
    let singles = rng.gen_range(if rays > 0 { 0 } else { 1 }..=cfg.max_generators - rays);

    let draw = |rng: &mut ChaCha8Rng, parent_zero: bool| -> Q {
        if parent_zero && cfg.absorbing {
            return Q::zero();
        }
        if rng.gen_bool(0.25) {
            Q::zero()
        } else {
            pool[1..].choose(rng).expect("pool").clone()
        }
    };
    let process = |rng: &mut ChaCha8Rng| -> Process {
        let mut v = vec![Q::zero(); tree.len()];
        v[0] = Q::one();
        for n in 1..tree.len() {
            let p = tree.parent(n).expect("non-root");
            v[n] = draw(rng, v[p].is_zero());
        }
        Process(v)
    };
    let single_list: Vec<(String, Process)> = (0..singles).map(|i| (format!("g{i}"), process(rng))).collect();
    let ray_list: Vec<Ray> = (0..rays)
        .map(|i| {
            let a = process(rng);
            let mut b = vec![Q::zero(); tree.len()];
            for n in 1..tree.len() {
                let p = tree.parent(n).expect("non-root");
                let stopped = cfg.absorbing && a.0[p].is_zero() && b[p].is_zero();
                if !stopped && rng.gen_bool(0.4) {
                    b[n] = [q(1, 2), Q::one(), qi(2)].choose(rng).expect("pool").clone();
                }
            }
            Ray { name: format!("r{i}"), a, b: Process(b) }
        })
        .collect();
    GeneratorSet::new(tree, single_list, ray_list).expect("generated generators are valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub instance: InstanceFile,
    pub verdicts: EquivalenceReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzSummary {
    pub instances: usize,
    pub trips: Vec<Counterexample>,
    /// Observed (1)–(4) verdict tuples with counts, absorbing and not.
    pub combinations: std::collections::BTreeMap<(bool, [bool; 4]), usize>,
}

/// Drops generators and trailing levels while the report stays inconsistent.
pub fn minimize(gens: &GeneratorSet) -> GeneratorSet {
    let trips = |g: &GeneratorSet| !check_theorem_equivalences(g).consistent;
    let mut cur = gens.clone();
    loop {
        let mut changed = false;
        for i in 0..cur.singles.len() {
            let mut s = cur.singles.clone();
            s.remove(i);
            if let Ok(g) = GeneratorSet::new(cur.tree.clone(), s, cur.rays.clone()) {
                if trips(&g) {
                    cur = g;
                    changed = true;
                    break;
                }
            }
        }
        if !changed && cur.tree.horizon() > 1 {
            if let Some(g) = truncate(&cur) {
                if trips(&g) {
                    cur = g;
                    changed = true;
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}

fn truncate(g: &GeneratorSet) -> Option<GeneratorSet> {
    let tree = &g.tree;
    let h = tree.horizon() - 1;
    let keep: Vec<usize> = (0..tree.len()).filter(|&n| tree.time(n) <= h).collect();
    let mut spec = tree.to_spec();
    spec.nodes.retain(|n| n.time <= h);
    spec.horizon = h;
    let t2 = EventTree::build(&spec).ok()?;
    let restrict = |p: &Process| Process(keep.iter().map(|&n| p.0[n].clone()).collect());
    let order: Vec<usize> = (0..t2.len()).map(|m| keep.iter().position(|&n| tree.id(n) == t2.id(m)).expect("kept")).collect();
    let reorder = |p: Process| Process(order.iter().map(|&i| p.0[i].clone()).collect());
    GeneratorSet::new(
        t2.clone(),
        g.singles.iter().map(|(n, p)| (n.clone(), reorder(restrict(p)))).collect(),
        g.rays.iter().map(|r| Ray { name: r.name.clone(), a: reorder(restrict(&r.a)), b: reorder(restrict(&r.b)) }).collect(),
    )
    .ok()
}

pub fn fuzz(count: usize, seed: u64, cfg: &FuzzConfig) -> FuzzSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = FuzzSummary { instances: 0, trips: Vec::new(), combinations: Default::default() };
    for _ in 0..count {
        let g = random_instance(&mut rng, cfg);
        let rep = check_theorem_equivalences(&g);
        *summary.combinations.entry((rep.absorbing, rep.verdicts())).or_default() += 1;
        summary.instances += 1;
        if !rep.consistent {
            let small = minimize(&g);
            let verdicts = check_theorem_equivalences(&small);
            let instance = Instance { gens: small, dominating: None, raw: Default::default() }.to_file();
            summary.trips.push(Counterexample { instance, verdicts });
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::gallery;

    fn gens(name: &str) -> GeneratorSet {
        gallery(name).unwrap().gens
    }

    #[test]
    fn equivalence_examples() {
        let r = check_theorem_equivalences(&gens("binomial"));
        assert_eq!(r.verdicts(), [true; 4]);
        assert!(r.consistent);
        let r = check_theorem_equivalences(&gens("xquestion"));
        assert_eq!(r.verdicts(), [false, false, true, true]);
        assert!(r.consistent && !r.absorbing);
        let r = check_theorem_equivalences(&gens("ex1"));
        assert_eq!(r.verdicts(), [false; 4]);
        assert!(r.consistent);
        let r = check_theorem_equivalences(&gens("revival"));
        assert_eq!(r.verdicts(), [false, false, false, true]);
        assert!(r.consistent);
    }

    #[test]
    fn char_time_examples() {
        let g = gens("ladder");
        let tt = cemetery_structure(&g).ttilde;
        let r = verify_char_time(&g, &tt).unwrap();
        assert!(r.failure.is_none() && r.equal && r.consistent);
        let minus = StoppingTime(tt.0.iter().map(|v| StopValue::At(v.finite().unwrap() - 1)).collect());
        let r = verify_char_time(&g, &minus).unwrap();
        assert_eq!(r.failure.unwrap().hypothesis, Hypothesis::ZeroAfter);
        let g = gens("chartime");
        let c = StoppingTime::constant(&g.tree, StopValue::At(2));
        let r = verify_char_time(&g, &c).unwrap();
        assert!(!r.equal && r.consistent && r.failure.is_some());
        let zero = StoppingTime::constant(&g.tree, StopValue::At(0));
        assert!(verify_char_time(&g, &zero).is_err());
    }

    #[test]
    fn enlargement_examples() {
        let g = gens("binomial");
        let leaves = g.tree.leaves().to_vec();
        let trivial = check_enlargement_stability(&g, std::slice::from_ref(&leaves), &[0], 3).unwrap();
        assert!(trivial.passes() && trivial.base_holds && trivial.refined_holds);
        let split = check_enlargement_stability(&g, &[vec![leaves[0]], vec![leaves[1]]], &[0, 0], 3).unwrap();
        assert!(split.passes() && split.refined_holds, "{split:?}");
        let g = gens("ex1");
        let leaves = g.tree.leaves().to_vec();
        let r = check_enlargement_stability(&g, &[leaves], &[1], 3).unwrap();
        assert!(!r.base_holds && !r.refined_holds && r.passes());
    }

    #[test]
    fn fuzz_is_deterministic_and_consistent() {
        let cfg = FuzzConfig { max_steps: 2, ..Default::default() };
        let a = fuzz(20, 7, &cfg);
        let b = fuzz(20, 7, &cfg);
        assert_eq!(a.combinations, b.combinations);
        assert!(a.trips.is_empty(), "{:?}", a.trips.first().map(|c| &c.verdicts.violations));
    }

    #[test]
    fn random_instances_respect_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = FuzzConfig::default();
        for _ in 0..50 {
            let g = random_instance(&mut rng, &cfg);
            assert!(g.tree.horizon() <= 4 && g.is_absorbing());
            assert!(g.singles.len() + g.rays.len() <= 3 && g.rays.len() <= 1);
            assert!((0..g.tree.len()).all(|n| g.tree.children(n).len() <= 3));
        }
    }

    #[test]
    fn truncate_keeps_earlier_values() {
        let g = gens("ladder");
        let t = truncate(&g).unwrap();
        assert_eq!(t.tree.horizon(), 2);
        assert_eq!(t.single("late").unwrap().0, vec![qi(1), qi(1), qi(1)]);
    }
}
