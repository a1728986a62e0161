//! Generator sets, the convex-combination and switching operators, closure
//! sampling, classification and cemetery times.

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rational::{fmt_q, q, QText, Q};
use crate::tree::{EventTree, Process, StopValue, StoppingTime};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProcessError {
    #[error("mixing weight {0} outside [0, 1]")]
    AlphaRange(String),
    #[error("switch at node {node:?} is inadmissible: target is 0 but source is {source_value}")]
    Inadmissible { node: String, source_value: String },
    #[error("switch atom {atom:?} is not a node at time {t}")]
    BadAtom { atom: String, t: usize },
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),
    #[error("generator {name:?}: {reason}")]
    InvalidGenerator { name: String, reason: String },
    #[error("generator set is empty")]
    Empty,
    #[error("process length {got} does not match tree size {expected}")]
    Length { got: usize, expected: usize },
    #[error("ray parameter {0} is negative")]
    NegativeRay(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ray {
    pub name: String,
    pub a: Process,
    pub b: Process,
}

impl Ray {
    pub fn member(&self, x: &Q) -> Process {
        Process(self.a.0.iter().zip(&self.b.0).map(|(a, b)| a + x * b).collect())
    }
}

/// A named process used as a representative of the generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rep {
    pub label: String,
    pub process: Process,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    pub tree: EventTree,
    pub singles: Vec<(String, Process)>,
    pub rays: Vec<Ray>,
}

impl GeneratorSet {
    pub fn new(tree: EventTree, singles: Vec<(String, Process)>, rays: Vec<Ray>) -> Result<Self, ProcessError> {
        if singles.is_empty() && rays.is_empty() {
            return Err(ProcessError::Empty);
        }
        let bad = |name: &str, reason: &str| ProcessError::InvalidGenerator { name: name.into(), reason: reason.into() };
        let check = |name: &str, p: &Process, root: &Q| -> Result<(), ProcessError> {
            if p.0.len() != tree.len() {
                return Err(ProcessError::Length { got: p.0.len(), expected: tree.len() });
            }
            if !p.is_nonnegative() {
                return Err(bad(name, "negative value"));
            }
            if tree.level(0).iter().any(|&r| &p.0[r] != root) {
                return Err(bad(name, &format!("initial value must be {}", fmt_q(root))));
            }
            Ok(())
        };
        let mut names = std::collections::HashSet::new();
        for (name, p) in &singles {
            check(name, p, &Q::one())?;
            if !names.insert(name.clone()) {
                return Err(bad(name, "duplicate name"));
            }
        }
        for r in &rays {
            check(&format!("{}.A", r.name), &r.a, &Q::one())?;
            check(&format!("{}.B", r.name), &r.b, &Q::zero())?;
            if !names.insert(r.name.clone()) {
                return Err(bad(&r.name, "duplicate name"));
            }
        }
        Ok(GeneratorSet { tree, singles, rays })
    }

    /// Representatives for support questions: singles, each A, each A + B.
    pub fn support_reps(&self) -> Vec<Rep> {
        let mut out: Vec<Rep> = self.singles.iter().map(|(n, p)| Rep { label: n.clone(), process: p.clone() }).collect();
        for r in &self.rays {
            out.push(Rep { label: format!("{}.A", r.name), process: r.a.clone() });
            out.push(Rep { label: format!("{}.A+B", r.name), process: r.member(&Q::one()) });
        }
        out
    }

    /// Processes whose products with a deflator must be supermartingales:
    /// singles, each A and each B (the ray constraint is linear in x).
    pub fn constraint_reps(&self) -> Vec<Rep> {
        let mut out: Vec<Rep> = self.singles.iter().map(|(n, p)| Rep { label: n.clone(), process: p.clone() }).collect();
        for r in &self.rays {
            out.push(Rep { label: format!("{}.A", r.name), process: r.a.clone() });
            out.push(Rep { label: format!("{}.B", r.name), process: r.b.clone() });
        }
        out
    }

    /// Unit-initialized processes that strategies can hold: singles and each A.
    pub fn basis(&self) -> Vec<Rep> {
        let mut out: Vec<Rep> = self.singles.iter().map(|(n, p)| Rep { label: n.clone(), process: p.clone() }).collect();
        for r in &self.rays {
            out.push(Rep { label: format!("{}.A", r.name), process: r.a.clone() });
        }
        out
    }

    pub fn single(&self, name: &str) -> Option<&Process> {
        self.singles.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn ray(&self, name: &str) -> Option<&Ray> {
        self.rays.iter().find(|r| r.name == name)
    }

    /// Resolves `name`, `ray.A`, `ray.B` or `ray.A+B`.
    pub fn resolve(&self, reference: &str) -> Option<Process> {
        if let Some(p) = self.single(reference) {
            return Some(p.clone());
        }
        let (name, part) = reference.rsplit_once('.')?;
        let r = self.ray(name)?;
        match part {
            "A" => Some(r.a.clone()),
            "B" => Some(r.b.clone()),
            "A+B" => Some(r.member(&Q::one())),
            _ => None,
        }
    }

    /// Every representative is zero below any node where it is zero.
    pub fn is_absorbing(&self) -> bool {
        self.support_reps().iter().all(|r| r.process.is_absorbing(&self.tree))
    }

    pub fn has_rays(&self) -> bool {
        !self.rays.is_empty()
    }

    /// Nodes where every representative vanishes.
    pub fn dead_nodes(&self) -> Vec<bool> {
        let reps = self.support_reps();
        (0..self.tree.len()).map(|n| reps.iter().all(|r| r.process.0[n].is_zero())).collect()
    }

    /// Copies all generators onto a refined tree through its node map.
    pub fn lift(&self, refined: &EventTree, map: &crate::tree::NodeMap) -> Result<GeneratorSet, ProcessError> {
        GeneratorSet::new(
            refined.clone(),
            self.singles.iter().map(|(n, p)| (n.clone(), map.lift(p))).collect(),
            self.rays
                .iter()
                .map(|r| Ray { name: r.name.clone(), a: map.lift(&r.a), b: map.lift(&r.b) })
                .collect(),
        )
    }
}

/// (1 − α)·X + α·X′.
pub fn convex_combine(x: &Process, xp: &Process, alpha: &Q) -> Result<Process, ProcessError> {
    if alpha.is_negative() || alpha > &Q::one() {
        return Err(ProcessError::AlphaRange(fmt_q(alpha)));
    }
    let beta = Q::one() - alpha;
    Ok(Process(x.0.iter().zip(&xp.0).map(|(a, b)| &beta * a + alpha * b).collect()))
}

/// Switches from X into X′ at time t on the union of the given time-t atoms,
/// carrying the running value over (0/0 = 1).
pub fn switch(tree: &EventTree, x: &Process, xp: &Process, t: usize, atoms: &[usize]) -> Result<Process, ProcessError> {
    let mut out = x.clone();
    for &a in atoms {
        if a >= tree.len() || tree.time(a) != t {
            let atom = if a < tree.len() { tree.id(a).to_string() } else { a.to_string() };
            return Err(ProcessError::BadAtom { atom, t });
        }
        let (xa, xpa) = (&x.0[a], &xp.0[a]);
        let ratio = if xpa.is_zero() {
            if !xa.is_zero() {
                return Err(ProcessError::Inadmissible { node: tree.id(a).to_string(), source_value: fmt_q(xa) });
            }
            Q::one()
        } else {
            xa / xpa
        };
        for n in tree.subtree(a) {
            out.0[n] = &ratio * &xp.0[n];
        }
    }
    Ok(out)
}

/// Expression tree over generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Recipe {
    Single { name: String },
    RayMember { name: String, x: QText },
    Cc { alpha: QText, left: Box<Recipe>, right: Box<Recipe> },
    Sw { t: usize, atoms: Vec<String>, left: Box<Recipe>, right: Box<Recipe> },
}

impl Recipe {
    pub fn evaluate(&self, gens: &GeneratorSet) -> Result<Process, ProcessError> {
        match self {
            Recipe::Single { name } => gens.single(name).cloned().ok_or_else(|| ProcessError::UnknownGenerator(name.clone())),
            Recipe::RayMember { name, x } => {
                if x.0.is_negative() {
                    return Err(ProcessError::NegativeRay(fmt_q(&x.0)));
                }
                gens.ray(name).map(|r| r.member(&x.0)).ok_or_else(|| ProcessError::UnknownGenerator(name.clone()))
            }
            Recipe::Cc { alpha, left, right } => convex_combine(&left.evaluate(gens)?, &right.evaluate(gens)?, &alpha.0),
            Recipe::Sw { t, atoms, left, right } => {
                let idx = atoms
                    .iter()
                    .map(|id| {
                        gens.tree.index_of(id).ok_or_else(|| ProcessError::BadAtom { atom: id.clone(), t: *t })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                switch(&gens.tree, &left.evaluate(gens)?, &right.evaluate(gens)?, *t, &idx)
            }
        }
    }

    /// Nesting depth: 0 for a generator reference.
    pub fn depth(&self) -> usize {
        match self {
            Recipe::Single { .. } | Recipe::RayMember { .. } => 0,
            Recipe::Cc { left, right, .. } | Recipe::Sw { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureElement {
    pub recipe: Recipe,
    pub value: Process,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleConfig {
    pub depth: usize,
    pub seed: u64,
    pub ray_values: Vec<Q>,
    /// Elements drawn at each nesting level above 0.
    pub per_level: usize,
    /// Redraws allowed per element before giving up on it.
    pub retry_cap: usize,
}

impl SampleConfig {
    pub fn new(depth: usize, seed: u64, ray_values: Vec<Q>) -> Self {
        SampleConfig { depth, seed, ray_values, per_level: 16, retry_cap: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureSample {
    pub elements: Vec<ClosureElement>,
    /// Inadmissible draws that were discarded and redrawn.
    pub discarded: usize,
    /// Elements abandoned after hitting the retry cap.
    pub exhausted: usize,
}

const MIX_WEIGHTS: [(i64, i64); 9] = [(1, 2), (1, 3), (2, 3), (1, 10), (9, 10), (1, 1000), (999, 1000), (0, 1), (1, 1)];

pub fn sample_closure(gens: &GeneratorSet, depth: usize, seed: u64, ray_values: &[Q]) -> ClosureSample {
    sample_closure_with(gens, &SampleConfig::new(depth, seed, ray_values.to_vec()))
}

pub fn sample_closure_with(gens: &GeneratorSet, cfg: &SampleConfig) -> ClosureSample {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut levels: Vec<Vec<ClosureElement>> = Vec::new();
    let mut base = Vec::new();
    for (name, p) in &gens.singles {
        base.push(ClosureElement { recipe: Recipe::Single { name: name.clone() }, value: p.clone() });
    }
    for r in &gens.rays {
        for x in &cfg.ray_values {
            base.push(ClosureElement {
                recipe: Recipe::RayMember { name: r.name.clone(), x: QText(x.clone()) },
                value: r.member(x),
            });
        }
    }
    levels.push(base);
    let (mut discarded, mut exhausted) = (0, 0);
    for k in 1..=cfg.depth {
        let lower: Vec<&ClosureElement> = levels.iter().flatten().collect();
        let prev = &levels[k - 1];
        if prev.is_empty() {
            break;
        }
        let mut level = Vec::with_capacity(cfg.per_level);
        for _ in 0..cfg.per_level {
            let mut done = false;
            for _ in 0..cfg.retry_cap {
                // One operand from the previous level keeps the nesting depth exact.
                let deep = prev.choose(&mut rng).expect("non-empty");
                let other = *lower.choose(&mut rng).expect("non-empty");
                let (left, right) = if rng.gen_bool(0.5) { (deep, other) } else { (other, deep) };
                if rng.gen_bool(0.5) {
                    let (n, d) = MIX_WEIGHTS[rng.gen_range(0..MIX_WEIGHTS.len())];
                    let alpha = q(n, d);
                    let value = convex_combine(&left.value, &right.value, &alpha).expect("alpha in range");
                    level.push(ClosureElement {
                        recipe: Recipe::Cc {
                            alpha: QText(alpha),
                            left: Box::new(left.recipe.clone()),
                            right: Box::new(right.recipe.clone()),
                        },
                        value,
                    });
                    done = true;
                    break;
                }
                let t = rng.gen_range(0..=gens.tree.horizon());
                let candidates = gens.tree.level(t);
                let atoms: Vec<usize> = loop {
                    let pick: Vec<usize> = candidates.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                    if !pick.is_empty() {
                        break pick;
                    }
                };
                match switch(&gens.tree, &left.value, &right.value, t, &atoms) {
                    Ok(value) => {
                        level.push(ClosureElement {
                            recipe: Recipe::Sw {
                                t,
                                atoms: atoms.iter().map(|&a| gens.tree.id(a).to_string()).collect(),
                                left: Box::new(left.recipe.clone()),
                                right: Box::new(right.recipe.clone()),
                            },
                            value,
                        });
                        done = true;
                        break;
                    }
                    Err(_) => discarded += 1,
                }
            }
            if !done {
                exhausted += 1;
            }
        }
        levels.push(level);
    }
    ClosureSample { elements: levels.into_iter().flatten().collect(), discarded, exhausted }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "SPD")]
    Spd,
    #[serde(rename = "SPP")]
    Spp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub kind: ClassKind,
    /// Uniform mixture of singles and each A + B.
    pub candidate: Process,
    /// Dominating (SPD) or strictly positive (SPP) element, when one exists.
    pub witness: Option<Process>,
}

pub fn classify(gens: &GeneratorSet) -> Classification {
    let mut parts: Vec<Process> = gens.singles.iter().map(|(_, p)| p.clone()).collect();
    parts.extend(gens.rays.iter().map(|r| r.member(&Q::one())));
    let w = Q::new(1.into(), (parts.len() as i64).into());
    let candidate = Process(
        (0..gens.tree.len())
            .map(|n| parts.iter().map(|p| &p.0[n] * &w).sum())
            .collect(),
    );
    if candidate.is_positive() {
        return Classification { kind: ClassKind::Spp, witness: Some(candidate.clone()), candidate };
    }
    if dominates(gens, &candidate) {
        Classification { kind: ClassKind::Spd, witness: Some(candidate.clone()), candidate }
    } else {
        Classification { kind: ClassKind::Sp, witness: None, candidate }
    }
}

/// {X̂ = 0} ⊆ {R = 0} for every support representative R.
pub fn dominates(gens: &GeneratorSet, xhat: &Process) -> bool {
    gens.support_reps()
        .iter()
        .all(|r| (0..gens.tree.len()).all(|n| !xhat.0[n].is_zero() || r.process.0[n].is_zero()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderRung {
    /// Labels of the representatives mixed into this rung.
    pub members: Vec<String>,
    pub process: Process,
    pub hitting: StoppingTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CemeteryStructure {
    pub ttilde: StoppingTime,
    pub ladder: Vec<LadderRung>,
    pub absorbing: bool,
}

/// Expected hitting time with ∞ counted as horizon + 1; used only for ordering.
fn mean_hitting(tree: &EventTree, tau: &StoppingTime) -> Q {
    tree.leaves()
        .iter()
        .zip(&tau.0)
        .map(|(&l, v)| {
            let t = v.finite().unwrap_or(tree.horizon() + 1);
            tree.uprob(l) * Q::from_integer((t as i64).into())
        })
        .sum()
}

pub fn cemetery_structure(gens: &GeneratorSet) -> CemeteryStructure {
    let tree = &gens.tree;
    let reps = gens.support_reps();
    let mut timed: Vec<(Q, usize, StoppingTime)> = reps
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let tau = tree.hitting_time(&r.process);
            (mean_hitting(tree, &tau), i, tau)
        })
        .collect();
    let ttilde = timed
        .iter()
        .fold(StoppingTime::constant(tree, StopValue::At(0)), |acc, (_, _, tau)| acc.max(tau));
    timed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ladder: Vec<LadderRung> = Vec::new();
    for (_, i, _) in &timed {
        let r = &reps[*i];
        let (members, process) = match ladder.last() {
            None => (vec![r.label.clone()], r.process.clone()),
            Some(prev) => {
                let mut m = prev.members.clone();
                m.push(r.label.clone());
                (m, convex_combine(&prev.process, &r.process, &q(1, 2)).expect("alpha"))
            }
        };
        let hitting = tree.hitting_time(&process);
        ladder.push(LadderRung { members, process, hitting });
    }
    CemeteryStructure { ttilde, ladder, absorbing: gens.is_absorbing() }
}
