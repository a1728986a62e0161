//! Supermartingale deflators: LP synthesis, verification, the auxiliary set
//! built from a dominating process, and the pasting pipeline over the
//! cemetery-time ladder.
//!
//! A deflator LP has one variable per node plus δ. At nodes in the support
//! region the variable is written `Y(n) = δ + s[n]` with `s[n] ≥ 0`, so every
//! row has a nonnegative right-hand side and the origin is feasible.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::boundedness::{anchors, check_nupbr_loc, validate_dominating, BoundednessError, NupbrVerdict};
use crate::process::{cemetery_structure, ClosureElement, GeneratorSet, Ray, Rep};
use crate::rational::{fmt_q, Q};
use crate::lp::{LinearProgram, LpError, LpSolution, LpStatus};
use crate::tree::{EventTree, NodeMap, Process, StopValue, StoppingTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SupportMode {
    #[serde(rename = "strict-everywhere")]
    StrictEverywhere,
    #[serde(rename = "strict-before-tilde-T")]
    StrictBeforeTtilde,
    #[serde(rename = "strict-before-hat-T-with-boundary")]
    StrictBeforeThatWithBoundary,
}

impl SupportMode {
    pub fn name(self) -> &'static str {
        match self {
            SupportMode::StrictEverywhere => "strict-everywhere",
            SupportMode::StrictBeforeTtilde => "strict-before-tilde-T",
            SupportMode::StrictBeforeThatWithBoundary => "strict-before-hat-T-with-boundary",
        }
    }
}

/// One verified inequality Σ p·(R·Y)(child) ≤ (R·Y)(node).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepCheck {
    pub process: String,
    pub node: usize,
    pub forward: Q,
    pub current: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deflator {
    pub y: Process,
    pub delta: Q,
    pub mode: SupportMode,
    pub certificate: Vec<StepCheck>,
}

/// Multipliers proving δ* = 0: y ≥ 0 with yᵀA ≥ e_δ and yᵀb = 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfeasibilityCertificate {
    pub multipliers: Vec<(String, Q)>,
    pub verified: bool,
}

impl InfeasibilityCertificate {
    pub fn names(&self, label: &str) -> bool {
        self.multipliers.iter().any(|(l, _)| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeflatorError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Dominating(#[from] BoundednessError),
    #[error("linear program unexpectedly unbounded")]
    Unbounded,
    #[error("process length {got} does not match tree size {expected}")]
    Length { got: usize, expected: usize },
}

/// How a node's deflator value enters the LP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    /// Constant value; `support` adds the row δ ≤ value.
    Fixed { value: Q, support: bool },
    /// Y = δ + s with s ≥ 0.
    Support,
    /// Y ≥ 0, unconstrained otherwise.
    Free,
}

/// Everything that defines one deflator LP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpPlan {
    pub roles: Vec<Role>,
    pub reps: Vec<Rep>,
    /// DSV boundary rows X̂(d)·Y(d) ≥ δ, as (node, X̂(d)).
    pub boundary: Vec<(usize, Q)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    Const(Q),
    Shifted(usize),
    Var(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthResult {
    pub lp: LinearProgram,
    pub solution: LpSolution,
    pub delta: Q,
    pub deflator: Option<Deflator>,
    pub certificate: Option<InfeasibilityCertificate>,
}

impl SynthResult {
    pub fn feasible(&self) -> bool {
        self.delta.is_positive()
    }
}

pub fn build_lp(tree: &EventTree, plan: &LpPlan) -> (LinearProgram, Vec<Slot>) {
    let mut lp = LinearProgram::default();
    let delta = lp.add_variable("delta", Q::one());
    let slots: Vec<Slot> = plan
        .roles
        .iter()
        .enumerate()
        .map(|(n, role)| match role {
            Role::Fixed { value, .. } => Slot::Const(value.clone()),
            Role::Support => Slot::Shifted(lp.add_variable(format!("s[{}]", tree.id(n)), Q::zero())),
            Role::Free => Slot::Var(lp.add_variable(format!("y[{}]", tree.id(n)), Q::zero())),
        })
        .collect();
    // Adds k·Y(n) to a row; constants go to the right-hand side.
    let push = |coeffs: &mut Vec<(usize, Q)>, rhs: &mut Q, n: usize, k: Q| match &slots[n] {
        Slot::Const(v) => *rhs -= k * v,
        Slot::Shifted(s) => {
            coeffs.push((delta, k.clone()));
            coeffs.push((*s, k));
        }
        Slot::Var(v) => coeffs.push((*v, k)),
    };
    for (n, role) in plan.roles.iter().enumerate() {
        if let Role::Fixed { value, support: true } = role {
            lp.add_row(format!("support@{}", tree.id(n)), vec![(delta, Q::one())], value.clone());
        }
    }
    for rep in &plan.reps {
        let r = &rep.process.0;
        for n in 0..tree.len() {
            if tree.children(n).is_empty() {
                continue;
            }
            let mut coeffs = Vec::new();
            let mut rhs = Q::zero();
            for &c in tree.children(n) {
                let k = tree.prob(c) * &r[c];
                if !k.is_zero() {
                    push(&mut coeffs, &mut rhs, c, k);
                }
            }
            if !r[n].is_zero() {
                push(&mut coeffs, &mut rhs, n, -r[n].clone());
            }
            if coeffs.is_empty() && !rhs.is_negative() {
                continue;
            }
            lp.add_row(format!("smd:{}@{}", rep.label, tree.id(n)), coeffs, rhs);
        }
    }
    let mut seen = std::collections::HashSet::new();
    for (d, xhat) in &plan.boundary {
        if !seen.insert(*d) {
            continue;
        }
        let mut coeffs = vec![(delta, Q::one())];
        let mut rhs = Q::zero();
        push(&mut coeffs, &mut rhs, *d, -xhat.clone());
        lp.add_row(format!("boundary@{}", tree.id(*d)), coeffs, rhs);
    }
    (lp, slots)
}

/// Solves a plan and reads back the deflator or the certificate for δ* = 0.
pub fn solve_plan(tree: &EventTree, plan: &LpPlan, mode: SupportMode) -> Result<SynthResult, DeflatorError> {
    let (lp, slots) = build_lp(tree, plan);
    let solution = lp.solve()?;
    if solution.status == LpStatus::Unbounded {
        return Err(DeflatorError::Unbounded);
    }
    let delta = solution.x[0].clone();
    if delta.is_positive() {
        let y = Process(
            slots
                .iter()
                .map(|s| match s {
                    Slot::Const(v) => v.clone(),
                    Slot::Shifted(i) => &delta + &solution.x[*i],
                    Slot::Var(i) => solution.x[*i].clone(),
                })
                .collect(),
        );
        let certificate = step_checks(tree, &plan.reps, &y);
        let deflator = Deflator { y, delta: delta.clone(), mode, certificate };
        Ok(SynthResult { lp, solution, delta, deflator: Some(deflator), certificate: None })
    } else {
        let verified = lp.verify_dual(&solution.duals, &Q::zero());
        let multipliers = lp
            .rows
            .iter()
            .zip(&solution.duals)
            .filter(|(_, y)| y.is_positive())
            .map(|(r, y)| (r.label.clone(), y.clone()))
            .collect();
        let certificate = InfeasibilityCertificate { multipliers, verified };
        Ok(SynthResult { lp, solution, delta, deflator: None, certificate: Some(certificate) })
    }
}

fn step_checks(tree: &EventTree, reps: &[Rep], y: &Process) -> Vec<StepCheck> {
    let mut out = Vec::new();
    for rep in reps {
        let ry = rep.process.mul(y);
        for n in 0..tree.len() {
            if !tree.children(n).is_empty() {
                out.push(StepCheck {
                    process: rep.label.clone(),
                    node: n,
                    forward: tree.forward(&ry, n),
                    current: ry.0[n].clone(),
                });
            }
        }
    }
    out
}

fn initial_fixed(tree: &EventTree, n: usize) -> Option<Role> {
    (tree.time(n) == 0).then(|| Role::Fixed { value: Q::one(), support: true })
}

/// Support region: nodes where some representative is positive; Y = 1 at dead nodes.
pub fn nupbr_plan(gens: &GeneratorSet) -> LpPlan {
    let tree = &gens.tree;
    let dead = gens.dead_nodes();
    let roles = (0..tree.len())
        .map(|n| {
            initial_fixed(tree, n).unwrap_or(if dead[n] {
                Role::Fixed { value: Q::one(), support: false }
            } else {
                Role::Support
            })
        })
        .collect();
    LpPlan { roles, reps: gens.constraint_reps(), boundary: vec![] }
}

/// Y ≥ δ at every node.
pub fn strict_plan(gens: &GeneratorSet) -> LpPlan {
    let tree = &gens.tree;
    let roles = (0..tree.len()).map(|n| initial_fixed(tree, n).unwrap_or(Role::Support)).collect();
    LpPlan { roles, reps: gens.constraint_reps(), boundary: vec![] }
}

/// Y ≥ δ where some representative is positive; dead nodes unconstrained.
pub fn live_plan(gens: &GeneratorSet) -> LpPlan {
    let tree = &gens.tree;
    let dead = gens.dead_nodes();
    let roles = (0..tree.len())
        .map(|n| initial_fixed(tree, n).unwrap_or(if dead[n] { Role::Free } else { Role::Support }))
        .collect();
    LpPlan { roles, reps: gens.constraint_reps(), boundary: vec![] }
}

/// Y ≥ δ strictly before the given stopping time; unconstrained afterwards.
pub fn before_plan(gens: &GeneratorSet, tau: &StoppingTime) -> LpPlan {
    let tree = &gens.tree;
    let roles = (0..tree.len())
        .map(|n| initial_fixed(tree, n).unwrap_or(if tau.node_before(tree, n) { Role::Support } else { Role::Free }))
        .collect();
    LpPlan { roles, reps: gens.constraint_reps(), boundary: vec![] }
}

pub fn dsv_plan(gens: &GeneratorSet, xhat: &Process) -> Result<LpPlan, DeflatorError> {
    validate_dominating(gens, xhat)?;
    let tree = &gens.tree;
    let alive = xhat.alive(tree);
    let roles = (0..tree.len())
        .map(|n| {
            if !alive[n] {
                Role::Fixed { value: Q::zero(), support: false }
            } else {
                initial_fixed(tree, n).unwrap_or(Role::Support)
            }
        })
        .collect();
    let boundary = anchors(gens, xhat).into_iter().map(|(_, d, _)| (d, xhat.0[d].clone())).collect();
    Ok(LpPlan { roles, reps: gens.constraint_reps(), boundary })
}

pub fn synth_deflator_nupbr(gens: &GeneratorSet) -> Result<SynthResult, DeflatorError> {
    solve_plan(&gens.tree, &nupbr_plan(gens), SupportMode::StrictEverywhere)
}

pub fn synth_deflator_dsv(gens: &GeneratorSet, xhat: &Process) -> Result<SynthResult, DeflatorError> {
    solve_plan(&gens.tree, &dsv_plan(gens, xhat)?, SupportMode::StrictBeforeThatWithBoundary)
}

/// Y on [0, T̂) and 1 from T̂ on.
pub fn extend_after_cemetery(gens: &GeneratorSet, y: &Process, xhat: &Process) -> Process {
    let alive = xhat.alive(&gens.tree);
    Process((0..gens.tree.len()).map(|n| if alive[n] { y.0[n].clone() } else { Q::one() }).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Supermartingale { process: String, node: String, forward: String, current: String },
    Support { node: String, value: String },
    Boundary { node: String, value: String },
    Initial { node: String, value: String },
    Negative { node: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifySpec {
    pub mode: SupportMode,
    /// Required margin on the support region; `None` asks only for Y > 0.
    pub delta: Option<Q>,
    /// Dominating process, needed for the boundary mode.
    pub xhat: Option<Process>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmdReport {
    pub violations: Vec<Violation>,
    pub checked_processes: usize,
}

impl SmdReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Whether node `n` belongs to the support region of the mode.
pub fn support_region(gens: &GeneratorSet, mode: SupportMode, xhat: Option<&Process>) -> Vec<bool> {
    let tree = &gens.tree;
    match mode {
        SupportMode::StrictEverywhere => vec![true; tree.len()],
        SupportMode::StrictBeforeTtilde => {
            let tt = cemetery_structure(gens).ttilde;
            (0..tree.len()).map(|n| tt.node_before(tree, n)).collect()
        }
        SupportMode::StrictBeforeThatWithBoundary => {
            let hat = xhat.expect("boundary mode needs the dominating process");
            hat.alive(tree)
        }
    }
}

pub fn verify_smd(gens: &GeneratorSet, y: &Process, spec: &VerifySpec, samples: &[ClosureElement]) -> SmdReport {
    let tree = &gens.tree;
    let mut violations = Vec::new();
    let node = |n: usize| tree.id(n).to_string();
    for n in 0..tree.len() {
        if y.0[n].is_negative() {
            violations.push(Violation::Negative { node: node(n), value: fmt_q(&y.0[n]) });
        }
    }
    for &r in tree.level(0) {
        if !y.0[r].is_one() {
            violations.push(Violation::Initial { node: node(r), value: fmt_q(&y.0[r]) });
        }
    }
    let mut procs: Vec<(String, &Process)> = Vec::new();
    let reps = gens.constraint_reps();
    for r in &reps {
        procs.push((r.label.clone(), &r.process));
    }
    for (i, s) in samples.iter().enumerate() {
        procs.push((format!("sample#{i}"), &s.value));
    }
    for (label, x) in &procs {
        let xy = x.mul(y);
        for n in 0..tree.len() {
            if tree.children(n).is_empty() {
                continue;
            }
            let forward = tree.forward(&xy, n);
            if forward > xy.0[n] {
                violations.push(Violation::Supermartingale {
                    process: label.clone(),
                    node: node(n),
                    forward: fmt_q(&forward),
                    current: fmt_q(&xy.0[n]),
                });
            }
        }
    }
    let region = support_region(gens, spec.mode, spec.xhat.as_ref());
    for (n, _) in region.iter().enumerate().filter(|(_, inside)| **inside) {
        let ok = match &spec.delta {
            Some(d) => &y.0[n] >= d && y.0[n].is_positive(),
            None => y.0[n].is_positive(),
        };
        if !ok {
            violations.push(Violation::Support { node: node(n), value: fmt_q(&y.0[n]) });
        }
    }
    if spec.mode == SupportMode::StrictBeforeThatWithBoundary {
        if let Some(hat) = &spec.xhat {
            let mut seen = std::collections::HashSet::new();
            for (_, d, _) in anchors(gens, hat) {
                if !seen.insert(d) {
                    continue;
                }
                let v = &hat.0[d] * &y.0[d];
                let ok = match &spec.delta {
                    Some(delta) => &v >= delta && v.is_positive(),
                    None => v.is_positive(),
                };
                if !ok {
                    violations.push(Violation::Boundary { node: node(d), value: fmt_q(&v) });
                }
            }
        }
    }
    SmdReport { violations, checked_processes: procs.len() }
}

/// Z = X/X̂ before T̂, frozen at the left limit from T̂ on, plus the constant 1.
pub fn build_auxiliary_set(gens: &GeneratorSet, xhat: &Process) -> Result<GeneratorSet, DeflatorError> {
    validate_dominating(gens, xhat)?;
    let tree = &gens.tree;
    let alive = xhat.alive(tree);
    // For each node: the node whose quotient it carries.
    let source: Vec<usize> = (0..tree.len())
        .map(|n| {
            if alive[n] {
                n
            } else {
                let path = tree.path(n);
                let first_zero = path.iter().position(|&m| !alive[m]).expect("dead node on path");
                path[first_zero - 1]
            }
        })
        .collect();
    let quotient = |x: &Process| Process(source.iter().map(|&d| &x.0[d] / &xhat.0[d]).collect());
    let mut singles = Vec::new();
    let mut one = "one".to_string();
    while gens.singles.iter().any(|(n, _)| *n == one) || gens.rays.iter().any(|r| r.name == one) {
        one.push('\'');
    }
    singles.push((one, Process::constant(tree, Q::one())));
    for (name, p) in &gens.singles {
        singles.push((name.clone(), quotient(p)));
    }
    let rays = gens.rays.iter().map(|r| Ray { name: r.name.clone(), a: quotient(&r.a), b: quotient(&r.b) }).collect();
    Ok(GeneratorSet::new(tree.clone(), singles, rays).expect("quotients keep initial values"))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("precondition failed: 0 is not an absorbing state")]
    NotAbsorbing,
    #[error("precondition failed: NUPBR_loc fails at time {time}, node {node:?}")]
    Nupbr { time: usize, node: String },
    #[error("rung {rung}: stopped set admits no strictly positive deflator")]
    RungInfeasible { rung: usize },
    #[error(transparent)]
    Deflator(#[from] DeflatorError),
    #[error("refinement failed: {0}")]
    Refine(String),
}

/// Artifacts of one ladder rung.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineStage {
    pub rung: usize,
    pub members: Vec<String>,
    /// τ = cemetery time of the rung minus one, on base leaves.
    pub tau: StoppingTime,
    pub tree: EventTree,
    /// Refined tree of this stage → base tree.
    pub to_base: NodeMap,
    pub rung_delta: Q,
    /// Strictly positive deflator of the stopped set, on this stage's tree.
    pub rung_deflator: Process,
    /// Pasted product on this stage's tree.
    pub pasted: Process,
    /// Pasted product cut off after τ.
    pub cut: Process,
    /// Projection of the cut product onto the base tree.
    pub projected: Process,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineResult {
    pub deflator: Deflator,
    pub stages: Vec<PipelineStage>,
    pub verification: SmdReport,
    /// {Y = 0} ⊆ {every representative = 0}.
    pub zero_set_ok: bool,
}

fn shift_down(tau: &StoppingTime) -> StoppingTime {
    StoppingTime(
        tau.0
            .iter()
            .map(|v| match v {
                StopValue::At(t) => StopValue::At(t.checked_sub(1).expect("cemetery time is positive")),
                StopValue::Never => StopValue::Never,
            })
            .collect(),
    )
}

/// Value of a leafwise time at node `v`: τ∧time(v), read from any leaf below `v`.
fn stop_index(tree: &EventTree, base_leaf_pos: impl Fn(usize) -> usize, tau: &StoppingTime, v: usize) -> usize {
    let leaf = tree.leaves_under(v)[0];
    let t = tree.time(v);
    match tau.get(base_leaf_pos(leaf)) {
        StopValue::At(s) => s.min(t),
        StopValue::Never => t,
    }
}

pub fn pasting_pipeline(gens: &GeneratorSet) -> Result<PipelineResult, PipelineError> {
    let base = &gens.tree;
    let cs = cemetery_structure(gens);
    if !cs.absorbing {
        return Err(PipelineError::NotAbsorbing);
    }
    if let NupbrVerdict::Fails { time, node } = check_nupbr_loc(gens).verdict {
        return Err(PipelineError::Nupbr { time, node });
    }
    let mut rungs = Vec::new();
    for r in &cs.ladder {
        if rungs.last().is_none_or(|p: &&crate::process::LadderRung| p.hitting != r.hitting) {
            rungs.push(r);
        }
    }

    let mut stages: Vec<PipelineStage> = Vec::new();
    let mut tree = base.clone();
    let mut to_base = NodeMap::identity(base);
    // Stage trees → base, and per stage the map into every earlier stage tree.
    let mut stage_maps: Vec<NodeMap> = Vec::new();
    for (k, rung) in rungs.iter().enumerate() {
        let tau = shift_down(&rung.hitting);
        // Cells {T̂ = j} revealed at j − 1; the ∞ cell at the horizon.
        let mut cell_keys: Vec<StopValue> = rung.hitting.0.clone();
        cell_keys.sort();
        cell_keys.dedup();
        let cells: Vec<Vec<usize>> = cell_keys
            .iter()
            .map(|key| {
                tree.leaves()
                    .iter()
                    .copied()
                    .filter(|&l| rung.hitting.get(base.leaf_pos(to_base.orig[l])) == *key)
                    .collect()
            })
            .collect();
        let reveal: Vec<usize> = cell_keys
            .iter()
            .map(|key| match key {
                StopValue::At(j) => j - 1,
                StopValue::Never => base.horizon(),
            })
            .collect();
        let (next, step) = tree.refine_by_partition(&cells, &reveal).map_err(|e| PipelineError::Refine(e.to_string()))?;
        for m in stage_maps.iter_mut() {
            *m = step.compose(m);
        }
        stage_maps.push(NodeMap::identity(&next));
        to_base = step.compose(&to_base);
        tree = next;

        let leaf_pos = |l: usize| base.leaf_pos(to_base.orig[l]);
        let stopped: Vec<Rep> = gens
            .constraint_reps()
            .into_iter()
            .map(|r| {
                let lifted = to_base.lift(&r.process);
                let p = Process::from_fn(&tree, |v| {
                    let s = stop_index(&tree, leaf_pos, &tau, v);
                    lifted.0[tree.ancestor_at(v, s)].clone()
                });
                Rep { label: r.label, process: p }
            })
            .collect();
        let roles = (0..tree.len())
            .map(|v| if tree.time(v) == 0 { Role::Fixed { value: Q::one(), support: true } } else { Role::Support })
            .collect();
        let plan = LpPlan { roles, reps: stopped, boundary: vec![] };
        let res = solve_plan(&tree, &plan, SupportMode::StrictEverywhere)?;
        let Some(rung_def) = res.deflator else {
            return Err(PipelineError::RungInfeasible { rung: k + 1 });
        };

        // Pasted product over all rungs so far, evaluated on this stage's tree.
        let taus: Vec<StoppingTime> = stages.iter().map(|s| s.tau.clone()).chain([tau.clone()]).collect();
        let factors: Vec<Process> = stages
            .iter()
            .zip(&stage_maps)
            .map(|(s, m)| m.lift(&s.rung_deflator))
            .chain([rung_def.y.clone()])
            .collect();
        let pasted = Process::from_fn(&tree, |v| {
            let mut acc = Q::one();
            for (i, f) in factors.iter().enumerate() {
                let hi = stop_index(&tree, leaf_pos, &taus[i], v);
                let lo = if i == 0 { 0 } else { stop_index(&tree, leaf_pos, &taus[i - 1], v) };
                acc *= &f.0[tree.ancestor_at(v, hi)] / &f.0[tree.ancestor_at(v, lo)];
            }
            acc
        });
        let cut = Process::from_fn(&tree, |v| {
            if stop_index(&tree, leaf_pos, &tau, v) == tree.time(v) {
                pasted.0[v].clone()
            } else {
                Q::zero()
            }
        });
        let projected = base.optional_projection(&to_base, &tree, &cut).map_err(|e| PipelineError::Refine(e.to_string()))?;
        stages.push(PipelineStage {
            rung: k + 1,
            members: rung.members.clone(),
            tau,
            tree: tree.clone(),
            to_base: to_base.clone(),
            rung_delta: res.delta,
            rung_deflator: rung_def.y,
            pasted,
            cut,
            projected,
        });
    }

    let last = stages.last().expect("at least one rung").projected.clone();
    let y = Process::from_fn(base, |n| if cs.ttilde.node_before(base, n) { last.0[n].clone() } else { Q::zero() });
    let region: Vec<usize> = (0..base.len()).filter(|&n| cs.ttilde.node_before(base, n)).collect();
    let delta = region.iter().map(|&n| y.0[n].clone()).min().unwrap_or_else(Q::zero);
    let certificate = step_checks(base, &gens.constraint_reps(), &y);
    let spec = VerifySpec { mode: SupportMode::StrictBeforeTtilde, delta: Some(delta.clone()), xhat: None };
    let verification = verify_smd(gens, &y, &spec, &[]);
    let dead = gens.dead_nodes();
    let zero_set_ok = (0..base.len()).all(|n| !y.0[n].is_zero() || dead[n]);
    let deflator = Deflator { y, delta, mode: SupportMode::StrictBeforeTtilde, certificate };
    Ok(PipelineResult { deflator, stages, verification, zero_set_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::tests::timeline;
    use crate::process::{classify, sample_closure};
    use crate::rational::{q, qi};
    use crate::tree::{NodeSpec, TreeSpec};

    fn ints(v: &[i64]) -> Process {
        Process(v.iter().map(|&x| qi(x)).collect())
    }

    fn singles(tree: EventTree, v: &[&[i64]]) -> GeneratorSet {
        GeneratorSet::new(tree, v.iter().enumerate().map(|(i, p)| (format!("g{i}"), ints(p))).collect(), vec![]).unwrap()
    }

    fn binomial() -> GeneratorSet {
        let tree = EventTree::build(&TreeSpec {
            nodes: vec![
                NodeSpec { id: "r".into(), time: 0, parent: None, prob: qi(1) },
                NodeSpec { id: "u".into(), time: 1, parent: Some("r".into()), prob: q(1, 2) },
                NodeSpec { id: "d".into(), time: 1, parent: Some("r".into()), prob: q(1, 2) },
            ],
            horizon: 1,
        })
        .unwrap();
        let stock = Process(vec![qi(1), qi(2), q(1, 2)]);
        GeneratorSet::new(tree, vec![("bond".into(), ints(&[1, 1, 1])), ("stock".into(), stock)], vec![]).unwrap()
    }

    fn ex1() -> GeneratorSet {
        GeneratorSet::new(timeline(3), vec![], vec![Ray { name: "r".into(), a: ints(&[1, 1, 0]), b: ints(&[0, 1, 0]) }])
            .unwrap()
    }

    #[test]
    fn binomial_lp() {
        let g = binomial();
        let r = synth_deflator_nupbr(&g).unwrap();
        assert_eq!(r.delta, q(4, 5));
        assert_eq!(r.deflator.unwrap().y, Process(vec![qi(1), q(4, 5), q(4, 5)]));
    }

    #[test]
    fn ray_instance_certificate_names_root_b_row() {
        let r = synth_deflator_nupbr(&ex1()).unwrap();
        assert!(r.delta.is_zero());
        let c = r.certificate.unwrap();
        assert!(c.verified);
        assert!(c.names("smd:r.B@t0"), "{:?}", c.multipliers);
        let r = synth_deflator_dsv(&ex1(), &ints(&[1, 1, 0])).unwrap();
        assert!(r.delta.is_zero());
        let c = r.certificate.unwrap();
        assert!(c.verified && c.names("smd:r.B@t0"), "{:?}", c.multipliers);
    }

    #[test]
    fn revival_without_absorption_has_no_deflator() {
        let r = synth_deflator_nupbr(&singles(timeline(3), &[&[1, 0, 1]])).unwrap();
        assert!(r.delta.is_zero());
        assert!(r.certificate.unwrap().verified);
    }

    #[test]
    fn dsv_lp_single_dominating() {
        let g = singles(timeline(3), &[&[1, 1, 0]]);
        let r = synth_deflator_dsv(&g, &ints(&[1, 1, 0])).unwrap();
        assert_eq!(r.delta, qi(1));
        assert_eq!(r.deflator.unwrap().y, ints(&[1, 1, 0]));
    }

    #[test]
    fn dsv_extension_is_strictly_positive() {
        let g = singles(timeline(4), &[&[1, 1, 0, 0], &[1, 1, 1, 0]]);
        let hat = classify(&g).witness.unwrap();
        let r = synth_deflator_dsv(&g, &hat).unwrap();
        let y = r.deflator.unwrap().y;
        let ext = extend_after_cemetery(&g, &y, &hat);
        assert!(ext.is_positive());
        let spec = VerifySpec { mode: SupportMode::StrictEverywhere, delta: None, xhat: None };
        assert!(verify_smd(&g, &ext, &spec, &[]).passes());
    }

    #[test]
    fn verify_examples() {
        let g = binomial();
        let spec = VerifySpec { mode: SupportMode::StrictEverywhere, delta: None, xhat: None };
        let rep = verify_smd(&g, &Process::constant(&g.tree, qi(1)), &spec, &[]);
        assert_eq!(
            rep.violations,
            vec![Violation::Supermartingale {
                process: "stock".into(),
                node: "r".into(),
                forward: "5/4".into(),
                current: "1".into()
            }]
        );
        let y = Process(vec![qi(1), q(4, 5), q(4, 5)]);
        let samples = sample_closure(&g, 3, 1, &[]).elements;
        assert!(verify_smd(&g, &y, &spec, &samples).passes());
    }

    #[test]
    fn auxiliary_set_examples() {
        let g = singles(timeline(3), &[&[1, 1, 0]]);
        let aux = build_auxiliary_set(&g, &ints(&[1, 1, 0])).unwrap();
        assert_eq!(aux.singles[1].1, ints(&[1, 1, 1]));
        let g = GeneratorSet::new(
            timeline(3),
            vec![("hat".into(), ints(&[1, 1, 0])), ("x".into(), Process(vec![qi(1), q(1, 2), qi(0)]))],
            vec![],
        )
        .unwrap();
        let aux = build_auxiliary_set(&g, &ints(&[1, 1, 0])).unwrap();
        assert_eq!(aux.single("x").unwrap(), &Process(vec![qi(1), q(1, 2), q(1, 2)]));
        assert_eq!(classify(&aux).kind, crate::process::ClassKind::Spp);
    }

    #[test]
    fn pipeline_on_two_rung_ladder() {
        let g = singles(timeline(4), &[&[1, 1, 0, 0], &[1, 1, 1, 0]]);
        let res = pasting_pipeline(&g).unwrap();
        assert_eq!(res.stages.len(), 2);
        assert!(res.verification.passes(), "{:?}", res.verification.violations);
        assert!(res.zero_set_ok);
        // The second pasted product agrees with the first up to the first τ.
        let (s1, s2) = (&res.stages[0], &res.stages[1]);
        for v in 0..s2.tree.len() {
            let t = s2.tree.time(v);
            if t <= 1 {
                let base = s2.to_base.orig[v];
                let same: Vec<usize> = (0..s1.tree.len()).filter(|&w| s1.to_base.orig[w] == base).collect();
                assert!(same.iter().any(|&w| s1.pasted.0[w] == s2.pasted.0[v]));
            }
        }
    }

    #[test]
    fn pipeline_on_spp_matches_direct_lp() {
        let g = binomial();
        let res = pasting_pipeline(&g).unwrap();
        assert_eq!(res.stages.len(), 1);
        let direct = synth_deflator_nupbr(&g).unwrap().deflator.unwrap();
        assert_eq!(res.deflator.y, direct.y);
    }

    #[test]
    fn pipeline_rejects_non_absorbing() {
        let g = singles(timeline(3), &[&[1, 0, 1]]);
        assert_eq!(pasting_pipeline(&g).unwrap_err(), PipelineError::NotAbsorbing);
        assert!(matches!(pasting_pipeline(&ex1()).unwrap_err(), PipelineError::Nupbr { time: 1, .. }));
    }
}
