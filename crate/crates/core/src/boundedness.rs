//! Suprema over the fork-convex closure, NUPBR_loc and DSV checks, and
//! liminf products of eventually periodic sequences.
//!
//! The sup is computed over pure switching strategies: at every node a
//! strategy holds one basis process (a single or a ray's A) with some scale.
//! Two effects push the sup to infinity:
//!
//! * a ray direction B that is positive at a node (take x → ∞);
//! * an element that is 0 at a node q where another element is positive, and
//!   that later revives at m. Mixing the two with a tiny weight on the positive
//!   one and switching into the mixture at q scales the revival without bound.
//!
//! Otherwise a convex combination never beats its best component, so the
//! pure-strategy DP is exact.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::process::GeneratorSet;
use crate::rational::{ExtValue, Q};
use crate::tree::{Process, StopValue};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BoundednessError {
    #[error("dominating process is invalid: {0}")]
    NotDominating(String),
    #[error("sequence has an empty cycle")]
    EmptyCycle,
    #[error("sequence has a negative entry")]
    NegativeEntry,
    #[error("undetermined: liminf product of ∞ and 0 can take any value")]
    OutOfHypotheses,
}

/// Sup of closure values per node, split by whether the value stayed positive
/// along the path (`pos`) or hit 0 at some earlier node (`zero`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupProfile {
    pub pos: Vec<ExtValue>,
    pub zero: Vec<ExtValue>,
}

impl SupProfile {
    pub fn total(&self, n: usize) -> ExtValue {
        self.pos[n].clone().max(self.zero[n].clone())
    }

    pub fn is_finite(&self) -> bool {
        (0..self.pos.len()).all(|n| self.total(n).is_finite())
    }
}

/// Reachability of zero values, shared by the DP and the deflator LPs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroReach {
    /// Some representative is positive at the node.
    pub pos: Vec<bool>,
    /// Some closure element is 0 at the node.
    pub zero: Vec<bool>,
    /// From this node on, some closure element can be pinned at 0 while
    /// another is positive.
    pub dead: Vec<bool>,
}

pub fn zero_reach(gens: &GeneratorSet) -> ZeroReach {
    let tree = &gens.tree;
    let reps = gens.support_reps();
    let len = tree.len();
    let mut out = ZeroReach { pos: vec![false; len], zero: vec![false; len], dead: vec![false; len] };
    for n in 0..len {
        let parent_dead = tree.parent(n).is_some_and(|p| out.dead[p]);
        out.pos[n] = reps.iter().any(|r| r.process.0[n].is_positive());
        out.zero[n] = parent_dead || reps.iter().any(|r| r.process.0[n].is_zero());
        out.dead[n] = parent_dead || (out.zero[n] && out.pos[n]);
    }
    out
}

/// Nodes m with an ancestor q where one element is 0 and another positive,
/// and an element that is 0 at q is positive at m.
fn mixing_blowups(gens: &GeneratorSet, reach: &ZeroReach) -> Vec<bool> {
    let tree = &gens.tree;
    let basis: Vec<Process> = gens.basis().into_iter().map(|r| r.process).collect();
    let mut hit = vec![false; tree.len()];
    for q in 0..tree.len() {
        if !(reach.pos[q] && reach.zero[q]) {
            continue;
        }
        // Basis processes a zero-valued element can be holding, per node.
        let mut latent: Vec<Option<Vec<bool>>> = vec![None; tree.len()];
        latent[q] = Some(basis.iter().map(|g| g.0[q].is_zero()).collect());
        for u in tree.subtree(q) {
            let Some(held) = latent[u].clone() else { continue };
            for &r in tree.children(u) {
                let revives = held.iter().zip(&basis).any(|(&h, g)| h && g.0[r].is_positive());
                if revives {
                    hit[r] = true;
                }
                let next = held
                    .iter()
                    .zip(&basis)
                    .map(|(&h, g)| h || g.0[r].is_zero() || (revives && g.0[r].is_positive()))
                    .collect();
                latent[r] = Some(next);
            }
        }
    }
    hit
}

fn bump(slot: &mut Option<ExtValue>, v: ExtValue) {
    *slot = Some(match slot.take() {
        Some(cur) => cur.max(v),
        None => v,
    });
}

pub fn closure_sup(gens: &GeneratorSet) -> SupProfile {
    let tree = &gens.tree;
    let len = tree.len();
    let basis: Vec<Process> = gens.basis().into_iter().map(|r| r.process).collect();
    let reach = zero_reach(gens);
    let mixing = mixing_blowups(gens, &reach);

    // Ray directions positive at a node make the sup infinite there.
    let mut ray_pos = vec![false; len];
    let mut ray_zero = vec![false; len];
    for r in &gens.rays {
        let sum = r.member(&Q::one());
        let alive = sum.alive(tree);
        for n in 0..len {
            if r.b.0[n].is_positive() {
                if alive[n] {
                    ray_pos[n] = true;
                } else {
                    ray_zero[n] = true;
                }
            }
        }
    }

    let g = basis.len();
    // Scale of each held basis process on arrival, by phase.
    let mut hp: Vec<Vec<Option<ExtValue>>> = vec![vec![None; g]; len];
    let mut hz: Vec<Vec<Option<ExtValue>>> = vec![vec![None; g]; len];
    for &r in tree.level(0) {
        hp[r] = vec![Some(ExtValue::Finite(Q::one())); g];
    }
    let mut profile = SupProfile { pos: vec![ExtValue::zero(); len], zero: vec![ExtValue::zero(); len] };
    for n in 0..len {
        let mut vpos: Option<ExtValue> = None;
        let mut vzero: Option<ExtValue> = None;
        for (k, b) in basis.iter().enumerate() {
            if let Some(s) = &hp[n][k] {
                if b.0[n].is_positive() {
                    bump(&mut vpos, s.scale(&b.0[n]));
                } else {
                    bump(&mut vzero, ExtValue::zero());
                }
            }
            if let Some(s) = &hz[n][k] {
                bump(&mut vzero, s.scale(&b.0[n]));
            }
        }
        if ray_pos[n] || mixing[n] {
            vpos = Some(ExtValue::Infinite);
        }
        if ray_zero[n] {
            vzero = Some(ExtValue::Infinite);
        }
        profile.pos[n] = vpos.clone().unwrap_or_else(ExtValue::zero);
        profile.zero[n] = vzero.clone().unwrap_or_else(ExtValue::zero);

        let mut dep_p = vec![None; g];
        let mut dep_z = vec![None; g];
        for (k, b) in basis.iter().enumerate() {
            let v = &b.0[n];
            if v.is_positive() {
                dep_p[k] = vpos.as_ref().map(|x| x.div(v));
                dep_z[k] = vzero.as_ref().map(|x| x.div(v));
            } else {
                let mut slot = None;
                for s in [&hz[n][k], &hp[n][k]].into_iter().flatten() {
                    bump(&mut slot, s.clone());
                }
                if reach.zero[n] {
                    bump(&mut slot, ExtValue::Finite(Q::one()));
                }
                dep_z[k] = slot;
            }
        }
        for &c in tree.children(n) {
            hp[c] = dep_p.clone();
            hz[c] = dep_z.clone();
        }
    }
    profile
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum NupbrVerdict {
    Holds,
    Fails { time: usize, node: String },
}

impl NupbrVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, NupbrVerdict::Holds)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NupbrReport {
    pub verdict: NupbrVerdict,
    pub profile: SupProfile,
}

impl NupbrReport {
    /// Sup per node at one time level, in level order.
    pub fn level(&self, gens: &GeneratorSet, t: usize) -> Vec<(String, ExtValue)> {
        gens.tree.level(t).iter().map(|&n| (gens.tree.id(n).to_string(), self.profile.total(n))).collect()
    }
}

pub fn check_nupbr_loc(gens: &GeneratorSet) -> NupbrReport {
    let profile = closure_sup(gens);
    let tree = &gens.tree;
    let verdict = (0..=tree.horizon())
        .flat_map(|t| tree.level(t).iter().map(move |&n| (t, n)))
        .find(|&(_, n)| !profile.total(n).is_finite())
        .map_or(NupbrVerdict::Holds, |(time, n)| NupbrVerdict::Fails { time, node: tree.id(n).to_string() });
    NupbrReport { verdict, profile }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsvAnchor {
    pub leaf: usize,
    pub anchor: usize,
    pub cemetery: StopValue,
    pub statistic: ExtValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsvReport {
    pub anchors: Vec<DsvAnchor>,
    pub sup: ExtValue,
    pub holds: bool,
}

/// Checks that `xhat` is unit-initialized and vanishes exactly where every
/// representative vanishes.
pub fn validate_dominating(gens: &GeneratorSet, xhat: &Process) -> Result<(), BoundednessError> {
    let tree = &gens.tree;
    if xhat.0.len() != tree.len() {
        return Err(BoundednessError::NotDominating("length differs from tree".into()));
    }
    if !xhat.is_nonnegative() {
        return Err(BoundednessError::NotDominating("negative value".into()));
    }
    if tree.level(0).iter().any(|&r| !xhat.0[r].is_one()) {
        return Err(BoundednessError::NotDominating("initial value is not 1".into()));
    }
    let dead = gens.dead_nodes();
    if let Some(n) = (0..tree.len()).find(|&n| xhat.0[n].is_zero() != dead[n]) {
        let why = if dead[n] { "positive where every generator vanishes" } else { "zero where a generator is positive" };
        return Err(BoundednessError::NotDominating(format!("{why} at node {:?}", tree.id(n))));
    }
    Ok(())
}

/// Node at which the left limit at the cemetery time of `xhat` is read, per leaf.
pub fn anchors(gens: &GeneratorSet, xhat: &Process) -> Vec<(usize, usize, StopValue)> {
    let tree = &gens.tree;
    let that = tree.hitting_time(xhat);
    tree.leaves()
        .iter()
        .zip(&that.0)
        .map(|(&l, &tv)| {
            let d = match tv {
                StopValue::At(t) => tree.ancestor_at(l, t.checked_sub(1).expect("cemetery time is positive")),
                StopValue::Never => l,
            };
            (l, d, tv)
        })
        .collect()
}

pub fn dsv_statistic_sup(gens: &GeneratorSet, xhat: &Process) -> Result<DsvReport, BoundednessError> {
    validate_dominating(gens, xhat)?;
    let profile = closure_sup(gens);
    let anchors: Vec<DsvAnchor> = anchors(gens, xhat)
        .into_iter()
        .map(|(leaf, anchor, cemetery)| DsvAnchor {
            leaf,
            anchor,
            cemetery,
            statistic: profile.total(anchor).div(&xhat.0[anchor]),
        })
        .collect();
    let sup = anchors.iter().map(|a| a.statistic.clone()).max().unwrap_or_else(ExtValue::zero);
    Ok(DsvReport { holds: sup.is_finite(), anchors, sup })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventuallyPeriodicSeq {
    #[serde(with = "crate::rational::qvec")]
    pub prefix: Vec<Q>,
    #[serde(with = "crate::rational::qvec")]
    pub cycle: Vec<Q>,
    pub diverges: bool,
}

impl EventuallyPeriodicSeq {
    pub fn periodic(cycle: Vec<Q>) -> Self {
        EventuallyPeriodicSeq { prefix: vec![], cycle, diverges: false }
    }

    pub fn divergent() -> Self {
        EventuallyPeriodicSeq { prefix: vec![], cycle: vec![Q::one()], diverges: true }
    }

    /// Value at step t (meaningless for divergent sequences).
    pub fn at(&self, t: usize) -> &Q {
        if t < self.prefix.len() {
            &self.prefix[t]
        } else {
            &self.cycle[(t - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn liminf(&self) -> ExtValue {
        if self.diverges {
            ExtValue::Infinite
        } else {
            ExtValue::Finite(self.cycle.iter().min().expect("non-empty cycle").clone())
        }
    }

    fn validate(&self) -> Result<(), BoundednessError> {
        if self.cycle.is_empty() {
            return Err(BoundednessError::EmptyCycle);
        }
        if self.prefix.iter().chain(&self.cycle).any(|v| v.is_negative()) {
            return Err(BoundednessError::NegativeEntry);
        }
        Ok(())
    }
}

/// Hypotheses under which the product inequality is asserted; several can hold at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProductCase {
    /// Both liminfs finite.
    BothFinite,
    /// liminf x = ∞ and liminf y > 0.
    FirstInfinite,
    /// 0 < liminf y < ∞.
    SecondPositiveFinite,
    /// liminf y = ∞ and liminf x > 0, the mirror of `FirstInfinite`.
    SecondInfinite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiminfReport {
    pub x: ExtValue,
    pub y: ExtValue,
    pub product: ExtValue,
    /// Every hypothesis that applies, in declaration order.
    pub cases: Vec<ProductCase>,
    pub holds: bool,
}

fn lcm(a: usize, b: usize) -> usize {
    num_integer::lcm(a, b)
}

pub fn liminf_product_check(x: &EventuallyPeriodicSeq, y: &EventuallyPeriodicSeq) -> Result<LiminfReport, BoundednessError> {
    x.validate()?;
    y.validate()?;
    let (lx, ly) = (x.liminf(), y.liminf());
    let positive_finite = |v: &ExtValue| v.is_finite() && !v.is_zero();
    let cases: Vec<ProductCase> = [
        (ProductCase::BothFinite, lx.is_finite() && ly.is_finite()),
        (ProductCase::FirstInfinite, !lx.is_finite() && !ly.is_zero()),
        (ProductCase::SecondPositiveFinite, positive_finite(&ly)),
        (ProductCase::SecondInfinite, !ly.is_finite() && !lx.is_zero()),
    ]
    .into_iter()
    .filter_map(|(c, applies)| applies.then_some(c))
    .collect();
    if cases.is_empty() {
        return Err(BoundednessError::OutOfHypotheses);
    }
    let product = if x.diverges || y.diverges {
        // The other factor is eventually bounded below by a positive constant.
        ExtValue::Infinite
    } else {
        let start = x.prefix.len().max(y.prefix.len());
        let period = lcm(x.cycle.len(), y.cycle.len());
        ExtValue::Finite((start..start + period).map(|t| x.at(t) * y.at(t)).min().expect("non-empty period"))
    };
    let lhs = lx.mul(&ly).expect("∞·0 excluded above");
    Ok(LiminfReport { holds: lhs <= product, x: lx, y: ly, product, cases })
}
