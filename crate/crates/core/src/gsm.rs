//! Generalized supermartingales on raw (possibly non-adapted) processes, and
//! their comparison with the optional projection.

use indexmap::IndexMap;
use num_traits::{One, Zero};

use crate::rational::Q;
use crate::tree::{EventTree, MartingaleVerdict, Process};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GsmError {
    #[error("leaf {leaf:?}: ratio Z_{t}/Z_{s} has a zero denominator and positive numerator")]
    Undefined { leaf: String, s: usize, t: usize },
    #[error("leaf {0:?} is not a leaf of the tree")]
    UnknownLeaf(String),
    #[error("leaf {0:?} has no values")]
    MissingLeaf(String),
    #[error("leaf {leaf:?}: {got} values exceed horizon + 1 = {max}")]
    TooLong { leaf: String, got: usize, max: usize },
    #[error("leaf {leaf:?}: negative value at time {t}")]
    Negative { leaf: String, t: usize },
}

/// Values per leaf (in `EventTree::leaves` order) and time `0..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawProcess(pub Vec<Vec<Q>>);

impl RawProcess {
    /// Rows shorter than `horizon + 1` are extended with their last value.
    pub fn from_rows(tree: &EventTree, rows: &IndexMap<String, Vec<Q>>) -> Result<Self, GsmError> {
        for id in rows.keys() {
            match tree.index_of(id) {
                Some(n) if tree.children(n).is_empty() => {}
                _ => return Err(GsmError::UnknownLeaf(id.clone())),
            }
        }
        let width = tree.horizon() + 1;
        let mut out = Vec::with_capacity(tree.leaves().len());
        for &l in tree.leaves() {
            let id = tree.id(l);
            let row = rows.get(id).filter(|r| !r.is_empty()).ok_or_else(|| GsmError::MissingLeaf(id.into()))?;
            if row.len() > width {
                return Err(GsmError::TooLong { leaf: id.into(), got: row.len(), max: width });
            }
            if let Some(t) = row.iter().position(|v| *v < Q::zero()) {
                return Err(GsmError::Negative { leaf: id.into(), t });
            }
            let mut full = row.clone();
            full.resize(width, row.last().expect("nonempty").clone());
            out.push(full);
        }
        Ok(RawProcess(out))
    }

    pub fn to_rows(&self, tree: &EventTree) -> IndexMap<String, Vec<Q>> {
        tree.leaves().iter().zip(&self.0).map(|(&l, r)| (tree.id(l).to_string(), r.clone())).collect()
    }

    pub fn from_adapted(tree: &EventTree, x: &Process) -> Self {
        RawProcess(tree.leaves().iter().map(|&l| tree.path(l).iter().map(|&n| x.0[n].clone()).collect()).collect())
    }

    pub fn is_adapted(&self, tree: &EventTree) -> bool {
        (0..tree.len()).all(|n| {
            let t = tree.time(n);
            let (lo, hi) = tree.leaf_span(n);
            self.0[lo..hi].iter().all(|r| r[t] == self.0[lo][t])
        })
    }
}

/// One (s, t, atom) line of the check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GsmRow {
    pub s: usize,
    pub t: usize,
    pub atom: usize,
    /// E[(Z_t/Z_s)·I_A].
    pub expectation: Q,
    /// P(A).
    pub mass: Q,
}

impl GsmRow {
    pub fn holds(&self) -> bool {
        self.expectation <= self.mass
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GsmVerdict {
    pub holds: bool,
    pub rows: Vec<GsmRow>,
}

impl GsmVerdict {
    pub fn witness(&self) -> Option<&GsmRow> {
        self.rows.iter().find(|r| !r.holds())
    }
}

fn ratio(tree: &EventTree, z: &RawProcess, k: usize, s: usize, t: usize) -> Result<Q, GsmError> {
    let (num, den) = (&z.0[k][t], &z.0[k][s]);
    if den.is_zero() {
        if num.is_zero() {
            Ok(Q::one())
        } else {
            Err(GsmError::Undefined { leaf: tree.id(tree.leaves()[k]).into(), s, t })
        }
    } else {
        Ok(num / den)
    }
}

pub fn is_generalized_supermartingale(tree: &EventTree, z: &RawProcess) -> Result<GsmVerdict, GsmError> {
    let horizon = tree.horizon();
    let mut rows = Vec::new();
    for s in 0..horizon {
        for t in s + 1..=horizon {
            for &a in tree.level(s) {
                let (lo, hi) = tree.leaf_span(a);
                let mut expectation = Q::zero();
                for k in lo..hi {
                    expectation += tree.uprob(tree.leaves()[k]) * ratio(tree, z, k, s, t)?;
                }
                rows.push(GsmRow { s, t, atom: a, expectation, mass: tree.uprob(a).clone() });
            }
        }
    }
    Ok(GsmVerdict { holds: rows.iter().all(GsmRow::holds), rows })
}

/// Node value = conditional mean of the raw values at that node's time.
pub fn optional_projection(tree: &EventTree, z: &RawProcess) -> Process {
    Process::from_fn(tree, |n| {
        let t = tree.time(n);
        let (lo, hi) = tree.leaf_span(n);
        let total: Q = (lo..hi).map(|k| tree.uprob(tree.leaves()[k]) * &z.0[k][t]).sum();
        total / tree.uprob(n)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionComparison {
    pub gsm: GsmVerdict,
    pub projection: Process,
    pub projection_check: MartingaleVerdict,
}

impl ProjectionComparison {
    pub fn quadrant(&self) -> (bool, bool) {
        (self.gsm.holds, self.projection_check.holds())
    }
}

pub fn compare_projection(tree: &EventTree, z: &RawProcess) -> Result<ProjectionComparison, GsmError> {
    let gsm = is_generalized_supermartingale(tree, z)?;
    let projection = optional_projection(tree, z);
    let projection_check = tree.is_supermartingale(&projection);
    Ok(ProjectionComparison { gsm, projection, projection_check })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use crate::tree::{NodeSpec, TreeSpec};

    fn chain_then_split() -> EventTree {
        let node = |id: &str, t, p: Option<&str>, pr| NodeSpec { id: id.into(), time: t, parent: p.map(Into::into), prob: pr };
        EventTree::build(&TreeSpec {
            nodes: vec![
                node("r", 0, None, qi(1)),
                node("m1", 1, Some("r"), qi(1)),
                node("m2", 2, Some("m1"), qi(1)),
                node("a", 3, Some("m2"), q(1, 2)),
                node("b", 3, Some("m2"), q(1, 2)),
            ],
            horizon: 3,
        })
        .unwrap()
    }

    fn raw(tree: &EventTree, a: &[i64], b: &[i64]) -> RawProcess {
        let rows: IndexMap<String, Vec<Q>> =
            [("a".to_string(), a.iter().map(|&v| qi(v)).collect()), ("b".to_string(), b.iter().map(|&v| qi(v)).collect())]
                .into_iter()
                .collect();
        RawProcess::from_rows(tree, &rows).unwrap()
    }

    #[test]
    fn z_row() {
        let tree = chain_then_split();
        let z = raw(&tree, &[5, 6, 9], &[5, 2, 1]);
        assert!(!z.is_adapted(&tree));
        let c = compare_projection(&tree, &z).unwrap();
        assert_eq!(c.quadrant(), (true, false));
        assert_eq!(&c.projection.0[..3], &[qi(5), qi(4), qi(5)]);
    }

    #[test]
    fn w_row() {
        let tree = chain_then_split();
        let w = raw(&tree, &[5, 9, 6], &[5, 1, 2]);
        let c = compare_projection(&tree, &w).unwrap();
        assert_eq!(c.quadrant(), (false, true));
        assert_eq!(&c.projection.0[..3], &[qi(5), qi(5), qi(4)]);
        let w = c.gsm.witness().unwrap();
        assert_eq!((w.s, w.t), (1, 2));
        assert_eq!(w.expectation, q(4, 3));
    }

    #[test]
    fn adapted_agrees_with_supermartingale() {
        let tree = chain_then_split();
        let x = Process(vec![qi(4), qi(4), qi(3), qi(4), qi(2)]);
        let r = RawProcess::from_adapted(&tree, &x);
        assert!(r.is_adapted(&tree));
        let c = compare_projection(&tree, &r).unwrap();
        assert_eq!(c.projection, x);
        assert_eq!(c.quadrant(), (true, true));
        let y = Process(vec![qi(4), qi(4), qi(3), qi(6), qi(2)]);
        let c = compare_projection(&tree, &RawProcess::from_adapted(&tree, &y)).unwrap();
        assert_eq!(c.quadrant(), (false, false));
    }

    #[test]
    fn zero_denominator() {
        let tree = chain_then_split();
        let ok = raw(&tree, &[5, 0, 0], &[5, 2, 1]);
        assert!(is_generalized_supermartingale(&tree, &ok).is_ok());
        let bad = raw(&tree, &[5, 0, 1], &[5, 2, 1]);
        assert_eq!(
            is_generalized_supermartingale(&tree, &bad).unwrap_err(),
            GsmError::Undefined { leaf: "a".into(), s: 1, t: 2 }
        );
    }

    #[test]
    fn row_validation() {
        let tree = chain_then_split();
        let mut rows = IndexMap::new();
        rows.insert("a".to_string(), vec![qi(1)]);
        assert_eq!(RawProcess::from_rows(&tree, &rows).unwrap_err(), GsmError::MissingLeaf("b".into()));
        rows.insert("m1".to_string(), vec![qi(1)]);
        assert_eq!(RawProcess::from_rows(&tree, &rows).unwrap_err(), GsmError::UnknownLeaf("m1".into()));
    }
}
