//! Independent oracles and instance sweeps shared by the integration tests.
#![allow(dead_code)]

use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smd_core::boundedness::SupProfile;
use smd_core::gallery::{gallery, sweep_names};
use smd_core::lab::{random_instance, FuzzConfig};
use smd_core::process::GeneratorSet;
use smd_core::rational::{ExtValue, Q};

/// Gallery instances followed by `count` seeded random ones.
pub fn sweep(count: usize, seed: u64, cfg: &FuzzConfig) -> Vec<(String, GeneratorSet)> {
    let mut out: Vec<(String, GeneratorSet)> =
        sweep_names().into_iter().map(|n| (format!("gallery:{n}"), gallery(&n).unwrap().gens)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        out.push((format!("random#{i}"), random_instance(&mut rng, cfg)));
    }
    out
}

pub fn absorbing_sweep(count: usize, seed: u64) -> Vec<(String, GeneratorSet)> {
    sweep(count, seed, &FuzzConfig::default())
}

/// Value of every pure element (one generator held at a time, switched at
/// nodes along the path) at each node of the path from the root to `n`.
pub fn pure_paths(gens: &GeneratorSet, n: usize) -> Vec<Vec<Q>> {
    let tree = &gens.tree;
    let path = tree.path(n);
    let singles: Vec<&Vec<Q>> = gens.singles.iter().map(|(_, p)| &p.0).collect();
    // (scale, held generator, values so far)
    let mut states: Vec<(Q, usize, Vec<Q>)> =
        (0..singles.len()).map(|g| (Q::one(), g, vec![singles[g][path[0]].clone()])).collect();
    for k in 1..path.len() {
        let (q, m) = (path[k - 1], path[k]);
        let mut next = Vec::new();
        for (s, g, vals) in &states {
            let cur = s * &singles[*g][q];
            let mut options = vec![(s.clone(), *g)];
            for (h, p) in singles.iter().enumerate() {
                if p[q].is_zero() {
                    if cur.is_zero() {
                        options.push((Q::one(), h));
                    }
                } else {
                    options.push((&cur / &p[q], h));
                }
            }
            for (s2, h) in options {
                let mut v = vals.clone();
                v.push(&s2 * &singles[h][m]);
                next.push((s2, h, v));
            }
        }
        next.sort();
        next.dedup();
        states = next;
    }
    let mut out: Vec<Vec<Q>> = states.into_iter().map(|(_, _, v)| v).collect();
    out.sort();
    out.dedup();
    out
}

/// Pure elements e0, e1 and a strict ancestor at path position k with
/// e0 = 0 < e1 there and e0 > 0 at the end: switching e1 into
/// ε·e1 + (1 − ε)·e0 at that ancestor reaches e1(n) + (1/ε − 1)·e0(n).
pub fn blowup_witness(paths: &[Vec<Q>]) -> Option<(usize, usize, usize)> {
    let t = paths.first()?.len() - 1;
    for (i0, e0) in paths.iter().enumerate() {
        if !e0[t].is_positive() {
            continue;
        }
        for k in 0..t {
            if !e0[k].is_zero() {
                continue;
            }
            if let Some(i1) = paths.iter().position(|e1| e1[k].is_positive()) {
                return Some((i0, i1, k));
            }
        }
    }
    None
}

/// Nodes where exhaustive pure switching does not reproduce the bound.
pub fn tightness_failures(gens: &GeneratorSet, profile: &SupProfile) -> Vec<String> {
    let tree = &gens.tree;
    let mut out = Vec::new();
    for n in 0..tree.len() {
        let paths = pure_paths(gens, n);
        let best = paths.iter().map(|p| p.last().unwrap().clone()).max().unwrap();
        match profile.total(n) {
            ExtValue::Finite(b) => {
                if best != b {
                    out.push(format!("{}: bound {b}, pure max {best}", tree.id(n)));
                }
            }
            ExtValue::Infinite => {
                let Some((i0, i1, _)) = blowup_witness(&paths) else {
                    out.push(format!("{}: bound inf, no blow-up witness", tree.id(n)));
                    continue;
                };
                let eps = Q::new(1.into(), 1_000_000_000_000i64.into());
                let t = paths[i0].len() - 1;
                let reached = &paths[i1][t] + (Q::one() / &eps - Q::one()) * &paths[i0][t];
                if reached <= Q::from_integer(1_000_000.into()) {
                    out.push(format!("{}: witness only reaches {reached}", tree.id(n)));
                }
            }
        }
    }
    out
}

/// Solves a 3×3 system by Cramer's rule.
fn cramer(a: [[Q; 3]; 3], b: [Q; 3]) -> Option<[Q; 3]> {
    let det = |m: &[[Q; 3]; 3]| {
        &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1]) - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
            + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
    };
    let d = det(&a);
    if d.is_zero() {
        return None;
    }
    let mut x: [Q; 3] = Default::default();
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a.clone();
        for r in 0..3 {
            m[r][c] = b[r].clone();
        }
        *xc = det(&m) / &d;
    }
    Some(x)
}

/// Deflator LP of the one-period binomial market (bond 1, stock 1 → 2 or
/// 1/2 with probability 1/2 each) over (Y_u, Y_d, δ), solved by enumerating
/// every vertex of the feasible polytope. Returns (δ*, Y_u, Y_d).
pub fn binomial_vertex_oracle() -> (Q, Q, Q) {
    let r = |n: i64, d: i64| Q::new(n.into(), d.into());
    let z = Q::zero;
    // a·(Y_u, Y_d, δ) ≤ b
    let rows: Vec<([Q; 3], Q)> = vec![
        ([r(1, 2), r(1, 2), z()], r(1, 1)),  // bond: E[Y_1] ≤ Y_0
        ([r(1, 1), r(1, 4), z()], r(1, 1)),  // stock: E[S_1 Y_1] ≤ S_0 Y_0
        ([r(-1, 1), z(), r(1, 1)], z()),     // δ ≤ Y_u
        ([z(), r(-1, 1), r(1, 1)], z()),     // δ ≤ Y_d
        ([z(), z(), r(1, 1)], r(1, 1)),      // δ ≤ Y_0
        ([r(-1, 1), z(), z()], z()),
        ([z(), r(-1, 1), z()], z()),
        ([z(), z(), r(-1, 1)], z()),
    ];
    let feasible = |x: &[Q; 3]| rows.iter().all(|(a, b)| &a[0] * &x[0] + &a[1] * &x[1] + &a[2] * &x[2] <= *b);
    let mut best: Option<[Q; 3]> = None;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            for k in j + 1..rows.len() {
                let a = [rows[i].0.clone(), rows[j].0.clone(), rows[k].0.clone()];
                let b = [rows[i].1.clone(), rows[j].1.clone(), rows[k].1.clone()];
                if let Some(x) = cramer(a, b) {
                    if feasible(&x) && best.as_ref().is_none_or(|bx| x[2] > bx[2]) {
                        best = Some(x);
                    }
                }
            }
        }
    }
    let [yu, yd, delta] = best.expect("polytope has a vertex");
    (delta, yu, yd)
}
