//! Built-in instances with pinned verdicts.

use indexmap::IndexMap;

use crate::instance::{Instance, InstanceError, InstanceFile, NodeValues, RayFile};
use crate::rational::{parse_q, QText};
use crate::tree::NodeSpec;

/// Names accepted by [`gallery`]; `ex3-N` takes any N ≥ 1.
pub const NAMES: &[&str] = &["ex1", "xquestion", "ex3-N", "sec3", "binomial", "ladder", "revival", "chartime"];

/// Concrete names used by sweeps.
pub fn sweep_names() -> Vec<String> {
    let mut out: Vec<String> = NAMES.iter().filter(|n| **n != "ex3-N").map(|n| n.to_string()).collect();
    out.extend((1..=4).map(|n| format!("ex3-{n}")));
    out
}

fn qt(s: &str) -> QText {
    QText(parse_q(s).expect("gallery literal"))
}

fn node(id: &str, time: usize, parent: Option<&str>, prob: &str) -> NodeSpec {
    NodeSpec { id: id.into(), time, parent: parent.map(Into::into), prob: qt(prob).0 }
}

fn timeline(len: usize) -> Vec<NodeSpec> {
    (0..len)
        .map(|t| NodeSpec {
            id: format!("t{t}"),
            time: t,
            parent: t.checked_sub(1).map(|p| format!("t{p}")),
            prob: qt("1").0,
        })
        .collect()
}

fn values(nodes: &[NodeSpec], v: &[&str]) -> NodeValues {
    nodes.iter().zip(v).map(|(n, x)| (n.id.clone(), qt(x))).collect()
}

fn file(nodes: Vec<NodeSpec>) -> InstanceFile {
    let horizon = nodes.iter().map(|n| n.time).max().unwrap_or(0);
    InstanceFile { horizon, nodes, generators: IndexMap::new(), rays: IndexMap::new(), dominating: None, raw: IndexMap::new() }
}

fn with_single(mut f: InstanceFile, name: &str, v: &[&str]) -> InstanceFile {
    let vals = values(&f.nodes, v);
    f.generators.insert(name.into(), vals);
    f
}

fn with_ray(mut f: InstanceFile, name: &str, a: &[&str], b: &[&str]) -> InstanceFile {
    let r = RayFile { a: values(&f.nodes, a), b: values(&f.nodes, b) };
    f.rays.insert(name.into(), r);
    f
}

fn ex3(n: usize) -> InstanceFile {
    let nodes = timeline(n + 2);
    let hat: Vec<String> = (0..n + 2).map(|t| if t <= n { "1".into() } else { "0".into() }).collect();
    let tilde: Vec<String> = (0..n + 2).map(|t| if t <= n { (t + 1).to_string() } else { "0".into() }).collect();
    let hat: Vec<&str> = hat.iter().map(String::as_str).collect();
    let tilde: Vec<&str> = tilde.iter().map(String::as_str).collect();
    let mut f = with_single(with_single(file(nodes), "xhat", &hat), "xtilde", &tilde);
    f.dominating = Some("xhat".into());
    f
}

fn sec3() -> InstanceFile {
    let nodes = vec![
        node("r", 0, None, "1"),
        node("m1", 1, Some("r"), "1"),
        node("m2", 2, Some("m1"), "1"),
        node("a", 3, Some("m2"), "1/2"),
        node("b", 3, Some("m2"), "1/2"),
    ];
    let mut f = with_single(file(nodes), "cash", &["1", "1", "1", "1", "1"]);
    let row = |a: &[&str], b: &[&str]| -> IndexMap<String, Vec<QText>> {
        [("a".to_string(), a.iter().map(|s| qt(s)).collect()), ("b".to_string(), b.iter().map(|s| qt(s)).collect())]
            .into_iter()
            .collect()
    };
    f.raw.insert("Z".into(), row(&["5", "6", "9"], &["5", "2", "1"]));
    f.raw.insert("W".into(), row(&["5", "9", "6"], &["5", "1", "2"]));
    f
}

pub fn gallery_file(name: &str) -> Result<InstanceFile, InstanceError> {
    let f = match name {
        "ex1" => with_ray(file(timeline(3)), "growth", &["1", "1", "0"], &["0", "1", "0"]),
        "xquestion" => with_single(file(timeline(3)), "x", &["1", "0", "1"]),
        "sec3" => sec3(),
        "binomial" => {
            let nodes = vec![node("r", 0, None, "1"), node("u", 1, Some("r"), "1/2"), node("d", 1, Some("r"), "1/2")];
            with_single(with_single(file(nodes), "bond", &["1", "1", "1"]), "stock", &["1", "2", "1/2"])
        }
        "ladder" => with_single(with_single(file(timeline(4)), "early", &["1", "1", "0", "0"]), "late", &["1", "1", "1", "0"]),
        "revival" => with_ray(file(timeline(3)), "revive", &["1", "0", "1"], &["0", "0", "1"]),
        "chartime" => {
            let nodes = vec![
                node("root", 0, None, "1"),
                node("u", 1, Some("root"), "1/2"),
                node("uu", 2, Some("u"), "1"),
                node("d", 1, Some("root"), "1/2"),
                node("dd", 2, Some("d"), "1"),
            ];
            with_single(file(nodes), "g", &["1", "1", "0", "0", "0"])
        }
        other => match other.strip_prefix("ex3-").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if n >= 1 => ex3(n),
            _ => {
                return Err(InstanceError::UnknownGallery { name: name.into(), available: NAMES.join(", ") });
            }
        },
    };
    Ok(f)
}

pub fn gallery(name: &str) -> Result<Instance, InstanceError> {
    Instance::from_file(&gallery_file(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    #[test]
    fn every_name_builds() {
        for n in sweep_names() {
            let inst = gallery(&n).unwrap();
            assert_eq!(Instance::parse(&inst.to_json()).unwrap(), inst, "{n}");
        }
    }

    #[test]
    fn shapes() {
        let ex1 = gallery("ex1").unwrap();
        let r = ex1.gens.ray("growth").unwrap();
        assert_eq!(r.a.0, vec![qi(1), qi(1), qi(0)]);
        assert_eq!(r.b.0, vec![qi(0), qi(1), qi(0)]);
        let e = gallery("ex3-3").unwrap();
        assert_eq!(e.gens.single("xtilde").unwrap().0, vec![qi(1), qi(2), qi(3), qi(4), qi(0)]);
        assert_eq!(e.dominating_process().unwrap().0, vec![qi(1), qi(1), qi(1), qi(1), qi(0)]);
        assert_eq!(gallery("sec3").unwrap().raw.len(), 2);
    }

    #[test]
    fn unknown_name_lists_available() {
        let e = gallery("nope").unwrap_err().to_string();
        assert!(e.contains("binomial") && e.contains("ex3-N"), "{e}");
        assert!(gallery("ex3-0").is_err());
    }
}
