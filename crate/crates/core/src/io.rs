//! JSON file formats for models, strategies and objectives.
//!
//! Model: `{"vertices": [{"id", "kind": "nondet"|"stoch", "label"?}],
//! "edges": [[from, to]], "prob": {v: {u: p}}, "memory": {v: k}}`.
//! Strategy: `{"v#m": {"u#m'": p}}` with 1-based memory states.
//! Objective: `{"type": "distance", "norm": "l1"|"l2", "target": {label: p}}`
//! or `{"type": "satisfy", "intervals": {label: [lo, hi]}}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Labeling, Mdp, MemoryAllocation, VertexKind};
use crate::objective::{Norm, Objective};
use crate::strategy::{AugmentedSpace, FrStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum KindDoc {
    #[serde(rename = "nondet")]
    Nondet,
    #[serde(rename = "stoch")]
    Stoch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexDoc {
    id: String,
    kind: KindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    vertices: Vec<VertexDoc>,
    edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    prob: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    memory: BTreeMap<String, usize>,
}

/// An MDP with its labeling and memory allocation, as stored in one file.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub mdp: Mdp,
    pub labeling: Labeling,
    pub alloc: MemoryAllocation,
}

fn lookup(mdp: &Mdp, id: &str, context: &str) -> Result<usize> {
    mdp.vertex_index(id).ok_or_else(|| Error::InvalidModel(format!("{context} references unknown vertex {id:?}")))
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    let mut b = Mdp::builder();
    let mut seen = std::collections::HashSet::new();
    for v in &doc.vertices {
        if !seen.insert(v.id.as_str()) {
            return Err(Error::InvalidModel(format!("duplicate vertex id {:?}", v.id)));
        }
        let kind = match v.kind {
            KindDoc::Nondet => VertexKind::Nondeterministic,
            KindDoc::Stoch => VertexKind::Stochastic,
        };
        b.add_vertex(v.id.clone(), kind);
    }
    // resolve names against a name-only MDP first
    let names_only = Mdp::graph(doc.vertices.iter().map(|v| v.id.clone()), &[])?;
    for (from, to) in &doc.edges {
        b.add_edge(lookup(&names_only, from, "edge")?, lookup(&names_only, to, "edge")?);
    }
    for (v, dist) in &doc.prob {
        let vi = lookup(&names_only, v, "prob")?;
        let entries =
            dist.iter().map(|(u, &p)| Ok((lookup(&names_only, u, "prob")?, p))).collect::<Result<Vec<_>>>()?;
        b.set_prob(vi, entries);
    }
    let mdp = b.build()?;

    let labels: Vec<&str> = doc.vertices.iter().map(|v| v.label.as_deref().unwrap_or(&v.id)).collect();
    let labeling = Labeling::from_names(&labels);

    let mut counts = vec![1; mdp.num_vertices()];
    for (v, &k) in &doc.memory {
        counts[lookup(&mdp, v, "memory")?] = k;
    }
    let alloc = MemoryAllocation::new(counts)?;
    Ok(Model { mdp, labeling, alloc })
}

pub fn model_to_json(model: &Model) -> Result<String> {
    let mdp = &model.mdp;
    let vertices = (0..mdp.num_vertices())
        .map(|v| {
            let id = mdp.name(v).to_string();
            let label = &model.labeling.names()[model.labeling.label(v)];
            VertexDoc {
                label: (label != &id).then(|| label.clone()),
                id,
                kind: if mdp.is_stochastic(v) { KindDoc::Stoch } else { KindDoc::Nondet },
            }
        })
        .collect();
    let edges = mdp.edges().map(|(a, b)| (mdp.name(a).to_string(), mdp.name(b).to_string())).collect();
    let mut prob = BTreeMap::new();
    for v in 0..mdp.num_vertices() {
        if let Some(dist) = mdp.distribution(v) {
            prob.insert(mdp.name(v).to_string(), dist.iter().map(|&(u, p)| (mdp.name(u).to_string(), p)).collect());
        }
    }
    let memory = (0..mdp.num_vertices())
        .filter(|&v| model.alloc.get(v) != 1)
        .map(|v| (mdp.name(v).to_string(), model.alloc.get(v)))
        .collect();
    Ok(serde_json::to_string_pretty(&ModelDoc { vertices, edges, prob, memory })?)
}

pub fn strategy_from_json(text: &str, space: &AugmentedSpace) -> Result<FrStrategy> {
    let doc: BTreeMap<String, BTreeMap<String, f64>> = serde_json::from_str(text)?;
    let find = |name: &str| {
        space.index_of_name(name).ok_or_else(|| Error::InvalidStrategy(format!("unknown augmented vertex {name:?}")))
    };
    let mut rows = vec![Vec::new(); space.len()];
    for (from, row) in &doc {
        let a = find(from)?;
        for (to, &p) in row {
            rows[a].push((find(to)?, p));
        }
    }
    Ok(FrStrategy::from_rows(rows))
}

pub fn strategy_to_json(sigma: &FrStrategy, space: &AugmentedSpace) -> Result<String> {
    let mut doc: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for a in 0..sigma.len() {
        doc.insert(space.name(a), sigma.row(a).iter().map(|&(t, p)| (space.name(t), p)).collect());
    }
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ObjectiveDoc {
    Distance { norm: Norm, target: BTreeMap<String, f64> },
    Satisfy { intervals: BTreeMap<String, (f64, f64)> },
}

/// Parses an objective over the labels of `labeling`. Labels missing from
/// the file get target 0 (distance) or the interval `[0, 1]` (satisfy).
pub fn objective_from_json(text: &str, labeling: &Labeling) -> Result<Objective> {
    let doc: ObjectiveDoc = serde_json::from_str(text)?;
    let index = |name: &str| {
        labeling.label_index(name).ok_or_else(|| Error::InvalidObjective(format!("unknown label {name:?}")))
    };
    match doc {
        ObjectiveDoc::Distance { norm, target } => {
            let mut nu = vec![0.0; labeling.num_labels()];
            for (name, p) in target {
                nu[index(&name)?] = p;
            }
            Objective::distance(nu, norm)
        }
        ObjectiveDoc::Satisfy { intervals } => {
            let mut iv = vec![(0.0, 1.0); labeling.num_labels()];
            for (name, range) in intervals {
                iv[index(&name)?] = range;
            }
            Objective::satisfy(iv)
        }
    }
}

pub fn objective_to_json(obj: &Objective, labeling: &Labeling) -> Result<String> {
    if obj.num_labels() != labeling.num_labels() {
        return Err(Error::DimensionMismatch { expected: labeling.num_labels(), got: obj.num_labels() });
    }
    let names = labeling.names();
    let doc = match obj {
        Objective::Distance { target, norm } => {
            ObjectiveDoc::Distance { norm: *norm, target: names.iter().cloned().zip(target.iter().copied()).collect() }
        }
        Objective::Satisfy { intervals } => {
            ObjectiveDoc::Satisfy { intervals: names.iter().cloned().zip(intervals.iter().copied()).collect() }
        }
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{gen_dn, strategy_rho_n};
    use crate::strategy::build_augmented_space;

    fn stochastic_model() -> Model {
        let text = r#"{
            "vertices": [
                {"id": "s", "kind": "stoch"},
                {"id": "a", "kind": "nondet", "label": "x"},
                {"id": "b", "kind": "nondet", "label": "x"}
            ],
            "edges": [["s", "a"], ["s", "b"], ["a", "s"], ["b", "s"], ["b", "b"]],
            "prob": {"s": {"a": 0.1, "b": 0.9}},
            "memory": {"b": 3}
        }"#;
        model_from_json(text).unwrap()
    }

    #[test]
    fn parses_model() {
        let m = stochastic_model();
        assert_eq!(m.mdp.num_vertices(), 3);
        assert!(m.mdp.is_stochastic(0));
        assert_eq!(m.mdp.prob(0, 2), 0.9);
        assert_eq!(m.labeling.num_labels(), 2);
        assert_eq!(m.labeling.label(1), m.labeling.label(2));
        assert_eq!(m.alloc.counts(), &[1, 1, 3]);
        assert!(crate::mdp::validate_mdp(&m.mdp).is_ok());
    }

    #[test]
    fn model_round_trip() {
        let m = stochastic_model();
        let again = model_from_json(&model_to_json(&m).unwrap()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_unknown_references() {
        let bad = r#"{"vertices": [{"id": "a", "kind": "nondet"}], "edges": [["a", "z"]]}"#;
        assert!(matches!(model_from_json(bad), Err(Error::InvalidModel(_))));
        let dup = r#"{"vertices": [{"id": "a", "kind": "nondet"}, {"id": "a", "kind": "nondet"}], "edges": []}"#;
        assert!(model_from_json(dup).is_err());
        let zero = r#"{"vertices": [{"id": "a", "kind": "nondet"}], "edges": [["a","a"]], "memory": {"a": 0}}"#;
        assert!(model_from_json(zero).is_err());
    }

    #[test]
    fn strategy_round_trip_is_exact() {
        let b = gen_dn(5).unwrap();
        let space = build_augmented_space(&b.mdp, &b.alloc).unwrap();
        let sigma = strategy_rho_n(5).unwrap();
        let text = strategy_to_json(&sigma, &space).unwrap();
        assert!(text.contains("\"v4#3\""));
        assert_eq!(strategy_from_json(&text, &space).unwrap(), sigma);
        assert!(strategy_from_json(r#"{"v9#1": {"v1#1": 1.0}}"#, &space).is_err());
    }

    #[test]
    fn objective_round_trip() {
        let m = stochastic_model();
        let obj = objective_from_json(r#"{"type":"distance","norm":"l2","target":{"s":0.25,"x":0.75}}"#, &m.labeling)
            .unwrap();
        assert_eq!(obj, Objective::Distance { target: vec![0.25, 0.75], norm: Norm::L2 });
        assert_eq!(objective_from_json(&objective_to_json(&obj, &m.labeling).unwrap(), &m.labeling).unwrap(), obj);

        let sat = objective_from_json(r#"{"type":"satisfy","intervals":{"x":[0.5,0.9]}}"#, &m.labeling).unwrap();
        assert_eq!(sat, Objective::Satisfy { intervals: vec![(0.0, 1.0), (0.5, 0.9)] });
        assert!(objective_from_json(r#"{"type":"distance","norm":"l2","target":{"q":1.0}}"#, &m.labeling).is_err());
        assert!(objective_from_json(r#"{"type":"distance","norm":"l3","target":{}}"#, &m.labeling).is_err());
    }
}
