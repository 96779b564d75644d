//! Randomized model-journal properties: replaying the journal reconstructs
//! the live model exactly, versions are strictly sequential, and a valid
//! model stays valid through arbitrary successful mutations.

mod support;

use std::collections::BTreeMap;

use gtopt::model::{
    replay_journal, AttrDef, AttrKind, AttrValue, Change, EdgeTypeDef, Metamodel, Model,
    NodeTypeDef,
};
use support::Lcg;

fn mm() -> Metamodel {
    Metamodel::new(
        vec![
            NodeTypeDef {
                name: "A".into(),
                attrs: vec![
                    AttrDef {
                        name: "x".into(),
                        kind: AttrKind::Real,
                    },
                    AttrDef {
                        name: "on".into(),
                        kind: AttrKind::Bool,
                    },
                ],
            },
            NodeTypeDef {
                name: "B".into(),
                attrs: vec![AttrDef {
                    name: "n".into(),
                    kind: AttrKind::Int,
                }],
            },
        ],
        vec![
            EdgeTypeDef {
                name: "ab".into(),
                src: "A".into(),
                tgt: "B".into(),
            },
            EdgeTypeDef {
                name: "aa".into(),
                src: "A".into(),
                tgt: "A".into(),
            },
        ],
    )
    .unwrap()
}

fn random_change(rng: &mut Lcg, model: &Model, counter: &mut u64) -> Change {
    let nodes: Vec<String> = model.nodes().map(|n| n.id.clone()).collect();
    let edges: Vec<String> = model.edges().map(|e| e.id.clone()).collect();
    let pick = |rng: &mut Lcg, items: &[String]| -> Option<String> {
        if items.is_empty() {
            None
        } else {
            Some(items[rng.range(0, items.len() as i64 - 1) as usize].clone())
        }
    };
    for _ in 0..8 {
        match rng.range(0, 9) {
            0..=2 => {
                *counter += 1;
                let ty = if rng.range(0, 1) == 0 { "A" } else { "B" };
                let attrs = if ty == "A" {
                    BTreeMap::from([
                        ("x".to_string(), AttrValue::Real(rng.range(0, 100) as f64)),
                        ("on".to_string(), AttrValue::Bool(rng.range(0, 1) == 1)),
                    ])
                } else {
                    BTreeMap::from([("n".to_string(), AttrValue::Int(rng.range(-5, 5)))])
                };
                return Change::CreateNode {
                    id: format!("n{counter}"),
                    ty: ty.into(),
                    attrs,
                };
            }
            3..=4 => {
                if let (Some(src), Some(tgt)) = (pick(rng, &nodes), pick(rng, &nodes)) {
                    *counter += 1;
                    let sty = &model.node(&src).unwrap().ty;
                    let tty = &model.node(&tgt).unwrap().ty;
                    let ty = match (sty.as_str(), tty.as_str()) {
                        ("A", "B") => "ab",
                        ("A", "A") => "aa",
                        _ => continue,
                    };
                    return Change::CreateEdge {
                        id: format!("e{counter}"),
                        ty: ty.into(),
                        src,
                        tgt,
                    };
                }
            }
            5 => {
                if let Some(id) = pick(rng, &edges) {
                    return Change::DeleteEdge { id };
                }
            }
            6 => {
                if let Some(id) = pick(rng, &nodes) {
                    return Change::DeleteNode { id };
                }
            }
            _ => {
                if let Some(id) = pick(rng, &nodes) {
                    let node = model.node(&id).unwrap();
                    return match node.ty.as_str() {
                        "A" => {
                            if rng.range(0, 1) == 0 {
                                Change::SetAttr {
                                    id,
                                    attr: "x".into(),
                                    value: AttrValue::Real(rng.range(0, 50) as f64),
                                }
                            } else {
                                Change::SetAttr {
                                    id,
                                    attr: "on".into(),
                                    value: AttrValue::Bool(rng.range(0, 1) == 1),
                                }
                            }
                        }
                        _ => Change::SetAttr {
                            id,
                            attr: "n".into(),
                            value: AttrValue::Int(rng.range(-9, 9)),
                        },
                    };
                }
            }
        }
    }
    *counter += 1;
    Change::CreateNode {
        id: format!("n{counter}"),
        ty: "B".into(),
        attrs: BTreeMap::from([("n".to_string(), AttrValue::Int(0))]),
    }
}

#[test]
fn journal_replay_reconstructs_after_1500_random_steps() {
    let mm = mm();
    let mut rng = Lcg::new(7);
    let mut model = Model::empty(mm.clone());
    let mut counter = 0u64;
    let mut successes = 0u64;
    let mut attempts = 0u64;
    while successes < 1500 {
        attempts += 1;
        assert!(attempts < 20_000, "mutation generator starved");
        let before_version = model.version();
        match model.mutate(random_change(&mut rng, &model, &mut counter)) {
            Ok(record) => {
                successes += 1;
                assert_eq!(
                    record.version,
                    before_version + 1,
                    "versions increase by exactly one"
                );
                assert_eq!(model.version(), before_version + 1);
                assert!(
                    model.validate().is_empty(),
                    "valid model stays valid after mutate"
                );
            }
            Err(_) => {
                assert_eq!(
                    model.version(),
                    before_version,
                    "failed mutate must not advance the version"
                );
            }
        }
    }
    let replayed = replay_journal(&mm, model.journal()).expect("journal replays");
    assert!(
        replayed.graph_eq(&model),
        "replayed model differs from live model"
    );
    println!("journal soundness: {successes} mutations replayed exactly (of {attempts} attempts)");
}
