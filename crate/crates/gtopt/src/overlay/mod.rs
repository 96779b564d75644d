//! Peer-to-peer file-distribution overlay maintenance.
//!
//! A MAPE-K loop over a network model: the Monitor ingests scenario events
//! (clients joining and leaving) into the knowledge model, one pipeline
//! cycle per event batch plans and executes the repair (Analyze/Plan via the
//! shipped `.gspec`, Execute via the rule engine), and [`verify_topology`]
//! checks the depth-2 tree invariants afterwards.
//!
//! The overlay is a tree: the server feeds direct clients and relay clients,
//! relays (flag `rc`) forward to relayed clients over P2P links. Connections
//! and links are reified nodes carrying a bandwidth attribute `bw`; edges
//! `source`/`target` point at their endpoints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl;
use crate::model::{
    AttrDef, AttrKind, AttrValue, Change, EdgeTypeDef, Metamodel, Model, NodeTypeDef,
};
use crate::pipeline::{CycleReport, CycleStatus, Engine, PipelineError};

/// The shipped overlay specification source.
pub const SPEC_TEXT: &str = include_str!("p2p.gspec");

/// Node ids of the fixed scaffold elements.
pub const SERVER_ID: &str = "srv";
pub const NETWORK_ID: &str = "net";
pub const DATA_ID: &str = "data";
pub const TIME_ID: &str = "time";

#[derive(Debug, Error)]
pub enum OverlayError {
    #[error("scenario is invalid: {detail}")]
    BadScenario { detail: String },
    #[error("cycle at step {step} is infeasible; the scenario cannot be repaired")]
    InfeasibleCycle { step: u64, trace: Vec<TraceEntry> },
    #[error("missing attribute `{attr}` on `{id}`")]
    MissingAttribute { id: String, attr: String },
    #[error("topology has violations; distribution time is undefined")]
    PreconditionViolated,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
}

/// The fixed network metamodel.
pub fn metamodel() -> Metamodel {
    let real = |name: &str| AttrDef {
        name: name.into(),
        kind: AttrKind::Real,
    };
    let boolean = |name: &str| AttrDef {
        name: name.into(),
        kind: AttrKind::Bool,
    };
    Metamodel::new(
        vec![
            NodeTypeDef {
                name: "Network".into(),
                attrs: vec![],
            },
            NodeTypeDef {
                name: "LectureStudioServer".into(),
                attrs: vec![real("upload")],
            },
            NodeTypeDef {
                name: "Client".into(),
                attrs: vec![
                    boolean("rc"),
                    boolean("connected"),
                    real("upload"),
                    real("download"),
                ],
            },
            NodeTypeDef {
                name: "Connection".into(),
                attrs: vec![real("bw")],
            },
            NodeTypeDef {
                name: "P2PLink".into(),
                attrs: vec![real("bw")],
            },
            NodeTypeDef {
                name: "Data".into(),
                attrs: vec![real("size")],
            },
            NodeTypeDef {
                name: "Time".into(),
                attrs: vec![real("t")],
            },
        ],
        vec![
            EdgeTypeDef {
                name: "servers".into(),
                src: "Network".into(),
                tgt: "LectureStudioServer".into(),
            },
            EdgeTypeDef {
                name: "clients".into(),
                src: "LectureStudioServer".into(),
                tgt: "Client".into(),
            },
            EdgeTypeDef {
                name: "data".into(),
                src: "LectureStudioServer".into(),
                tgt: "Data".into(),
            },
            EdgeTypeDef {
                name: "time".into(),
                src: "Network".into(),
                tgt: "Time".into(),
            },
            EdgeTypeDef {
                name: "source".into(),
                src: "Connection".into(),
                tgt: "LectureStudioServer".into(),
            },
            EdgeTypeDef {
                name: "target".into(),
                src: "Connection".into(),
                tgt: "Client".into(),
            },
            EdgeTypeDef {
                name: "source".into(),
                src: "P2PLink".into(),
                tgt: "Client".into(),
            },
            EdgeTypeDef {
                name: "target".into(),
                src: "P2PLink".into(),
                tgt: "Client".into(),
            },
        ],
    )
    .expect("overlay metamodel is well-formed")
}

/// Parse and typecheck the shipped spec against the overlay metamodel.
pub fn compiled_spec() -> dsl::CompiledSpec {
    let spec = dsl::parse(SPEC_TEXT).expect("shipped spec parses");
    dsl::compile(&spec, &metamodel()).expect("shipped spec typechecks")
}

// ---- scenario ----------------------------------------------------------

fn default_server_upload() -> f64 {
    150.0
}

fn default_data_size() -> f64 {
    100.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServerConfig {
    #[serde(default = "default_server_upload")]
    pub upload: f64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            upload: default_server_upload(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default = "default_data_size")]
    pub size: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            size: default_data_size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventOp {
    Add,
    Remove,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub step: u64,
    pub op: EventOp,
    pub id: String,
    /// Upload bandwidth in Mbit/s; required for `add`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<f64>,
    /// Download bandwidth in Mbit/s; required for `add`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub down: Option<f64>,
}

/// A join/leave script plus the fixed server and data parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub server: ServerConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, OverlayError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| OverlayError::BadScenario {
                detail: e.to_string(),
            })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Ids unique among live clients; removals only of live clients; adds
    /// carry bandwidths; steps non-decreasing.
    pub fn validate(&self) -> Result<(), OverlayError> {
        let bad = |detail: String| Err(OverlayError::BadScenario { detail });
        let mut live: Vec<&str> = Vec::new();
        let mut last_step = 0u64;
        for ev in &self.events {
            if ev.step < last_step {
                return bad(format!(
                    "event steps must be non-decreasing (step {} after {})",
                    ev.step, last_step
                ));
            }
            last_step = ev.step;
            match ev.op {
                EventOp::Add => {
                    if live.contains(&ev.id.as_str()) {
                        return bad(format!("client `{}` added while already live", ev.id));
                    }
                    if ev.up.is_none() || ev.down.is_none() {
                        return bad(format!("add event for `{}` needs `up` and `down`", ev.id));
                    }
                    live.push(&ev.id);
                }
                EventOp::Remove => match live.iter().position(|id| *id == ev.id) {
                    Some(pos) => {
                        live.remove(pos);
                    }
                    None => return bad(format!("client `{}` removed but not live", ev.id)),
                },
            }
        }
        Ok(())
    }
}

/// Fresh knowledge model: network, server, data, and time scaffold.
pub fn initial_model(scenario: &Scenario) -> Model {
    let mut model = Model::empty(metamodel());
    let n = |id: &str, ty: &str, attrs: Vec<(&str, AttrValue)>| Change::CreateNode {
        id: id.into(),
        ty: ty.into(),
        attrs: attrs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    model.mutate(n(NETWORK_ID, "Network", vec![])).unwrap();
    model
        .mutate(n(
            SERVER_ID,
            "LectureStudioServer",
            vec![("upload", AttrValue::Real(scenario.server.upload))],
        ))
        .unwrap();
    model
        .mutate(n(
            DATA_ID,
            "Data",
            vec![("size", AttrValue::Real(scenario.data.size))],
        ))
        .unwrap();
    model
        .mutate(n(TIME_ID, "Time", vec![("t", AttrValue::Real(0.0))]))
        .unwrap();
    let e = |id: String, ty: &str, src: &str, tgt: &str| Change::CreateEdge {
        id,
        ty: ty.into(),
        src: src.into(),
        tgt: tgt.into(),
    };
    model
        .mutate(e(
            format!("servers:{NETWORK_ID}:{SERVER_ID}"),
            "servers",
            NETWORK_ID,
            SERVER_ID,
        ))
        .unwrap();
    model
        .mutate(e(
            format!("data:{SERVER_ID}:{DATA_ID}"),
            "data",
            SERVER_ID,
            DATA_ID,
        ))
        .unwrap();
    model
        .mutate(e(
            format!("time:{NETWORK_ID}:{TIME_ID}"),
            "time",
            NETWORK_ID,
            TIME_ID,
        ))
        .unwrap();
    model
}

/// Monitor: ingest one event into the model.
///
/// Removing a client deletes its connection and links. Children orphaned by
/// a removed relay are marked `connected := false` so the next cycle treats
/// them as new clients; a relay that loses its last child is demoted to a
/// plain direct client (its server connection stays).
pub fn apply_event(model: &mut Model, event: &ScenarioEvent) -> Result<(), OverlayError> {
    match event.op {
        EventOp::Add => {
            let (up, down) = (
                event.up.ok_or_else(|| OverlayError::BadScenario {
                    detail: format!("add `{}` without `up`", event.id),
                })?,
                event.down.ok_or_else(|| OverlayError::BadScenario {
                    detail: format!("add `{}` without `down`", event.id),
                })?,
            );
            model.mutate(Change::CreateNode {
                id: event.id.clone(),
                ty: "Client".into(),
                attrs: BTreeMap::from([
                    ("rc".to_string(), AttrValue::Bool(false)),
                    ("connected".to_string(), AttrValue::Bool(false)),
                    ("upload".to_string(), AttrValue::Real(up)),
                    ("download".to_string(), AttrValue::Real(down)),
                ]),
            })?;
            model.mutate(Change::CreateEdge {
                id: format!("clients:{SERVER_ID}:{}", event.id),
                ty: "clients".into(),
                src: SERVER_ID.into(),
                tgt: event.id.clone(),
            })?;
            Ok(())
        }
        EventOp::Remove => remove_client(model, &event.id),
    }
}

fn remove_client(model: &mut Model, id: &str) -> Result<(), OverlayError> {
    if model.node(id).is_none() {
        return Err(OverlayError::BadScenario {
            detail: format!("client `{id}` is not in the model"),
        });
    }

    // reified connection/link nodes attached to this client, plus the
    // containment edge
    let mut attachments: Vec<String> = Vec::new(); // Connection/P2PLink node ids
    let mut parents_to_check: Vec<String> = Vec::new(); // relays that may lose a child
    let mut orphans: Vec<String> = Vec::new();
    for edge in model.in_edges(id) {
        let holder = model.node(&edge.src).expect("edge endpoints exist");
        match (holder.ty.as_str(), edge.ty.as_str()) {
            ("Connection", "target") => attachments.push(holder.id.clone()),
            ("P2PLink", "target") => {
                attachments.push(holder.id.clone());
                if let Some(parent) = model.out_edges(&holder.id).find(|e| e.ty == "source") {
                    parents_to_check.push(parent.tgt.clone());
                }
            }
            ("P2PLink", "source") => {
                attachments.push(holder.id.clone());
                if let Some(child) = model.out_edges(&holder.id).find(|e| e.ty == "target") {
                    orphans.push(child.tgt.clone());
                }
            }
            _ => {}
        }
    }
    attachments.sort();
    attachments.dedup();

    for holder in &attachments {
        let edge_ids: Vec<String> = model.out_edges(holder).map(|e| e.id.clone()).collect();
        for eid in edge_ids {
            model.mutate(Change::DeleteEdge { id: eid })?;
        }
        model.mutate(Change::DeleteNode { id: holder.clone() })?;
    }

    orphans.sort();
    orphans.dedup();
    for orphan in &orphans {
        if model.node(orphan).is_some() {
            model.mutate(Change::SetAttr {
                id: orphan.clone(),
                attr: "connected".into(),
                value: AttrValue::Bool(false),
            })?;
        }
    }

    parents_to_check.sort();
    parents_to_check.dedup();
    for parent in &parents_to_check {
        if parent == id {
            continue;
        }
        let still_relaying = model.nodes_of_type("P2PLink").any(|l| {
            model
                .out_edges(l)
                .any(|e| e.ty == "source" && e.tgt == *parent)
        });
        let is_relay = model.attr(parent, "rc") == Some(&AttrValue::Bool(true));
        if is_relay && !still_relaying {
            model.mutate(Change::SetAttr {
                id: parent.clone(),
                attr: "rc".into(),
                value: AttrValue::Bool(false),
            })?;
        }
    }

    model.mutate(Change::DeleteEdge {
        id: format!("clients:{SERVER_ID}:{id}"),
    })?;
    model.mutate(Change::DeleteNode { id: id.into() })?;
    Ok(())
}

// ---- scenario execution -------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    /// Keep a model clone per step (for snapshot export).
    pub capture_snapshots: bool,
    /// Keep each cycle's LP-format problem and variable-map sidecar.
    pub capture_lp: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub step: u64,
    pub monitor_events: usize,
    pub report: CycleReport,
    pub violations: Vec<Violation>,
    /// Store-and-forward completion time, when the topology is clean.
    pub distribution_time: Option<f64>,
    #[serde(skip)]
    pub snapshot: Option<Model>,
    #[serde(skip)]
    pub lp: Option<String>,
    #[serde(skip)]
    pub varmap: Option<String>,
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub trace: Vec<TraceEntry>,
    pub model: Model,
}

/// Execute a scenario: per step, Monitor ingests the batch, one cycle plans
/// and executes, then the topology is verified and timed. An infeasible
/// cycle stops execution with the truncated trace attached.
pub fn run_scenario(scenario: &Scenario, config: &RunConfig) -> Result<ScenarioRun, OverlayError> {
    scenario.validate()?;
    let mut model = initial_model(scenario);
    let mut engine = Engine::new(compiled_spec(), &model)?;
    let mut trace: Vec<TraceEntry> = Vec::new();

    let mut events = scenario.events.iter().peekable();
    while let Some(first) = events.next() {
        let step = first.step;
        let mut batch = vec![first];
        while events.peek().is_some_and(|e| e.step == step) {
            batch.push(events.next().unwrap());
        }
        for ev in &batch {
            apply_event(&mut model, ev)?;
        }
        let (lp, varmap) = if config.capture_lp {
            let (problem, varmap) = engine.build_current(&model)?;
            let lp = crate::ilp::write_lp(&problem).map_err(PipelineError::from)?;
            (Some(lp), Some(varmap.to_json()))
        } else {
            (None, None)
        };
        let report = engine.run_cycle(&mut model)?;
        let infeasible = report.status == CycleStatus::Infeasible;
        let violations = verify_topology(&model);
        let time = if violations.is_empty() {
            Some(distribution_time(&mut model)?)
        } else {
            None
        };
        trace.push(TraceEntry {
            step,
            monitor_events: batch.len(),
            report,
            violations,
            distribution_time: time,
            snapshot: config.capture_snapshots.then(|| model.clone()),
            lp,
            varmap,
        });
        if infeasible {
            return Err(OverlayError::InfeasibleCycle { step, trace });
        }
    }
    Ok(ScenarioRun { trace, model })
}

// ---- verification -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    RoleCount,
    RelayNoChild,
    ParentNotRelay,
    CapacityServer,
    CapacityRelay,
    MultiParent,
    DepthExceeded,
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub elements: Vec<String>,
}

const CAP_TOL: f64 = 1e-6;

fn bw_of(model: &Model, id: &str) -> f64 {
    model.attr(id, "bw").and_then(|v| v.as_f64()).unwrap_or(0.0)
}

/// Check the depth-2 tree invariants. Empty result means the overlay is
/// sound: every connected client has exactly one parent, relays relay and
/// hold a server connection, capacities are respected, nobody sits deeper
/// than two hops, nobody is left behind.
pub fn verify_topology(model: &Model) -> Vec<Violation> {
    let mut out = Vec::new();
    let server_upload = model
        .nodes_of_type("LectureStudioServer")
        .next()
        .and_then(|s| model.attr(s, "upload"))
        .and_then(|v| v.as_f64())
        .unwrap_or(0.0);

    // parent structures per client
    let mut conn_parent: BTreeMap<&str, Vec<&str>> = BTreeMap::new(); // client -> Connection ids
    let mut link_parent: BTreeMap<&str, Vec<&str>> = BTreeMap::new(); // client -> P2PLink ids
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new(); // relay -> P2PLink ids
    let mut link_src: BTreeMap<&str, &str> = BTreeMap::new(); // P2PLink -> source client

    for conn in model.nodes_of_type("Connection") {
        for e in model.out_edges(conn) {
            if e.ty == "target" {
                conn_parent
                    .entry(&model.node(&e.tgt).unwrap().id)
                    .or_default()
                    .push(conn);
            }
        }
    }
    for link in model.nodes_of_type("P2PLink") {
        for e in model.out_edges(link) {
            match e.ty.as_str() {
                "target" => link_parent
                    .entry(&model.node(&e.tgt).unwrap().id)
                    .or_default()
                    .push(link),
                "source" => {
                    children
                        .entry(&model.node(&e.tgt).unwrap().id)
                        .or_default()
                        .push(link);
                    link_src.insert(link, &model.node(&e.tgt).unwrap().id);
                }
                _ => {}
            }
        }
    }

    let is_true = |id: &str, attr: &str| model.attr(id, attr) == Some(&AttrValue::Bool(true));

    for client in model.nodes_of_type("Client") {
        let conns = conn_parent.get(client).map_or(0, |v| v.len());
        let links = link_parent.get(client).map_or(0, |v| v.len());
        let parents = conns + links;
        let connected = is_true(client, "connected");
        if !connected {
            out.push(Violation {
                kind: if parents > 0 {
                    ViolationKind::RoleCount
                } else {
                    ViolationKind::Disconnected
                },
                elements: vec![client.to_string()],
            });
            continue;
        }
        if parents == 0 {
            out.push(Violation {
                kind: ViolationKind::RoleCount,
                elements: vec![client.to_string()],
            });
        }
        if parents > 1 {
            out.push(Violation {
                kind: ViolationKind::MultiParent,
                elements: vec![client.to_string()],
            });
        }
        if is_true(client, "rc") {
            if children.get(client).map_or(0, |v| v.len()) == 0 {
                out.push(Violation {
                    kind: ViolationKind::RelayNoChild,
                    elements: vec![client.to_string()],
                });
            }
            if conns == 0 {
                out.push(Violation {
                    kind: ViolationKind::RoleCount,
                    elements: vec![client.to_string()],
                });
            }
        }
    }

    for (link, src) in &link_src {
        if !is_true(src, "rc") {
            out.push(Violation {
                kind: ViolationKind::ParentNotRelay,
                elements: vec![link.to_string(), src.to_string()],
            });
        }
    }

    let server_used: f64 = model
        .nodes_of_type("Connection")
        .map(|c| bw_of(model, c))
        .sum();
    if server_used > server_upload + CAP_TOL {
        out.push(Violation {
            kind: ViolationKind::CapacityServer,
            elements: vec![SERVER_ID.to_string()],
        });
    }
    for (relay, links) in &children {
        let used: f64 = links.iter().map(|l| bw_of(model, l)).sum();
        let cap = model
            .attr(relay, "upload")
            .and_then(|v| v.as_f64())
            .unwrap_or(0.0);
        if used > cap + CAP_TOL {
            out.push(Violation {
                kind: ViolationKind::CapacityRelay,
                elements: vec![relay.to_string()],
            });
        }
    }

    // depth: direct children of the server are at 1, link targets one deeper
    let mut depth: BTreeMap<&str, u32> = BTreeMap::new();
    for client in conn_parent.keys() {
        depth.insert(client, 1);
    }
    let mut frontier: Vec<&str> = depth.keys().copied().collect();
    while let Some(parent) = frontier.pop() {
        let d = depth[parent];
        for link in children.get(parent).into_iter().flatten() {
            if let Some(e) = model.out_edges(link).find(|e| e.ty == "target") {
                let child = &model.node(&e.tgt).unwrap().id;
                if !depth.contains_key(child.as_str()) {
                    depth.insert(child, d + 1);
                    frontier.push(child);
                }
            }
        }
    }
    for (client, d) in &depth {
        if *d > 2 {
            out.push(Violation {
                kind: ViolationKind::DepthExceeded,
                elements: vec![client.to_string()],
            });
        }
    }

    out.sort_by(|a, b| {
        (format!("{:?}", a.kind), &a.elements).cmp(&(format!("{:?}", b.kind), &b.elements))
    });
    out
}

/// Per-candidate-pair bandwidth: the tighter of the parent's upload and the
/// child's download. This is both the capacity a new link would reserve and
/// the rate it would run at, so a selected link never exceeds its internet
/// path by construction.
pub fn candidate_bw(model: &Model, parent: &str, child: &str) -> Result<f64, OverlayError> {
    let get = |id: &str, attr: &str| {
        model
            .attr(id, attr)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| OverlayError::MissingAttribute {
                id: id.to_string(),
                attr: attr.to_string(),
            })
    };
    Ok(get(parent, "upload")?.min(get(child, "download")?))
}

/// Store-and-forward completion time for the current topology: direct
/// clients finish at size/bw, relayed clients after their relay finished
/// plus their own hop. Writes the result into the Time node and returns it.
///
/// Requires a violation-free topology.
pub fn distribution_time(model: &mut Model) -> Result<f64, OverlayError> {
    if !verify_topology(model).is_empty() {
        return Err(OverlayError::PreconditionViolated);
    }
    let size = model
        .nodes_of_type("Data")
        .next()
        .and_then(|d| model.attr(d, "size"))
        .and_then(|v| v.as_f64())
        .unwrap_or(0.0);

    let mut total: f64 = 0.0;
    for conn in model.nodes_of_type("Connection") {
        let Some(target) = model.out_edges(conn).find(|e| e.ty == "target") else {
            continue;
        };
        let client = target.tgt.clone();
        let first_hop = size / bw_of(model, conn);
        let mut t = first_hop;
        if model.attr(&client, "rc") == Some(&AttrValue::Bool(true)) {
            let mut worst_child: f64 = 0.0;
            for link in model.nodes_of_type("P2PLink") {
                let feeds = model
                    .out_edges(link)
                    .any(|e| e.ty == "source" && e.tgt == client);
                if feeds {
                    worst_child = worst_child.max(size / bw_of(model, link));
                }
            }
            t += worst_child;
        }
        total = total.max(t);
    }

    if model.node(TIME_ID).is_some() {
        model.mutate(Change::SetAttr {
            id: TIME_ID.into(),
            attr: "t".into(),
            value: AttrValue::Real(total),
        })?;
    }
    Ok(total)
}

// ---- DOT export ----------------------------------------------------------

/// Graphviz view of the overlay: the server as a square, relays as diamonds,
/// plain clients as circles. Edge thickness maps bandwidth affinely:
/// `penwidth = 0.5 + 4.5 * bw / max_bw` (1.0 when there are no links).
pub fn export_dot(model: &Model) -> String {
    use std::fmt::Write;
    let mut out = String::from("digraph overlay {\n  rankdir=TB;\n");
    for server in model.nodes_of_type("LectureStudioServer") {
        writeln!(out, "  \"{server}\" [shape=square];").unwrap();
    }
    for client in model.nodes_of_type("Client") {
        let shape = if model.attr(client, "rc") == Some(&AttrValue::Bool(true)) {
            "diamond"
        } else {
            "circle"
        };
        writeln!(out, "  \"{client}\" [shape={shape}];").unwrap();
    }

    let mut edges: Vec<(String, String, f64)> = Vec::new();
    for holder_ty in ["Connection", "P2PLink"] {
        for holder in model.nodes_of_type(holder_ty) {
            let mut src = None;
            let mut tgt = None;
            for e in model.out_edges(holder) {
                match e.ty.as_str() {
                    "source" => src = Some(e.tgt.clone()),
                    "target" => tgt = Some(e.tgt.clone()),
                    _ => {}
                }
            }
            if let (Some(src), Some(tgt)) = (src, tgt) {
                edges.push((src, tgt, bw_of(model, holder)));
            }
        }
    }
    let max_bw = edges.iter().map(|e| e.2).fold(0.0f64, f64::max);
    for (src, tgt, bw) in &edges {
        let penwidth = if max_bw > 0.0 {
            0.5 + 4.5 * bw / max_bw
        } else {
            1.0
        };
        writeln!(
            out,
            "  \"{src}\" -> \"{tgt}\" [penwidth={penwidth:.3}, label=\"{bw}\"];"
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
