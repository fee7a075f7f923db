//! Helpers shared by the integration tests and the acceptance runner:
//! fixtures, an in-process HTTP client, a random workload driver, and
//! brute-force oracles for the relationship graph.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use fdom_core::api::{self, ApiConfig, ApiError};
use fdom_core::clock::{ManualClock, Timestamp};
use fdom_core::metadata::{MetadataClass, MetadataRecord, Properties, RecordStatus};
use fdom_core::pid::Pid;
use fdom_core::registry::{
    CreateFdo, FdoRecord, HttpMethod, OperationDescriptor, Registry, RegistryError, RegistryState, UpdateFdo,
};
use fdom_core::relations::{ClosureEntry, Direction, Edge, EdgeLabel};
use http_body_util::BodyExt;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const PREFIX: &str = "test.fdom";

/// Every code an error body may carry.
pub const DOCUMENTED_CODES: &[&str] = &[
    "NOT_FOUND",
    "GONE",
    "VERSION_CONFLICT",
    "VALIDATION_FAILED",
    "INVALID_DO_REF",
    "INVALID_CHECKSUM",
    "CLASS_CHANGE_FORBIDDEN",
    "DUPLICATE_PID",
    "DUPLICATE_OP_ID",
    "INVALID_DESCRIPTOR",
    "INVALID_PAGE",
    "NOT_A_CREATIVE_WORK",
    "INVALID_QUERY",
    "INVALID_PREFIX",
    "MALFORMED_PID",
    "STORAGE_FULL",
    "STORAGE_ERROR",
    "MALFORMED_BODY",
    "PRECONDITION_REQUIRED",
    "INVALID_PRECONDITION",
    "UNKNOWN_CLASS",
    "METHOD_NOT_ALLOWED",
];

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(Timestamp::from_unix(1_700_000_000), 1))
}

pub fn mem_registry() -> Arc<Registry> {
    Arc::new(Registry::in_memory(PREFIX, clock()).unwrap())
}

pub fn props(v: Value) -> Properties {
    v.as_object().expect("properties must be an object").clone()
}

pub fn create(reg: &Registry, class: &str, properties: Value) -> (FdoRecord, MetadataRecord) {
    reg.create_fdo(CreateFdo {
        do_ref: "https://example.org/objects/1".into(),
        do_checksum: None,
        class: class.into(),
        properties: props(properties),
    })
    .unwrap_or_else(|e| panic!("create {class} failed: {e} {:?}", e.details()))
}

pub fn person(reg: &Registry, name: &str) -> (FdoRecord, MetadataRecord) {
    create(reg, "Person", json!({ "name": name }))
}

pub fn organization(reg: &Registry, name: &str) -> (FdoRecord, MetadataRecord) {
    create(reg, "Organization", json!({ "name": name }))
}

pub fn work(reg: &Registry, name: &str, creators: &[&Pid], citations: &[&Pid]) -> (FdoRecord, MetadataRecord) {
    create(
        reg,
        "CreativeWork",
        json!({
            "name": name,
            "additionalType": "Dataset",
            "creator": creators.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "citation": citations.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        }),
    )
}

/// Replaces a work's citation list.
pub fn set_citations(reg: &Registry, fdo: &Pid, citations: &[&Pid]) -> (FdoRecord, MetadataRecord) {
    let (record, meta) = reg.get_fdo_with_metadata(fdo).unwrap();
    let mut p = meta.properties.clone();
    p.insert(
        "citation".into(),
        json!(citations.iter().map(|p| p.to_string()).collect::<Vec<_>>()),
    );
    reg.update_fdo(
        fdo,
        record.version,
        UpdateFdo {
            properties: Some(p),
            ..UpdateFdo::default()
        },
    )
    .unwrap()
}

pub fn descriptor(op_id: &str, classes: &[MetadataClass]) -> OperationDescriptor {
    OperationDescriptor {
        op_id: op_id.into(),
        name: format!("Operation {op_id}"),
        http_method: HttpMethod::Get,
        path_template: format!("/fdos/{{pid}}/{op_id}"),
        applicable_classes: classes.iter().copied().collect(),
        description: String::new(),
    }
}

// ---------------------------------------------------------------- HTTP

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn error(&self) -> ApiError {
        serde_json::from_slice(&self.body).expect("error body is an ApiError")
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name).and_then(|v| v.to_str().ok())
    }

    /// Asserts the status and returns the JSON body.
    pub fn expect(&self, status: u16) -> Value {
        assert_eq!(
            self.status.as_u16(),
            status,
            "unexpected status; body: {}",
            String::from_utf8_lossy(&self.body)
        );
        self.json()
    }

    /// Asserts an error status and code; returns the error body.
    pub fn expect_err(&self, status: u16, code: &str) -> ApiError {
        assert_eq!(
            self.status.as_u16(),
            status,
            "unexpected status; body: {}",
            String::from_utf8_lossy(&self.body)
        );
        let err = self.error();
        assert_eq!(err.code, code, "{err:?}");
        err
    }
}

/// Drives the router in-process. Every GET is checked to leave the journal
/// length unchanged, and every response is checked for the JSON content
/// type and, for errors, a well-formed body.
pub struct Http {
    pub registry: Arc<Registry>,
    router: Router,
    pub gets: std::cell::Cell<usize>,
}

impl Http {
    pub fn new(registry: Arc<Registry>) -> Self {
        let router = api::router(registry.clone(), &ApiConfig::default());
        Self {
            registry,
            router,
            gets: std::cell::Cell::new(0),
        }
    }

    pub async fn send(&self, method: Method, uri: &str, headers: &[(&str, &str)], body: Option<String>) -> Reply {
        let mut req = Request::builder().method(method.clone()).uri(uri);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        if body.is_some() {
            req = req.header(header::CONTENT_TYPE, "application/json");
        }
        let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
        let before = self.registry.journal_len();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        if method == Method::GET {
            self.gets.set(self.gets.get() + 1);
            assert_eq!(
                self.registry.journal_len(),
                before,
                "GET {uri} changed the journal length"
            );
        }
        assert_eq!(
            headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()),
            Some(api::JSON_CONTENT_TYPE),
            "{method} {uri}: wrong content type"
        );
        let reply = Reply { status, headers, body };
        if !status.is_success() {
            let err = reply.error();
            assert_eq!(err.status, status.as_u16(), "{method} {uri}: status field disagrees");
            assert!(
                DOCUMENTED_CODES.contains(&err.code.as_str()),
                "{method} {uri}: undocumented code {}",
                err.code
            );
        }
        reply
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, &[], None).await
    }

    pub async fn post(&self, uri: &str, body: &Value) -> Reply {
        self.send(Method::POST, uri, &[], Some(body.to_string())).await
    }

    pub async fn post_raw(&self, uri: &str, body: &str) -> Reply {
        self.send(Method::POST, uri, &[], Some(body.to_owned())).await
    }

    pub async fn put(&self, uri: &str, if_match: Option<&str>, body: &Value) -> Reply {
        let headers: Vec<(&str, &str)> = if_match.map(|v| ("if-match", v)).into_iter().collect();
        self.send(Method::PUT, uri, &headers, Some(body.to_string())).await
    }

    pub async fn delete(&self, uri: &str) -> Reply {
        self.send(Method::DELETE, uri, &[], None).await
    }
}

// ------------------------------------------------------------ workload

/// Counts of what a workload did.
#[derive(Debug, Default, Clone, Copy)]
pub struct WorkloadStats {
    pub creates: usize,
    pub updates: usize,
    pub deletes: usize,
    pub ops_registered: usize,
    pub rejected: usize,
}

pub struct WorkloadConfig {
    pub ops: usize,
    /// Creates turn into updates once this many FDOs exist.
    pub max_records: usize,
}

fn active_by_class(state: &RegistryState) -> BTreeMap<MetadataClass, Vec<Pid>> {
    let mut out: BTreeMap<MetadataClass, Vec<Pid>> = BTreeMap::new();
    for m in state.metadata_records().filter(|m| m.status == RecordStatus::Active) {
        out.entry(m.class).or_default().push(m.pid.clone());
    }
    out
}

fn pick_agents(rng: &mut ChaCha8Rng, pools: &BTreeMap<MetadataClass, Vec<Pid>>, n: usize) -> Vec<String> {
    let agents: Vec<&Pid> = [MetadataClass::Person, MetadataClass::Organization]
        .iter()
        .flat_map(|c| pools.get(c).into_iter().flatten())
        .collect();
    (0..n)
        .filter_map(|_| agents.choose(rng).map(|p| p.to_string()))
        .collect()
}

/// Random valid properties for `class`, or None when the pools lack a
/// required target. `own` is the record's own metadata PID on update.
pub fn random_properties(
    rng: &mut ChaCha8Rng,
    class: MetadataClass,
    pools: &BTreeMap<MetadataClass, Vec<Pid>>,
    own: Option<&Pid>,
) -> Option<Properties> {
    let name = format!("n{}", rng.random_range(0..10_000));
    let mut p = props(json!({ "name": name }));
    match class {
        MetadataClass::Person => {
            if rng.random_bool(0.5) {
                p.insert("identifier".into(), json!(format!("https://orcid.org/0000-{}", rng.random_range(1000..9999))));
            }
            if let Some(org) = pools.get(&MetadataClass::Organization).and_then(|o| o.choose(rng)) {
                if rng.random_bool(0.6) {
                    p.insert("affiliation".into(), json!(org.to_string()));
                }
            }
        }
        MetadataClass::Organization => {
            if rng.random_bool(0.5) {
                p.insert("url".into(), json!("https://example.org"));
            }
        }
        MetadataClass::CreativeWork => {
            let n = rng.random_range(1..=3);
            let creators = pick_agents(rng, pools, n);
            if creators.is_empty() {
                return None;
            }
            let kind = ["Dataset", "SoftwareSourceCode", "ScholarlyArticle"].choose(rng).unwrap();
            p.insert("additionalType".into(), json!(kind));
            p.insert("creator".into(), json!(creators));
            let mut works: Vec<&Pid> = pools.get(&MetadataClass::CreativeWork).into_iter().flatten().collect();
            if let Some(own) = own {
                if !works.contains(&own) {
                    works.push(own);
                }
            }
            let k = rng.random_range(0..=3);
            let citations: Vec<String> = (0..k)
                .filter_map(|_| works.choose(rng).map(|p| p.to_string()))
                .collect();
            if !citations.is_empty() || rng.random_bool(0.3) {
                p.insert("citation".into(), json!(citations));
            }
            if rng.random_bool(0.3) {
                p.insert("description".into(), json!("generated"));
            }
        }
        MetadataClass::Service => {
            let provider = pick_agents(rng, pools, 1).pop()?;
            p.insert("provider".into(), json!(provider));
        }
    }
    Some(p)
}

fn random_class(rng: &mut ChaCha8Rng) -> MetadataClass {
    *[
        MetadataClass::Person,
        MetadataClass::Organization,
        MetadataClass::CreativeWork,
        MetadataClass::CreativeWork,
        MetadataClass::Service,
    ]
    .choose(rng)
    .unwrap()
}

fn expect_rejected(reg: &Registry, result: Result<impl std::fmt::Debug, RegistryError>, what: &str) {
    let before = reg.journal_len();
    assert!(result.is_err(), "{what} should have been rejected: {result:?}");
    assert_eq!(reg.journal_len(), before);
}

/// Runs a seeded random mix of creates, updates, deletes, operation
/// registrations, and deliberately invalid requests against `reg`.
pub fn run_workload(reg: &Registry, seed: u64, cfg: WorkloadConfig) -> WorkloadStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = WorkloadStats::default();
    for step in 0..cfg.ops {
        let (pools, fdos, tombstoned): (_, Vec<FdoRecord>, Vec<Pid>) = reg.read(|s| {
            (
                active_by_class(s),
                s.fdos().filter(|f| f.status == RecordStatus::Active).cloned().collect(),
                s.fdos().filter(|f| f.status != RecordStatus::Active).map(|f| f.pid.clone()).collect(),
            )
        });
        let total = reg.read(|s| s.fdos().count());
        let roll = rng.random_range(0..100);
        match roll {
            0..=39 if total < cfg.max_records || fdos.is_empty() => {
                let class = random_class(&mut rng);
                let class = if random_properties(&mut rng.clone(), class, &pools, None).is_some() {
                    class
                } else {
                    MetadataClass::Person
                };
                let properties = random_properties(&mut rng, class, &pools, None).unwrap();
                let checksum = rng.random_bool(0.3).then(|| format!("sha256:{:064x}", rng.random::<u128>()));
                reg.create_fdo(CreateFdo {
                    do_ref: format!("https://example.org/do/{step}"),
                    do_checksum: checksum,
                    class: class.as_str().into(),
                    properties,
                })
                .unwrap();
                stats.creates += 1;
            }
            0..=69 if !fdos.is_empty() => {
                let target = fdos.choose(&mut rng).unwrap();
                let mut req = UpdateFdo::default();
                if rng.random_bool(0.8) {
                    match random_properties(&mut rng, target.class, &pools, Some(&target.metadata_pid)) {
                        Some(p) => req.properties = Some(p),
                        None => req.do_ref = Some(format!("https://example.org/moved/{step}")),
                    }
                } else {
                    req.do_ref = Some(format!("https://example.org/moved/{step}"));
                }
                if rng.random_bool(0.2) {
                    req.class = Some(target.class.as_str().into());
                }
                reg.update_fdo(&target.pid, target.version, req).unwrap();
                stats.updates += 1;
            }
            70..=81 if !fdos.is_empty() => {
                let target = fdos.choose(&mut rng).unwrap();
                let reason = rng.random_bool(0.5).then(|| format!("retracted at step {step}"));
                reg.delete_fdo(&target.pid, reason).unwrap();
                stats.deletes += 1;
            }
            82..=86 => {
                let mut classes: Vec<MetadataClass> = MetadataClass::ALL
                    .into_iter()
                    .filter(|_| rng.random_bool(0.5))
                    .collect();
                if classes.is_empty() {
                    classes.push(MetadataClass::CreativeWork);
                }
                reg.register_operation(descriptor(&format!("op{step}.{seed}"), &classes)).unwrap();
                stats.ops_registered += 1;
            }
            _ => {
                match rng.random_range(0..4) {
                    0 if !fdos.is_empty() => {
                        let target = fdos.choose(&mut rng).unwrap();
                        expect_rejected(
                            reg,
                            reg.update_fdo(&target.pid, target.version + 1, UpdateFdo::default()),
                            "stale update",
                        );
                    }
                    1 if !tombstoned.is_empty() => {
                        let target = tombstoned.choose(&mut rng).unwrap();
                        expect_rejected(reg, reg.update_fdo(target, 1, UpdateFdo::default()), "update of deleted");
                        let before = reg.journal_len();
                        assert!(reg.delete_fdo(target, None).unwrap().already_deleted);
                        assert_eq!(reg.journal_len(), before);
                    }
                    2 => {
                        let ghost = Pid::new(PREFIX, "ghost").unwrap();
                        expect_rejected(
                            reg,
                            reg.create_fdo(CreateFdo {
                                do_ref: "https://example.org/x".into(),
                                do_checksum: None,
                                class: "CreativeWork".into(),
                                properties: props(json!({
                                    "name": "x", "additionalType": "Dataset", "creator": [ghost.to_string()]
                                })),
                            }),
                            "dangling create",
                        );
                    }
                    _ => {
                        expect_rejected(reg, reg.register_operation(descriptor("get", &[MetadataClass::Person])), "dup op");
                    }
                }
                stats.rejected += 1;
            }
        }
    }
    stats
}

// ------------------------------------------------------------- oracles

/// Every edge implied by every stored metadata record, recomputed from the
/// raw property maps by a linear scan.
pub fn oracle_edges(state: &RegistryState) -> Vec<Edge> {
    const TABLE: [(&str, EdgeLabel); 4] = [
        ("affiliation", EdgeLabel::Affiliation),
        ("citation", EdgeLabel::Citation),
        ("creator", EdgeLabel::Creator),
        ("provider", EdgeLabel::Provider),
    ];
    let mut out = Vec::new();
    for record in state.metadata_records() {
        for (prop, label) in TABLE {
            let targets: Vec<&str> = match record.properties.get(prop) {
                Some(Value::String(s)) => vec![s.as_str()],
                Some(Value::Array(items)) => items.iter().filter_map(Value::as_str).collect(),
                _ => vec![],
            };
            for (ordinal, t) in targets.into_iter().enumerate() {
                out.push(Edge {
                    from: record.pid.clone(),
                    to: Pid::parse(t).unwrap(),
                    label,
                    ordinal,
                });
            }
        }
    }
    out
}

pub fn oracle_edges_from(all: &[Edge], pid: &Pid, label: Option<EdgeLabel>) -> Vec<Edge> {
    let mut v: Vec<Edge> = all
        .iter()
        .filter(|e| &e.from == pid && label.is_none_or(|l| e.label == l))
        .cloned()
        .collect();
    v.sort_by_key(|e| (e.label, e.ordinal));
    v
}

pub fn oracle_edges_to(all: &[Edge], pid: &Pid, label: Option<EdgeLabel>) -> Vec<Edge> {
    let mut v: Vec<Edge> = all
        .iter()
        .filter(|e| &e.to == pid && label.is_none_or(|l| e.label == l))
        .cloned()
        .collect();
    v.sort_by(|a, b| (&a.from, a.label, a.ordinal).cmp(&(&b.from, b.label, b.ordinal)));
    v
}

/// Closure by exhaustive path-length layering: layer k holds every node at
/// the end of some citation walk of exactly k steps from `start`. A node's
/// depth is the first layer it appears in.
pub fn oracle_closure(all: &[Edge], start: &Pid, direction: Direction, max_depth: u32) -> Vec<ClosureEntry> {
    let step: Vec<(&Pid, &Pid)> = all
        .iter()
        .filter(|e| e.label == EdgeLabel::Citation)
        .map(|e| match direction {
            Direction::Outbound => (&e.from, &e.to),
            Direction::Inbound => (&e.to, &e.from),
        })
        .collect();
    let mut depth_of: BTreeMap<Pid, u32> = BTreeMap::new();
    let mut layer: BTreeSet<&Pid> = BTreeSet::from([start]);
    for k in 1..=max_depth {
        layer = step
            .iter()
            .filter(|(a, _)| layer.contains(a))
            .map(|(_, b)| *b)
            .collect();
        if layer.is_empty() {
            break;
        }
        for p in &layer {
            depth_of.entry((*p).clone()).or_insert(k);
        }
    }
    let mut out: Vec<ClosureEntry> = depth_of
        .into_iter()
        .map(|(pid, depth)| ClosureEntry { pid, depth })
        .collect();
    out.sort_by(|a, b| (a.depth, &a.pid).cmp(&(b.depth, &b.pid)));
    out
}

/// Checks the registry-wide invariants that must hold in any reachable state.
pub fn check_invariants(state: &RegistryState) -> Result<(), String> {
    let fdo_pids: BTreeSet<&Pid> = state.fdos().map(|f| &f.pid).collect();
    for f in state.fdos() {
        if f.pid == f.metadata_pid {
            return Err(format!("{} shares its metadata PID", f.pid));
        }
        let m = state
            .metadata(&f.metadata_pid)
            .ok_or_else(|| format!("{} has no metadata", f.pid))?;
        if m.class != f.class || m.status != f.status {
            return Err(format!("{} disagrees with its metadata", f.pid));
        }
    }
    for m in state.metadata_records() {
        if fdo_pids.contains(&m.pid) {
            return Err(format!("{} is in both registries", m.pid));
        }
        if m.status == RecordStatus::Active {
            let report = fdom_core::metadata::validate_class(m.class, &m.properties, state);
            if report
                .violations
                .iter()
                .any(|v| v.code != fdom_core::metadata::ViolationCode::TombstonedRef)
            {
                return Err(format!("{} no longer validates: {:?}", m.pid, report.violations));
            }
        }
    }
    let mut derived = oracle_edges(state);
    derived.sort();
    let mut indexed = state.edges().all_edges();
    indexed.sort();
    if derived != indexed {
        return Err("edge index differs from the metadata".into());
    }
    Ok(())
}
