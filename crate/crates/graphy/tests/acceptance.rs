//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Run with `cargo test -p graphy --test acceptance`. Each criterion has a
//! wall-clock limit; exceeding it counts as a failure.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use graphy_core::exploration::{
    Action, ActionOutcome, BucketKey, Filter, Histogram, Population, RefineSpec, Session, SortDirection,
};
use graphy_core::generation::{
    build_mindmap, collect_payload, interpret_intent, render_report, write_report, OfflineModel, ReportFormat,
    Vocabulary,
};
use graphy_core::graph::{
    export_jsonl, import_jsonl, FactNode, Graph, GraphSchema, GraphStore, LabelSchema, NodeId, NodeRole,
    PropertyMap, PropertySpec, PropertyValue, ValueType,
};
use graphy_core::ingest::RawDocument;
use graphy_core::inspection::{inspect_batch, materialize, parse_workflow, run_inspection, NodeStatus, Services};
use graphy_core::navigation::{canonical_id, ExpansionBudget, FixtureRepository, Navigator};
use graphy_core::par::Exec;
use graphy_core::providers::{ProviderConfig, ProviderRegistry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> String,
}

fn main() -> ExitCode {
    std::env::set_var("GRAPHY_OFFLINE", "1");
    let criteria = [
        Criterion { name: "workflow parity", limit: Duration::from_secs(5), run: workflow_parity },
        Criterion { name: "DAG engine properties", limit: Duration::from_secs(10), run: dag_properties },
        Criterion { name: "expansion correctness", limit: Duration::from_secs(5), run: expansion },
        Criterion { name: "exploration oracles", limit: Duration::from_secs(30), run: exploration_oracles },
        Criterion { name: "cypher rendering", limit: Duration::from_secs(5), run: cypher_goldens },
        Criterion { name: "generation structure", limit: Duration::from_secs(5), run: generation_structure },
        Criterion { name: "end-to-end demo", limit: Duration::from_secs(20), run: end_to_end },
        Criterion { name: "export round trip", limit: Duration::from_secs(5), run: round_trip },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(detail) if elapsed <= c.limit => (true, detail),
            Ok(detail) => (false, format!("{detail}; over the time limit")),
            Err(panic) => (false, panic_message(panic)),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:<24} {:>7.2}s / {:>3}s  {}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
        .replace('\n', " ")
}

fn fixtures() -> std::path::PathBuf {
    common::fixtures()
}

fn services() -> Services {
    let text = std::fs::read_to_string(fixtures().join("providers.json")).unwrap();
    Services::new(ProviderConfig::from_json(&text).unwrap().build(&fixtures(), true).unwrap())
}

fn workflow(name: &str) -> graphy_core::inspection::WorkflowSpec {
    parse_workflow(&std::fs::read_to_string(fixtures().join("workflows").join(name)).unwrap()).unwrap()
}

fn jsonl_bytes(graph: &Graph) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let files = export_jsonl(graph, dir.path()).unwrap();
    std::fs::read(&files[0]).unwrap()
}

fn workflow_parity() -> String {
    let spec = workflow("paper_listing.json");
    assert_eq!(spec.topological_order(), ["Abstract", "Challenges", "Solutions"]);
    let docs: Vec<RawDocument> = (1..=5)
        .map(|i| RawDocument::from_path(&fixtures().join(format!("corpus/c{i}.txt"))).unwrap())
        .collect();
    let services = services();
    let mut store = GraphStore::in_memory(spec.graph_schema().unwrap());
    for out in inspect_batch(&docs, &spec, &services, Exec::default()) {
        materialize(&mut store, &spec, &out.unwrap()).unwrap();
    }
    let g = store.graph();
    let papers = g.ids_with_label("Paper");
    assert_eq!(papers.len(), 5);
    assert!(papers.iter().all(|p| g.node(*p).unwrap().property("abstract").is_some()));
    let golden = std::fs::read(fixtures().join("golden/workflow_parity.jsonl")).unwrap();
    assert!(jsonl_bytes(g) == golden, "JSONL differs from golden");
    format!(
        "5 facts, {} Challenge + {} Solution dimensions, golden JSONL identical",
        g.count_with_label("Challenge"),
        g.count_with_label("Solution")
    )
}

fn has_cycle(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    // Kahn's algorithm: a cycle exists iff some node is never freed.
    let mut indeg = vec![0usize; n];
    for &(_, t) in edges {
        indeg[t] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &(s, t) in edges {
            if s == v {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.push(t);
                }
            }
        }
    }
    seen < n
}

fn rule_dag(n: usize, edges: &BTreeSet<(usize, usize)>, failing: &[bool]) -> String {
    let nodes: Vec<Value> = (0..n)
        .map(|i| {
            let word = if failing[i] { "absent" } else { "present" };
            json!({"name": format!("N{i}"), "extract_from": {"pattern": format!("(?P<f{i}>{word})")},
                   "output_schema": {"single_typed": {"fields": {format!("f{i}"): "text"}}}})
        })
        .collect();
    let edges: Vec<Value> = edges
        .iter()
        .map(|(s, t)| json!({"source": format!("N{s}"), "target": format!("N{t}")}))
        .collect();
    json!({"dag": {"nodes": nodes, "edges": edges}}).to_string()
}

/// Section-rule nodes; cheaper to parse than pattern rules.
fn section_dag(n: usize, edges: &BTreeSet<(usize, usize)>) -> String {
    let nodes: Vec<Value> = (0..n)
        .map(|i| {
            json!({"name": format!("N{i}"), "extract_from": {"section": format!("S{i}")},
                   "output_schema": {"single_typed": {"fields": {format!("f{i}"): "text"}}}})
        })
        .collect();
    let edges: Vec<Value> = edges
        .iter()
        .map(|(s, t)| json!({"source": format!("N{s}"), "target": format!("N{t}")}))
        .collect();
    json!({"dag": {"nodes": nodes, "edges": edges}}).to_string()
}

fn dag_properties() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDA6);
    let (mut cyclic, mut violations, mut accepted_cycles) = (0, 0, 0);
    for _ in 0..500 {
        let n = rng.random_range(1..=20);
        let m = rng.random_range(0..=n);
        let edges: BTreeSet<(usize, usize)> = (0..m).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
        match parse_workflow(&section_dag(n, &edges)) {
            Ok(spec) => {
                if has_cycle(n, &edges) {
                    accepted_cycles += 1;
                    continue;
                }
                let pos: BTreeMap<usize, usize> = spec.order().iter().enumerate().map(|(p, &i)| (i, p)).collect();
                if pos.len() != n || edges.iter().any(|(s, t)| pos[s] >= pos[t]) {
                    violations += 1;
                }
            }
            Err(_) => {
                assert!(has_cycle(n, &edges), "acyclic workflow rejected: n={n} edges={edges:?}");
                cyclic += 1;
            }
        }
    }
    assert_eq!((violations, accepted_cycles), (0, 0));

    let providers = Services::new(ProviderRegistry::new());
    let doc = RawDocument::new("D", graphy_core::ingest::DocKind::Plaintext, "present");
    let mut skipped_total = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let edges: BTreeSet<(usize, usize)> = (0..rng.random_range(0..=2 * n))
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .filter(|(a, b)| a < b)
            .collect();
        let failing: Vec<bool> = (0..n).map(|_| rng.random_bool(0.25)).collect();
        let spec = parse_workflow(&rule_dag(n, &edges, &failing)).unwrap();
        let out = run_inspection(&doc, &spec, &providers).unwrap();
        let mut blocked = vec![false; n];
        for v in 0..n {
            blocked[v] = edges.iter().any(|&(s, t)| t == v && (blocked[s] || failing[s]));
        }
        for v in 0..n {
            let expected = if blocked[v] { "skipped" } else if failing[v] { "failed" } else { "ok" };
            let got = match &out.status[&format!("N{v}")] {
                NodeStatus::Ok => "ok",
                NodeStatus::Failed { .. } => "failed",
                NodeStatus::Skipped { .. } => "skipped",
            };
            assert_eq!(got, expected, "node N{v} of {n}, edges {edges:?}, failing {failing:?}");
            skipped_total += usize::from(blocked[v]);
        }
    }
    format!("500 DAGs ({cyclic} cyclic, all rejected), 0 order violations; 200 failure trials ({skipped_total} skips) monotone")
}

fn neighbor_repo_ids() -> Vec<String> {
    (2..=11).map(|i| format!("r{i:02}")).collect()
}

fn repo_title(id: &str) -> String {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join(format!("repo/{id}.json"))).unwrap()).unwrap();
    v["title"].as_str().unwrap().to_string()
}

fn expanded_fixture_graph() -> (GraphStore, NodeId, graphy_core::navigation::GraphDelta) {
    let spec = workflow("paper.json");
    let services = services();
    let repo = FixtureRepository::from_manifest(&fixtures().join("repo/manifest.json")).unwrap();
    let mut store = GraphStore::in_memory(spec.graph_schema().unwrap());
    use graphy_core::navigation::Repository;
    let doc = repo.fetch("r01").unwrap();
    let out = run_inspection(&doc, &spec, &services).unwrap();
    let seed = materialize(&mut store, &spec, &out).unwrap().fact;
    let delta = Navigator::new(&spec, &repo, &services)
        .expand(&mut store, &[seed], ExpansionBudget { max_depth: 1, max_new_facts: 10, ..Default::default() })
        .unwrap();
    (store, seed, delta)
}

fn expansion() -> String {
    let expected: BTreeSet<NodeId> = neighbor_repo_ids().iter().map(|id| canonical_id(&repo_title(id)).unwrap()).collect();
    let mut reference = None;
    for run in 0..3 {
        let (store, seed, delta) = expanded_fixture_graph();
        let got: BTreeSet<NodeId> = delta.new_facts.iter().copied().collect();
        assert_eq!(got, expected, "run {run}");
        assert_eq!(delta.new_facts.len(), got.len(), "duplicate fact ids");
        let links: BTreeSet<(NodeId, NodeId)> = delta.new_links.iter().copied().collect();
        assert_eq!(links, expected.iter().map(|t| (seed, *t)).collect());
        assert_eq!(
            (delta.stats.references_considered, delta.stats.references_dropped, delta.stats.budget_skipped),
            (12, 1, 1)
        );
        let ids: Vec<NodeId> = store.graph().nodes().map(|n| n.id()).collect();
        assert_eq!(ids.len(), ids.iter().collect::<BTreeSet<_>>().len(), "duplicate node ids");
        let unknown = canonical_id("A Completely Unknown Paper About Nothing In Particular").unwrap();
        assert!(!store.graph().contains(unknown));
        assert!(store.graph().edges().all(|e| e.target != unknown && e.source != unknown));
        match &reference {
            None => reference = Some(jsonl_bytes(store.graph())),
            Some(bytes) => assert!(*bytes == jsonl_bytes(store.graph()), "run {run} differs"),
        }
    }
    "10 new facts, 10 links, 1 dropped, 1 over budget; 3 identical runs".into()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> (Graph, Vec<NodeId>) {
    let schema = GraphSchema::new().with_label(
        "Paper",
        LabelSchema::new(NodeRole::Fact)
            .with("title", PropertySpec::optional(ValueType::Text))
            .with("year", PropertySpec::optional(ValueType::Integer))
            .with("citation_count", PropertySpec::optional(ValueType::Integer))
            .with("score", PropertySpec::optional(ValueType::Real)),
    );
    let mut g = Graph::new(schema);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let mut props = PropertyMap::new();
        props.insert("title".into(), PropertyValue::from(format!("Paper {i}").as_str()));
        if rng.random_bool(0.9) {
            props.insert("year".into(), PropertyValue::Integer(rng.random_range(2015..=2025)));
        }
        if rng.random_bool(0.85) {
            props.insert("citation_count".into(), PropertyValue::Integer(rng.random_range(0..50)));
        }
        if rng.random_bool(0.8) {
            props.insert("score".into(), PropertyValue::Real(rng.random_range(-5.0..5.0)));
        }
        let id = NodeId::from_key(format!("paper-{i}").as_bytes());
        g.upsert_fact(FactNode::new(id, "Paper", props)).unwrap();
        ids.push(id);
    }
    for &s in &ids {
        for _ in 0..rng.random_range(0..=5) {
            let t = ids[rng.random_range(0..n)];
            if t != s {
                g.link_facts(s, t).unwrap();
            }
        }
    }
    (g, ids)
}

fn key_matches(key: &BucketKey, v: Option<&PropertyValue>) -> bool {
    match (key, v) {
        (BucketKey::Missing, None) => true,
        (BucketKey::Value(k), Some(v)) => k == v,
        (BucketKey::Range { lo, hi, closed }, Some(PropertyValue::Real(r))) => *lo <= *r && (*r < *hi || (*closed && *r <= *hi)),
        _ => false,
    }
}

/// Checks a histogram against a brute-force count of every bucket.
fn check_histogram(g: &Graph, population: &[NodeId], h: &Histogram) {
    let value = |id: &NodeId| g.node(*id).unwrap().property(&h.attribute);
    assert_eq!(h.total, population.len());
    assert_eq!(h.buckets.iter().map(|b| b.count).sum::<usize>(), population.len());
    assert!(h.buckets.windows(2).all(|w| w[0].key < w[1].key), "buckets unsorted");
    for b in &h.buckets {
        let brute = population.iter().filter(|id| key_matches(&b.key, value(id))).count();
        assert_eq!(b.count, brute, "bucket {} of {}", b.label, h.attribute);
    }
    let distinct: BTreeSet<String> = population
        .iter()
        .filter_map(value)
        .filter(|v| !matches!(v, PropertyValue::Real(_)))
        .map(|v| v.display_text())
        .collect();
    let keyed = h.buckets.iter().filter(|b| matches!(b.key, BucketKey::Value(_))).count();
    assert_eq!(keyed, distinct.len());
}

/// Brute-force top-k: present values before missing ones, ties by id.
fn brute_top_k(g: &Graph, pool: &BTreeSet<NodeId>, attr: &str, desc: bool, k: usize) -> Vec<NodeId> {
    let mut rows: Vec<(Option<i64>, NodeId)> = pool
        .iter()
        .map(|id| (g.node(*id).unwrap().property(attr).and_then(|v| v.as_integer()), *id))
        .collect();
    rows.sort_by(|a, b| match (a.0, b.0) {
        (Some(x), Some(y)) => (if desc { y.cmp(&x) } else { x.cmp(&y) }).then(a.1.cmp(&b.1)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.1.cmp(&b.1),
    });
    rows.into_iter().take(k).map(|r| r.1).collect()
}

fn apply(s: &mut Session, g: &Graph, a: Action) -> ActionOutcome {
    s.apply(g, a, Exec::default()).unwrap()
}

fn nodes_of(o: ActionOutcome) -> Vec<NodeId> {
    match o {
        ActionOutcome::Nodes { ids } => ids,
        other => panic!("expected nodes, got {other:?}"),
    }
}

fn exploration_oracles() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE7);
    let mut checked_buckets = 0;
    for round in 0..200 {
        let n = rng.random_range(1..=500);
        let (g, ids) = random_graph(&mut rng, n);
        let mut s = Session::new(format!("oracle-{round}"));
        let all = Population::Query { label: "Paper".into(), filters: vec![] };

        for attr in ["year", "score", "citation_count"] {
            let ActionOutcome::Histogram { histogram } =
                apply(&mut s, &g, Action::Histogram { population: all.clone(), attribute: attr.into() })
            else {
                panic!("histogram expected")
            };
            check_histogram(&g, &ids, &histogram);
            for b in histogram.buckets.iter().take(4) {
                let got: BTreeSet<NodeId> =
                    nodes_of(apply(&mut s, &g, Action::BucketFilter { attribute: attr.into(), bucket: b.key.clone() }))
                        .into_iter()
                        .collect();
                let brute: BTreeSet<NodeId> =
                    ids.iter().copied().filter(|id| key_matches(&b.key, g.node(*id).unwrap().property(attr))).collect();
                assert_eq!(got, brute, "bucket {} of {attr}", b.label);
                checked_buckets += 1;
            }
        }

        // neighbors of a random present selection
        let staged = nodes_of(apply(&mut s, &g, Action::Search { label: "Paper".into(), filters: vec![], limit: n }));
        let anchors: BTreeSet<NodeId> = (0..rng.random_range(1..=3)).map(|_| staged[rng.random_range(0..n)]).collect();
        let anchors: Vec<NodeId> = anchors.into_iter().collect();
        apply(&mut s, &g, Action::Promote { chosen: anchors.clone() });
        let ActionOutcome::View { view } = apply(&mut s, &g, Action::Prequery { selected: anchors.clone() }) else {
            panic!("view expected")
        };
        let on_canvas: BTreeSet<NodeId> = s.past.union(&s.present).copied().collect();
        let brute: BTreeSet<NodeId> = g
            .edges()
            .filter(|e| anchors.contains(&e.source) && !on_canvas.contains(&e.target))
            .map(|e| e.target)
            .collect();
        assert_eq!(view.population.iter().copied().collect::<BTreeSet<_>>(), brute);
        assert_eq!(view.total, brute.len());
        check_histogram(&g, &view.population, &view.histogram);

        let k = rng.random_range(1..=10);
        let desc = rng.random_bool(0.5);
        let spec = RefineSpec::Table {
            sort: "citation_count".into(),
            direction: if desc { SortDirection::Desc } else { SortDirection::Asc },
            top_k: k,
        };
        let top = nodes_of(apply(&mut s, &g, Action::Refine { spec }));
        assert_eq!(top, brute_top_k(&g, &brute, "citation_count", desc, k));

        if !view.histogram.buckets.is_empty() {
            let picked: Vec<BucketKey> =
                view.histogram.buckets.iter().filter(|_| rng.random_bool(0.5)).map(|b| b.key.clone()).collect();
            if !picked.is_empty() {
                let attr = view.histogram.attribute.clone();
                let got: BTreeSet<NodeId> = nodes_of(apply(
                    &mut s,
                    &g,
                    Action::Refine { spec: RefineSpec::HistogramSelect { attribute: None, buckets: picked.clone() } },
                ))
                .into_iter()
                .collect();
                let want: BTreeSet<NodeId> = brute
                    .iter()
                    .copied()
                    .filter(|id| picked.iter().any(|k| key_matches(k, g.node(*id).unwrap().property(&attr))))
                    .collect();
                assert_eq!(got, want);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let mut applied = 0;
    for seq in 0..1000 {
        let n = rng.random_range(2..=60);
        let (g, ids) = random_graph(&mut rng, n);
        let mut s = Session::new(format!("fuzz-{seq}"));
        for _ in 0..rng.random_range(1..=25) {
            let action = random_action(&mut rng, &s, &ids);
            let before = s.clone();
            match s.apply(&g, action, Exec::default()) {
                Ok(_) => applied += 1,
                Err(_) => assert_eq!(s, before, "failed action changed the session"),
            }
            assert!(s.past.is_disjoint(&s.present), "past/present overlap");
            assert!(s.past.is_disjoint(&s.future), "past/future overlap");
            assert!(s.present.is_disjoint(&s.future), "present/future overlap");
        }
        let replayed = Session::replay(&g, s.id.clone(), &s.actions(), Exec::default()).unwrap();
        assert_eq!(replayed.canvases(), s.canvases(), "replay diverged in sequence {seq}");
        assert_eq!(replayed.staged, s.staged);
        assert_eq!(replayed.view, s.view);
    }
    format!("200 graphs ({checked_buckets} bucket filters) match brute force; 1000 fuzz sequences ({applied} actions) disjoint and replayable")
}

fn pick<T: Clone>(rng: &mut ChaCha8Rng, from: &[T], max: usize) -> Vec<T> {
    if from.is_empty() {
        return Vec::new();
    }
    (0..rng.random_range(0..=max)).map(|_| from[rng.random_range(0..from.len())].clone()).collect()
}

/// Mostly plausible actions, with some that should be rejected.
fn random_action(rng: &mut ChaCha8Rng, s: &Session, ids: &[NodeId]) -> Action {
    let present: Vec<NodeId> = s.present.iter().copied().collect();
    let future: Vec<NodeId> = s.future.iter().copied().collect();
    let attrs = ["year", "citation_count", "score", "title"];
    match rng.random_range(0..7) {
        0 => Action::Search {
            label: "Paper".into(),
            filters: if rng.random_bool(0.5) {
                vec![Filter::Has { attribute: attrs[rng.random_range(0..3)].into() }]
            } else {
                vec![]
            },
            limit: rng.random_range(1..=20),
        },
        1 => Action::Histogram {
            population: [Population::Staged, Population::View, Population::Past, Population::Present]
                [rng.random_range(0..4)]
            .clone(),
            attribute: attrs[rng.random_range(0..3)].into(),
        },
        2 => Action::BucketFilter {
            attribute: attrs[rng.random_range(0..2)].into(),
            bucket: BucketKey::Value(PropertyValue::Integer(rng.random_range(2015..=2025))),
        },
        3 => Action::Prequery { selected: pick(rng, &present, 3) },
        4 => Action::Refine {
            spec: RefineSpec::Table {
                sort: attrs[rng.random_range(0..3)].into(),
                direction: SortDirection::Desc,
                top_k: rng.random_range(0..=5),
            },
        },
        _ => {
            let mut chosen = pick(rng, &future, 3);
            chosen.extend(pick(rng, &s.staged, 3));
            if rng.random_bool(0.1) {
                chosen.extend(pick(rng, ids, 1));
            }
            Action::Promote { chosen }
        }
    }
}

fn cypher_goldens() -> String {
    let (store, seed, _) = expanded_fixture_graph();
    let g = store.graph();
    let mut s = Session::new("golden");
    let has_year = vec![Filter::Has { attribute: "year".into() }];
    apply(&mut s, g, Action::Search { label: "Paper".into(), filters: has_year.clone(), limit: 50 });
    apply(
        &mut s,
        g,
        Action::Histogram { population: Population::Query { label: "Paper".into(), filters: has_year }, attribute: "year".into() },
    );
    apply(
        &mut s,
        g,
        Action::BucketFilter { attribute: "year".into(), bucket: BucketKey::Value(PropertyValue::Integer(2023)) },
    );
    apply(
        &mut s,
        g,
        Action::Search {
            label: "Paper".into(),
            filters: vec![Filter::Contains { attribute: "title".into(), value: "Herd".into() }],
            limit: 50,
        },
    );
    apply(&mut s, g, Action::Promote { chosen: vec![seed] });
    apply(&mut s, g, Action::Prequery { selected: vec![seed] });
    let files = [("e1", 0), ("e2", 1), ("e3", 2), ("prequery", 5)];
    for (name, seq) in files {
        let golden = std::fs::read_to_string(fixtures().join(format!("golden/{name}.cypher"))).unwrap();
        assert_eq!(format!("{}\n", s.history[seq].cypher), golden, "{name}.cypher");
    }
    "e1, e2, e3 and prequery renderings match their golden files".into()
}

fn balanced(tex: &str) -> bool {
    let re = regex_lite(tex);
    let mut stack = Vec::new();
    for (open, env) in re {
        if open {
            stack.push(env);
        } else if stack.pop() != Some(env) {
            return false;
        }
    }
    stack.is_empty()
}

/// `(is_begin, environment)` for every `\begin{..}` / `\end{..}`.
fn regex_lite(tex: &str) -> Vec<(bool, String)> {
    let mut out = Vec::new();
    let mut rest = tex;
    while let Some(i) = rest.find(['\\']) {
        rest = &rest[i + 1..];
        for (prefix, open) in [("begin{", true), ("end{", false)] {
            if let Some(tail) = rest.strip_prefix(prefix) {
                if let Some(close) = tail.find('}') {
                    out.push((open, tail[..close].to_string()));
                }
            }
        }
    }
    out
}

fn braced_after<'a>(text: &'a str, command: &str) -> Vec<&'a str> {
    text.match_indices(command)
        .filter_map(|(i, _)| {
            let tail = &text[i + command.len()..];
            tail.find('}').map(|end| &tail[..end])
        })
        .collect()
}

fn generation_structure() -> String {
    let (store, _, _) = expanded_fixture_graph();
    let g = store.graph();
    let six: Vec<NodeId> = neighbor_repo_ids()[..6].iter().map(|id| canonical_id(&repo_title(id)).unwrap()).collect();
    // oracle: distinct scripted challenge texts of the six documents
    let responses: Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("responses.json")).unwrap()).unwrap();
    let distinct: BTreeSet<String> = responses["responses"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["task"] == "Challenges" && neighbor_repo_ids()[..6].contains(&r["doc_id"].as_str().unwrap().to_string()))
        .flat_map(|r| r["output"].as_array().unwrap().iter().map(|o| o["summary"].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(distinct.len(), 3, "fixture should carry 3 distinct challenges");

    let model = OfflineModel;
    let vocabulary = Vocabulary::from_schema(g.schema());
    let intent = interpret_intent("Please write me a related work, focusing on their challenge", &vocabulary, &model).unwrap();
    let payload = collect_payload(g, &six, &intent).unwrap();
    let reference = build_mindmap(&payload, &intent, &model, 6).unwrap();
    let names: BTreeSet<String> = reference.category_names().into_iter().collect();
    assert_eq!(names, distinct);
    assert_eq!(reference.covered(), six.iter().copied().collect());
    for batch in [1, 2] {
        assert_eq!(build_mindmap(&payload, &intent, &model, batch).unwrap().categories, reference.categories, "batch {batch}");
    }

    let draft = write_report(&reference, &intent, &payload, &model).unwrap();
    let tex = render_report(&draft, ReportFormat::Latex).unwrap();
    let md = render_report(&draft, ReportFormat::Markdown).unwrap();
    let cited: BTreeSet<&str> = braced_after(&tex, "\\cite{").into_iter().flat_map(|k| k.split(',')).map(str::trim).collect();
    let bib: BTreeSet<&str> = braced_after(&tex, "\\bibitem{").into_iter().collect();
    assert_eq!(cited, bib);
    assert_eq!(bib.len(), 6);
    assert!(balanced(&tex), "unbalanced environments");
    let tex_headings: Vec<&str> = braced_after(&tex, "\\section{");
    let md_headings: Vec<&str> = md.lines().filter_map(|l| l.strip_prefix("## ")).collect();
    assert_eq!(tex_headings, md_headings);
    format!("3 categories covering 6 papers for batch sizes 1, 2, 6; {} cite keys = bibitems; {} headings agree", bib.len(), md_headings.len())
}

fn end_to_end() -> String {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    let summary = common::scrape_fixture(&config);
    assert_eq!(summary.facts, 10);
    let server = common::Server::start(&config);
    let c = server.client();

    let sid = c.ok("/sessions", json!({}))["id"].as_str().unwrap().to_string();
    let path = |p: &str| format!("/sessions/{sid}/{p}");
    let found = c.ok(
        &path("search"),
        json!({"label": "Paper", "predicate": {"op": "contains", "attribute": "title", "value": "Llama3"}}),
    );
    let seed = found["outcome"]["ids"][0].clone();
    c.ok(&path("promote"), json!({"chosen": [seed]}));
    let view = c.ok(&path("prequery"), json!({"selected": [seed]}));
    assert_eq!(view["outcome"]["view"]["total"], 10);
    let top = c.ok(&path("refine"), json!({"mode": "table", "params": {"sort": "citation_count", "direction": "desc", "top_k": 3}}));
    let chosen = top["outcome"]["ids"].clone();
    let session = c.ok(&path("promote"), json!({"chosen": chosen}))["session"].clone();
    let selected = session["present"].as_array().unwrap().len();
    assert_eq!(selected, 3);
    c.ok(&path("report/intent"), json!({"instruction": "Please write me a related work, focusing on their challenge"}));
    c.ok(&path("report/intent/confirm"), json!({}));
    c.ok(&path("report/mindmap"), json!({}));
    c.ok(&path("report/mindmap/confirm"), json!({}));
    c.ok(&path("report/draft"), json!({}));
    let (status, _, tex) = c.get_text(&path("report/download?format=latex"));
    assert_eq!(status, 200);
    let out = dir.path().join("report.tex");
    std::fs::write(&out, &tex).unwrap();
    assert!(std::fs::metadata(&out).unwrap().len() > 0);
    assert_eq!(tex.matches("\\bibitem{").count(), selected);
    server.stop();
    format!("13 REST calls offline; report.tex has {selected} bibitems for {selected} selected papers")
}

fn round_trip() -> String {
    let (store, _, _) = expanded_fixture_graph();
    let first = jsonl_bytes(store.graph());
    let imported = import_jsonl(first.as_slice(), store.graph().schema().clone()).unwrap();
    let second = jsonl_bytes(&imported);
    assert!(first == second, "re-export differs");
    format!("{} bytes identical after export, import, export", first.len())
}
