mod common;

use common::{ids, Server};
use graphy_core::navigation::canonical_id;
use serde_json::{json, Value};

fn hex(title: &str) -> String {
    canonical_id(title).unwrap().to_hex()
}

fn started() -> (tempfile::TempDir, std::path::PathBuf, Server) {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_config(dir.path());
    common::scrape_fixture(&config);
    let server = Server::start(&config);
    (dir, config, server)
}

fn new_session(c: &common::Client) -> String {
    c.ok("/sessions", json!({}))["id"].as_str().unwrap().to_string()
}

/// Search for the Llama 3 paper, promote it and open its neighbors.
fn open_llama_neighbors(c: &common::Client, sid: &str) -> Value {
    let out = c.ok(
        &format!("/sessions/{sid}/search"),
        json!({"label": "Paper", "predicate": {"op": "contains", "attribute": "title", "value": "Llama3"}}),
    );
    let seed = hex("The Llama 3 Herd of Models");
    assert_eq!(ids(&out["outcome"]["ids"]), vec![seed.clone()]);
    c.ok(&format!("/sessions/{sid}/promote"), json!({"chosen": [seed]}));
    c.ok(&format!("/sessions/{sid}/prequery"), json!({"selected": [seed]}))
}

#[test]
fn health_and_unknown_routes() {
    let (_dir, _, server) = started();
    let c = server.client();
    assert_eq!(c.get("/health"), (200, json!({"status": "ok"})));
    let (status, body) = c.get("/nope");
    assert_eq!(status, 404);
    assert_eq!(body["code"], "not_found");
}

#[test]
fn unknown_session_is_404() {
    let (_dir, _, server) = started();
    let c = server.client();
    let (status, body) = c.get("/sessions/doesnotexist");
    assert_eq!(status, 404);
    assert_eq!(body["code"], "session_not_found");
    let (status, _) = c.post("/sessions/doesnotexist/search", json!({"label": "Paper"}));
    assert_eq!(status, 404);
    let (status, _) = c.post("/sessions/..%2F..%2Fetc/promote", json!({"chosen": []}));
    assert_eq!(status, 404);
}

#[test]
fn refiner_flow_moves_present_to_past() {
    let (_dir, _, server) = started();
    let c = server.client();
    let sid = new_session(&c);
    let view = open_llama_neighbors(&c, &sid);
    assert_eq!(view["outcome"]["view"]["total"], 10);
    assert!(view["session"]["future"].as_array().unwrap().is_empty());

    let out = c.ok(
        &format!("/sessions/{sid}/refine"),
        json!({"mode": "table", "params": {"sort": "citation_count", "direction": "desc", "top_k": 3}}),
    );
    let top = ids(&out["outcome"]["ids"]);
    assert_eq!(
        top,
        vec![
            hex("Attention Is All You Need"),
            hex("Language Models are Few-Shot Learners"),
            hex("LLaMA: Open and Efficient Foundation Language Models"),
        ]
    );
    let out = c.ok(&format!("/sessions/{sid}/promote"), json!({"chosen": top}));
    let s = &out["session"];
    assert_eq!(ids(&s["past"]), vec![hex("The Llama 3 Herd of Models")]);
    assert_eq!(ids(&s["present"]).len(), 3);
    assert!(s["history"].as_array().unwrap().iter().all(|h| h["cypher"].is_string()));
}

#[test]
fn histogram_bar_count_matches_bucket_filter() {
    let (_dir, _, server) = started();
    let c = server.client();
    let sid = new_session(&c);
    let out = c.ok(
        &format!("/sessions/{sid}/histogram"),
        json!({"label": "Paper", "filters": [{"op": "has", "attribute": "year"}], "attribute": "year"}),
    );
    let buckets = out["outcome"]["histogram"]["buckets"].as_array().unwrap().clone();
    assert!(!buckets.is_empty());
    for b in buckets {
        let out = c.ok(
            &format!("/sessions/{sid}/bucket-filter"),
            json!({"attribute": "year", "bucket": b["key"]}),
        );
        assert_eq!(out["outcome"]["ids"].as_array().unwrap().len() as u64, b["count"].as_u64().unwrap());
        assert_eq!(out["session"]["staged"], out["outcome"]["ids"]);
    }
    let (status, body) = c.post(&format!("/sessions/{sid}/bucket-filter"), json!({"attribute": "citation_count", "bucket": {"value": 5}}));
    assert_eq!(status, 409, "{body}");
    assert_eq!(body["code"], "stale_bucket");
}

#[test]
fn errors_are_code_and_message() {
    let (_dir, _, server) = started();
    let c = server.client();
    let sid = new_session(&c);
    let before = c.get(&format!("/sessions/{sid}")).1;

    let cases = [
        ("search", json!({"label": "Nope"}), 400, "unknown_label"),
        ("search", json!({"lable": "Paper"}), 400, "invalid_body"),
        ("prequery", json!({"selected": []}), 400, "empty_selection"),
        ("refine", json!({"mode": "table", "sort": "year", "top_k": 2}), 409, "no_view"),
        ("refine", json!({"mode": "sideways"}), 400, "invalid_body"),
        ("promote", json!({"chosen": [hex("Attention Is All You Need")]}), 409, "not_in_future"),
        ("histogram", json!({"attribute": "year"}), 400, "invalid_body"),
    ];
    for (action, body, status, code) in cases {
        let (got, err) = c.post(&format!("/sessions/{sid}/{action}"), body);
        assert_eq!((got, err["code"].as_str().unwrap()), (status, code), "{action}: {err}");
        assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    assert_eq!(c.get(&format!("/sessions/{sid}")).1, before);
}

#[test]
fn report_wizard_produces_cited_latex() {
    let (_dir, _, server) = started();
    let c = server.client();
    let sid = new_session(&c);

    let (status, body) = c.get(&format!("/sessions/{sid}/report"));
    assert_eq!((status, body["code"].as_str()), (409, Some("no_report")));
    let (status, body) = c.post(&format!("/sessions/{sid}/report/intent"), json!({"instruction": "summarize"}));
    assert_eq!((status, body["code"].as_str()), (400, Some("empty_selection")));

    open_llama_neighbors(&c, &sid);
    let top = c.ok(
        &format!("/sessions/{sid}/refine"),
        json!({"mode": "table", "sort": "citation_count", "top_k": 3}),
    )["outcome"]["ids"]
        .clone();
    c.ok(&format!("/sessions/{sid}/promote"), json!({"chosen": top}));

    let job = c.ok(
        &format!("/sessions/{sid}/report/intent"),
        json!({"instruction": "Please write me a related work, focusing on their challenge"}),
    );
    assert_eq!(job["stage"], "intent_proposed");
    assert_eq!(job["intent"]["report_kind"], "related-work");
    assert_eq!(job["intent"]["required_dimensions"], json!(["Challenge"]));

    let (status, _, body) = c.get_text(&format!("/sessions/{sid}/report/download?format=latex"));
    assert_eq!(status, 409, "{body}");

    assert_eq!(c.ok(&format!("/sessions/{sid}/report/intent/confirm"), json!({}))["stage"], "intent_confirmed");
    let job = c.ok(&format!("/sessions/{sid}/report/mindmap"), json!({}));
    assert!(!job["mindmap"]["categories"].as_array().unwrap().is_empty());
    c.ok(&format!("/sessions/{sid}/report/mindmap/confirm"), json!({}));
    assert_eq!(c.ok(&format!("/sessions/{sid}/report/draft"), json!({}))["stage"], "drafted");
    assert_eq!(c.get(&format!("/sessions/{sid}")).1["report_stage"], "drafted");

    let (status, mime, tex) = c.get_text(&format!("/sessions/{sid}/report/download?format=latex"));
    assert_eq!((status, mime.as_str()), (200, "application/x-tex"));
    assert_eq!(tex.matches("\\bibitem{").count(), 3);
    assert!(tex.contains("\\begin{document}") && tex.trim_end().ends_with("\\end{document}"));

    let (status, mime, md) = c.get_text(&format!("/sessions/{sid}/report/download?format=markdown"));
    assert_eq!((status, mime.as_str()), (200, "text/markdown"));
    assert!(md.contains("**References**"));
    let (status, _, body) = c.get_text(&format!("/sessions/{sid}/report/download?format=docx"));
    assert_eq!(status, 400, "{body}");
}

#[test]
fn graph_node_lookup() {
    let (_dir, _, server) = started();
    let c = server.client();
    let (status, body) = c.get(&format!("/graph/nodes/{}", hex("The Llama 3 Herd of Models")));
    assert_eq!(status, 200);
    assert_eq!(body["node"]["role"], "fact");
    assert_eq!(body["node"]["properties"]["title"], "The Llama 3 Herd of Models");
    assert_eq!(body["cites"].as_array().unwrap().len(), 10);
    assert!(!body["dimensions"].as_array().unwrap().is_empty());

    assert_eq!(c.get("/graph/nodes/zz").0, 400);
    assert_eq!(c.get(&format!("/graph/nodes/{}", "0".repeat(32))).0, 404);
    let (status, schema) = c.get("/graph/schema");
    assert_eq!(status, 200);
    assert!(schema.to_string().contains("Challenge"));
}

#[test]
fn sessions_survive_restart_bit_for_bit() {
    let (dir, config, server) = started();
    let c = server.client();
    let sid = new_session(&c);
    open_llama_neighbors(&c, &sid);
    let before = c.get(&format!("/sessions/{sid}")).1;
    let file = dir.path().join(format!("data/sessions/{sid}.json"));
    let bytes = std::fs::read(&file).unwrap();
    server.stop();

    let server = Server::start(&config);
    let c = server.client();
    assert_eq!(c.get(&format!("/sessions/{sid}")).1, before);
    server.stop();
    assert_eq!(std::fs::read(&file).unwrap(), bytes);
}
