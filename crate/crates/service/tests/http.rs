use std::time::Duration;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use treequery::api;
use treequery::fixtures::{self, CASE_STUDY_EXPRESSIONS};
use treequery::interchange::ast_encode;
use treequery::similarity::Method;
use treequery::tree::{Corpus, NodeDoc};
use treequery::{parse, MultiTree};
use treequery_service::{app, snapshot_id, Config, EXPR_HEADER};

async fn spawn(config: Config) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app(config)).await.unwrap() });
    format!("http://{addr}")
}

async fn post(client: &Client, url: String, body: impl Into<reqwest::Body>) -> (StatusCode, String) {
    let resp = client.post(url).body(body).send().await.unwrap();
    (resp.status(), resp.text().await.unwrap())
}

async fn get(client: &Client, url: String) -> (StatusCode, String) {
    let resp = client.get(url).send().await.unwrap();
    (resp.status(), resp.text().await.unwrap())
}

async fn upload(client: &Client, base: &str, corpus: &Corpus) -> String {
    let (status, body) = post(client, format!("{base}/corpus"), corpus.to_json()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    v["snapshot_id"].as_str().unwrap().to_string()
}

fn three_trees() -> Corpus {
    let trees = (0..3)
        .map(|t| {
            let kids = (0..t).map(|k| NodeDoc::leaf(format!("t{t}-c{k}"))).collect();
            MultiTree::from_doc(format!("t{t}"), &NodeDoc::leaf(format!("t{t}-r")).with_children(kids)).unwrap()
        })
        .collect();
    Corpus::from_trees(trees).unwrap()
}

#[tokio::test]
async fn upload_is_content_addressed() {
    let base = spawn(Config::default()).await;
    let client = Client::new();
    let corpus = fixtures::citation_corpus();
    let (status, body) = post(&client, format!("{base}/corpus"), corpus.to_json()).await;
    assert_eq!(status, StatusCode::OK);
    let id = snapshot_id(&corpus);
    assert_eq!(
        body,
        format!(r#"{{"snapshot_id":"{id}","stats":{}}}"#, api::stats_json(&corpus))
    );
    // a reformatted copy of the same document lands on the same snapshot
    let pretty = serde_json::to_string_pretty(&corpus.to_doc()).unwrap();
    assert_eq!(
        upload(
            &client,
            &base,
            &Corpus::from_doc(&serde_json::from_str(&pretty).unwrap()).unwrap()
        )
        .await,
        id
    );
    let (status, body) = post(&client, format!("{base}/corpus"), pretty).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains(&id));
    let (status, stats) = get(&client, format!("{base}/stats?snapshot_id={id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stats, api::stats_json(&corpus));
}

#[tokio::test]
async fn wildcard_query_matches_every_node() {
    let base = spawn(Config::default()).await;
    let client = Client::new();
    let corpus = three_trees();
    let id = upload(&client, &base, &corpus).await;
    let req = json!({"snapshot_id": id, "expr": "."}).to_string();
    let resp = client.post(format!("{base}/query")).body(req).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()[EXPR_HEADER].as_bytes(), b".");
    assert_eq!(resp.headers()["content-type"], "application/json");
    let v: Value = serde_json::from_str(&resp.text().await.unwrap()).unwrap();
    assert_eq!(v["matched"], json!(["t0", "t1", "t2"]));
    for (t, n) in [("t0", 1), ("t1", 2), ("t2", 3)] {
        assert_eq!(v["results"][t].as_array().unwrap().len(), n);
    }
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let base = spawn(Config {
        max_corpus_nodes: 6,
        ..Config::default()
    })
    .await;
    let client = Client::new();
    let id = upload(&client, &base, &three_trees()).await;

    let (status, body) = post(
        &client,
        format!("{base}/query"),
        json!({"snapshot_id": id, "expr": "(("}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"], "parse_error");
    assert!(v["span"]["start"].is_u64() && v["span"]["end"].is_u64());

    let ast = ast_encode(&parse(".").unwrap());
    for req in [
        json!({"snapshot_id": id}),
        json!({"snapshot_id": id, "expr": ".", "ast": ast}),
    ] {
        let (status, body) = post(&client, format!("{base}/recommend"), req.to_string()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["error"], "bad_request");
    }

    let (status, body) = post(
        &client,
        format!("{base}/query"),
        json!({"snapshot_id": "nope", "expr": "."}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(
        serde_json::from_str::<Value>(&body).unwrap()["error"],
        "unknown_snapshot"
    );
    let (status, _) = get(&client, format!("{base}/stats?snapshot_id=nope")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, body) = post(&client, format!("{base}/query"), "not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let (status, _) = get(&client, format!("{base}/projection?snapshot_id={id}&method=umap")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = post(&client, format!("{base}/corpus"), fixtures::citation_corpus().to_json()).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(
        serde_json::from_str::<Value>(&body).unwrap()["error"],
        "corpus_too_large"
    );

    let (status, body) = post(&client, format!("{base}/corpus"), r#"{"trees":[{"tree_id":"a"}]}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(
        serde_json::from_str::<Value>(&body).unwrap()["error"],
        "malformed_corpus"
    );

    let (status, body) = post(
        &client,
        format!("{base}/query"),
        json!({"snapshot_id": id, "expr": "(colour=1)"}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(
        serde_json::from_str::<Value>(&body).unwrap()["error"],
        "invalid_expression"
    );
}

#[tokio::test]
async fn slow_computations_time_out() {
    let base = spawn(Config {
        timeout: Duration::from_millis(1),
        ..Config::default()
    })
    .await;
    let client = Client::new();
    let corpus = Corpus::from_trees(fixtures::random_shapes(3, 600, 30)).unwrap();
    let id = upload(&client, &base, &corpus).await;
    let (status, body) = get(&client, format!("{base}/projection?snapshot_id={id}")).await;
    assert_eq!(status, StatusCode::GATEWAY_TIMEOUT);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["error"], "timeout");
}

#[tokio::test]
async fn responses_equal_in_process_calls() {
    let base = spawn(Config::default()).await;
    let client = Client::new();
    let corpus = fixtures::citation_corpus();
    let id = upload(&client, &base, &corpus).await;
    for f in CASE_STUDY_EXPRESSIONS {
        let target = parse(f.text).unwrap();
        let expected = api::query_json(&target, &corpus);
        let by_text = post(
            &client,
            format!("{base}/query"),
            json!({"snapshot_id": id, "expr": f.text}).to_string(),
        )
        .await;
        assert_eq!(by_text, (StatusCode::OK, expected.clone()), "{}", f.name);
        let by_ast = json!({"snapshot_id": id, "ast": ast_encode(&target)}).to_string();
        assert_eq!(post(&client, format!("{base}/query"), by_ast).await.1, expected);
    }

    let seed = parse(CASE_STUDY_EXPRESSIONS[4].text).unwrap();
    let req = json!({"snapshot_id": id, "expr": CASE_STUDY_EXPRESSIONS[4].text, "k": 5}).to_string();
    let (status, body) = post(&client, format!("{base}/recommend"), req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, api::recommend_json(&seed, &corpus, 5));
    let recs: Value = serde_json::from_str(&body).unwrap();
    for (text, count) in fixtures::DL_CITER_WIDENINGS {
        assert!(
            recs.as_array()
                .unwrap()
                .iter()
                .any(|r| r["expr"] == text && r["count"] == count),
            "{text} missing"
        );
    }

    for (method, name) in [(Method::Tsne, "tsne"), (Method::Pca, "pca")] {
        let (status, body) = get(
            &client,
            format!("{base}/projection?snapshot_id={id}&method={name}&seed=9"),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, api::project_json(&corpus, method, 9));
    }
    let (_, default) = get(&client, format!("{base}/projection?snapshot_id={id}")).await;
    assert_eq!(default, api::project_json(&corpus, Method::Tsne, api::DEFAULT_SEED));
}

#[tokio::test]
async fn concurrent_queries_see_one_snapshot() {
    let base = spawn(Config::default()).await;
    let client = Client::new();
    let corpus = fixtures::citation_corpus();
    let id = upload(&client, &base, &corpus).await;
    let text = CASE_STUDY_EXPRESSIONS[3].text;
    let expected = api::query_json(&parse(text).unwrap(), &corpus);
    let mut handles = Vec::new();
    for i in 0..16 {
        let (client, base, id) = (client.clone(), base.clone(), id.clone());
        handles.push(tokio::spawn(async move {
            if i % 2 == 0 {
                // interleave uploads of other corpora
                upload(&client, &base, &three_trees()).await;
            }
            post(
                &client,
                format!("{base}/query"),
                json!({"snapshot_id": id, "expr": text}).to_string(),
            )
            .await
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), (StatusCode::OK, expected.clone()));
    }
}
