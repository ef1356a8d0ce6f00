mod common;

use common::{start, synthetic_log, upload};
use reqwest::Client;
use serde_json::{json, Value};

async fn error_of(resp: reqwest::Response) -> (u16, Value) {
    let status = resp.status().as_u16();
    let body: Value = resp.json().await.unwrap();
    (status, body["error"].clone())
}

#[tokio::test]
async fn uploads_get_fresh_ids_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let c = Client::new();
    let log = synthetic_log(1, 600);

    let a = upload(&c, &base, &log).await;
    let b = upload(&c, &base, &log).await;
    assert_ne!(a, b);

    let raw = c
        .post(format!("{base}/recordings?screen=1366x768"))
        .header("content-type", "text/csv")
        .body(log.clone())
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status(), 201);

    let list: Vec<Value> = c
        .get(format!("{base}/recordings"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(list.len(), 3);

    let rec: Value = c
        .get(format!("{base}/recordings/{a}"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(rec["id"], a.as_str());
    assert_eq!(rec["screen"], json!({"width": 1366, "height": 768}));
    assert_eq!(rec["samples"].as_array().unwrap().len(), 600);

    let back = c
        .get(format!("{base}/recordings/{a}/log"))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(back, log);
}

#[tokio::test]
async fn upload_with_metadata_object() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let c = Client::new();
    let meta = json!({
        "screen": {"width": 1366, "height": 768},
        "aoi": [{"name": "left", "rect": [0, 0, 683, 768]}],
        "extra": true
    });
    let resp = c
        .post(format!("{base}/recordings"))
        .json(&json!({ "log": synthetic_log(2, 300), "meta": meta }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 201);
    let receipt: Value = resp.json().await.unwrap();
    assert!(!receipt["warnings"].as_array().unwrap().is_empty());
    let id = receipt["id"].as_str().unwrap();

    let resp = c
        .post(format!("{base}/recordings/{id}/analyses"))
        .json(&json!({ "kind": "sequence" }))
        .send()
        .await
        .unwrap();
    let job: Value = resp.json().await.unwrap();
    assert_eq!(job["status"], "done");
    assert_eq!(job["output"]["aoi_ratios"][0]["name"], "left");
}

#[tokio::test]
async fn errors_carry_codes() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let c = Client::new();

    let (s, e) = error_of(
        c.get(format!("{base}/recordings/rec-999999"))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["code"].as_str().unwrap()), (404, "NotFound"));

    let (s, e) = error_of(
        c.post(format!("{base}/recordings"))
            .json(&json!({"log": "t,x,y,valid\n"}))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!(
        (s, e["code"].as_str().unwrap(), e["field"].as_str().unwrap()),
        (400, "ValidationError", "screen")
    );

    let (s, e) = error_of(
        c.post(format!("{base}/recordings"))
            .json(&json!({"log": "", "screen": "1366x768"}))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["code"].as_str().unwrap()), (400, "EmptyLog"));
    assert_eq!(e["module"], "ingest");

    let (s, e) = error_of(
        c.post(format!("{base}/recordings"))
            .json(&json!({"log": "x", "screen": "0x768"}))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["code"].as_str().unwrap()), (400, "InvalidScreen"));

    let id = upload(&c, &base, &synthetic_log(3, 600)).await;
    let (s, e) = error_of(
        c.post(format!("{base}/recordings/{id}/analyses"))
            .json(&json!({"kind": "cluster", "params": {"config": {"restart": 3}}}))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["code"].as_str().unwrap()), (400, "ValidationError"));
    assert_eq!(e["field"], "config.restart");

    let (s, e) = error_of(
        c.post(format!("{base}/recordings/{id}/analyses"))
            .json(&json!({"kind": "nope"}))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["field"].as_str().unwrap()), (400, "kind"));

    let (s, e) = error_of(
        c.get(format!(
            "{base}/recordings/{id}/layers/gazeplot?window=500,100"
        ))
        .send()
        .await
        .unwrap(),
    )
    .await;
    assert_eq!((s, e["code"].as_str().unwrap()), (400, "BadWindow"));

    let (s, e) = error_of(
        c.get(format!("{base}/recordings/{id}/layers/heatmap?zoom=2"))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["field"].as_str().unwrap()), (400, "zoom"));

    let (s, e) = error_of(
        c.get(format!("{base}/recordings/{id}/layers/contour"))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["field"].as_str().unwrap()), (400, "layer"));

    let (s, e) = error_of(
        c.get(format!("{base}/analyses/job-0000"))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["code"].as_str().unwrap()), (404, "NotFound"));

    let (s, _) = error_of(c.get(format!("{base}/nowhere")).send().await.unwrap()).await;
    assert_eq!(s, 404);
}

#[tokio::test]
async fn failed_jobs_keep_their_domain_code() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let c = Client::new();
    let id = upload(&c, &base, &synthetic_log(4, 300)).await;

    let resp = c
        .post(format!("{base}/recordings/{id}/analyses"))
        .json(&json!({"kind": "cluster", "params": {"k": 500}}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    let job: Value = resp.json().await.unwrap();
    assert_eq!(job["status"], "failed");
    assert_eq!(job["error"]["code"], "TooFewPoints");
    assert_eq!(job["error"]["module"], "cluster");

    let job_id = job["id"].as_str().unwrap();
    let (s, e) = error_of(
        c.get(format!("{base}/analyses/{job_id}/artifact"))
            .send()
            .await
            .unwrap(),
    )
    .await;
    assert_eq!((s, e["code"].as_str().unwrap()), (422, "TooFewPoints"));
}

#[tokio::test]
async fn analyses_are_cached_and_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let c = Client::new();
    let id = upload(&c, &base, &synthetic_log(5, 1500)).await;
    let req = json!({"kind": "cluster", "params": {"method": "kmeans", "sweep": "2..6"}});
    // Same meaning, different spelling: defaults spelled out, keys reordered.
    let same = json!({"params": {"sweep": [2, 6], "config": {"seed": 0}, "method": "kmeans"}, "kind": "cluster"});

    let first = c
        .post(format!("{base}/recordings/{id}/analyses"))
        .json(&req)
        .send()
        .await
        .unwrap();
    assert_eq!(first.headers()["x-gazekit-cache"], "miss");
    let first = first.bytes().await.unwrap();
    let second = c
        .post(format!("{base}/recordings/{id}/analyses"))
        .json(&same)
        .send()
        .await
        .unwrap();
    assert_eq!(second.headers()["x-gazekit-cache"], "hit");
    assert_eq!(first, second.bytes().await.unwrap());

    let job: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(job["status"], "done");
    assert_eq!(job["output"]["model"]["k"], 3);
    let job_id = job["id"].as_str().unwrap();
    let fetched = c
        .get(format!("{base}/analyses/{job_id}"))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(fetched, first);
    let artifact: Value = c
        .get(format!("{base}/analyses/{job_id}/artifact"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(artifact, job["output"]);

    let h1 = c
        .get(format!("{base}/recordings/{id}/layers/heatmap"))
        .send()
        .await
        .unwrap();
    assert_eq!(h1.headers()["content-type"], "image/png");
    assert_eq!(h1.headers()["x-gazekit-cache"], "miss");
    let h1 = h1.bytes().await.unwrap();
    let h2 = c
        .get(format!("{base}/recordings/{id}/layers/heatmap"))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(h1, h2);
    assert_eq!(&h1[1..4], b"PNG");

    let svg = c
        .get(format!(
            "{base}/recordings/{id}/layers/scatter?window=0,2000&low=0000ff&high=ff0000"
        ))
        .send()
        .await
        .unwrap();
    assert_eq!(svg.headers()["content-type"], "image/svg+xml");
    assert!(svg.text().await.unwrap().starts_with("<svg"));
}

#[tokio::test]
async fn workspace_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::new();
    let (id, job) = {
        let base = start(dir.path(), None).await;
        let id = upload(&c, &base, &synthetic_log(6, 600)).await;
        let job: Value = c
            .post(format!("{base}/recordings/{id}/analyses"))
            .json(&json!({"kind": "fixate"}))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        (id, job)
    };
    let base = start(dir.path(), None).await;
    let again = c
        .post(format!("{base}/recordings/{id}/analyses"))
        .json(&json!({"kind": "fixate"}))
        .send()
        .await
        .unwrap();
    assert_eq!(again.headers()["x-gazekit-cache"], "hit");
    assert_eq!(again.json::<Value>().await.unwrap(), job);
    let next = upload(&c, &base, &synthetic_log(6, 600)).await;
    assert_ne!(next, id);
}

#[tokio::test]
async fn fixations_route_formats() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let c = Client::new();
    let id = upload(&c, &base, &synthetic_log(7, 900)).await;

    let doc: Value = c
        .get(format!("{base}/recordings/{id}/fixations"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let n = doc["count"].as_u64().unwrap() as usize;
    assert!(n > 5);
    assert_eq!(doc["fixations"].as_array().unwrap().len(), n);
    assert_eq!(doc["fixations"][0]["id"], 0);

    let csv = c
        .get(format!(
            "{base}/recordings/{id}/fixations?format=csv&dispersion=60"
        ))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(gazekit::ingest::parse_fixations(&csv).unwrap().len(), n);

    let tight: Value = c
        .get(format!(
            "{base}/recordings/{id}/fixations?dispersion=60&min_dur=400"
        ))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(tight["count"].as_u64().unwrap() < n as u64);
}

#[tokio::test]
async fn concurrent_uploads_and_analyses() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path(), None).await;
    let c = Client::new();
    let log = synthetic_log(8, 600);
    let uploads = (0..8).map(|_| {
        let (c, base, log) = (c.clone(), base.clone(), log.clone());
        tokio::spawn(async move { upload(&c, &base, &log).await })
    });
    let mut ids = Vec::new();
    for h in uploads {
        ids.push(h.await.unwrap());
    }
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 8);

    let id = ids[0].clone();
    let runs = (0..6).map(|_| {
        let (c, base, id) = (c.clone(), base.clone(), id.clone());
        tokio::spawn(async move {
            c.post(format!("{base}/recordings/{id}/analyses"))
                .json(&json!({"kind": "stats"}))
                .send()
                .await
                .unwrap()
                .bytes()
                .await
                .unwrap()
        })
    });
    let mut bodies = Vec::new();
    for h in runs {
        bodies.push(h.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn ui_is_served_statically() {
    let dir = tempfile::tempdir().unwrap();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(
        ui.path().join("index.html"),
        "<!doctype html><title>explorer</title>",
    )
    .unwrap();
    let base = start(dir.path(), Some(ui.path())).await;
    let c = Client::new();
    let page = c.get(format!("{base}/ui/index.html")).send().await.unwrap();
    assert_eq!(page.status(), 200);
    assert!(page.text().await.unwrap().contains("explorer"));

    let bare = start(tempfile::tempdir().unwrap().path(), None).await;
    let (s, e) = error_of(c.get(format!("{bare}/ui/index.html")).send().await.unwrap()).await;
    assert_eq!((s, e["code"].as_str().unwrap()), (404, "NotFound"));

    let health: Value = c
        .get(format!("{base}/health"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "ok");
}
