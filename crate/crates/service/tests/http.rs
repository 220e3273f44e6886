use reqwest::StatusCode;
use tilesight_client::{Client, ClientError};
use tilesight_core::api::ComposeRequest;
use tilesight_core::catalog::Catalog;
use tilesight_core::compose::TemplateRegistry;
use tilesight_core::config::PipelineConfig;
use tilesight_core::scenegen::{sample_composition, CompositionJitter, SceneConfig, SceneSpec};
use tilesight_service::{router, serve, ServiceState, MAX_BODY_BYTES};

async fn start() -> String {
    let state = ServiceState::new(PipelineConfig::default()).unwrap();
    let static_dir = std::env::temp_dir().join(format!("tilesight-static-{}", std::process::id()));
    std::fs::create_dir_all(&static_dir).unwrap();
    std::fs::write(static_dir.join("index.html"), "<h1>playground</h1>").unwrap();
    let app = router(state, Some(&static_dir));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, app));
    format!("http://{addr}")
}

fn mushroom(stem: usize) -> SceneSpec {
    let cat = Catalog::default();
    let reg = TemplateRegistry::builtin(&cat).unwrap();
    (0..)
        .map(|seed| {
            sample_composition(
                &reg,
                &cat,
                "mushroom",
                &CompositionJitter::none(),
                seed,
                &SceneConfig::default(),
            )
            .unwrap()
        })
        .find(|s| s.composition.as_ref().unwrap().alternatives[1] == stem)
        .unwrap()
}

fn api_status(r: Result<impl std::fmt::Debug, ClientError>) -> (StatusCode, ClientError) {
    let e = r.expect_err("expected an error response");
    (e.status().unwrap(), e)
}

#[tokio::test]
async fn catalog_and_templates() {
    let base = start().await;
    let client = Client::new(&base);
    let cat = client.catalog().await.unwrap();
    assert_eq!(cat, Catalog::default());
    let again = reqwest::get(format!("{base}/catalog"))
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    let first = reqwest::get(format!("{base}/catalog"))
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(again, first);
    let ids: Vec<String> = client.templates().await.unwrap().into_iter().map(|t| t.id).collect();
    let expected = TemplateRegistry::builtin(&cat).unwrap();
    assert_eq!(ids, expected.ids());
}

#[tokio::test]
async fn mushroom_scene_detects_and_verifies() {
    let base = start().await;
    let client = Client::new(&base);
    for stem in [0, 1] {
        let scene = mushroom(stem);
        let dets = client.detect_scene(&scene).await.unwrap().detections;
        assert_eq!(dets.len(), scene.tiles.len());
        let resp = client
            .compose_check(&ComposeRequest {
                template_id: "mushroom".into(),
                detections: Some(dets.clone()),
                scene: None,
            })
            .await
            .unwrap();
        assert!(resp.result.complete, "{:?}", resp.feedback);
        assert_eq!(resp.feedback, vec!["success: mushroom complete".to_string()]);
        let by_scene = client
            .compose_check(&ComposeRequest {
                template_id: "mushroom".into(),
                detections: None,
                scene: Some(scene),
            })
            .await
            .unwrap();
        assert!(by_scene.result.complete);
        assert_eq!(by_scene.detections, dets);
    }
}

#[tokio::test]
async fn rendered_png_detects_like_the_scene() {
    let base = start().await;
    let client = Client::new(&base);
    let scene = mushroom(0);
    let png = client.render(&scene).await.unwrap();
    assert_eq!(&png[1..4], b"PNG");
    let from_png = client.detect_png(png).await.unwrap();
    let from_scene = client.detect_scene(&scene).await.unwrap();
    assert_eq!(from_png, from_scene);
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let base = start().await;
    let http = reqwest::Client::new();
    let scene = serde_json::to_vec(&mushroom(1)).unwrap();
    let mut bodies = Vec::new();
    for _ in 0..2 {
        let r = http
            .post(format!("{base}/detect"))
            .body(scene.clone())
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::OK);
        bodies.push(r.bytes().await.unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    // keys are sorted
    let text = String::from_utf8(bodies[0].to_vec()).unwrap();
    assert!(text.starts_with("{\"detections\":[{\"cx\""), "{text}");
}

#[tokio::test]
async fn schema_errors_name_the_field() {
    let base = start().await;
    let http = reqwest::Client::new();
    let mut scene = serde_json::to_value(mushroom(0)).unwrap();
    scene["tiles"][1]["pose"]["w"] = serde_json::json!("wide");
    let r = http.post(format!("{base}/detect")).json(&scene).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let body: serde_json::Value = r.json().await.unwrap();
    assert_eq!(body["fields"][0]["path"], "tiles[1].pose.w");

    let r = http
        .post(format!("{base}/detect"))
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let client = Client::new(&base);
    let mut bad = mushroom(0);
    bad.tiles[0].spec_id = "ghost".into();
    let (status, _) = api_status(client.detect_scene(&bad).await);
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, e) = api_status(
        client
            .compose_check(&ComposeRequest {
                template_id: "mushroom".into(),
                detections: None,
                scene: None,
            })
            .await,
    );
    assert_eq!(status, StatusCode::BAD_REQUEST, "{e}");
}

#[tokio::test]
async fn unknown_template_is_404() {
    let client = Client::new(&start().await);
    let (status, _) = api_status(
        client
            .compose_check(&ComposeRequest {
                template_id: "teapot".into(),
                detections: Some(Vec::new()),
                scene: None,
            })
            .await,
    );
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn oversized_upload_is_413() {
    let client = Client::new(&start().await);
    let (status, _) = api_status(client.detect_png(vec![0u8; MAX_BODY_BYTES + 1]).await);
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    let (status, _) = api_status(client.detect_png(vec![0u8; 100]).await);
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversized_scene_is_rejected() {
    let client = Client::new(&start().await);
    let (status, e) = api_status(client.render(&SceneSpec::empty(5000, 10)).await);
    assert_eq!(status, StatusCode::BAD_REQUEST);
    if let ClientError::Api { body, .. } = e {
        assert_eq!(body.fields[0].path, "image_size");
    }
}

#[tokio::test]
async fn static_files_are_served() {
    let base = start().await;
    let r = reqwest::get(format!("{base}/index.html")).await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert!(r.text().await.unwrap().contains("playground"));
}
