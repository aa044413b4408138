mod common;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Multipart, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use idvault::api::{Backend, ErrorCode};
use idvault::auth::Principal;
use idvault::idcard::{
    ClientError, HttpVerificationClient, VerificationClient, VerificationDecision,
    VerificationRequest, IDCARD,
};
use serde_json::{json, Value};

/// Image bytes, declared fields and request time of every call.
type Call = (Vec<u8>, Value, String);

#[derive(Clone, Default)]
struct Seen(Arc<Mutex<Vec<Call>>>);

async fn verify(State(seen): State<Seen>, mut form: Multipart) -> Response {
    let (mut image, mut fields, mut at) = (Vec::new(), Value::Null, String::new());
    while let Some(field) = form.next_field().await.unwrap() {
        match field.name().unwrap() {
            "cardImage" => image = field.bytes().await.unwrap().to_vec(),
            "fields" => fields = serde_json::from_str(&field.text().await.unwrap()).unwrap(),
            "requestedAt" => at = field.text().await.unwrap(),
            other => {
                return (StatusCode::BAD_REQUEST, format!("unexpected part {other}"))
                    .into_response()
            }
        }
    }
    seen.0.lock().unwrap().push((image, fields.clone(), at));
    let decision = if fields["identifier"] == "BAD" {
        "REJECTED"
    } else {
        "VERIFIED"
    };
    Json(json!({
        "decision": decision,
        "fields": {"occupation": "Nurse"},
        "faceBox": {"top": 2, "left": 3, "width": 10, "height": 12},
        "reasons": []
    }))
    .into_response()
}

/// Spawns the mock on its own runtime; returns its base URL.
fn mock(seen: Seen) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/verify", post(verify))
                .route(
                    "/broken",
                    post(|| async { (StatusCode::INTERNAL_SERVER_ERROR, "boom") }),
                )
                .route("/garbled", post(|| async { "not json" }))
                .route(
                    "/slow",
                    post(|| async {
                        tokio::time::sleep(Duration::from_secs(5)).await;
                        "late"
                    }),
                )
                .with_state(seen);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn request() -> VerificationRequest {
    VerificationRequest {
        card_image: common::png(8, 8),
        mime_type: "image/png".into(),
        declared: common::vars(json!({"identifier": "A1", "name": "N"})),
        requested_at: chrono::DateTime::parse_from_rfc3339("2024-05-01T10:00:00Z")
            .unwrap()
            .to_utc(),
    }
}

#[test]
fn client_speaks_the_wire_format() {
    let seen = Seen::default();
    let base = mock(seen.clone());
    let client =
        HttpVerificationClient::new(format!("{base}/verify"), Duration::from_secs(5)).unwrap();
    let response = client.verify(&request()).unwrap();
    assert_eq!(response.decision, VerificationDecision::Verified);
    assert_eq!(response.face_box.unwrap().width, 10);
    let calls = seen.0.lock().unwrap();
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].0, common::png(8, 8));
    assert_eq!(calls[0].1, json!({"identifier": "A1", "name": "N"}));
    assert_eq!(calls[0].2, "2024-05-01T10:00:00.000Z");
}

#[test]
fn client_failures_are_classified() {
    let base = mock(Seen::default());
    let timeout = Duration::from_millis(300);
    let broken = HttpVerificationClient::new(format!("{base}/broken"), timeout).unwrap();
    assert!(matches!(
        broken.verify(&request()),
        Err(ClientError::Transport(_))
    ));
    let garbled = HttpVerificationClient::new(format!("{base}/garbled"), timeout).unwrap();
    assert!(matches!(
        garbled.verify(&request()),
        Err(ClientError::BadResponse(_))
    ));
    let slow = HttpVerificationClient::new(format!("{base}/slow"), timeout).unwrap();
    assert!(matches!(
        slow.verify(&request()),
        Err(ClientError::Transport(_))
    ));
}

#[test]
fn service_uses_the_configured_client() {
    let seen = Seen::default();
    let base = mock(seen.clone());
    let svc = common::service();
    let owner = Principal::authenticated("owner");
    let asset = svc
        .media()
        .store_media(&common::png(50, 50), "c.png", "image/png")
        .unwrap();
    let card = svc
        .workflow()
        .create_card(
            Some(&owner),
            common::vars(json!({"kind": "PASSPORT", "identifier": "P9", "name": "Ayu"})),
            &asset.id,
        )
        .unwrap();

    svc.set_verifier(Arc::new(
        HttpVerificationClient::new("http://127.0.0.1:9/verify", Duration::from_millis(300))
            .unwrap(),
    ));
    let q = "mutation($id: ID!) { verifyIdcard(id: $id) { idcard { statusCode } } }";
    let r = svc.execute(
        q,
        &common::vars(json!({"id": card.id})),
        None,
        Some(owner.clone()),
    );
    assert_eq!(r.errors[0].code, ErrorCode::ServiceUnavailable);
    assert_eq!(
        svc.content()
            .get_unchecked(IDCARD, &card.id)
            .unwrap()
            .unwrap(),
        card
    );

    svc.set_verifier(Arc::new(
        HttpVerificationClient::new(format!("{base}/verify"), Duration::from_secs(5)).unwrap(),
    ));
    let r = svc.execute(q, &common::vars(json!({"id": card.id})), None, Some(owner));
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    assert_eq!(
        r.data.unwrap()["verifyIdcard"]["idcard"]["statusCode"],
        "VERIFIED"
    );
    let stored = svc
        .content()
        .get_unchecked(IDCARD, &card.id)
        .unwrap()
        .unwrap();
    assert_eq!(stored.values["occupation"], "Nurse");
    assert_eq!(stored.values["faceWidth"], 10);
    assert_eq!(
        seen.0.lock().unwrap().len(),
        1,
        "one client call per advance"
    );
}
