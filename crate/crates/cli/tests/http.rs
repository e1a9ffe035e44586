//! The HTTP surface, driven in-process.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use socialbot_cli::server::{router, TurnRequest};
use socialbot_core::config::Config;
use socialbot_core::manager::{Engine, TurnInput};
use socialbot_core::replay::ReplayFixture;
use socialbot_core::store::MemoryStore;
use tower::ServiceExt;

fn table1() -> (Config, Vec<String>) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/table1/replay.json");
    let fixture = ReplayFixture::load(path).unwrap();
    let config = Config::load(Some(&fixture.config), &[], Vec::new()).unwrap();
    (config, fixture.turns.into_iter().map(|t| t.user).collect())
}

fn engine(config: &Config) -> Arc<Engine> {
    Arc::new(config.engine_with_store(Arc::new(MemoryStore::new())).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn say(app: &Router, session: &str, text: &str, debug: bool) -> (StatusCode, Value) {
    let uri = if debug { "/v1/turn?debug=true" } else { "/v1/turn" };
    call(app, "POST", uri, Some(json!({"session_id": session, "user_utterance": text}).to_string())).await
}

#[tokio::test]
async fn first_turn_greets_and_debug_is_opt_in() {
    let (config, _) = table1();
    let app = router(engine(&config));
    let (status, body) = say(&app, "s1", "let's chat", false).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body["bot_utterance"],
        "Hi, this is an Alexa Prize Socialbot. I'd love to get to know you a bit better before we chat! Is it all right if I ask for your name?"
    );
    assert_eq!(body["conversation_ended"], false);
    assert!(body.get("turn_debug").is_none());

    let (status, body) = say(&app, "s1", "my name is chris", true).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["turn_debug"]["response_rg"], "Launch");
    assert_eq!(body["turn_debug"]["prompt_rg"], "Neural Chat");
}

#[tokio::test]
async fn bad_requests_get_error_codes() {
    let (config, _) = table1();
    let app = router(engine(&config));
    let cases = [
        ("{not json", "malformed_body"),
        (r#"{"session_id": "s"}"#, "malformed_body"),
        (r#"{"session_id": "s", "user_utterance": "hi", "extra": 1}"#, "malformed_body"),
        (r#"{"session_id": "s", "user_utterance": "hi", "config": {"opinion_policy": "SOMETIMES"}}"#, "malformed_body"),
        (r#"{"session_id": "  ", "user_utterance": "hi"}"#, "empty_session_id"),
    ];
    for (body, code) in cases {
        let (status, value) = call(&app, "POST", "/v1/turn", Some(body.to_string())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(value["error"]["code"], code, "{body}");
    }
    let (status, value) = call(&app, "POST", "/v1/turn?debug=maybe", Some(r#"{"session_id":"s","user_utterance":"hi"}"#.into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(value["error"]["code"], "bad_query");
}

#[tokio::test]
async fn ended_sessions_refuse_more_turns() {
    let (config, _) = table1();
    let app = router(engine(&config));
    let (_, body) = say(&app, "s", "i want to stop talking", false).await;
    assert_eq!(body["conversation_ended"], true);
    let (status, body) = say(&app, "s", "hello", false).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "conversation_ended");
}

#[tokio::test]
async fn session_log_and_health() {
    let (config, _) = table1();
    let app = router(engine(&config));
    say(&app, "logged", "let's chat", false).await;
    say(&app, "logged", "my name is chris", false).await;
    let (status, body) = call(&app, "GET", "/v1/session/logged/log", None).await;
    assert_eq!(status, StatusCode::OK);
    let turns = body["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 2);
    assert_eq!(turns[1]["user"], "my name is chris");
    assert_eq!(turns[1]["debug"]["response_rg"], "Launch");

    let (status, body) = call(&app, "GET", "/v1/session/nobody/log", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "unknown_session");

    let (status, body) = call(&app, "GET", "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["index"]["entities"], 11);
}

#[tokio::test]
async fn service_matches_run_turn() {
    let (config, turns) = table1();
    let app = router(engine(&config));
    let direct = engine(&config);
    let mut record = None;
    for text in &turns {
        let (status, body) = say(&app, "same", text, true).await;
        assert_eq!(status, StatusCode::OK);
        let input = TurnRequest { session_id: "same".into(), user_utterance: text.clone(), config: None }.input();
        let (outcome, next, _) = direct.run_turn(record.take(), &input).unwrap();
        record = Some(next);
        assert_eq!(body["bot_utterance"], outcome.bot_utterance.as_str());
        assert_eq!(body["conversation_ended"], outcome.conversation_ended);
        let debug = &body["turn_debug"];
        assert_eq!(debug["response_rg"], json!(outcome.debug.response_rg));
        assert_eq!(debug["prompt_rg"], json!(outcome.debug.prompt_rg));
        assert_eq!(debug["entity"], json!(outcome.debug.entity));
        assert_eq!(debug["tracker"], json!(outcome.debug.tracker));
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_stay_apart() {
    let (config, turns) = table1();
    let solo = engine(&config);
    let expected: Vec<String> = turns
        .iter()
        .map(|t| {
            let input = TurnInput { session_id: "a".into(), utterance: t.clone(), ..Default::default() };
            solo.process(&input).unwrap().bot_utterance
        })
        .collect();

    let app = router(engine(&config));
    let sessions = ["a", "b", "c", "d"];
    let tasks: Vec<_> = sessions
        .iter()
        .map(|s| {
            let app = app.clone();
            let turns = turns.clone();
            let s = s.to_string();
            tokio::spawn(async move {
                let mut bots = Vec::new();
                for t in &turns {
                    let (status, body) = say(&app, &s, t, false).await;
                    assert_eq!(status, StatusCode::OK);
                    bots.push(body["bot_utterance"].as_str().unwrap().to_string());
                }
                bots
            })
        })
        .collect();
    for (s, task) in sessions.iter().zip(tasks) {
        let bots = task.await.unwrap();
        if *s == "a" {
            assert_eq!(bots, expected);
        }
        assert_eq!(bots.len(), turns.len());
    }
}
