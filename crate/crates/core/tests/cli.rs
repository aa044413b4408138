mod common;

use std::io::Write;
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use idvault::clock::SystemClock;
use idvault::service::Service;
use serde_json::{json, Value};

fn idvault() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_idvault"));
    for (key, _) in std::env::vars() {
        if key.starts_with("IDVAULT_") {
            cmd.env_remove(key);
        }
    }
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

struct Server(Child, u16);

impl Server {
    fn wait_ready(&mut self) {
        let deadline = Instant::now() + Duration::from_secs(20);
        while Instant::now() < deadline {
            if reqwest::blocking::get(format!("http://127.0.0.1:{}/healthz", self.1))
                .is_ok_and(|r| r.status() == 200)
            {
                return;
            }
            if let Some(status) = self.0.try_wait().unwrap() {
                panic!("server exited early with {status}");
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        panic!("server did not become ready");
    }

    fn terminate(mut self) -> std::process::ExitStatus {
        Command::new("kill")
            .args(["-TERM", &self.0.id().to_string()])
            .status()
            .unwrap();
        self.0.wait().unwrap()
    }
}

#[test]
fn schema_print_on_empty_registry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(idvault()
        .args(["schema", "print", "--data-dir"])
        .arg(dir.path()));
    assert!(out.status.success(), "{}", stderr(&out));
    let sdl = String::from_utf8(out.stdout).unwrap();
    assert!(sdl.contains("login(input: UsersPermissionsLoginInput!)"));
    assert!(!sdl.contains("type Idcard"));
}

#[test]
fn config_errors_exit_one() {
    let out = run(idvault().args(["serve", "--port", "0", "--jwt-secret", "s"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("port"));

    let dir = tempfile::tempdir().unwrap();
    let out = run(idvault().args(["serve", "--data-dir"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("jwt_secret"), "{}", stderr(&out));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"port\": \"high\"}").unwrap();
    let out = run(idvault().args(["serve", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_exits_two_with_usage() {
    let out = run(idvault().args(["serve", "--frobnicate"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
    let out = run(idvault().args(["schema", "compile"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn admin_create_user_reads_password_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let create = || {
        let mut child = idvault()
            .args([
                "admin",
                "create-user",
                "rina",
                "rina@example.com",
                "--jwt-secret",
                "s",
                "--data-dir",
            ])
            .arg(dir.path())
            .env("IDVAULT_HASH_ITERATIONS", "1000")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        child
            .stdin
            .take()
            .unwrap()
            .write_all(b"correct horse\n")
            .unwrap();
        child.wait_with_output().unwrap()
    };
    let out = create();
    assert!(out.status.success(), "{}", stderr(&out));
    let user: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(user["username"], "rina");
    let again = create();
    assert_eq!(again.status.code(), Some(1));

    let svc = Service::open(
        {
            let mut o = common::options(1000);
            o.data_dir = Some(dir.path().to_path_buf());
            o.auth.jwt_secret = "s".into();
            o
        },
        Arc::new(SystemClock),
    )
    .unwrap();
    use idvault::api::Backend;
    assert!(svc.users().login("rina", "correct horse").is_ok());
}

#[test]
fn verify_run_advances_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let mut o = common::options(1000);
        o.data_dir = Some(dir.path().to_path_buf());
        let svc = Service::open(o, Arc::new(SystemClock)).unwrap();
        use idvault::api::Backend;
        let owner = idvault::auth::Principal::authenticated("someone");
        let asset = svc
            .media()
            .store_media(&common::png(100, 80), "c.png", "image/png")
            .unwrap();
        let declared = common::vars(json!({
            "kind": "DRIVER_LICENSE", "identifier": "D-77", "name": "Wayan",
            "faceTop": 1, "faceLeft": 1, "faceWidth": 30, "faceHeight": 40
        }));
        svc.workflow()
            .create_card(Some(&owner), declared, &asset.id)
            .unwrap()
            .id
    };
    let out = run(idvault()
        .args(["verify", "run", &id, "--data-dir"])
        .arg(dir.path())
        .env("IDVAULT_JWT_SECRET", common::SECRET));
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["statusCode"], "VERIFIED");

    let out = run(idvault()
        .args(["verify", "run", &id, "--data-dir"])
        .arg(dir.path())
        .env("IDVAULT_JWT_SECRET", common::SECRET));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("VERIFIED"));
}

#[test]
fn serve_with_layered_config_and_graceful_stop() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("idvault.json");
    std::fs::write(
        &cfg,
        json!({"port": 0, "jwt_secret": "from-file", "data_dir": dir.path().join("data"), "hash_iterations": 1000}).to_string(),
    )
    .unwrap();
    // the file's port 0 is invalid on its own; the environment fixes it
    let port = free_port();
    let child = idvault()
        .args(["serve", "--config"])
        .arg(&cfg)
        .env("IDVAULT_PORT", port.to_string())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut server = Server(child, port);
    server.wait_ready();
    let client = reqwest::blocking::Client::new();
    let post = |query: &str, variables: Value| -> Value {
        client
            .post(format!("http://127.0.0.1:{port}/graphql"))
            .json(&json!({"query": query, "variables": variables}))
            .send()
            .unwrap()
            .json()
            .unwrap()
    };
    post(
        common::CREATE_USER_LISTING,
        json!({"input": {"username": "x", "email": "x@example.com", "password": "pw123456"}}),
    );
    let body = post(
        common::LOGIN_LISTING,
        json!({"input": {"identifier": "x", "password": "pw123456"}}),
    );
    let jwt = body["data"]["login"]["jwt"].as_str().unwrap();
    // signed with the file's secret
    assert!(idvault::auth::TokenSigner::new("from-file")
        .verify(jwt, chrono::Utc::now().timestamp())
        .is_ok());
    let sdl = client
        .get(format!("http://127.0.0.1:{port}/graphql?sdl"))
        .send()
        .unwrap()
        .text()
        .unwrap();
    assert!(sdl.contains("type Idcard {"));
    let status = server.terminate();
    assert!(status.success(), "{status}");
    assert!(dir.path().join("data/collections/user.journal").exists());
}

#[test]
fn port_already_bound_exits_one() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let out = run(idvault()
        .args([
            "serve",
            "--jwt-secret",
            "s",
            "--port",
            &port.to_string(),
            "--data-dir",
        ])
        .arg(dir.path())
        .env("IDVAULT_HASH_ITERATIONS", "1000"));
    assert_eq!(out.status.code(), Some(1));
}
