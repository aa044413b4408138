#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use idvault::clock::SystemClock;
use idvault::gateway;
use idvault::service::{Service, ServiceOptions};
use idvault::Values;
use serde_json::Value;
use tokio::sync::oneshot;

/// Reference registration document; whitespace is significant for position tests.
pub const CREATE_USER_LISTING: &str = "mutation createUser(
 $input: createUserInput
) {
 createUser(
  input: $input
 ) {
    user {
      username
      email
    }
  }
}";

/// Reference login document.
pub const LOGIN_LISTING: &str = "mutation Login(
 $input: UsersPermissionsLoginInput!
 ) {
  login(
   input: $input
  ) {
    jwt
    user {
      username
      email
    }
  }
}";

pub const SECRET: &str = "integration-test-secret";

pub fn options(iterations: u32) -> ServiceOptions {
    let mut o = ServiceOptions::new(SECRET);
    o.auth.hash_iterations = iterations;
    o
}

/// In-memory service with a cheap password hash.
pub fn service() -> Service {
    Service::open(options(1_000), Arc::new(SystemClock)).unwrap()
}

pub fn vars(v: Value) -> Values {
    match v {
        Value::Object(map) => map,
        other => panic!("not an object: {other}"),
    }
}

pub fn png(width: u32, height: u32) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    image::RgbImage::from_pixel(width, height, image::Rgb([200, 180, 160]))
        .write_to(&mut out, image::ImageFormat::Png)
        .unwrap();
    out.into_inner()
}

pub fn register(svc: &Service, username: &str, password: &str) -> String {
    let r = svc.execute(
        CREATE_USER_LISTING,
        &vars(serde_json::json!({"input": {"username": username, "email": format!("{username}@example.com"), "password": password}})),
        None,
        None,
    );
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    let r = svc.execute(
        LOGIN_LISTING,
        &vars(serde_json::json!({"input": {"identifier": username, "password": password}})),
        None,
        None,
    );
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    r.data.unwrap()["login"]["jwt"]
        .as_str()
        .unwrap()
        .to_string()
}

/// A gateway on an ephemeral loopback port, running on its own runtime thread.
pub struct TestServer {
    pub addr: SocketAddr,
    pub service: Arc<Service>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn start(service: Service, cors: &[&str]) -> TestServer {
        let service = Arc::new(service);
        let cors: Vec<String> = cors.iter().map(|s| s.to_string()).collect();
        let router = gateway::router(service.clone(), &cors);
        let (stop, stopped) = oneshot::channel::<()>();
        let (ready, addr) = std::sync::mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                ready.send(listener.local_addr().unwrap()).unwrap();
                gateway::serve_on(listener, router, async {
                    let _ = stopped.await;
                })
                .await
                .unwrap();
            });
        });
        TestServer {
            addr: addr.recv().unwrap(),
            service,
            stop: Some(stop),
            thread: Some(thread),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

pub mod fidelity;
pub mod lifecycle;
pub mod querygen;
pub mod store_model;
