//! Serve the HTTP API with one generated dataset loaded.
//!
//! cargo run --example serve -- 8080

use std::sync::Arc;

use cfguide::server::router;
use cfguide::session::SessionStore;
use cfguide::{default_study_spec, generate};

#[tokio::main]
async fn main() {
    let port: u16 = std::env::args().nth(1).map_or(0, |p| p.parse().expect("port"));
    let store = SessionStore::in_memory();
    let (d, truth) = generate(&default_study_spec(), 1000).unwrap();
    let info = store.add_dataset(d, Some(truth)).unwrap();

    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await.unwrap();
    let addr = listener.local_addr().unwrap();
    println!("dataset {} on http://{addr}", info.id);
    println!("try: curl -X POST http://{addr}/sessions -H 'content-type: application/json' -d '{{\"dataset\":\"{}\",\"mode\":\"cf\"}}'", info.id);
    axum::serve(listener, router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .unwrap();
}
