//! Starts the HTTP service on an ephemeral port and calls it like the web
//! front end does.

use std::future::IntoFuture;
use std::time::Duration;

use probmission::service::{router, ServiceConfig};
use serde_json::{json, Value};

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(axum::serve(listener, router(ServiceConfig::default())?).into_future());

    let f = probmission::scenario::ScenarioFixture::builtin("park")?;
    let body = json!({
        "map_ref": "park",
        "mapping": serde_json::from_str::<Value>(&std::fs::read_to_string(&f.mapping)?)?,
        "error_model": serde_json::from_str::<Value>(&std::fs::read_to_string(&f.errors)?)?,
        "rules": std::fs::read_to_string(&f.rules)?,
        "grid": f.grid.with_resolution(8, 8)?,
        "params": {"sample_count": 300, "seed": 3},
    });
    let reply = tokio::task::spawn_blocking(move || -> Result<_, ureq::Error> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        let post = |path: &str, v: Value| -> Result<String, ureq::Error> {
            agent
                .post(format!("{base}{path}"))
                .header("content-type", "application/json")
                .send(v.to_string())?
                .into_body()
                .read_to_string()
        };
        Ok((post("/api/parse", json!({"rules": "a :- b(.\n"}))?, post("/api/pml", body)?))
    })
    .await??;
    println!("parse: {}", reply.0);
    let l: Value = serde_json::from_str(&reply.1)?;
    println!("pml: {} values, db hash {}", l["values"].as_array().map_or(0, Vec::len), l["metadata"]["db_hash"]);
    Ok(())
}
