use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::Value;

use super::endpoint::{chat_request_body, extract_completion, EndpointConfig};
use crate::error::{Error, Result};

fn complete_one(client: &Client, cfg: &EndpointConfig, token: Option<&str>, prompt: &str) -> Result<String> {
    let body = chat_request_body(cfg, prompt);
    let mut backoff = Duration::from_millis(500);
    for attempt in 0..=cfg.max_retries {
        let mut req = client.post(cfg.chat_url()).json(&body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| Error::Endpoint(e.to_string()))?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS && attempt < cfg.max_retries {
            thread::sleep(backoff);
            backoff *= 2;
            continue;
        }
        if !status.is_success() {
            return Err(Error::Endpoint(format!("server answered {status}")));
        }
        let json: Value = resp.json().map_err(|e| Error::Endpoint(e.to_string()))?;
        return extract_completion(&json);
    }
    Err(Error::Endpoint("rate limited on every attempt".into()))
}

/// Sends every prompt with at most `max_concurrent` requests in flight.
/// Results come back in prompt order.
pub fn complete_all(cfg: &EndpointConfig, prompts: &[String]) -> Result<Vec<Result<String>>> {
    cfg.validate()?;
    let token = cfg.token()?;
    let client = Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| Error::Endpoint(e.to_string()))?;
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<String>>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..cfg.max_concurrent.min(prompts.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(p) = prompts.get(i) else { break };
                let r = complete_one(&client, cfg, token.as_deref(), p);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every prompt is visited"))
        .collect())
}
