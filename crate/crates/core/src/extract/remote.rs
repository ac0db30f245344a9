//! Remote generative-model backend over HTTPS.
//!
//! One POST per call: the request body carries the model id, sampling
//! settings and the prompt (document included) as a single user turn; the
//! response is expected to contain the generated text under
//! `candidates[0].content.parts[*].text` or a top-level `text` field. The
//! API key is read from a configured environment variable at construction
//! time and sent as a bearer token; it never appears in logs or artifacts.
//!
//! HTTP 5xx, 429 and network-level failures are reported as transient so
//! the orchestrator retries them with backoff; other 4xx are fatal.

use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendCallError, BackendConfig, BackendKind, CallRequest, ExtractError};

pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    model_id: String,
    temperature: f64,
    top_p: Option<f64>,
    force_structured_output: bool,
}

impl RemoteBackend {
    /// Builds a remote backend, reading the API key from the environment
    /// variable named in the config.
    pub fn new(config: &BackendConfig) -> Result<Self, ExtractError> {
        let remote = config.remote.as_ref().ok_or_else(|| {
            ExtractError::Backend("remote backend requires a [remote] section".to_string())
        })?;
        let api_key = std::env::var(&remote.credential_env)
            .map_err(|_| ExtractError::MissingCredential(remote.credential_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(remote.timeout_ms))
            .build()
            .map_err(|e| ExtractError::Backend(format!("http client: {e}")))?;
        Ok(RemoteBackend {
            client,
            endpoint: remote.endpoint.clone(),
            api_key,
            model_id: config.model_id.clone(),
            temperature: config.temperature,
            top_p: config.top_p,
            force_structured_output: config.force_structured_output,
        })
    }

    fn request_body(&self, prompt: &str) -> Value {
        let mut generation_config = json!({
            "temperature": self.temperature,
        });
        if let Some(top_p) = self.top_p {
            generation_config["top_p"] = json!(top_p);
        }
        if self.force_structured_output {
            generation_config["response_mime_type"] = json!("application/json");
        }
        json!({
            "model": self.model_id,
            "generation_config": generation_config,
            "contents": [{
                "role": "user",
                "parts": [{"text": prompt}],
            }],
        })
    }
}

/// Pulls the generated text out of a response body.
fn response_text(body: &str) -> Result<String, BackendCallError> {
    let value: Value = serde_json::from_str(body).map_err(|e| {
        BackendCallError::Fatal(format!("response is not valid JSON: {e}"))
    })?;
    if let Some(parts) = value
        .pointer("/candidates/0/content/parts")
        .and_then(Value::as_array)
    {
        let text: String =
            parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect();
        if !text.is_empty() {
            return Ok(text);
        }
    }
    if let Some(text) = value.get("text").and_then(Value::as_str) {
        return Ok(text.to_string());
    }
    Err(BackendCallError::Fatal("response carries no generated text".to_string()))
}

impl Backend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn call(&self, request: &CallRequest<'_>) -> Result<String, BackendCallError> {
        log::debug!(
            "POST {} protocol={} run={} stage={} (authorization: Bearer ***)",
            self.endpoint,
            request.protocol_id,
            request.run_index,
            request.stage.label(),
        );
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&self.request_body(request.prompt))
            .send()
            .map_err(|e| BackendCallError::Transient(format!("network: {e}")))?;

        let status = response.status();
        let body = response
            .text()
            .map_err(|e| BackendCallError::Transient(format!("read body: {e}")))?;
        if status.is_success() {
            response_text(&body)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(BackendCallError::Transient(format!("HTTP {status}")))
        } else {
            let snippet: String = body.chars().take(200).collect();
            Err(BackendCallError::Fatal(format!("HTTP {status}: {snippet}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract, Architecture, ExtractRequest, RemoteConfig, Stage};
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Minimal scripted HTTP server: answers each incoming request with the
    /// next canned (status, body) pair, then records the raw request.
    fn spawn_stub(
        responses: Vec<(u16, String)>,
    ) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = vec![0u8; 65536];
                let mut request = Vec::new();
                loop {
                    let n = stream.read(&mut buf).unwrap();
                    request.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&request);
                    if let Some(header_end) = text.find("\r\n\r\n") {
                        let content_length = text
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if request.len() >= header_end + 4 + content_length {
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                seen.push(String::from_utf8_lossy(&request).to_string());
                let reason = match status {
                    200 => "OK",
                    429 => "Too Many Requests",
                    503 => "Service Unavailable",
                    _ => "Error",
                };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\n\
                     content-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len(),
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
            seen
        });
        (format!("http://{addr}/generate"), handle)
    }

    fn success_body() -> String {
        let payload = r#"{"arms": [{
            "arm_name": "Arm A", "intervention_type": "intervention",
            "contact_days": {"screening": 2, "1_month": 2, "3_months": 4,
                             "6_months": 8, "9_months": 9, "12_months": 10},
            "category_breakdown": {"core_treatment": 8, "imaging_diagnostics": 2,
                                   "labs": 8, "clinic_visits": 10},
            "notes": {}
        }]}"#;
        json!({
            "candidates": [{"content": {"parts": [{"text": payload}]}}]
        })
        .to_string()
    }

    fn remote_config(endpoint: &str, credential_env: &str) -> BackendConfig {
        BackendConfig {
            backend_kind: BackendKind::Remote,
            backoff_base_ms: 1,
            remote: Some(RemoteConfig {
                endpoint: endpoint.to_string(),
                credential_env: credential_env.to_string(),
                timeout_ms: 5_000,
            }),
            ..BackendConfig::default()
        }
    }

    #[test]
    fn missing_credential_fails_construction_with_the_variable_name() {
        let config = remote_config("http://127.0.0.1:1/generate", "SOA_TEST_KEY_UNSET");
        match RemoteBackend::new(&config) {
            Err(ExtractError::MissingCredential(var)) => assert_eq!(var, "SOA_TEST_KEY_UNSET"),
            other => panic!("expected missing credential, got {:?}", other.err().map(|e| e.to_string())),
        }
    }

    #[test]
    fn recovers_from_two_transient_failures() {
        let (endpoint, handle) = spawn_stub(vec![
            (503, "{}".to_string()),
            (429, "{}".to_string()),
            (200, success_body()),
        ]);
        std::env::set_var("SOA_TEST_KEY_FLAKY", "sekrit-token");
        let config = remote_config(&endpoint, "SOA_TEST_KEY_FLAKY");
        let backend = RemoteBackend::new(&config).unwrap();

        let request = ExtractRequest {
            document: "<html>doc</html>",
            protocol_id: "REMOTE-2025-01",
            run_index: 1,
            architecture: Architecture::Vanilla,
        };
        let outcome = extract(&backend, &config, &request).unwrap();
        assert_eq!(outcome.calls[0].attempt_log.len(), 3);
        assert_eq!(outcome.result.arms.len(), 1);

        let requests = handle.join().unwrap();
        assert_eq!(requests.len(), 3);
        // The bearer token goes over the wire but never into call records.
        assert!(requests[2].contains("Bearer sekrit-token") || requests[2].contains("bearer sekrit-token"));
        assert!(!outcome.calls[0].prompt.contains("sekrit-token"));
        assert!(!outcome.calls[0].response.contains("sekrit-token"));
    }

    #[test]
    fn client_errors_are_fatal_and_not_retried() {
        let (endpoint, handle) = spawn_stub(vec![(400, "{\"error\": \"bad\"}".to_string())]);
        std::env::set_var("SOA_TEST_KEY_FATAL", "k");
        let config = remote_config(&endpoint, "SOA_TEST_KEY_FATAL");
        let backend = RemoteBackend::new(&config).unwrap();
        let request = CallRequest {
            protocol_id: "REMOTE-2025-01",
            run_index: 1,
            stage: Stage::Vanilla,
            prompt: "p",
        };
        assert!(matches!(backend.call(&request), Err(BackendCallError::Fatal(_))));
        assert_eq!(handle.join().unwrap().len(), 1);
    }

    #[test]
    fn request_body_carries_model_and_sampling_settings() {
        let (endpoint, handle) = spawn_stub(vec![(200, success_body())]);
        std::env::set_var("SOA_TEST_KEY_BODY", "k");
        let mut config = remote_config(&endpoint, "SOA_TEST_KEY_BODY");
        config.force_structured_output = true;
        config.top_p = Some(0.95);
        let backend = RemoteBackend::new(&config).unwrap();
        let request = CallRequest {
            protocol_id: "REMOTE-2025-01",
            run_index: 1,
            stage: Stage::Vanilla,
            prompt: "count the days",
        };
        backend.call(&request).unwrap();
        let seen = handle.join().unwrap().remove(0);
        assert!(seen.contains("gemini-3-flash-preview"));
        assert!(seen.contains("\"temperature\":0.1"));
        assert!(seen.contains("\"top_p\":0.95"));
        assert!(seen.contains("application/json"));
        assert!(seen.contains("count the days"));
    }

    #[test]
    fn response_text_handles_both_shapes() {
        let gemini_shape = success_body();
        assert!(response_text(&gemini_shape).unwrap().contains("arm_name"));
        let flat = json!({"text": "{\"arms\": []}"}).to_string();
        assert_eq!(response_text(&flat).unwrap(), "{\"arms\": []}");
        assert!(response_text("{}").is_err());
        assert!(response_text("not json").is_err());
    }
}
