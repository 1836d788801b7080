use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{BackendConfig, BackendError, ModelRequest, ModelResponse, Transport, TransportError, Usage};

/// OpenAI-compatible chat-completions transport.
pub struct HttpTransport {
    endpoint: String,
    model: String,
    api_key: String,
    backend_id: String,
    extra_body: Option<Value>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl HttpTransport {
    pub fn new(cfg: &BackendConfig, api_key: String) -> Result<Self, BackendError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Config(format!("profile `{}` has no endpoint", cfg.name)))?;
        let model = cfg
            .model
            .clone()
            .ok_or_else(|| BackendError::Config(format!("profile `{}` has no model", cfg.name)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s.max(1.0))))
            .build()
            .into();
        Ok(HttpTransport {
            endpoint,
            backend_id: format!("{}:{}", cfg.name, model),
            model,
            api_key,
            extra_body: cfg.extra_body.clone(),
            agent,
        })
    }
}

/// Request body with images inlined as base64 data URLs ahead of the prompt.
pub fn chat_payload(req: &ModelRequest, model: &str, extra: Option<&Value>) -> Value {
    let mut content: Vec<Value> = req
        .images
        .iter()
        .map(|img| {
            let b64 = base64::engine::general_purpose::STANDARD.encode(&img.bytes);
            json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{};base64,{}", img.mime, b64)}
            })
        })
        .collect();
    content.push(json!({"type": "text", "text": req.prompt}));
    let mut body = json!({
        "model": model,
        "messages": [{"role": "user", "content": content}],
        "max_tokens": req.params.max_tokens,
        "temperature": req.params.temperature,
    });
    if let (Some(Value::Object(extra)), Value::Object(map)) = (extra, &mut body) {
        for (k, v) in extra {
            map.insert(k.clone(), v.clone());
        }
    }
    body
}

pub fn parse_chat_response(body: &Value, backend_id: &str) -> Result<ModelResponse, TransportError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| TransportError::Fatal("response has no choices".into()))?;
    let message = choice.get("message").unwrap_or(&Value::Null);
    let text = match message.get("content") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(parts)) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        _ => String::new(),
    };
    let refusal = message.get("refusal").is_some_and(|r| !r.is_null())
        || choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter");
    let usage = body.get("usage").map_or(Usage::default(), |u| Usage {
        prompt_tokens: u.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        completion_tokens: u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    });
    Ok(ModelResponse {
        text,
        usage,
        backend_id: backend_id.to_string(),
        refusal,
    })
}

fn classify(err: ureq::Error) -> TransportError {
    match err {
        ureq::Error::StatusCode(code @ (408 | 429 | 500..=599)) => {
            TransportError::Transient(format!("HTTP {code}"))
        }
        ureq::Error::StatusCode(code) => TransportError::Fatal(format!("HTTP {code}")),
        e @ (ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed) => {
            TransportError::Transient(e.to_string())
        }
        e => TransportError::Fatal(e.to_string()),
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &ModelRequest) -> Result<ModelResponse, TransportError> {
        let body = chat_payload(req, &self.model, self.extra_body.as_ref());
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(classify)?;
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Transient(format!("unreadable body: {e}")))?;
        parse_chat_response(&value, &self.backend_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{DecodeParams, ImageInput};

    #[test]
    fn payload_inlines_images_before_prompt() {
        let req = ModelRequest::vision(
            "describe",
            vec![ImageInput {
                time_s: 0.0,
                mime: "image/png".into(),
                bytes: vec![1, 2, 3],
            }],
            DecodeParams::default(),
        );
        let body = chat_payload(&req, "m", Some(&json!({"top_p": 0.5})));
        let content = &body["messages"][0]["content"];
        assert_eq!(content[0]["image_url"]["url"], "data:image/png;base64,AQID");
        assert_eq!(content[1]["text"], "describe");
        assert_eq!(body["top_p"], 0.5);
        assert_eq!(body["temperature"], 0.0);
    }

    #[test]
    fn parses_string_and_part_content() {
        let r = parse_chat_response(
            &json!({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}),
            "b",
        )
        .unwrap();
        assert_eq!((r.text.as_str(), r.usage.prompt_tokens, r.refusal), ("hi", 3, false));
        let r = parse_chat_response(
            &json!({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]}),
            "b",
        )
        .unwrap();
        assert_eq!(r.text, "ab");
        let r = parse_chat_response(
            &json!({"choices":[{"message":{"content":null,"refusal":"no"}}]}),
            "b",
        )
        .unwrap();
        assert!(r.refusal);
        assert!(parse_chat_response(&json!({}), "b").is_err());
    }
}
