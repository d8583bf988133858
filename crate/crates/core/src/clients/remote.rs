use super::{
    assemble_prompt_from_str, inspection_prompt, ClientError, Concern, InspectionReport, InspectorClient,
    InspectorResponse, PlannerClient, PlannerResponse, ReplanContext, DEFAULT_TEMPLATE,
};
use crate::plan::MissionRequest;
use crate::world::SceneObservation;
use serde::Deserialize;
use serde_json::{json, Value};
use std::fmt;
use std::time::{Duration, Instant};

/// Where the auth token comes from. The token itself is never stored in a
/// config read from the environment and never printed.
#[derive(Clone, PartialEq, Eq)]
pub enum Credential {
    /// Name of an environment variable read at call time.
    Env(String),
    Inline(String),
}

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Credential::Env(var) => write!(f, "Env({var})"),
            Credential::Inline(_) => f.write_str("Inline(<redacted>)"),
        }
    }
}

impl Credential {
    fn token(&self) -> Result<String, ClientError> {
        match self {
            Credential::Env(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Ok(v),
                _ => Err(ClientError::AuthMissing(var.clone())),
            },
            Credential::Inline(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub model: String,
    pub credential: Credential,
    pub timeout: Duration,
    pub retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>, credential: Credential) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            credential,
            timeout: Duration::from_secs(60),
            retries: 2,
            backoff: Duration::from_millis(500),
        }
    }

    /// Read `<PREFIX>_URL`, `<PREFIX>_MODEL` and optional `<PREFIX>_TIMEOUT_S`,
    /// `<PREFIX>_RETRIES`. The token variable `<PREFIX>_API_KEY` is only read
    /// when a request is sent.
    pub fn from_env(prefix: &str) -> Result<Self, ClientError> {
        let var = |name: &str| format!("{prefix}_{name}");
        let required = |name: &str| std::env::var(var(name)).map_err(|_| ClientError::NotConfigured(var(name)));
        let mut config = Self::new(required("URL")?, required("MODEL")?, Credential::Env(var("API_KEY")));
        if let Some(t) = std::env::var(var("TIMEOUT_S")).ok().and_then(|s| s.parse::<f64>().ok()) {
            config.timeout = Duration::from_secs_f64(t.max(0.001));
        }
        if let Some(r) = std::env::var(var("RETRIES")).ok().and_then(|s| s.parse().ok()) {
            config.retries = r;
        }
        Ok(config)
    }

    /// Whether the endpoint variables for `prefix` are present.
    pub fn env_present(prefix: &str) -> bool {
        ["URL", "MODEL", "API_KEY"].iter().all(|n| std::env::var(format!("{prefix}_{n}")).is_ok_and(|v| !v.is_empty()))
    }
}

/// Blocking chat-completion endpoint with retry and exponential backoff.
#[derive(Debug, Clone)]
pub struct ChatEndpoint {
    config: RemoteConfig,
    http: reqwest::blocking::Client,
}

fn is_loopback(url: &str) -> bool {
    let host = url.split("://").nth(1).unwrap_or(url);
    host.starts_with("127.") || host.starts_with("localhost") || host.starts_with("[::1]")
}

impl ChatEndpoint {
    pub fn new(config: RemoteConfig) -> Result<Self, ClientError> {
        let mut builder = reqwest::blocking::Client::builder().timeout(config.timeout);
        if is_loopback(&config.url) {
            builder = builder.no_proxy();
        }
        let http = builder.build().map_err(|e| ClientError::InvalidResponse(format!("http client: {e}")))?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Send one system + user exchange and return the assistant text with
    /// the wall-clock latency of the whole call, retries included.
    pub fn complete(&self, system: &str, user: &str) -> Result<(String, Duration), ClientError> {
        let token = self.config.credential.token()?;
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let started = Instant::now();
        let mut attempt = 0u32;
        loop {
            tracing::debug!(url = %self.config.url, model = %self.config.model, attempt, "chat completion request");
            let result = self.http.post(&self.config.url).bearer_auth(&token).json(&body).send();
            let retryable = match result {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let value: Value = resp.json().map_err(|e| ClientError::InvalidResponse(e.to_string()))?;
                        let text = value
                            .pointer("/choices/0/message/content")
                            .and_then(Value::as_str)
                            .ok_or_else(|| ClientError::InvalidResponse("missing choices[0].message.content".into()))?;
                        return Ok((text.to_string(), started.elapsed()));
                    }
                    let code = status.as_u16();
                    if code != 429 && !status.is_server_error() {
                        return Err(ClientError::HttpStatus(code));
                    }
                    ClientError::HttpStatus(code)
                }
                Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => ClientError::Timeout,
                Err(e) => return Err(ClientError::InvalidResponse(e.to_string())),
            };
            if attempt >= self.config.retries {
                return Err(retryable);
            }
            std::thread::sleep(self.config.backoff * 2u32.saturating_pow(attempt));
            attempt += 1;
        }
    }
}

/// Strip a surrounding Markdown code fence, if the model added one.
pub(crate) fn strip_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(inner) = t.strip_prefix("```") else {
        return t;
    };
    let inner = inner.split_once('\n').map_or("", |(_, rest)| rest);
    inner.strip_suffix("```").unwrap_or(inner).trim()
}

pub struct RemotePlanner {
    endpoint: ChatEndpoint,
    template: String,
}

impl RemotePlanner {
    pub fn new(config: RemoteConfig) -> Result<Self, ClientError> {
        Ok(Self { endpoint: ChatEndpoint::new(config)?, template: DEFAULT_TEMPLATE.to_string() })
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = template.into();
        self
    }
}

impl PlannerClient for RemotePlanner {
    fn label(&self) -> &str {
        &self.endpoint.config.model
    }

    fn plan(&self, request: &MissionRequest, replan: Option<&ReplanContext>) -> Result<PlannerResponse, ClientError> {
        let bundle = assemble_prompt_from_str(request, &self.template)?;
        let user = match replan {
            Some(ctx) => format!("{}\n\n{}", bundle.user_prompt, ctx.describe()),
            None => bundle.user_prompt,
        };
        let (text, latency) = self.endpoint.complete(&bundle.system_prompt, &user)?;
        Ok(PlannerResponse { document: strip_fence(&text).to_string(), latency })
    }
}

const INSPECTOR_SYSTEM: &str = "You are the inspection module of a USV-UAV port inspection system. \
You receive the camera context of one robot and a list of inspection queries. \
Reply with a single JSON object with the fields \"basic\" (short scene summary), \
\"detailed\" (detailed analysis), \"concerns\" (list of objects with \"text\" and \"severity\" \
in low, medium, high) and \"answers\" (one answer per query, in order).";

#[derive(Deserialize)]
struct WireReport {
    basic: String,
    detailed: String,
    #[serde(default)]
    concerns: Vec<Concern>,
    #[serde(default)]
    answers: Vec<String>,
}

pub struct RemoteInspector {
    endpoint: ChatEndpoint,
}

impl RemoteInspector {
    pub fn new(config: RemoteConfig) -> Result<Self, ClientError> {
        Ok(Self { endpoint: ChatEndpoint::new(config)? })
    }
}

/// Text rendering of an observation for text-only endpoints.
fn describe_observation(obs: &SceneObservation) -> String {
    let mut out = format!(
        "Camera of the {} at ({:.1}, {:.1}, {:.1}), heading {:.0} deg.",
        obs.observer,
        obs.pose.x,
        obs.pose.y,
        obs.pose.z,
        obs.pose.psi.to_degrees()
    );
    for e in &obs.visible {
        out.push_str(&format!("\nVisible: {} at {:.1} m, bearing {:.0} deg", e.label, e.range, e.bearing.to_degrees()));
        if let (Some(l), Some(s)) = (&e.landmark, e.side) {
            out.push_str(&format!(", {} side of the {l}", s.as_str()));
        }
    }
    out
}

impl InspectorClient for RemoteInspector {
    fn label(&self) -> &str {
        &self.endpoint.config.model
    }

    fn inspect(&self, observation: &SceneObservation, queries: &[String], context: &str) -> Result<InspectorResponse, ClientError> {
        let prompt = inspection_prompt(queries, context);
        let user = format!("{}\n{prompt}", describe_observation(observation));
        let (text, latency) = self.endpoint.complete(INSPECTOR_SYSTEM, &user)?;
        let wire: WireReport =
            serde_json::from_str(strip_fence(&text)).map_err(|e| ClientError::InvalidResponse(e.to_string()))?;
        let report = InspectionReport {
            prompt,
            basic: wire.basic,
            detailed: wire.detailed,
            concerns: wire.concerns,
            answers: wire.answers,
            tick: observation.frame_id,
            robot: observation.observer,
            pose: observation.pose,
        };
        Ok(InspectorResponse { report, latency })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::{MockReply, MockServer};
    use crate::world::WorldState;

    fn config(url: String, retries: u32) -> RemoteConfig {
        let mut c = RemoteConfig::new(url, "mock-model", Credential::Inline("secret-token".into()));
        c.retries = retries;
        c.backoff = Duration::from_millis(1);
        c.timeout = Duration::from_secs(5);
        c
    }

    fn request() -> MissionRequest {
        let world = WorldState::default_port();
        MissionRequest::new("Inspect the crane.", world.env_description(), world.scene.knowledge.clone())
    }

    #[test]
    fn mock_round_trip() {
        let doc = r#"{"mission_id":"m","steps":[]}"#;
        let server = MockServer::start(vec![MockReply::chat(doc)]).unwrap();
        let planner = RemotePlanner::new(config(server.url(), 0)).unwrap();
        let resp = planner.plan(&request(), None).unwrap();
        assert_eq!(resp.document, doc);
        assert!(resp.latency > Duration::ZERO);
        let seen = server.requests();
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].authorization.as_deref(), Some("Bearer secret-token"));
        let body: Value = serde_json::from_str(&seen[0].body).unwrap();
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "Inspect the crane.");
    }

    #[test]
    fn retries_on_server_error() {
        let server =
            MockServer::start(vec![MockReply::status(503), MockReply::status(429), MockReply::chat("{}")]).unwrap();
        let planner = RemotePlanner::new(config(server.url(), 2)).unwrap();
        assert_eq!(planner.plan(&request(), None).unwrap().document, "{}");
        assert_eq!(server.requests().len(), 3);
    }

    #[test]
    fn client_error_not_retried() {
        let server = MockServer::start(vec![MockReply::status(401)]).unwrap();
        let planner = RemotePlanner::new(config(server.url(), 3)).unwrap();
        assert_eq!(planner.plan(&request(), None).unwrap_err(), ClientError::HttpStatus(401));
        assert_eq!(server.requests().len(), 1);
    }

    #[test]
    fn retries_exhausted_reports_status() {
        let server = MockServer::start(vec![MockReply::status(500)]).unwrap();
        let planner = RemotePlanner::new(config(server.url(), 1)).unwrap();
        assert_eq!(planner.plan(&request(), None).unwrap_err(), ClientError::HttpStatus(500));
        assert_eq!(server.requests().len(), 2);
    }

    #[test]
    fn unreachable_endpoint_times_out() {
        let port = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let planner = RemotePlanner::new(config(format!("http://127.0.0.1:{port}/v1/chat/completions"), 0)).unwrap();
        assert_eq!(planner.plan(&request(), None).unwrap_err(), ClientError::Timeout);
    }

    #[test]
    fn missing_token_fails_before_io() {
        let server = MockServer::start(vec![MockReply::chat("{}")]).unwrap();
        let mut c = config(server.url(), 0);
        c.credential = Credential::Env("PORTWATCH_TEST_TOKEN_THAT_IS_NEVER_SET".into());
        let planner = RemotePlanner::new(c).unwrap();
        assert_eq!(
            planner.plan(&request(), None).unwrap_err(),
            ClientError::AuthMissing("PORTWATCH_TEST_TOKEN_THAT_IS_NEVER_SET".into())
        );
        assert!(server.requests().is_empty());
    }

    #[test]
    fn token_never_in_debug_output() {
        let c = config("http://127.0.0.1:1".into(), 0);
        assert!(!format!("{c:?}").contains("secret-token"));
        let endpoint = ChatEndpoint::new(c).unwrap();
        assert!(!format!("{endpoint:?}").contains("secret-token"));
    }

    #[test]
    fn fences_stripped() {
        assert_eq!(strip_fence("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_fence("  {\"a\":1} "), "{\"a\":1}");
    }

    #[test]
    fn remote_inspector_parses_report() {
        let content = r#"{"basic":"One truck.","detailed":"A truck near the crane.","concerns":[{"text":"vehicle near crane","severity":"high"}],"answers":["Yes, a truck near the crane."]}"#;
        let server = MockServer::start(vec![MockReply::chat(content)]).unwrap();
        let inspector = RemoteInspector::new(config(server.url(), 0)).unwrap();
        let world = WorldState::default_port();
        let obs = world.observe(crate::plan::Robot::Usv);
        let resp = inspector.inspect(&obs, &["Is there any vehicle near the crane?".into()], "").unwrap();
        assert_eq!(resp.report.concerns.len(), 1);
        assert_eq!(resp.report.answers.len(), 1);
    }
}
