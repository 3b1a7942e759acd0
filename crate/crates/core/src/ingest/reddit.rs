//! Thin Reddit listing client: OAuth2 client-credentials, paginated `/new`
//! listings, a global request rate limit and backoff on HTTP 429.

use std::time::{Duration, Instant};

use base64::Engine;
use serde::Deserialize;

use super::{IngestConfig, RawPost};
use crate::{Error, Result};

pub const TOKEN_URL: &str = "https://www.reddit.com/api/v1/access_token";
pub const API_BASE: &str = "https://oauth.reddit.com";
pub const BACKOFF_BASE: Duration = Duration::from_secs(2);
pub const MAX_RETRIES: u32 = 5;
const PAGE_SIZE: usize = 100;

#[derive(Clone, PartialEq, Eq)]
pub struct Credentials {
    pub client_id: String,
    pub client_secret: String,
    pub user_agent: String,
}

impl std::fmt::Debug for Credentials {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Credentials")
            .field("client_id", &self.client_id)
            .field("client_secret", &"<redacted>")
            .field("user_agent", &self.user_agent)
            .finish()
    }
}

impl Credentials {
    /// Read `REDDIT_CLIENT_ID`, `REDDIT_CLIENT_SECRET` and optionally
    /// `REDDIT_USER_AGENT`.
    pub fn from_env() -> Result<Self> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        match (var("REDDIT_CLIENT_ID"), var("REDDIT_CLIENT_SECRET")) {
            (Some(client_id), Some(client_secret)) => Ok(Credentials {
                client_id,
                client_secret,
                user_agent: var("REDDIT_USER_AGENT").unwrap_or_else(|| "sabia-ingest/0.1".into()),
            }),
            _ => Err(Error::Auth(
                "live mode needs REDDIT_CLIENT_ID and REDDIT_CLIENT_SECRET in the environment".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// The only network surface of the ingest module.
pub trait HttpClient {
    fn get(&mut self, url: &str, headers: &[(&str, &str)]) -> Result<HttpResponse>;
    fn post_form(&mut self, url: &str, headers: &[(&str, &str)], form: &[(&str, &str)]) -> Result<HttpResponse>;
}

pub trait Sleeper {
    fn sleep(&mut self, d: Duration);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

pub struct UreqClient {
    agent: ureq::Agent,
}

impl UreqClient {
    pub fn new() -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build();
        UreqClient { agent: config.into() }
    }
}

impl Default for UreqClient {
    fn default() -> Self {
        Self::new()
    }
}

fn read_response(resp: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<HttpResponse> {
    let mut resp = resp.map_err(|e| Error::Http(e.to_string()))?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(|e| Error::Http(e.to_string()))?;
    Ok(HttpResponse { status, body })
}

impl HttpClient for UreqClient {
    fn get(&mut self, url: &str, headers: &[(&str, &str)]) -> Result<HttpResponse> {
        let mut req = self.agent.get(url);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        read_response(req.call())
    }

    fn post_form(&mut self, url: &str, headers: &[(&str, &str)], form: &[(&str, &str)]) -> Result<HttpResponse> {
        let mut req = self.agent.post(url);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        read_response(req.send_form(form.iter().copied()))
    }
}

/// Spaces requests at least `60 / per_minute` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    last: Option<Instant>,
}

impl RateLimiter {
    pub fn per_minute(n: u32) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(60.0 / n.max(1) as f64),
            last: None,
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    pub fn wait(&mut self, sleeper: &mut dyn Sleeper) {
        if let Some(last) = self.last {
            let elapsed = last.elapsed();
            if elapsed < self.interval {
                sleeper.sleep(self.interval - elapsed);
            }
        }
        self.last = Some(Instant::now());
    }
}

#[derive(Deserialize)]
struct TokenResponse {
    access_token: String,
}

#[derive(Deserialize)]
struct Listing {
    data: ListingData,
}

#[derive(Deserialize)]
struct ListingData {
    after: Option<String>,
    children: Vec<Child>,
}

#[derive(Deserialize)]
struct Child {
    data: ChildPost,
}

#[derive(Deserialize)]
struct ChildPost {
    id: String,
    #[serde(default)]
    subreddit: String,
    created_utc: f64,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    selftext: String,
}

pub struct RedditClient<H, S> {
    http: H,
    sleeper: S,
    credentials: Credentials,
    limiter: RateLimiter,
    token: Option<String>,
}

impl<H: HttpClient, S: Sleeper> RedditClient<H, S> {
    pub fn new(http: H, sleeper: S, credentials: Credentials, rate_limit: u32) -> Self {
        RedditClient {
            http,
            sleeper,
            credentials,
            limiter: RateLimiter::per_minute(rate_limit),
            token: None,
        }
    }

    pub fn into_parts(self) -> (H, S) {
        (self.http, self.sleeper)
    }

    /// Send one request through the rate limiter, retrying 429 and 5xx with
    /// exponential backoff.
    fn send(&mut self, mut request: impl FnMut(&mut H) -> Result<HttpResponse>) -> Result<HttpResponse> {
        let mut attempt = 0;
        loop {
            self.limiter.wait(&mut self.sleeper);
            let resp = request(&mut self.http)?;
            let retryable = resp.status == 429 || (500..600).contains(&resp.status);
            if !retryable {
                return Ok(resp);
            }
            if attempt == MAX_RETRIES {
                return Err(Error::RetryExhausted {
                    attempts: attempt + 1,
                    status: resp.status,
                });
            }
            let delay = BACKOFF_BASE * 2u32.pow(attempt);
            log::warn!("HTTP {}; retrying in {:?}", resp.status, delay);
            self.sleeper.sleep(delay);
            attempt += 1;
        }
    }

    pub fn authenticate(&mut self) -> Result<()> {
        let basic = base64::engine::general_purpose::STANDARD.encode(format!(
            "{}:{}",
            self.credentials.client_id, self.credentials.client_secret
        ));
        let auth = format!("Basic {basic}");
        let ua = self.credentials.user_agent.clone();
        let resp = self.send(|h| {
            h.post_form(
                TOKEN_URL,
                &[("Authorization", &auth), ("User-Agent", &ua)],
                &[("grant_type", "client_credentials")],
            )
        })?;
        if resp.status != 200 {
            return Err(Error::Auth(format!("token endpoint returned HTTP {}", resp.status)));
        }
        let token: TokenResponse =
            serde_json::from_str(&resp.body).map_err(|e| Error::Auth(format!("bad token response: {e}")))?;
        self.token = Some(token.access_token);
        Ok(())
    }

    /// Walk `/r/{sub}/new` newest first until the page cap, the end of the
    /// listing, or posts older than the window start.
    pub fn fetch_subreddit(&mut self, sub: &str, config: &IngestConfig) -> Result<Vec<RawPost>> {
        if self.token.is_none() {
            self.authenticate()?;
        }
        let auth = format!("Bearer {}", self.token.as_deref().unwrap_or_default());
        let ua = self.credentials.user_agent.clone();
        let mut out = Vec::new();
        let mut after: Option<String> = None;
        for _ in 0..config.max_pages {
            let mut url = format!("{API_BASE}/r/{sub}/new?limit={PAGE_SIZE}&raw_json=1");
            if let Some(a) = &after {
                url.push_str("&after=");
                url.push_str(a);
            }
            let resp = self.send(|h| h.get(&url, &[("Authorization", &auth), ("User-Agent", &ua)]))?;
            match resp.status {
                200 => {}
                401 | 403 => return Err(Error::Auth(format!("{url} returned HTTP {}", resp.status))),
                s => return Err(Error::Http(format!("{url} returned HTTP {s}"))),
            }
            let listing: Listing =
                serde_json::from_str(&resp.body).map_err(|e| Error::Http(format!("{url}: malformed listing: {e}")))?;
            let mut reached_start = false;
            for child in listing.data.children {
                let p = child.data;
                let created = p.created_utc as i64;
                reached_start |= created < config.window_start;
                out.push(RawPost {
                    id: p.id,
                    subreddit: if p.subreddit.is_empty() { sub.to_string() } else { p.subreddit },
                    created_utc: created,
                    title: p.title,
                    text: p.selftext,
                });
            }
            after = listing.data.after;
            if after.is_none() || reached_start {
                break;
            }
        }
        Ok(out)
    }

    /// Fetch every configured subreddit in order. Any failure discards the
    /// partial results.
    pub fn collect(&mut self, config: &IngestConfig) -> Result<Vec<RawPost>> {
        let mut all = Vec::new();
        for sub in &config.subreddits {
            all.extend(self.fetch_subreddit(sub, config)?);
        }
        Ok(all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[derive(Default)]
    struct Scripted {
        replies: VecDeque<HttpResponse>,
        urls: Vec<String>,
    }

    impl Scripted {
        fn reply(mut self, status: u16, body: &str) -> Self {
            self.replies.push_back(HttpResponse {
                status,
                body: body.to_string(),
            });
            self
        }
        fn next(&mut self, url: &str) -> Result<HttpResponse> {
            self.urls.push(url.to_string());
            Ok(self.replies.pop_front().expect("script ran out"))
        }
    }

    impl HttpClient for Scripted {
        fn get(&mut self, url: &str, _: &[(&str, &str)]) -> Result<HttpResponse> {
            self.next(url)
        }
        fn post_form(&mut self, url: &str, _: &[(&str, &str)], _: &[(&str, &str)]) -> Result<HttpResponse> {
            self.next(url)
        }
    }

    #[derive(Default)]
    struct Recorder(Vec<Duration>);

    impl Sleeper for Recorder {
        fn sleep(&mut self, d: Duration) {
            self.0.push(d);
        }
    }

    fn creds() -> Credentials {
        Credentials {
            client_id: "id".into(),
            client_secret: "secret".into(),
            user_agent: "test".into(),
        }
    }

    const TOKEN: &str = r#"{"access_token":"tok","expires_in":3600}"#;

    fn page(after: Option<&str>, posts: &[(&str, i64)]) -> String {
        let children: Vec<String> = posts
            .iter()
            .map(|(id, t)| {
                format!(r#"{{"kind":"t3","data":{{"id":"{id}","subreddit":"opiates","created_utc":{t}.0,"title":"T","selftext":"heroin"}}}}"#)
            })
            .collect();
        let after = after.map_or("null".to_string(), |a| format!("\"{a}\""));
        format!(r#"{{"data":{{"after":{after},"children":[{}]}}}}"#, children.join(","))
    }

    fn config() -> IngestConfig {
        IngestConfig {
            subreddits: vec!["opiates".into()],
            window_start: 100,
            window_end: 1000,
            ..IngestConfig::default()
        }
    }

    #[test]
    fn paginates_until_window_start() {
        let http = Scripted::default()
            .reply(200, TOKEN)
            .reply(200, &page(Some("t3_b"), &[("a", 500), ("b", 400)]))
            .reply(200, &page(Some("t3_d"), &[("c", 300), ("d", 50)]))
            .reply(200, &page(None, &[("e", 10)]));
        let mut client = RedditClient::new(http, Recorder::default(), creds(), 600_000);
        let posts = client.collect(&config()).unwrap();
        assert_eq!(posts.len(), 4);
        assert_eq!(posts[0].title.as_deref(), Some("T"));
        let (http, _) = client.into_parts();
        assert_eq!(http.urls.len(), 3);
        assert!(http.urls[2].ends_with("&after=t3_b"));
    }

    #[test]
    fn backoff_doubles_then_succeeds() {
        let http = Scripted::default()
            .reply(200, TOKEN)
            .reply(429, "")
            .reply(429, "")
            .reply(200, &page(None, &[("a", 500)]));
        let mut client = RedditClient::new(http, Recorder::default(), creds(), 600_000);
        assert_eq!(client.collect(&config()).unwrap().len(), 1);
        let (_, sleeper) = client.into_parts();
        let backoffs: Vec<Duration> = sleeper.0.into_iter().filter(|d| *d >= BACKOFF_BASE).collect();
        assert_eq!(backoffs, vec![Duration::from_secs(2), Duration::from_secs(4)]);
    }

    #[test]
    fn retry_exhaustion_reports_status() {
        let mut http = Scripted::default().reply(200, TOKEN);
        for _ in 0..=MAX_RETRIES {
            http = http.reply(429, "");
        }
        let mut client = RedditClient::new(http, Recorder::default(), creds(), 600_000);
        match client.collect(&config()) {
            Err(Error::RetryExhausted { attempts, status }) => {
                assert_eq!(attempts, MAX_RETRIES + 1);
                assert_eq!(status, 429);
            }
            other => panic!("unexpected {other:?}"),
        }
        let (_, sleeper) = client.into_parts();
        let total: Duration = sleeper.0.iter().filter(|d| **d >= BACKOFF_BASE).sum();
        assert_eq!(total, Duration::from_secs(2 + 4 + 8 + 16 + 32));
    }

    #[test]
    fn auth_failure() {
        let http = Scripted::default().reply(401, "{}");
        let mut client = RedditClient::new(http, Recorder::default(), creds(), 600_000);
        assert!(matches!(client.collect(&config()), Err(Error::Auth(_))));
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let mut limiter = RateLimiter::per_minute(60);
        let mut rec = Recorder::default();
        limiter.wait(&mut rec);
        limiter.wait(&mut rec);
        assert_eq!(rec.0.len(), 1);
        assert!(rec.0[0] <= Duration::from_secs(1) && rec.0[0] > Duration::from_millis(900));
    }
}
