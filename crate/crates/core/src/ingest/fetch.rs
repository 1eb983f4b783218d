use std::time::Duration;

use crate::error::{Error, Result};

pub const DEFAULT_OVERPASS_URL: &str = "https://overpass-api.de/api/interpreter";

/// Upper bound on a response body.
const MAX_BODY_BYTES: u64 = 512 * 1024 * 1024;

/// A bounding box (degrees) plus a highway tag filter.
#[derive(Debug, Clone, PartialEq)]
pub struct OverpassQuery {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
    /// Regex over `highway` values; `None` keeps every highway.
    pub highway_filter: Option<String>,
}

impl OverpassQuery {
    /// Overpass QL returning highway ways with their nodes plus `town`/`city`
    /// place nodes, as OSM XML.
    pub fn to_ql(&self, timeout: Duration) -> String {
        let bbox = format!("{},{},{},{}", self.south, self.west, self.north, self.east);
        let highway = match &self.highway_filter {
            Some(re) => format!("[\"highway\"~\"{}\"]", re.replace('"', "\\\"")),
            None => "[\"highway\"]".to_string(),
        };
        format!(
            "[out:xml][timeout:{}];(way{highway}({bbox});node[\"place\"~\"^(town|city)$\"]({bbox}););(._;>;);out body;",
            timeout.as_secs().max(1)
        )
    }
}

/// POSTs the query and returns the raw body. Any transport failure or
/// non-success status is an error; nothing partial is returned.
pub fn fetch_overpass(endpoint: &str, query: &OverpassQuery, timeout: Duration) -> Result<Vec<u8>> {
    let fail = |status: Option<u16>, message: String| Error::Fetch {
        endpoint: endpoint.to_string(),
        status,
        message,
    };
    if timeout.is_zero() {
        return Err(Error::Argument("fetch timeout must be positive".into()));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    log::info!("fetching Overpass data from {endpoint}");
    let mut response = agent
        .post(endpoint)
        .header("Content-Type", "text/plain; charset=utf-8")
        .send(query.to_ql(timeout))
        .map_err(|e| fail(None, e.to_string()))?;
    let status = response.status().as_u16();
    if !response.status().is_success() {
        return Err(fail(Some(status), format!("server answered HTTP {status}")));
    }
    response
        .body_mut()
        .with_config()
        .limit(MAX_BODY_BYTES)
        .read_to_vec()
        .map_err(|e| fail(Some(status), e.to_string()))
}
