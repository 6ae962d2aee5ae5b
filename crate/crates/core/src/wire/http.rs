use super::WireError;

const CRLF: &[u8] = b"\r\n";

/// A complete HTTP/1.x request. Query pairs and headers keep wire order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub path: String,
    pub query: Vec<(String, String)>,
    pub version: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpRequest {
    /// Case-insensitive header lookup; first match wins.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn query_value(&self, key: &str) -> Option<&str> {
        self.query
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn target(&self) -> String {
        if self.query.is_empty() {
            return self.path.clone();
        }
        let query: Vec<String> = self.query.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}?{}", self.path, query.join("&"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("{} {} {}\r\n", self.method, self.target(), self.version).into_bytes();
        for (name, value) in &self.headers {
            out.extend_from_slice(format!("{name}: {value}\r\n").as_bytes());
        }
        out.extend_from_slice(CRLF);
        out.extend_from_slice(&self.body);
        out
    }
}

fn find_crlf(bytes: &[u8], from: usize) -> Option<usize> {
    bytes[from..]
        .windows(2)
        .position(|w| w == CRLF)
        .map(|p| p + from)
}

fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"!#$%&'*+-.^_`|~".contains(&b))
}

/// Method, path, query pairs and version.
type RequestLine = (String, String, Vec<(String, String)>, String);

fn parse_request_line(line: &str) -> Result<RequestLine, WireError> {
    let mut parts = line.split(' ');
    let (Some(method), Some(target), Some(version), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(WireError::RequestLine);
    };
    if !method.bytes().all(|b| b.is_ascii_uppercase()) || method.is_empty() {
        return Err(WireError::RequestLine);
    }
    if !target.starts_with('/') || !version.starts_with("HTTP/1.") || version.len() != 8 {
        return Err(WireError::RequestLine);
    }
    let (path, query) = match target.split_once('?') {
        Some((path, query)) => (path, parse_query(query)),
        None => (target, Vec::new()),
    };
    Ok((method.to_string(), path.to_string(), query, version.to_string()))
}

fn parse_query(query: &str) -> Vec<(String, String)> {
    query
        .split('&')
        .filter(|pair| !pair.is_empty())
        .map(|pair| match pair.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => (pair.to_string(), String::new()),
        })
        .collect()
}

/// Parses one complete request. The body must match `Content-Length`
/// exactly; without that header no body bytes are allowed.
pub fn parse_http(bytes: &[u8]) -> Result<HttpRequest, WireError> {
    let line_end = find_crlf(bytes, 0).ok_or(WireError::RequestLine)?;
    let line = std::str::from_utf8(&bytes[..line_end]).map_err(|_| WireError::RequestLine)?;
    let (method, path, query, version) = parse_request_line(line)?;

    let mut headers = Vec::new();
    let mut pos = line_end + 2;
    loop {
        let end = find_crlf(bytes, pos).ok_or(WireError::Unterminated)?;
        if end == pos {
            pos += 2;
            break;
        }
        let raw = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| WireError::Header(String::from_utf8_lossy(&bytes[pos..end]).into_owned()))?;
        let (name, value) = raw
            .split_once(':')
            .filter(|(name, _)| is_token(name))
            .ok_or_else(|| WireError::Header(raw.to_string()))?;
        headers.push((name.to_string(), value.trim_matches([' ', '\t']).to_string()));
        pos = end + 2;
    }

    let body = &bytes[pos..];
    let declared = headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("Content-Length"))
        .map(|(_, v)| {
            v.parse::<usize>()
                .map_err(|_| WireError::Header(format!("Content-Length: {v}")))
        })
        .transpose()?
        .unwrap_or(0);
    if declared != body.len() {
        return Err(WireError::LengthMismatch {
            declared,
            actual: body.len(),
        });
    }

    Ok(HttpRequest {
        method,
        path,
        query,
        version,
        headers,
        body: body.to_vec(),
    })
}
