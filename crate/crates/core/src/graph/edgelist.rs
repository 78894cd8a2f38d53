//! Whitespace-separated edge lists: one `u v [w]` per line, `#` starts a
//! comment. A `# nodes N` line fixes the node count, otherwise it is one
//! more than the largest index seen.

use super::Graph;
use crate::error::{Error, Result};

fn parse_index(token: &str, line: usize) -> Result<usize> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected a non-negative node index, found {token:?}"),
    })
}

pub fn load_edge_list(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut declared: Option<usize> = None;
    let mut max_index: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (content, comment) = match raw.find('#') {
            Some(k) => (&raw[..k], Some(&raw[k + 1..])),
            None => (raw, None),
        };
        if let Some(comment) = comment {
            let mut words = comment.split_whitespace();
            if words.next() == Some("nodes") {
                if let Some(n) = words.next() {
                    declared = Some(parse_index(n, line)?);
                }
            }
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() > 3 || tokens.len() < 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected \"u v\" or \"u v w\", found {} fields", tokens.len()),
            });
        }
        let u = parse_index(tokens[0], line)?;
        let v = parse_index(tokens[1], line)?;
        let w = match tokens.get(2) {
            Some(t) => t.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("expected a weight, found {t:?}"),
            })?,
            None => 1.0,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("weight {w} must be finite and non-negative"),
            });
        }
        max_index = Some(max_index.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        edges.push((u, v, w));
    }

    let implied = max_index.map_or(0, |m| m + 1);
    let num_nodes = match declared {
        Some(n) if n < implied => {
            return Err(Error::InvalidArgument(format!(
                "declared {n} nodes but edges reference node {}",
                implied - 1
            )))
        }
        Some(n) => n,
        None => implied,
    };
    Graph::from_edges(num_nodes, &edges)
}

/// Canonical text form: a `# nodes N` header, then `u v w` with `u <= v`.
pub fn save_edge_list(g: &Graph) -> String {
    let mut out = format!("# nodes {}\n", g.num_nodes());
    for (u, v, w) in g.edges() {
        out.push_str(&format!("{u} {v} {w}\n"));
    }
    out
}
