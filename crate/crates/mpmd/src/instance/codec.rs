//! JSON-lines instance files.
//!
//! Line 1 is a header `{"space":…,"f":"monomial:2","meta":{…}}`; each
//! following line is one request `{"id":N,"p":point,"t":time}` with the
//! time printed as a decimal with 17 significant digits, enough to round
//! trip an f64 bit-exactly.

use serde::{Deserialize, Serialize};

use super::{perturb_ties, Instance, InstanceError, InstanceMeta, Request};
use crate::costfn::TimeCostFunction;
use crate::metric::MetricSpace;

#[derive(Serialize, Deserialize)]
struct Header {
    space: MetricSpace,
    f: String,
    #[serde(default)]
    meta: InstanceMeta,
}

#[derive(Deserialize)]
struct RequestLine {
    id: u64,
    p: usize,
    t: f64,
}

/// 17 significant decimal digits: one before the point, sixteen after.
fn format_time(t: f64) -> String {
    format!("{t:.16e}")
}

pub(super) fn to_jsonl(instance: &Instance) -> String {
    let header = Header {
        space: instance.space.clone(),
        f: instance.f.to_string(),
        meta: instance.meta.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in &instance.requests {
        out.push_str(&format!(
            "{{\"id\":{},\"p\":{},\"t\":{}}}\n",
            r.id,
            r.point,
            format_time(r.arrival)
        ));
    }
    out
}

pub(super) fn from_jsonl(text: &str) -> Result<Instance, InstanceError> {
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or(InstanceError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let header: Header = serde_json::from_str(header_line).map_err(|e| InstanceError::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let f: TimeCostFunction = header.f.parse().map_err(|e| InstanceError::Parse {
        line: 1,
        msg: format!("{e}"),
    })?;

    let mut requests = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RequestLine =
            serde_json::from_str(line).map_err(|e| InstanceError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        if parsed.p >= header.space.k() {
            return Err(InstanceError::Parse {
                line: lineno,
                msg: format!(
                    "point index {} out of range for {}-point space",
                    parsed.p,
                    header.space.k()
                ),
            });
        }
        if !(parsed.t >= 0.0) {
            return Err(InstanceError::Parse {
                line: lineno,
                msg: format!("negative or non-finite arrival {}", parsed.t),
            });
        }
        requests.push(Request {
            id: parsed.id,
            point: parsed.p,
            arrival: parsed.t,
        });
    }

    let mut seen = std::collections::HashSet::new();
    for (i, r) in requests.iter().enumerate() {
        if !seen.insert(r.id) {
            return Err(InstanceError::Parse {
                line: i + 2,
                msg: format!("duplicate request id {}", r.id),
            });
        }
    }
    requests.sort_by(|a, b| a.arrival.partial_cmp(&b.arrival).unwrap().then(a.id.cmp(&b.id)));
    let span = requests.last().map(|r| r.arrival).unwrap_or(0.0);
    perturb_ties(&mut requests, super::tie_epsilon(span.max(1.0)))?;

    Ok(Instance {
        space: header.space,
        f,
        requests,
        meta: header.meta,
    })
}
