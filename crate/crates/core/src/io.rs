//! Line-oriented input and output formats.
//!
//! Prefix and address lists take one entry per line; anything after the
//! first whitespace or comma is ignored, as are blank lines and `#`
//! comments. Target files hold either bare addresses or one JSON target per
//! line. Replies are NDJSON.

use std::io::{self, BufRead, Write};
use std::net::Ipv6Addr;

use crate::prefix::{parse_prefix, Ipv6Prefix};
use crate::probe::ReplyRecord;
use crate::target_gen::ProbeTarget;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Significant lines with their 1-based numbers, first field only.
fn fields<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), InputError>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                return None;
            }
            let first = l.split(|c: char| c.is_whitespace() || c == ',').next().unwrap_or(l);
            Some(Ok((i + 1, first.to_string())))
        }
    })
}

pub fn prefixes<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Ipv6Prefix, InputError>> {
    fields(reader).map(|r| {
        let (line, text) = r?;
        parse_prefix(&text).map_err(|e| InputError::Parse {
            line,
            message: format!("`{text}`: {e}"),
        })
    })
}

pub fn read_prefixes<R: BufRead>(reader: R) -> Result<Vec<Ipv6Prefix>, InputError> {
    prefixes(reader).collect()
}

pub fn addresses<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Ipv6Addr, InputError>> {
    fields(reader).map(|r| {
        let (line, text) = r?;
        text.parse().map_err(|e| InputError::Parse {
            line,
            message: format!("`{text}`: {e}"),
        })
    })
}

pub fn read_addresses<R: BufRead>(reader: R) -> Result<Vec<Ipv6Addr>, InputError> {
    addresses(reader).collect()
}

/// Reads a target file in either plain or JSON-per-line form.
pub fn targets<R: BufRead>(reader: R) -> impl Iterator<Item = Result<ProbeTarget, InputError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        let l = match line {
            Err(e) => return Some(Err(e.into())),
            Ok(l) => l,
        };
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            return None;
        }
        let parsed = if t.starts_with('{') {
            serde_json::from_str::<ProbeTarget>(t).map_err(|e| e.to_string())
        } else {
            t.parse::<Ipv6Addr>()
                .map(ProbeTarget::listed)
                .map_err(|e| format!("`{t}`: {e}"))
        };
        Some(parsed.map_err(|message| InputError::Parse { line: line_no, message }))
    })
}

pub fn read_targets<R: BufRead>(reader: R) -> Result<Vec<ProbeTarget>, InputError> {
    targets(reader).collect()
}

pub fn write_target<W: Write>(mut w: W, t: &ProbeTarget, provenance: bool) -> io::Result<()> {
    if provenance {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")
    } else {
        writeln!(w, "{}", t.address)
    }
}

pub fn write_reply<W: Write>(mut w: W, r: &ReplyRecord) -> io::Result<()> {
    serde_json::to_writer(&mut w, r)?;
    w.write_all(b"\n")
}

pub fn read_replies<R: BufRead>(reader: R) -> Result<Vec<ReplyRecord>, InputError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| InputError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::ReplyKind;
    use crate::target_gen::Stage;

    #[test]
    fn prefix_list_with_comments_and_extra_columns() {
        let text = "# announcements\n2001:db8::/32 AS64500\n\n2001:db8:1::/48,AS64501\n";
        let v = read_prefixes(text.as_bytes()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].to_string(), "2001:db8:1::/48");
    }

    #[test]
    fn errors_name_the_line() {
        let text = "2001:db8::/32\n2001:db8:1::/48\n2001:db8:2::/48\n2001:db8:3::/48\n2001:db8:4::/48\n2001:db8:5::/48\nnot-a-prefix\n";
        match read_prefixes(text.as_bytes()) {
            Err(InputError::Parse { line: 7, message }) => assert!(message.contains("not-a-prefix")),
            other => panic!("unexpected {other:?}"),
        }
        match read_addresses("::1\n\n# x\nzzz\n".as_bytes()) {
            Err(InputError::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn targets_round_trip_in_both_forms() {
        let t = ProbeTarget {
            address: "2001:db8:1::".parse().unwrap(),
            origin: parse_prefix("2001:db8::/32").unwrap(),
            stage: Stage::Bgp48,
        };
        for provenance in [false, true] {
            let mut buf = Vec::new();
            write_target(&mut buf, &t, provenance).unwrap();
            let back = read_targets(buf.as_slice()).unwrap();
            if provenance {
                assert_eq!(back, vec![t]);
            } else {
                assert_eq!(back, vec![ProbeTarget::listed(t.address)]);
            }
        }
    }

    #[test]
    fn replies_round_trip() {
        let r = ReplyRecord {
            kind: ReplyKind::TimeExceeded(0),
            source: "2001:db8::1".parse().unwrap(),
            embedded_target: Some("2001:db8:1::".parse().unwrap()),
            received_hop_limit: 61,
            timestamp_ns: 123,
        };
        let mut buf = Vec::new();
        write_reply(&mut buf, &r).unwrap();
        write_reply(&mut buf, &r).unwrap();
        assert_eq!(read_replies(buf.as_slice()).unwrap(), vec![r.clone(), r]);
        match read_replies("{}\n".as_bytes()) {
            Err(InputError::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
