use std::io::{BufRead, Write};

use thiserror::Error;

use crate::controller::ReqKind;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One memory access preceded by `bubbles` non-memory instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub bubbles: u64,
    pub addr: u64,
    pub kind: ReqKind,
}

impl TraceRecord {
    pub fn read(bubbles: u64, addr: u64) -> Self {
        Self {
            bubbles,
            addr,
            kind: ReqKind::Read,
        }
    }

    pub fn write(bubbles: u64, addr: u64) -> Self {
        Self {
            bubbles,
            addr,
            kind: ReqKind::Write,
        }
    }
}

fn parse_line(text: &str) -> Result<Option<TraceRecord>, String> {
    let text = text.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let mut tok = text.split_whitespace();
    let bubbles = tok.next().ok_or("missing bubble count")?;
    let bubbles: u64 = bubbles.parse().map_err(|_| format!("bad bubble count `{bubbles}`"))?;
    let addr = tok.next().ok_or("missing address")?;
    let hex = addr
        .strip_prefix("0x")
        .or_else(|| addr.strip_prefix("0X"))
        .unwrap_or(addr);
    let addr = u64::from_str_radix(hex, 16).map_err(|_| format!("bad address `{addr}`"))?;
    let kind = match tok.next() {
        None => ReqKind::Read,
        Some("W") | Some("w") => ReqKind::Write,
        Some("R") | Some("r") => ReqKind::Read,
        Some(t) => return Err(format!("bad access kind `{t}`")),
    };
    if let Some(t) = tok.next() {
        return Err(format!("unexpected token `{t}`"));
    }
    Ok(Some(TraceRecord { bubbles, addr, kind }))
}

/// Parses `<bubbles> <hex address> [W]` lines. Blank lines and `#` comments
/// are skipped.
pub fn parse_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        match parse_line(&line) {
            Ok(Some(r)) => out.push(r),
            Ok(None) => {}
            Err(msg) => return Err(TraceError::Parse { line: i + 1, msg }),
        }
    }
    Ok(out)
}

pub fn parse_trace_str(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    parse_trace(text.as_bytes())
}

pub fn load_trace(path: &std::path::Path) -> Result<Vec<TraceRecord>, TraceError> {
    let f = std::fs::File::open(path)?;
    parse_trace(std::io::BufReader::new(f))
}

pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    for r in trace {
        match r.kind {
            ReqKind::Read => writeln!(out, "{} {:#x}", r.bubbles, r.addr)?,
            ReqKind::Write => writeln!(out, "{} {:#x} W", r.bubbles, r.addr)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(parse_trace_str("3 0x1000").unwrap(), vec![TraceRecord::read(3, 0x1000)]);
        assert_eq!(parse_trace_str("0 0x2040 W").unwrap(), vec![TraceRecord::write(0, 0x2040)]);
        match parse_trace_str("x y") {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_line_counts_comments() {
        let err = parse_trace_str("# header\n1 0x40\n\n2 zz\n").unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 4, .. }));
    }

    #[test]
    fn write_then_parse() {
        let t = vec![TraceRecord::read(5, 0xdead_bec0), TraceRecord::write(0, 0x40)];
        let mut buf = Vec::new();
        write_trace(&mut buf, &t).unwrap();
        assert_eq!(parse_trace(&buf[..]).unwrap(), t);
    }
}
