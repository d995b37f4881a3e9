//! Line-oriented text format.
//!
//! ```text
//! line   := thread "|" op [ "|*" ]
//! op     := ("acq" | "rel" | "r" | "w") "(" token ")"
//! ```
//!
//! `|*` marks the event as sampled. Blank lines and lines starting with `#`
//! are ignored.

use std::fmt::Write as _;

use super::{Op, OpKind, Trace, TraceBuilder, TraceError};

fn syntax(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Syntax {
        line,
        message: message.into(),
    }
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && !s.contains('|') && !s.chars().any(char::is_whitespace)
}

fn parse_op(line_no: usize, text: &str) -> Result<(OpKind, &str), TraceError> {
    let open = text
        .find('(')
        .ok_or_else(|| syntax(line_no, format!("expected `op(name)`, found `{text}`")))?;
    if !text.ends_with(')') {
        return Err(syntax(line_no, format!("missing `)` in `{text}`")));
    }
    let kind = match &text[..open] {
        "acq" => OpKind::Acquire,
        "rel" => OpKind::Release,
        "r" => OpKind::Read,
        "w" => OpKind::Write,
        other => return Err(syntax(line_no, format!("unknown operation `{other}`"))),
    };
    let object = &text[open + 1..text.len() - 1];
    if !valid_token(object) || object.contains('(') || object.contains(')') {
        return Err(syntax(line_no, format!("bad object name `{object}`")));
    }
    Ok((kind, object))
}

/// Parses and validates a trace.
pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut builder = TraceBuilder::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('|');
        let thread = fields.next().unwrap_or_default();
        if !valid_token(thread) {
            return Err(syntax(line_no, format!("bad thread name `{thread}`")));
        }
        let op = fields.next().ok_or_else(|| syntax(line_no, "missing operation"))?;
        let marked = match fields.next() {
            None => false,
            Some("*") => true,
            Some(other) => return Err(syntax(line_no, format!("unexpected field `{other}`"))),
        };
        if fields.next().is_some() {
            return Err(syntax(line_no, "too many fields"));
        }
        let (kind, object) = parse_op(line_no, op)?;
        builder.push(thread, kind, object, marked)?;
    }
    Ok(builder.finish())
}

/// Renders a trace in the text format, one LF-terminated line per event.
pub fn serialize_trace(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.len() * 12);
    for ev in trace.events() {
        let (kind, object) = match ev.op {
            Op::Acquire(l) => (OpKind::Acquire, trace.lock_name(l)),
            Op::Release(l) => (OpKind::Release, trace.lock_name(l)),
            Op::Read(x) => (OpKind::Read, trace.var_name(x)),
            Op::Write(x) => (OpKind::Write, trace.var_name(x)),
        };
        let _ = write!(out, "{}|{}({})", trace.thread_name(ev.thread), kind.token(), object);
        if ev.marked {
            out.push_str("|*");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::DisciplineViolation;

    #[test]
    fn minimal_conflicting_pair() {
        let tr = parse_trace("T1|w(x)|*\nT2|w(x)").unwrap();
        assert_eq!(tr.len(), 2);
        assert!(tr.event(1).marked);
        assert!(!tr.event(2).marked);
        assert_eq!(tr.num_threads(), 2);
        assert_eq!(tr.num_vars(), 1);
    }

    #[test]
    fn release_of_free_lock() {
        let err = parse_trace("T1|rel(l1)").unwrap_err();
        assert_eq!(
            err,
            TraceError::Discipline {
                event: 1,
                lock: "l1".into(),
                violation: DisciplineViolation::ReleaseOfFreeLock
            }
        );
        assert_eq!(err.to_string(), "release-of-free-lock at event 1 (lock l1)");
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let tr = parse_trace("# header\n\nT1|r(x)\n   \nT1|w(x)|*\n").unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.event(2).index, 2);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        for (text, line) in [
            ("T1|w(x)\nT1|x(y)", 2),
            ("T1|w(x)\n\nT1 |w(x)", 3),
            ("T1|w(x", 1),
            ("T1|w(x)|+", 1),
            ("T1|w(x)|*|*", 1),
            ("T1", 1),
            ("T1|w()", 1),
        ] {
            match parse_trace(text) {
                Err(TraceError::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: expected syntax error, got {other:?}"),
            }
        }
    }

    #[test]
    fn mark_on_lock_event_is_rejected() {
        assert_eq!(
            parse_trace("T1|acq(l)|*").unwrap_err(),
            TraceError::MarkOnSync { event: 1 }
        );
    }

    #[test]
    fn empty_trace_serializes_to_nothing() {
        let tr = parse_trace("").unwrap();
        assert!(tr.is_empty());
        assert_eq!(serialize_trace(&tr), "");
    }

    #[test]
    fn serialize_is_canonical() {
        let text = "T1|acq(l)\nT1|w(x)|*\nT1|rel(l)\nT2|r(x)\n";
        assert_eq!(serialize_trace(&parse_trace(text).unwrap()), text);
    }
}
