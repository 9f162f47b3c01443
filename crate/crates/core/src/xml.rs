//! XML event streams: the unit of exchange between adapters and mediators.

use quick_xml::events::Event;
use quick_xml::Reader;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum XmlError {
    #[error("xml syntax error at byte {pos}: {msg}")]
    Syntax { pos: u64, msg: String },
    #[error("badly nested event stream: {0}")]
    Nesting(String),
    #[error("stream error: {0}")]
    Stream(String),
}

/// One event of a document stream. Attributes, comments and processing
/// instructions are not part of the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum XmlEvent {
    Open(String),
    Text(String),
    Close,
    /// Ends a document. A document may hold several top-level trees.
    DocumentBoundary,
    /// In-band failure; no further events follow.
    Error(String),
}

pub type EventStream = Box<dyn Iterator<Item = XmlEvent> + Send>;

pub fn empty_stream() -> EventStream {
    Box::new(std::iter::empty())
}

/// Parse XML text into events. Several top-level elements are accepted and
/// each one is followed by a [`XmlEvent::DocumentBoundary`]. Whitespace-only
/// text is dropped.
pub fn parse_events(text: &str) -> Result<Vec<XmlEvent>, XmlError> {
    let mut reader = Reader::from_str(text);
    let mut out = Vec::new();
    let mut depth = 0usize;
    loop {
        let pos = reader.buffer_position();
        let syntax = |msg: String| XmlError::Syntax { pos, msg };
        match reader.read_event().map_err(|e| syntax(e.to_string()))? {
            Event::Start(e) => {
                let name = e.local_name().as_ref().to_string();
                out.push(XmlEvent::Open(name));
                depth += 1;
            }
            Event::Empty(e) => {
                let name = e.local_name().as_ref().to_string();
                out.push(XmlEvent::Open(name));
                out.push(XmlEvent::Close);
                if depth == 0 {
                    out.push(XmlEvent::DocumentBoundary);
                }
            }
            Event::End(_) => {
                if depth == 0 {
                    return Err(syntax("unexpected closing tag".into()));
                }
                depth -= 1;
                out.push(XmlEvent::Close);
                if depth == 0 {
                    out.push(XmlEvent::DocumentBoundary);
                }
            }
            Event::Text(t) => {
                let s = quick_xml::escape::unescape(&t).map_err(|e| syntax(e.to_string()))?;
                push_text(&mut out, depth, &s, pos)?;
            }
            Event::CData(t) => {
                let s = t.to_string();
                push_text(&mut out, depth, &s, pos)?;
            }
            Event::GeneralRef(r) => {
                let s = match r.resolve_char_ref().map_err(|e| syntax(e.to_string()))? {
                    Some(c) => c.to_string(),
                    None => quick_xml::escape::unescape(&format!("&{};", &*r)).map_err(|e| syntax(e.to_string()))?.into_owned(),
                };
                push_text(&mut out, depth, &s, pos)?;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if depth != 0 {
        return Err(XmlError::Syntax { pos: reader.buffer_position(), msg: "unclosed element".into() });
    }
    Ok(out)
}

fn push_text(out: &mut Vec<XmlEvent>, depth: usize, s: &str, pos: u64) -> Result<(), XmlError> {
    if s.trim().is_empty() {
        return Ok(());
    }
    if depth == 0 {
        return Err(XmlError::Syntax { pos, msg: "text outside of an element".into() });
    }
    // quick-xml splits text around entity references; glue the pieces back.
    if let Some(XmlEvent::Text(prev)) = out.last_mut() {
        prev.push_str(s);
    } else {
        out.push(XmlEvent::Text(s.to_string()));
    }
    Ok(())
}

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

/// Canonical text: no whitespace between tags, `&<>` escaped, boundaries dropped.
pub fn serialize_events<'a, I: IntoIterator<Item = &'a XmlEvent>>(events: I) -> Result<String, XmlError> {
    let mut out = String::new();
    let mut stack: Vec<&str> = Vec::new();
    for ev in events {
        match ev {
            XmlEvent::Open(name) => {
                out.push('<');
                out.push_str(name);
                out.push('>');
                stack.push(name);
            }
            XmlEvent::Text(t) => out.push_str(&escape_text(t)),
            XmlEvent::Close => {
                let name = stack.pop().ok_or_else(|| XmlError::Nesting("close without open".into()))?;
                out.push_str("</");
                out.push_str(name);
                out.push('>');
            }
            XmlEvent::DocumentBoundary => {}
            XmlEvent::Error(msg) => return Err(XmlError::Stream(msg.clone())),
        }
    }
    if !stack.is_empty() {
        return Err(XmlError::Nesting("unclosed element at end".into()));
    }
    Ok(out)
}

/// Split an event sequence into canonical document strings, one per
/// boundary-delimited document.
pub fn documents(events: &[XmlEvent]) -> Result<Vec<String>, XmlError> {
    let mut docs = Vec::new();
    let mut start = 0;
    for (i, ev) in events.iter().enumerate() {
        if *ev == XmlEvent::DocumentBoundary {
            if i > start {
                docs.push(serialize_events(&events[start..i])?);
            }
            start = i + 1;
        }
    }
    if start < events.len() {
        docs.push(serialize_events(&events[start..])?);
    }
    Ok(docs)
}

/// Check that a stream is properly nested and that boundaries occur only at depth zero.
pub fn check_well_nested<'a, I: IntoIterator<Item = &'a XmlEvent>>(events: I) -> Result<(), XmlError> {
    let mut depth = 0usize;
    for (i, ev) in events.into_iter().enumerate() {
        match ev {
            XmlEvent::Open(name) => {
                if !crate::xalgebra::path::is_valid_step(name) {
                    return Err(XmlError::Nesting(format!("event {i}: invalid element name {name:?}")));
                }
                depth += 1
            }
            XmlEvent::Close if depth == 0 => {
                return Err(XmlError::Nesting(format!("event {i}: close at depth zero")));
            }
            XmlEvent::Close => depth -= 1,
            XmlEvent::Text(_) if depth == 0 => {
                return Err(XmlError::Nesting(format!("event {i}: text at depth zero")));
            }
            XmlEvent::Text(_) => {}
            XmlEvent::DocumentBoundary if depth != 0 => {
                return Err(XmlError::Nesting(format!("event {i}: boundary inside an element")));
            }
            XmlEvent::DocumentBoundary => {}
            XmlEvent::Error(msg) => return Err(XmlError::Stream(msg.clone())),
        }
    }
    if depth != 0 {
        return Err(XmlError::Nesting("stream ends inside an element".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_multiple_roots_and_entities() {
        let ev = parse_events("<a><b>x &amp; y</b></a>\n<c/>").unwrap();
        assert_eq!(
            ev,
            vec![
                XmlEvent::Open("a".into()),
                XmlEvent::Open("b".into()),
                XmlEvent::Text("x & y".into()),
                XmlEvent::Close,
                XmlEvent::Close,
                XmlEvent::DocumentBoundary,
                XmlEvent::Open("c".into()),
                XmlEvent::Close,
                XmlEvent::DocumentBoundary,
            ]
        );
        assert_eq!(documents(&ev).unwrap(), vec!["<a><b>x &amp; y</b></a>", "<c></c>"]);
        check_well_nested(&ev).unwrap();
    }

    #[test]
    fn unbalanced_input_is_rejected() {
        assert!(parse_events("<a><b></a>").is_err());
        assert!(parse_events("<a>").is_err());
        let bad = [XmlEvent::Open("a".into()), XmlEvent::DocumentBoundary, XmlEvent::Close];
        assert!(check_well_nested(&bad).is_err());
        assert!(check_well_nested(&[XmlEvent::Close]).is_err());
    }
}
