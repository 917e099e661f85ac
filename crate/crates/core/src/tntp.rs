//! Reader and writer for the TNTP network and trips formats used by the
//! Transportation Networks for Research repository.
//!
//! Both formats start with a metadata block of `<TAG> value` lines closed by
//! `<END OF METADATA>`. Lines (or line tails) starting with `~` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::network::{DemandMatrix, Link, Network};

/// Upper bound on declared node/zone counts; protects against allocating
/// adjacency lists for absurd metadata.
pub const MAX_NODES: usize = 1 << 22;

const NETWORK_FIELDS: usize = 10;

struct Metadata {
    tags: BTreeMap<String, (usize, String)>,
    body_start: usize,
}

impl Metadata {
    fn get(&self, tag: &'static str) -> Result<(usize, &str)> {
        self.tags
            .get(tag)
            .map(|(line, value)| (*line, value.as_str()))
            .ok_or(Error::MissingMetadata(tag))
    }

    fn count(&self, tag: &'static str) -> Result<usize> {
        let (line, value) = self.get(tag)?;
        value
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("<{tag}> expects a count, found {value:?}")))
    }
}

/// Splits text into (1-based line number, content) pairs with comments removed.
/// Accepts `\n`, `\r\n` and bare `\r` line endings.
fn logical_lines(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        for piece in raw.split('\r') {
            let content = match piece.find('~') {
                Some(pos) => &piece[..pos],
                None => piece,
            };
            out.push((idx + 1, content));
        }
    }
    out
}

fn parse_metadata(lines: &[(usize, &str)], known: &[&str]) -> Result<Metadata> {
    let mut tags = BTreeMap::new();
    for (pos, &(line, content)) in lines.iter().enumerate() {
        let mut rest = content.trim();
        if rest.is_empty() {
            continue;
        }
        if rest.starts_with(|c: char| c.is_ascii_digit()) || rest.starts_with("Origin") {
            // link or trip data before the metadata was closed
            return Err(Error::MissingMetadata("END OF METADATA"));
        }
        if !rest.starts_with('<') {
            return Err(Error::parse(
                line,
                format!("expected a metadata tag, found {rest:?}"),
            ));
        }
        while let Some(stripped) = rest.strip_prefix('<') {
            let close = stripped
                .find('>')
                .ok_or_else(|| Error::parse(line, "unterminated metadata tag"))?;
            let tag = stripped[..close].trim().to_ascii_uppercase();
            let after = &stripped[close + 1..];
            let (value, next) = match after.find('<') {
                Some(p) => (&after[..p], &after[p..]),
                None => (after, ""),
            };
            if tag == "END OF METADATA" {
                return Ok(Metadata {
                    tags,
                    body_start: pos + 1,
                });
            }
            if !known.contains(&tag.as_str()) {
                warn!("line {line}: ignoring unknown metadata tag <{tag}>");
            }
            tags.insert(tag, (line, value.trim().to_string()));
            rest = next.trim_start();
        }
    }
    Err(Error::MissingMetadata("END OF METADATA"))
}

fn parse_finite(line: usize, token: &str, what: &str) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("{what}: expected a number, found {token:?}"))),
    }
}

fn parse_index(line: usize, token: &str, limit: usize, what: &str) -> Result<usize> {
    let value: usize = token
        .parse()
        .ok()
        .or_else(|| {
            // Some files write node ids as `12.0`.
            token
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 1.0 && *v <= MAX_NODES as f64)
                .map(|v| v as usize)
        })
        .ok_or_else(|| Error::parse(line, format!("{what}: expected an index, found {token:?}")))?;
    if value == 0 || value > limit {
        return Err(Error::parse(
            line,
            format!("{what} {value} outside 1..={limit}"),
        ));
    }
    Ok(value - 1)
}

const NETWORK_TAGS: &[&str] = &[
    "NUMBER OF NODES",
    "NUMBER OF ZONES",
    "NUMBER OF LINKS",
    "FIRST THRU NODE",
];

/// Parses a TNTP network file. Links keep file order.
pub fn parse_network(text: &str) -> Result<Network> {
    let lines = logical_lines(text);
    let meta = parse_metadata(&lines, NETWORK_TAGS)?;
    let nodes = meta.count("NUMBER OF NODES")?;
    let zones = meta.count("NUMBER OF ZONES")?;
    let declared_links = meta.count("NUMBER OF LINKS")?;
    let first_thru = meta.count("FIRST THRU NODE")?;
    if nodes > MAX_NODES {
        return Err(Error::InvalidNetwork(format!(
            "{nodes} nodes exceeds the supported maximum {MAX_NODES}"
        )));
    }

    let mut links = Vec::new();
    let mut fields: Vec<&str> = Vec::with_capacity(NETWORK_FIELDS);
    let mut row_line = 0;
    for &(line, content) in &lines[meta.body_start..] {
        let mut segments = content.split(';').peekable();
        while let Some(segment) = segments.next() {
            let terminated = segments.peek().is_some();
            for token in segment.split_whitespace() {
                if fields.is_empty() {
                    row_line = line;
                }
                fields.push(token);
            }
            if terminated {
                if !fields.is_empty() {
                    links.push(parse_link_row(row_line, &fields, nodes)?);
                }
                fields.clear();
            }
        }
    }
    if !fields.is_empty() {
        return Err(Error::parse(row_line, "link row is missing its ';' terminator"));
    }
    if links.len() != declared_links {
        return Err(Error::InvalidNetwork(format!(
            "metadata declares {declared_links} links but {} rows were read",
            links.len()
        )));
    }
    Network::new(nodes, zones, first_thru, links)
}

fn parse_link_row(line: usize, fields: &[&str], nodes: usize) -> Result<Link> {
    if fields.len() < NETWORK_FIELDS {
        return Err(Error::parse(
            line,
            format!(
                "link row has {} fields, expected {NETWORK_FIELDS}",
                fields.len()
            ),
        ));
    }
    let tail = parse_index(line, fields[0], nodes, "tail node")?;
    let head = parse_index(line, fields[1], nodes, "head node")?;
    let mut values = [0.0; NETWORK_FIELDS - 2];
    for (slot, token) in values.iter_mut().zip(&fields[2..NETWORK_FIELDS]) {
        *slot = parse_finite(line, token, "link attribute")?;
    }
    let [capacity, length, free_flow_time, bpr_b, bpr_power, speed_limit, toll, link_type] = values;
    if capacity <= 0.0 {
        return Err(Error::parse(
            line,
            format!("non-positive capacity {capacity}"),
        ));
    }
    Ok(Link {
        tail,
        head,
        capacity,
        length,
        free_flow_time,
        bpr_b,
        bpr_power,
        speed_limit,
        toll,
        link_type,
    })
}

/// Serializes a network in TNTP form. Floats use the shortest representation
/// that parses back to the identical value.
pub fn write_network(network: &Network) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<NUMBER OF ZONES> {}", network.zone_count());
    let _ = writeln!(out, "<NUMBER OF NODES> {}", network.node_count());
    let _ = writeln!(out, "<FIRST THRU NODE> {}", network.first_thru_node());
    let _ = writeln!(out, "<NUMBER OF LINKS> {}", network.link_count());
    out.push_str("<END OF METADATA>\n\n");
    out.push_str(
        "~\tInit node\tTerm node\tCapacity\tLength\tFree Flow Time\tB\tPower\tSpeed limit\tToll\tType\t;\n",
    );
    for l in network.links() {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t;",
            l.tail + 1,
            l.head + 1,
            l.capacity,
            l.length,
            l.free_flow_time,
            l.bpr_b,
            l.bpr_power,
            l.speed_limit,
            l.toll,
            l.link_type
        );
    }
    out
}

const TRIPS_TAGS: &[&str] = &["NUMBER OF ZONES", "TOTAL OD FLOW"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token<'a> {
    Word(&'a str),
    Colon,
    Semicolon,
}

fn tokenize<'a>(lines: &[(usize, &'a str)]) -> Vec<(usize, Token<'a>)> {
    let mut tokens = Vec::new();
    for &(line, content) in lines {
        let mut start = None;
        for (i, ch) in content.char_indices() {
            let special = match ch {
                ':' => Some(Token::Colon),
                ';' => Some(Token::Semicolon),
                _ => None,
            };
            if ch.is_whitespace() || special.is_some() {
                if let Some(s) = start.take() {
                    tokens.push((line, Token::Word(&content[s..i])));
                }
                if let Some(tok) = special {
                    tokens.push((line, tok));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            tokens.push((line, Token::Word(&content[s..])));
        }
    }
    tokens
}

/// Parses a TNTP trips file. A declared total that differs from the parsed
/// sum by more than 1e-6 (relative) is logged as a warning; it is not fatal.
pub fn parse_trips(text: &str) -> Result<DemandMatrix> {
    let lines = logical_lines(text);
    let meta = parse_metadata(&lines, TRIPS_TAGS)?;
    let zones = meta.count("NUMBER OF ZONES")?;
    if zones > MAX_NODES {
        return Err(Error::InvalidDemand(format!(
            "{zones} zones exceeds the supported maximum {MAX_NODES}"
        )));
    }
    let (total_line, total_text) = meta.get("TOTAL OD FLOW")?;
    let declared = parse_finite(total_line, total_text, "<TOTAL OD FLOW>")?;

    let tokens = tokenize(&lines[meta.body_start..]);
    let mut demand = DemandMatrix::new(zones);
    let mut origin: Option<usize> = None;
    let mut i = 0;
    while i < tokens.len() {
        let (line, tok) = tokens[i];
        match tok {
            Token::Word(w) if w.eq_ignore_ascii_case("origin") => {
                let (l, next) = tokens
                    .get(i + 1)
                    .copied()
                    .ok_or_else(|| Error::parse(line, "Origin without a zone number"))?;
                let Token::Word(id) = next else {
                    return Err(Error::parse(l, "Origin without a zone number"));
                };
                origin = Some(parse_index(l, id, zones, "origin zone")?);
                i += 2;
            }
            Token::Word(dest_text) => {
                let o = origin.ok_or_else(|| {
                    Error::parse(line, "destination entry before any Origin block")
                })?;
                let d = parse_index(line, dest_text, zones, "destination zone")?;
                let malformed = || Error::parse(line, format!("malformed entry after destination {dest_text:?}; expected `dest : flow ;`"));
                if tokens.get(i + 1).map(|t| t.1) != Some(Token::Colon) {
                    return Err(malformed());
                }
                let value = match tokens.get(i + 2) {
                    Some(&(l, Token::Word(v))) => parse_finite(l, v, "trip count")?,
                    _ => return Err(malformed()),
                };
                if value < 0.0 {
                    return Err(Error::parse(line, format!("negative trip count {value}")));
                }
                match tokens.get(i + 3).map(|t| t.1) {
                    Some(Token::Semicolon) => i += 4,
                    None => i += 3,
                    _ => return Err(malformed()),
                }
                demand.add(o, d, value)?;
            }
            Token::Semicolon => i += 1,
            Token::Colon => return Err(Error::parse(line, "unexpected ':'")),
        }
    }

    let total = demand.total();
    let scale = declared.abs().max(f64::MIN_POSITIVE);
    if (total - declared).abs() / scale > 1e-6 && (total - declared).abs() > 1e-12 {
        warn!("trips file declares a total of {declared} but entries sum to {total}");
    }
    demand.set_declared_total(declared);
    Ok(demand)
}

/// Serializes demand in TNTP trips form, five entries per line.
pub fn write_trips(demand: &DemandMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<NUMBER OF ZONES> {}", demand.zone_count());
    let _ = writeln!(
        out,
        "<TOTAL OD FLOW> {:?}",
        demand.declared_total().unwrap_or_else(|| demand.total())
    );
    out.push_str("<END OF METADATA>\n\n");
    let mut current = None;
    let mut on_line = 0;
    for ((o, d), v) in demand.iter() {
        if current != Some(o) {
            if on_line > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "\nOrigin\t{}", o + 1);
            current = Some(o);
            on_line = 0;
        }
        let _ = write!(out, "{:5} : {:?};", d + 1, v);
        on_line += 1;
        if on_line == 5 {
            out.push('\n');
            on_line = 0;
        }
    }
    if on_line > 0 {
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 2\n<FIRST THRU NODE> 1\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n\n~ tail head cap len fft b p speed toll type ;\n\t1\t2\t25900.2\t6\t6\t0.15\t4\t0\t0\t1\t;\n";

    #[test]
    fn minimal_network() {
        let net = parse_network(MINIMAL).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.link_count(), 1);
        assert_eq!(net.link(0).free_flow_time, 6.0);
        assert_eq!(net.link(0).capacity, 25900.2);
        assert_eq!((net.link(0).tail, net.link(0).head), (0, 1));
    }

    #[test]
    fn line_endings_and_whitespace_do_not_matter() {
        let crlf = MINIMAL.replace('\n', "\r\n");
        let cr = MINIMAL.replace('\n', "\r");
        let spaced = MINIMAL.replace('\t', "   ");
        let base = parse_network(MINIMAL).unwrap();
        for text in [crlf, cr, spaced] {
            let net = parse_network(&text).unwrap();
            assert_eq!(net.links(), base.links());
        }
    }

    #[test]
    fn missing_tag_is_reported() {
        let text = MINIMAL.replace("<FIRST THRU NODE> 1\n", "");
        assert!(matches!(
            parse_network(&text),
            Err(Error::MissingMetadata("FIRST THRU NODE"))
        ));
        let text = MINIMAL.replace("<END OF METADATA>", "");
        assert!(matches!(
            parse_network(&text),
            Err(Error::MissingMetadata("END OF METADATA"))
        ));
    }

    #[test]
    fn short_row_is_rejected() {
        let text = MINIMAL.replace("\t0\t0\t1\t;", "\t0\t;");
        assert!(matches!(parse_network(&text), Err(Error::Parse { line: 8, .. })));
    }

    #[test]
    fn out_of_range_node_is_rejected() {
        let text = MINIMAL.replace("\t1\t2\t25900.2", "\t1\t3\t25900.2");
        assert!(parse_network(&text).is_err());
    }

    #[test]
    fn non_positive_capacity_is_rejected() {
        let text = MINIMAL.replace("25900.2", "0");
        assert!(parse_network(&text).is_err());
    }

    #[test]
    fn unknown_tags_are_ignored() {
        let text = MINIMAL.replace("<END OF METADATA>", "<ORIGINAL HEADER> foo\n<END OF METADATA>");
        assert_eq!(parse_network(&text).unwrap().link_count(), 1);
    }

    #[test]
    fn link_count_must_match_metadata() {
        let text = MINIMAL.replace("<NUMBER OF LINKS> 1", "<NUMBER OF LINKS> 2");
        assert!(matches!(parse_network(&text), Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn single_trip_entry() {
        let text = "<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 60.0\n<END OF METADATA>\n\nOrigin 1\n2 : 60.0;\n";
        let d = parse_trips(text).unwrap();
        assert_eq!(d.get(0, 1), 60.0);
        assert_eq!(d.len(), 1);
        assert_eq!(d.declared_total(), Some(60.0));
    }

    #[test]
    fn several_entries_per_line_and_compact_tokens() {
        let text = "<NUMBER OF ZONES> 3\n<TOTAL OD FLOW> 6\n<END OF METADATA>\nOrigin 1\n 2:1.5; 3 :2.5;\nOrigin\t3\n1 : 2;";
        let d = parse_trips(text).unwrap();
        assert_eq!(d.get(0, 1), 1.5);
        assert_eq!(d.get(0, 2), 2.5);
        assert_eq!(d.get(2, 0), 2.0);
    }

    #[test]
    fn malformed_entry_is_fatal() {
        let text = "<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 60.0\n<END OF METADATA>\nOrigin 1\n2 60.0;\n";
        assert!(matches!(parse_trips(text), Err(Error::Parse { line: 5, .. })));
        let text = "<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 60.0\n<END OF METADATA>\n2 : 60.0;\n";
        assert!(parse_trips(text).is_err());
    }

    #[test]
    fn total_mismatch_is_only_a_warning() {
        let text = "<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 70.0\n<END OF METADATA>\nOrigin 1\n2 : 60.0;\n";
        let d = parse_trips(text).unwrap();
        assert_eq!(d.total(), 60.0);
        assert_eq!(d.declared_total(), Some(70.0));
    }

    #[test]
    fn trips_round_trip() {
        let d = DemandMatrix::from_entries(4, [((0, 1), 0.1), ((0, 3), 7.0), ((2, 1), 1e-3)]).unwrap();
        let back = parse_trips(&write_trips(&d)).unwrap();
        assert_eq!(back.iter().collect::<Vec<_>>(), d.iter().collect::<Vec<_>>());
    }
}
