//! Strict, fully tokenizing parser. Slow on purpose; it is the ground truth the
//! fast path is checked against.

use super::ParseError;
use crate::model::ObservationGroup;

#[derive(Debug)]
enum Object<'a> {
    Iri(&'a str),
    Literal { lexical: &'a str, datatype: &'a str },
}

#[derive(Debug)]
struct Triple<'a> {
    subject: &'a str,
    predicate: &'a str,
    predicate_col: usize,
    object: Object<'a>,
    object_col: usize,
}

fn syntax(line: usize, column: usize, reason: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        reason: reason.into(),
    }
}

/// Consumes `<iri>` at byte `at`; returns the inner text and the index after `>`.
fn iri(line: &str, at: usize, line_no: usize) -> Result<(&str, usize), ParseError> {
    let rest = &line[at..];
    if !rest.starts_with('<') {
        return Err(syntax(line_no, at + 1, "expected '<'"));
    }
    let close = rest
        .find('>')
        .ok_or_else(|| syntax(line_no, at + 1, "unterminated IRI"))?;
    let inner = &rest[1..close];
    if let Some(bad) = inner.find(|c: char| c == '<' || c == '"' || c.is_whitespace()) {
        return Err(syntax(line_no, at + 2 + bad, "illegal character in IRI"));
    }
    if inner.is_empty() {
        return Err(syntax(line_no, at + 1, "empty IRI"));
    }
    Ok((inner, at + close + 1))
}

fn space(line: &str, at: usize, line_no: usize) -> Result<usize, ParseError> {
    if line[at..].starts_with(' ') {
        Ok(at + 1)
    } else {
        Err(syntax(line_no, at + 1, "expected a single space"))
    }
}

fn triple(line: &str, line_no: usize) -> Result<Triple<'_>, ParseError> {
    let (subject, at) = iri(line, 0, line_no)?;
    let at = space(line, at, line_no)?;
    let predicate_col = at + 1;
    let (predicate, at) = iri(line, at, line_no)?;
    let at = space(line, at, line_no)?;
    let object_col = at + 1;
    let (object, at) = if line[at..].starts_with('"') {
        let body = &line[at + 1..];
        let close = body
            .find('"')
            .ok_or_else(|| syntax(line_no, object_col, "unterminated literal"))?;
        let lexical = &body[..close];
        let after = at + 1 + close + 1;
        if !line[after..].starts_with("^^") {
            return Err(syntax(line_no, after + 1, "expected '^^' datatype marker"));
        }
        let (datatype, end) = iri(line, after + 2, line_no)?;
        (Object::Literal { lexical, datatype }, end)
    } else {
        let (value, end) = iri(line, at, line_no)?;
        (Object::Iri(value), end)
    };
    let at = space(line, at, line_no)?;
    if &line[at..] != "." {
        return Err(syntax(line_no, at + 1, "expected terminating '.'"));
    }
    Ok(Triple {
        subject,
        predicate,
        predicate_col,
        object,
        object_col,
    })
}

/// `0` or a digit string without leading zeros.
fn canonical_uint(s: &str) -> Option<u64> {
    let ok = !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_digit())
        && (s == "0" || !s.starts_with('0'));
    if ok {
        s.parse().ok()
    } else {
        None
    }
}

/// `[+-]? digits ('.' digits)? ([eE] [+-]? digits)?`
fn decimal_real(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    if !digits(&mut i) {
        return None;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        if !digits(&mut i) {
            return None;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if !digits(&mut i) {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn expect_predicate(t: &Triple<'_>, name: &str, line_no: usize) -> Result<(), ParseError> {
    if t.predicate == name {
        Ok(())
    } else {
        Err(syntax(
            line_no,
            t.predicate_col,
            format!("expected predicate <{name}>, found <{}>", t.predicate),
        ))
    }
}

fn expect_iri<'a>(t: &Triple<'a>, line_no: usize) -> Result<&'a str, ParseError> {
    match t.object {
        Object::Iri(v) => Ok(v),
        Object::Literal { .. } => Err(syntax(line_no, t.object_col, "expected an IRI object")),
    }
}

fn expect_literal<'a>(t: &Triple<'a>, datatype: &str, line_no: usize) -> Result<&'a str, ParseError> {
    match t.object {
        Object::Literal { lexical, datatype: dt } if dt == datatype => Ok(lexical),
        Object::Literal { datatype: dt, .. } => Err(syntax(
            line_no,
            t.object_col,
            format!("expected datatype <{datatype}>, found <{dt}>"),
        )),
        Object::Iri(_) => Err(syntax(line_no, t.object_col, "expected a typed literal")),
    }
}

/// Parses and validates one complete message.
pub fn parse_group_reference(message: &[u8]) -> Result<ObservationGroup, ParseError> {
    let text = std::str::from_utf8(message).map_err(|e| {
        let before = &message[..e.valid_up_to()];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        syntax(line, column, "invalid UTF-8")
    })?;
    let Some(body) = text.strip_suffix('\n') else {
        let line = text.matches('\n').count() + 1;
        let column = text.rsplit('\n').next().map_or(0, str::len) + 1;
        return Err(syntax(line, column, "missing line terminator"));
    };
    let lines: Vec<&str> = body.split('\n').collect();
    if lines.len() < 3 {
        return Err(syntax(lines.len() + 1, 1, "header needs three lines"));
    }
    if !(lines.len() - 3).is_multiple_of(2) {
        return Err(syntax(lines.len() + 1, 1, "reading without a value line"));
    }

    let triples = lines
        .iter()
        .enumerate()
        .map(|(i, l)| triple(l, i + 1))
        .collect::<Result<Vec<_>, _>>()?;

    let subject = triples[0].subject;
    let group_id = subject
        .strip_prefix("og_")
        .and_then(canonical_uint)
        .ok_or_else(|| syntax(1, 2, format!("bad group subject <{subject}>")))?;
    for (i, t) in triples.iter().enumerate() {
        if t.subject != subject {
            return Err(syntax(i + 1, 2, format!("subject <{}> differs from <{subject}>", t.subject)));
        }
    }

    expect_predicate(&triples[0], "type", 1)?;
    if expect_iri(&triples[0], 1)? != "MoldingMachineObservationGroup" {
        return Err(syntax(1, triples[0].object_col, "unexpected group type"));
    }

    expect_predicate(&triples[1], "machine", 2)?;
    let machine_id = expect_iri(&triples[1], 2)?
        .strip_prefix("machine_")
        .and_then(canonical_uint)
        .and_then(|m| u32::try_from(m).ok())
        .ok_or_else(|| syntax(2, triples[1].object_col, "bad machine id"))?;

    expect_predicate(&triples[2], "timestamp", 3)?;
    let timestamp = canonical_uint(expect_literal(&triples[2], "long", 3)?)
        .ok_or_else(|| syntax(3, triples[2].object_col + 1, "bad timestamp"))?;

    let mut readings = Vec::with_capacity((triples.len() - 3) / 2);
    for pair in 0..(triples.len() - 3) / 2 {
        let (pl, vl) = (3 + 2 * pair, 4 + 2 * pair);
        let (prop, value) = (&triples[pl], &triples[vl]);
        expect_predicate(prop, "observedProperty", pl + 1)?;
        let name = expect_iri(prop, pl + 1)?;
        let property = name
            .strip_prefix('_')
            .and_then(|r| r.split_once('_'))
            .and_then(|(m, s)| Some((canonical_uint(m)?, canonical_uint(s)?)))
            .filter(|&(m, _)| m == u64::from(machine_id))
            .and_then(|(_, s)| u32::try_from(s).ok())
            .ok_or_else(|| syntax(pl + 1, prop.object_col, format!("bad property <{name}>")))?;
        if let Some(&(last, _)) = readings.last() {
            if property <= last {
                return Err(syntax(
                    pl + 1,
                    prop.object_col,
                    format!("property {property} out of order after {last}"),
                ));
            }
        }
        expect_predicate(value, "hasValue", vl + 1)?;
        let lexical = expect_literal(value, "double", vl + 1)?;
        let v = decimal_real(lexical)
            .ok_or_else(|| syntax(vl + 1, value.object_col + 1, format!("bad value {lexical:?}")))?;
        readings.push((property, v));
    }

    Ok(ObservationGroup {
        group_id,
        machine_id,
        timestamp,
        readings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::serialize_group;

    fn two_readings() -> ObservationGroup {
        ObservationGroup {
            group_id: 12,
            machine_id: 3,
            timestamp: 500,
            readings: vec![(0, 1.5), (1, -2.25)],
        }
    }

    #[test]
    fn parses_valid_block() {
        let g = two_readings();
        assert_eq!(parse_group_reference(&serialize_group(&g)), Ok(g));
    }

    #[test]
    fn rejects_out_of_order_properties() {
        let mut g = two_readings();
        g.readings = vec![(1, 1.0), (0, 2.0)];
        let err = parse_group_reference(&serialize_group(&g)).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 6, .. }), "{err}");
    }

    #[test]
    fn rejects_non_numeric_value() {
        let text = String::from_utf8(serialize_group(&two_readings()))
            .unwrap()
            .replace("\"-2.25\"", "\"-2.x5\"");
        let err = parse_group_reference(text.as_bytes()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 7, .. }), "{err}");
    }

    #[test]
    fn rejects_template_deviations() {
        let base = String::from_utf8(serialize_group(&two_readings())).unwrap();
        for (from, to) in [
            ("<machine_3>", "<machine_03>"),
            ("<_3_1>", "<_4_1>"),
            ("^^<long>", "^^<int>"),
            ("<og_12> <hasValue>", "<og_13> <hasValue>"),
            ("MoldingMachineObservationGroup", "Other"),
            (" .\n<og_12> <machine>", ".\n<og_12> <machine>"),
        ] {
            let bad = base.replacen(from, to, 1);
            assert!(parse_group_reference(bad.as_bytes()).is_err(), "{from} -> {to}");
        }
        assert!(parse_group_reference(base.trim_end().as_bytes()).is_err());
    }

    #[test]
    fn value_grammar() {
        for ok in ["0", "-1", "+2.5", "1.25e-7", "3E+10", "-0.0"] {
            assert!(decimal_real(ok).is_some(), "{ok}");
        }
        for bad in ["", ".5", "1.", "1e", "inf", "NaN", "1.5x", "--1", "1e400"] {
            assert!(decimal_real(bad).is_none(), "{bad}");
        }
    }
}
