//! Fixed-offset parsing.
//!
//! The parser reads the group-id width once, then jumps over constant template
//! text and scans only the variable fields. Reading is strictly forward from the
//! cursor and every inspected byte is reported to a [`Tally`], which is a no-op
//! in production and a counter in tests.

use super::{
    ParseError, IRI_END, LONG_END, MACHINE_MID, PROPERTY_MID, SUBJECT_OPEN, TIMESTAMP_MID,
    TYPE_REST, DOUBLE_END, VALUE_MID,
};

/// Observer of byte inspections made by the fast parser.
pub trait Tally {
    fn touch(&mut self, offset: usize, len: usize);
}

impl Tally for () {
    #[inline(always)]
    fn touch(&mut self, _offset: usize, _len: usize) {}
}

/// Counts inspected bytes and remembers the lowest inspected offset.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ByteTouches {
    pub bytes: usize,
    pub lowest: Option<usize>,
}

impl Tally for ByteTouches {
    fn touch(&mut self, offset: usize, len: usize) {
        self.bytes += len;
        self.lowest = Some(self.lowest.map_or(offset, |l| l.min(offset)));
    }
}

/// Position inside a message between streamed readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseCursor {
    offset: usize,
    readings_emitted: usize,
    group_width: usize,
    machine_width: usize,
}

impl ParseCursor {
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn readings_emitted(&self) -> usize {
        self.readings_emitted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub group_id: u64,
    pub machine_id: u32,
    pub timestamp: u64,
    pub cursor: ParseCursor,
}

struct Scan<'m, 't, T: Tally> {
    bytes: &'m [u8],
    pos: usize,
    tally: &'t mut T,
}

impl<'m, 't, T: Tally> Scan<'m, 't, T> {
    fn new(bytes: &'m [u8], pos: usize, tally: &'t mut T) -> Self {
        Self { bytes, pos, tally }
    }

    #[inline]
    fn literal(&mut self, lit: &[u8]) -> Result<(), ParseError> {
        let end = self.pos + lit.len();
        if end > self.bytes.len() {
            return Err(ParseError::Truncated { offset: self.pos });
        }
        self.tally.touch(self.pos, lit.len());
        let got = &self.bytes[self.pos..end];
        if got != lit {
            let at = got.iter().zip(lit).position(|(a, b)| a != b).unwrap_or(0);
            return Err(ParseError::Template { offset: self.pos + at });
        }
        self.pos = end;
        Ok(())
    }

    #[inline]
    fn skip(&mut self, n: usize) -> Result<(), ParseError> {
        if self.pos + n > self.bytes.len() {
            return Err(ParseError::Truncated { offset: self.pos });
        }
        self.pos += n;
        Ok(())
    }

    /// Decimal digits up to the first non-digit; returns value and width.
    #[inline]
    fn number(&mut self) -> Result<(u64, usize), ParseError> {
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or(ParseError::Number { offset: start })?;
            self.pos += 1;
        }
        let width = self.pos - start;
        // digits plus the terminating byte that stopped the scan
        self.tally.touch(start, (width + 1).min(self.bytes.len() - start));
        if width == 0 {
            return Err(ParseError::Number { offset: start });
        }
        Ok((value, width))
    }

    fn real(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        let len = self.bytes[start..]
            .iter()
            .position(|&b| b == b'"')
            .ok_or(ParseError::Truncated { offset: start })?;
        self.tally.touch(start, len);
        self.pos += len;
        std::str::from_utf8(&self.bytes[start..start + len])
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or(ParseError::Number { offset: start })
    }
}

fn to_u32(value: u64, offset: usize) -> Result<u32, ParseError> {
    u32::try_from(value).map_err(|_| ParseError::Number { offset })
}

/// Machine id of a well-formed message, read at its template offset.
pub fn parse_machine_id_fast(message: &[u8]) -> Result<u32, ParseError> {
    parse_machine_id_with(message, &mut ())
}

pub fn parse_machine_id_with<T: Tally>(message: &[u8], tally: &mut T) -> Result<u32, ParseError> {
    let mut s = Scan::new(message, 0, tally);
    machine_id(&mut s).map(|(m, _, _)| m)
}

/// Returns `(machine id, group-id width, machine-id width)`.
fn machine_id<T: Tally>(s: &mut Scan<'_, '_, T>) -> Result<(u32, usize, usize), ParseError> {
    s.literal(SUBJECT_OPEN)?;
    let (_, group_width) = s.number()?;
    s.skip(TYPE_REST.len() + SUBJECT_OPEN.len() + group_width)?;
    s.literal(MACHINE_MID)?;
    let at = s.pos;
    let (machine, machine_width) = s.number()?;
    s.literal(IRI_END)?;
    Ok((to_u32(machine, at)?, group_width, machine_width))
}

/// Machine id and timestamp, the two header fields the dispatcher needs.
pub fn parse_routing(message: &[u8]) -> Result<(u32, u64), ParseError> {
    let mut tally = ();
    let mut s = Scan::new(message, 0, &mut tally);
    let (machine, group_width, _) = machine_id(&mut s)?;
    s.literal(SUBJECT_OPEN)?;
    s.skip(group_width)?;
    s.literal(TIMESTAMP_MID)?;
    let (timestamp, _) = s.number()?;
    Ok((machine, timestamp))
}

pub fn parse_header(message: &[u8]) -> Result<Header, ParseError> {
    parse_header_with(message, &mut ())
}

pub fn parse_header_with<T: Tally>(message: &[u8], tally: &mut T) -> Result<Header, ParseError> {
    let mut s = Scan::new(message, 0, tally);
    s.literal(SUBJECT_OPEN)?;
    let (group_id, group_width) = s.number()?;
    s.literal(TYPE_REST)?;
    s.literal(SUBJECT_OPEN)?;
    s.skip(group_width)?;
    s.literal(MACHINE_MID)?;
    let at = s.pos;
    let (machine, machine_width) = s.number()?;
    s.literal(IRI_END)?;
    s.literal(SUBJECT_OPEN)?;
    s.skip(group_width)?;
    s.literal(TIMESTAMP_MID)?;
    let (timestamp, _) = s.number()?;
    s.literal(LONG_END)?;
    Ok(Header {
        group_id,
        machine_id: to_u32(machine, at)?,
        timestamp,
        cursor: ParseCursor {
            offset: s.pos,
            readings_emitted: 0,
            group_width,
            machine_width,
        },
    })
}

/// Next `(property, value)` pair, or `None` once the message is exhausted.
pub fn parse_next_reading(
    message: &[u8],
    cursor: &mut ParseCursor,
) -> Result<Option<(u32, f64)>, ParseError> {
    parse_next_reading_with(message, cursor, &mut ())
}

pub fn parse_next_reading_with<T: Tally>(
    message: &[u8],
    cursor: &mut ParseCursor,
    tally: &mut T,
) -> Result<Option<(u32, f64)>, ParseError> {
    if cursor.offset >= message.len() {
        return Ok(None);
    }
    let mut s = Scan::new(message, cursor.offset, tally);
    s.literal(SUBJECT_OPEN)?;
    s.skip(cursor.group_width)?;
    s.literal(PROPERTY_MID)?;
    s.skip(cursor.machine_width)?;
    s.literal(b"_")?;
    let at = s.pos;
    let (property, _) = s.number()?;
    s.literal(IRI_END)?;
    s.literal(SUBJECT_OPEN)?;
    s.skip(cursor.group_width)?;
    s.literal(VALUE_MID)?;
    let value = s.real()?;
    s.literal(DOUBLE_END)?;
    cursor.offset = s.pos;
    cursor.readings_emitted += 1;
    Ok(Some((to_u32(property, at)?, value)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationGroup;
    use crate::wire::serialize_group;

    fn message(g: u64, m: u32, t: u64, readings: &[(u32, f64)]) -> Vec<u8> {
        serialize_group(&ObservationGroup {
            group_id: g,
            machine_id: m,
            timestamp: t,
            readings: readings.to_vec(),
        })
    }

    #[test]
    fn machine_id_single_digit() {
        assert_eq!(parse_machine_id_fast(&message(0, 7, 1000, &[(0, 1.5)])), Ok(7));
    }

    #[test]
    fn machine_id_wide_ids() {
        let m = message(123_456, 999, 5, &[(0, 1.0), (3, 2.0)]);
        assert_eq!(parse_machine_id_fast(&m), Ok(999));
        assert_eq!(parse_routing(&m), Ok((999, 5)));
    }

    #[test]
    fn corrupted_machine_line_is_rejected() {
        let mut m = message(0, 7, 1000, &[(0, 1.5)]);
        let line2 = m.iter().position(|&b| b == b'\n').unwrap() + 1;
        // "<og_0> <machine>" -> "<og_0> <mXchine>"
        m[line2 + 9] = b'X';
        assert!(matches!(
            parse_machine_id_fast(&m),
            Err(ParseError::Template { offset }) if offset == line2 + 9
        ));
        assert!(parse_header(&m).is_err());
    }

    #[test]
    fn header_fields_and_cursor() {
        let m = message(0, 7, 1000, &[(0, 1.5)]);
        let h = parse_header(&m).unwrap();
        assert_eq!((h.group_id, h.machine_id, h.timestamp), (0, 7, 1000));
        let line4 = m
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .nth(2)
            .map(|(i, _)| i + 1)
            .unwrap();
        assert_eq!(h.cursor.offset(), line4);

        let z = parse_header(&message(10, 0, 0, &[])).unwrap();
        assert_eq!((z.group_id, z.machine_id, z.timestamp), (10, 0, 0));
    }

    #[test]
    fn streams_readings_until_exhausted() {
        let m = message(4, 2, 30, &[(0, 1.5), (1, -2.25)]);
        let mut c = parse_header(&m).unwrap().cursor;
        assert_eq!(parse_next_reading(&m, &mut c), Ok(Some((0, 1.5))));
        let after_first = c.offset();
        assert_eq!(parse_next_reading(&m, &mut c), Ok(Some((1, -2.25))));
        assert!(c.offset() > after_first);
        assert_eq!(c.offset(), m.len());
        assert_eq!(c.readings_emitted(), 2);
        assert_eq!(parse_next_reading(&m, &mut c), Ok(None));
    }

    #[test]
    fn non_numeric_value_is_rejected() {
        let m = String::from_utf8(message(1, 1, 1, &[(0, 1.5)]))
            .unwrap()
            .replace("\"1.5\"", "\"abc\"");
        let m = m.into_bytes();
        let mut c = parse_header(&m).unwrap().cursor;
        assert!(matches!(parse_next_reading(&m, &mut c), Err(ParseError::Number { .. })));
    }

    #[test]
    fn reading_parse_never_looks_behind_cursor() {
        let m = message(77, 12, 99, &[(0, 1.0), (5, 2.5e-9), (11, -3.0)]);
        let mut c = parse_header(&m).unwrap().cursor;
        loop {
            let start = c.offset();
            let mut t = ByteTouches::default();
            match parse_next_reading_with(&m, &mut c, &mut t).unwrap() {
                Some(_) => assert!(t.lowest.unwrap() >= start),
                None => break,
            }
        }
    }

    mod props {
        use super::*;
        use crate::wire::parse_group_reference;
        use proptest::prelude::*;

        fn group() -> impl Strategy<Value = ObservationGroup> {
            let value = prop_oneof![
                any::<f64>().prop_filter("finite", |v| v.is_finite()),
                (-1000i32..1000).prop_map(|v| f64::from(v) / 8.0),
            ];
            (
                any::<u64>(),
                any::<u32>(),
                any::<u64>(),
                prop::collection::btree_map(any::<u32>(), value, 0..8),
            )
                .prop_map(|(group_id, machine_id, timestamp, readings)| ObservationGroup {
                    group_id,
                    machine_id,
                    timestamp,
                    readings: readings.into_iter().collect(),
                })
        }

        proptest! {
            #[test]
            fn fast_path_equals_reference(g in group()) {
                let m = serialize_group(&g);
                let header = parse_header(&m).unwrap();
                let mut cursor = header.cursor;
                let mut readings = Vec::new();
                loop {
                    let before = cursor.offset();
                    let mut touches = ByteTouches::default();
                    match parse_next_reading_with(&m, &mut cursor, &mut touches).unwrap() {
                        Some(r) => {
                            prop_assert!(cursor.offset() > before);
                            prop_assert!(touches.lowest.unwrap() >= before);
                            readings.push(r);
                        }
                        None => break,
                    }
                }
                let fast = ObservationGroup {
                    group_id: header.group_id,
                    machine_id: header.machine_id,
                    timestamp: header.timestamp,
                    readings,
                };
                prop_assert_eq!(&fast, &parse_group_reference(&m).unwrap());
                prop_assert_eq!(fast, g);
            }
        }
    }
}
