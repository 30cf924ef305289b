//! Observation-group wire format.
//!
//! Every message is a fixed line template:
//!
//! ```text
//! <og_{G}> <type> <MoldingMachineObservationGroup> .
//! <og_{G}> <machine> <machine_{M}> .
//! <og_{G}> <timestamp> "{T}"^^<long> .
//! <og_{G}> <observedProperty> <_{M}_{S}> .     (repeated per reading)
//! <og_{G}> <hasValue> "{V}"^^<double> .
//! ```
//!
//! Because only the id digits vary in width, every field position follows
//! from the template plus those widths. [`fast`] exploits that; [`reference`]
//! tokenizes and validates everything and serves as the test oracle.

pub mod fast;
pub mod reference;

use std::io::Write;

use thiserror::Error;

use crate::model::ObservationGroup;

pub use fast::{
    parse_header, parse_header_with, parse_machine_id_fast, parse_machine_id_with,
    parse_next_reading, parse_next_reading_with, parse_routing, ByteTouches, Header,
    ParseCursor, Tally,
};
pub use reference::parse_group_reference;

pub(crate) const SUBJECT_OPEN: &[u8] = b"<og_";
pub(crate) const TYPE_REST: &[u8] = b"> <type> <MoldingMachineObservationGroup> .\n";
pub(crate) const MACHINE_MID: &[u8] = b"> <machine> <machine_";
pub(crate) const IRI_END: &[u8] = b"> .\n";
pub(crate) const TIMESTAMP_MID: &[u8] = b"> <timestamp> \"";
pub(crate) const LONG_END: &[u8] = b"\"^^<long> .\n";
pub(crate) const PROPERTY_MID: &[u8] = b"> <observedProperty> <_";
pub(crate) const VALUE_MID: &[u8] = b"> <hasValue> \"";
pub(crate) const DOUBLE_END: &[u8] = b"\"^^<double> .\n";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("template mismatch at byte {offset}")]
    Template { offset: usize },
    #[error("malformed number at byte {offset}")]
    Number { offset: usize },
    #[error("message truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("line {line}, column {column}: {reason}")]
    Syntax {
        line: usize,
        column: usize,
        reason: String,
    },
}

/// Appends the wire form of `group` to `out`.
///
/// Values use the shortest representation that parses back to the same `f64`.
pub fn write_group(out: &mut Vec<u8>, group: &ObservationGroup) {
    let g = group.group_id;
    let m = group.machine_id;
    // Writes into a Vec cannot fail.
    let _ = writeln!(out, "<og_{g}> <type> <MoldingMachineObservationGroup> .");
    let _ = writeln!(out, "<og_{g}> <machine> <machine_{m}> .");
    let _ = writeln!(out, "<og_{g}> <timestamp> \"{}\"^^<long> .", group.timestamp);
    for &(s, v) in &group.readings {
        assert!(v.is_finite(), "non-finite reading value {v}");
        let _ = writeln!(out, "<og_{g}> <observedProperty> <_{m}_{s}> .");
        let _ = writeln!(out, "<og_{g}> <hasValue> \"{v:?}\"^^<double> .");
    }
}

pub fn serialize_group(group: &ObservationGroup) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + 96 * group.readings.len());
    write_group(&mut out, group);
    out
}

/// Splits a concatenation of messages at every line that opens a new group
/// (`<og_{G}> <type> ...`).
pub fn frames(data: &[u8]) -> Frames<'_> {
    Frames { data, pos: 0 }
}

#[derive(Debug, Clone)]
pub struct Frames<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Frames<'a> {
    fn opens_group(line: &[u8]) -> bool {
        let Some(rest) = line.strip_prefix(SUBJECT_OPEN) else {
            return false;
        };
        let digits = rest.iter().take_while(|b| b.is_ascii_digit()).count();
        digits > 0 && rest[digits..].starts_with(b"> <type> ")
    }
}

impl<'a> Iterator for Frames<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        if self.pos >= self.data.len() {
            return None;
        }
        let start = self.pos;
        let mut cursor = match self.data[start..].iter().position(|&b| b == b'\n') {
            Some(i) => start + i + 1,
            None => self.data.len(),
        };
        while cursor < self.data.len() {
            let line_end = match self.data[cursor..].iter().position(|&b| b == b'\n') {
                Some(i) => cursor + i + 1,
                None => self.data.len(),
            };
            if Self::opens_group(&self.data[cursor..line_end]) {
                break;
            }
            cursor = line_end;
        }
        self.pos = cursor;
        Some(&self.data[start..cursor])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(g: u64, m: u32, t: u64, readings: &[(u32, f64)]) -> ObservationGroup {
        ObservationGroup {
            group_id: g,
            machine_id: m,
            timestamp: t,
            readings: readings.to_vec(),
        }
    }

    #[test]
    fn serializes_single_reading_block() {
        let text = String::from_utf8(serialize_group(&group(0, 7, 1000, &[(0, 1.5)]))).unwrap();
        assert_eq!(
            text,
            "<og_0> <type> <MoldingMachineObservationGroup> .\n\
             <og_0> <machine> <machine_7> .\n\
             <og_0> <timestamp> \"1000\"^^<long> .\n\
             <og_0> <observedProperty> <_7_0> .\n\
             <og_0> <hasValue> \"1.5\"^^<double> .\n"
        );
    }

    #[test]
    fn serializes_readings_in_property_order() {
        let text =
            String::from_utf8(serialize_group(&group(3, 1, 20, &[(0, 1.0), (1, -2.25)]))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[3], "<og_3> <observedProperty> <_1_0> .");
        assert_eq!(lines[5], "<og_3> <observedProperty> <_1_1> .");
        assert_eq!(lines[6], "<og_3> <hasValue> \"-2.25\"^^<double> .");
    }

    #[test]
    fn frames_split_at_group_openers() {
        let a = serialize_group(&group(9, 1, 10, &[(0, 1.0), (2, 3.0)]));
        let b = serialize_group(&group(10, 2, 10, &[]));
        let c = serialize_group(&group(11, 3, 20, &[(5, 0.5)]));
        let all = [a.clone(), b.clone(), c.clone()].concat();
        let parts: Vec<&[u8]> = frames(&all).collect();
        assert_eq!(parts, vec![&a[..], &b[..], &c[..]]);
        assert_eq!(frames(b"").count(), 0);
    }
}
