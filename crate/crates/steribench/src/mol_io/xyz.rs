//! Multi-block XYZ reader/writer.
//!
//! Each block is a count line, a comment line, and N `symbol x y z` lines.
//! Blocks may be concatenated back to back; blank lines between blocks are
//! tolerated. Coordinates are written with 6 decimal places.

use thiserror::Error;

use super::elements::{self, ElementInfo};
use super::types::{Conformer, MolecularGraph};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("malformed atom count '{text}' at line {line}")]
    MalformedCount { line: usize, text: String },
    #[error("unknown element {symbol} at line {line}")]
    UnknownElement { line: usize, symbol: String },
    #[error("non-numeric coordinate '{text}' at line {line}")]
    NonNumericCoordinate { line: usize, text: String },
    #[error("expected {expected} fields at line {line}, found {found}")]
    FieldCount { line: usize, expected: usize, found: usize },
    #[error("unexpected end of input at line {line}")]
    UnexpectedEof { line: usize },
    #[error("counts line declares {declared} {what} but block has fewer (line {line})")]
    CountsMismatch { line: usize, declared: usize, what: &'static str },
    #[error("unsupported bond order {code} at line {line}")]
    UnsupportedBondOrder { line: usize, code: u32 },
    #[error("invalid molecule at line {line}: {source}")]
    InvalidGraph {
        line: usize,
        #[source]
        source: super::types::GraphError,
    },
    #[error("missing V2000 marker on counts line {line}")]
    MissingV2000 { line: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct XyzAtom {
    pub element: &'static ElementInfo,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct XyzBlock {
    pub comment: String,
    pub atoms: Vec<XyzAtom>,
}

/// Parse concatenated XYZ blocks. Errors carry 1-based line numbers.
pub fn parse_xyz(text: &str) -> Result<Vec<XyzBlock>, ParseError> {
    let mut lines = text.lines().enumerate().peekable();
    let mut blocks = Vec::new();
    loop {
        // Skip blank separator lines between blocks.
        while let Some((_, line)) = lines.peek() {
            if line.trim().is_empty() {
                lines.next();
            } else {
                break;
            }
        }
        let Some((idx, count_line)) = lines.next() else {
            break;
        };
        let count: usize = count_line.trim().parse().map_err(|_| ParseError::MalformedCount {
            line: idx + 1,
            text: count_line.trim().to_string(),
        })?;
        let comment = match lines.next() {
            Some((_, c)) => c.to_string(),
            None => return Err(ParseError::UnexpectedEof { line: idx + 2 }),
        };
        let mut atoms = Vec::with_capacity(count);
        for _ in 0..count {
            let Some((aidx, atom_line)) = lines.next() else {
                return Err(ParseError::UnexpectedEof { line: idx + 2 + atoms.len() + 1 });
            };
            atoms.push(parse_atom_line(atom_line, aidx + 1)?);
        }
        blocks.push(XyzBlock { comment, atoms });
    }
    Ok(blocks)
}

fn parse_atom_line(line: &str, line_no: usize) -> Result<XyzAtom, ParseError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(ParseError::FieldCount { line: line_no, expected: 4, found: fields.len() });
    }
    let element = elements::by_symbol(fields[0]).ok_or_else(|| ParseError::UnknownElement {
        line: line_no,
        symbol: fields[0].to_string(),
    })?;
    let mut position = [0.0; 3];
    for (k, field) in fields[1..4].iter().enumerate() {
        position[k] = field.parse().map_err(|_| ParseError::NonNumericCoordinate {
            line: line_no,
            text: field.to_string(),
        })?;
    }
    Ok(XyzAtom { element, position })
}

/// Write one block per conformer. The comment line records the conformer id
/// and, when present, its energy in kcal/mol.
pub fn write_xyz(graph: &MolecularGraph, conformers: &[Conformer]) -> String {
    let mut out = String::new();
    for conformer in conformers {
        out.push_str(&format!("{}\n", graph.atom_count()));
        match conformer.energy {
            Some(e) => out.push_str(&format!("id={} energy={:.6}\n", conformer.id, e)),
            None => out.push_str(&format!("id={}\n", conformer.id)),
        }
        for (atom, pos) in graph.atoms().iter().zip(&conformer.coords) {
            let symbol = elements::by_atomic_number(atom.atomic_number)
                .map(|e| e.symbol)
                .unwrap_or("X");
            out.push_str(&format!(
                "{:<2} {:>13.6} {:>13.6} {:>13.6}\n",
                symbol, pos[0], pos[1], pos[2]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol_io::types::{Atom, Bond, BondOrder, QualityTier};

    #[test]
    fn minimal_single_block() {
        let blocks = parse_xyz("1\n\nC 0.0 0.0 0.0").unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].atoms.len(), 1);
        assert_eq!(blocks[0].atoms[0].element.symbol, "C");
        assert_eq!(blocks[0].atoms[0].position, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn concatenated_blocks() {
        let text = "2\nfirst\nC 0 0 0\nO 1.2 0 0\n2\nsecond\nN 0 0 0\nH 1 0 0\n";
        let blocks = parse_xyz(text).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].comment, "first");
        assert_eq!(blocks[1].atoms[0].element.symbol, "N");
    }

    #[test]
    fn unknown_element_names_line() {
        let err = parse_xyz("1\n\nXx 0 0 0").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownElement { line: 3, symbol: "Xx".to_string() }
        );
        assert_eq!(err.to_string(), "unknown element Xx at line 3");
    }

    #[test]
    fn bad_count_and_bad_coordinate() {
        assert!(matches!(
            parse_xyz("x\n\n"),
            Err(ParseError::MalformedCount { line: 1, .. })
        ));
        assert!(matches!(
            parse_xyz("1\n\nC a 0 0"),
            Err(ParseError::NonNumericCoordinate { line: 3, .. })
        ));
        assert!(matches!(parse_xyz("2\n\nC 0 0 0\n"), Err(ParseError::UnexpectedEof { .. })));
    }

    #[test]
    fn write_then_parse_preserves_coordinates() {
        let graph = MolecularGraph::new(
            vec![Atom::new(6), Atom::new(8)],
            vec![Bond::new(0, 1, BondOrder::Double)],
        )
        .unwrap();
        let conformer = Conformer::new(
            7,
            vec![[0.123456, -1.5, 2.0], [3.25, 0.000001, -9.875]],
            Some(-2.5),
            QualityTier::Exact,
        );
        let text = write_xyz(&graph, &[conformer.clone()]);
        let blocks = parse_xyz(&text).unwrap();
        assert_eq!(blocks.len(), 1);
        for (atom, orig) in blocks[0].atoms.iter().zip(&conformer.coords) {
            for k in 0..3 {
                assert!((atom.position[k] - orig[k]).abs() < 1e-6);
            }
        }
        assert_eq!(blocks[0].comment, "id=7 energy=-2.500000");
    }
}
