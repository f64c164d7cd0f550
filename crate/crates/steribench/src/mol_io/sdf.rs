//! SDF / MDL molfile V2000 reader and writer.
//!
//! Only the connection table is interpreted: a counts line, fixed-width atom
//! lines, and bond lines. Properties up to `M  END` / `$$$$` are skipped.
//! Bond types 1-3 are supported; aromatic perception is out of scope.

use super::elements;
use super::types::{Atom, Bond, BondOrder, Conformer, MolecularGraph, QualityTier};
use super::xyz::ParseError;

/// Parse one V2000 molfile. The returned graph has no descriptor bond; the
/// caller assigns it.
pub fn parse_sdf_v2000(text: &str) -> Result<(MolecularGraph, Conformer), ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    // Three header lines (title, program, comment) precede the counts line.
    if lines.len() < 4 {
        return Err(ParseError::UnexpectedEof { line: lines.len() + 1 });
    }
    let counts_line_no = 4;
    let counts = lines[3];
    if counts.len() < 6 {
        return Err(ParseError::MalformedCount { line: counts_line_no, text: counts.to_string() });
    }
    if !counts.contains("V2000") {
        return Err(ParseError::MissingV2000 { line: counts_line_no });
    }
    let n_atoms = parse_fixed_usize(counts, 0, 3, counts_line_no)?;
    let n_bonds = parse_fixed_usize(counts, 3, 6, counts_line_no)?;

    let mut atoms = Vec::with_capacity(n_atoms);
    let mut coords = Vec::with_capacity(n_atoms);
    for k in 0..n_atoms {
        let line_no = counts_line_no + 1 + k;
        let line = lines.get(counts_line_no + k).copied().ok_or(ParseError::CountsMismatch {
            line: counts_line_no,
            declared: n_atoms,
            what: "atoms",
        })?;
        if line.len() < 34 {
            return Err(ParseError::CountsMismatch {
                line: counts_line_no,
                declared: n_atoms,
                what: "atoms",
            });
        }
        let x = parse_fixed_f64(line, 0, 10, line_no)?;
        let y = parse_fixed_f64(line, 10, 20, line_no)?;
        let z = parse_fixed_f64(line, 20, 30, line_no)?;
        let symbol = line[31..34.min(line.len())].trim();
        let element = elements::by_symbol(symbol).ok_or_else(|| ParseError::UnknownElement {
            line: line_no,
            symbol: symbol.to_string(),
        })?;
        atoms.push(Atom::new(element.atomic_number));
        coords.push([x, y, z]);
    }

    let mut bonds = Vec::with_capacity(n_bonds);
    for k in 0..n_bonds {
        let line_no = counts_line_no + 1 + n_atoms + k;
        let line =
            lines.get(counts_line_no + n_atoms + k).copied().ok_or(ParseError::CountsMismatch {
                line: counts_line_no,
                declared: n_bonds,
                what: "bonds",
            })?;
        if line.len() < 9 {
            return Err(ParseError::CountsMismatch {
                line: counts_line_no,
                declared: n_bonds,
                what: "bonds",
            });
        }
        let i = parse_fixed_usize(line, 0, 3, line_no)?;
        let j = parse_fixed_usize(line, 3, 6, line_no)?;
        let code = parse_fixed_usize(line, 6, 9, line_no)? as u32;
        if i == 0 || j == 0 || i > n_atoms || j > n_atoms {
            return Err(ParseError::CountsMismatch {
                line: counts_line_no,
                declared: n_atoms,
                what: "atoms",
            });
        }
        let order = BondOrder::from_sdf_code(code)
            .ok_or(ParseError::UnsupportedBondOrder { line: line_no, code })?;
        bonds.push(Bond::new(i - 1, j - 1, order));
    }

    let graph = MolecularGraph::new(atoms, bonds)
        .map_err(|source| ParseError::InvalidGraph { line: counts_line_no, source })?;
    let conformer = Conformer::new(0, coords, None, QualityTier::Exact);
    Ok((graph, conformer))
}

fn parse_fixed_usize(line: &str, start: usize, end: usize, line_no: usize) -> Result<usize, ParseError> {
    let slice = field(line, start, end);
    slice.trim().parse().map_err(|_| ParseError::MalformedCount {
        line: line_no,
        text: slice.trim().to_string(),
    })
}

fn parse_fixed_f64(line: &str, start: usize, end: usize, line_no: usize) -> Result<f64, ParseError> {
    let slice = field(line, start, end);
    slice.trim().parse().map_err(|_| ParseError::NonNumericCoordinate {
        line: line_no,
        text: slice.trim().to_string(),
    })
}

fn field(line: &str, start: usize, end: usize) -> &str {
    let len = line.len();
    if start >= len {
        ""
    } else {
        &line[start..end.min(len)]
    }
}

/// Write one V2000 molfile. Coordinates use the format's fixed 4 decimals.
pub fn write_sdf_v2000(graph: &MolecularGraph, conformer: &Conformer) -> String {
    let mut out = String::new();
    out.push('\n');
    out.push_str("steribench\n");
    out.push('\n');
    out.push_str(&format!(
        "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000\n",
        graph.atom_count(),
        graph.bonds().len()
    ));
    for (atom, pos) in graph.atoms().iter().zip(&conformer.coords) {
        let symbol = elements::by_atomic_number(atom.atomic_number)
            .map(|e| e.symbol)
            .unwrap_or("X");
        out.push_str(&format!(
            "{:>10.4}{:>10.4}{:>10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0\n",
            pos[0], pos[1], pos[2], symbol
        ));
    }
    for bond in graph.bonds() {
        out.push_str(&format!(
            "{:>3}{:>3}{:>3}  0\n",
            bond.i + 1,
            bond.j + 1,
            bond.order.sdf_code()
        ));
    }
    out.push_str("M  END\n$$$$\n");
    out
}
