//! The trajectory CSV format: a header `index,x1,...,xn`, one row per
//! sample, blank lines separating runs. Indexes are in original units; the
//! sampling interval is inferred and must be uniform across the dataset.

use crate::trajectory::{Trajectory, TrajectorySet};
use thiserror::Error;

/// Relative tolerance for index comparisons (spacing uniformity and
/// `--select-indices` matching).
pub const INDEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("input is empty")]
    EmptyInput,
    #[error("line {line}: expected header starting with `index`, got `{got}`")]
    BadHeader { line: usize, got: String },
    #[error("line {line}: expected {expected} fields, got {got}")]
    FieldCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: `{value}` is not a finite number")]
    BadNumber { line: usize, value: String },
    #[error("line {line}: index {index} does not increase")]
    NonIncreasingIndex { line: usize, index: f64 },
    #[error(
        "irregular sampling: gap {got} at line {line} differs from {expected}; \
         re-run with --select-indices to pick a uniformly spaced subset"
    )]
    IrregularSpacing {
        line: usize,
        expected: f64,
        got: f64,
    },
    #[error("a run has fewer than 2 samples after filtering")]
    TrajectoryTooShort,
    #[error("selected index {0} not present in the data")]
    SelectIndexNotFound(f64),
    #[error(transparent)]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
}

/// One parsed run: original-unit indexes and the state rows.
#[derive(Debug, Clone)]
pub struct Block {
    pub indexes: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Parse one CSV document into blocks. Blank lines separate runs; a single
/// header covers the whole document.
pub fn parse_blocks(text: &str) -> Result<Vec<Block>, CsvError> {
    let mut lines = text.lines().enumerate();
    let (header_line, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or(CsvError::EmptyInput)?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() < 2 || !fields[0].eq_ignore_ascii_case("index") {
        return Err(CsvError::BadHeader {
            line: header_line + 1,
            got: header.trim().into(),
        });
    }
    let width = fields.len();

    let mut blocks: Vec<Block> = Vec::new();
    let mut current = Block {
        indexes: Vec::new(),
        states: Vec::new(),
    };
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            if !current.indexes.is_empty() {
                blocks.push(std::mem::replace(
                    &mut current,
                    Block {
                        indexes: Vec::new(),
                        states: Vec::new(),
                    },
                ));
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(CsvError::FieldCount {
                line: lineno + 1,
                expected: width,
                got: cells.len(),
            });
        }
        let mut row = Vec::with_capacity(width);
        for cell in &cells {
            let v: f64 = cell.parse().map_err(|_| CsvError::BadNumber {
                line: lineno + 1,
                value: (*cell).into(),
            })?;
            if !v.is_finite() {
                return Err(CsvError::BadNumber {
                    line: lineno + 1,
                    value: (*cell).into(),
                });
            }
            row.push(v);
        }
        let index = row[0];
        if let Some(&prev) = current.indexes.last() {
            if index <= prev {
                return Err(CsvError::NonIncreasingIndex {
                    line: lineno + 1,
                    index,
                });
            }
        }
        current.indexes.push(index);
        current.states.push(row[1..].to_vec());
    }
    if !current.indexes.is_empty() {
        blocks.push(current);
    }
    if blocks.is_empty() {
        return Err(CsvError::EmptyInput);
    }
    Ok(blocks)
}

fn index_matches(a: f64, b: f64) -> bool {
    (a - b).abs() <= INDEX_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Keep only rows whose index matches one of `wanted`. Every requested
/// index must be found in at least one block.
pub fn select_indices(blocks: &[Block], wanted: &[f64]) -> Result<Vec<Block>, CsvError> {
    for &w in wanted {
        let found = blocks
            .iter()
            .any(|b| b.indexes.iter().any(|&i| index_matches(i, w)));
        if !found {
            return Err(CsvError::SelectIndexNotFound(w));
        }
    }
    Ok(blocks
        .iter()
        .map(|b| {
            let mut out = Block {
                indexes: Vec::new(),
                states: Vec::new(),
            };
            for (i, &idx) in b.indexes.iter().enumerate() {
                if wanted.iter().any(|&w| index_matches(idx, w)) {
                    out.indexes.push(idx);
                    out.states.push(b.states[i].clone());
                }
            }
            out
        })
        .filter(|b| !b.indexes.is_empty())
        .collect())
}

/// Validate uniform spacing across all blocks and build the trajectory set.
///
/// With a single run the set keeps the run's first index as its start; with
/// several runs there is no shared origin and the set is anchored at zero.
pub fn assemble(blocks: &[Block]) -> Result<TrajectorySet, CsvError> {
    if blocks.is_empty() {
        return Err(CsvError::EmptyInput);
    }
    let mut delta_k: Option<f64> = None;
    let mut line = 0usize;
    for b in blocks {
        if b.indexes.len() < 2 {
            return Err(CsvError::TrajectoryTooShort);
        }
        for w in b.indexes.windows(2) {
            line += 1;
            let gap = w[1] - w[0];
            match delta_k {
                None => delta_k = Some(gap),
                Some(dk) => {
                    if (gap - dk).abs() > INDEX_TOLERANCE * dk.abs() {
                        return Err(CsvError::IrregularSpacing {
                            line,
                            expected: dk,
                            got: gap,
                        });
                    }
                }
            }
        }
    }
    let delta_k = delta_k.unwrap();
    let start_index = if blocks.len() == 1 {
        blocks[0].indexes[0]
    } else {
        0.0
    };
    let trajectories = blocks
        .iter()
        .map(|b| Trajectory::new(b.states.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectorySet::new(trajectories, delta_k, start_index)?)
}

/// Render a trajectory set back to CSV. The first run starts at the set's
/// start index; later runs (which have no shared origin) restart at zero.
pub fn write_trajectories(set: &TrajectorySet) -> String {
    let n = set.dim();
    let mut out = String::from("index");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t_idx, t) in set.trajectories().iter().enumerate() {
        if t_idx > 0 {
            out.push('\n');
        }
        let start = if t_idx == 0 { set.start_index() } else { 0.0 };
        for (m, state) in t.states().iter().enumerate() {
            out.push_str(&format_index(start + m as f64 * set.delta_k()));
            for v in state {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Prediction CSV: `index,x1..xn,imag_residual`.
pub fn write_predictions(rows: &[(f64, Vec<f64>, f64)], n: usize) -> String {
    let mut out = String::from("index");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",imag_residual\n");
    for (index, state, residual) in rows {
        out.push_str(&format_index(*index));
        for v in state {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push_str(&format!(",{residual}\n"));
    }
    out
}

/// Indexes print in shortest round-trip form; integral values keep a
/// trailing `.0`-free form (e.g. `3`, `3.5`).
fn format_index(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPLE: &str = "index,x1,x2\n0,1.0,2.0\n1,1.5,2.5\n2,2.0,3.0\n";

    #[test]
    fn parse_and_assemble_single_run() {
        let blocks = parse_blocks(SIMPLE).unwrap();
        assert_eq!(blocks.len(), 1);
        let set = assemble(&blocks).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.delta_k(), 1.0);
        assert_eq!(set.start_index(), 0.0);
        assert_eq!(set.trajectories()[0].len(), 3);
    }

    #[test]
    fn blank_lines_split_runs() {
        let text = "index,x1\n0,1\n1,2\n\n0,5\n1,6\n2,7\n";
        let blocks = parse_blocks(text).unwrap();
        assert_eq!(blocks.len(), 2);
        let set = assemble(&blocks).unwrap();
        assert_eq!(set.trajectories().len(), 2);
        assert_eq!(set.start_index(), 0.0);
        assert_eq!(set.pair_count(), 3);
    }

    #[test]
    fn header_required() {
        assert!(matches!(
            parse_blocks("time,x1\n0,1\n"),
            Err(CsvError::BadHeader { .. })
        ));
        assert!(matches!(parse_blocks(""), Err(CsvError::EmptyInput)));
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(matches!(
            parse_blocks("index,x1\n0,1,9\n"),
            Err(CsvError::FieldCount {
                line: 2,
                expected: 2,
                got: 3
            })
        ));
        assert!(matches!(
            parse_blocks("index,x1\n0,abc\n"),
            Err(CsvError::BadNumber { line: 2, .. })
        ));
        assert!(matches!(
            parse_blocks("index,x1\n1,1\n0.5,2\n"),
            Err(CsvError::NonIncreasingIndex { line: 3, .. })
        ));
    }

    #[test]
    fn irregular_spacing_mentions_select_indices() {
        let text = "index,x1\n0,1\n0.5,2\n1,3\n2,4\n";
        let blocks = parse_blocks(text).unwrap();
        let err = assemble(&blocks).unwrap_err();
        assert!(err.to_string().contains("--select-indices"), "{err}");
    }

    #[test]
    fn select_then_assemble_recovers_uniform_subset() {
        let text = "index,x1\n0,1\n0.5,2\n1,3\n1.5,4\n2,5\n3,6\n4,7\n5,8\n";
        let blocks = parse_blocks(text).unwrap();
        assert!(assemble(&blocks).is_err());
        // The half-integer prefix is uniform at 0.5.
        let subset = select_indices(&blocks, &[0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
        let set = assemble(&subset).unwrap();
        assert_eq!(set.delta_k(), 0.5);
        assert_eq!(set.trajectories()[0].len(), 5);
        // The integer subset is uniform at 1.
        let subset = select_indices(&blocks, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let set = assemble(&subset).unwrap();
        assert_eq!(set.delta_k(), 1.0);
        // Asking for an index that is not present fails loudly.
        assert!(matches!(
            select_indices(&blocks, &[0.0, 0.25]),
            Err(CsvError::SelectIndexNotFound(_))
        ));
    }

    #[test]
    fn nonzero_start_preserved_for_single_run() {
        let text = "index,x1\n4,1\n5,2\n6,4\n";
        let set = assemble(&parse_blocks(text).unwrap()).unwrap();
        assert_eq!(set.start_index(), 4.0);
    }

    #[test]
    fn write_parse_round_trip() {
        let set = TrajectorySet::single(
            vec![vec![1.0, 2.0], vec![0.9, 1.5], vec![0.81, 1.125]],
            0.5,
            1.0,
        )
        .unwrap();
        let text = write_trajectories(&set);
        let back = assemble(&parse_blocks(&text).unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn prediction_csv_layout() {
        let rows = vec![(0.0, vec![1.0, 2.0], 1e-17), (3.5, vec![0.5, 0.25], 2e-17)];
        let text = write_predictions(&rows, 2);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,x1,x2,imag_residual"));
        assert_eq!(lines.next(), Some("0,1,2,0.00000000000000001"));
        assert_eq!(lines.next(), Some("3.5,0.5,0.25,0.00000000000000002"));
    }
}
