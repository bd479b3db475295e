//! Space-time diagrams of a [`Trace`].

use crate::rule::{State, Trace};

/// Plain PGM (`P2`), one row per time step, gray level `⌊255 s / (n-1)⌋`.
pub fn to_pgm(trace: &Trace) -> String {
    let width = trace.rows.first().map_or(0, |r| r.period());
    let mut out = format!("P2\n{} {}\n255\n", width, trace.rows.len());
    let scale = trace.n.saturating_sub(1).max(1) as u64;
    for row in &trace.rows {
        let line: Vec<String> = row
            .word()
            .iter()
            .map(|&s| (255 * s as u64 / scale).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// One character per cell: `.` for state 0, then `#` when `n = 2`,
/// otherwise base-36 digits (`?` beyond 35).
pub fn to_ascii(trace: &Trace) -> String {
    let glyph = |s: State| -> char {
        match (s, trace.n) {
            (0, _) => '.',
            (1, 2) => '#',
            _ => char::from_digit(s, 36).unwrap_or('?'),
        }
    };
    let mut out = String::new();
    for row in &trace.rows {
        out.extend(row.word().iter().map(|&s| glyph(s)));
        out.push('\n');
    }
    out
}
