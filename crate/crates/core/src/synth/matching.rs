use crate::error::{Error, Result};

/// Largest number of injective row-to-column maps searched exhaustively.
pub const MAX_EXHAUSTIVE: u64 = 20_000_000;

/// Column assigned to each row maximizing the total similarity, with every
/// column used at most once. Ties keep the lexicographically first map.
pub fn best_assignment(sim: &[Vec<f64>]) -> Result<Vec<usize>> {
    let rows = sim.len();
    let cols = sim.first().map_or(0, |r| r.len());
    if rows == 0 || sim.iter().any(|r| r.len() != cols) || cols < rows {
        return Err(Error::Shape(format!(
            "similarity matrix needs equal rows and at least as many columns as rows ({rows} x {cols})"
        )));
    }
    let maps: u64 = (0..rows as u64).map(|i| cols as u64 - i).product();
    if maps > MAX_EXHAUSTIVE {
        return Err(Error::Config(format!("{maps} assignments exceed the exhaustive limit")));
    }

    fn search(
        sim: &[Vec<f64>],
        row: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        score: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if row == sim.len() {
            if score > best.0 {
                *best = (score, current.clone());
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                current.push(c);
                search(sim, row + 1, used, current, score + sim[row][c], best);
                current.pop();
                used[c] = false;
            }
        }
    }

    let mut best = (f64::NEG_INFINITY, Vec::new());
    search(sim, 0, &mut vec![false; cols], &mut Vec::new(), 0.0, &mut best);
    Ok(best.1)
}
