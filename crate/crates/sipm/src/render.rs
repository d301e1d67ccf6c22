use sipm_core::{CellState, Grid, RunOutcome};

/// One character per cell: `.` untriggered, `X` seed, `1`-`9` crosstalk
/// wave, `+` for wave 10 and later.
pub fn cell_char(state: CellState) -> char {
    match state {
        CellState::Untriggered => '.',
        CellState::Seed => 'X',
        CellState::Crosstalk { stage } if stage <= 9 => char::from_digit(stage, 10).unwrap_or('+'),
        CellState::Crosstalk { .. } => '+',
    }
}

/// The grid as text, one line per row, cells separated by spaces.
pub fn render_grid(grid: &Grid) -> String {
    let mut out = String::with_capacity(grid.rows * (2 * grid.cols + 1));
    for r in 0..grid.rows {
        let line: Vec<String> = (0..grid.cols).map(|c| cell_char(grid.get(r, c)).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn summary(out: &RunOutcome) -> String {
    format!(
        "crosstalks: {}, stages: {}\nseeds: {}, fired: {}, photons: {}\n",
        out.n_crosstalk, out.n_stages, out.n_seed, out.n_fired, out.n_photons
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_labels_cap_at_plus() {
        assert_eq!(cell_char(CellState::Crosstalk { stage: 1 }), '1');
        assert_eq!(cell_char(CellState::Crosstalk { stage: 9 }), '9');
        assert_eq!(cell_char(CellState::Crosstalk { stage: 10 }), '+');
        assert_eq!(cell_char(CellState::Crosstalk { stage: 18 }), '+');
        let g = Grid {
            rows: 1,
            cols: 3,
            cells: vec![CellState::Seed, CellState::Crosstalk { stage: 1 }, CellState::Untriggered],
        };
        assert_eq!(render_grid(&g), "X 1 .\n");
    }
}
