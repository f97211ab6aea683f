use std::path::Path;

use crate::error::{MapError, SimError};
use crate::CELL_SIZE;

/// Fixed evaluation spawn: centre of an 'S' cell with a given heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpawnAnchor {
    pub col: usize,
    pub row: usize,
    pub theta: f64,
}

/// Immutable occupancy grid, enclosed by walls.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    occupied: Vec<bool>,
    cell_size: f64,
    anchor: Option<SpawnAnchor>,
}

impl GridMap {
    /// Parses the ASCII map format: rows of `#` (wall), `.` (free) and `S`
    /// (free, evaluation anchor), followed by optional `key=value` lines
    /// (`spawn_theta`, `cell_size`).
    pub fn parse(text: &str) -> Result<GridMap, MapError> {
        let mut rows: Vec<&str> = Vec::new();
        let mut spawn_theta = None;
        let mut cell_size = CELL_SIZE;
        let mut in_metadata = false;

        for (i, line) in text.split('\n').enumerate() {
            let lineno = i + 1;
            if let Some(pos) = line.find(['\t', '\r']) {
                return Err(MapError::new(lineno, pos + 1, "tabs and CR are not allowed"));
            }
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                in_metadata = true;
                let parse_f64 = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| MapError::new(lineno, key.len() + 2, format!("bad number {v:?}")))
                };
                match key.trim() {
                    "spawn_theta" => spawn_theta = Some(parse_f64(value)?),
                    "cell_size" => {
                        cell_size = parse_f64(value)?;
                        if cell_size <= 0.0 {
                            return Err(MapError::new(lineno, key.len() + 2, "cell_size must be positive"));
                        }
                    }
                    other => {
                        return Err(MapError::new(lineno, 1, format!("unknown metadata key {other:?}")));
                    }
                }
                continue;
            }
            if in_metadata {
                return Err(MapError::new(lineno, 1, "grid row after metadata"));
            }
            rows.push(line);
        }

        let height = rows.len();
        if height == 0 {
            return Err(MapError::new(1, 1, "empty map"));
        }
        let width = rows[0].chars().count();
        let mut occupied = Vec::with_capacity(width * height);
        let mut anchor_cell = None;
        for (r, row) in rows.iter().enumerate() {
            let lineno = r + 1;
            if row.chars().count() != width {
                return Err(MapError::new(
                    lineno,
                    row.chars().count().min(width) + 1,
                    format!("map is not rectangular (expected width {width})"),
                ));
            }
            for (c, ch) in row.chars().enumerate() {
                let wall = match ch {
                    '#' => true,
                    '.' => false,
                    'S' => {
                        if anchor_cell.is_some() {
                            return Err(MapError::new(lineno, c + 1, "more than one spawn anchor"));
                        }
                        anchor_cell = Some((c, r));
                        false
                    }
                    other => {
                        return Err(MapError::new(lineno, c + 1, format!("illegal character {other:?}")));
                    }
                };
                let border = r == 0 || c == 0 || r == height - 1 || c == width - 1;
                if border && !wall {
                    return Err(MapError::new(lineno, c + 1, "map not enclosed"));
                }
                occupied.push(wall);
            }
        }
        if occupied.iter().all(|&w| w) {
            return Err(MapError::new(1, 1, "map has no free cells"));
        }
        let anchor = match (anchor_cell, spawn_theta) {
            (Some((col, row)), theta) => Some(SpawnAnchor {
                col,
                row,
                theta: theta.unwrap_or(0.0).rem_euclid(std::f64::consts::TAU),
            }),
            (None, Some(_)) => {
                return Err(MapError::new(height + 1, 1, "spawn_theta given without an 'S' cell"));
            }
            (None, None) => None,
        };

        Ok(GridMap {
            width,
            height,
            occupied,
            cell_size,
            anchor,
        })
    }

    pub fn load(path: &Path) -> Result<GridMap, SimError> {
        let text = std::fs::read_to_string(path)?;
        Ok(GridMap::parse(&text)?)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn anchor(&self) -> Option<SpawnAnchor> {
        self.anchor
    }

    /// Out-of-range cells count as occupied.
    #[inline]
    pub fn is_occupied(&self, col: i64, row: i64) -> bool {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return true;
        }
        self.occupied[row as usize * self.width + col as usize]
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (c, r)))
            .filter(|&(c, r)| !self.occupied[r * self.width + c])
            .collect()
    }

    pub fn free_cell_count(&self) -> usize {
        self.occupied.iter().filter(|&&w| !w).count()
    }

    /// Centre of a cell in world coordinates.
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;

    #[test]
    fn single_free_cell() {
        let m = GridMap::parse("###\n#.#\n###\n").unwrap();
        assert_eq!(m.free_cell_count(), 1);
        assert_eq!((m.width(), m.height()), (3, 3));
        assert!(m.anchor().is_none());
    }

    #[test]
    fn open_border_is_rejected() {
        let err = GridMap::parse("#.#\n#.#\n###\n").unwrap_err();
        assert_eq!(err.message, "map not enclosed");
        assert_eq!((err.line, err.col), (1, 2));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = GridMap::parse("####\n#..#\n###\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("rectangular"));
    }

    #[test]
    fn no_free_cells_is_rejected() {
        assert!(GridMap::parse("###\n###\n").unwrap_err().message.contains("no free"));
    }

    #[test]
    fn illegal_characters_and_tabs() {
        let err = GridMap::parse("###\n#x#\n###\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 2));
        let err = GridMap::parse("###\n#.#\t\n###\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 4));
    }

    #[test]
    fn anchor_and_metadata() {
        let m = GridMap::parse("####\n#S.#\n####\nspawn_theta=1.5\n").unwrap();
        let a = m.anchor().unwrap();
        assert_eq!((a.col, a.row, a.theta), (1, 1, 1.5));
        assert_eq!(m.cell_center(1, 1), (0.75, 0.75));
        assert!(GridMap::parse("###\n#.#\n###\nspawn_theta=1\n").is_err());
        assert!(GridMap::parse("###\n#.#\n###\nfoo=1\n").is_err());
    }

    #[test]
    fn bundled_fixtures() {
        let c = GridMap::parse(maps::CIRCUIT2).unwrap();
        assert_eq!(c.free_cell_count(), 176);
        assert!(c.anchor().is_some());
        let m = GridMap::parse(maps::MAZE).unwrap();
        assert_eq!(m.free_cell_count(), 250);
        assert!(m.anchor().is_some());
    }
}
