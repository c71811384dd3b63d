use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GridError;

/// Grid coordinate, row-major with `(0,0)` at the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Random,
    Maze,
    Loaded,
}

/// Occupancy grid; `true` means obstacle. Moves off the grid are blocked
/// exactly like obstacle cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<bool>,
    kind: MapKind,
}

impl GridMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![false; width * height],
            kind: MapKind::Loaded,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    #[inline]
    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    #[inline]
    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.cells[cell.row * self.width + cell.col]
    }

    /// Off-grid coordinates count as blocked.
    #[inline]
    pub fn blocked(&self, row: i64, col: i64) -> bool {
        !self.in_bounds(row, col) || self.cells[row as usize * self.width + col as usize]
    }

    pub fn set_obstacle(&mut self, cell: Cell, obstacle: bool) {
        self.cells[cell.row * self.width + cell.col] = obstacle;
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| Cell::new(r, c)))
            .filter(|&c| !self.is_obstacle(c))
            .collect()
    }

    /// 4-connected free neighbors in the fixed action order
    /// up, down, left, right.
    pub fn free_neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        const DELTAS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        DELTAS.iter().filter_map(move |&(dr, dc)| {
            let (r, c) = (cell.row as i64 + dr, cell.col as i64 + dc);
            if self.blocked(r, c) {
                None
            } else {
                Some(Cell::new(r as usize, c as usize))
            }
        })
    }

    /// Obstacle count divided by the number of interior (non-border) cells,
    /// the population the random generator draws obstacles from.
    pub fn obstacle_fraction(&self) -> f64 {
        let interior = (self.height.saturating_sub(2)) * (self.width.saturating_sub(2));
        if interior == 0 {
            return 0.0;
        }
        let obstacles = self.cells.iter().filter(|&&o| o).count();
        obstacles as f64 / interior as f64
    }

    /// Component id per cell (`None` for obstacles), plus component sizes.
    pub fn component_labels(&self) -> (Vec<Option<u32>>, Vec<usize>) {
        let mut labels: Vec<Option<u32>> = vec![None; self.cells.len()];
        let mut sizes = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let cell = Cell::new(r, c);
                let idx = r * self.width + c;
                if self.is_obstacle(cell) || labels[idx].is_some() {
                    continue;
                }
                let id = sizes.len() as u32;
                let mut size = 0usize;
                let mut queue = VecDeque::from([cell]);
                labels[idx] = Some(id);
                while let Some(cur) = queue.pop_front() {
                    size += 1;
                    for n in self.free_neighbors(cur) {
                        let nidx = n.row * self.width + n.col;
                        if labels[nidx].is_none() {
                            labels[nidx] = Some(id);
                            queue.push_back(n);
                        }
                    }
                }
                sizes.push(size);
            }
        }
        (labels, sizes)
    }

    /// Fraction of free cells inside the largest connected component.
    pub fn largest_component_fraction(&self) -> f64 {
        let (_, sizes) = self.component_labels();
        let free: usize = sizes.iter().sum();
        if free == 0 {
            return 0.0;
        }
        *sizes.iter().max().unwrap() as f64 / free as f64
    }
}

const RANDOM_MAP_MAX_TRIES: usize = 1000;
/// Accepted deviation of the sampled obstacle fraction from the requested
/// density, in absolute terms. Small maps cannot hit an arbitrary band
/// with an integer obstacle count, so the band is widened to the count
/// resolution when the interior is tiny.
const DENSITY_TOLERANCE: f64 = 0.02;
/// Required coverage of the largest free component.
const CONNECTIVITY_FLOOR: f64 = 0.8;

fn density_tolerance(interior_cells: usize) -> f64 {
    DENSITY_TOLERANCE.max(1.0 / (2.0 * interior_cells as f64))
}

/// Random map: each interior cell is an obstacle with probability `density`
/// (border cells stay free). Samples are redrawn until the realized obstacle
/// fraction is within two percentage points of `density` and the largest
/// free component covers at least 80% of free cells.
pub fn generate_random_map(
    width: usize,
    height: usize,
    density: f64,
    seed: u64,
) -> Result<GridMap, GridError> {
    if !(0.0..0.5).contains(&density) {
        return Err(GridError::InvalidInput(format!(
            "density must be in [0, 0.5), got {density}"
        )));
    }
    if width < 4 || height < 4 {
        return Err(GridError::InvalidInput(format!(
            "map must be at least 4x4, got {width}x{height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_MAP_MAX_TRIES {
        let mut map = GridMap::empty(width, height);
        map.kind = MapKind::Random;
        for r in 1..height - 1 {
            for c in 1..width - 1 {
                if rng.gen::<f64>() < density {
                    map.set_obstacle(Cell::new(r, c), true);
                }
            }
        }
        let tolerance = density_tolerance((height - 2) * (width - 2));
        if (map.obstacle_fraction() - density).abs() <= tolerance
            && map.largest_component_fraction() >= CONNECTIVITY_FLOOR
        {
            return Ok(map);
        }
    }
    Err(GridError::Generation(format!(
        "no acceptable {width}x{height} map at density {density} after {RANDOM_MAP_MAX_TRIES} tries"
    )))
}

/// Fraction of removable interior walls opened after carving the perfect
/// maze, creating loops.
const MAZE_LOOP_FRACTION: f64 = 0.05;

/// Maze map: perfect maze carved by randomized depth-first search on the
/// odd-coordinate room lattice, then 5% of the removable walls are opened.
/// The free space is connected by construction and stays connected when
/// walls are removed.
pub fn generate_maze_map(width: usize, height: usize, seed: u64) -> Result<GridMap, GridError> {
    if width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0 {
        return Err(GridError::InvalidInput(format!(
            "maze dimensions must be odd and at least 5x5, got {width}x{height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = GridMap {
        width,
        height,
        cells: vec![true; width * height],
        kind: MapKind::Maze,
    };

    // Depth-first carve over rooms at odd coordinates.
    let start = Cell::new(1, 1);
    map.set_obstacle(start, false);
    let mut stack = vec![start];
    while let Some(cur) = stack.last().copied() {
        let mut candidates: Vec<(Cell, Cell)> = Vec::new();
        for (dr, dc) in [(-2i64, 0i64), (2, 0), (0, -2), (0, 2)] {
            let (r, c) = (cur.row as i64 + dr, cur.col as i64 + dc);
            if r >= 1 && c >= 1 && (r as usize) < height - 1 && (c as usize) < width - 1 {
                let room = Cell::new(r as usize, c as usize);
                if map.is_obstacle(room) {
                    let wall = Cell::new(
                        (cur.row as i64 + dr / 2) as usize,
                        (cur.col as i64 + dc / 2) as usize,
                    );
                    candidates.push((room, wall));
                }
            }
        }
        match candidates.choose(&mut rng) {
            Some(&(room, wall)) => {
                map.set_obstacle(room, false);
                map.set_obstacle(wall, false);
                stack.push(room);
            }
            None => {
                stack.pop();
            }
        }
    }

    // Open a few walls that separate two free cells, creating loops.
    let mut removable: Vec<Cell> = Vec::new();
    for r in 1..height - 1 {
        for c in 1..width - 1 {
            let cell = Cell::new(r, c);
            if !map.is_obstacle(cell) {
                continue;
            }
            let horizontal = !map.blocked(r as i64, c as i64 - 1) && !map.blocked(r as i64, c as i64 + 1);
            let vertical = !map.blocked(r as i64 - 1, c as i64) && !map.blocked(r as i64 + 1, c as i64);
            if horizontal || vertical {
                removable.push(cell);
            }
        }
    }
    removable.shuffle(&mut rng);
    let n_open = (removable.len() as f64 * MAZE_LOOP_FRACTION).floor() as usize;
    for &wall in removable.iter().take(n_open) {
        map.set_obstacle(wall, false);
    }
    Ok(map)
}

/// Writes the ASCII map format: `width height` on the first line, then
/// `height` rows of `#` (obstacle) and `.` (free).
pub fn save_map<W: Write>(map: &GridMap, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{} {}", map.width, map.height)?;
    for r in 0..map.height {
        let row: String = (0..map.width)
            .map(|c| if map.is_obstacle(Cell::new(r, c)) { '#' } else { '.' })
            .collect();
        writeln!(w, "{row}")?;
    }
    Ok(())
}

pub fn load_map<R: BufRead>(r: &mut R) -> Result<GridMap, GridError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| GridError::MapFormat("empty file".into()))??;
    let mut it = header.split_whitespace();
    let width: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| GridError::MapFormat(format!("bad header {header:?}")))?;
    let height: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| GridError::MapFormat(format!("bad header {header:?}")))?;
    if it.next().is_some() {
        return Err(GridError::MapFormat(format!("bad header {header:?}")));
    }
    let mut map = GridMap::empty(width, height);
    for row in 0..height {
        let line = lines
            .next()
            .ok_or_else(|| GridError::MapFormat(format!("missing row {row}")))??;
        if line.chars().count() != width {
            return Err(GridError::MapFormat(format!(
                "row {row} has {} cells, expected {width}",
                line.chars().count()
            )));
        }
        for (col, ch) in line.chars().enumerate() {
            match ch {
                '#' => map.set_obstacle(Cell::new(row, col), true),
                '.' => {}
                other => {
                    return Err(GridError::MapFormat(format!(
                        "unexpected character {other:?} at row {row} col {col}"
                    )))
                }
            }
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_means_no_obstacles() {
        let map = generate_random_map(8, 6, 0.0, 7).unwrap();
        assert_eq!(map.free_cells().len(), 48);
    }

    #[test]
    fn paper_density_band_on_20x20() {
        let map = generate_random_map(20, 20, 0.30, 12345).unwrap();
        let frac = map.obstacle_fraction();
        assert!((0.28..=0.32).contains(&frac), "obstacle fraction {frac}");
        assert!(map.largest_component_fraction() >= 0.8);
    }

    #[test]
    fn random_map_is_seed_deterministic() {
        let a = generate_random_map(12, 12, 0.25, 9).unwrap();
        let b = generate_random_map(12, 12, 0.25, 9).unwrap();
        let c = generate_random_map(12, 12, 0.25, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn random_map_rejects_bad_inputs() {
        assert!(generate_random_map(3, 8, 0.1, 0).is_err());
        assert!(generate_random_map(8, 8, 0.5, 0).is_err());
        assert!(generate_random_map(8, 8, -0.1, 0).is_err());
    }

    #[test]
    fn maze_free_space_is_connected() {
        for seed in 0..10 {
            let map = generate_maze_map(11, 9, seed).unwrap();
            assert_eq!(map.largest_component_fraction(), 1.0, "seed {seed}");
        }
        let tiny = generate_maze_map(5, 5, 3).unwrap();
        assert_eq!(tiny.largest_component_fraction(), 1.0);
    }

    #[test]
    fn maze_every_free_cell_has_a_free_neighbor() {
        for seed in 0..10 {
            let map = generate_maze_map(13, 13, seed).unwrap();
            for cell in map.free_cells() {
                assert!(
                    map.free_neighbors(cell).next().is_some(),
                    "seed {seed}: isolated free cell {cell:?}"
                );
            }
        }
    }

    #[test]
    fn maze_is_seed_deterministic_and_validates_dims() {
        assert_eq!(generate_maze_map(9, 7, 4).unwrap(), generate_maze_map(9, 7, 4).unwrap());
        assert!(generate_maze_map(8, 9, 0).is_err());
        assert!(generate_maze_map(3, 3, 0).is_err());
    }

    #[test]
    fn ascii_round_trip_is_identity() {
        let map = generate_random_map(10, 7, 0.2, 4).unwrap();
        let mut bytes = Vec::new();
        save_map(&map, &mut bytes).unwrap();
        let loaded = load_map(&mut bytes.as_slice()).unwrap();
        let mut bytes2 = Vec::new();
        save_map(&loaded, &mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
        assert_eq!(map.cells, loaded.cells);
    }

    #[test]
    fn load_rejects_malformed_files() {
        assert!(load_map(&mut "".as_bytes()).is_err());
        assert!(load_map(&mut "2 2\n..\n.x\n".as_bytes()).is_err());
        assert!(load_map(&mut "3 2\n..\n..\n".as_bytes()).is_err());
        assert!(load_map(&mut "2 3\n..\n..\n".as_bytes()).is_err());
    }
}
