use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Cell, GridError, GridMap};

/// Shortest 4-connected path from `start` to `goal`, both inclusive.
///
/// A* with the (admissible) Manhattan heuristic. Ties are broken
/// deterministically: neighbors are generated in the fixed action order
/// up, down, left, right, and equally-scored nodes pop in insertion order.
pub fn plan_path(map: &GridMap, start: Cell, goal: Cell) -> Result<Vec<Cell>, GridError> {
    for (name, cell) in [("start", start), ("goal", goal)] {
        if !map.in_bounds(cell.row as i64, cell.col as i64) || map.is_obstacle(cell) {
            return Err(GridError::InvalidInput(format!(
                "{name} ({},{}) is not a free cell",
                cell.row, cell.col
            )));
        }
    }
    if start == goal {
        return Ok(vec![start]);
    }

    let width = map.width();
    let idx = |c: Cell| c.row * width + c.col;
    let mut g_score = vec![usize::MAX; width * map.height()];
    let mut came_from: Vec<Option<Cell>> = vec![None; width * map.height()];
    // Keyed by (f, insertion sequence): FIFO among equal f-scores.
    let mut open: BinaryHeap<Reverse<(usize, u64, Cell)>> = BinaryHeap::new();
    let mut seq = 0u64;

    g_score[idx(start)] = 0;
    open.push(Reverse((start.manhattan(goal), seq, start)));
    while let Some(Reverse((f, _, cur))) = open.pop() {
        let g = g_score[idx(cur)];
        if f > g + cur.manhattan(goal) {
            continue; // stale heap entry
        }
        if cur == goal {
            let mut path = vec![goal];
            let mut node = goal;
            while let Some(prev) = came_from[idx(node)] {
                path.push(prev);
                node = prev;
            }
            path.reverse();
            return Ok(path);
        }
        for n in map.free_neighbors(cur) {
            let tentative = g + 1;
            if tentative < g_score[idx(n)] {
                g_score[idx(n)] = tentative;
                came_from[idx(n)] = Some(cur);
                seq += 1;
                open.push(Reverse((tentative + n.manhattan(goal), seq, n)));
            }
        }
    }
    Err(GridError::Unreachable { start, goal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::generate_random_map;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    /// Independent breadth-first-search distance oracle.
    fn bfs_distance(map: &GridMap, start: Cell, goal: Cell) -> Option<usize> {
        let width = map.width();
        let mut dist = vec![usize::MAX; width * map.height()];
        dist[start.row * width + start.col] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur.row * width + cur.col];
            if cur == goal {
                return Some(d);
            }
            for n in map.free_neighbors(cur) {
                if dist[n.row * width + n.col] == usize::MAX {
                    dist[n.row * width + n.col] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    #[test]
    fn trivial_and_diagonal_cases() {
        let map = GridMap::empty(3, 3);
        let same = plan_path(&map, Cell::new(1, 1), Cell::new(1, 1)).unwrap();
        assert_eq!(same, vec![Cell::new(1, 1)]);
        let diag = plan_path(&map, Cell::new(0, 0), Cell::new(2, 2)).unwrap();
        assert_eq!(diag.len(), 5);
        assert_eq!(diag[0], Cell::new(0, 0));
        assert_eq!(*diag.last().unwrap(), Cell::new(2, 2));
        for w in diag.windows(2) {
            assert_eq!(w[0].manhattan(w[1]), 1);
        }
    }

    #[test]
    fn unreachable_goal_is_an_error() {
        let mut map = GridMap::empty(5, 5);
        // Wall off the right column.
        for r in 0..5 {
            map.set_obstacle(Cell::new(r, 3), true);
        }
        let err = plan_path(&map, Cell::new(2, 0), Cell::new(2, 4)).unwrap_err();
        assert!(matches!(err, GridError::Unreachable { .. }));
    }

    #[test]
    fn matches_bfs_distance_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..50 {
            let map = generate_random_map(10, 10, 0.25, seed).unwrap();
            let free = map.free_cells();
            let start = *free.choose(&mut rng).unwrap();
            let goal = *free.choose(&mut rng).unwrap();
            match bfs_distance(&map, start, goal) {
                Some(d) => {
                    let path = plan_path(&map, start, goal).unwrap();
                    assert_eq!(path.len() - 1, d, "seed {seed} {start:?}->{goal:?}");
                    assert_eq!(path[0], start);
                    assert_eq!(*path.last().unwrap(), goal);
                    for w in path.windows(2) {
                        assert_eq!(w[0].manhattan(w[1]), 1);
                        assert!(!map.is_obstacle(w[1]));
                    }
                }
                None => {
                    assert!(plan_path(&map, start, goal).is_err());
                }
            }
        }
    }

    #[test]
    fn deterministic_output() {
        let map = generate_random_map(12, 12, 0.3, 5).unwrap();
        let free = map.free_cells();
        let (a, b) = (free[0], free[free.len() - 1]);
        if bfs_distance(&map, a, b).is_some() {
            assert_eq!(plan_path(&map, a, b).unwrap(), plan_path(&map, a, b).unwrap());
        }
    }
}
