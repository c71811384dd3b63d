use crate::gridworld::{generate_maze_map, generate_random_map, GridMap};
use crate::seed;
use crate::Real;

use super::HarnessError;

/// Generates the held-out evaluation map set: `n_random` random maps
/// followed by `n_maze` maze maps, all derived deterministically from
/// `base_seed` (pick a seed disjoint from the training map's). Maze
/// dimensions are rounded up to the next odd size of at least 5.
pub fn gen_eval_maps(
    n_random: usize,
    n_maze: usize,
    width: usize,
    height: usize,
    density: Real,
    base_seed: u64,
) -> Result<Vec<GridMap>, HarnessError> {
    let mut maps = Vec::with_capacity(n_random + n_maze);
    for i in 0..n_random {
        maps.push(generate_random_map(
            width,
            height,
            density,
            seed::derive_indexed(base_seed, "eval-map-random", i as u64),
        )?);
    }
    let odd = |v: usize| {
        let v = v.max(5);
        if v % 2 == 0 {
            v + 1
        } else {
            v
        }
    };
    for i in 0..n_maze {
        maps.push(generate_maze_map(
            odd(width),
            odd(height),
            seed::derive_indexed(base_seed, "eval-map-maze", i as u64),
        )?);
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::save_map;

    #[test]
    fn counts_and_determinism() {
        let a = gen_eval_maps(4, 2, 10, 8, 0.2, 77).unwrap();
        assert_eq!(a.len(), 6);
        let b = gen_eval_maps(4, 2, 10, 8, 0.2, 77).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let mut bx = Vec::new();
            let mut by = Vec::new();
            save_map(x, &mut bx).unwrap();
            save_map(y, &mut by).unwrap();
            assert_eq!(bx, by);
        }
        assert!(gen_eval_maps(0, 0, 10, 8, 0.2, 1).unwrap().is_empty());
    }

    #[test]
    fn maze_dimensions_are_rounded_up_to_odd() {
        let maps = gen_eval_maps(0, 1, 8, 8, 0.2, 3).unwrap();
        assert_eq!(maps[0].width(), 9);
        assert_eq!(maps[0].height(), 9);
    }

    #[test]
    fn paper_scale_counts() {
        let maps = gen_eval_maps(40, 10, 10, 10, 0.25, 5).unwrap();
        assert_eq!(maps.len(), 50);
    }
}
