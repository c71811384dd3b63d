use armslab_core::gridworld::{generate_random_map, Action, WorldState};
use armslab_core::harness::load_shaping_checkpoint;
use armslab_core::arms::shaped_reward;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let path = std::env::args().nth(1).unwrap();
    let fov: usize = std::env::args().nth(2).unwrap().parse().unwrap();
    let bank = load_shaping_checkpoint(std::path::Path::new(&path)).unwrap();
    let model = bank.model_for(0);
    let map = generate_random_map(8, 8, 0.25, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let mut top1 = 0usize;
    let mut total = 0usize;
    let mut mean_correct = 0.0;
    let mut mean_other = 0.0;
    for seed in 0..200 {
        let (mut world, _) = WorldState::reset(&map, 4, fov, 1000, seed).unwrap();
        // A few random steps to diversify agent placement.
        for _ in 0..rng.gen_range(0..6) {
            let acts: Vec<Action> = (0..4)
                .map(|_| Action::ALL[rng.gen_range(0..5)])
                .collect();
            let _ = world.step(&acts);
        }
        for a in 0..4 {
            let agent = &world.agents[a];
            // Identify the action that steps onto the next waypoint.
            let next = agent.progress + 1;
            if next >= agent.planned_path.len() { continue; }
            let target = agent.planned_path[next];
            let pos = agent.position;
            if pos.manhattan(target) != 1 { continue; }
            let correct = if target.row + 1 == pos.row { 1 }
                else if target.row == pos.row + 1 { 2 }
                else if target.col + 1 == pos.col { 3 }
                else { 4 };
            let obs = world.observe(a).flatten();
            let rewards: Vec<f64> = (0..5)
                .map(|act| shaped_reward(model, &obs, act).unwrap())
                .collect();
            let best = rewards
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap()
                .0;
            if best == correct { top1 += 1; }
            total += 1;
            mean_correct += rewards[correct];
            mean_other += (rewards.iter().sum::<f64>() - rewards[correct]) / 4.0;
        }
    }
    println!(
        "states probed: {total}; F ranks waypoint action first: {:.1}%  (chance 20%)",
        100.0 * top1 as f64 / total as f64
    );
    println!(
        "mean F(correct) = {:+.4}   mean F(other) = {:+.4}",
        mean_correct / total as f64,
        mean_other / total as f64
    );

    // F-greedy rollout: act by argmax_a F(obs, a) and measure the dense
    // reward rate such a policy collects.
    let mut dense_sum = 0.0;
    let mut goals = 0u64;
    let mut steps = 0u64;
    for seed in 0..8 {
        let (mut world, mut obs) = WorldState::reset(&map, 4, fov, 128, 7000 + seed).unwrap();
        for _ in 0..128 {
            let acts: Vec<Action> = (0..4)
                .map(|a| {
                    let flat = obs[a].flatten();
                    let best = (0..5)
                        .map(|act| (act, shaped_reward(model, &flat, act).unwrap()))
                        .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                        .unwrap()
                        .0;
                    Action::from_index(best).unwrap()
                })
                .collect();
            let (next, outcome) = world.step(&acts).unwrap();
            obs = next;
            dense_sum += outcome.dense_reward.iter().sum::<f64>();
            goals += outcome.goal_reached_flag.iter().filter(|g| **g).count() as u64;
            steps += 4;
        }
    }
    println!(
        "F-greedy rollout: mean dense per agent-step = {:.5}, goals per episode = {:.2}",
        dense_sum / steps as f64,
        goals as f64 / 8.0
    );
}
