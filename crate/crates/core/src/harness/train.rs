use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::arms::{run_arms, RunArtifacts, ShapingBank, ShapingModel};
use crate::diffcore::{load_checkpoint, save_checkpoint, CheckpointEntry};
use crate::gridworld::save_map;
use crate::marl::{Backbone, PolicyModel};
use crate::Real;

use super::{ExperimentConfig, HarnessError, MetricLog};

/// Results of one `run_training` invocation.
#[derive(Debug)]
pub struct TrainOutputs {
    pub out_dir: PathBuf,
    /// One entry per seed, in the configured seed order.
    pub per_seed: Vec<SeedOutputs>,
}

#[derive(Debug)]
pub struct SeedOutputs {
    pub seed: u64,
    pub dir: PathBuf,
    pub artifacts: RunArtifacts,
}

/// Trains one run per configured seed and writes, per seed, the metrics
/// CSV and the parameter checkpoints, plus the resolved config and the
/// training map at the top level. Seeds run sequentially when
/// `train.single_thread` is set and in parallel otherwise; per-seed
/// outputs are identical either way because every run derives its own
/// random streams from its seed.
pub fn run_training(config: &ExperimentConfig, out_dir: &Path) -> Result<TrainOutputs, HarnessError> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("resolved_config.toml"), config.to_toml_string())?;
    let map = config.build_map()?;
    {
        let mut w = BufWriter::new(fs::File::create(out_dir.join("map.txt"))?);
        save_map(&map, &mut w)?;
    }

    let env = config.env_setup(map);
    let ppo = config.ppo_config();
    let arms = config.arms_config();
    let run_one = |seed: u64| -> Result<RunArtifacts, HarnessError> {
        Ok(run_arms(
            &env,
            config.backbone(),
            config.shaping_mode(),
            &ppo,
            &arms,
            &config.train.policy_hidden,
            config.train.step_budget,
            seed,
        )?)
    };

    let seeds = config.train.seeds.clone();
    let artifacts: Vec<Result<RunArtifacts, HarnessError>> = if config.train.single_thread || seeds.len() == 1
    {
        seeds.iter().map(|&s| run_one(s)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds.iter().map(|&s| scope.spawn(move || run_one(s))).collect();
            handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
        })
    };

    let mut per_seed = Vec::with_capacity(seeds.len());
    for (seed, artifacts) in seeds.into_iter().zip(artifacts) {
        let artifacts = artifacts?;
        let dir = out_dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&dir)?;
        write_metrics(&artifacts.log, &dir.join("metrics.csv"))?;
        save_policy_checkpoint(&artifacts.policy, config.env.fov_radius, &dir.join("policy.ckpt"))?;
        if let Some(bank) = &artifacts.shaping {
            save_shaping_checkpoint(bank, &dir.join("shaping.ckpt"))?;
        }
        per_seed.push(SeedOutputs {
            seed,
            dir,
            artifacts,
        });
    }
    Ok(TrainOutputs {
        out_dir: out_dir.to_path_buf(),
        per_seed,
    })
}

pub fn write_metrics(log: &MetricLog, path: &Path) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    log.write_csv(&mut w)?;
    Ok(())
}

/// Saves actor and critic as named checkpoint entries with enough metadata
/// to rebuild the policy wrapper.
pub fn save_policy_checkpoint(
    policy: &PolicyModel,
    fov_radius: usize,
    path: &Path,
) -> Result<(), HarnessError> {
    let mut meta = BTreeMap::new();
    meta.insert("backbone_mappo".to_string(), matches!(policy.backbone, Backbone::Mappo) as u8 as Real);
    meta.insert("n_agents".to_string(), policy.n_agents as Real);
    meta.insert("obs_dim".to_string(), policy.obs_dim as Real);
    meta.insert("fov_radius".to_string(), fov_radius as Real);
    let entries = vec![
        CheckpointEntry {
            name: "actor".into(),
            spec: policy.actor_spec.clone(),
            params: policy.actor.clone(),
            meta: meta.clone(),
        },
        CheckpointEntry {
            name: "critic".into(),
            spec: policy.critic_spec.clone(),
            params: policy.critic.clone(),
            meta: BTreeMap::new(),
        },
    ];
    let mut w = BufWriter::new(fs::File::create(path)?);
    save_checkpoint(&mut w, &entries)?;
    Ok(())
}

/// Loads a policy checkpoint; returns the policy and the field-of-view
/// radius its observations were built with.
pub fn load_policy_checkpoint(path: &Path) -> Result<(PolicyModel, usize), HarnessError> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let entries = load_checkpoint(&mut r).map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
    let find = |name: &str| {
        entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| HarnessError::Checkpoint(format!("missing entry {name:?} in {}", path.display())))
    };
    let actor = find("actor")?;
    let critic = find("critic")?;
    let meta = |key: &str| {
        actor
            .meta
            .get(key)
            .copied()
            .ok_or_else(|| HarnessError::Checkpoint(format!("missing metadata {key:?}")))
    };
    let backbone = if meta("backbone_mappo")? != 0.0 {
        Backbone::Mappo
    } else {
        Backbone::Ippo
    };
    let policy = PolicyModel {
        backbone,
        n_agents: meta("n_agents")? as usize,
        obs_dim: meta("obs_dim")? as usize,
        actor_spec: actor.spec.clone(),
        actor: actor.params.clone(),
        critic_spec: critic.spec.clone(),
        critic: critic.params.clone(),
    };
    Ok((policy, meta("fov_radius")? as usize))
}

pub fn save_shaping_checkpoint(bank: &ShapingBank, path: &Path) -> Result<(), HarnessError> {
    let entries: Vec<CheckpointEntry> = bank
        .models()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut meta = BTreeMap::new();
            meta.insert("scale".to_string(), m.scale);
            meta.insert("shared".to_string(), bank.is_shared() as u8 as Real);
            CheckpointEntry {
                name: format!("shaping_{i}"),
                spec: m.spec.clone(),
                params: m.params.clone(),
                meta,
            }
        })
        .collect();
    let mut w = BufWriter::new(fs::File::create(path)?);
    save_checkpoint(&mut w, &entries)?;
    Ok(())
}

pub fn load_shaping_checkpoint(path: &Path) -> Result<ShapingBank, HarnessError> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let entries = load_checkpoint(&mut r).map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
    if entries.is_empty() {
        return Err(HarnessError::Checkpoint("empty shaping checkpoint".into()));
    }
    let shared = entries[0].meta.get("shared").copied().unwrap_or(1.0) != 0.0;
    let models: Vec<ShapingModel> = entries
        .into_iter()
        .map(|e| {
            let scale = e.meta.get("scale").copied().unwrap_or(0.1);
            ShapingModel {
                spec: e.spec,
                params: e.params,
                scale,
            }
        })
        .collect();
    Ok(if shared {
        ShapingBank::shared(models.into_iter().next().unwrap())
    } else {
        ShapingBank::per_agent(models)
    })
}
