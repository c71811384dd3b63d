use std::io::{BufRead, Write};

use crate::Real;

use super::HarnessError;

/// Shaping-phase diagnostics attached to an update record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingPhaseStats {
    pub buffer_size: usize,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    pub mean_loss: Real,
    pub accuracy: Real,
}

/// One row of the training metrics log, appended per update.
///
/// `mean_dense_reward` and `cumulative_dense_reward` always report the
/// dense, unshaped environment reward, whatever the training signal was:
/// the mean is over every (env, agent, step) of the update's rollout, and
/// the cumulative value sums the per-environment-step mean over envs and
/// agents from the start of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub update: u64,
    /// Environment steps summed over parallel envs since the run started.
    pub env_steps: u64,
    pub agent_actions: u64,
    pub mean_dense_reward: Real,
    pub cumulative_dense_reward: Real,
    pub goals_reached: u64,
    pub collisions: u64,
    pub policy_loss: Real,
    pub value_loss: Real,
    pub entropy: Real,
    pub approx_kl: Real,
    pub entropy_coef: Real,
    pub shaping: Option<ShapingPhaseStats>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricLog {
    pub records: Vec<MetricRecord>,
}

pub const METRICS_HEADER: &str = "update,env_steps,agent_actions,mean_dense_reward,\
cumulative_dense_reward,goals_reached,collisions,policy_loss,value_loss,entropy,\
approx_kl,entropy_coef,buffer_size,pairs_used,pairs_skipped,shaping_loss,shaping_accuracy";

impl MetricLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: MetricRecord) {
        self.records.push(record);
    }

    pub fn final_cumulative_dense_reward(&self) -> Real {
        self.records
            .last()
            .map(|r| r.cumulative_dense_reward)
            .unwrap_or(0.0)
    }

    /// Writes the log as CSV: stable column order, floats at full
    /// round-trip precision, locale-independent. Shaping columns are empty
    /// on runs without a shaping phase.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{METRICS_HEADER}")?;
        for r in &self.records {
            write!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.update,
                r.env_steps,
                r.agent_actions,
                fmt_real(r.mean_dense_reward),
                fmt_real(r.cumulative_dense_reward),
                r.goals_reached,
                r.collisions,
                fmt_real(r.policy_loss),
                fmt_real(r.value_loss),
                fmt_real(r.entropy),
                fmt_real(r.approx_kl),
                fmt_real(r.entropy_coef),
            )?;
            match &r.shaping {
                Some(s) => writeln!(
                    w,
                    ",{},{},{},{},{}",
                    s.buffer_size,
                    s.pairs_used,
                    s.pairs_skipped,
                    fmt_real(s.mean_loss),
                    fmt_real(s.accuracy)
                )?,
                None => writeln!(w, ",,,,,")?,
            }
        }
        Ok(())
    }

    /// Parses a CSV produced by [`MetricLog::write_csv`]; exact value
    /// recovery is part of the format contract.
    pub fn read_csv<R: BufRead>(r: &mut R) -> Result<Self, HarnessError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| HarnessError::Csv("empty metrics file".into()))??;
        if header != METRICS_HEADER {
            return Err(HarnessError::Csv(format!("unexpected header {header:?}")));
        }
        let mut log = MetricLog::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 17 {
                return Err(HarnessError::Csv(format!(
                    "line {}: expected 17 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let shaping = if fields[12].is_empty() {
                None
            } else {
                Some(ShapingPhaseStats {
                    buffer_size: parse(fields[12], lineno)?,
                    pairs_used: parse(fields[13], lineno)?,
                    pairs_skipped: parse(fields[14], lineno)?,
                    mean_loss: parse(fields[15], lineno)?,
                    accuracy: parse(fields[16], lineno)?,
                })
            };
            log.push(MetricRecord {
                update: parse(fields[0], lineno)?,
                env_steps: parse(fields[1], lineno)?,
                agent_actions: parse(fields[2], lineno)?,
                mean_dense_reward: parse(fields[3], lineno)?,
                cumulative_dense_reward: parse(fields[4], lineno)?,
                goals_reached: parse(fields[5], lineno)?,
                collisions: parse(fields[6], lineno)?,
                policy_loss: parse(fields[7], lineno)?,
                value_loss: parse(fields[8], lineno)?,
                entropy: parse(fields[9], lineno)?,
                approx_kl: parse(fields[10], lineno)?,
                entropy_coef: parse(fields[11], lineno)?,
                shaping,
            });
        }
        Ok(log)
    }
}

/// Shortest decimal form that parses back to the identical float.
pub fn fmt_real(v: Real) -> String {
    format!("{v}")
}

fn parse<T: std::str::FromStr>(field: &str, lineno: usize) -> Result<T, HarnessError> {
    field
        .parse()
        .map_err(|_| HarnessError::Csv(format!("line {}: bad field {field:?}", lineno + 2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(update: u64, with_shaping: bool) -> MetricRecord {
        MetricRecord {
            update,
            env_steps: update * 128,
            agent_actions: update * 512,
            mean_dense_reward: 0.001 * update as Real + 0.1 / 3.0,
            cumulative_dense_reward: 1.7 * update as Real,
            goals_reached: 3 * update,
            collisions: 7 * update,
            policy_loss: -0.02,
            value_loss: 0.4,
            entropy: 1.55,
            approx_kl: 0.003,
            entropy_coef: 0.023,
            shaping: with_shaping.then_some(ShapingPhaseStats {
                buffer_size: 512,
                pairs_used: 200,
                pairs_skipped: 56,
                mean_loss: std::f64::consts::LN_2,
                accuracy: 0.75,
            }),
        }
    }

    #[test]
    fn empty_log_is_header_only() {
        let mut buf = Vec::new();
        MetricLog::new().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
    }

    #[test]
    fn round_trip_recovers_values_exactly() {
        let mut log = MetricLog::new();
        log.push(record(1, false));
        log.push(record(2, true));
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let parsed = MetricLog::read_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed, log);
    }

    #[test]
    fn header_is_frozen() {
        // Column order is part of the format contract; changing it breaks
        // downstream consumers.
        assert_eq!(
            METRICS_HEADER,
            "update,env_steps,agent_actions,mean_dense_reward,cumulative_dense_reward,\
goals_reached,collisions,policy_loss,value_loss,entropy,approx_kl,entropy_coef,\
buffer_size,pairs_used,pairs_skipped,shaping_loss,shaping_accuracy"
        );
    }
}
