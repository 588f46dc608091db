//! Randomised command workloads for accuracy measurements.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{run, SimError};
use super::report::RunReport;
use super::scenario::{Scenario, StepKind};
use crate::at_codec::{PhoneNumber, SmsBody};
use crate::controller::CommandTable;
use crate::gsm_modem::{DEFAULT_DELAY_MAX, DEFAULT_DELAY_MIN};
use crate::time::{SimDuration, SimTime};

pub const SENDERS: [&str; 3] = ["+60123456789", "+60129876543", "+60131112222"];

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub commands: usize,
    pub min_gap: SimDuration,
    pub max_gap: SimDuration,
    pub delay_min: SimDuration,
    pub delay_max: SimDuration,
    pub loss_rate: f64,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            commands: 200,
            min_gap: SimDuration::from_secs(3),
            max_gap: SimDuration::from_secs(5),
            delay_min: DEFAULT_DELAY_MIN,
            delay_max: DEFAULT_DELAY_MAX,
            loss_rate: 0.0,
        }
    }
}

impl Workload {
    /// Build a scenario of random valid commands. The workload seed only picks
    /// commands and spacing; the network draws from the same seed separately.
    pub fn scenario(&self, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // a second stream so the network draws don't shift with the workload
        rng.set_stream(1);
        let keys: Vec<String> = CommandTable::default()
            .entries()
            .map(|(k, _)| k.to_owned())
            .collect();
        let mut s = Scenario::new(format!("random-{seed}"));
        s.config.seed = Some(seed);
        s.config.delay_min = Some(self.delay_min);
        s.config.delay_max = Some(self.delay_max);
        s.config.loss_rate = Some(self.loss_rate);
        let mut at = SimTime::ZERO;
        for _ in 0..self.commands {
            let key = keys.choose(&mut rng).expect("non-empty table");
            let sender = SENDERS.choose(&mut rng).expect("non-empty");
            s.push(
                at,
                StepKind::SendSms {
                    sender: PhoneNumber::new(sender).expect("valid"),
                    body: SmsBody::new(key).expect("valid"),
                },
            );
            let gap = rng.gen_range(self.min_gap.as_micros()..=self.max_gap.as_micros());
            at += SimDuration::from_micros(gap);
        }
        s
    }

    pub fn run(&self, seed: u64) -> Result<RunReport, SimError> {
        run(&self.scenario(seed))
    }

    /// Mean accuracy over `seeds`.
    pub fn mean_accuracy(&self, seeds: impl IntoIterator<Item = u64>) -> Result<f64, SimError> {
        let mut total = 0.0;
        let mut n = 0u32;
        for seed in seeds {
            total += self.run(seed)?.accuracy_pct;
            n += 1;
        }
        Ok(if n == 0 { 100.0 } else { total / f64::from(n) })
    }
}
