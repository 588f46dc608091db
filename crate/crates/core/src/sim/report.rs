use serde::Serialize;

use crate::time::{SimDuration, SimTime};

/// Percentage of commands that fully succeeded. A run with no commands
/// counts as 100 %.
pub fn accuracy(executed_ok: u64, sent: u64) -> f64 {
    assert!(executed_ok <= sent, "more successes than commands");
    if sent == 0 {
        100.0
    } else {
        100.0 * executed_ok as f64 / sent as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub count: u64,
    pub min_us: Option<u64>,
    pub mean_us: Option<f64>,
    pub max_us: Option<u64>,
}

impl LatencyStats {
    pub fn from_samples(samples: impl IntoIterator<Item = SimDuration>) -> Self {
        let mut count = 0u64;
        let mut sum = 0u128;
        let mut min = u64::MAX;
        let mut max = 0u64;
        for s in samples {
            let us = s.as_micros();
            count += 1;
            sum += u128::from(us);
            min = min.min(us);
            max = max.max(us);
        }
        if count == 0 {
            return LatencyStats {
                count,
                min_us: None,
                mean_us: None,
                max_us: None,
            };
        }
        LatencyStats {
            count,
            min_us: Some(min),
            mean_us: Some(sum as f64 / count as f64),
            max_us: Some(max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Latencies {
    /// From the `+CMTI` leaving the modem to the relay change.
    pub detection_to_actuation: LatencyStats,
    /// From the phone sending a command to its status reply arriving.
    pub sms_round_trip: LatencyStats,
    /// From the last byte of a command to the first byte of its response.
    pub modem_response: LatencyStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    #[serde(rename = "controller->modem")]
    ToModem,
    #[serde(rename = "modem->controller")]
    ToController,
}

/// One write on the serial line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub start_us: SimTime,
    pub end_us: SimTime,
    pub dir: Direction,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionResult {
    pub line: usize,
    pub step: String,
    pub deadline_us: SimTime,
    pub passed: bool,
    pub detail: String,
}

/// What happened to one command sent from a phone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub sender: String,
    pub body: String,
    pub sent_us: SimTime,
    /// Matched a table entry and came from an authorised sender.
    pub valid: bool,
    pub executed_us: Option<SimTime>,
    pub feedback_us: Option<SimTime>,
    pub succeeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub accuracy_pct: f64,
    pub commands_sent: u64,
    pub commands_ok: u64,
    pub assertions: Vec<AssertionResult>,
    pub latencies: Latencies,
    pub drops: u64,
    pub store_full: u64,
    pub final_loads: [bool; 4],
    pub outcomes: Vec<CommandOutcome>,
    pub controller_notes: Vec<(SimTime, String)>,
    pub end_us: SimTime,
    pub trace: Vec<TraceEntry>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out += &format!("scenario: {} (seed {})\n", self.scenario, self.seed);
        for a in &self.assertions {
            out += &format!(
                "  [{}] line {}: {}{}\n",
                if a.passed { "PASS" } else { "FAIL" },
                a.line,
                a.step,
                if a.detail.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", a.detail)
                }
            );
        }
        let passed = self.assertions.iter().filter(|a| a.passed).count();
        out += &format!("assertions: {passed}/{} passed\n", self.assertions.len());
        out += &format!(
            "accuracy: {:.2}% ({}/{} commands)\n",
            self.accuracy_pct, self.commands_ok, self.commands_sent
        );
        let fmt_stats = |name: &str, s: &LatencyStats| match (s.min_us, s.mean_us, s.max_us) {
            (Some(lo), Some(mean), Some(hi)) => format!(
                "{name}: n={} min {} mean {:.0}us max {}\n",
                s.count,
                SimDuration::from_micros(lo),
                mean,
                SimDuration::from_micros(hi)
            ),
            _ => format!("{name}: no samples\n"),
        };
        out += &fmt_stats(
            "detection-to-actuation",
            &self.latencies.detection_to_actuation,
        );
        out += &fmt_stats("sms round trip", &self.latencies.sms_round_trip);
        out += &fmt_stats("modem response", &self.latencies.modem_response);
        out += &format!("drops: {}  store-full: {}\n", self.drops, self.store_full);
        let loads: Vec<String> = self
            .final_loads
            .iter()
            .enumerate()
            .map(|(i, on)| format!("L{}:{}", i + 1, if *on { "ON" } else { "OFF" }))
            .collect();
        out += &format!("final loads: {}\n", loads.join(" "));
        out
    }
}
