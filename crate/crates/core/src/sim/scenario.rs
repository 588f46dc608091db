//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! set seed 7
//! set sms-delay-min 1000ms
//! at 0ms sms +601 "L1ON"
//! at 6s expect load 1 on
//! at 8s expect sms to +601 contains "L1:ON"
//! at 6s expect latency load 1 <= 2s
//! ```

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::at_codec::{PhoneNumber, SmsBody};
use crate::controller::{Action, CommandTable, LoadId};
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Settings a scenario may override. Unset fields keep the simulator
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub delay_min: Option<SimDuration>,
    pub delay_max: Option<SimDuration>,
    pub loss_rate: Option<f64>,
    pub sim_capacity: Option<u32>,
    pub response_latency: Option<SimDuration>,
    pub whitelist: Option<Vec<PhoneNumber>>,
    pub commands: Vec<(String, Action)>,
    pub fosc_hz: Option<u32>,
    pub spbrg: Option<u8>,
    pub modem_baud: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StepKind {
    SendSms { sender: PhoneNumber, body: SmsBody },
    ExpectLoad { id: LoadId, on: bool },
    ExpectSms { to: PhoneNumber, contains: String },
    ExpectLatency { id: LoadId, max: SimDuration },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    /// 1-based source line, 0 for generated steps.
    pub line: usize,
    pub at: SimTime,
    pub kind: StepKind,
}

impl Step {
    pub fn is_assertion(&self) -> bool {
        !matches!(self.kind, StepKind::SendSms { .. })
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {} ", self.at)?;
        match &self.kind {
            StepKind::SendSms { sender, body } => write!(f, "sms {sender} \"{body}\""),
            StepKind::ExpectLoad { id, on } => {
                write!(f, "expect load {id} {}", if *on { "on" } else { "off" })
            }
            StepKind::ExpectSms { to, contains } => {
                write!(f, "expect sms to {to} contains \"{contains}\"")
            }
            StepKind::ExpectLatency { id, max } => write!(f, "expect latency load {id} <= {max}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub config: ConfigOverrides,
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Scenario {
            name: name.into(),
            ..Scenario::default()
        }
    }

    pub fn stimuli(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| !s.is_assertion())
    }

    pub fn assertions(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| s.is_assertion())
    }

    pub fn push(&mut self, at: SimTime, kind: StepKind) {
        self.steps.push(Step { line: 0, at, kind });
    }

    /// Render back into the file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        if let Some(v) = c.seed {
            out += &format!("set seed {v}\n");
        }
        if let Some(v) = c.delay_min {
            out += &format!("set sms-delay-min {v}\n");
        }
        if let Some(v) = c.delay_max {
            out += &format!("set sms-delay-max {v}\n");
        }
        if let Some(v) = c.loss_rate {
            out += &format!("set loss-rate {v}\n");
        }
        if let Some(v) = c.sim_capacity {
            out += &format!("set sim-capacity {v}\n");
        }
        if let Some(v) = c.response_latency {
            out += &format!("set response-latency {v}\n");
        }
        if let Some(list) = &c.whitelist {
            let nums: Vec<&str> = list.iter().map(PhoneNumber::as_str).collect();
            out += &format!("set whitelist {}\n", nums.join(" "));
        }
        for (key, action) in &c.commands {
            let action = match action {
                Action::SetLoad(id, on) => format!("load {id} {}", if *on { "on" } else { "off" }),
                Action::AllOn => "all on".into(),
                Action::AllOff => "all off".into(),
                Action::Status => "status".into(),
            };
            out += &format!("set command {key} {action}\n");
        }
        if let Some(v) = c.fosc_hz {
            out += &format!("set fosc {v}\n");
        }
        if let Some(v) = c.spbrg {
            out += &format!("set spbrg {v}\n");
        }
        if let Some(v) = c.modem_baud {
            out += &format!("set modem-baud {v}\n");
        }
        for step in &self.steps {
            out += &format!("{step}\n");
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Token<'a> {
    column: usize,
    text: &'a str,
    quoted: bool,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token<'_>>, ScenarioError> {
    let mut tokens = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b' ' | b'\t' => i += 1,
            b'"' => {
                let close = line[i + 1..].find('"').ok_or_else(|| ScenarioError {
                    line: line_no,
                    column: i + 1,
                    message: "unterminated quoted string".into(),
                })?;
                tokens.push(Token {
                    column: i + 1,
                    text: &line[i + 1..i + 1 + close],
                    quoted: true,
                });
                i += close + 2;
            }
            _ => {
                let end = line[i..]
                    .find([' ', '\t', '"'])
                    .map_or(line.len(), |p| p + i);
                tokens.push(Token {
                    column: i + 1,
                    text: &line[i..end],
                    quoted: false,
                });
                i = end;
            }
        }
    }
    Ok(tokens)
}

pub fn parse_duration(text: &str) -> Option<SimDuration> {
    let split = text.find(|c: char| !c.is_ascii_digit())?;
    let (digits, unit) = text.split_at(split);
    if digits.is_empty() {
        return None;
    }
    let n: u64 = digits.parse().ok()?;
    let scale = match unit {
        "us" => 1,
        "ms" => 1_000,
        "s" => 1_000_000,
        _ => return None,
    };
    n.checked_mul(scale).map(SimDuration::from_micros)
}

struct LineParser<'a> {
    line_no: usize,
    tokens: Vec<Token<'a>>,
    pos: usize,
    line_len: usize,
}

impl<'a> LineParser<'a> {
    fn err_at(&self, column: usize, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            line: self.line_no,
            column,
            message: message.into(),
        }
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or(self.line_len + 1, |t| t.column)
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>, ScenarioError> {
        let col = self.column();
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err_at(col, format!("expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn word(&mut self, what: &str) -> Result<Token<'a>, ScenarioError> {
        let tok = self.next(what)?;
        if tok.quoted {
            return Err(self.err_at(
                tok.column,
                format!("expected {what}, found a quoted string"),
            ));
        }
        Ok(tok)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ScenarioError> {
        let tok = self.word(&format!("`{kw}`"))?;
        if tok.text != kw {
            return Err(self.err_at(tok.column, format!("expected `{kw}`, found `{}`", tok.text)));
        }
        Ok(())
    }

    fn quoted(&mut self, what: &str) -> Result<Token<'a>, ScenarioError> {
        let tok = self.next(what)?;
        if !tok.quoted {
            return Err(self.err_at(tok.column, format!("{what} must be in double quotes")));
        }
        Ok(tok)
    }

    fn duration(&mut self) -> Result<SimDuration, ScenarioError> {
        let tok = self.word("a duration")?;
        parse_duration(tok.text).ok_or_else(|| {
            self.err_at(
                tok.column,
                format!("bad duration `{}` (use us, ms or s)", tok.text),
            )
        })
    }

    fn number(&mut self) -> Result<PhoneNumber, ScenarioError> {
        let tok = self.word("a phone number")?;
        PhoneNumber::new(tok.text).map_err(|e| self.err_at(tok.column, e.to_string()))
    }

    fn load_id(&mut self) -> Result<LoadId, ScenarioError> {
        let tok = self.word("a load id")?;
        tok.text
            .parse::<u32>()
            .ok()
            .and_then(|n| LoadId::new(n).ok())
            .ok_or_else(|| self.err_at(tok.column, format!("load id `{}` not in 1..=4", tok.text)))
    }

    fn on_off(&mut self) -> Result<bool, ScenarioError> {
        let tok = self.word("on or off")?;
        match tok.text {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(self.err_at(tok.column, format!("expected on or off, found `{other}`"))),
        }
    }

    fn parse_int<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, ScenarioError> {
        let tok = self.word(what)?;
        tok.text
            .parse()
            .map_err(|_| self.err_at(tok.column, format!("expected {what}, found `{}`", tok.text)))
    }

    fn rest_words(&mut self) -> Vec<Token<'a>> {
        let rest = self.tokens[self.pos..].to_vec();
        self.pos = self.tokens.len();
        rest
    }

    fn finish(&self) -> Result<(), ScenarioError> {
        match self.tokens.get(self.pos) {
            Some(tok) => Err(self.err_at(tok.column, format!("unexpected `{}`", tok.text))),
            None => Ok(()),
        }
    }
}

fn parse_set(p: &mut LineParser<'_>, config: &mut ConfigOverrides) -> Result<(), ScenarioError> {
    let key = p.word("a setting name")?;
    match key.text {
        "seed" => config.seed = Some(p.parse_int("an integer seed")?),
        "sms-delay-min" => config.delay_min = Some(p.duration()?),
        "sms-delay-max" => config.delay_max = Some(p.duration()?),
        "response-latency" => config.response_latency = Some(p.duration()?),
        "sim-capacity" => config.sim_capacity = Some(p.parse_int("a slot count")?),
        "fosc" => config.fosc_hz = Some(p.parse_int("a frequency in Hz")?),
        "spbrg" => config.spbrg = Some(p.parse_int("a register value 0-255")?),
        "modem-baud" => config.modem_baud = Some(p.parse_int("a baud rate")?),
        "loss-rate" => {
            let tok = p.word("a probability")?;
            let rate = tok
                .text
                .parse::<f64>()
                .ok()
                .filter(|r| (0.0..=1.0).contains(r))
                .ok_or_else(|| p.err_at(tok.column, "loss rate must be between 0 and 1"))?;
            config.loss_rate = Some(rate);
        }
        "whitelist" => {
            let mut list = Vec::new();
            for tok in p.rest_words() {
                let n =
                    PhoneNumber::new(tok.text).map_err(|e| p.err_at(tok.column, e.to_string()))?;
                list.push(n);
            }
            if list.is_empty() {
                return Err(p.err_at(p.column(), "whitelist needs at least one number"));
            }
            config.whitelist = Some(list);
        }
        "command" => {
            let name = p.word("a command text")?;
            let col = p.column();
            let words: Vec<&str> = p.rest_words().iter().map(|t| t.text).collect();
            let action =
                Action::parse(&words.join(" ")).map_err(|e| p.err_at(col, e.to_string()))?;
            CommandTable::empty()
                .insert(name.text, action)
                .map_err(|e| p.err_at(name.column, e.to_string()))?;
            config
                .commands
                .push((name.text.to_ascii_uppercase(), action));
        }
        other => return Err(p.err_at(key.column, format!("unknown setting `{other}`"))),
    }
    Ok(())
}

fn parse_at(p: &mut LineParser<'_>) -> Result<(SimTime, StepKind), ScenarioError> {
    let at = SimTime::ZERO + p.duration()?;
    let verb = p.word("`sms` or `expect`")?;
    let kind = match verb.text {
        "sms" => {
            let sender = p.number()?;
            let tok = p.quoted("message body")?;
            let body = SmsBody::new(tok.text).map_err(|e| p.err_at(tok.column, e.to_string()))?;
            StepKind::SendSms { sender, body }
        }
        "expect" => {
            let what = p.word("`load`, `sms` or `latency`")?;
            match what.text {
                "load" => {
                    let id = p.load_id()?;
                    let on = p.on_off()?;
                    StepKind::ExpectLoad { id, on }
                }
                "sms" => {
                    p.keyword("to")?;
                    let to = p.number()?;
                    p.keyword("contains")?;
                    let text = p.quoted("expected text")?;
                    StepKind::ExpectSms {
                        to,
                        contains: text.text.to_owned(),
                    }
                }
                "latency" => {
                    p.keyword("load")?;
                    let id = p.load_id()?;
                    p.keyword("<=")?;
                    let max = p.duration()?;
                    StepKind::ExpectLatency { id, max }
                }
                other => {
                    return Err(p.err_at(what.column, format!("unknown expectation `{other}`")))
                }
            }
        }
        other => return Err(p.err_at(verb.column, format!("unknown action `{other}`"))),
    };
    Ok((at, kind))
}

pub fn parse_scenario(name: &str, text: &str) -> Result<Scenario, ScenarioError> {
    let mut scenario = Scenario::new(name);
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            // a '#' inside quotes is part of the text
            Some(hash) if raw[..hash].matches('"').count() % 2 == 0 => &raw[..hash],
            _ => raw,
        };
        let tokens = tokenize(line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let mut p = LineParser {
            line_no,
            tokens,
            pos: 0,
            line_len: line.len(),
        };
        let head = p.word("a directive")?;
        match head.text {
            "set" => parse_set(&mut p, &mut scenario.config)?,
            "at" => {
                let (at, kind) = parse_at(&mut p)?;
                scenario.steps.push(Step {
                    line: line_no,
                    at,
                    kind,
                });
            }
            other => return Err(p.err_at(head.column, format!("unknown directive `{other}`"))),
        }
        p.finish()?;
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sms_step() {
        let s = parse_scenario("t", "at 0ms sms +601 \"L1ON\"").unwrap();
        assert_eq!(s.steps.len(), 1);
        assert_eq!(s.steps[0].at, SimTime::ZERO);
        assert_eq!(
            s.steps[0].kind,
            StepKind::SendSms {
                sender: PhoneNumber::new("+601").unwrap(),
                body: SmsBody::new("L1ON").unwrap()
            }
        );
    }

    #[test]
    fn parses_assertions() {
        let s = parse_scenario(
            "t",
            "at 6s expect load 1 on\n\
             at 8s expect sms to +601 contains \"L1:ON\"\n\
             at 6s expect latency load 1 <= 2s\n",
        )
        .unwrap();
        assert_eq!(
            s.steps[0].kind,
            StepKind::ExpectLoad {
                id: LoadId::new(1).unwrap(),
                on: true
            }
        );
        assert_eq!(s.steps[0].at, SimTime::from_micros(6_000_000));
        assert!(matches!(s.steps[1].kind, StepKind::ExpectSms { .. }));
        assert_eq!(
            s.steps[2].kind,
            StepKind::ExpectLatency {
                id: LoadId::new(1).unwrap(),
                max: SimDuration::from_secs(2)
            }
        );
        assert_eq!(s.assertions().count(), 3);
    }

    #[test]
    fn load_out_of_range_is_invalid() {
        let err = parse_scenario("t", "at 6s expect load 9 on").unwrap_err();
        assert_eq!((err.line, err.column), (1, 19));
    }

    #[test]
    fn unknown_directive_is_error() {
        let err = parse_scenario("t", "# header\n\nwait 5s").unwrap_err();
        assert_eq!((err.line, err.column), (3, 1));
        assert!(parse_scenario("t", "set colour blue").is_err());
        assert!(parse_scenario("t", "at 5s expect load 1 on please").is_err());
        assert!(parse_scenario("t", "at 5 sms +601 \"X\"").is_err());
        assert!(parse_scenario("t", "at 5s sms +601 \"unterminated").is_err());
        assert!(parse_scenario("t", "at 5s sms +601 L1ON").is_err());
    }

    #[test]
    fn settings() {
        let s = parse_scenario(
            "t",
            "set seed 9\nset sms-delay-min 0ms\nset sms-delay-max 3s\nset loss-rate 0.25\n\
             set whitelist +601 +602\nset command fan1 load 2 on\nset sim-capacity 5\n\
             set response-latency 200us # trailing comment\n",
        )
        .unwrap();
        let c = &s.config;
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.delay_min, Some(SimDuration::ZERO));
        assert_eq!(c.delay_max, Some(SimDuration::from_secs(3)));
        assert_eq!(c.loss_rate, Some(0.25));
        assert_eq!(c.whitelist.as_ref().map(Vec::len), Some(2));
        assert_eq!(
            c.commands,
            vec![(
                "FAN1".to_owned(),
                Action::SetLoad(LoadId::new(2).unwrap(), true)
            )]
        );
        assert_eq!(c.sim_capacity, Some(5));
        assert_eq!(c.response_latency, Some(SimDuration::from_micros(200)));

        assert!(parse_scenario("t", "set loss-rate 2").is_err());
        assert!(parse_scenario("t", "set command ON load 1 on").is_err());
    }

    #[test]
    fn text_round_trip() {
        let src = "set seed 3\nset command FAN1 all off\nat 0s sms +601 \"A #1\"\nat 6s expect load 1 on\n";
        let s = parse_scenario("t", src).unwrap();
        let again = parse_scenario("t", &s.to_text()).unwrap();
        assert_eq!(s.config, again.config);
        assert_eq!(s.steps.len(), again.steps.len());
        for (a, b) in s.steps.iter().zip(&again.steps) {
            assert_eq!((a.at, &a.kind), (b.at, &b.kind));
        }
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration("300us"), Some(SimDuration::from_micros(300)));
        assert_eq!(
            parse_duration("2500ms"),
            Some(SimDuration::from_millis(2500))
        );
        assert_eq!(parse_duration("6s"), Some(SimDuration::from_secs(6)));
        assert_eq!(parse_duration("6"), None);
        assert_eq!(parse_duration("ms"), None);
        assert_eq!(parse_duration("1.5s"), None);
        assert_eq!(parse_duration("-1s"), None);
    }
}
