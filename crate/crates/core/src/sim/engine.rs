//! The event loop that wires phones, network, modem, serial link and
//! controller together.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::queue::EventQueue;
use super::report::{
    accuracy, AssertionResult, CommandOutcome, Direction, Latencies, LatencyStats, RunReport,
    TraceEntry,
};
use super::scenario::{ConfigOverrides, Scenario, ScenarioError, Step, StepKind};
use crate::at_codec::{
    render_command, render_response, AtCommand, AtResponse, PhoneNumber, SlotIndex, SmsBody,
};
use crate::controller::{
    match_command, Action, CommandTable, Controller, ControllerConfig, ControllerEvent, LoadBank,
    LoadChange, LoadId, StepOutput, TimerToken, DEFAULT_WATCHDOG,
};
use crate::gsm_modem::{
    CellularNetwork, Destination, Execution, MessageTag, Modem, ModemError, ModemState,
    NetworkConfig, SimStore, DEFAULT_RESPONSE_LATENCY, DEFAULT_SIM_CAPACITY,
};
use crate::time::{SimDuration, SimTime};
use crate::uart_link::{calculated_baud, BrgConfig, BrgError, RxByte, SerialLink};

pub const DEFAULT_FOSC_HZ: u32 = 20_000_000;
pub const DEFAULT_SPBRG: u8 = 32;
pub const DEFAULT_MODEM_BAUD: u32 = 9600;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Brg(#[from] BrgError),
    #[error("scenario invalid: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub sim_capacity: u32,
    pub response_latency: SimDuration,
    pub controller_brg: BrgConfig,
    pub modem_baud: u32,
    pub table: CommandTable,
    pub whitelist: Option<BTreeSet<PhoneNumber>>,
    pub modem_number: PhoneNumber,
    pub watchdog: SimDuration,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            network: NetworkConfig::default(),
            sim_capacity: DEFAULT_SIM_CAPACITY,
            response_latency: DEFAULT_RESPONSE_LATENCY,
            controller_brg: BrgConfig::new(DEFAULT_FOSC_HZ, DEFAULT_SPBRG).expect("valid"),
            modem_baud: DEFAULT_MODEM_BAUD,
            table: CommandTable::default(),
            whitelist: None,
            modem_number: PhoneNumber::new("+60100000000").expect("valid"),
            watchdog: DEFAULT_WATCHDOG,
        }
    }
}

impl SimConfig {
    /// Defaults with a scenario's `set` lines applied.
    pub fn from_overrides(o: &ConfigOverrides) -> Result<Self, SimError> {
        let mut c = SimConfig::default();
        if let Some(seed) = o.seed {
            c.network.seed = seed;
        }
        if let Some(d) = o.delay_min {
            c.network.delay_min = d;
        }
        if let Some(d) = o.delay_max {
            c.network.delay_max = d;
        }
        if let Some(p) = o.loss_rate {
            c.network.loss_rate = p;
        }
        if let Some(n) = o.sim_capacity {
            c.sim_capacity = n;
        }
        if let Some(l) = o.response_latency {
            c.response_latency = l;
        }
        if let Some(list) = &o.whitelist {
            c.whitelist = Some(list.iter().cloned().collect());
        }
        for (key, action) in &o.commands {
            c.table
                .insert(key, *action)
                .map_err(|e| SimError::Config(e.to_string()))?;
        }
        if o.fosc_hz.is_some() || o.spbrg.is_some() {
            c.controller_brg = BrgConfig::new(
                o.fosc_hz.unwrap_or(DEFAULT_FOSC_HZ),
                o.spbrg.unwrap_or(DEFAULT_SPBRG),
            )?;
        }
        if let Some(b) = o.modem_baud {
            if b == 0 {
                return Err(SimError::Config("modem baud must be positive".into()));
            }
            c.modem_baud = b;
        }
        Ok(c)
    }

    fn authorized(&self, sender: &PhoneNumber) -> bool {
        self.whitelist.as_ref().is_none_or(|w| w.contains(sender))
    }
}

#[derive(Debug, Clone)]
enum Event {
    PhoneSend(MessageTag),
    NetworkWake,
    SerialArrive(Direction),
    ModemEmit(Execution),
    ModemTxIdle,
    ControllerTimer(TimerToken),
}

/// A relay change with the delay since its message was announced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Actuation {
    pub change: LoadChange,
    pub latency: SimDuration,
}

/// A message that reached a phone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Received {
    pub at: SimTime,
    pub from: PhoneNumber,
    pub body: SmsBody,
}

#[derive(Debug, Clone)]
struct CommandRecord {
    sender: PhoneNumber,
    body: SmsBody,
    sent: SimTime,
    expected: Option<Action>,
    executed: Option<SimTime>,
    effect_ok: bool,
    feedback: Option<SimTime>,
}

impl CommandRecord {
    fn succeeded(&self) -> bool {
        self.expected.is_some()
            && self.executed.is_some()
            && self.effect_ok
            && self.feedback.is_some()
    }
}

/// A freshly wired system plus its event queue.
pub struct Simulation {
    config: SimConfig,
    queue: EventQueue<Event>,
    link: SerialLink,
    modem: Modem,
    network: CellularNetwork,
    controller: Controller,
    framer: crate::at_codec::ResponseFramer,
    phones: BTreeMap<PhoneNumber, Vec<Received>>,
    records: Vec<CommandRecord>,
    outbox: Vec<AtCommand>,
    responses_pending: usize,
    last_command_end: Option<SimTime>,
    indicated_at: BTreeMap<SlotIndex, SimTime>,
    processing: Option<(MessageTag, SimTime)>,
    outbound_tag: Option<MessageTag>,
    actuations: Vec<Actuation>,
    modem_gaps: Vec<SimDuration>,
    notes: Vec<(SimTime, String)>,
    trace: Vec<TraceEntry>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        let modem = Modem::new(
            ModemState::new(config.response_latency)?,
            SimStore::new(config.sim_capacity)?,
        );
        let network = CellularNetwork::new(config.network)?;
        let controller = Controller::new(
            ControllerConfig {
                table: config.table.clone(),
                whitelist: config.whitelist.clone(),
                watchdog: config.watchdog,
                ..ControllerConfig::default()
            },
            LoadBank::default(),
        );
        let link = SerialLink::new(
            calculated_baud(&config.controller_brg),
            f64::from(config.modem_baud),
        );
        let mut queue = EventQueue::new();
        queue.push(
            SimTime::ZERO,
            Event::ControllerTimer(controller.boot_timer()),
        );
        Ok(Simulation {
            config,
            queue,
            link,
            modem,
            network,
            controller,
            framer: Default::default(),
            phones: BTreeMap::new(),
            records: Vec::new(),
            outbox: Vec::new(),
            responses_pending: 0,
            last_command_end: None,
            indicated_at: BTreeMap::new(),
            processing: None,
            outbound_tag: None,
            actuations: Vec::new(),
            modem_gaps: Vec::new(),
            notes: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn loads(&self) -> &LoadBank {
        &self.controller.loads
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn modem(&self) -> &Modem {
        &self.modem
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn actuations(&self) -> &[Actuation] {
        &self.actuations
    }

    pub fn inbox(&self, phone: &PhoneNumber) -> &[Received] {
        self.phones.get(phone).map_or(&[], Vec::as_slice)
    }

    pub fn notes(&self) -> &[(SimTime, String)] {
        &self.notes
    }

    /// Queue a text from `sender` to the modem at time `at`.
    pub fn schedule_sms(&mut self, at: SimTime, sender: PhoneNumber, body: SmsBody) {
        let tag = MessageTag(self.records.len() as u64);
        let expected = match_command(body.as_str(), &self.config.table)
            .filter(|_| self.config.authorized(&sender));
        self.phones.entry(sender.clone()).or_default();
        self.records.push(CommandRecord {
            sender,
            body,
            sent: at,
            expected,
            executed: None,
            effect_ok: false,
            feedback: None,
        });
        self.queue.push(at, Event::PhoneSend(tag));
    }

    pub fn next_event_time(&self) -> Option<SimTime> {
        self.queue.peek_time()
    }

    /// Process one event. Returns false when nothing is left.
    pub fn step(&mut self) -> bool {
        let Some((now, event)) = self.queue.pop() else {
            return false;
        };
        match event {
            Event::PhoneSend(tag) => {
                let rec = &self.records[tag.0 as usize];
                let due = self.network.submit_inbound(
                    rec.sender.clone(),
                    rec.body.clone(),
                    now,
                    Some(tag),
                );
                self.queue.push(due, Event::NetworkWake);
            }
            Event::NetworkWake => self.on_network(now),
            Event::SerialArrive(Direction::ToModem) => self.on_modem_rx(now),
            Event::SerialArrive(Direction::ToController) => self.on_controller_rx(now),
            Event::ModemEmit(exec) => self.on_modem_emit(now, exec),
            Event::ModemTxIdle => self.flush_indication(now),
            Event::ControllerTimer(token) => {
                let out = self
                    .controller
                    .step(ControllerEvent::TimerExpired(token), now);
                self.absorb(now, out);
                self.flush_outbox(now);
            }
        }
        true
    }

    pub fn run_until_idle(&mut self) {
        while self.step() {}
    }

    /// Process every event due at or before `t`, then move the clock to `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while self.queue.peek_time().is_some_and(|next| next <= t) {
            self.step();
        }
        self.queue.advance_to(t);
    }

    fn on_network(&mut self, now: SimTime) {
        for (_, msg) in self.network.take_due(now) {
            match msg.to {
                Destination::Modem => {
                    match self.modem.deliver_inbound(msg.from, msg.body, now, msg.tag) {
                        Ok(_) => self.flush_indication(now),
                        Err(e) => self.notes.push((now, format!("modem: {e}"))),
                    }
                }
                Destination::Phone(number) => {
                    if let Some(rec) = msg.tag.and_then(|t| self.records.get_mut(t.0 as usize)) {
                        if rec.sender == number && rec.feedback.is_none() {
                            rec.feedback = Some(now);
                        }
                    }
                    self.phones.entry(number).or_default().push(Received {
                        at: now,
                        from: msg.from,
                        body: msg.body,
                    });
                }
            }
        }
    }

    fn on_modem_rx(&mut self, now: SimTime) {
        for byte in self.link.to_modem.take_due(now) {
            let exec = match byte {
                RxByte::Data(b) => self.modem.receive(b),
                RxByte::FramingError => {
                    self.modem.receive_framing_error();
                    None
                }
            };
            if let Some(exec) = exec {
                self.responses_pending += 1;
                self.last_command_end = Some(now);
                let latency = self.modem.state.response_latency();
                self.queue.push(now + latency, Event::ModemEmit(exec));
            }
        }
        self.flush_indication(now);
    }

    fn on_modem_emit(&mut self, now: SimTime, exec: Execution) {
        self.responses_pending -= 1;
        let bytes: Vec<u8> = exec.responses.iter().flat_map(render_response).collect();
        if let Some((start, _)) = self.transmit(now, Direction::ToController, &bytes) {
            if let Some(end) = self.last_command_end.take() {
                self.modem_gaps.push(start - end);
            }
        }
        if let Some(sms) = exec.outbound {
            let transit = self.network.submit_outbound(
                self.config.modem_number.clone(),
                sms.recipient,
                sms.body,
                now,
                self.outbound_tag.take(),
            );
            if !transit.dropped {
                self.queue.push(transit.due, Event::NetworkWake);
            }
        }
    }

    fn on_controller_rx(&mut self, now: SimTime) {
        let mut data = Vec::new();
        let mut events = Vec::new();
        for byte in self.link.to_controller.take_due(now) {
            match byte {
                RxByte::Data(b) => data.push(b),
                RxByte::FramingError => {
                    events.extend(self.framer.feed(&std::mem::take(&mut data)));
                    events.push(Err(self.framer.framing_error()));
                }
            }
        }
        events.extend(self.framer.feed(&data));
        for frame in events {
            let event = match frame {
                Ok(resp) => ControllerEvent::Response(resp),
                Err(e) => ControllerEvent::MalformedResponse(e.to_string()),
            };
            let out = self.controller.step(event, now);
            self.absorb(now, out);
        }
        self.flush_outbox(now);
        self.flush_indication(now);
    }

    fn absorb(&mut self, now: SimTime, out: StepOutput) {
        for note in out.notes {
            self.notes.push((now, note));
        }
        if let Some((token, after)) = out.timer {
            self.queue.push(now + after, Event::ControllerTimer(token));
        }
        if let Some(exec) = &out.executed {
            let indicated = self.indicated_at.get(&exec.slot).copied().unwrap_or(now);
            if let Some((tag, _)) = self.processing {
                let loads = &self.controller.loads;
                if let Some(rec) = self.records.get_mut(tag.0 as usize) {
                    rec.executed = Some(now);
                    rec.effect_ok = LoadId::all().all(|id| {
                        exec.action
                            .intended(id)
                            .is_none_or(|on| loads.is_on(id) == on)
                    });
                }
            }
            for change in out.changes {
                self.actuations.push(Actuation {
                    change,
                    latency: now - indicated,
                });
            }
        }
        self.outbox.extend(out.commands);
    }

    fn flush_outbox(&mut self, now: SimTime) {
        // hold off while an indication is arriving
        if self.link.to_controller.is_busy(now) {
            return;
        }
        for cmd in std::mem::take(&mut self.outbox) {
            match &cmd {
                AtCommand::ReadMessage(slot) => {
                    self.processing = self
                        .modem
                        .store
                        .tag(*slot)
                        .map(|tag| (tag, self.indicated_at.get(slot).copied().unwrap_or(now)));
                }
                AtCommand::SendBody(_) => {
                    self.outbound_tag = self.processing.map(|(t, _)| t);
                }
                _ => {}
            }
            self.transmit(now, Direction::ToModem, &render_command(&cmd));
        }
    }

    fn flush_indication(&mut self, now: SimTime) {
        let quiet = self.responses_pending == 0
            && !self.modem.mid_command()
            && !self.link.to_modem.is_busy(now)
            && !self.link.to_controller.is_busy(now);
        if !quiet {
            return;
        }
        if let Some(ind) = self.modem.take_pending_indication() {
            if let AtResponse::NewMessageIndication { index, .. } = &ind {
                self.indicated_at.insert(*index, now);
            }
            self.transmit(now, Direction::ToController, &render_response(&ind));
        }
    }

    fn transmit(
        &mut self,
        now: SimTime,
        dir: Direction,
        bytes: &[u8],
    ) -> Option<(SimTime, SimTime)> {
        let channel = match dir {
            Direction::ToModem => &mut self.link.to_modem,
            Direction::ToController => &mut self.link.to_controller,
        };
        let (start, end) = channel.write(now, bytes)?;
        self.queue.push(end, Event::SerialArrive(dir));
        if dir == Direction::ToController {
            self.queue.push(end, Event::ModemTxIdle);
        }
        self.trace.push(TraceEntry {
            start_us: start,
            end_us: end,
            dir,
            data: String::from_utf8_lossy(bytes).into_owned(),
        });
        Some((start, end))
    }

    fn evaluate(&self, step: &Step) -> AssertionResult {
        let deadline = step.at;
        let (passed, detail) = match &step.kind {
            StepKind::SendSms { .. } => unreachable!("stimuli are not assertions"),
            StepKind::ExpectLoad { id, on } => {
                let actual = self.controller.loads.is_on(*id);
                (
                    actual == *on,
                    format!("load {id} is {}", if actual { "on" } else { "off" }),
                )
            }
            StepKind::ExpectSms { to, contains } => {
                let inbox = self.inbox(to);
                let hit = inbox
                    .iter()
                    .any(|m| m.at <= deadline && m.body.as_str().contains(contains.as_str()));
                (hit, format!("{} message(s) received", inbox.len()))
            }
            StepKind::ExpectLatency { id, max } => {
                let samples: Vec<SimDuration> = self
                    .actuations
                    .iter()
                    .filter(|a| a.change.id == *id && a.change.time <= deadline)
                    .map(|a| a.latency)
                    .collect();
                match samples.iter().max() {
                    None => (false, format!("load {id} never switched")),
                    Some(worst) => (worst <= max, format!("worst {worst}")),
                }
            }
        };
        AssertionResult {
            line: step.line,
            step: step.to_string(),
            deadline_us: deadline,
            passed,
            detail,
        }
    }

    /// Summarise the run so far, evaluating `assertions` against current state.
    fn report(&self, name: &str, assertions: Vec<AssertionResult>) -> RunReport {
        let valid: Vec<&CommandRecord> = self
            .records
            .iter()
            .filter(|r| r.expected.is_some())
            .collect();
        let ok = valid.iter().filter(|r| r.succeeded()).count() as u64;
        let round_trips = valid.iter().filter_map(|r| r.feedback.map(|f| f - r.sent));
        RunReport {
            scenario: name.to_owned(),
            seed: self.config.network.seed,
            accuracy_pct: accuracy(ok, valid.len() as u64),
            commands_sent: valid.len() as u64,
            commands_ok: ok,
            assertions,
            latencies: Latencies {
                detection_to_actuation: LatencyStats::from_samples(
                    self.actuations.iter().map(|a| a.latency),
                ),
                sms_round_trip: LatencyStats::from_samples(round_trips),
                modem_response: LatencyStats::from_samples(self.modem_gaps.iter().copied()),
            },
            drops: self.network.drops(),
            store_full: self.modem.counters().store_full,
            final_loads: self.controller.loads.states(),
            outcomes: self
                .records
                .iter()
                .map(|r| CommandOutcome {
                    sender: r.sender.to_string(),
                    body: r.body.to_string(),
                    sent_us: r.sent,
                    valid: r.expected.is_some(),
                    executed_us: r.executed,
                    feedback_us: r.feedback,
                    succeeded: r.succeeded(),
                })
                .collect(),
            controller_notes: self.notes.clone(),
            end_us: self.now(),
            trace: self.trace.clone(),
        }
    }

    /// Drive a scenario to completion against this system.
    pub fn run_scenario(mut self, scenario: &Scenario) -> RunReport {
        for step in scenario.stimuli() {
            if let StepKind::SendSms { sender, body } = &step.kind {
                self.schedule_sms(step.at, sender.clone(), body.clone());
            }
        }
        let mut checks: Vec<&Step> = scenario.assertions().collect();
        checks.sort_by_key(|s| s.at);
        let mut results = Vec::with_capacity(checks.len());
        let mut checks = checks.into_iter().peekable();
        loop {
            let next = self.queue.peek_time();
            while let Some(step) = checks.next_if(|s| next.is_none_or(|t| s.at < t)) {
                self.queue.advance_to(step.at);
                results.push(self.evaluate(step));
            }
            if !self.step() {
                break;
            }
        }
        // evaluated in deadline order; report in file order
        results.sort_by_key(|r| r.line);
        self.report(&scenario.name, results)
    }
}

/// Run-time overrides layered over a scenario's own settings.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub delay_min: Option<SimDuration>,
    pub delay_max: Option<SimDuration>,
    pub loss_rate: Option<f64>,
}

pub fn run(scenario: &Scenario) -> Result<RunReport, SimError> {
    run_with(scenario, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, SimError> {
    let mut overrides = scenario.config.clone();
    overrides.seed = opts.seed.or(overrides.seed);
    overrides.delay_min = opts.delay_min.or(overrides.delay_min);
    overrides.delay_max = opts.delay_max.or(overrides.delay_max);
    overrides.loss_rate = opts.loss_rate.or(overrides.loss_rate);
    let config = SimConfig::from_overrides(&overrides)?;
    Ok(Simulation::new(config)?.run_scenario(scenario))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::parse_scenario;

    fn num(s: &str) -> PhoneNumber {
        PhoneNumber::new(s).unwrap()
    }

    #[test]
    fn boots_into_idle() {
        let mut sim = Simulation::new(SimConfig::default()).unwrap();
        sim.run_until_idle();
        assert_eq!(
            sim.controller().state(),
            &crate::controller::ControllerState::Idle
        );
        assert!(sim.modem().state.text_mode);
        let data: Vec<&str> = sim.trace().iter().map(|t| t.data.as_str()).collect();
        assert_eq!(data, ["AT\r", "\r\nOK\r\n", "AT+CMGF=1\r", "\r\nOK\r\n"]);
    }

    #[test]
    fn single_command_end_to_end() {
        let s = parse_scenario(
            "one",
            "at 0ms sms +601 \"L1ON\"\nat 6s expect load 1 on\nat 8s expect sms to +601 contains \"L1:ON\"\n",
        )
        .unwrap();
        let r = run(&s).unwrap();
        assert!(r.all_passed(), "{}", r.to_text());
        assert_eq!(r.accuracy_pct, 100.0);
        assert_eq!(r.commands_sent, 1);
    }

    #[test]
    fn empty_scenario_is_vacuously_accurate() {
        let r = run(&Scenario::new("empty")).unwrap();
        assert!(r.assertions.is_empty());
        assert_eq!(r.accuracy_pct, 100.0);
    }

    #[test]
    fn message_before_handshake_is_processed_after() {
        let mut cfg = SimConfig::default();
        cfg.network.delay_min = SimDuration::ZERO;
        cfg.network.delay_max = SimDuration::ZERO;
        let mut sim = Simulation::new(cfg).unwrap();
        sim.schedule_sms(SimTime::ZERO, num("+601"), SmsBody::new("L2ON").unwrap());
        sim.run_until_idle();
        assert!(sim.loads().is_on(LoadId::new(2).unwrap()));
        assert_eq!(sim.modem().store.occupied(), 0);
    }

    #[test]
    fn mismatched_baud_breaks_the_link() {
        let cfg = SimConfig {
            modem_baud: 4800,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.schedule_sms(SimTime::ZERO, num("+601"), SmsBody::new("L1ON").unwrap());
        sim.run_until_idle();
        assert!(!sim.loads().is_on(LoadId::new(1).unwrap()));
        assert!(!sim.modem().state.text_mode);
    }

    #[test]
    fn store_full_is_counted() {
        let mut cfg = SimConfig {
            sim_capacity: 1,
            ..SimConfig::default()
        };
        cfg.network.delay_min = SimDuration::from_millis(1000);
        cfg.network.delay_max = SimDuration::from_millis(1000);
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..3 {
            sim.schedule_sms(SimTime::ZERO, num("+601"), SmsBody::new("STATUS").unwrap());
        }
        sim.run_until_idle();
        let r = sim.report("full", vec![]);
        assert_eq!(r.store_full, 2);
        assert_eq!(r.commands_ok, 1);
    }
}
