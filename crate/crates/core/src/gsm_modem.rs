//! GSM modem emulation: the text-mode AT interpreter, its SIM message store,
//! and the cellular network that carries messages between phones and the
//! modem.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::at_codec::{
    parse_command, AtCommand, AtResponse, CodecError, MessageStorage, PhoneNumber, SlotIndex,
    SmsBody, SmsMessage, SmsTimestamp, CR, CTRL_Z, LF,
};
use crate::time::{SimDuration, SimTime};

pub const DEFAULT_SIM_CAPACITY: u32 = 10;

/// Upper bound on command-to-response latency.
pub const MAX_RESPONSE_LATENCY: SimDuration = SimDuration::from_micros(500);
pub const DEFAULT_RESPONSE_LATENCY: SimDuration = SimDuration::from_micros(300);

/// Upper bound on any network delivery delay.
pub const MAX_DELIVERY_DELAY: SimDuration = SimDuration::from_secs(3);
pub const DEFAULT_DELAY_MIN: SimDuration = SimDuration::from_millis(1000);
pub const DEFAULT_DELAY_MAX: SimDuration = SimDuration::from_millis(2500);

/// `+CMS ERROR` code for access to an empty slot ("invalid memory index").
pub const CMS_INVALID_INDEX: u32 = 321;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModemError {
    #[error("SIM store is full")]
    StoreFull,
    #[error("SIM capacity must be at least 1")]
    ZeroCapacity,
    #[error("response latency {0} exceeds 500us")]
    LatencyTooLarge(SimDuration),
    #[error("delay bounds {min}..{max} invalid: need min <= max <= 3s")]
    BadDelayBounds { min: SimDuration, max: SimDuration },
    #[error("loss rate {0} outside 0..=1")]
    BadLossRate(f64),
}

/// Opaque label the simulator attaches to a message so it can follow it
/// through the system. Never appears on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct MessageTag(pub u64);

#[derive(Debug, Clone, PartialEq)]
struct StoredSms {
    message: SmsMessage,
    tag: Option<MessageTag>,
}

#[derive(Debug, Clone)]
pub struct SimStore {
    slots: Vec<Option<StoredSms>>,
}

impl SimStore {
    pub fn new(capacity: u32) -> Result<Self, ModemError> {
        if capacity == 0 {
            return Err(ModemError::ZeroCapacity);
        }
        Ok(SimStore {
            slots: vec![None; capacity as usize],
        })
    }

    pub fn capacity(&self) -> u32 {
        self.slots.len() as u32
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    fn cell(&self, index: SlotIndex) -> Option<&StoredSms> {
        self.slots.get(index.get() as usize - 1)?.as_ref()
    }

    pub fn get(&self, index: SlotIndex) -> Option<&SmsMessage> {
        self.cell(index).map(|s| &s.message)
    }

    pub fn tag(&self, index: SlotIndex) -> Option<MessageTag> {
        self.cell(index).and_then(|s| s.tag)
    }

    /// Store in the lowest empty slot.
    pub fn insert(
        &mut self,
        sender: PhoneNumber,
        body: SmsBody,
        timestamp: SimTime,
        tag: Option<MessageTag>,
    ) -> Result<SlotIndex, ModemError> {
        let free = self
            .slots
            .iter()
            .position(Option::is_none)
            .ok_or(ModemError::StoreFull)?;
        let index = SlotIndex::new(free as u32 + 1).expect("slot numbers start at 1");
        self.slots[free] = Some(StoredSms {
            message: SmsMessage {
                index,
                sender,
                timestamp,
                body,
                read: false,
            },
            tag,
        });
        Ok(index)
    }

    fn mark_read(&mut self, index: SlotIndex) {
        if let Some(Some(cell)) = self.slots.get_mut(index.get() as usize - 1) {
            cell.message.read = true;
        }
    }

    pub fn delete(&mut self, index: SlotIndex) -> Option<SmsMessage> {
        self.slots
            .get_mut(index.get() as usize - 1)?
            .take()
            .map(|s| s.message)
    }

    pub fn messages(&self) -> impl Iterator<Item = &SmsMessage> {
        self.slots.iter().flatten().map(|s| &s.message)
    }
}

/// Interpreter flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ModemState {
    pub text_mode: bool,
    pub indication_mode: bool,
    pub awaiting_body_for: Option<PhoneNumber>,
    response_latency: SimDuration,
}

impl ModemState {
    pub fn new(response_latency: SimDuration) -> Result<Self, ModemError> {
        if response_latency > MAX_RESPONSE_LATENCY {
            return Err(ModemError::LatencyTooLarge(response_latency));
        }
        Ok(ModemState {
            text_mode: false,
            indication_mode: true,
            awaiting_body_for: None,
            response_latency,
        })
    }

    pub fn response_latency(&self) -> SimDuration {
        self.response_latency
    }
}

impl Default for ModemState {
    fn default() -> Self {
        ModemState::new(DEFAULT_RESPONSE_LATENCY).expect("default latency is in bounds")
    }
}

/// A message the modem hands to the network after `+CMGS`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutboundSms {
    pub recipient: PhoneNumber,
    pub body: SmsBody,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Execution {
    pub responses: Vec<AtResponse>,
    pub outbound: Option<OutboundSms>,
}

impl Execution {
    fn reply(responses: Vec<AtResponse>) -> Self {
        Execution {
            responses,
            outbound: None,
        }
    }
}

/// Run one command against the interpreter state and store.
pub fn execute(
    cmd: &AtCommand,
    state: &mut ModemState,
    store: &mut SimStore,
    mr: &mut u8,
) -> Execution {
    // anything but the body cancels a pending send
    if state.awaiting_body_for.is_some() && !matches!(cmd, AtCommand::SendBody(_)) {
        state.awaiting_body_for = None;
        return Execution::reply(vec![AtResponse::Error]);
    }
    match cmd {
        AtCommand::Attention => Execution::reply(vec![AtResponse::Ok]),
        AtCommand::SetTextMode(on) => {
            state.text_mode = *on;
            Execution::reply(vec![AtResponse::Ok])
        }
        AtCommand::ConfigIndication(mode) => {
            state.indication_mode = *mode != 0;
            Execution::reply(vec![AtResponse::Ok])
        }
        AtCommand::ReadMessage(_) | AtCommand::SendMessage(_) if !state.text_mode => {
            Execution::reply(vec![AtResponse::Error])
        }
        AtCommand::ReadMessage(index) => match store.get(*index) {
            None => Execution::reply(vec![AtResponse::CmsError(CMS_INVALID_INDEX)]),
            Some(msg) => {
                let content = AtResponse::MessageContent {
                    read: msg.read,
                    sender: msg.sender.clone(),
                    timestamp: SmsTimestamp::from_sim_time(msg.timestamp),
                    body: msg.body.clone(),
                };
                store.mark_read(*index);
                Execution::reply(vec![content, AtResponse::Ok])
            }
        },
        AtCommand::DeleteMessage(index) => match store.delete(*index) {
            None => Execution::reply(vec![AtResponse::CmsError(CMS_INVALID_INDEX)]),
            Some(_) => Execution::reply(vec![AtResponse::Ok]),
        },
        AtCommand::SendMessage(recipient) => {
            state.awaiting_body_for = Some(recipient.clone());
            Execution::reply(vec![AtResponse::SendPrompt])
        }
        AtCommand::SendBody(body) => match state.awaiting_body_for.take() {
            None => Execution::reply(vec![AtResponse::Error]),
            Some(recipient) => {
                let reference = *mr;
                *mr = mr.wrapping_add(1);
                Execution {
                    responses: vec![AtResponse::SentAck(reference), AtResponse::Ok],
                    outbound: Some(OutboundSms {
                        recipient,
                        body: body.clone(),
                    }),
                }
            }
        },
    }
}

/// Collects incoming serial bytes into command lines.
#[derive(Debug, Default, Clone)]
pub struct LineAssembler {
    buf: Vec<u8>,
    damaged: bool,
}

/// A complete line, or a line that lost bytes to framing errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Line {
    Complete(Vec<u8>),
    Damaged,
}

impl LineAssembler {
    pub fn in_progress(&self) -> bool {
        !self.buf.is_empty() || self.damaged
    }

    pub fn push(&mut self, byte: u8) -> Option<Line> {
        if self.buf.is_empty() && !self.damaged && (byte == LF || byte == CR) {
            // stray line feeds and empty lines are ignored
            return None;
        }
        self.buf.push(byte);
        if byte == CR || byte == CTRL_Z {
            let line = std::mem::take(&mut self.buf);
            if std::mem::take(&mut self.damaged) {
                return Some(Line::Damaged);
            }
            return Some(Line::Complete(line));
        }
        None
    }

    pub fn framing_error(&mut self) {
        self.damaged = true;
    }
}

/// Modem counters surfaced in run reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModemCounters {
    pub commands: u64,
    pub errors: u64,
    pub store_full: u64,
    pub stored: u64,
}

/// The modem as a whole: interpreter, store, line assembler and the queue of
/// indications waiting for a quiet line.
#[derive(Debug, Clone)]
pub struct Modem {
    pub state: ModemState,
    pub store: SimStore,
    assembler: LineAssembler,
    pending_indications: Vec<AtResponse>,
    next_reference: u8,
    counters: ModemCounters,
}

impl Modem {
    pub fn new(state: ModemState, store: SimStore) -> Self {
        Modem {
            state,
            store,
            assembler: LineAssembler::default(),
            pending_indications: Vec::new(),
            next_reference: 0,
            counters: ModemCounters::default(),
        }
    }

    pub fn counters(&self) -> ModemCounters {
        self.counters
    }

    /// Feed one received byte; a finished line is executed immediately.
    pub fn receive(&mut self, byte: u8) -> Option<Execution> {
        let line = self.assembler.push(byte)?;
        Some(self.run_line(line))
    }

    pub fn receive_framing_error(&mut self) {
        self.assembler.framing_error();
    }

    fn run_line(&mut self, line: Line) -> Execution {
        self.counters.commands += 1;
        let parsed = match line {
            Line::Complete(bytes) => parse_command(&bytes),
            Line::Damaged => Err(CodecError::MalformedCommand("framing error".into())),
        };
        let exec = match parsed {
            Ok(cmd) => execute(
                &cmd,
                &mut self.state,
                &mut self.store,
                &mut self.next_reference,
            ),
            Err(_) => {
                self.state.awaiting_body_for = None;
                Execution::reply(vec![AtResponse::Error])
            }
        };
        if exec
            .responses
            .iter()
            .any(|r| matches!(r, AtResponse::Error | AtResponse::CmsError(_)))
        {
            self.counters.errors += 1;
        }
        exec
    }

    /// A message arrives from the network. On success the slot is returned
    /// and, with indications enabled, a `+CMTI` is queued for the line.
    pub fn deliver_inbound(
        &mut self,
        sender: PhoneNumber,
        body: SmsBody,
        now: SimTime,
        tag: Option<MessageTag>,
    ) -> Result<(SlotIndex, Option<AtResponse>), ModemError> {
        let index = match self.store.insert(sender, body, now, tag) {
            Ok(i) => i,
            Err(e) => {
                self.counters.store_full += 1;
                return Err(e);
            }
        };
        self.counters.stored += 1;
        let indication = self
            .state
            .indication_mode
            .then_some(AtResponse::NewMessageIndication {
                store: MessageStorage::Sim,
                index,
            });
        if let Some(ind) = &indication {
            self.pending_indications.push(ind.clone());
        }
        Ok((index, indication))
    }

    /// True while a command line is partially received or a body is expected.
    pub fn mid_command(&self) -> bool {
        self.assembler.in_progress() || self.state.awaiting_body_for.is_some()
    }

    pub fn has_pending_indication(&self) -> bool {
        !self.pending_indications.is_empty()
    }

    pub fn take_pending_indication(&mut self) -> Option<AtResponse> {
        if self.pending_indications.is_empty() {
            None
        } else {
            Some(self.pending_indications.remove(0))
        }
    }
}

impl Default for Modem {
    fn default() -> Self {
        Modem::new(
            ModemState::default(),
            SimStore::new(DEFAULT_SIM_CAPACITY).expect("nonzero"),
        )
    }
}

/// Where a message in the network is headed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Destination {
    Modem,
    Phone(PhoneNumber),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InFlight {
    pub from: PhoneNumber,
    pub to: Destination,
    pub body: SmsBody,
    pub submitted: SimTime,
    pub tag: Option<MessageTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub delay_min: SimDuration,
    pub delay_max: SimDuration,
    pub loss_rate: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            delay_min: DEFAULT_DELAY_MIN,
            delay_max: DEFAULT_DELAY_MAX,
            loss_rate: 0.0,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), ModemError> {
        if self.delay_min > self.delay_max || self.delay_max > MAX_DELIVERY_DELAY {
            return Err(ModemError::BadDelayBounds {
                min: self.delay_min,
                max: self.delay_max,
            });
        }
        if !(0.0..=1.0).contains(&self.loss_rate) {
            return Err(ModemError::BadLossRate(self.loss_rate));
        }
        Ok(())
    }
}

/// Store-and-forward SMS network with seeded delivery delays.
///
/// Every message waits a delay drawn uniformly from the configured bounds.
/// Messages the modem sends out are additionally dropped with probability
/// `loss_rate`.
#[derive(Debug, Clone)]
pub struct CellularNetwork {
    config: NetworkConfig,
    rng: ChaCha8Rng,
    in_flight: BTreeMap<(SimTime, u64), InFlight>,
    next_seq: u64,
    drops: u64,
}

impl CellularNetwork {
    pub fn new(config: NetworkConfig) -> Result<Self, ModemError> {
        config.validate()?;
        Ok(CellularNetwork {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            in_flight: BTreeMap::new(),
            next_seq: 0,
            drops: 0,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }

    fn sample_delay(&mut self) -> SimDuration {
        let lo = self.config.delay_min.as_micros();
        let hi = self.config.delay_max.as_micros();
        SimDuration::from_micros(self.rng.gen_range(lo..=hi))
    }

    fn enqueue(&mut self, due: SimTime, msg: InFlight) {
        self.in_flight.insert((due, self.next_seq), msg);
        self.next_seq += 1;
    }

    /// A phone sends a message towards the modem. Returns its due time.
    pub fn submit_inbound(
        &mut self,
        from: PhoneNumber,
        body: SmsBody,
        now: SimTime,
        tag: Option<MessageTag>,
    ) -> SimTime {
        let due = now + self.sample_delay();
        self.enqueue(
            due,
            InFlight {
                from,
                to: Destination::Modem,
                body,
                submitted: now,
                tag,
            },
        );
        due
    }

    /// The modem sends a message to a phone. Returns the due time; a dropped
    /// message still reports the time it would have arrived but never does.
    pub fn submit_outbound(
        &mut self,
        from: PhoneNumber,
        recipient: PhoneNumber,
        body: SmsBody,
        now: SimTime,
        tag: Option<MessageTag>,
    ) -> Transit {
        let due = now + self.sample_delay();
        // one uniform draw per message keeps loss outcomes nested across rates
        let draw: f64 = self.rng.gen();
        if draw < self.config.loss_rate {
            self.drops += 1;
            return Transit { due, dropped: true };
        }
        self.enqueue(
            due,
            InFlight {
                from,
                to: Destination::Phone(recipient),
                body,
                submitted: now,
                tag,
            },
        );
        Transit {
            due,
            dropped: false,
        }
    }

    /// Remove every message due at or before `now`, in due order.
    pub fn take_due(&mut self, now: SimTime) -> Vec<(SimTime, InFlight)> {
        let later = self.in_flight.split_off(&(now, u64::MAX));
        let due = std::mem::replace(&mut self.in_flight, later);
        due.into_iter().map(|((t, _), m)| (t, m)).collect()
    }

    pub fn next_due(&self) -> Option<SimTime> {
        self.in_flight.keys().next().map(|&(t, _)| t)
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transit {
    pub due: SimTime,
    pub dropped: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(s: &str) -> PhoneNumber {
        PhoneNumber::new(s).unwrap()
    }

    fn body(s: &str) -> SmsBody {
        SmsBody::new(s).unwrap()
    }

    fn slot(n: u32) -> SlotIndex {
        SlotIndex::new(n).unwrap()
    }

    fn ready_modem() -> Modem {
        let mut m = Modem::default();
        m.state.text_mode = true;
        m
    }

    fn run(m: &mut Modem, cmd: AtCommand) -> Vec<AtResponse> {
        execute(&cmd, &mut m.state, &mut m.store, &mut m.next_reference).responses
    }

    #[test]
    fn attention_answers_ok() {
        let mut m = Modem::default();
        assert_eq!(run(&mut m, AtCommand::Attention), vec![AtResponse::Ok]);
    }

    #[test]
    fn delete_empties_slot() {
        let mut m = ready_modem();
        m.store
            .insert(num("+601"), body("L1ON"), SimTime::ZERO, None)
            .unwrap();
        assert_eq!(
            run(&mut m, AtCommand::DeleteMessage(slot(1))),
            vec![AtResponse::Ok]
        );
        assert!(m.store.get(slot(1)).is_none());
        assert_eq!(
            run(&mut m, AtCommand::DeleteMessage(slot(1))),
            vec![AtResponse::CmsError(321)]
        );
    }

    #[test]
    fn read_empty_slot_is_cms_321() {
        let mut m = ready_modem();
        assert_eq!(
            run(&mut m, AtCommand::ReadMessage(slot(5))),
            vec![AtResponse::CmsError(321)]
        );
        assert_eq!(
            run(&mut m, AtCommand::ReadMessage(slot(11))),
            vec![AtResponse::CmsError(321)]
        );
    }

    #[test]
    fn read_marks_message_read() {
        let mut m = ready_modem();
        m.store
            .insert(
                num("+601"),
                body("L1ON"),
                SimTime::from_micros(5_000_000),
                None,
            )
            .unwrap();
        let first = run(&mut m, AtCommand::ReadMessage(slot(1)));
        assert_eq!(
            first,
            vec![
                AtResponse::MessageContent {
                    read: false,
                    sender: num("+601"),
                    timestamp: SmsTimestamp::new("14/01/01,00:00:05+00").unwrap(),
                    body: body("L1ON"),
                },
                AtResponse::Ok
            ]
        );
        let again = run(&mut m, AtCommand::ReadMessage(slot(1)));
        assert!(matches!(
            again[0],
            AtResponse::MessageContent { read: true, .. }
        ));
    }

    #[test]
    fn text_mode_required_for_read_and_send() {
        let mut m = Modem::default();
        assert_eq!(
            run(&mut m, AtCommand::ReadMessage(slot(1))),
            vec![AtResponse::Error]
        );
        assert_eq!(
            run(&mut m, AtCommand::SendMessage(num("+601"))),
            vec![AtResponse::Error]
        );
        assert_eq!(
            run(&mut m, AtCommand::SetTextMode(true)),
            vec![AtResponse::Ok]
        );
        assert!(m.state.text_mode);
    }

    #[test]
    fn send_flow() {
        let mut m = ready_modem();
        assert_eq!(
            run(&mut m, AtCommand::SendMessage(num("+601"))),
            vec![AtResponse::SendPrompt]
        );
        assert_eq!(m.state.awaiting_body_for, Some(num("+601")));
        let exec = execute(
            &AtCommand::SendBody(body("L1:ON")),
            &mut m.state,
            &mut m.store,
            &mut m.next_reference,
        );
        assert_eq!(exec.responses, vec![AtResponse::SentAck(0), AtResponse::Ok]);
        assert_eq!(
            exec.outbound,
            Some(OutboundSms {
                recipient: num("+601"),
                body: body("L1:ON")
            })
        );
        assert_eq!(m.state.awaiting_body_for, None);
    }

    #[test]
    fn body_without_send_is_error() {
        let mut m = ready_modem();
        assert_eq!(
            run(&mut m, AtCommand::SendBody(body("x"))),
            vec![AtResponse::Error]
        );
    }

    #[test]
    fn other_command_cancels_pending_send() {
        let mut m = ready_modem();
        run(&mut m, AtCommand::SendMessage(num("+601")));
        assert_eq!(run(&mut m, AtCommand::Attention), vec![AtResponse::Error]);
        assert_eq!(m.state.awaiting_body_for, None);
    }

    #[test]
    fn inbound_goes_to_lowest_free_slot() {
        let mut m = Modem::default();
        let (s, ind) = m
            .deliver_inbound(num("+601"), body("A"), SimTime::ZERO, None)
            .unwrap();
        assert_eq!(s, slot(1));
        assert_eq!(
            ind,
            Some(AtResponse::NewMessageIndication {
                store: MessageStorage::Sim,
                index: slot(1)
            })
        );
        m.deliver_inbound(num("+601"), body("B"), SimTime::ZERO, None)
            .unwrap();
        let (s, _) = m
            .deliver_inbound(num("+601"), body("C"), SimTime::ZERO, None)
            .unwrap();
        assert_eq!(s, slot(3));
        m.store.delete(slot(2));
        let (s, _) = m
            .deliver_inbound(num("+601"), body("D"), SimTime::ZERO, None)
            .unwrap();
        assert_eq!(s, slot(2));
    }

    #[test]
    fn full_store_discards_and_counts() {
        let mut m = Modem::default();
        for _ in 0..10 {
            m.deliver_inbound(num("+601"), body("A"), SimTime::ZERO, None)
                .unwrap();
        }
        m.pending_indications.clear();
        assert_eq!(
            m.deliver_inbound(num("+601"), body("A"), SimTime::ZERO, None),
            Err(ModemError::StoreFull)
        );
        assert_eq!(m.counters().store_full, 1);
        assert!(!m.has_pending_indication());
    }

    #[test]
    fn indication_can_be_disabled() {
        let mut m = Modem::default();
        run(&mut m, AtCommand::ConfigIndication(0));
        let (_, ind) = m
            .deliver_inbound(num("+601"), body("A"), SimTime::ZERO, None)
            .unwrap();
        assert_eq!(ind, None);
    }

    #[test]
    fn modem_lines_from_bytes() {
        let mut m = Modem::default();
        let mut out = None;
        for &b in b"\nAT+CMGF=1\r" {
            if let Some(e) = m.receive(b) {
                out = Some(e);
            }
        }
        assert_eq!(out.unwrap().responses, vec![AtResponse::Ok]);
        assert!(m.state.text_mode);

        // malformed line answers ERROR
        let mut out = None;
        for &b in b"AT+XYZ=9\r" {
            out = out.or(m.receive(b));
        }
        assert_eq!(out.unwrap().responses, vec![AtResponse::Error]);

        // damaged line answers ERROR once its terminator arrives
        m.receive(b'A');
        m.receive_framing_error();
        assert!(m.mid_command());
        assert_eq!(m.receive(b'\r').unwrap().responses, vec![AtResponse::Error]);
        assert!(!m.mid_command());
    }

    #[test]
    fn latency_bound_enforced() {
        assert!(ModemState::new(SimDuration::from_micros(500)).is_ok());
        assert!(ModemState::new(SimDuration::from_micros(501)).is_err());
    }

    #[test]
    fn delays_stay_in_bounds() {
        let mut net = CellularNetwork::new(NetworkConfig {
            delay_min: SimDuration::from_millis(1000),
            delay_max: SimDuration::from_millis(2500),
            loss_rate: 0.0,
            seed: 7,
        })
        .unwrap();
        let now = SimTime::from_micros(10);
        for _ in 0..500 {
            let t = net.submit_outbound(num("+1"), num("+601"), body("x"), now, None);
            let d = t.due - now;
            assert!(d >= SimDuration::from_millis(1000) && d <= SimDuration::from_millis(2500));
            assert!(!t.dropped);
        }
    }

    #[test]
    fn zero_delay_is_immediate() {
        let mut net = CellularNetwork::new(NetworkConfig {
            delay_min: SimDuration::ZERO,
            delay_max: SimDuration::ZERO,
            loss_rate: 0.0,
            seed: 1,
        })
        .unwrap();
        let now = SimTime::from_micros(42);
        assert_eq!(
            net.submit_outbound(num("+1"), num("+2"), body("x"), now, None)
                .due,
            now
        );
        assert_eq!(net.take_due(now).len(), 1);
    }

    #[test]
    fn certain_loss_drops() {
        let mut net = CellularNetwork::new(NetworkConfig {
            loss_rate: 1.0,
            ..NetworkConfig::default()
        })
        .unwrap();
        let t = net.submit_outbound(num("+1"), num("+2"), body("x"), SimTime::ZERO, None);
        assert!(t.dropped);
        assert_eq!(net.drops(), 1);
        assert_eq!(net.in_flight(), 0);
        assert!(net.take_due(SimTime::from_micros(u64::MAX - 1)).is_empty());
    }

    #[test]
    fn bad_network_config_rejected() {
        let too_slow = NetworkConfig {
            delay_max: SimDuration::from_millis(3001),
            ..NetworkConfig::default()
        };
        assert!(CellularNetwork::new(too_slow).is_err());
        let inverted = NetworkConfig {
            delay_min: SimDuration::from_millis(2000),
            delay_max: SimDuration::from_millis(1000),
            ..NetworkConfig::default()
        };
        assert!(CellularNetwork::new(inverted).is_err());
        let lossy = NetworkConfig {
            loss_rate: 1.5,
            ..NetworkConfig::default()
        };
        assert!(CellularNetwork::new(lossy).is_err());
    }

    #[test]
    fn take_due_respects_order_and_time() {
        let mut net = CellularNetwork::new(NetworkConfig {
            delay_min: SimDuration::ZERO,
            delay_max: SimDuration::ZERO,
            ..NetworkConfig::default()
        })
        .unwrap();
        net.submit_inbound(num("+1"), body("b"), SimTime::from_micros(20), None);
        net.submit_inbound(num("+1"), body("a"), SimTime::from_micros(10), None);
        net.submit_inbound(num("+1"), body("c"), SimTime::from_micros(20), None);
        assert_eq!(net.next_due(), Some(SimTime::from_micros(10)));
        let got: Vec<_> = net
            .take_due(SimTime::from_micros(20))
            .into_iter()
            .map(|(_, m)| m.body.as_str().to_owned())
            .collect();
        assert_eq!(got, ["a", "b", "c"]);
    }
}
