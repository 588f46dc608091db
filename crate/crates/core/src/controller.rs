//! The relay controller firmware: a pure state machine that configures the
//! modem, sleeps until a new-message indication, reads and matches the text,
//! drives the relays, answers with a status SMS and deletes the message.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::at_codec::{AtCommand, AtResponse, PhoneNumber, SlotIndex, SmsBody};
use crate::time::{SimDuration, SimTime};

pub const LOAD_COUNT: usize = 4;

pub const DEFAULT_WATCHDOG: SimDuration = SimDuration::from_secs(5);
pub const DEFAULT_HANDSHAKE_RETRIES: u32 = 3;
const RESUME_DELAY: SimDuration = SimDuration::from_millis(1);

const MIN_KEY_LEN: usize = 4;
const MAX_KEY_LEN: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("load id {0} out of range 1..=4")]
    BadLoadId(u32),
    #[error("command {0:?} must be 4 to 6 characters after trimming")]
    BadKeyLength(String),
    #[error("unknown action {0:?}")]
    BadAction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct LoadId(u8);

impl LoadId {
    pub fn new(id: u32) -> Result<Self, ControllerError> {
        if (1..=LOAD_COUNT as u32).contains(&id) {
            Ok(LoadId(id as u8))
        } else {
            Err(ControllerError::BadLoadId(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = LoadId> {
        (1..=LOAD_COUNT as u8).map(LoadId)
    }

    fn slot(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl fmt::Display for LoadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Action {
    SetLoad(LoadId, bool),
    AllOn,
    AllOff,
    Status,
}

impl Action {
    /// The state `id` must be in once this action has run, if the action
    /// touches it at all.
    pub fn intended(&self, id: LoadId) -> Option<bool> {
        match *self {
            Action::SetLoad(target, on) if target == id => Some(on),
            Action::SetLoad(..) | Action::Status => None,
            Action::AllOn => Some(true),
            Action::AllOff => Some(false),
        }
    }

    /// Parse `load <id> on|off`, `all on`, `all off` or `status`.
    pub fn parse(text: &str) -> Result<Self, ControllerError> {
        let words: Vec<String> = text
            .split_whitespace()
            .map(str::to_ascii_lowercase)
            .collect();
        let words: Vec<&str> = words.iter().map(String::as_str).collect();
        let bad = || ControllerError::BadAction(text.to_owned());
        match words[..] {
            ["status"] => Ok(Action::Status),
            ["all", "on"] => Ok(Action::AllOn),
            ["all", "off"] => Ok(Action::AllOff),
            ["load", id, state] => {
                let id = id.parse::<u32>().map_err(|_| bad())?;
                let on = match state {
                    "on" => true,
                    "off" => false,
                    _ => return Err(bad()),
                };
                Ok(Action::SetLoad(LoadId::new(id)?, on))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Load {
    pub id: LoadId,
    pub label: String,
    pub energized: bool,
}

/// Which stored message caused a relay change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub slot: SlotIndex,
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadChange {
    pub time: SimTime,
    pub id: LoadId,
    pub energized: bool,
    pub provenance: Provenance,
}

/// Four normally-open relays. Energized means the contacts are closed and
/// the load is powered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadBank {
    loads: [Load; LOAD_COUNT],
    change_log: Vec<LoadChange>,
}

pub const DEFAULT_LABELS: [&str; LOAD_COUNT] =
    ["Lamp 1", "Lamp 2", "Air conditioner", "Security system"];

impl Default for LoadBank {
    fn default() -> Self {
        LoadBank::with_labels(DEFAULT_LABELS)
    }
}

impl LoadBank {
    pub fn with_labels(labels: [&str; LOAD_COUNT]) -> Self {
        let mut i = 0u8;
        let loads = labels.map(|label| {
            i += 1;
            Load {
                id: LoadId(i),
                label: label.to_owned(),
                energized: false,
            }
        });
        LoadBank {
            loads,
            change_log: Vec::new(),
        }
    }

    pub fn get(&self, id: LoadId) -> &Load {
        &self.loads[id.slot()]
    }

    pub fn is_on(&self, id: LoadId) -> bool {
        self.get(id).energized
    }

    pub fn loads(&self) -> &[Load; LOAD_COUNT] {
        &self.loads
    }

    pub fn states(&self) -> [bool; LOAD_COUNT] {
        self.loads.clone().map(|l| l.energized)
    }

    pub fn change_log(&self) -> &[LoadChange] {
        &self.change_log
    }

    /// Run `action`, logging one entry per relay it drives. Returns the new
    /// log entries. Setting a relay to the state it already has still logs.
    pub fn apply(
        &mut self,
        action: Action,
        now: SimTime,
        provenance: Provenance,
    ) -> Vec<LoadChange> {
        if let Some(last) = self.change_log.last() {
            assert!(now >= last.time, "change log must stay time-ordered");
        }
        let start = self.change_log.len();
        for id in LoadId::all() {
            if let Some(on) = action.intended(id) {
                self.loads[id.slot()].energized = on;
                self.change_log.push(LoadChange {
                    time: now,
                    id,
                    energized: on,
                    provenance: provenance.clone(),
                });
            }
        }
        self.change_log[start..].to_vec()
    }
}

/// `L1:ON L2:OFF L3:OFF L4:OFF`
pub fn feedback_body(loads: &LoadBank) -> SmsBody {
    let text = loads
        .loads()
        .iter()
        .map(|l| format!("L{}:{}", l.id, if l.energized { "ON" } else { "OFF" }))
        .collect::<Vec<_>>()
        .join(" ");
    SmsBody::new(&text).expect("status text is short printable ASCII")
}

pub fn normalize(text: &str) -> String {
    text.trim().to_ascii_uppercase()
}

/// Recognised message texts and what they do.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandTable {
    entries: BTreeMap<String, Action>,
}

impl CommandTable {
    pub fn empty() -> Self {
        CommandTable {
            entries: BTreeMap::new(),
        }
    }

    /// Add or replace an entry. Returns the action previously bound to the key.
    pub fn insert(&mut self, key: &str, action: Action) -> Result<Option<Action>, ControllerError> {
        let key = normalize(key);
        if !(MIN_KEY_LEN..=MAX_KEY_LEN).contains(&key.len()) || key.contains(char::is_whitespace) {
            return Err(ControllerError::BadKeyLength(key));
        }
        Ok(self.entries.insert(key, action))
    }

    pub fn lookup(&self, text: &str) -> Option<Action> {
        self.entries.get(&normalize(text)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Action)> {
        self.entries.iter().map(|(k, &a)| (k.as_str(), a))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for CommandTable {
    /// `L1ON`/`L1OFF` through `L4ON`/`L4OFF`, plus `ALLON`, `ALLOFF` and `STATUS`.
    fn default() -> Self {
        let mut table = CommandTable::empty();
        for id in LoadId::all() {
            table
                .insert(&format!("L{id}ON"), Action::SetLoad(id, true))
                .expect("valid key");
            table
                .insert(&format!("L{id}OFF"), Action::SetLoad(id, false))
                .expect("valid key");
        }
        table.insert("ALLON", Action::AllOn).expect("valid key");
        table.insert("ALLOFF", Action::AllOff).expect("valid key");
        table.insert("STATUS", Action::Status).expect("valid key");
        table
    }
}

pub fn match_command(body: &str, table: &CommandTable) -> Option<Action> {
    table.lookup(body)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeedbackStage {
    AwaitPrompt,
    AwaitAck,
    AwaitOk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ControllerState {
    PowerOn,
    Handshake,
    SetMode,
    Idle,
    Reading(SlotIndex),
    /// Message handled; waiting for the read command to finish.
    Executing {
        slot: SlotIndex,
        reply_to: Option<PhoneNumber>,
    },
    Feedback {
        slot: SlotIndex,
        recipient: PhoneNumber,
        stage: FeedbackStage,
    },
    Deleting(SlotIndex),
}

/// Generation number identifying one armed timer. Stale tokens are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TimerToken(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerEvent {
    Response(AtResponse),
    MalformedResponse(String),
    TimerExpired(TimerToken),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Executed {
    pub slot: SlotIndex,
    pub sender: PhoneNumber,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutput {
    pub commands: Vec<AtCommand>,
    pub changes: Vec<LoadChange>,
    pub timer: Option<(TimerToken, SimDuration)>,
    pub executed: Option<Executed>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub table: CommandTable,
    pub whitelist: Option<BTreeSet<PhoneNumber>>,
    pub watchdog: SimDuration,
    pub handshake_retries: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            table: CommandTable::default(),
            whitelist: None,
            watchdog: DEFAULT_WATCHDOG,
            handshake_retries: DEFAULT_HANDSHAKE_RETRIES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerFsm {
    pub state: ControllerState,
    pub last_sender: Option<PhoneNumber>,
    pending: VecDeque<SlotIndex>,
    retries: u32,
    timer_gen: u64,
}

impl Default for ControllerFsm {
    fn default() -> Self {
        ControllerFsm {
            state: ControllerState::PowerOn,
            last_sender: None,
            pending: VecDeque::new(),
            retries: 0,
            timer_gen: 0,
        }
    }
}

impl ControllerFsm {
    /// Indications received while busy, oldest first.
    pub fn pending(&self) -> impl Iterator<Item = SlotIndex> + '_ {
        self.pending.iter().copied()
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub fsm: ControllerFsm,
    pub loads: LoadBank,
    pub config: ControllerConfig,
}

impl Controller {
    pub fn new(config: ControllerConfig, loads: LoadBank) -> Self {
        Controller {
            fsm: ControllerFsm::default(),
            loads,
            config,
        }
    }

    pub fn state(&self) -> &ControllerState {
        &self.fsm.state
    }

    /// The timer that starts the firmware. Fire it to leave `PowerOn`.
    pub fn boot_timer(&self) -> TimerToken {
        TimerToken(self.fsm.timer_gen)
    }

    fn authorized(&self, sender: &PhoneNumber) -> bool {
        self.config
            .whitelist
            .as_ref()
            .is_none_or(|w| w.contains(sender))
    }

    fn cancel_timer(&mut self) {
        self.fsm.timer_gen += 1;
    }

    fn send(&mut self, out: &mut StepOutput, cmd: AtCommand) {
        self.fsm.timer_gen += 1;
        out.commands.push(cmd);
        out.timer = Some((TimerToken(self.fsm.timer_gen), self.config.watchdog));
    }

    fn remember(&mut self, slot: SlotIndex) {
        let current = match &self.fsm.state {
            ControllerState::Reading(s) | ControllerState::Deleting(s) => Some(*s),
            ControllerState::Executing { slot, .. } | ControllerState::Feedback { slot, .. } => {
                Some(*slot)
            }
            _ => None,
        };
        if current != Some(slot) && !self.fsm.pending.contains(&slot) {
            self.fsm.pending.push_back(slot);
        }
    }

    /// Enter Idle, or go straight on to the next queued indication.
    fn settle(&mut self, out: &mut StepOutput) {
        self.fsm.state = ControllerState::Idle;
        match self.fsm.pending.pop_front() {
            Some(next) => {
                self.fsm.state = ControllerState::Reading(next);
                self.send(out, AtCommand::ReadMessage(next));
            }
            None => self.cancel_timer(),
        }
    }

    /// Fail-safe: back to Idle, relays untouched, nothing sent. Queued
    /// indications are picked up by a short resume timer.
    fn fail(&mut self, out: &mut StepOutput, why: String) {
        out.notes.push(why);
        self.fsm.state = ControllerState::Idle;
        self.cancel_timer();
        if !self.fsm.pending.is_empty() {
            out.timer = Some((TimerToken(self.fsm.timer_gen), RESUME_DELAY));
        }
    }

    pub fn step(&mut self, event: ControllerEvent, now: SimTime) -> StepOutput {
        let mut out = StepOutput::default();
        match event {
            ControllerEvent::TimerExpired(token) => self.on_timer(token, &mut out),
            ControllerEvent::MalformedResponse(why) => {
                if self.fsm.state == ControllerState::Idle {
                    out.notes
                        .push(format!("ignored malformed response in Idle: {why}"));
                } else {
                    self.fail(&mut out, format!("malformed response: {why}"));
                }
            }
            ControllerEvent::Response(resp) => self.on_response(resp, now, &mut out),
        }
        out
    }

    fn on_timer(&mut self, token: TimerToken, out: &mut StepOutput) {
        if token.0 != self.fsm.timer_gen {
            return;
        }
        match self.fsm.state.clone() {
            ControllerState::PowerOn => {
                self.fsm.state = ControllerState::Handshake;
                self.fsm.retries = 0;
                self.send(out, AtCommand::Attention);
            }
            ControllerState::Handshake | ControllerState::SetMode
                if self.fsm.retries < self.config.handshake_retries =>
            {
                self.fsm.retries += 1;
                out.notes
                    .push(format!("no answer, retry {}", self.fsm.retries));
                let cmd = if self.fsm.state == ControllerState::Handshake {
                    AtCommand::Attention
                } else {
                    AtCommand::SetTextMode(true)
                };
                self.send(out, cmd);
            }
            ControllerState::Idle => self.settle(out),
            other => self.fail(out, format!("timeout in {other:?}")),
        }
    }

    fn on_response(&mut self, resp: AtResponse, now: SimTime, out: &mut StepOutput) {
        use ControllerState as S;

        if let AtResponse::NewMessageIndication { index, .. } = resp {
            if self.fsm.state == S::Idle {
                self.fsm.state = S::Reading(index);
                self.send(out, AtCommand::ReadMessage(index));
            } else {
                self.remember(index);
            }
            return;
        }
        if matches!(resp, AtResponse::Error | AtResponse::CmsError(_)) {
            if self.fsm.state == S::Idle {
                out.notes.push(format!("ignored {resp:?} in Idle"));
            } else {
                self.fail(out, format!("{resp:?} in {:?}", self.fsm.state));
            }
            return;
        }

        match (self.fsm.state.clone(), resp) {
            (S::Handshake, AtResponse::Ok) => {
                self.fsm.state = S::SetMode;
                self.fsm.retries = 0;
                self.send(out, AtCommand::SetTextMode(true));
            }
            (S::SetMode, AtResponse::Ok) => self.settle(out),
            (S::Reading(slot), AtResponse::MessageContent { sender, body, .. }) => {
                self.fsm.last_sender = Some(sender.clone());
                let action = match_command(body.as_str(), &self.config.table);
                let reply_to = match action {
                    _ if !self.authorized(&sender) => {
                        out.notes.push(format!("sender {sender} not authorised"));
                        None
                    }
                    None => {
                        out.notes
                            .push(format!("no command matches {:?}", body.as_str()));
                        None
                    }
                    Some(action) => {
                        let provenance = Provenance {
                            slot,
                            command: normalize(body.as_str()),
                        };
                        out.changes = self.loads.apply(action, now, provenance);
                        out.executed = Some(Executed {
                            slot,
                            sender: sender.clone(),
                            action,
                        });
                        Some(sender)
                    }
                };
                self.fsm.state = S::Executing { slot, reply_to };
            }
            (S::Reading(_), AtResponse::Ok) => {
                self.fail(out, "read finished without message content".into());
            }
            (S::Executing { slot, reply_to }, AtResponse::Ok) => match reply_to {
                Some(recipient) => {
                    self.fsm.state = S::Feedback {
                        slot,
                        recipient: recipient.clone(),
                        stage: FeedbackStage::AwaitPrompt,
                    };
                    self.send(out, AtCommand::SendMessage(recipient));
                }
                None => {
                    self.fsm.state = S::Deleting(slot);
                    self.send(out, AtCommand::DeleteMessage(slot));
                }
            },
            (
                S::Feedback {
                    slot,
                    recipient,
                    stage,
                },
                resp,
            ) => {
                let next = match (stage, &resp) {
                    (FeedbackStage::AwaitPrompt, AtResponse::SendPrompt) => {
                        let body = feedback_body(&self.loads);
                        self.send(out, AtCommand::SendBody(body));
                        Some(FeedbackStage::AwaitAck)
                    }
                    (FeedbackStage::AwaitAck, AtResponse::SentAck(_)) => {
                        Some(FeedbackStage::AwaitOk)
                    }
                    (FeedbackStage::AwaitOk, AtResponse::Ok) => {
                        self.fsm.state = S::Deleting(slot);
                        self.send(out, AtCommand::DeleteMessage(slot));
                        return;
                    }
                    _ => None,
                };
                match next {
                    Some(stage) => {
                        self.fsm.state = S::Feedback {
                            slot,
                            recipient,
                            stage,
                        }
                    }
                    None => out
                        .notes
                        .push(format!("unexpected {resp:?} while sending feedback")),
                }
            }
            (S::Deleting(_), AtResponse::Ok) => self.settle(out),
            (state, resp) => {
                out.notes.push(format!("ignored {resp:?} in {state:?}"));
            }
        }
    }
}

impl Default for Controller {
    fn default() -> Self {
        Controller::new(ControllerConfig::default(), LoadBank::default())
    }
}
