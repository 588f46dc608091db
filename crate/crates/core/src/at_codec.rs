//! Text-mode AT command and response framing.
//!
//! Commands travel from controller to modem as ASCII terminated by a single
//! CR. The body that follows a `> ` prompt is terminated by Ctrl-Z instead.
//! Responses are fenced by CRLF on both sides, except the send prompt which
//! is CRLF followed by `> `. Echo is assumed off.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration as ChronoDuration, NaiveDate};
use serde::Serialize;
use thiserror::Error;

use crate::time::SimTime;

pub const CR: u8 = 0x0D;
pub const LF: u8 = 0x0A;
pub const CTRL_Z: u8 = 0x1A;
pub const CRLF: &[u8] = b"\r\n";
pub const PROMPT: &[u8] = b"\r\n> ";

/// Longest single-part text message.
pub const MAX_BODY_LEN: usize = 160;

const MAX_NUMBER_DIGITS: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed command: {0}")]
    MalformedCommand(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid phone number {0:?}")]
    InvalidPhoneNumber(String),
    #[error("invalid message body: {0}")]
    InvalidBody(String),
    #[error("invalid timestamp {0:?}")]
    InvalidTimestamp(String),
    #[error("slot index must be at least 1")]
    InvalidSlot,
}

fn is_printable(b: u8) -> bool {
    (0x20..=0x7E).contains(&b)
}

/// An E.164-shaped number: optional `+` then 1 to 15 digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PhoneNumber(String);

impl PhoneNumber {
    pub fn new(text: &str) -> Result<Self, CodecError> {
        let digits = text.strip_prefix('+').unwrap_or(text);
        if digits.is_empty()
            || digits.len() > MAX_NUMBER_DIGITS
            || !digits.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(CodecError::InvalidPhoneNumber(text.to_owned()));
        }
        Ok(PhoneNumber(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for PhoneNumber {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhoneNumber::new(s)
    }
}

impl fmt::Display for PhoneNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Text of one single-part SMS: at most 160 printable 7-bit characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SmsBody(String);

impl SmsBody {
    pub fn new(text: &str) -> Result<Self, CodecError> {
        if text.len() > MAX_BODY_LEN {
            return Err(CodecError::InvalidBody(format!(
                "{} characters exceeds {MAX_BODY_LEN}",
                text.len()
            )));
        }
        if let Some(bad) = text.bytes().find(|&b| !is_printable(b)) {
            return Err(CodecError::InvalidBody(format!(
                "byte 0x{bad:02X} is not printable 7-bit text"
            )));
        }
        Ok(SmsBody(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for SmsBody {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SmsBody::new(s)
    }
}

impl fmt::Display for SmsBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Service-centre timestamp in `yy/MM/dd,hh:mm:ss±zz` form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SmsTimestamp(String);

impl SmsTimestamp {
    pub fn new(text: &str) -> Result<Self, CodecError> {
        const SHAPE: &[u8] = b"dd/dd/dd,dd:dd:dd+dd";
        let bytes = text.as_bytes();
        let ok = bytes.len() == SHAPE.len()
            && bytes.iter().zip(SHAPE).all(|(&b, &s)| match s {
                b'd' => b.is_ascii_digit(),
                b'+' => b == b'+' || b == b'-',
                _ => b == s,
            });
        if ok {
            Ok(SmsTimestamp(text.to_owned()))
        } else {
            Err(CodecError::InvalidTimestamp(text.to_owned()))
        }
    }

    /// Wall-clock rendering of a simulated instant; power-on is
    /// 2014-01-01 00:00:00 UTC.
    pub fn from_sim_time(t: SimTime) -> Self {
        let epoch = NaiveDate::from_ymd_opt(2014, 1, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .expect("valid epoch");
        let secs = i64::try_from(t.as_micros() / 1_000_000).unwrap_or(i64::MAX);
        let at = epoch + ChronoDuration::seconds(secs);
        SmsTimestamp(at.format("%y/%m/%d,%H:%M:%S+00").to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SmsTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// SIM slot number, counted from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SlotIndex(u32);

impl SlotIndex {
    pub fn new(n: u32) -> Result<Self, CodecError> {
        if n == 0 {
            Err(CodecError::InvalidSlot)
        } else {
            Ok(SlotIndex(n))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for SlotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One message held in the SIM store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmsMessage {
    pub index: SlotIndex,
    pub sender: PhoneNumber,
    pub timestamp: SimTime,
    pub body: SmsBody,
    pub read: bool,
}

/// Only `SM` (SIM) storage exists in this modem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MessageStorage {
    #[serde(rename = "SM")]
    Sim,
}

impl MessageStorage {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageStorage::Sim => "SM",
        }
    }
}

/// `+CNMI` modes run 0 through 3.
pub const MAX_INDICATION_MODE: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum AtCommand {
    /// `AT`
    Attention,
    /// `AT+CMGF=<0|1>`
    SetTextMode(bool),
    /// `AT+CMGR=<n>`
    ReadMessage(SlotIndex),
    /// `AT+CMGS="<number>"`
    SendMessage(PhoneNumber),
    /// Message text after the prompt, terminated by Ctrl-Z.
    SendBody(SmsBody),
    /// `AT+CMGD=<n>`
    DeleteMessage(SlotIndex),
    /// `AT+CNMI=<mode>`
    ConfigIndication(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum AtResponse {
    Ok,
    Error,
    CmsError(u32),
    SendPrompt,
    MessageContent {
        read: bool,
        sender: PhoneNumber,
        timestamp: SmsTimestamp,
        body: SmsBody,
    },
    SentAck(u8),
    NewMessageIndication {
        store: MessageStorage,
        index: SlotIndex,
    },
}

impl AtResponse {
    /// True for responses that finish a command exchange.
    pub fn is_final(&self) -> bool {
        matches!(
            self,
            AtResponse::Ok | AtResponse::Error | AtResponse::CmsError(_) | AtResponse::SendPrompt
        )
    }
}

fn malformed_cmd(msg: impl Into<String>) -> CodecError {
    CodecError::MalformedCommand(msg.into())
}

fn malformed_resp(msg: impl Into<String>) -> CodecError {
    CodecError::MalformedResponse(msg.into())
}

fn parse_decimal(text: &str) -> Option<u32> {
    if text.is_empty() || text.len() > 10 || !text.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

fn parse_slot(param: Option<&str>) -> Result<SlotIndex, CodecError> {
    let n = param
        .and_then(parse_decimal)
        .ok_or_else(|| malformed_cmd("expected a decimal slot index"))?;
    SlotIndex::new(n).map_err(|_| malformed_cmd("slot index must be at least 1"))
}

/// Parse one command line including its terminator.
pub fn parse_command(line: &[u8]) -> Result<AtCommand, CodecError> {
    let (&terminator, content) = line
        .split_last()
        .ok_or_else(|| malformed_cmd("empty input"))?;
    if let Some(bad) = content.iter().find(|&&b| !is_printable(b)) {
        return Err(malformed_cmd(format!("unexpected byte 0x{bad:02X}")));
    }
    // all bytes printable ASCII from here on
    let text = std::str::from_utf8(content).map_err(|_| malformed_cmd("not ASCII"))?;

    match terminator {
        CTRL_Z => {
            return SmsBody::new(text)
                .map(AtCommand::SendBody)
                .map_err(|e| malformed_cmd(e.to_string()));
        }
        CR => {}
        _ => return Err(malformed_cmd("missing CR terminator")),
    }

    if text.len() < 2 || !text[..2].eq_ignore_ascii_case("AT") {
        return Err(malformed_cmd("missing AT prefix"));
    }
    let rest = &text[2..];
    if rest.is_empty() {
        return Ok(AtCommand::Attention);
    }
    let (name, param) = match rest.split_once('=') {
        Some((name, param)) => (name, Some(param)),
        None => (rest, None),
    };

    match name.to_ascii_uppercase().as_str() {
        "+CMGF" => match param {
            Some("0") => Ok(AtCommand::SetTextMode(false)),
            Some("1") => Ok(AtCommand::SetTextMode(true)),
            _ => Err(malformed_cmd("+CMGF takes 0 or 1")),
        },
        "+CMGR" => parse_slot(param).map(AtCommand::ReadMessage),
        "+CMGD" => parse_slot(param).map(AtCommand::DeleteMessage),
        "+CMGS" => {
            let quoted = param.ok_or_else(|| malformed_cmd("+CMGS needs a recipient"))?;
            let number = quoted
                .strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .ok_or_else(|| malformed_cmd("recipient must be quoted"))?;
            PhoneNumber::new(number)
                .map(AtCommand::SendMessage)
                .map_err(|e| malformed_cmd(e.to_string()))
        }
        "+CNMI" => param
            .and_then(parse_decimal)
            .filter(|&m| m <= u32::from(MAX_INDICATION_MODE))
            .map(|m| AtCommand::ConfigIndication(m as u8))
            .ok_or_else(|| malformed_cmd("+CNMI takes a mode from 0 to 3")),
        other => Err(malformed_cmd(format!("unknown command AT{other}"))),
    }
}

/// Canonical upper-case rendering.
pub fn render_command(cmd: &AtCommand) -> Vec<u8> {
    let mut out = match cmd {
        AtCommand::Attention => "AT".to_owned(),
        AtCommand::SetTextMode(on) => format!("AT+CMGF={}", u8::from(*on)),
        AtCommand::ReadMessage(n) => format!("AT+CMGR={n}"),
        AtCommand::SendMessage(to) => format!("AT+CMGS=\"{to}\""),
        AtCommand::DeleteMessage(n) => format!("AT+CMGD={n}"),
        AtCommand::ConfigIndication(mode) => format!("AT+CNMI={mode}"),
        AtCommand::SendBody(body) => {
            let mut out = body.as_str().as_bytes().to_vec();
            out.push(CTRL_Z);
            return out;
        }
    }
    .into_bytes();
    out.push(CR);
    out
}

fn parse_quoted_fields(text: &str) -> Option<Vec<&str>> {
    let mut fields = Vec::new();
    let mut rest = text;
    loop {
        let inner = rest.strip_prefix('"')?;
        let close = inner.find('"')?;
        fields.push(&inner[..close]);
        rest = &inner[close + 1..];
        if rest.is_empty() {
            return Some(fields);
        }
        rest = rest.strip_prefix(',')?;
    }
}

fn parse_line(line: &str) -> Result<AtResponse, CodecError> {
    if line == "OK" {
        return Ok(AtResponse::Ok);
    }
    if line == "ERROR" {
        return Ok(AtResponse::Error);
    }
    if let Some(code) = line.strip_prefix("+CMS ERROR: ") {
        return parse_decimal(code)
            .map(AtResponse::CmsError)
            .ok_or_else(|| malformed_resp("bad +CMS ERROR code"));
    }
    if let Some(mr) = line.strip_prefix("+CMGS: ") {
        return parse_decimal(mr)
            .and_then(|n| u8::try_from(n).ok())
            .map(AtResponse::SentAck)
            .ok_or_else(|| malformed_resp("bad +CMGS reference"));
    }
    if let Some(args) = line.strip_prefix("+CMTI: ") {
        let (store, index) = args
            .split_once(',')
            .ok_or_else(|| malformed_resp("+CMTI needs store and index"))?;
        if store != "\"SM\"" {
            return Err(malformed_resp(format!("unsupported storage {store}")));
        }
        let index = parse_decimal(index)
            .and_then(|n| SlotIndex::new(n).ok())
            .ok_or_else(|| malformed_resp("bad +CMTI index"))?;
        return Ok(AtResponse::NewMessageIndication {
            store: MessageStorage::Sim,
            index,
        });
    }
    Err(malformed_resp(format!(
        "unrecognised response line {line:?}"
    )))
}

fn parse_message_content(header: &str, body: &str) -> Result<AtResponse, CodecError> {
    let args = header
        .strip_prefix("+CMGR: ")
        .ok_or_else(|| malformed_resp("expected +CMGR header"))?;
    let fields = parse_quoted_fields(args).ok_or_else(|| malformed_resp("bad +CMGR fields"))?;
    let [status, sender, timestamp] = fields[..] else {
        return Err(malformed_resp("+CMGR needs status, sender and timestamp"));
    };
    let read = match status {
        "REC READ" => true,
        "REC UNREAD" => false,
        other => return Err(malformed_resp(format!("unknown status {other:?}"))),
    };
    let wrap = |e: CodecError| malformed_resp(e.to_string());
    Ok(AtResponse::MessageContent {
        read,
        sender: PhoneNumber::new(sender).map_err(wrap)?,
        timestamp: SmsTimestamp::new(timestamp).map_err(wrap)?,
        body: SmsBody::new(body).map_err(wrap)?,
    })
}

/// Parse one complete response block, framing included.
pub fn parse_response(block: &[u8]) -> Result<AtResponse, CodecError> {
    let rest = block
        .strip_prefix(CRLF)
        .ok_or_else(|| malformed_resp("missing leading CRLF"))?;
    if rest == b"> " {
        return Ok(AtResponse::SendPrompt);
    }
    let payload = rest
        .strip_suffix(CRLF)
        .ok_or_else(|| malformed_resp("missing trailing CRLF"))?;

    let mut lines = Vec::with_capacity(2);
    let mut remaining = payload;
    loop {
        match remaining.windows(2).position(|w| w == CRLF) {
            Some(at) => {
                lines.push(&remaining[..at]);
                remaining = &remaining[at + 2..];
            }
            None => {
                lines.push(remaining);
                break;
            }
        }
    }
    for line in &lines {
        if let Some(bad) = line.iter().find(|&&b| !is_printable(b)) {
            return Err(malformed_resp(format!("unexpected byte 0x{bad:02X}")));
        }
    }
    let text: Vec<&str> = lines
        .iter()
        .map(|l| std::str::from_utf8(l).map_err(|_| malformed_resp("not ASCII")))
        .collect::<Result<_, _>>()?;

    match text[..] {
        [line] => parse_line(line),
        [header, body] => parse_message_content(header, body),
        _ => Err(malformed_resp("too many lines in one block")),
    }
}

/// Canonical CRLF-fenced rendering.
pub fn render_response(resp: &AtResponse) -> Vec<u8> {
    let payload = match resp {
        AtResponse::SendPrompt => return PROMPT.to_vec(),
        AtResponse::Ok => "OK".to_owned(),
        AtResponse::Error => "ERROR".to_owned(),
        AtResponse::CmsError(code) => format!("+CMS ERROR: {code}"),
        AtResponse::SentAck(mr) => format!("+CMGS: {mr}"),
        AtResponse::NewMessageIndication { store, index } => {
            format!("+CMTI: \"{}\",{index}", store.as_str())
        }
        AtResponse::MessageContent {
            read,
            sender,
            timestamp,
            body,
        } => {
            let status = if *read { "REC READ" } else { "REC UNREAD" };
            format!("+CMGR: \"{status}\",\"{sender}\",\"{timestamp}\"\r\n{body}")
        }
    };
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(CRLF);
    out.extend_from_slice(payload.as_bytes());
    out.extend_from_slice(CRLF);
    out
}

fn find_crlf(buf: &[u8], from: usize) -> Option<usize> {
    buf.get(from..)?
        .windows(2)
        .position(|w| w == CRLF)
        .map(|p| p + from)
}

/// Splits the modem-to-controller byte stream into response blocks.
#[derive(Debug, Default, Clone)]
pub struct ResponseFramer {
    buf: Vec<u8>,
}

impl ResponseFramer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes received but not yet part of a complete block.
    pub fn pending(&self) -> &[u8] {
        &self.buf
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Result<AtResponse, CodecError>> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        while let Some(frame) = self.next_frame() {
            out.extend(frame);
        }
        out
    }

    /// A byte arrived with a framing error: whatever was buffered is lost.
    pub fn framing_error(&mut self) -> CodecError {
        self.buf.clear();
        malformed_resp("serial framing error")
    }

    // Outer None: need more bytes. Inner None: bytes consumed, nothing to report.
    fn next_frame(&mut self) -> Option<Option<Result<AtResponse, CodecError>>> {
        if self.buf.is_empty() {
            return None;
        }
        if !self.buf.starts_with(CRLF) {
            if self.buf == [CR] {
                return None;
            }
            // discard garbage up to the next fence
            let at = find_crlf(&self.buf, 0)?;
            let junk: Vec<u8> = self.buf.drain(..at).collect();
            return Some(Some(Err(malformed_resp(format!(
                "unframed bytes {:?}",
                String::from_utf8_lossy(&junk)
            )))));
        }
        let after = &self.buf[2..];
        if after.len() < 2 && b"> ".starts_with(after) {
            return None;
        }
        if after.starts_with(b"> ") {
            self.buf.drain(..PROMPT.len());
            return Some(Some(Ok(AtResponse::SendPrompt)));
        }
        let line_end = find_crlf(&self.buf, 2)?;
        if line_end == 2 {
            // blank line between responses
            self.buf.drain(..2);
            return Some(None);
        }
        let block_end = if self.buf[2..line_end].starts_with(b"+CMGR:") {
            find_crlf(&self.buf, line_end + 2)? + 2
        } else {
            line_end + 2
        };
        let block: Vec<u8> = self.buf.drain(..block_end).collect();
        Some(Some(parse_response(&block)))
    }
}
