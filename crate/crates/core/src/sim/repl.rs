//! Interactive session where the user plays the phone.

use std::io::{self, BufRead, Write};

use super::engine::{SimConfig, SimError, Simulation};
use crate::at_codec::{PhoneNumber, SmsBody};

pub const DEFAULT_PHONE: &str = "+60123456789";

pub const HELP: &str = "\
commands:
  sms <body>       send a text from the phone and run until the system settles
  phone [number]   show or change the sending phone
  loads            show the relay bank
  inbox            show texts received by the phone
  trace            dump the serial log
  time             show the simulated clock
  help             show this text
  quit             leave
";

pub struct Repl {
    sim: Simulation,
    phone: PhoneNumber,
}

impl Repl {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        let mut sim = Simulation::new(config)?;
        sim.run_until_idle();
        Ok(Repl {
            sim,
            phone: PhoneNumber::new(DEFAULT_PHONE).expect("valid"),
        })
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    /// Handle one input line. Returns `None` on `quit`.
    pub fn handle(&mut self, line: &str) -> Option<String> {
        let line = line.trim();
        let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let out = match cmd {
            "" => String::new(),
            "quit" | "exit" => return None,
            "help" => HELP.to_owned(),
            "sms" => match SmsBody::new(rest) {
                Ok(body) => {
                    let now = self.sim.now();
                    self.sim.schedule_sms(now, self.phone.clone(), body);
                    self.sim.run_until_idle();
                    format!("sent; clock now {}\n", self.sim.now())
                }
                Err(e) => format!("error: {e}\n"),
            },
            "phone" if rest.is_empty() => format!("{}\n", self.phone),
            "phone" => match PhoneNumber::new(rest) {
                Ok(p) => {
                    self.phone = p;
                    format!("phone is now {}\n", self.phone)
                }
                Err(e) => format!("error: {e}\n"),
            },
            "loads" => self
                .sim
                .loads()
                .loads()
                .iter()
                .map(|l| {
                    format!(
                        "L{} {:<16} {}\n",
                        l.id,
                        l.label,
                        if l.energized { "ON" } else { "OFF" }
                    )
                })
                .collect(),
            "inbox" => {
                let inbox = self.sim.inbox(&self.phone);
                if inbox.is_empty() {
                    "(empty)\n".to_owned()
                } else {
                    inbox
                        .iter()
                        .map(|m| format!("[{}] {}: {}\n", m.at, m.from, m.body))
                        .collect()
                }
            }
            "trace" => self
                .sim
                .trace()
                .iter()
                .map(|t| {
                    let arrow = match t.dir {
                        super::report::Direction::ToModem => "->",
                        super::report::Direction::ToController => "<-",
                    };
                    format!("{:>12}us {arrow} {:?}\n", t.start_us.as_micros(), t.data)
                })
                .collect(),
            "time" => format!("{}\n", self.sim.now()),
            _ => format!("unknown command: {cmd}\n{HELP}"),
        };
        Some(out)
    }

    /// Read commands until `quit` or end of input.
    pub fn run(&mut self, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
        write!(output, "> ")?;
        output.flush()?;
        for line in input.lines() {
            match self.handle(&line?) {
                Some(text) => write!(output, "{text}> ")?,
                None => break,
            }
            output.flush()?;
        }
        writeln!(output)
    }
}
