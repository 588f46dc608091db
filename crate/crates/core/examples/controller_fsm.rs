//! Step the firmware state machine by hand, feeding it modem responses.
//!
//! ```text
//! cargo run --example controller_fsm
//! ```

use gsm_home::at_codec::{
    AtResponse, MessageStorage, PhoneNumber, SlotIndex, SmsBody, SmsTimestamp,
};
use gsm_home::controller::{Controller, ControllerEvent};
use gsm_home::time::SimTime;

fn main() {
    let mut c = Controller::default();
    let slot = SlotIndex::new(1).unwrap();
    let events = [
        ControllerEvent::TimerExpired(c.boot_timer()),
        ControllerEvent::Response(AtResponse::Ok),
        ControllerEvent::Response(AtResponse::Ok),
        ControllerEvent::Response(AtResponse::NewMessageIndication {
            store: MessageStorage::Sim,
            index: slot,
        }),
        ControllerEvent::Response(AtResponse::MessageContent {
            read: false,
            sender: PhoneNumber::new("+60123456789").unwrap(),
            timestamp: SmsTimestamp::from_sim_time(SimTime::from_micros(2_000_000)),
            body: SmsBody::new("ALLON").unwrap(),
        }),
        ControllerEvent::Response(AtResponse::Ok),
        ControllerEvent::Response(AtResponse::SendPrompt),
        ControllerEvent::Response(AtResponse::SentAck(0)),
        ControllerEvent::Response(AtResponse::Ok),
        ControllerEvent::Response(AtResponse::Ok),
    ];
    for (i, event) in events.into_iter().enumerate() {
        let now = SimTime::from_micros(i as u64 * 10_000);
        let label = format!("{event:?}");
        let out = c.step(event, now);
        println!("{:<28} -> {:?}", truncate(&label, 28), c.state());
        for cmd in &out.commands {
            println!("{:<28}    sends {cmd:?}", "");
        }
        for change in &out.changes {
            println!("{:<28}    relay {} -> {}", "", change.id, change.energized);
        }
    }
    println!("\nbank: {:?}", c.loads.states());
}

fn truncate(s: &str, n: usize) -> &str {
    &s[..s.len().min(n)]
}
