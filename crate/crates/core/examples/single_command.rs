//! One text, end to end, with the full serial trace.
//!
//! ```text
//! cargo run --example single_command
//! ```

use gsm_home::at_codec::{PhoneNumber, SmsBody};
use gsm_home::sim::report::Direction;
use gsm_home::sim::{SimConfig, Simulation};
use gsm_home::time::SimTime;

fn main() {
    let phone = PhoneNumber::new("+60123456789").unwrap();
    let mut sim = Simulation::new(SimConfig::default()).unwrap();
    sim.schedule_sms(SimTime::ZERO, phone.clone(), SmsBody::new("L1ON").unwrap());
    sim.run_until_idle();

    for t in sim.trace() {
        let arrow = match t.dir {
            Direction::ToModem => "MCU -> modem",
            Direction::ToController => "modem -> MCU",
        };
        println!("{:>10}us  {arrow}  {:?}", t.start_us.as_micros(), t.data);
    }
    for a in sim.actuations() {
        println!(
            "\nload {} on at {} ({} after the indication)",
            a.change.id, a.change.time, a.latency
        );
    }
    for m in sim.inbox(&phone) {
        println!("phone got {:?} at {}", m.body.as_str(), m.at);
    }
}
