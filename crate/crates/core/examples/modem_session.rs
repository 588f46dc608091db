//! Drive the modem byte by byte the way a terminal would.
//!
//! ```text
//! cargo run --example modem_session
//! ```

use gsm_home::at_codec::{render_response, PhoneNumber, SmsBody};
use gsm_home::gsm_modem::Modem;
use gsm_home::time::SimTime;

fn send(modem: &mut Modem, line: &[u8]) {
    println!(">> {:?}", String::from_utf8_lossy(line));
    for &b in line {
        if let Some(exec) = modem.receive(b) {
            for r in &exec.responses {
                println!("<< {:?}", String::from_utf8_lossy(&render_response(r)));
            }
            if let Some(sms) = exec.outbound {
                println!("   network <- {:?} to {}", sms.body.as_str(), sms.recipient);
            }
        }
    }
}

fn main() {
    let mut modem = Modem::default();
    send(&mut modem, b"AT+CMGR=1\r");
    send(&mut modem, b"AT+CMGF=1\r");

    let (slot, indication) = modem
        .deliver_inbound(
            PhoneNumber::new("+60123456789").unwrap(),
            SmsBody::new("L2ON").unwrap(),
            SimTime::from_micros(2_000_000),
            None,
        )
        .unwrap();
    if let Some(ind) = indication {
        println!("<< {:?}", String::from_utf8_lossy(&render_response(&ind)));
    }

    send(&mut modem, format!("AT+CMGR={slot}\r").as_bytes());
    send(&mut modem, b"AT+CMGS=\"+60123456789\"\r");
    send(&mut modem, b"L1:OFF L2:ON L3:OFF L4:OFF\x1a");
    send(&mut modem, format!("AT+CMGD={slot}\r").as_bytes());
    send(&mut modem, format!("AT+CMGR={slot}\r").as_bytes());
    println!("\n{:?}", modem.counters());
}
