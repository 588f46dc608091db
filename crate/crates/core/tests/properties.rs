use proptest::prelude::*;

use gsm_home::at_codec::{parse_command, AtCommand, AtResponse, PhoneNumber, SmsBody};
use gsm_home::controller::LoadId;
use gsm_home::gsm_modem::{execute, ModemState, SimStore};
use gsm_home::sim::queue::EventQueue;
use gsm_home::sim::scenario::{parse_scenario, Scenario, StepKind};
use gsm_home::time::{SimDuration, SimTime};
use gsm_home::uart_link::{
    best_spbrg, calculated_baud, transfer_duration, BrgConfig, RxByte, SerialChannel,
};

/// Brute-force divisor search written from the formula alone.
fn oracle_spbrg(fosc: u32, desired: f64, max_err: f64) -> Option<(u8, f64)> {
    let mut best: Option<(u8, f64)> = None;
    for n in 0u32..256 {
        let rate = f64::from(fosc) / (64.0 * f64::from(n + 1));
        let err = (rate - desired) / desired * 100.0;
        match best {
            Some((_, e)) if e.abs() <= err.abs() => {}
            _ => best = Some((n as u8, err)),
        }
    }
    best.filter(|(_, e)| e.abs() <= max_err)
}

proptest! {
    #[test]
    fn divisor_search_matches_brute_force(fosc in 1_000_000u32..40_000_000, desired in 300u32..200_000) {
        let got = best_spbrg(fosc, f64::from(desired), 3.0).map(|s| (s.spbrg, s.error_pct));
        let want = oracle_spbrg(fosc, f64::from(desired), 3.0);
        prop_assert_eq!(got.map(|g| g.0), want.map(|w| w.0));
        if let (Some(g), Some(w)) = (got, want) {
            prop_assert!((g.1 - w.1).abs() < 1e-9);
        }
    }

    #[test]
    fn baud_strictly_decreases_with_divisor(fosc in 1u32..=u32::MAX, spbrg in 0u8..255) {
        let lo = calculated_baud(&BrgConfig::new(fosc, spbrg).unwrap());
        let hi = calculated_baud(&BrgConfig::new(fosc, spbrg + 1).unwrap());
        prop_assert!(hi < lo);
    }

    #[test]
    fn transfer_time_is_linear(n in 0u64..10_000, baud in 300.0f64..1e6) {
        prop_assert_eq!(transfer_duration(n, baud), n as f64 * transfer_duration(1, baud));
    }

    #[test]
    fn channel_delivers_every_byte_in_order(
        bursts in proptest::collection::vec((0u64..20_000, proptest::collection::vec(any::<u8>(), 1..40)), 1..8),
        baud in prop_oneof![Just(9600.0), Just(9_469.696_969_697), Just(115_200.0)],
    ) {
        let mut ch = SerialChannel::new(baud, baud);
        let per_byte = 10.0 * 1e6 / baud;
        let mut now = 0u64;
        let mut busy_until = 0.0f64;
        let mut sent = Vec::new();
        for (gap, bytes) in &bursts {
            now += gap;
            let start = busy_until.max(now as f64);
            busy_until = start + per_byte * bytes.len() as f64;
            let (_, last) = ch.write(SimTime::from_micros(now), bytes).unwrap();
            prop_assert!((last.as_micros() as f64 - busy_until).abs() <= 1.0);
            sent.extend_from_slice(bytes);
        }
        let got = ch.take_due(SimTime::from_micros(u64::MAX));
        let want: Vec<RxByte> = sent.into_iter().map(RxByte::Data).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn queue_pops_in_time_then_insertion_order(dues in proptest::collection::vec(0u64..50, 0..100)) {
        let mut q = EventQueue::new();
        for (i, &d) in dues.iter().enumerate() {
            q.push(SimTime::from_micros(d), i);
        }
        let mut expected: Vec<(u64, usize)> = dues.iter().copied().zip(0..).collect();
        expected.sort();
        let mut got = Vec::new();
        while let Some((t, i)) = q.pop() {
            got.push((t.as_micros(), i));
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn command_names_ignore_case(mask in any::<u16>(), slot in 1u32..1000) {
        let canonical = format!("AT+CMGD={slot}\r");
        let mixed: String = canonical
            .chars()
            .enumerate()
            .map(|(i, c)| if mask >> (i % 16) & 1 == 1 { c.to_ascii_lowercase() } else { c })
            .collect();
        prop_assert_eq!(parse_command(mixed.as_bytes()), parse_command(canonical.as_bytes()));
    }

    #[test]
    fn scenario_text_round_trips(
        steps in proptest::collection::vec((0u64..100_000_000, 0usize..4, 1u32..=4, any::<bool>()), 0..20),
        seed in proptest::option::of(any::<u64>()),
    ) {
        let mut s = Scenario::new("generated");
        s.config.seed = seed;
        for (at, kind, id, on) in steps {
            let at = SimTime::from_micros(at);
            let load = LoadId::new(id).unwrap();
            let phone = PhoneNumber::new("+60123456789").unwrap();
            s.push(at, match kind {
                0 => StepKind::SendSms { sender: phone, body: SmsBody::new("L1ON").unwrap() },
                1 => StepKind::ExpectLoad { id: load, on },
                2 => StepKind::ExpectSms { to: phone, contains: "L1:ON".into() },
                _ => StepKind::ExpectLatency { id: load, max: SimDuration::from_millis(1500) },
            });
        }
        let parsed = parse_scenario("generated", &s.to_text()).unwrap();
        prop_assert_eq!(&parsed.config, &s.config);
        let strip = |sc: &Scenario| sc.steps.iter().map(|st| (st.at, st.kind.clone())).collect::<Vec<_>>();
        prop_assert_eq!(strip(&parsed), strip(&s));
    }
}

#[test]
fn body_without_send_is_an_error() {
    let mut state = ModemState::default();
    let mut store = SimStore::new(10).unwrap();
    let mut mr = 0;
    let body = AtCommand::SendBody(SmsBody::new("hi").unwrap());
    assert_eq!(
        execute(
            &AtCommand::SetTextMode(true),
            &mut state,
            &mut store,
            &mut mr
        )
        .responses,
        [AtResponse::Ok]
    );
    let exec = execute(&body, &mut state, &mut store, &mut mr);
    assert_eq!(exec.responses, [AtResponse::Error]);
    assert!(exec.outbound.is_none());
}

#[test]
fn text_mode_commands_need_text_mode() {
    let mut state = ModemState::default();
    let mut store = SimStore::new(10).unwrap();
    let mut mr = 0;
    let to = PhoneNumber::new("+601").unwrap();
    for cmd in [
        AtCommand::ReadMessage(gsm_home::at_codec::SlotIndex::new(1).unwrap()),
        AtCommand::SendMessage(to),
    ] {
        assert_eq!(
            execute(&cmd, &mut state, &mut store, &mut mr).responses,
            [AtResponse::Error]
        );
    }
}
