//! Simulator of an SMS-driven relay controller.
//!
//! A phone texts a command such as `L1ON` through a cellular network to a
//! GSM modem. A microcontroller polls the modem over a serial line with AT
//! commands, switches one of four relays and texts back the bank state.
//! Every part runs against a microsecond event clock, so a run is a pure
//! function of its scenario and seed.

pub mod at_codec;
pub mod controller;
pub mod gsm_modem;
pub mod sim;
pub mod time;
pub mod uart_link;
