#![allow(dead_code)]

pub use kwick::verify::gen::*;
use kwick::{ChannelSpec, FieldType, Mode, Statistics, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn oscillator() -> ChannelSpec {
    ChannelSpec::oscillator(1.0, 1.0, 8)
}

/// Real field on `nx` labels with two modes.
pub fn real_field(nx: usize, seed: u64) -> ChannelSpec {
    let mut r = rng(seed);
    let labels: Vec<String> = (0..nx).map(|k| format!("x{}", k + 1)).collect();
    let modes = [1.0, 0.6]
        .iter()
        .enumerate()
        .map(|(k, &w)| Mode::particle(&format!("k{}", k + 1), w, (0..nx).map(|_| rand_c(&mut r)).collect()))
        .collect();
    ChannelSpec { field: FieldType::Real, statistics: Statistics::Bose, nonrel: false, hbar: 1.0, truncation: 6, x_labels: labels, modes }
}

/// Channel with two modes on `nx` labels.
pub fn channel(stats: Statistics, nonrel: bool, nx: usize, seed: u64) -> ChannelSpec {
    let mut r = rng(seed);
    let labels: Vec<String> = (0..nx).map(|k| format!("x{}", k + 1)).collect();
    let zero = vec![C64::default(); nx];
    let modes = [1.0, 0.7]
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let mut m = Mode::particle(&format!("k{}", k + 1), w, (0..nx).map(|_| rand_c(&mut r)).collect());
            m.ut = (0..nx).map(|_| rand_c(&mut r)).collect();
            if nonrel {
                m.v = zero.clone();
                m.vt = zero.clone();
            } else {
                m.v = (0..nx).map(|_| rand_c(&mut r)).collect();
                m.vt = (0..nx).map(|_| rand_c(&mut r)).collect();
            }
            m
        })
        .collect();
    ChannelSpec { field: FieldType::Channel, statistics: stats, nonrel, hbar: 1.0, truncation: if stats == Statistics::Bose { 6 } else { 1 }, x_labels: labels, modes }
}
