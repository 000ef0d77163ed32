//! Frequency (monobit) and runs tests on bit streams, following the
//! NIST SP 800-22 definitions.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatTest {
    pub z: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub n_bits: usize,
    pub ones_fraction: f64,
    pub monobit: StatTest,
    pub runs: StatTest,
    pub alpha: f64,
}

fn two_sided(z: f64, alpha: f64) -> StatTest {
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    StatTest { z, p_value: p, pass: p >= alpha }
}

/// `z = S/√n` with `S = Σ(2bᵢ − 1)`.
pub fn monobit(bits: &[u8], alpha: f64) -> StatTest {
    if bits.is_empty() {
        return StatTest { z: 0.0, p_value: 0.0, pass: false };
    }
    let s: i64 = bits.iter().map(|&b| if b & 1 == 1 { 1 } else { -1 }).sum();
    two_sided(s as f64 / (bits.len() as f64).sqrt(), alpha)
}

/// Runs test. Fails outright when the ones fraction `π` violates the
/// prerequisite `|π − ½| < 2/√n`.
pub fn runs(bits: &[u8], alpha: f64) -> StatTest {
    let n = bits.len() as f64;
    if bits.len() < 2 {
        return StatTest { z: 0.0, p_value: 0.0, pass: false };
    }
    let pi = bits.iter().filter(|&&b| b & 1 == 1).count() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return StatTest { z: f64::INFINITY, p_value: 0.0, pass: false };
    }
    let v = 1 + bits.windows(2).filter(|w| (w[0] ^ w[1]) & 1 == 1).count();
    let q = pi * (1.0 - pi);
    two_sided((v as f64 - 2.0 * n * q) / (2.0 * n.sqrt() * q), alpha)
}

pub fn stat_tests(bits: &[u8], alpha: f64) -> StatReport {
    let ones = bits.iter().filter(|&&b| b & 1 == 1).count();
    StatReport {
        n_bits: bits.len(),
        ones_fraction: if bits.is_empty() { 0.0 } else { ones as f64 / bits.len() as f64 },
        monobit: monobit(bits, alpha),
        runs: runs(bits, alpha),
        alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_fails_both() {
        let r = stat_tests(&vec![0; 10_000], DEFAULT_ALPHA);
        assert!(!r.monobit.pass && !r.runs.pass);
    }

    #[test]
    fn alternating_passes_monobit_only() {
        let bits: Vec<u8> = (0..10_000).map(|i| (i % 2) as u8).collect();
        let r = stat_tests(&bits, DEFAULT_ALPHA);
        assert!(r.monobit.pass);
        assert!(!r.runs.pass);
    }

    #[test]
    fn nist_worked_examples() {
        // SP 800-22 §2.1.8 and §2.3.8.
        let bits: Vec<u8> = "1011010101".bytes().map(|c| c - b'0').collect();
        assert!((monobit(&bits, 0.01).p_value - 0.527089).abs() < 1e-6);
        let bits: Vec<u8> = "1001101011".bytes().map(|c| c - b'0').collect();
        assert!((runs(&bits, 0.01).p_value - 0.147232).abs() < 1e-6);
    }

    #[test]
    fn empty_stream_fails() {
        assert!(!monobit(&[], 0.01).pass);
        assert!(!runs(&[], 0.01).pass);
    }
}
