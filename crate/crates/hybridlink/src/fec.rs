//! Rate-1/2 constraint-length-7 convolutional code (generators 133, 171
//! octal) with zero-tail termination, soft-decision Viterbi decoding, and a
//! row-in/column-out block interleaver.

use crate::error::{Error, Result};

const K: usize = 7;
const N_STATES: usize = 1 << (K - 1);
const TAIL: usize = K - 1;

/// Code and interleaver configuration. The code itself is fixed at rate 1/2,
/// K = 7, generators (133, 171); the interleaver row count is configurable
/// and must divide the coded frame length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeConfig {
    pub generators: [u32; 2],
    pub interleaver_rows: usize,
}

impl Default for CodeConfig {
    fn default() -> Self {
        Self {
            generators: [0o133, 0o171],
            interleaver_rows: 36,
        }
    }
}

impl CodeConfig {
    pub const RATE: f64 = 0.5;

    /// Coded bits produced for `n_info` information bits (zero tail).
    pub fn coded_len(&self, n_info: usize) -> usize {
        2 * (n_info + TAIL)
    }

    /// Information bits recoverable from `n_coded` coded bits.
    pub fn info_len(&self, n_coded: usize) -> Result<usize> {
        if n_coded % 2 != 0 || n_coded / 2 <= TAIL {
            return Err(Error::Framing(format!(
                "coded length {n_coded} is not 2*(k + {TAIL}) for any k > 0"
            )));
        }
        Ok(n_coded / 2 - TAIL)
    }
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Convolutional encoding with zero-tail termination. Output length is
/// `2 * (bits.len() + 6)`, two coded bits per input bit, g1 first.
pub fn conv_encode(bits: &[u8], cfg: &CodeConfig) -> Vec<u8> {
    let [g1, g2] = cfg.generators;
    let mut out = Vec::with_capacity(2 * (bits.len() + TAIL));
    let mut reg: u32 = 0;
    for &b in bits.iter().chain(std::iter::repeat(&0u8).take(TAIL)) {
        reg = ((b as u32) << (K - 1)) | (reg >> 1);
        out.push(parity(reg & g1));
        out.push(parity(reg & g2));
    }
    out
}

/// Soft-input Viterbi decoding: returns the information sequence maximizing
/// sum(llr * (+1 for coded bit 0, -1 for coded bit 1)) over all zero-tailed
/// codewords. Metric ties prefer the lower predecessor state, which resolves
/// toward the zero bit.
pub fn viterbi_decode(llrs: &[f64], cfg: &CodeConfig) -> Result<Vec<u8>> {
    let n_info = cfg.info_len(llrs.len())?;
    let n_steps = n_info + TAIL;
    let [g1, g2] = cfg.generators;

    // Per-state expected output signs (+1 for 0, -1 for 1) for input bit 0
    // and 1: sign tables indexed by the 7-bit register value.
    let mut out_sign = [[0f64; 2]; 1 << K];
    for (reg, signs) in out_sign.iter_mut().enumerate() {
        signs[0] = if parity(reg as u32 & g1) == 0 { 1.0 } else { -1.0 };
        signs[1] = if parity(reg as u32 & g2) == 0 { 1.0 } else { -1.0 };
    }

    const NEG_INF: f64 = f64::NEG_INFINITY;
    let mut metric = vec![NEG_INF; N_STATES];
    metric[0] = 0.0;
    let mut next = vec![NEG_INF; N_STATES];
    // One u64 decision bitmap per step: bit s set when the survivor into
    // state s came from the odd predecessor.
    let mut decisions: Vec<u64> = Vec::with_capacity(n_steps);

    for step in 0..n_steps {
        let l0 = llrs[2 * step];
        let l1 = llrs[2 * step + 1];
        next.fill(NEG_INF);
        let mut bitmap = 0u64;
        // Entering state ns with input bit b = ns >> 5, predecessors
        // p0 = (ns << 1) & mask and p1 = p0 | 1.
        for ns in 0..N_STATES {
            let b = (ns >> (K - 2)) as u32;
            let p0 = (ns << 1) & (N_STATES - 1);
            let p1 = p0 | 1;
            let reg0 = ((b as usize) << (K - 1)) | p0;
            let reg1 = ((b as usize) << (K - 1)) | p1;
            let m0 = metric[p0] + l0 * out_sign[reg0][0] + l1 * out_sign[reg0][1];
            let m1 = metric[p1] + l0 * out_sign[reg1][0] + l1 * out_sign[reg1][1];
            if m1 > m0 {
                next[ns] = m1;
                bitmap |= 1 << ns;
            } else {
                next[ns] = m0;
            }
        }
        decisions.push(bitmap);
        std::mem::swap(&mut metric, &mut next);
    }

    // Zero-tail: trace back from state 0.
    let mut state = 0usize;
    let mut bits_rev = Vec::with_capacity(n_steps);
    for step in (0..n_steps).rev() {
        let b = (state >> (K - 2)) as u8;
        bits_rev.push(b);
        let from_odd = (decisions[step] >> state) & 1 == 1;
        state = ((state << 1) & (N_STATES - 1)) | usize::from(from_odd);
    }
    bits_rev.reverse();
    bits_rev.truncate(n_info);
    Ok(bits_rev)
}

/// Row-in/column-out block interleaving: the sequence is written row by row
/// into a `rows x cols` matrix and read column by column.
pub fn interleave<T: Copy>(seq: &[T], rows: usize) -> Result<Vec<T>> {
    if rows == 0 || seq.len() % rows != 0 {
        return Err(Error::Framing(format!(
            "sequence length {} is not a multiple of {rows} rows",
            seq.len()
        )));
    }
    let cols = seq.len() / rows;
    let mut out = Vec::with_capacity(seq.len());
    for c in 0..cols {
        for r in 0..rows {
            out.push(seq[r * cols + c]);
        }
    }
    Ok(out)
}

/// Inverse of [`interleave`] with the same row count.
pub fn deinterleave<T: Copy>(seq: &[T], rows: usize) -> Result<Vec<T>> {
    if rows == 0 || seq.len() % rows != 0 {
        return Err(Error::Framing(format!(
            "sequence length {} is not a multiple of {rows} rows",
            seq.len()
        )));
    }
    let cols = seq.len() / rows;
    let mut out = vec![seq[0]; seq.len()];
    let mut it = seq.iter();
    for c in 0..cols {
        for r in 0..rows {
            out[r * cols + c] = *it.next().unwrap();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::RngStream;

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut s = RngStream::new(seed, 0);
        (0..n).map(|_| s.bit()).collect()
    }

    /// Exhaustive maximum-likelihood search over all 2^k zero-tailed
    /// codewords; the independent oracle for the Viterbi decoder.
    fn brute_force_ml(llrs: &[f64], k: usize, cfg: &CodeConfig) -> Vec<u8> {
        let mut best_msg = vec![0u8; k];
        let mut best_metric = f64::NEG_INFINITY;
        for m in 0u64..(1 << k) {
            let msg: Vec<u8> = (0..k).map(|i| ((m >> i) & 1) as u8).collect();
            let cw = conv_encode(&msg, cfg);
            let metric: f64 = cw
                .iter()
                .zip(llrs)
                .map(|(&c, &l)| if c == 0 { l } else { -l })
                .sum();
            if metric > best_metric {
                best_metric = metric;
                best_msg = msg;
            }
        }
        best_msg
    }

    #[test]
    fn all_zero_input_gives_zero_codeword() {
        let cfg = CodeConfig::default();
        let out = conv_encode(&[0; 10], &cfg);
        assert_eq!(out.len(), 32);
        assert!(out.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_is_interleaved_generators() {
        let cfg = CodeConfig::default();
        let mut input = vec![0u8; 7];
        input[0] = 1;
        let out = conv_encode(&input, &cfg);
        // Hand-computed shift-register trace for generators 133/171 octal:
        // g1 taps 1011011, g2 taps 1111001, interleaved per step.
        let expect = [1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1];
        assert_eq!(&out[..14], &expect);
        // Register empties afterwards.
        assert!(out[14..].iter().all(|&b| b == 0));
    }

    #[test]
    fn encoder_is_linear() {
        let cfg = CodeConfig::default();
        let a = random_bits(40, 1);
        let b = random_bits(40, 2);
        let xor: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ea = conv_encode(&a, &cfg);
        let eb = conv_encode(&b, &cfg);
        let exor = conv_encode(&xor, &cfg);
        for i in 0..ea.len() {
            assert_eq!(exor[i], ea[i] ^ eb[i]);
        }
    }

    #[test]
    fn noiseless_llrs_decode_exactly() {
        let cfg = CodeConfig::default();
        let msg = random_bits(60, 3);
        let cw = conv_encode(&msg, &cfg);
        let llrs: Vec<f64> = cw.iter().map(|&b| if b == 0 { 100.0 } else { -100.0 }).collect();
        assert_eq!(viterbi_decode(&llrs, &cfg).unwrap(), msg);
    }

    #[test]
    fn matches_brute_force_ml_k12() {
        let cfg = CodeConfig::default();
        let mut s = RngStream::new(4, 0);
        for _ in 0..50 {
            let k = 12;
            let llrs: Vec<f64> = (0..cfg.coded_len(k))
                .map(|_| s.gaussian_pair().0 * 2.0)
                .collect();
            let vit = viterbi_decode(&llrs, &cfg).unwrap();
            let ml = brute_force_ml(&llrs, k, &cfg);
            assert_eq!(vit, ml);
        }
    }

    #[test]
    fn corrects_two_flips_within_constraint_length() {
        // Free distance of (133,171) is 10: any 2 hard errors correctable.
        let cfg = CodeConfig::default();
        let msg = random_bits(40, 5);
        let cw = conv_encode(&msg, &cfg);
        let mut llrs: Vec<f64> = cw.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
        llrs[20] = -llrs[20];
        llrs[23] = -llrs[23];
        assert_eq!(viterbi_decode(&llrs, &cfg).unwrap(), msg);
    }

    #[test]
    fn free_distance_is_ten() {
        // Minimum codeword weight over all short nonzero messages.
        let cfg = CodeConfig::default();
        let mut min_w = usize::MAX;
        for m in 1u64..(1 << 10) {
            let msg: Vec<u8> = (0..10).map(|i| ((m >> i) & 1) as u8).collect();
            let w = conv_encode(&msg, &cfg).iter().map(|&b| b as usize).sum();
            min_w = min_w.min(w);
        }
        assert_eq!(min_w, 10);
    }

    #[test]
    fn interleaver_definition() {
        let out = interleave(&['a', 'b', 'c', 'd', 'e', 'f'], 2).unwrap();
        assert_eq!(out, ['a', 'd', 'b', 'e', 'c', 'f']);
    }

    #[test]
    fn interleaver_round_trip() {
        let data = random_bits(144, 6);
        for rows in [1, 2, 4, 12, 144] {
            let il = interleave(&data, rows).unwrap();
            assert_eq!(deinterleave(&il, rows).unwrap(), data);
        }
    }

    #[test]
    fn burst_spreading() {
        // With rows <= cols, a burst of <= rows adjacent channel positions
        // deinterleaves to original positions at least rows apart.
        let rows = 4;
        let cols = 8;
        let n = rows * cols;
        let positions: Vec<usize> = (0..n).collect();
        let il = interleave(&positions, rows).unwrap();
        for burst_start in 0..n - 2 {
            let mut orig: Vec<usize> = (0..3).map(|i| il[burst_start + i]).collect();
            orig.sort_unstable();
            for w in orig.windows(2) {
                assert!(
                    w[1] - w[0] >= rows,
                    "burst at {burst_start} maps to {orig:?}"
                );
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(interleave(&[1, 2, 3], 2).is_err());
        assert!(viterbi_decode(&[0.0; 13], &CodeConfig::default()).is_err());
    }
}
