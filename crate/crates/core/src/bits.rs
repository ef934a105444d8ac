//! Bitstring helpers.
//!
//! Project-wide convention: bit `i` of a basis-state index is `(index >> i) & 1`,
//! and asset `i` maps to qubit `i`.

/// Expands a basis-state index into `n` bits (0/1 bytes), least significant first.
pub fn bits_from_index(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

/// Packs 0/1 bytes back into a basis-state index.
pub fn index_from_bits(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0usize, |acc, (i, &b)| acc | (((b & 1) as usize) << i))
}

/// Rejects any entry other than 0 or 1.
pub fn check_binary(bits: &[u8]) -> crate::error::Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => Err(crate::error::Error::InvalidArgument(format!(
            "bit {i} is {}, expected 0 or 1",
            bits[i]
        ))),
        None => Ok(()),
    }
}

/// Hamming weight of an index restricted to `n` bits.
pub fn weight(index: usize) -> u32 {
    index.count_ones()
}

/// Renders bits as a string, qubit 0 first.
pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter()
        .map(|&b| if b == 0 { '0' } else { '1' })
        .collect()
}
