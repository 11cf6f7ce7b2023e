//! Row-major multi-index arithmetic. Indices are 0-based here; cell `i`
//! covers `[i/m, (i+1)/m)`.

use alloc::vec;
use alloc::vec::Vec;

/// Writes the digits of `flat` (base `m`, most significant first) into `out`.
#[inline]
pub(crate) fn decode(mut flat: usize, m: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % m;
        flat /= m;
    }
}

#[inline]
pub(crate) fn encode(digits: &[usize], m: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * m + d)
}

/// Flat index of the digit-reversed tuple, for every flat index of order `order`.
pub(crate) fn reversal_table(m: usize, order: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; order];
    (0..len)
        .map(|flat| {
            decode(flat, m, &mut digits);
            digits.reverse();
            encode(&digits, m)
        })
        .collect()
}

/// True when some index value appears twice.
#[inline]
pub(crate) fn has_repeat(digits: &[usize]) -> bool {
    digits
        .iter()
        .enumerate()
        .any(|(i, d)| digits[i + 1..].contains(d))
}
