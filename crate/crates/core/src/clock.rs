//! Unary clock encoding `|t^> = |1..1 0..0>` shared by the clock constructions.

/// Clock-register index of `|t^>` on `len` qubits, first clock qubit most significant.
pub fn unary(t: usize, len: usize) -> usize {
    debug_assert!(t <= len);
    ((1usize << t) - 1) << (len - t)
}

/// True iff the clock bits contain no `0` followed later by a `1`.
pub fn is_legal(bits: usize, len: usize) -> bool {
    let ones = bits.count_ones() as usize;
    bits == unary(ones, len)
}

/// Index of `|z> (x) |t^>` with the clock register last.
pub fn legal_index(z: usize, t: usize, len: usize) -> usize {
    (z << len) | unary(t, len)
}

/// All `|z> (x) |t^>` indices, time-major, for `t` in `times`.
pub fn legal_coords(system_qubits: usize, len: usize, times: std::ops::RangeInclusive<usize>) -> Vec<usize> {
    let mut out = Vec::new();
    for t in times {
        for z in 0..1usize << system_qubits {
            out.push(legal_index(z, t, len));
        }
    }
    out
}
