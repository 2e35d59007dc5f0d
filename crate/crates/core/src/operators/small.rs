//! Small dense complex matrices stored row-major, used for local blocks.

use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> Vec<C64> {
    let mut m = vec![ZERO; d * d];
    for i in 0..d {
        m[i * d + i] = ONE;
    }
    m
}

/// `|i><j|` in dimension `d`.
pub fn ket_bra(i: usize, j: usize, d: usize) -> Vec<C64> {
    let mut m = vec![ZERO; d * d];
    m[i * d + j] = ONE;
    m
}

pub fn dim_of(m: &[C64]) -> usize {
    let d = (m.len() as f64).sqrt().round() as usize;
    debug_assert_eq!(d * d, m.len());
    d
}

pub fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let da = dim_of(a);
    let db = dim_of(b);
    let d = da * db;
    let mut out = vec![ZERO; d * d];
    for i in 0..da {
        for j in 0..da {
            let x = a[i * da + j];
            if x == ZERO {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k) * d + j * db + l] = x * b[k * db + l];
                }
            }
        }
    }
    out
}

pub fn kron_all(ms: &[&[C64]]) -> Vec<C64> {
    ms.iter().fold(vec![ONE], |acc, m| kron(&acc, m))
}

pub fn matmul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let d = dim_of(a);
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        for k in 0..d {
            let x = a[i * d + k];
            if x == ZERO {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += x * b[k * d + j];
            }
        }
    }
    out
}

pub fn adjoint(a: &[C64]) -> Vec<C64> {
    let d = dim_of(a);
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j].conj();
        }
    }
    out
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + a^dagger`.
pub fn plus_adjoint(a: &[C64]) -> Vec<C64> {
    add(a, &adjoint(a))
}

pub fn hermitian_deviation(a: &[C64]) -> f64 {
    let d = dim_of(a);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((a[i * d + j] - a[j * d + i].conj()).norm());
        }
    }
    worst
}

pub fn unitary_deviation(a: &[C64]) -> f64 {
    let p = matmul(&adjoint(a), a);
    let id = identity(dim_of(a));
    p.iter().zip(&id).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Diagonal projector onto the computational state `bits` of a `k`-qubit block.
pub fn projector_bits(bits: &[u8]) -> Vec<C64> {
    let k = bits.len();
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    ket_bra(idx, idx, 1 << k)
}

pub mod gates {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    pub fn x() -> Vec<C64> {
        vec![ZERO, ONE, ONE, ZERO]
    }

    pub fn y() -> Vec<C64> {
        vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]
    }

    pub fn z() -> Vec<C64> {
        vec![ONE, ZERO, ZERO, -ONE]
    }

    pub fn h() -> Vec<C64> {
        let s = c(FRAC_1_SQRT_2);
        vec![s, s, s, -s]
    }

    pub fn t() -> Vec<C64> {
        vec![ONE, ZERO, ZERO, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]
    }

    pub fn i2() -> Vec<C64> {
        identity(2)
    }

    pub fn p0() -> Vec<C64> {
        ket_bra(0, 0, 2)
    }

    pub fn p1() -> Vec<C64> {
        ket_bra(1, 1, 2)
    }

    /// `|1><0|`
    pub fn raise() -> Vec<C64> {
        ket_bra(1, 0, 2)
    }

    pub fn cz() -> Vec<C64> {
        let mut m = identity(4);
        m[15] = -ONE;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::gates::*;
    use super::*;

    #[test]
    fn kron_of_z_and_identity_is_block_diagonal() {
        let m = kron(&z(), &i2());
        let diag: Vec<f64> = (0..4).map(|i| m[i * 4 + i].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn named_gates_are_unitary() {
        for g in [x(), y(), z(), h(), t(), i2(), cz()] {
            assert!(unitary_deviation(&g) < 1e-15);
        }
    }

    #[test]
    fn projector_bits_picks_index() {
        let p = projector_bits(&[1, 0]);
        assert_eq!(p[2 * 4 + 2], ONE);
        assert_eq!(p.iter().filter(|v| **v != ZERO).count(), 1);
    }
}
