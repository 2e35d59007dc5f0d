use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{validate_decomposition, Block, GadgetSpec};
use crate::error::{Error, Result};
use crate::operators::small::{self, gates};
use crate::operators::{LocalTerm, RegisterLayout, SparseHermitian, TermSum};

/// `coefficient * paulis[0] (x) paulis[1] ...` on `targets`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub paulis: String,
    pub targets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    pub n: usize,
    pub terms: Vec<PauliTerm>,
}

fn pauli(c: char) -> Result<Vec<C64>> {
    Ok(match c {
        'I' => gates::i2(),
        'X' => gates::x(),
        'Y' => gates::y(),
        'Z' => gates::z(),
        _ => return Err(Error::invalid(format!("unknown Pauli `{c}`"))),
    })
}

impl PauliTerm {
    /// Non-identity factors as `(target, matrix)`.
    fn factors(&self) -> Result<Vec<(usize, Vec<C64>)>> {
        if self.paulis.chars().count() != self.targets.len() {
            return Err(Error::invalid("paulis and targets differ in length"));
        }
        let mut out = Vec::new();
        for (c, &t) in self.paulis.chars().zip(&self.targets) {
            if c != 'I' {
                out.push((t, pauli(c)?));
            }
        }
        let mut seen: Vec<usize> = out.iter().map(|f| f.0).collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != out.len() {
            return Err(Error::invalid("repeated target in a Pauli string"));
        }
        Ok(out)
    }
}

fn term_of(coefficient: f64, factors: &[(usize, Vec<C64>)], label: &str) -> Result<LocalTerm> {
    if factors.is_empty() {
        return LocalTerm::new(coefficient, vec![0], gates::i2(), label);
    }
    let blocks: Vec<&[C64]> = factors.iter().map(|f| f.1.as_slice()).collect();
    LocalTerm::new(coefficient, factors.iter().map(|f| f.0).collect(), small::kron_all(&blocks), label)
}

impl PauliHamiltonian {
    pub fn to_terms(&self) -> Result<TermSum> {
        let mut out = TermSum::new(RegisterLayout::new(&[("S", self.n)])?, 3);
        for t in &self.terms {
            out.push(term_of(t.coefficient, &t.factors()?, "H3")?)?;
        }
        Ok(out)
    }

    pub fn assemble(&self) -> Result<SparseHermitian> {
        self.to_terms()?.assemble()
    }
}

/// Reference decomposition: each weight-3 term `w σ1σ2σ3` becomes one triple
/// `B_i = β I + s σ_i` with `s = -cbrt(w/(6 c_r))`, `β = |s| + 1/n^3`; all
/// lower-weight remainders are folded into `Y`. The result must validate.
pub fn decompose(h: &PauliHamiltonian, mu: f64, kappa: f64) -> Result<(GadgetSpec, SparseHermitian)> {
    let n = h.n;
    let n3 = (n as f64).powi(3);
    let mut cubic = Vec::new();
    let mut rest = Vec::new();
    for t in &h.terms {
        let f = t.factors()?;
        match f.len() {
            0..=2 => rest.push((t.coefficient, f)),
            3 => cubic.push((t.coefficient, f)),
            k => return Err(Error::invalid(format!("weight-{k} term; only 3-local input is reduced"))),
        }
    }
    let wmax = cubic.iter().map(|c| c.0.abs()).fold(0.0, f64::max);
    let room = ((kappa - 1.0) / (2.0 * n3)).max(f64::MIN_POSITIVE);
    let cr = (wmax / 6.0 / room.powi(3)).max(1.0);

    let layout = RegisterLayout::new(&[("S", n)])?;
    let mut y = TermSum::new(layout, 2);
    for (c, f) in &rest {
        y.push(term_of(c / cr, f, "Y")?)?;
    }
    let mut b = Vec::with_capacity(cubic.len());
    for (w, f) in &cubic {
        let s = -(w / (6.0 * cr)).cbrt();
        let beta = s.abs() + 1.0 / n3;
        let blocks: Vec<Block> = f
            .iter()
            .map(|(t, sig)| {
                let m = small::add(&small::scale(&gates::i2(), small::c(beta)), &small::scale(sig, small::c(s)));
                Block::new(*t, m)
            })
            .collect();
        // 6 (β^3 + β^2 s Σσ_i + β s^2 Σσ_iσ_j) moves into Y
        y.push(term_of(6.0 * beta.powi(3), &[], "Y")?)?;
        for i in 0..3 {
            y.push(term_of(6.0 * beta * beta * s, &f[i..=i], "Y")?)?;
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            y.push(term_of(6.0 * beta * s * s, &[f[i].clone(), f[j].clone()], "Y")?)?;
        }
        b.push([blocks[0].clone(), blocks[1].clone(), blocks[2].clone()]);
    }
    let spec = GadgetSpec {
        n,
        m: b.len(),
        cr,
        mu,
        y,
        b,
        kappa,
    };
    let h3 = h.assemble()?;
    let report = validate_decomposition(&h3, &spec)?;
    if !report.pass {
        let names: Vec<String> = report.failures().iter().map(|c| c.name.clone()).collect();
        return Err(Error::invalid(format!("reference decomposition failed: {}", names.join(", "))));
    }
    Ok((spec, h3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadget::build_heff;

    fn sample() -> PauliHamiltonian {
        PauliHamiltonian {
            n: 3,
            terms: vec![
                PauliTerm { coefficient: 0.3, paulis: "ZXZ".into(), targets: vec![0, 1, 2] },
                PauliTerm { coefficient: -0.2, paulis: "XXY".into(), targets: vec![2, 0, 1] },
                PauliTerm { coefficient: 0.1, paulis: "ZZ".into(), targets: vec![0, 1] },
                PauliTerm { coefficient: 0.05, paulis: "X".into(), targets: vec![2] },
            ],
        }
    }

    #[test]
    fn reference_decomposition_validates() {
        let (spec, h3) = decompose(&sample(), 0.05, 8.0).unwrap();
        assert_eq!(spec.m, 2);
        assert!(spec.cr >= 1.0);
        assert!(spec.y.locality() <= 2);
        assert!(spec.reassemble().unwrap().max_abs_diff(&h3) < 1e-12);
    }

    #[test]
    fn lifted_plus_sector_matches() {
        let h = PauliHamiltonian {
            n: 2,
            terms: vec![
                PauliTerm { coefficient: 0.1, paulis: "ZXZ".into(), targets: vec![0, 1, 0] },
            ],
        };
        assert!(decompose(&h, 0.1, 8.0).is_err());
        let h = PauliHamiltonian {
            n: 3,
            terms: vec![PauliTerm { coefficient: 0.2, paulis: "ZXZ".into(), targets: vec![0, 1, 2] }],
        };
        let (spec, h3) = decompose(&h, 0.1, 8.0).unwrap();
        let g = build_heff(&spec).unwrap();
        assert!(g.plus_sector_residual(&h3).unwrap() <= 1e-9);
    }

    #[test]
    fn rejects_four_local() {
        let h = PauliHamiltonian {
            n: 4,
            terms: vec![PauliTerm { coefficient: 1.0, paulis: "ZZZZ".into(), targets: vec![0, 1, 2, 3] }],
        };
        assert!(decompose(&h, 0.1, 8.0).is_err());
    }
}
