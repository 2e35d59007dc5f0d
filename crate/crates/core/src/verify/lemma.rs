use super::{Direction, SpectralReport, EXACT_TOL};
use crate::error::{Error, Result};
use crate::operators::eigen::eigvalsh;
use crate::operators::{operator_norm, restrict, sparse, SparseHermitian, SubspaceBasis};

const ANCHOR: &str = "projection lemma";
const NULL_TOL: f64 = 1e-10;

/// Checks `λ₀(H1|S) - K²/(J - 2K) <= λ₀(H1 + H2) <= λ₀(H1|S)` with `K = ‖H1‖`,
/// plus the equality `λ₀(H1 + H2) = λ₀(H1|S)` when `H1` is PSD.
///
/// `S` must be the null space of `H2`, and every nonzero eigenvalue of `H2`
/// must be at least `J > 2K`.
pub fn check_projection_lemma(
    h1: &SparseHermitian,
    h2: &SparseHermitian,
    s: &SubspaceBasis,
    j: f64,
) -> Result<Vec<SpectralReport>> {
    if h1.dim() != h2.dim() {
        return Err(Error::DimensionMismatch {
            expected: h1.dim(),
            found: h2.dim(),
        });
    }
    let leak = (0..s.dim())
        .map(|i| sparse::norm(&h2.matvec(&s.column(i))))
        .fold(0.0, f64::max);
    if leak > NULL_TOL {
        return Err(Error::precondition(format!("S is not annihilated by H2 (residual {leak:e})")));
    }
    let w2 = eigvalsh(h2)?;
    let null = w2.iter().filter(|v| v.abs() <= NULL_TOL * (1.0 + j)).count();
    if null != s.dim() {
        return Err(Error::precondition(format!(
            "H2 has a {null}-dimensional null space but S has dimension {}",
            s.dim()
        )));
    }
    let min_nonzero = w2.iter().copied().filter(|v| v.abs() > NULL_TOL * (1.0 + j)).fold(f64::INFINITY, f64::min);
    if min_nonzero < j * (1.0 - 1e-12) {
        return Err(Error::precondition(format!("H2 has eigenvalue {min_nonzero} below J = {j}")));
    }
    let k = operator_norm(h1)?;
    if j <= 2.0 * k {
        return Err(Error::precondition(format!("lemma inapplicable: J = {j} <= 2 ||H1|| = {}", 2.0 * k)));
    }

    let restricted = eigvalsh(&restrict(h1, s)?)?[0];
    let full = eigvalsh(&h1.add(h2)?)?[0];
    let lower = restricted - k * k / (j - 2.0 * k);
    let psd = eigvalsh(h1)?[0] >= -EXACT_TOL;
    let tag = |r: SpectralReport| {
        r.with_meta("norm_h1", k)
            .with_meta("J", j)
            .with_meta("dim", h1.dim())
            .with_meta("dim_s", s.dim())
            .with_meta("slack", restricted - full)
            .with_meta("psd", psd)
    };

    let mut out = vec![
        tag(SpectralReport::bound(
            "projection_lemma.lower",
            ANCHOR,
            Direction::Lower,
            "lambda0(H1|S) - ||H1||^2/(J - 2||H1||)",
            lower,
            full,
            EXACT_TOL,
        )),
        tag(SpectralReport::bound(
            "projection_lemma.upper",
            ANCHOR,
            Direction::Upper,
            "lambda0(H1|S)",
            restricted,
            full,
            EXACT_TOL,
        )),
    ];
    if psd {
        out.push(tag(SpectralReport::bound(
            "projection_lemma.psd_equality",
            ANCHOR,
            Direction::Equal,
            "lambda0(H1|S)",
            restricted,
            full,
            EXACT_TOL,
        )));
    }
    Ok(out)
}
