use super::{merge, Direction, SpectralReport, EXACT_TOL};
use crate::error::Result;
use crate::excited::ExcitedInstance;
use crate::gadget::GadgetInstance;
use crate::operators::SparseHermitian;

/// Self-energy eigen-relation tolerance.
pub const SELF_ENERGY_TOL: f64 = 1e-7;
const CLOSENESS_TOL: f64 = 1e-9;

/// Plus-sector spectrum, low-sector closeness, per-level fidelity bounds and
/// the self-energy eigen-relation for one gadget.
pub fn gadget_suite(g: &GadgetInstance, h3: &SparseHermitian) -> Result<Vec<SpectralReport>> {
    let (cr, mu) = (g.spec.cr, g.spec.mu);
    let tag = |r: SpectralReport| r.with_meta("mu", mu).with_meta("cr", cr).with_meta("n", g.spec.n).with_meta("M", g.spec.m);
    let mut out = vec![tag(SpectralReport::bound(
        "gadget.plus_sector",
        "logical plus sector",
        Direction::Equal,
        "eig(H_eff|P+) = eig(H3)",
        0.0,
        g.plus_sector_residual(h3)?,
        EXACT_TOL,
    ))];

    let close = g.compare_spectra()?;
    out.push(tag(SpectralReport::bound(
        "gadget.closeness",
        "low-sector spectral closeness",
        Direction::Upper,
        "c_r mu",
        close.bound,
        close.max_difference,
        CLOSENESS_TOL,
    )
    .with_meta("low_dim", close.low_dim)
    .with_meta("code_dim", close.code_dim)
    .with_meta("p_norm", close.p_norm)));
    out.push(tag(SpectralReport::bound(
        "gadget.low_dimension",
        "low-sector spectral closeness",
        Direction::Equal,
        "dim low sector = dim code space",
        close.code_dim as f64,
        close.low_dim as f64,
        0.0,
    )));

    for i in 0..close.code_dim {
        let f = g.fidelity_bound_check(i)?;
        out.push(tag(SpectralReport::bound(
            &format!("gadget.fidelity.level{i:02}"),
            "eigenstate fidelity under perturbation",
            Direction::Lower,
            "1 - (||P||/(Lambda - lambda_i - c_r mu) + sqrt(2 c_r mu / gamma_i))^2",
            f.bound,
            f.measured,
            EXACT_TOL,
        )
        .with_meta("gamma", f.gamma)
        .with_meta("vacuous", f.vacuous)));
    }

    let se = g.self_energy_report()?;
    out.push(tag(SpectralReport::bound(
        "gadget.self_energy",
        "self-energy eigen-relation",
        Direction::Upper,
        "||Sigma(lambda_i) v - lambda_i v|| = 0",
        0.0,
        se.max_residual,
        SELF_ENERGY_TOL,
    )
    .with_meta("levels", se.levels.len())
    .with_meta("max_deviation", se.max_deviation)));
    Ok(merge(out))
}

/// Ladder count, ladder minimum and `λ_c(H^(c)) = λ₀(H^(s))`.
pub fn excited_suite(e: &ExcitedInstance) -> Result<Vec<SpectralReport>> {
    const A: &str = "excited-level ladder";
    let r = e.level_report()?;
    let tag = |x: SpectralReport| x.with_meta("c", e.c).with_meta("quarter_band", e.in_quarter_band());
    Ok(vec![
        tag(SpectralReport::bound(
            "excited.negative_count",
            A,
            Direction::Equal,
            "c",
            e.c as f64,
            r.negative_count as f64,
            0.0,
        )),
        tag(SpectralReport::bound(
            "excited.ladder_minimum",
            A,
            Direction::Equal,
            "1/2 - c",
            0.5 - e.c as f64,
            r.min_negative,
            1e-10,
        )),
        tag(SpectralReport::bound(
            "excited.level",
            A,
            Direction::Equal,
            "lambda0(H_s)",
            r.lambda0_s,
            r.lambda_c,
            1e-10,
        )),
    ])
}
