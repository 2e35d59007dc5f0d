use super::{Direction, SpectralReport, EXACT_TOL};
use crate::error::Result;
use crate::kitaev5::{alpha_hat, beta_hat, Kitaev5Instance};
use crate::operators::eigen::{eigvalsh, ground_energy};

const A: &str = "five-local clock construction";

/// `<eta|Ĥ5|eta> = ε/(T'+1)`, `λ₀(Ĥ5) <= α̂` with `1 - α = ε`, and the
/// guiding overlap `M/(T'+1)`.
pub fn kitaev5_suite(k: &Kitaev5Instance, delta: f64) -> Result<Vec<SpectralReport>> {
    let eps = k.circuit.epsilon()?;
    let tp = k.t_prime();
    let h = k.weighted(delta)?;
    let eta = k.history_state()?;
    let lam = ground_energy(&h)?;
    let threshold = alpha_hat(1.0 - eps, tp);
    let tag = |r: SpectralReport| r.with_meta("Delta", delta).with_meta("epsilon", eps).with_meta("T_prime", tp).with_meta("dim", k.dim());
    let mut out = vec![
        tag(SpectralReport::bound(
            "kitaev5.history_energy",
            A,
            Direction::Equal,
            "epsilon/(T'+1)",
            eps / (tp + 1) as f64,
            h.expectation(&eta),
            EXACT_TOL,
        )),
        tag(SpectralReport::bound("kitaev5.ground_upper", A, Direction::Upper, "alpha_hat", threshold, lam, EXACT_TOL)),
    ];
    let m = k.circuit.m();
    if m >= 1 {
        let u = k.guiding_state(false)?;
        out.push(tag(SpectralReport::bound(
            "kitaev5.guiding_overlap",
            A,
            Direction::Equal,
            "M/(T'+1)",
            m as f64 / (tp + 1) as f64,
            u.overlap(&eta).norm_sqr(),
            1e-12,
        )));
    }
    Ok(out)
}

/// The flagged six-local operator's spectrum is `{(α̂+β̂)/2}` joined with `eig(Ĥ5)`.
pub fn kitaev6_suite(k: &Kitaev5Instance, delta: f64, alpha: f64, beta: f64, beta_const: f64) -> Result<Vec<SpectralReport>> {
    let tp = k.t_prime();
    let (ah, bh) = (alpha_hat(alpha, tp), beta_hat(beta, tp, beta_const));
    let h6 = eigvalsh(&k.build_h6(delta, ah, bh)?.assemble()?)?;
    let shift = 0.5 * (ah + bh);
    let mut want = eigvalsh(&k.weighted(delta)?)?;
    want.extend(std::iter::repeat(shift).take(k.dim()));
    want.sort_by(f64::total_cmp);
    let residual = h6.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let r = |x: SpectralReport| {
        x.with_meta("Delta", delta)
            .with_meta("alpha_hat", ah)
            .with_meta("beta_hat", bh)
            .with_meta("beta_hat_const", beta_const)
    };
    Ok(vec![
        r(SpectralReport::bound(
            "kitaev6.block_union",
            A,
            Direction::Equal,
            "eig(H6) = {(alpha_hat+beta_hat)/2} + eig(H5)",
            0.0,
            residual,
            EXACT_TOL,
        )),
        r(SpectralReport::bound(
            "kitaev6.ground",
            A,
            Direction::Equal,
            "min(lambda0(H5), (alpha_hat+beta_hat)/2)",
            want[0],
            h6[0],
            EXACT_TOL,
        )),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{pre_idle, Circuit, Gate};

    fn inst(names: &[&str], m: usize) -> Kitaev5Instance {
        let g = names.iter().map(|n| Gate::named(0, 0, n).unwrap()).collect();
        let c = Circuit::sequential(1, 0, vec![0], g).unwrap();
        Kitaev5Instance::build(&pre_idle(&c, m).unwrap()).unwrap()
    }

    #[test]
    fn accepting_and_rejecting_pass() {
        for names in [&["X"][..], &["H"], &["H", "X"]] {
            let r = kitaev5_suite(&inst(names, 2), 4.0).unwrap();
            assert_eq!(r.len(), 3);
            assert!(r.iter().all(|x| x.passed()), "{r:#?}");
        }
    }

    #[test]
    fn flagged_spectrum_is_a_union() {
        let r = kitaev6_suite(&inst(&["H"], 1), 2.0, 0.9, 0.5, 1.0).unwrap();
        assert!(r.iter().all(|x| x.passed()), "{r:#?}");
    }
}
