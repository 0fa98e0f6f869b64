//! Experiment drivers. Each writes its tables into the output directory and
//! returns the hard invariants that failed.

use crate::config::{Experiment, Loaded, LoadedState, Mode, RunConfig};
use crate::error::CliError;
use crate::output::Output;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use spinldp_core::chain::Interaction;
use spinldp_core::expansional::{expansional, expansional_identities_check, series_terms, Backend};
use spinldp_core::kernel::operator::op_norm;
use spinldp_core::kernel::spectral::RealSet;
use spinldp_core::kernel::{Interval, LocalOperator};
use spinldp_core::ldp::{
    ensembles_equivalence, ldp_bounds_check, legendre_transform, log_mgf_curve, spectral_measure, ChainState,
    CurveMode, RateCurve,
};
use spinldp_core::models::{random_hermitian_unit, random_positive, random_psd};
use spinldp_core::numeric::linspace;
use spinldp_core::states::{FcsTriple, L_MAX};
use spinldp_core::transfer::{
    build_fcs_operator, build_kms_operator, kms_log_increment, leading_eigen, convergence_diagnostics,
    TruncatedTransferOperator,
};

const POWER_MAX_ITER: usize = 20_000;

pub fn run(l: &Loaded, out: &mut Output) -> Result<Vec<String>, CliError> {
    match l.config.experiment {
        Experiment::Mgf => mgf(l, out, false),
        Experiment::Rate => mgf(l, out, true),
        Experiment::Measure => measure(l, out),
        Experiment::LdpCheck => ldp_check(l, out),
        Experiment::Ensembles => ensembles(l, out),
        Experiment::FcsValidate => fcs_validate(l, out),
        Experiment::ExpansionalValidate => expansional_validate(&l.config, out),
        Experiment::TransferDiagnostics => transfer_diagnostics(l, out),
    }
}

fn chain_state(l: &Loaded) -> ChainState {
    match l.state.as_ref().expect("validated state") {
        LoadedState::Gibbs { psi, beta } => ChainState::Gibbs { psi: psi.clone(), beta: *beta },
        LoadedState::Fcs(t) | LoadedState::UncheckedFcs(t) => ChainState::Fcs(t.clone()),
    }
}

fn observable(l: &Loaded) -> &Interaction {
    l.observable.as_ref().expect("validated observable")
}

fn curve_mode(c: &RunConfig) -> CurveMode {
    match c.grid.mode {
        Mode::Direct => CurveMode::Direct,
        Mode::Increments => CurveMode::Increments,
        Mode::Transfer => CurveMode::Transfer { window: c.grid.window, margin: c.grid.margin },
    }
}

fn alpha_grid(c: &RunConfig) -> Vec<f64> {
    linspace(c.grid.alpha_min, c.grid.alpha_max, c.grid.alpha_steps)
}

fn curve(l: &Loaded) -> Result<RateCurve, CliError> {
    let c = &l.config;
    Ok(log_mgf_curve(&chain_state(l), observable(l), &alpha_grid(c), &c.grid.n, curve_mode(c))?)
}

fn curve_invariants(c: &RunConfig, curve: &RateCurve, failures: &mut Vec<String>) {
    if let Some(i) = curve.alpha_grid.iter().position(|a| a.abs() < 1e-12) {
        let f0 = curve.f_values[i];
        if f0.abs() > c.tolerances.normalization {
            failures.push(format!("f(0) = {f0:e} exceeds {:e}", c.tolerances.normalization));
        }
    }
    let v = curve.convexity_violation();
    if v > c.tolerances.convexity {
        failures.push(format!("f is not convex: second difference {:e} below zero", -v));
    }
}

fn mgf(l: &Loaded, out: &mut Output, with_rate: bool) -> Result<Vec<String>, CliError> {
    let c = &l.config;
    let curve = curve(l)?;
    out.csv("mgf.csv", &["alpha", "f", "f_err"], curve.f_rows().map(|(a, f, e)| vec![a.into(), f.into(), e.into()]))?;
    let mut failures = Vec::new();
    curve_invariants(c, &curve, &mut failures);
    if with_rate && failures.is_empty() {
        let rate = legendre_transform(&curve)?;
        out.csv("rate.csv", &["x", "I"], rate.i_rows().map(|(x, i)| vec![x.into(), i.into()]))?;
        let min = rate.i_values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -c.tolerances.normalization {
            failures.push(format!("rate function is negative: {min:e}"));
        }
        let at_mean = rate.rate_at(rate.mean());
        if !(at_mean.abs() <= c.tolerances.normalization) {
            failures.push(format!("I(f'(0)) = {at_mean:e} is not zero"));
        }
        println!("rate: mean {:.12}, slope range [{:.6}, {:.6}]", rate.mean(), rate.slope_range().0, rate.slope_range().1);
    }
    println!("mgf: {} points, max error estimate {:e}", curve.alpha_grid.len(), max_finite(&curve.f_err));
    Ok(failures)
}

fn max_finite(v: &[f64]) -> f64 {
    v.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max)
}

fn measure(l: &Loaded, out: &mut Output) -> Result<Vec<String>, CliError> {
    let c = &l.config;
    let state = chain_state(l);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &c.grid.n {
        let m = spectral_measure(&state, observable(l), n)?;
        let total = m.total_mass();
        if (total - 1.0).abs() > c.tolerances.mass {
            failures.push(format!("weights at n = {n} sum to {total}"));
        }
        println!("measure: n = {n}, {} atoms, mean {:.12}", m.atoms.len(), m.mean());
        rows.extend(m.rows().map(|(n, x, w)| vec![n.into(), x.into(), w.into()]));
    }
    out.csv("measure.csv", &["n", "x", "weight"], rows)?;
    Ok(failures)
}

fn ldp_check(l: &Loaded, out: &mut Output) -> Result<Vec<String>, CliError> {
    let c = &l.config;
    let mut failures = Vec::new();
    let curve = curve(l)?;
    curve_invariants(c, &curve, &mut failures);
    if !failures.is_empty() {
        return Ok(failures);
    }
    let rate = legendre_transform(&curve)?;
    let state = chain_state(l);
    let measures = c
        .grid
        .n
        .iter()
        .map(|&n| spectral_measure(&state, observable(l), n))
        .collect::<Result<Vec<_>, _>>()?;
    let sets: Vec<RealSet> = c.ldp_check.as_ref().unwrap().intervals.iter().map(|[a, b]| RealSet::closed(*a, *b)).collect();
    let report = ldp_bounds_check(&measures, &rate, &sets)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for r in &report.intervals {
        for row in &r.rows {
            rows.push(vec![
                r.lo.into(),
                r.hi.into(),
                row.n.into(),
                row.mass.into(),
                row.log_rate.into(),
                r.neg_inf_rate.into(),
                row.discrepancy.into(),
                row.slack.into(),
            ]);
        }
        summary.push(vec![
            r.lo.into(),
            r.hi.into(),
            r.neg_inf_rate.into(),
            r.mass_vanished_at.map_or(String::new(), |n| n.to_string()).into(),
            r.upper_bound_holds.into(),
            r.discrepancy_decreasing.into(),
        ]);
        if !r.upper_bound_holds {
            failures.push(format!("upper bound fails on [{}, {}]", r.lo, r.hi));
        }
        let last = r.rows.last().unwrap();
        println!(
            "ldp-check: [{}, {}] n = {}: (1/n) log mass {:.6}, -inf I {:.6}, discrepancy {:.6}, decreasing {}",
            r.lo, r.hi, last.n, last.log_rate, r.neg_inf_rate, last.discrepancy, r.discrepancy_decreasing
        );
    }
    out.csv(
        "bounds.csv",
        &["lo", "hi", "n", "mass", "log_rate", "neg_inf_rate", "discrepancy", "slack"],
        rows,
    )?;
    out.csv(
        "bounds_summary.csv",
        &["lo", "hi", "neg_inf_rate", "mass_vanished_at", "upper_bound_holds", "discrepancy_decreasing"],
        summary,
    )?;
    Ok(failures)
}

fn ensembles(l: &Loaded, out: &mut Output) -> Result<Vec<String>, CliError> {
    let c = &l.config;
    let spec = c.ensembles.as_ref().unwrap();
    let r = ensembles_equivalence(&l.ensemble_observables, &spec.lambdas, &spec.x, spec.delta, &c.grid.n)?;
    let rows = r.rows.iter().map(|row| {
        vec![
            row.n.into(),
            row.log_window_trace.into(),
            row.h_mc.into(),
            row.canonical_entropy.into(),
            row.gap.into(),
            row.tail_mass.into(),
            row.entropy_tail.into(),
            row.exact_window.into(),
        ]
    });
    out.csv(
        "ensembles.csv",
        &["n", "log_window_trace", "h_mc", "canonical_entropy", "gap", "tail_mass", "entropy_tail", "exact_window"],
        rows,
    )?;
    let mut moments = Vec::new();
    for row in &r.rows {
        for (k, m) in row.window_moments.iter().enumerate() {
            for (p, v) in m.iter().enumerate() {
                moments.push(vec![row.n.into(), format!("x{k}").into(), (p + 1).into(), (*v).into()]);
            }
        }
        for (p, v) in row.entropy_moments.iter().enumerate() {
            moments.push(vec![row.n.into(), "entropy".to_string().into(), (p + 1).into(), (*v).into()]);
        }
    }
    out.csv("ensembles_moments.csv", &["n", "variable", "degree", "moment"], moments)?;
    out.json(
        "ensembles.json",
        &json!({
            "tail_fit": r.tail_fit,
            "tail_rate": r.tail_rate,
            "gap_shrinks": r.gap_shrinks,
            "exact_windows": r.exact_windows(),
            "moment_degree": r.moment_degree,
        }),
    )?;
    let mut failures = Vec::new();
    if !r.gap_shrinks {
        failures.push("entropy gap does not shrink with the volume".to_string());
    }
    if !(r.tail_rate > 0.0) {
        failures.push(format!("tail mass does not decay exponentially: fitted rate {}", r.tail_rate));
    }
    if !r.exact_windows() {
        println!("ensembles: observables do not commute; window traces use the product-of-projections surrogate");
    }
    let last = r.rows.last().unwrap();
    println!("ensembles: N = {}: H_mc {:.6}, canonical {:.6}, gap {:.6}, tail rate {:.4}", last.n, last.h_mc, last.canonical_entropy, last.gap, r.tail_rate);
    Ok(failures)
}

fn fcs_validate(l: &Loaded, out: &mut Output) -> Result<Vec<String>, CliError> {
    let c = &l.config;
    let t: &FcsTriple = match l.state.as_ref().unwrap() {
        LoadedState::Fcs(t) | LoadedState::UncheckedFcs(t) => t,
        LoadedState::Gibbs { .. } => unreachable!("validated as fcs"),
    };
    let v = t.violations()?;
    let tol = c.tolerances.triple;
    let mut failures = Vec::new();
    for (name, value) in [("unitality", v.unitality), ("invariance", v.invariance), ("normalization", v.normalization)] {
        println!("fcs-validate: {name} violation {value:e}");
        if value > tol {
            failures.push(format!("{name} violation {value:e} exceeds {tol:e}"));
        }
    }
    if !(v.min_rho > 0.0) {
        failures.push(format!("rho is not faithful: smallest eigenvalue {:e}", v.min_rho));
    }
    let spectrum = t.channel_spectrum()?;
    let moduli: Vec<f64> = spectrum.eigenvalues.iter().map(|z| z.norm()).collect();
    let mut report = json!({
        "violations": {
            "unitality": v.unitality,
            "invariance": v.invariance,
            "normalization": v.normalization,
            "min_rho": v.min_rho,
        },
        "eigenvalue_moduli": moduli,
        "second_modulus": spectrum.second_modulus,
    });
    if failures.is_empty() {
        match t.primitivity_reduce(L_MAX) {
            Ok(p) => {
                let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
                let mut worst = f64::NEG_INFINITY;
                let mut count = 0;
                for _ in 0..c.fcs_validate.cone_samples {
                    let x = random_psd(&mut rng, t.bond_dim());
                    let w = t.cone_violation(p.l, p.s, &x)?;
                    worst = worst.max(w);
                    if w > tol {
                        count += 1;
                    }
                }
                println!("fcs-validate: l = {}, s = {:.6}, cone violations {count}/{}", p.l, p.s, c.fcs_validate.cone_samples);
                if count > 0 {
                    failures.push(format!("{count} sandwich violations, worst {worst:e}"));
                }
                report["primitivity"] = json!({
                    "l": p.l,
                    "s": p.s,
                    "inf_ratio": p.inf_ratio,
                    "sup_ratio": p.sup_ratio,
                    "cone_samples": c.fcs_validate.cone_samples,
                    "cone_violations": count,
                    "worst_cone_violation": worst,
                });
            }
            Err(e) => {
                failures.push(e.to_string());
                report["primitivity"] = json!({ "error": e.to_string() });
            }
        }
    }
    out.json("fcs_validate.json", &report)?;
    Ok(failures)
}

fn expansional_validate(c: &RunConfig, out: &mut Output) -> Result<Vec<String>, CliError> {
    let spec = &c.expansional;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let window = Interval::new(0, spec.sites as i64 - 1);
    let dim = spec.site_dim.pow(spec.sites as u32);
    let mut rows = Vec::new();
    let (mut worst_series, mut worst_identity): (f64, f64) = (0.0, 0.0);
    for k in 0..spec.samples {
        let mut draw = || LocalOperator::new(random_hermitian_unit(&mut rng, dim), window, spec.site_dim);
        let (q, h, q2, probe) = (draw()?, draw()?, draw()?, draw()?);
        let closed = expansional(&q, &h, Backend::ClosedForm)?;
        let s = series_terms(&q, &h, spec.terms)?;
        let series = op_norm(&(s.partial_sums.last().unwrap() - closed.matrix()));
        let (r1, r2) = expansional_identities_check(&q, &q2, &h, &probe, Backend::ClosedForm)?;
        worst_series = worst_series.max(series);
        worst_identity = worst_identity.max(r1).max(r2);
        rows.push(vec![k.into(), series.into(), s.remainder_bound.into(), r1.into(), r2.into()]);
    }
    out.csv(
        "expansional.csv",
        &["sample", "series_residual", "remainder_bound", "product_rule", "intertwining"],
        rows,
    )?;
    println!("expansional-validate: worst series residual {worst_series:e}, worst identity residual {worst_identity:e}");
    let mut failures = Vec::new();
    if worst_series > c.tolerances.series {
        failures.push(format!("series residual {worst_series:e} exceeds {:e}", c.tolerances.series));
    }
    if worst_identity > c.tolerances.identity {
        failures.push(format!("identity residual {worst_identity:e} exceeds {:e}", c.tolerances.identity));
    }
    Ok(failures)
}

fn transfer_operator(l: &Loaded, alpha: f64) -> Result<TruncatedTransferOperator, CliError> {
    let g = &l.config.grid;
    let phi = observable(l);
    Ok(match l.state.as_ref().unwrap() {
        LoadedState::Gibbs { psi, beta } => build_kms_operator(psi, phi, *beta, alpha, g.window, g.margin)?,
        LoadedState::Fcs(t) | LoadedState::UncheckedFcs(t) => build_fcs_operator(t, phi, alpha, g.window, g.margin)?,
    })
}

fn transfer_diagnostics(l: &Loaded, out: &mut Output) -> Result<Vec<String>, CliError> {
    let c = &l.config;
    let spec = &c.transfer;
    let op = transfer_operator(l, spec.alpha)?;
    let lead = leading_eigen(&op, c.tolerances.power, POWER_MAX_ITER)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let probes: Vec<_> = (0..spec.probes).map(|_| random_positive(&mut rng, op.dim())).collect();
    let d = convergence_diagnostics(&op, &lead, &probes, spec.steps, spec.fit_from..=spec.steps)?;
    let mut rows = Vec::new();
    for (k, p) in d.probes.iter().enumerate() {
        for (step, decay) in p.decay.iter().enumerate() {
            let k_ratio = p.k_ratios.get(step).copied().unwrap_or(f64::NAN);
            rows.push(vec![k.into(), (step + 1).into(), (*decay).into(), k_ratio.into()]);
        }
    }
    out.csv("transfer.csv", &["probe", "step", "decay", "k_ratio"], rows)?;
    let growth = match l.state.as_ref().unwrap() {
        LoadedState::Gibbs { .. } => kms_log_increment(lead.lambda, op.site_dim),
        _ => lead.lambda.ln(),
    };
    let fits: Vec<_> = d.probes.iter().map(|p| p.fit).collect();
    out.json(
        "transfer.json",
        &json!({
            "kind": op.kind,
            "alpha": spec.alpha,
            "window": c.grid.window,
            "effective_margin": op.effective_margin,
            "lambda": lead.lambda,
            "log_growth": growth,
            "residual": lead.residual,
            "iterations": lead.iterations,
            "min_eigenvalue": lead.min_eigenvalue,
            "gap_estimate": lead.gap_estimate,
            "probe_fits": fits,
        }),
    )?;
    println!(
        "transfer-diagnostics: lambda {:.12}, residual {:e}, iterations {}, gap estimate {:.4}",
        lead.lambda, lead.residual, lead.iterations, lead.gap_estimate
    );
    let mut failures = Vec::new();
    if !(lead.min_eigenvalue > 0.0) {
        failures.push(format!("leading eigenvector is not positive definite: {:e}", lead.min_eigenvalue));
    }
    Ok(failures)
}
