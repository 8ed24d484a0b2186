use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;

use threshold_toolkit::critical_channel::{angular_spectrum, resonance_bound};
use threshold_toolkit::grushin_core::run_suite;
use threshold_toolkit::model_setup::{build_lattice, classify_channels, effective_multipole};
use threshold_toolkit::ode::StepControl;
use threshold_toolkit::resolvent_expansion::{default_moduli, fit_leading_law, leading_resolvent, RAY_ANGLE};
use threshold_toolkit::scattering_threshold::{
    closed_form_b, cross_section_curve, levinson_limit, reduced_flow, resonance_law_coefficient, scattering_length,
};
use threshold_toolkit::threshold_classifier::{classify as classify_op, verify_tail, EffectiveOperator, ThresholdCase};

use crate::config::default_system;
use crate::output::{write_csv, write_json};
use crate::{CliError, Context};

#[derive(Serialize)]
struct Tolerance {
    name: &'static str,
    value: f64,
    kind: &'static str,
}

fn tol(name: &'static str, value: f64, kind: &'static str) -> Tolerance {
    Tolerance { name, value, kind }
}

pub fn lattice(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.scenario.system.clone().unwrap_or_else(default_system);
    let sys = cfg.build()?;
    let lat = build_lattice(&sys)?;
    ctx.log(format!("{} cluster decompositions", lat.decompositions.len()));
    let decomps: Vec<_> = lat
        .decompositions
        .iter()
        .map(|d| json!({"label": d.label(), "clusters": d.cluster_count(), "size": d.size, "internal_dim": d.internal_dim}))
        .collect();
    let violations: Vec<_> = lat
        .geometric_violations()
        .iter()
        .map(|&(a, b)| [lat.decompositions[a].label(), lat.decompositions[b].label()])
        .collect();
    let mut report = json!({
        "command": "lattice",
        "system": sys,
        "decompositions": decomps,
        "a_min": lat.decompositions[lat.a_min].label(),
        "a_max": lat.decompositions[lat.a_max].label(),
        "two_cluster": lat.two_cluster().iter().map(|&a| lat.decompositions[a].label()).collect::<Vec<_>>(),
        "geometric_violations": violations,
    });
    if !ctx.scenario.channels.is_empty() {
        let classes = classify_channels(&sys, &ctx.scenario.channels)?;
        let multipoles = ctx
            .scenario
            .channels
            .iter()
            .map(|c| effective_multipole(&sys, c))
            .collect::<Result<Vec<_>, _>>()?;
        report["channel_classes"] = json!(classes);
        report["multipoles"] = json!(multipoles);
    }
    let path = write_json(&ctx.out, "lattice.json", &report)?;
    println!("lattice: {} decompositions, report {}", lat.decompositions.len(), path.display());
    Ok(())
}

pub fn grushin_verify(ctx: &Context, trials: Option<usize>) -> Result<(), CliError> {
    let g = &ctx.scenario.grushin;
    let trials = trials.unwrap_or(g.trials);
    if trials == 0 || g.max_dim < 3 || g.max_rank == 0 || g.z_per_trial == 0 {
        return Err(CliError::Validation("grushin: trials, max_rank and z_per_trial must be positive, max_dim ≥ 3".into()));
    }
    let t0 = std::time::Instant::now();
    let rep = run_suite(ctx.seed, trials, g.max_dim, g.max_rank, g.z_per_trial)?;
    let secs = t0.elapsed().as_secs_f64();
    let pass_identity = rep.max_identity_residual <= g.identity_tol;
    let pass_herglotz = rep.min_herglotz_margin >= -g.herglotz_tol;
    let pass_nilpotent = rep.max_b_cubed <= g.nilpotency_tol;
    let report = json!({
        "command": "grushin-verify",
        "suite": rep,
        "pass": {"identity": pass_identity, "herglotz": pass_herglotz, "nilpotency": pass_nilpotent},
        "tolerances": [
            tol("identity_residual", g.identity_tol, "max relative operator-norm residual"),
            tol("herglotz_margin", g.herglotz_tol, "allowed negative eigenvalue"),
            tol("b_cubed", g.nilpotency_tol, "max operator norm"),
        ],
    });
    let path = write_json(&ctx.out, "grushin_verify.json", &report)?;
    println!("max identity residual: {:.3e}", rep.max_identity_residual);
    println!("min Herglotz margin:   {:.3e}", rep.min_herglotz_margin);
    println!("max ‖B³‖:              {:.3e}", rep.max_b_cubed);
    println!("{} evaluations in {secs:.2}s, report {}", rep.evaluations, path.display());
    if pass_identity && pass_herglotz && pass_nilpotent {
        Ok(())
    } else {
        Err(CliError::Numerical("Grushin suite exceeded its tolerances".into()))
    }
}

fn operator(ctx: &Context) -> Result<EffectiveOperator, CliError> {
    let op = ctx.scenario.operator.build()?;
    ctx.log(format!(
        "operator: {:?}, {} nodes, {} channel(s), sectors {:?}",
        ctx.scenario.operator.kind,
        op.grid.len(),
        op.channels,
        op.sectors
    ));
    Ok(op)
}

pub fn classify(ctx: &Context) -> Result<(), CliError> {
    let op = operator(ctx)?;
    let rep = classify_op(&op)?;
    let mut tails = Vec::new();
    for s in rep.normalized_resonances.iter() {
        tails.push(verify_tail(&op, s)?);
    }
    let s_lnt = if rep.case == ThresholdCase::Regular && op.sectors.contains(&0) {
        Some((0..op.channels).map(|k| scattering_length(&op, k).map(|s| s.components)).collect::<Result<Vec<_>, _>>()?)
    } else {
        None
    };
    let report = json!({
        "command": "classify",
        "case": rep.case,
        "mu": rep.mu,
        "kappa": rep.kappa,
        "report": rep,
        "tail_fits": tails,
        "scattering_length": s_lnt,
        "tolerances": [
            tol("null_cutoff", threshold_toolkit::threshold_classifier::NULL_CUTOFF, "relative singular value of 1 + K"),
            tol("c_rank_cutoff", threshold_toolkit::threshold_classifier::C_RANK_CUTOFF, "absolute singular value of C"),
        ],
    });
    let path = write_json(&ctx.out, "classify.json", &report)?;
    println!("case {:?}, μ = {}, κ = {}, report {}", rep.case, rep.mu, rep.kappa, path.display());
    Ok(())
}

pub fn critical(ctx: &Context) -> Result<(), CliError> {
    let op = ctx.scenario.angular.build();
    let spec = angular_spectrum(&op)?;
    let bound = resonance_bound(&spec);
    let report = json!({
        "command": "critical",
        "n": spec.n,
        "channels": spec.channels,
        "hardy_ok": spec.hardy_ok,
        "sigma_plus": spec.sigma_plus,
        "d_a": spec.d_a,
        "s_a": spec.s_a,
        "spectrum": spec,
        "bound": bound,
        "tolerances": [tol("hardy_limit", -0.25 * (op.n as f64 - 2.0).powi(2), "min μ must exceed this")],
    });
    let path = write_json(&ctx.out, "critical.json", &report)?;
    println!("hardy_ok = {}, d_a = {}, s_a = {}, report {}", spec.hardy_ok, spec.d_a, spec.s_a, path.display());
    Ok(())
}

fn test_vector(op: &EffectiveOperator, ell: usize, power: i32) -> DVector<C64> {
    let n = op.grid.len();
    DVector::from_fn(n * op.channels, |i, _| {
        let r = op.grid.nodes[i % n];
        C64::new(r.powi(ell as i32 + power) * (-r * r).exp(), 0.0)
    })
}

pub fn expand(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.scenario.expand;
    let op = operator(ctx)?;
    let rep = classify_op(&op)?;
    let needs_decay = matches!(rep.case, ThresholdCase::Exceptional2 | ThresholdCase::Exceptional3);
    if needs_decay && cfg.eigen_decay.is_none() {
        return Err(CliError::Validation(format!(
            "case {:?} has threshold eigenvalues; set expand.eigen_decay.t (> 3/2)",
            rep.case
        )));
    }
    let lead = leading_resolvent(&op, &rep, cfg.eigen_decay)?;
    let moduli = cfg.moduli.clone().unwrap_or_else(default_moduli);
    if moduli.len() < 2 || moduli.iter().any(|&m| !(m > 0.0)) {
        return Err(CliError::Validation("expand.moduli needs at least two positive values".into()));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &ell in &op.sectors {
        let f = test_vector(&op, ell, cfg.test_power);
        let fit = fit_leading_law(&op, &lead, ell, &f, &moduli)?;
        ctx.log(format!("ℓ = {ell}: fitted power {:.4} (predicted {})", fit.fitted_power, fit.predicted_power));
        for k in 0..fit.moduli.len() {
            rows.push(vec![
                ell as f64,
                fit.moduli[k],
                fit.norms[k],
                fit.coefficient_errors[k],
                fit.fitted_power,
                fit.predicted_power,
            ]);
        }
        fits.push(fit);
    }
    let within = fits
        .iter()
        .filter(|f| !f.leading_vanishes)
        .all(|f| (f.fitted_power - f.predicted_power).abs() <= cfg.power_tol);
    let csv = write_csv(
        &ctx.out,
        "expand.csv",
        &[
            "ell [1]",
            "z_modulus [energy]",
            "response_norm [L2_-s]",
            "coefficient_error [relative]",
            "fitted_power [1]",
            "predicted_power [1]",
        ],
        &rows,
    )?;
    let report = json!({
        "command": "expand",
        "case": rep.case,
        "mu": rep.mu,
        "kappa": rep.kappa,
        "power": lead.power,
        "ray_angle": RAY_ANGLE,
        "fits": fits,
        "within_tolerance": within,
        "tolerances": [tol("power", cfg.power_tol, "absolute deviation of the fitted power")],
    });
    let path = write_json(&ctx.out, "expand.json", &report)?;
    println!("case {:?}, leading power {}, table {}, report {}", rep.case, lead.power, csv.display(), path.display());
    if within {
        Ok(())
    } else {
        Err(CliError::Numerical("fitted power outside tolerance".into()))
    }
}

pub fn scatter(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.scenario.scatter;
    if cfg.energies.is_empty() || cfg.energies.iter().any(|&e| !(e > 0.0)) {
        return Err(CliError::Validation("scatter.energies must be positive and nonempty".into()));
    }
    let op = operator(ctx)?;
    let rep = classify_op(&op)?;
    let curve = cross_section_curve(&op, cfg.incoming, &cfg.energies, cfg.boundary_value)?;
    let s_lnt = if rep.case == ThresholdCase::Regular { Some(scattering_length(&op, cfg.incoming)?) } else { None };
    let law = if rep.case == ThresholdCase::Exceptional1 {
        Some(resonance_law_coefficient(&op, &rep, cfg.incoming))
    } else {
        None
    };
    let smat = if rep.kappa > 0 { Some(levinson_limit(&op, &rep)?) } else { None };
    let rows: Vec<Vec<f64>> = curve
        .samples
        .iter()
        .map(|s| vec![s.energy, s.sigma, s.energy * s.sigma, s.extrapolation_spread])
        .collect();
    let csv = write_csv(
        &ctx.out,
        "scatter.csv",
        &["energy [energy above threshold]", "sigma [length^2]", "energy_times_sigma [energy*length^2]", "extrapolation_spread [length^2]"],
        &rows,
    )?;
    let report = json!({
        "command": "scatter",
        "case": rep.case,
        "mu": rep.mu,
        "kappa": rep.kappa,
        "boundary_value": cfg.boundary_value,
        "scattering_length": s_lnt,
        "resonance_law_coefficient": law,
        "curve": {"fitted_power": curve.fitted_power, "fitted_coefficient": curve.fitted_coefficient},
        // κ = 0: the threshold limit is the identity.
        "threshold_s_matrix_is_identity": smat.is_none(),
        "threshold_s_matrix": smat.as_ref().map(|m| json!({
            "unitarity_defect": m.unitarity_defect(),
            "maximal": m.maximal,
            "channel_amplitudes": m.channel_amplitudes(),
        })),
        "tolerances": [tol("c_rank_cutoff", threshold_toolkit::threshold_classifier::C_RANK_CUTOFF, "absolute singular value of C")],
    });
    let path = write_json(&ctx.out, "scatter.json", &report)?;
    println!("case {:?}, σ power {:.4}, curve {}, report {}", rep.case, curve.fitted_power, csv.display(), path.display());
    Ok(())
}

pub fn flow(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.scenario.flow;
    if !(cfg.tau_end > 0.0) || !(cfg.rtol > 0.0) || !(cfg.atol > 0.0) || cfg.sample_every < 0.0 {
        return Err(CliError::Validation("flow: tau_end, rtol and atol must be positive".into()));
    }
    let ctl = StepControl { rtol: cfg.rtol, atol: cfg.atol, ..StepControl::default() };
    let traj = reduced_flow(&cfg.initial, cfg.tau_end, &ctl)?;
    let a0 = cfg.initial.a();
    let mut rows = Vec::new();
    let mut next = 0.0;
    for (t, s) in traj.tau.iter().zip(&traj.states) {
        if *t + 1e-12 >= next || *t == cfg.tau_end {
            rows.push(vec![*t, s.b, s.a(), closed_form_b(a0, cfg.initial.rho, cfg.initial.b, *t)]);
            next = t + cfg.sample_every;
        }
    }
    let csv = write_csv(&ctx.out, "flow.csv", &["tau [1]", "b [1]", "a [1]", "closed_form_b [1]"], &rows)?;
    let report = json!({
        "command": "flow",
        "initial": cfg.initial,
        "steps": traj.tau.len(),
        "max_a_drift": traj.max_a_drift,
        "max_closed_form_error": traj.max_closed_form_error,
        "tolerances": [tol("rtol", cfg.rtol, "integrator relative"), tol("atol", cfg.atol, "integrator absolute")],
    });
    let path = write_json(&ctx.out, "flow.json", &report)?;
    println!(
        "a-drift {:.2e}, closed-form error {:.2e}, trajectory {}, report {}",
        traj.max_a_drift,
        traj.max_closed_form_error,
        csv.display(),
        path.display()
    );
    Ok(())
}
