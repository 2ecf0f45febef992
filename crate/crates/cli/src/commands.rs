use std::path::{Path, PathBuf};

use condprep_core::acceptance::{self, Fixture, Outcome};
use condprep_core::analysis::steady_state_verdict_with;
use condprep_core::designer::{feedback_gain, synthesize};
use condprep_core::simulator::{covariance_series, simulate_conditional};
use condprep_core::{Feedback, SolveOptions, SystemSpec};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{self, artifact, Csv};
use crate::report;
use crate::scenario::{FeedbackPlan, Scenario, SystemBlock};

/// Settings shared by every subcommand.
pub struct Context {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub strict: bool,
}

impl Context {
    fn options(&self) -> SolveOptions {
        SolveOptions { strict: self.strict }
    }
}

fn check_eta(eta: f64) -> Result<f64, CliError> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(eta)
    } else {
        Err(CliError::Config(format!("eta must lie in (0, 1], got {eta}")))
    }
}

/// The scenario's system, synthesizing it first when only a target is given.
fn resolve_system(sc: &Scenario, ctx: &Context) -> Result<SystemSpec, CliError> {
    if let Some(eta) = ctx.eta {
        check_eta(eta)?;
    }
    match (&sc.system, &sc.design) {
        (Some(sys), _) => sys.to_spec(ctx.eta),
        (None, Some(des)) => {
            let res = synthesize(&des.to_request()?)?;
            match ctx.eta {
                Some(eta) => Ok(res.spec.with_eta(eta)?),
                None => Ok(res.spec),
            }
        }
        (None, None) => unreachable!("validated on load"),
    }
}

pub fn analyze(sc: &Scenario, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let spec = resolve_system(sc, ctx)?;
    let mut etas = vec![spec.eta()];
    for &eta in &sc.eta_sweep {
        check_eta(eta)?;
        if !etas.contains(&eta) {
            etas.push(eta);
        }
    }
    let mut reports = Vec::with_capacity(etas.len());
    for &eta in &etas {
        let rep = steady_state_verdict_with(&spec.with_eta(eta)?, ctx.options())?;
        eprintln!(
            "eta {eta}: purity {:.6}, closed loop stable {}, riccati residual {:.2e}",
            rep.purity(),
            rep.closed_loop_stable,
            rep.solution.residual
        );
        reports.push(report::steady_state(&rep));
    }
    let doc = json!({
        "name": sc.name,
        "modes": spec.modes(),
        "strict": ctx.strict,
        "reports": reports,
    });
    let path = artifact(&ctx.out, &sc.name, "analysis.json");
    output::write_json(&path, &doc)?;
    Ok(vec![path])
}

pub fn design(sc: &Scenario, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let des = sc
        .design
        .as_ref()
        .ok_or_else(|| CliError::Config("the design command needs a 'design' block".into()))?;
    let res = synthesize(&des.to_request()?)?;
    eprintln!(
        "designed {}-mode system: rank margin {:.3e}, round-trip error {:.3e}",
        res.spec.modes(),
        res.rank_margin,
        res.relative_error
    );
    let design_path = artifact(&ctx.out, &sc.name, "design.json");
    output::write_json(&design_path, &report::design(&sc.name, &res))?;

    let system = Scenario {
        name: sc.name.clone(),
        system: Some(SystemBlock::from_spec(&res.spec)),
        design: None,
        sim: sc.sim.clone(),
        outputs: sc.outputs.clone(),
        eta_sweep: sc.eta_sweep.clone(),
    };
    let system_path = artifact(&ctx.out, &sc.name, "system.json");
    let value = serde_json::to_value(&system).map_err(|e| CliError::Io(e.to_string()))?;
    output::write_json(&system_path, &value)?;
    Ok(vec![design_path, system_path])
}

pub fn simulate(sc: &Scenario, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let sim = sc
        .sim
        .as_ref()
        .ok_or_else(|| CliError::Config("the simulate command needs a 'sim' block".into()))?;
    let spec = resolve_system(sc, ctx)?;
    let feedback = match sim.feedback_plan(spec.modes())? {
        FeedbackPlan::None => Feedback::None,
        FeedbackPlan::TimeVarying => Feedback::MarkovianTimeVarying,
        FeedbackPlan::Explicit { b, f } => Feedback::Markovian { b, f },
        FeedbackPlan::SteadyGain => {
            let rep = steady_state_verdict_with(&spec.with_eta(1.0)?, ctx.options())?;
            let gain = feedback_gain(&rep.covariance, &spec.derive()?);
            Feedback::Markovian { b: gain.b, f: gain.f }
        }
    };
    let mut cfg = sim.to_config(ctx.seed, spec.eta(), feedback)?;
    cfg.keep_trajectories = sc.wants("trajectories");
    let n = spec.dim();

    let series = covariance_series(&spec, &cfg)?;
    let mut cov = Csv::new(&header(&[output::matrix_columns("V", n, n)]));
    for (t, v) in series.times.iter().zip(&series.covs) {
        let mut row = vec![output::fmt_f64(*t)];
        output::push_matrix(&mut row, v);
        cov.row(&row);
    }

    let run = simulate_conditional(&spec, &cfg)?;
    let mut ens = Csv::new(&header(&[
        output::vector_columns("mean", n),
        output::vector_columns("mean_se", n),
        output::matrix_columns("Sigma", n, n),
        output::matrix_columns("Sigma_se", n, n),
        output::matrix_columns("Vc", n, n),
        output::matrix_columns("Vunc", n, n),
    ]));
    for s in &run.stats {
        let mut row = vec![output::fmt_f64(s.t)];
        row.extend(s.mean_of_means.iter().map(|x| output::fmt_f64(*x)));
        row.extend(s.mean_se.iter().map(|x| output::fmt_f64(*x)));
        for m in [&s.sigma, &s.sigma_se, &s.vc, &s.vunc] {
            output::push_matrix(&mut row, m);
        }
        ens.row(&row);
    }

    let mut paths = Vec::new();
    let p = artifact(&ctx.out, &sc.name, "covariance.csv");
    cov.write(&p)?;
    paths.push(p);
    let p = artifact(&ctx.out, &sc.name, "ensemble.csv");
    ens.write(&p)?;
    paths.push(p);

    if cfg.keep_trajectories {
        let mut cols = vec!["t".to_string(), "trajectory".to_string()];
        cols.extend(output::vector_columns("x", n));
        let mut tr = Csv::new(&cols);
        for (k, traj) in run.trajectories.iter().enumerate() {
            for (t, x) in traj.times.iter().zip(&traj.means) {
                let mut row = vec![output::fmt_f64(*t), k.to_string()];
                row.extend(x.iter().map(|v| output::fmt_f64(*v)));
                tr.row(&row);
            }
        }
        let p = artifact(&ctx.out, &sc.name, "trajectories.csv");
        tr.write(&p)?;
        paths.push(p);
    }

    // V_unc is the open-loop ensemble covariance, so the decomposition
    // V_c + Sigma = V_unc is only meaningful without feedback.
    let open_loop = cfg.feedback == Feedback::None;
    let worst = run.stats.iter().skip(1).map(|s| s.identity_residual()).fold(0.0, f64::max);
    let fin = run.final_stats();
    if open_loop {
        eprintln!(
            "{} trajectories to T = {}: identity residual {:.3e} at T, worst {:.3e}",
            fin.n_traj,
            fin.t,
            fin.identity_residual(),
            worst
        );
    } else {
        eprintln!("{} trajectories to T = {} under {} feedback", fin.n_traj, fin.t, run.feedback);
    }
    let mut final_stats = report::ensemble(fin);
    if !open_loop {
        final_stats["identity_residual"] = Value::Null;
    }
    let summary = json!({
        "name": sc.name,
        "eta": run.eta,
        "feedback": run.feedback,
        "dt": cfg.dt,
        "T": cfg.t_final,
        "n_traj": cfg.n_traj,
        "seed": cfg.seed,
        "worst_identity_residual": open_loop.then_some(worst),
        "final": final_stats,
    });
    let p = artifact(&ctx.out, &sc.name, "summary.json");
    output::write_json(&p, &summary)?;
    paths.push(p);
    Ok(paths)
}

fn header(groups: &[Vec<String>]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for g in groups {
        h.extend(g.iter().cloned());
    }
    h
}

pub fn verify(fixture: Fixture, only: &[u8], out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let outcomes: Vec<Outcome> = if only.is_empty() {
        acceptance::run_all(fixture)
    } else {
        let mut ids = only.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut baseline = None;
        let mut v = Vec::new();
        for id in ids {
            v.push(match id {
                1 => acceptance::criterion_1(fixture),
                2 => acceptance::criterion_2(),
                3 => acceptance::criterion_3(),
                4 => acceptance::criterion_4(),
                5 => acceptance::criterion_5(),
                6 => {
                    let (o, run) = acceptance::criterion_6_run();
                    baseline = run;
                    o
                }
                7 => acceptance::criterion_7(),
                8 => acceptance::criterion_8(),
                9 => acceptance::criterion_9(),
                10 => acceptance::criterion_10(baseline.as_ref()),
                other => return Err(CliError::Config(format!("no acceptance criterion {other}"))),
            });
        }
        v
    };
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let doc = json!({
        "fixture": format!("{fixture:?}"),
        "criteria": outcomes.iter().map(|o| json!({
            "id": o.id,
            "name": o.name,
            "passed": o.passed,
            "detail": o.detail,
            "elapsed_s": o.elapsed.as_secs_f64(),
            "budget_s": o.budget.as_secs_f64(),
        })).collect::<Vec<_>>(),
        "failed": failed,
    });
    let path = out.join("verify.json");
    output::write_json(&path, &doc)?;
    if failed > 0 {
        return Err(CliError::Verify(failed));
    }
    Ok(vec![path])
}
