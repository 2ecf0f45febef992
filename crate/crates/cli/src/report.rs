//! JSON views of core results.

use condprep_core::analysis::PurityReport;
use condprep_core::designer::DesignResult;
use condprep_core::simulator::EnsembleStats;
use condprep_core::{CMat, Certificate, RMat, RVec, SteadyStateReport};
use condprep_core::Complex64;
use serde_json::{json, Value};

pub fn matrix(m: &RMat) -> Value {
    json!((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

pub fn vector(v: &RVec) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn complex(z: &Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn complex_list(zs: &[Complex64]) -> Value {
    Value::Array(zs.iter().map(complex).collect())
}

fn complex_matrix(m: &CMat) -> Value {
    json!({"re": matrix(&m.map(|z| z.re)), "im": matrix(&m.map(|z| z.im))})
}

pub fn certificate(c: &Certificate) -> Value {
    json!({
        "verdict": c.verdict,
        "margin": c.margin,
        "witness": c.witness.as_ref().map(|w| json!({
            "eigenvalue": complex(&w.eigenvalue),
            "vector": complex_list(w.vector.as_slice()),
        })),
    })
}

fn purity(p: &PurityReport) -> Value {
    json!({"verdict": p.verdict, "purity": p.purity, "residual": p.residual})
}

pub fn steady_state(r: &SteadyStateReport) -> Value {
    let s = &r.solution;
    json!({
        "eta": r.eta,
        "detectable": certificate(&r.detectable),
        "detectable_injected": certificate(&r.detectable_injected),
        "V": matrix(&r.covariance),
        "heisenberg": certificate(&r.heisenberg),
        "pure": purity(&r.pure),
        "closed_loop_eigenvalues": complex_list(&r.closed_loop_eigs),
        "closed_loop_stable": r.closed_loop_stable,
        "feedback_eigenvalues": complex_list(&r.feedback_eigs),
        "feedback_stable": r.feedback_stable,
        "riccati": {
            "residual": s.residual,
            "raw_asymmetry": s.raw_asymmetry,
            "subspace_condition": s.subspace_condition,
            "ill_conditioned": s.ill_conditioned,
            "hamiltonian_spectrum": complex_list(&s.hamiltonian_spectrum),
        },
        "unconditional_pure_residuals": {
            "coupling": r.unconditional_pure.coupling,
            "hamiltonian": r.unconditional_pure.hamiltonian,
        },
        "unconditional": r.unconditional.as_ref().map(|u| json!({
            "V_unc": matrix(&u.v_unc),
            "min_eig_gap": u.min_eig_gap,
        })),
        "complex_form": r.complex_form.as_ref().map(|c| json!({
            "deviation": c.deviation,
            "min_eig": c.min_eig,
            "residual": c.residual,
        })),
    })
}

pub fn design(name: &str, res: &DesignResult) -> Value {
    json!({
        "name": name,
        "G": matrix(res.spec.g()),
        "Lambda": complex_matrix(res.spec.lambda()),
        "K": complex_matrix(res.spec.drive()),
        "feedback": {
            "B": matrix(&res.feedback.b),
            "F": matrix(&res.feedback.f),
        },
        "rank_margin": res.rank_margin,
        "relative_error": res.relative_error,
        "substitution_residual": res.substitution_residual,
        "verification": steady_state(&res.verification),
    })
}

pub fn ensemble(s: &EnsembleStats) -> Value {
    json!({
        "t": s.t,
        "n_traj": s.n_traj,
        "mean": vector(&s.mean_of_means),
        "mean_se": vector(&s.mean_se),
        "Sigma": matrix(&s.sigma),
        "Sigma_se": matrix(&s.sigma_se),
        "V_c": matrix(&s.vc),
        "V_unc": matrix(&s.vunc),
        "identity_residual": s.identity_residual(),
    })
}
