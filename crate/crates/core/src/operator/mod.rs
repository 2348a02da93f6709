//! The radial averaging operator `T_ω`, its nontangential variant, norms of
//! fields, and norm lower bounds from test families.

mod apply;
mod field;
mod maximal;
mod norms;

pub use apply::{
    apply_t, apply_tn, default_lambda_grid, extremal_fr, lambda_rt, level_set_measure, lp_norm, nontangential_max,
    weak_quasinorm, GAMMA_RADII,
};
pub use field::{Degeneracy, FieldKind, RadialFn, RadialFunctionField, StepRect};
pub use maximal::{radial_maximal_check, ray_sides, RadialMaximalCheck, RaySides, STABILITY_TOL};
pub use norms::{
    default_rt_grid, estimate_strong_norm, estimate_weak_norm, kernel_ratio, muckenhoupt_ratio, random_step_rects,
    step_ratio, weak_pipeline_value, NormEstimate, NormKind, TestFamily, KERNEL_RADII,
};

/// `p (p-1)^{(1-p)/p}`: the upper bracket `‖T_ω‖ ≤ p (p-1)^{(1-p)/p} M_p`.
pub fn strong_norm_bracket(p: f64) -> f64 {
    p * (p - 1.0).powf((1.0 - p) / p)
}
