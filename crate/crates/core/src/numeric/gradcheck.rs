//! Central finite-difference check of tape gradients.

use crate::error::{Error, Result};
use crate::numeric::params::ParamSet;
use crate::numeric::tape::{Bound, Tape, Var};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Maximum relative error.
    pub tolerance: f64,
    /// Maximum absolute error where the analytic gradient is below `abs_threshold`.
    pub abs_tolerance: f64,
    pub abs_threshold: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            abs_tolerance: 1e-7,
            abs_threshold: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockReport {
    pub name: String,
    pub elements: usize,
    /// Largest relative error over elements with analytic magnitude ≥ threshold.
    pub max_rel_error: f64,
    /// Largest absolute error over elements under the absolute fallback.
    pub max_abs_error: f64,
    pub fallback_elements: usize,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_abs_error).fold(0.0, f64::max)
    }
}

fn evaluate<F>(loss_fn: &F, params: &ParamSet) -> Result<f64>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = tape.bind(params);
    let loss = loss_fn(&mut tape, &bound)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss = {value}")));
    }
    Ok(value)
}

/// Compare tape gradients of `loss_fn` against central differences, one
/// parameter element at a time. `params` is restored before returning.
pub fn grad_check<F>(loss_fn: F, params: &mut ParamSet, config: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    if config.step <= 0.0 {
        return Err(Error::Domain("finite-difference step must be positive".into()));
    }
    let analytic = {
        let mut tape = Tape::new();
        let bound = tape.bind(params);
        let loss = loss_fn(&mut tape, &bound)?;
        tape.backward(loss, params)?
    };

    let ids: Vec<_> = params.ids().collect();
    let mut blocks = Vec::with_capacity(ids.len());
    for id in ids {
        let n = params.get(id).len();
        let mut block = BlockReport {
            name: params.name(id).to_string(),
            elements: n,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            fallback_elements: 0,
            passed: true,
        };
        for i in 0..n {
            let original = params.get(id).data()[i];
            params.get_mut(id).data_mut()[i] = original + config.step;
            let plus = evaluate(&loss_fn, params);
            params.get_mut(id).data_mut()[i] = original - config.step;
            let minus = evaluate(&loss_fn, params);
            params.get_mut(id).data_mut()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * config.step);

            let a = analytic.get(id).data()[i];
            let diff = (a - numeric).abs();
            if a.abs() < config.abs_threshold {
                block.fallback_elements += 1;
                block.max_abs_error = block.max_abs_error.max(diff);
                if diff >= config.abs_tolerance {
                    block.passed = false;
                }
            } else {
                let rel = diff / a.abs().max(numeric.abs());
                block.max_rel_error = block.max_rel_error.max(rel);
                if rel >= config.tolerance {
                    block.passed = false;
                }
            }
        }
        blocks.push(block);
    }
    Ok(GradCheckReport { blocks })
}
