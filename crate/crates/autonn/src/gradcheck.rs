//! Central finite-difference gradient checks.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::params::Params;
use crate::tape::{Tape, Var};

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// Relative error `|ad - fd| / |fd|` over the sampled coordinates.
    pub rel_error: f64,
    pub coords: usize,
    pub fd_norm: f64,
}

/// Compare reverse-mode gradients of `loss` with central differences on up
/// to `max_coords` randomly chosen parameter coordinates.
pub fn check<F>(params: &Params, loss: F, max_coords: usize, rng: &mut impl Rng) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |p: &Params| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = p.vars(&mut tape);
        let l = loss(&mut tape, &vars)?;
        Ok(tape.scalar(l))
    };
    let mut tape = Tape::new();
    let vars = params.vars(&mut tape);
    let l = loss(&mut tape, &vars)?;
    let grads = tape.backward(l)?.params(&params.lens());

    let coords: Vec<(usize, usize)> =
        params.tensors.iter().enumerate().flat_map(|(i, t)| (0..t.len()).map(move |j| (i, j))).collect();
    let picked: Vec<usize> = if coords.len() <= max_coords {
        (0..coords.len()).collect()
    } else {
        sample(rng, coords.len(), max_coords).into_vec()
    };
    let mut p = params.clone();
    let (mut diff, mut norm) = (0.0, 0.0);
    for &c in &picked {
        let (i, j) = coords[c];
        let orig = p.tensors[i].data()[j];
        p.tensors[i].data_mut()[j] = orig + STEP;
        let up = eval(&p)?;
        p.tensors[i].data_mut()[j] = orig - STEP;
        let down = eval(&p)?;
        p.tensors[i].data_mut()[j] = orig;
        let fd = (up - down) / (2.0 * STEP);
        diff += (fd - grads[i][j]).powi(2);
        norm += fd * fd;
    }
    let fd_norm = norm.sqrt();
    let rel_error = if fd_norm > 0.0 { diff.sqrt() / fd_norm } else { diff.sqrt() };
    Ok(GradCheck { rel_error, coords: picked.len(), fd_norm })
}
