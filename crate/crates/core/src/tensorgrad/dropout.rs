use ndarray::{Array1, Array2};
use rand::Rng;

use super::SeededRng;
use crate::error::{invalid, Result};

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(invalid(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

/// Inverted-dropout multipliers: 0 with probability `rate`, else `1 / (1 − rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut SeededRng) -> Result<Array2<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(Array2::ones((rows, cols)));
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    }))
}

/// Identity outside training mode or at rate 0.
pub fn dropout(x: &Array1<f64>, rate: f64, train_mode: bool, rng: &mut SeededRng) -> Result<Array1<f64>> {
    check_rate(rate)?;
    if !train_mode || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(1, x.len(), rate, rng)?;
    Ok(x * &mask.row(0))
}
