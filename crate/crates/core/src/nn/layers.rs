use rand::Rng;

use crate::error::Result;
use crate::tensor::{Tape, Tensor, Var};

/// Kaiming-uniform weights: U(−b, b) with b = √(6 / fan_in).
pub fn kaiming_uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}

/// `input · weights + bias` on the tape.
pub fn linear(tape: &mut Tape, input: Var, weights: Var, bias: Var) -> Result<Var> {
    let product = tape.matmul(input, weights)?;
    tape.add_row_bias(product, bias)
}

/// Eager fully-connected layer: N×d_in · d_in×d_out + bias.
pub fn linear_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (x, w, b) = (
        tape.constant(input.clone()),
        tape.constant(weights.clone()),
        tape.constant(bias.clone()),
    );
    let out = linear(&mut tape, x, w, b)?;
    Ok(tape.value(out).clone())
}
