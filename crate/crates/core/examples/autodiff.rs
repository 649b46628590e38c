//! Reverse-mode differentiation on the tape, checked against central
//! finite differences.

use mdmt::tensor::{finite_diff_grad, max_relative_error, Tape, Tensor};

/// loss = sum(softmax(x · w))
fn loss_and_grad(x: &[f64], w: &[f64]) -> mdmt::Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::new([2, 3], x.to_vec())?);
    let wv = tape.leaf(Tensor::new([3, 2], w.to_vec())?.with_requires_grad(true));
    let logits = tape.matmul(xv, wv)?;
    let probs = tape.softmax(logits)?;
    let logp = tape.log(probs)?;
    let loss = tape.sum(logp)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).item(), grads.get(wv).expect("w is a leaf").to_vec()))
}

fn main() -> mdmt::Result<()> {
    let x = [0.5, -1.0, 2.0, 1.5, 0.25, -0.75];
    let w = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
    let (loss, analytic) = loss_and_grad(&x, &w)?;
    let numeric = finite_diff_grad(|w| loss_and_grad(&x, w).expect("valid shapes").0, &w, 1e-6);
    println!("loss          {loss:.6}");
    println!("analytic grad {analytic:.6?}");
    println!("numeric grad  {numeric:.6?}");
    println!("max relative error {:.2e}", max_relative_error(&analytic, &numeric, 1e-6));
    Ok(())
}
