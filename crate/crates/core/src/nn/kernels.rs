//! Forward and backward kernels for the fixed classifier architecture.
//!
//! Feature maps are `[channels][height][width]` in row-major order; convolution
//! weights are `[out][in][k][k]`; dense weights are `[out][in]`.

/// Output side of a valid (unpadded, stride 1) convolution.
pub fn conv_out(side: usize, k: usize) -> usize {
    side + 1 - k
}

/// Output side of 2x2, stride 2 max pooling; a trailing odd row/column is dropped.
pub fn pool_out(side: usize) -> usize {
    side / 2
}

/// Valid 2D convolution (cross-correlation) of a square multi-channel input.
pub fn conv2d_forward(
    input: &[f64],
    in_ch: usize,
    side: usize,
    weights: &[f64],
    bias: &[f64],
    out_ch: usize,
    k: usize,
) -> Vec<f64> {
    let os = conv_out(side, k);
    let mut out = vec![0.0; out_ch * os * os];
    for o in 0..out_ch {
        let plane = &mut out[o * os * os..(o + 1) * os * os];
        plane.iter_mut().for_each(|v| *v = bias[o]);
        for c in 0..in_ch {
            let inp = &input[c * side * side..(c + 1) * side * side];
            let w = &weights[(o * in_ch + c) * k * k..(o * in_ch + c + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = w[ky * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for y in 0..os {
                        let row = &inp[(y + ky) * side + kx..(y + ky) * side + kx + os];
                        let dst = &mut plane[y * os..(y + 1) * os];
                        for (d, s) in dst.iter_mut().zip(row) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of a valid convolution. `grad_out` is the gradient with respect to
/// the convolution output (after any activation derivative has been applied).
/// Accumulates into `grad_w` and `grad_b`; returns the input gradient when
/// `want_input` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    input: &[f64],
    in_ch: usize,
    side: usize,
    weights: &[f64],
    out_ch: usize,
    k: usize,
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let os = conv_out(side, k);
    let mut grad_in = want_input.then(|| vec![0.0; in_ch * side * side]);
    for o in 0..out_ch {
        let g = &grad_out[o * os * os..(o + 1) * os * os];
        grad_b[o] += g.iter().sum::<f64>();
        for c in 0..in_ch {
            let inp = &input[c * side * side..(c + 1) * side * side];
            let base = (o * in_ch + c) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = 0.0;
                    for y in 0..os {
                        let row = &inp[(y + ky) * side + kx..(y + ky) * side + kx + os];
                        let grow = &g[y * os..(y + 1) * os];
                        acc += row.iter().zip(grow).map(|(a, b)| a * b).sum::<f64>();
                    }
                    grad_w[base + ky * k + kx] += acc;
                    if let Some(gi) = grad_in.as_mut() {
                        let wv = weights[base + ky * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let gplane = &mut gi[c * side * side..(c + 1) * side * side];
                        for y in 0..os {
                            let dst = &mut gplane[(y + ky) * side + kx..(y + ky) * side + kx + os];
                            for (d, s) in dst.iter_mut().zip(&g[y * os..(y + 1) * os]) {
                                *d += wv * s;
                            }
                        }
                    }
                }
            }
        }
    }
    grad_in
}

/// 2x2 stride-2 max pooling. Returns the pooled values and, for each output,
/// the flat input index of the (first) maximum.
pub fn maxpool_forward(input: &[f64], ch: usize, side: usize) -> (Vec<f64>, Vec<usize>) {
    let os = pool_out(side);
    let mut out = Vec::with_capacity(ch * os * os);
    let mut arg = Vec::with_capacity(ch * os * os);
    for c in 0..ch {
        let base = c * side * side;
        for y in 0..os {
            for x in 0..os {
                let mut best = base + 2 * y * side + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * y + dy) * side + 2 * x + dx;
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                out.push(input[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

/// Route pooled gradients back to the positions that won the max.
pub fn maxpool_backward(grad_out: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut grad_in = vec![0.0; input_len];
    for (&g, &i) in grad_out.iter().zip(argmax) {
        grad_in[i] += g;
    }
    grad_in
}

pub fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zero gradients where the activation output was not positive.
pub fn relu_backward_in_place(grad: &mut [f64], activated: &[f64]) {
    for (g, a) in grad.iter_mut().zip(activated) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn dense_forward(input: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let n_in = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, b)| {
            b + weights[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(input)
                .map(|(w, x)| w * x)
                .sum::<f64>()
        })
        .collect()
}

/// Accumulates weight and bias gradients; returns the input gradient.
pub fn dense_backward(
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Vec<f64> {
    let n_in = input.len();
    let mut grad_in = vec![0.0; n_in];
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] += g;
        if g == 0.0 {
            continue;
        }
        let w = &weights[o * n_in..(o + 1) * n_in];
        let gw = &mut grad_w[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            gw[i] += g * input[i];
            grad_in[i] += g * w[i];
        }
    }
    grad_in
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
