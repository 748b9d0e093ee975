// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Integer-order Bessel functions of the first kind.

/// `J_0(x), ..., J_{n_max}(x)` by Miller's backward recurrence, normalized
/// with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_orders(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = n_max.max(ax.ceil() as usize);
    let start = 2 * ((top + 24 + (40.0 * top as f64).sqrt() as usize) / 2 + 1);

    let mut j_next = 0.0;
    let mut j_cur = 1e-30;
    let mut norm = 0.0;
    let two_over_x = 2.0 / ax;
    for k in (1..=start).rev() {
        let j_prev = k as f64 * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        let order = k - 1;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
        if order <= n_max {
            out[order] = j_cur;
        }
        if order % 2 == 0 {
            norm += if order == 0 { j_cur } else { 2.0 * j_cur };
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for any integer order.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_orders(x, m)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Orders `0..=p` covering every `|J_p(x)| >= cutoff`, plus the values.
pub fn bessel_j_truncated(x: f64, cutoff: f64) -> Vec<f64> {
    let guess = x.abs().ceil() as usize + 40;
    let mut values = bessel_j_orders(x, guess);
    let last = values.iter().rposition(|v| v.abs() >= cutoff).unwrap_or(0);
    values.truncate(last + 1);
    values
}
