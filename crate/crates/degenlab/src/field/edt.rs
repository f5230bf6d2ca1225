//! Exact Euclidean distance transform on a regular grid.

/// 1-D squared distance transform of a sampled function (lower envelope of parabolas).
fn dt1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(p) => p,
        None => {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: replace the only parabola
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance (grid spacing `h`) from each node of an `nx × ny` grid
/// (row-major, index `i*ny + j`) to the nearest node with `mask == true`.
/// All distances are `+∞` when the mask is empty.
pub fn distance_transform(mask: &[bool], nx: usize, ny: usize, h: f64) -> Vec<f64> {
    assert_eq!(mask.len(), nx * ny);
    if !mask.iter().any(|&m| m) {
        return vec![f64::INFINITY; nx * ny];
    }
    let m = nx.max(ny);
    let mut v = vec![0usize; m];
    let mut z = vec![0f64; m + 1];
    let mut tmp = vec![0f64; nx * ny];
    // along j for each i
    let mut col = vec![0f64; ny];
    let mut res = vec![0f64; ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = if mask[i * ny + j] { 0.0 } else { f64::INFINITY };
        }
        dt1d(&col, &mut res, &mut v, &mut z);
        tmp[i * ny..(i + 1) * ny].copy_from_slice(&res);
    }
    // along i for each j
    let mut row = vec![0f64; nx];
    let mut res = vec![0f64; nx];
    let mut out = vec![0f64; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            row[i] = tmp[i * ny + j];
        }
        dt1d(&row, &mut res, &mut v, &mut z);
        for i in 0..nx {
            out[i * ny + j] = res[i].sqrt() * h;
        }
    }
    out
}
