//! Small dense-vector helpers.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, or `None` when either vector is zero. Clamped to
/// [-1, 1] against rounding.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm(a) * norm(b);
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    Some((dot(a, b) / denom).clamp(-1.0, 1.0))
}

/// Arithmetic mean of equally sized vectors; `None` if `vs` is empty.
pub fn mean<'a>(vs: impl IntoIterator<Item = &'a [f64]>) -> Option<Vec<f64>> {
    weighted_mean(vs.into_iter().map(|v| (v, 1.0)))
}

pub fn weighted_mean<'a>(vs: impl IntoIterator<Item = (&'a [f64], f64)>) -> Option<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut total = 0.0;
    for (v, w) in vs {
        let acc = acc.get_or_insert_with(|| vec![0.0; v.len()]);
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
        total += w;
    }
    let mut acc = acc?;
    if total == 0.0 {
        return None;
    }
    for a in &mut acc {
        *a /= total;
    }
    Some(acc)
}

pub fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm(&v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    for x in &mut v {
        *x /= n;
    }
    Some(v)
}
