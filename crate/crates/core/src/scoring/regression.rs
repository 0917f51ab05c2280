use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::predictor::fit_calibration;
use crate::scalar::Scalar;

/// Coefficient of determination of `true ~ a * pred + b` over `(pred, true)`
/// pairs: `1 - SS_res / SS_tot`, with `SS_tot` about the mean of the true values.
///
/// Pass `(1, 0)` for the fit against `y = x`.
pub fn r_squared<T: Scalar>(pairs: &[(T, T)], line: (T, T)) -> Result<T> {
    if pairs.len() < 2 {
        return Err(Error::invalid(format!(
            "R^2 needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let (ss_res, ss_tot) = sums_of_squares(pairs, line);
    if ss_tot == T::zero() {
        return Err(Error::ZeroVariance("true values are all identical".into()));
    }
    Ok(T::one() - ss_res / ss_tot)
}

fn sums_of_squares<T: Scalar>(pairs: &[(T, T)], (a, b): (T, T)) -> (T, T) {
    let n = T::from_usize_lossy(pairs.len());
    let mean = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for &(x, y) in pairs {
        let r = y - (a * x + b);
        ss_res += r * r;
        ss_tot += (y - mean) * (y - mean);
    }
    (ss_res, ss_tot)
}

/// `1 - (1 - r2) (n - 1) / (n - p - 1)` for `p` regressors.
pub fn adjusted_r_squared<T: Scalar>(r2: T, n: usize, p: usize) -> Result<T> {
    if n <= p + 1 {
        return Err(Error::invalid(format!(
            "adjusted R^2 needs n > p + 1 (n = {n}, p = {p})"
        )));
    }
    let num = T::from_usize_lossy(n - 1);
    let den = T::from_usize_lossy(n - p - 1);
    Ok(T::one() - (T::one() - r2) * num / den)
}

/// Seeded fold assignment: shuffle `0..n`, then cut into `k` contiguous
/// blocks whose sizes differ by at most one (fold `i` is `[i n / k, (i + 1) n / k)`).
pub fn kfold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k exceeds pool size ({k} > {n})")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k).map(|i| order[i * n / k..(i + 1) * n / k].to_vec()).collect())
}

/// Cross-validated R^2 of the linear calibration.
///
/// For each fold, the calibration is fitted on the other folds and scored on
/// the held-out fold against the held-out fold's own mean; the result is the
/// mean over folds. A held-out fold with no spread in its true values (for
/// instance a single point) scores 1 when every residual is zero up to
/// rounding and is an error otherwise.
pub fn kfold_r_squared<T: Scalar>(pool: &[(T, T)], k: usize, seed: u64) -> Result<T> {
    let folds = kfold_assignment(pool.len(), k, seed)?;
    let mut total = T::zero();
    for (fi, held) in folds.iter().enumerate() {
        if held.is_empty() {
            return Err(Error::invalid(format!("fold {fi} is empty")));
        }
        let mut in_fold = vec![false; pool.len()];
        for &i in held {
            in_fold[i] = true;
        }
        let train: Vec<(T, T)> = pool
            .iter()
            .zip(&in_fold)
            .filter(|(_, &f)| !f)
            .map(|(p, _)| *p)
            .collect();
        let cal = fit_calibration(&train).map_err(|e| match e {
            Error::RankDeficient(m) => Error::RankDeficient(format!("training folds for fold {fi}: {m}")),
            other => other,
        })?;
        let held_pairs: Vec<(T, T)> = held.iter().map(|&i| pool[i]).collect();
        total += held_out_r2(&held_pairs, (cal.a, cal.b), fi)?;
    }
    Ok(total / T::from_usize_lossy(k))
}

fn held_out_r2<T: Scalar>(pairs: &[(T, T)], line: (T, T), fold: usize) -> Result<T> {
    let (ss_res, ss_tot) = sums_of_squares(pairs, line);
    if ss_tot > T::zero() {
        return Ok(T::one() - ss_res / ss_tot);
    }
    let tol = T::tol(1e-9, 1e5);
    let exact = pairs
        .iter()
        .all(|&(x, y)| (y - (line.0 * x + line.1)).abs() <= tol * T::one().max(y.abs()));
    if exact {
        Ok(T::one())
    } else {
        Err(Error::ZeroVariance(format!(
            "held-out fold {fold} has no spread in true values and nonzero residuals"
        )))
    }
}
