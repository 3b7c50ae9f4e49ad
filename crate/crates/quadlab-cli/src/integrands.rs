//! Built-in integrand registry.
//!
//! A fixed set of named test integrands with exact population statistics
//! attached, plus a separable polynomial form `poly:c0,c1,...` that applies
//! the same 1-D polynomial to every axis and multiplies the results. Known
//! statistics let every estimate report its theoretical spread.

use quadlab::estimate::FunctionOracle;

pub const NAMED: [&str; 5] = [
    "constant",
    "linear",
    "square",
    "sum-coords",
    "product-coords",
];

/// Builds the named integrand for the given dimension. Errors are
/// user-facing messages (unknown name, malformed polynomial spec).
pub fn build(name: &str, dimension: usize) -> Result<FunctionOracle, String> {
    if dimension == 0 {
        return Err("dimension must be at least 1".to_string());
    }
    let d = dimension as f64;
    let oracle = match name {
        "constant" => FunctionOracle::new(dimension, |_| 1.0)
            .with_known_mean(1.0)
            .with_known_std(0.0),
        "linear" => FunctionOracle::new(dimension, |x| x[0])
            .with_known_mean(0.5)
            .with_known_std((1.0f64 / 12.0).sqrt()),
        "square" => FunctionOracle::new(dimension, |x| x[0] * x[0])
            .with_known_mean(1.0 / 3.0)
            .with_known_std((4.0f64 / 45.0).sqrt()),
        "sum-coords" => FunctionOracle::new(dimension, |x| x.iter().sum())
            .with_known_mean(d / 2.0)
            .with_known_std((d / 12.0).sqrt()),
        "product-coords" => FunctionOracle::new(dimension, |x| x.iter().product())
            .with_known_mean(0.5f64.powi(dimension as i32))
            .with_known_std(
                ((1.0 / 3.0f64).powi(dimension as i32)
                    - (1.0 / 4.0f64).powi(dimension as i32))
                .sqrt(),
            ),
        _ => match name.strip_prefix("poly:") {
            Some(spec) => separable_polynomial(spec, dimension)?,
            None => {
                return Err(format!(
                    "unknown integrand {name:?}; choose one of {} or poly:c0,c1,...",
                    NAMED.join(", ")
                ))
            }
        },
    };
    Ok(oracle)
}

/// `f(x) = prod_d p(x_d)` with `p(x) = sum_k c_k x^k`. The mean is
/// `(integral of p)^D` and the second moment `(integral of p^2)^D`, both
/// exact in the coefficients.
fn separable_polynomial(spec: &str, dimension: usize) -> Result<FunctionOracle, String> {
    let coefficients: Vec<f64> = spec
        .split(',')
        .map(|c| {
            c.trim()
                .parse()
                .map_err(|_| format!("bad polynomial coefficient {c:?}"))
        })
        .collect::<Result<_, _>>()?;
    if coefficients.is_empty() {
        return Err("polynomial needs at least one coefficient".to_string());
    }

    let mean_1d: f64 = coefficients
        .iter()
        .enumerate()
        .map(|(k, c)| c / (k as f64 + 1.0))
        .sum();
    let mut second_1d = 0.0;
    for (j, cj) in coefficients.iter().enumerate() {
        for (k, ck) in coefficients.iter().enumerate() {
            second_1d += cj * ck / ((j + k) as f64 + 1.0);
        }
    }
    let mean = mean_1d.powi(dimension as i32);
    let second = second_1d.powi(dimension as i32);
    let std = (second - mean * mean).max(0.0).sqrt();

    let evaluate = move |x: &[f64]| {
        x.iter()
            .map(|&coord| {
                coefficients
                    .iter()
                    .rev()
                    .fold(0.0, |acc, &c| acc * coord + c)
            })
            .product()
    };
    Ok(FunctionOracle::new(dimension, evaluate)
        .with_known_mean(mean)
        .with_known_std(std))
}
