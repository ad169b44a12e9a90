//! Derivative-free simplex (Nelder-Mead) minimizer on an unconstrained
//! transformed scale. Internal to the fitting routines.

#[derive(Debug, Clone)]
pub(crate) struct NmOptions {
    pub max_evals: usize,
    /// Simplex diameter tolerance (infinity norm, transformed scale).
    pub tol_x: f64,
    /// Function spread tolerance across the simplex.
    pub tol_f: f64,
    /// Initial simplex step per coordinate.
    pub step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_evals: 5000,
            tol_x: 1e-8,
            tol_f: 1e-10,
            step: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub n_evals: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0`. Non-finite objective values are treated
/// as +infinity so the simplex backs away from bad regions.
pub(crate) fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NmOptions) -> NmResult
where
    F: FnMut(&[f64]) -> f64,
{
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const BETA: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let n = x0.len();
    let mut n_evals = 0usize;
    let mut eval = |x: &[f64], n_evals: &mut usize| -> f64 {
        *n_evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut n_evals)).collect();

    loop {
        // order best..worst
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ordered_vals: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = ordered;
        values = ordered_vals;

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() < opts.tol_f && diameter < opts.tol_x && values[0].is_finite() {
            return NmResult {
                x: simplex[0].clone(),
                fx: values[0],
                n_evals,
                converged: true,
            };
        }
        if n_evals >= opts.max_evals {
            return NmResult {
                x: simplex[0].clone(),
                fx: values[0],
                n_evals,
                converged: false,
            };
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + ALPHA * (centroid[j] - simplex[n][j]))
            .collect();
        let fr = eval(&reflect, &mut n_evals);

        if fr < values[0] {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + GAMMA * (reflect[j] - centroid[j]))
                .collect();
            let fe = eval(&expand, &mut n_evals);
            if fe < fr {
                simplex[n] = expand;
                values[n] = fe;
            } else {
                simplex[n] = reflect;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflect;
            values[n] = fr;
        } else {
            let (point, fp) = if fr < values[n] {
                // outside contraction
                let c: Vec<f64> = (0..n)
                    .map(|j| centroid[j] + BETA * (reflect[j] - centroid[j]))
                    .collect();
                let fc = eval(&c, &mut n_evals);
                (c, fc)
            } else {
                // inside contraction
                let c: Vec<f64> = (0..n)
                    .map(|j| centroid[j] - BETA * (centroid[j] - simplex[n][j]))
                    .collect();
                let fc = eval(&c, &mut n_evals);
                (c, fc)
            };
            if fp <= values[n].min(fr) {
                simplex[n] = point;
                values[n] = fp;
            } else {
                // shrink towards the best vertex
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + SIGMA * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = eval(&simplex[i].clone(), &mut n_evals);
                }
            }
        }
    }
}
