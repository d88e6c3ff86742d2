use crate::error::{Error, Result};
use crate::model::SemiMarkovModel;

use super::generator::Generator;
use super::grid::{Grid, ValueField};

/// Explicit backward stepping along characteristics:
///
/// `v[i][x][j] = v[i+1][x][j+1] + dt·(Lv + f)` evaluated at node `(i+1, x, j+1)` with
/// `z_y = v[i+1][y][0] − v[i+1][x][j+1]`. The top age row reads `v[i+1][x][J]` in place
/// of the missing `v[i+1][x][J+1]`.
pub fn solve_backward(
    model: &SemiMarkovModel,
    generator: &dyn Generator,
    terminal: &dyn Fn(usize, f64) -> f64,
    horizon: f64,
    dt: f64,
    a_max: f64,
) -> Result<ValueField> {
    let grid = Grid::new(horizon, dt, a_max)?;
    let n = model.num_states();
    let ages = grid.ages;
    let width = ages + 1;
    let mut field = ValueField::zeros(grid, n);

    for x in 0..n {
        for (j, v) in field.row_mut(grid.steps, x).iter_mut().enumerate() {
            *v = terminal(x, grid.age(j));
            if !v.is_finite() {
                return Err(Error::Numerical {
                    i: grid.steps,
                    state: x,
                    j,
                    message: "terminal value is not finite".into(),
                });
            }
        }
    }

    // rates and rows at the ages (j+1)·dt read by step j
    let coeffs: Vec<Vec<(f64, &[f64])>> = (0..n)
        .map(|x| {
            (0..width)
                .map(|j| model.rate_and_row(x, grid.age(j + 1)))
                .collect()
        })
        .collect();

    let mut z = vec![0.0; n];
    for i in (0..grid.steps).rev() {
        let t_next = grid.time(i + 1);
        let (cur, next) = field.slice_pair_mut(i);
        for x in 0..n {
            let next_row = &next[x * width..(x + 1) * width];
            let cur_row = &mut cur[x * width..(x + 1) * width];
            for j in 0..width {
                let vn = next_row[(j + 1).min(ages)];
                let (rate, row) = coeffs[x][j];
                let mut lv = 0.0;
                for y in 0..n {
                    z[y] = next[y * width] - vn;
                    lv += row[y] * z[y];
                }
                lv *= rate;
                let f = generator.eval(t_next, x, grid.age(j + 1), vn, &z);
                let v = vn + dt * (lv + f);
                if !v.is_finite() {
                    return Err(Error::Numerical {
                        i,
                        state: x,
                        j,
                        message: format!("non-finite value (generator returned {f})"),
                    });
                }
                cur_row[j] = v;
            }
        }
    }
    Ok(field)
}
