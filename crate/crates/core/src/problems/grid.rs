//! The 4×4 binary grid: every edge prefers its endpoints to differ (or agree,
//! depending on the user's weight). Basic parts are the four 2×2 blocks.

use serde_json::json;

use crate::model::{LinearExpr, ModelBuilder, ProblemModel, Term, Transform};

pub const SIZE: usize = 4;

/// Variable name of node `(r, c)`.
pub fn node(r: usize, c: usize) -> String {
    format!("n{r}{c}")
}

pub fn build_grid() -> ProblemModel {
    let mut m = ModelBuilder::new();
    // Declare block by block so the search order is part-major.
    let mut idx = [[0usize; SIZE]; SIZE];
    let mut blocks = Vec::new();
    for br in 0..2 {
        for bc in 0..2 {
            let mut vars = Vec::new();
            for r in 2 * br..2 * br + 2 {
                for c in 2 * bc..2 * bc + 2 {
                    idx[r][c] = m.var(node(r, c), vec![0, 1]);
                    vars.push(idx[r][c]);
                }
            }
            blocks.push((format!("b{br}{bc}"), vars));
        }
    }
    let edge = |a: usize, b: usize| LinearExpr::new(vec![Term::var(1.0, a), Term::var(-1.0, b)]);
    for r in 0..SIZE {
        for c in 0..SIZE - 1 {
            m.feature(
                format!("h{r}{c}"),
                edge(idx[r][c], idx[r][c + 1]),
                Transform::SignedIndicator,
            );
        }
    }
    for r in 0..SIZE - 1 {
        for c in 0..SIZE {
            m.feature(
                format!("v{r}{c}"),
                edge(idx[r][c], idx[r + 1][c]),
                Transform::SignedIndicator,
            );
        }
    }
    for (name, vars) in blocks {
        m.part(name, vars);
    }
    m.build(json!({"kind": "grid", "rows": SIZE, "cols": SIZE}))
        .expect("the grid is a valid model")
}
