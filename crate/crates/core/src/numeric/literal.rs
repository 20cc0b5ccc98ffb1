use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Parses `[[a, b], [c, d]]` (JSON rows) or `diag:[a, b, ...]`.
pub fn parse_matrix_literal(text: &str) -> Result<DMatrix<f64>> {
    let text = text.trim();
    let bad = |e: serde_json::Error| Error::invalid(format!("matrix literal {text:?}: {e}"));
    let m = if let Some(rest) = text.strip_prefix("diag:") {
        let diag: Vec<f64> = serde_json::from_str(rest.trim()).map_err(bad)?;
        if diag.is_empty() {
            return Err(Error::invalid("empty diagonal literal"));
        }
        DMatrix::from_diagonal(&DVector::from_vec(diag))
    } else {
        let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(bad)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::invalid(format!("matrix literal {text:?} is empty or ragged")));
        }
        DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
    };
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix literal has non-finite entries"));
    }
    Ok(m)
}
