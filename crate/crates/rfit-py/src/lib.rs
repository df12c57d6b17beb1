use pyo3::prelude::*;

#[pymodule]
fn rfit_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
