use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_runs_inside_embedded_python() {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(sparse_spectra_py::sparse_spectra_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("ss", module).unwrap();
        let code = c"
v = ss.Potential([(2, 4.0)])
sm = ss.eigendecompose(v, 0.0, 2)
assert abs(sum(sm.weights) - 1.0) < 1e-14
value, radius, box = ss.fourier_certified(v, 0.0, 1.0, 1e-9)
assert radius <= 1e-9
assert ss.tail_bound(0, 0.0, 0.0) == 2.0
";
        py.run(code, Some(&globals), None).unwrap();
    });
}
