use std::ffi::CString;

use cartan::cartan as module;
use pyo3::prelude::*;

fn run(code: &str) -> PyResult<()> {
    pyo3::append_to_inittab!(module);
    Python::initialize();
    let code = CString::new(code).unwrap();
    Python::attach(|py| py.run(&code, None, None))
}

#[test]
fn module_round_trip() {
    run(r#"
import json, math
import cartan

g = cartan.GroupElement(0.3, -0.2, 0.1, 0.5, -0.4)
assert max(abs(c) for c in (g * g.inverse()).to_list()) <= 1e-12

disc = cartan.ConvexBody.disc(1.0)
phi = [1.0, 0.0, 1.0, 0.0, 0.0]
sol = cartan.Solution(phi, disc)
assert sol.case == "periodic"
l = cartan.period(phi, disc)
tr = sol.reconstruct([l * i / 100 for i in range(101)])
assert abs(abs(tr["z"][-1]) - math.pi) <= 1e-8

sq = cartan.ConvexBody.unit_square()
try:
    cartan.integrate_hamiltonian([1, 0, 0, 0, 0], sq, [0.0, 1.0])
except cartan.CartanError:
    pass
else:
    raise AssertionError("stall not raised")

try:
    cartan.run_config("{}")
except ValueError:
    pass
else:
    raise AssertionError("empty config accepted")
"#)
    .unwrap_or_else(|e| panic!("{e}"));
}
