//! Drives the extension module through an embedded interpreter.

use std::ffi::CString;
use std::sync::Once;

use msgamlss_py::msgamlss_py as module;
use pyo3::prelude::*;

fn python<R>(f: impl for<'py> FnOnce(Python<'py>) -> R) -> R {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(module);
        Python::initialize();
    });
    Python::attach(f)
}

fn run(code: &str) {
    let code = CString::new(format!("import msgamlss_py as ms\n{code}")).unwrap();
    python(|py| {
        if let Err(e) = py.run(&code, None, None) {
            e.display(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn markov_helpers() {
    run(r#"
tpm = ms.tpm_from_eta([[0.0, -1.8], [-2.1, 0.0]])
assert all(abs(sum(row) - 1.0) < 1e-15 for row in tpm)
delta = ms.stationary(tpm)
assert abs(delta[0] - tpm[1][0] / (tpm[0][1] + tpm[1][0])) < 1e-14
try:
    ms.stationary([[0.5, 0.6], [0.5, 0.5]])
    raise AssertionError("invalid matrix accepted")
except ValueError:
    pass
"#);
}

#[test]
fn simulate_is_seeded() {
    run(r#"
a = ms.simulate(length=60, seed=5)
b = ms.simulate(length=60, seed=5)
c = ms.simulate(length=60, seed=6)
assert a == b and a["y"] != c["y"]
assert sorted(a) == ["state", "x", "y", "z"]
assert set(a["state"]) <= {1, 2}
"#);
}

#[test]
fn fit_decode_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("model.json");
    run(&format!(
        r#"
data = ms.simulate(length=400, seed=8)
cols = {{k: v for k, v in data.items() if k != "state"}}
m = ms.fit(cols, "y", parameters={{"mu": ["linear(x)"], "sigma": ["linear(x)"]}},
           transitions={{"all": ["linear(z)"]}})
assert m.n_states == 2 and m.family == "normal"
assert m.smoothing_parameters == []
assert len(m.viterbi(cols)) == 400
assert len(m.pseudo_residuals(cols)) == 400
m.save({file:?})
again = ms.Model.load({file:?})
assert again.theta == m.theta
assert again.log_likelihood_on(cols) == m.log_likelihood_on(cols)
"#
    ));
}
