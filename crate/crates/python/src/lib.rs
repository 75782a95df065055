use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qkdrate_core::{config, fockoracle, protocols, ratecore, security, sources, verify};
use qkdrate_core::{ArmLoss, Error, ModelOptions, RunConfig, SecurityParams, SourceSpec, Suite, SweepMode};

type RateTuple = (f64, Option<f64>, Option<f64>, Option<f64>);

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn source_from(name: &str, param: Option<f64>) -> PyResult<SourceSpec> {
    let spec = match name {
        "ideal-single" => SourceSpec::IdealSingle,
        "poisson" => SourceSpec::Poisson { nbar: param },
        "ideal-epr" => SourceSpec::IdealEpr,
        "pdc" => SourceSpec::Pdc { chi: param },
        "swap" => {
            let n = param.ok_or_else(|| PyValueError::new_err("swap needs the number of swaps"))?;
            if n.fract() != 0.0 || n < 1.0 {
                return Err(PyValueError::new_err("number of swaps must be a positive integer"));
            }
            SourceSpec::Swap { n_swaps: n as u32 }
        }
        other => return Err(PyValueError::new_err(format!("unknown source {other:?}"))),
    };
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

/// Link and detector parameters.
#[pyclass(name = "ChannelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChannelParams {
    inner: qkdrate_core::ChannelParams,
}

#[pymethods]
impl PyChannelParams {
    #[new]
    #[pyo3(signature = (sigma_db_per_km, eta, receiver_loss_db, dark_count_prob, baseline_error))]
    fn new(sigma_db_per_km: f64, eta: f64, receiver_loss_db: f64, dark_count_prob: f64, baseline_error: f64) -> PyResult<Self> {
        let inner = qkdrate_core::ChannelParams::new(sigma_db_per_km, eta, receiver_loss_db, dark_count_prob, baseline_error)
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn telecom_fiber() -> Self {
        Self { inner: qkdrate_core::ChannelParams::telecom_fiber() }
    }

    #[staticmethod]
    fn visible_free_space() -> Self {
        Self { inner: qkdrate_core::ChannelParams::visible_free_space() }
    }

    #[getter]
    fn sigma_db_per_km(&self) -> f64 {
        self.inner.sigma_db_per_km
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn receiver_loss_db(&self) -> f64 {
        self.inner.receiver_loss_db
    }

    #[getter]
    fn dark_count_prob(&self) -> f64 {
        self.inner.dark_count_prob
    }

    #[getter]
    fn baseline_error(&self) -> f64 {
        self.inner.baseline_error
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ChannelParams(sigma_db_per_km={}, eta={}, receiver_loss_db={}, dark_count_prob={}, baseline_error={})",
            p.sigma_db_per_km, p.eta, p.receiver_loss_db, p.dark_count_prob, p.baseline_error
        )
    }
}

/// Rate evaluation for a channel. Sources are named as in config files
/// (`"ideal-single"`, `"poisson"`, `"ideal-epr"`, `"pdc"`, `"swap"`); the
/// optional parameter is `nbar`, `chi` or the number of swaps, and `None`
/// optimizes it.
#[pyclass(name = "RateModel", frozen)]
struct PyRateModel {
    inner: protocols::RateModel,
}

#[pymethods]
impl PyRateModel {
    #[new]
    #[pyo3(signature = (channel, total_loss_db = false, receiver_loss_per_arm = true))]
    fn new(channel: &PyChannelParams, total_loss_db: bool, receiver_loss_per_arm: bool) -> Self {
        let mode = if total_loss_db { SweepMode::TotalLossDb } else { SweepMode::DistanceKm };
        let options = ModelOptions { receiver_loss_per_arm, ..ModelOptions::default() };
        Self { inner: protocols::RateModel::new(channel.inner).with_mode(mode).with_options(options) }
    }

    /// `(rate, optimal_param, p_detect, error_rate)` at abscissa `x`.
    #[pyo3(signature = (source, x, param = None))]
    fn rate(&self, source: &str, x: f64, param: Option<f64>) -> PyResult<RateTuple> {
        let p = self.inner.evaluate(&source_from(source, param)?, x).map_err(py_err)?;
        let stats = p.stats.as_ref();
        Ok((p.rate, p.optimal_param, stats.map(|s| s.p_detect()), stats.map(|s| s.error_rate())))
    }

    /// `(param, rate)` maximizing the rate over the free parameter.
    fn optimize(&self, source: &str, x: f64) -> PyResult<(f64, f64)> {
        let o = self.inner.optimize(&source_from(source, None)?, x).map_err(py_err)?;
        Ok((o.param, o.rate.clamped))
    }

    #[pyo3(signature = (source, param = None, lo_km = 0.0, hi_km = 600.0))]
    fn cutoff_km(&self, source: &str, param: Option<f64>, lo_km: f64, hi_km: f64) -> PyResult<f64> {
        protocols::cutoff_distance(&self.inner, &source_from(source, param)?, (lo_km, hi_km)).map_err(py_err)
    }

    /// Rates along a list of abscissae, in order.
    #[pyo3(signature = (source, xs, param = None))]
    fn sweep(&self, source: &str, xs: Vec<f64>, param: Option<f64>) -> PyResult<Vec<f64>> {
        let spec = source_from(source, param)?;
        Ok(protocols::sweep_points(&self.inner, &spec, &xs).into_iter().map(|p| p.rate).collect())
    }
}

#[pyfunction]
fn binary_entropy(e: f64) -> PyResult<f64> {
    ratecore::binary_entropy(e).map_err(py_err)
}

#[pyfunction]
fn collision_bound(eps: f64) -> PyResult<f64> {
    ratecore::collision_bound(eps).map_err(py_err)
}

#[pyfunction]
fn tau(eps: f64) -> PyResult<f64> {
    ratecore::tau(eps).map_err(py_err)
}

#[pyfunction]
fn tau_multiphoton(e: f64, beta: f64) -> PyResult<f64> {
    ratecore::tau_multiphoton(e, beta).map_err(py_err)
}

/// `(r, eve_info_bound)` for the final key.
#[pyfunction]
#[pyo3(signature = (n_rec, eps, kappa, s = 30, t = 30))]
fn final_key_length(n_rec: u64, eps: f64, kappa: f64, s: u32, t: u32) -> PyResult<(u64, f64)> {
    let b = security::final_key_length(n_rec, eps, kappa, SecurityParams { s, t }).map_err(py_err)?;
    Ok((b.r, b.eve_info_bound))
}

/// Closed-form `(A, B, C, D)` for a down-converter behind loss `alpha`.
#[pyfunction]
#[pyo3(signature = (chi, alpha, as_printed = false))]
fn pdc_coefficients(chi: f64, alpha: f64, as_printed: bool) -> PyResult<(f64, f64, f64, f64)> {
    let arm = ArmLoss::new(alpha).map_err(py_err)?;
    let formula = if as_printed { sources::PdcFormula::AsPrinted } else { sources::PdcFormula::Exact };
    let k = sources::pdc_coefficients_with(chi, arm, formula).map_err(py_err)?;
    Ok((k.a, k.b, k.c, k.d))
}

/// `(A, B, C, D)` extracted from the truncated Fock-space expansion.
#[pyfunction]
#[pyo3(signature = (chi, alpha, n_max = 8))]
fn oracle_pdc_coefficients(chi: f64, alpha: f64, n_max: u32) -> PyResult<(f64, f64, f64, f64)> {
    let arm = ArmLoss::new(alpha).map_err(py_err)?;
    let k = fockoracle::oracle_pdc_coefficients(chi, arm, n_max).map_err(py_err)?.coefficients;
    Ok((k.a, k.b, k.c, k.d))
}

/// `(passed, json_report)` for a named verification suite.
#[pyfunction]
#[pyo3(signature = (suite = "all"))]
fn run_verify(suite: &str) -> PyResult<(bool, String)> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let report = verify::run_suite(suite).map_err(py_err)?;
    Ok((report.passed, config::json_string(&report).map_err(py_err)?))
}

/// CSV sweep table for a JSON run configuration.
#[pyfunction]
fn sweep_csv(config_json: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config_json).map_err(py_err)?;
    let results = cfg.run_sweep().map_err(py_err)?;
    config::csv_string(&results).map_err(py_err)
}

#[pymodule]
fn qkdrate(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelParams>()?;
    m.add_class::<PyRateModel>()?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(collision_bound, m)?)?;
    m.add_function(wrap_pyfunction!(tau, m)?)?;
    m.add_function(wrap_pyfunction!(tau_multiphoton, m)?)?;
    m.add_function(wrap_pyfunction!(final_key_length, m)?)?;
    m.add_function(wrap_pyfunction!(pdc_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_pdc_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    Ok(())
}
