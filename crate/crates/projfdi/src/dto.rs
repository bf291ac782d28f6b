//! JSON shapes. Matrices are arrays of rows; every top-level document carries
//! `"schema": 1`.

use projfdi_core::additive::AdditiveModel;
use projfdi_core::linalg::Mat;
use projfdi_core::{SignalWindow, StateSpaceModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: u32 = 1;

pub type Rows = Vec<Vec<f64>>;

pub fn mat_to_rows(m: &Mat) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `cols` is used only when `rows` is empty.
pub fn rows_to_mat(rows: &Rows, cols: usize, what: &str) -> Result<Mat> {
    let c = rows.first().map_or(cols, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Config(format!("{what}: rows have different lengths")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what}: non-finite entry")));
    }
    Ok(Mat::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

fn default_schema() -> u32 {
    SCHEMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDto {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    pub d: Rows,
}

impl ModelDto {
    pub fn from_model(m: &StateSpaceModel) -> Self {
        ModelDto {
            schema: SCHEMA,
            name: None,
            description: None,
            a: mat_to_rows(m.a()),
            b: mat_to_rows(m.b()),
            c: mat_to_rows(m.c()),
            d: mat_to_rows(m.d()),
        }
    }

    pub fn to_model(&self) -> Result<StateSpaceModel> {
        check_schema(self.schema)?;
        let d = rows_to_mat(&self.d, 0, "d")?;
        let n = self.a.len();
        let p = d.ncols();
        let a = rows_to_mat(&self.a, n, "a")?;
        let b = rows_to_mat(&self.b, p, "b")?;
        let c = rows_to_mat(&self.c, n, "c")?;
        Ok(StateSpaceModel::new(a, b, c, d)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveDto {
    #[serde(flatten)]
    pub base: ModelDto,
    pub e_d: Rows,
    pub f_d: Rows,
    #[serde(default)]
    pub e_f: Rows,
    #[serde(default)]
    pub f_f: Rows,
    pub delta_d: f64,
}

impl AdditiveDto {
    pub fn to_model(&self) -> Result<AdditiveModel> {
        let base = self.base.to_model()?;
        let kd = self.f_d.first().map_or(0, Vec::len);
        let kf = self.f_f.first().map_or(0, Vec::len);
        let (n, m) = (base.states(), base.outputs());
        let e_d = if n == 0 { Mat::zeros(0, kd) } else { rows_to_mat(&self.e_d, kd, "e_d")? };
        let f_d = rows_to_mat(&self.f_d, kd, "f_d")?;
        let e_f = if self.e_f.is_empty() { Mat::zeros(n, kf) } else { rows_to_mat(&self.e_f, kf, "e_f")? };
        let f_f = if self.f_f.is_empty() { Mat::zeros(m, e_f.ncols()) } else { rows_to_mat(&self.f_f, kf, "f_f")? };
        Ok(AdditiveModel::new(base, e_d, f_d, e_f, f_f, self.delta_d)?)
    }
}

/// A plant given inline, as an additive model, or by name (`"benchmark"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    Named(String),
    Additive(AdditiveDto),
    Model(ModelDto),
}

impl PlantSpec {
    pub fn model(&self) -> Result<StateSpaceModel> {
        match self {
            PlantSpec::Named(n) => crate::benchmark::named_plant(n),
            PlantSpec::Additive(a) => a.base.to_model(),
            PlantSpec::Model(m) => m.to_model(),
        }
    }

    pub fn additive(&self) -> Result<Option<AdditiveModel>> {
        match self {
            PlantSpec::Additive(a) => a.to_model().map(Some),
            _ => Ok(None),
        }
    }
}

pub fn check_schema(schema: u32) -> Result<()> {
    if schema != SCHEMA {
        return Err(Error::Config(format!("unsupported schema {schema}, expected {SCHEMA}")));
    }
    Ok(())
}

/// Sampled I/O logs, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDto {
    #[serde(default)]
    pub start: i64,
    pub u: Rows,
    pub y: Rows,
}

impl DataDto {
    pub fn windows(&self, inputs: usize, outputs: usize) -> Result<(SignalWindow, SignalWindow)> {
        if self.u.len() != self.y.len() {
            return Err(Error::Config("u and y have different lengths".into()));
        }
        let u = rows_to_window(self.start, inputs, &self.u, "u")?;
        let y = rows_to_window(self.start, outputs, &self.y, "y")?;
        Ok((u, y))
    }
}

pub fn rows_to_window(start: i64, channels: usize, rows: &Rows, what: &str) -> Result<SignalWindow> {
    if rows.iter().any(|r| r.len() != channels) {
        return Err(Error::Config(format!("{what}: every sample needs {channels} channels")));
    }
    Ok(SignalWindow::new(start, channels, rows.clone())?)
}

pub fn window_to_rows(w: &SignalWindow) -> Rows {
    (0..w.len()).map(|i| w.row(i).to_vec()).collect()
}
