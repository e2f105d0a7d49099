use serde::{Deserialize, Serialize};

use super::gegenbauer::gegenbauer_q;
use super::sphere::sample_sphere;
use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix, RngState};

/// Target family on the sphere `S^{D−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub input_dim: usize,
    pub kind: TaskKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TaskKind {
    /// `y = Q_k(β·x)` with `β` a unit vector drawn from `beta_seed`.
    #[serde(rename = "GEGENBAUER_REGRESSION")]
    GegenbauerRegression { degree: usize, beta_seed: u64 },
    /// One-hot argmax of teacher scores `u_c·x + Q₂(v_c·x)`.
    #[serde(rename = "ONEHOT_CLASSIFICATION")]
    OnehotClassification { classes: usize, teacher_seed: u64 },
}

impl TaskSpec {
    pub fn regression(input_dim: usize, degree: usize, beta_seed: u64) -> Self {
        TaskSpec { input_dim, kind: TaskKind::GegenbauerRegression { degree, beta_seed } }
    }

    pub fn classification(input_dim: usize, classes: usize, teacher_seed: u64) -> Self {
        TaskSpec { input_dim, kind: TaskKind::OnehotClassification { classes, teacher_seed } }
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            TaskKind::GegenbauerRegression { .. } => 1,
            TaskKind::OnehotClassification { classes, .. } => classes,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.kind, TaskKind::OnehotClassification { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 3 {
            return Err(Error::InvalidConfig(format!("tasks need input_dim >= 3, got {}", self.input_dim)));
        }
        if let TaskKind::OnehotClassification { classes, .. } = self.kind {
            if classes < 2 {
                return Err(Error::InvalidConfig("classification needs at least 2 classes".into()));
            }
        }
        Ok(())
    }

    /// Materialize the seeded teacher directions.
    pub fn teacher(&self) -> Result<Teacher> {
        self.validate()?;
        let d = self.input_dim;
        let teacher = match self.kind {
            TaskKind::GegenbauerRegression { degree, beta_seed } => {
                let beta = sample_sphere(&mut RngState::new(beta_seed).substream("beta"), d, 1);
                Teacher::Regression { dim: d, degree, beta: beta.row(0).to_vec() }
            }
            TaskKind::OnehotClassification { classes, teacher_seed } => {
                let root = RngState::new(teacher_seed);
                let linear = sample_sphere(&mut root.substream("teacher-linear"), d, classes);
                let quadratic = sample_sphere(&mut root.substream("teacher-quadratic"), d, classes);
                Teacher::Classification { dim: d, linear, quadratic }
            }
        };
        Ok(teacher)
    }
}

/// Evaluable target function of a [`TaskSpec`].
#[derive(Clone, Debug, PartialEq)]
pub enum Teacher {
    Regression { dim: usize, degree: usize, beta: Vec<f64> },
    Classification { dim: usize, linear: DenseMatrix<f64>, quadratic: DenseMatrix<f64> },
}

impl Teacher {
    pub fn output_dim(&self) -> usize {
        match self {
            Teacher::Regression { .. } => 1,
            Teacher::Classification { linear, .. } => linear.rows(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Teacher::Regression { dim, .. } | Teacher::Classification { dim, .. } => *dim,
        }
    }

    /// Raw class scores (classification) for one input.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Teacher::Regression { .. } => Ok(vec![self.eval_row(x)?[0]]),
            Teacher::Classification { dim, linear, quadratic } => {
                (0..linear.rows()).map(|c| Ok(dot(linear.row(c), x) + gegenbauer_q(2, *dim, dot(quadratic.row(c), x))?)).collect()
            }
        }
    }

    fn eval_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Teacher::Regression { dim, degree, beta } => Ok(vec![gegenbauer_q(*degree, *dim, dot(beta, x))?]),
            Teacher::Classification { .. } => {
                let scores = self.scores(x)?;
                let best = argmax(&scores);
                Ok((0..scores.len()).map(|c| if c == best { 1.0 } else { 0.0 }).collect())
            }
        }
    }

    /// Targets for each row of `x` (`n x C`).
    pub fn eval(&self, x: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch { context: "task input", expected: self.dim(), got: x.cols() });
        }
        let c = self.output_dim();
        let mut data = Vec::with_capacity(x.rows() * c);
        for i in 0..x.rows() {
            data.extend(self.eval_row(x.row(i))?);
        }
        DenseMatrix::from_vec(x.rows(), c, data)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, x)| if *x > bv { (i, *x) } else { (bi, bv) }).0
}

pub fn target_eval(task: &TaskSpec, x: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
    task.teacher()?.eval(x)
}
