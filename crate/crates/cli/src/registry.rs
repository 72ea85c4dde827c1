//! Named test problems. Exact gradients are used only to report the true
//! criticality measure after a run and by the bound checks; the solver
//! sees function values only.

use cdfo::problems::{Affine, CosSum, Quadratic, Rosenbrock, TestFunction};
use nalgebra::{dvector, DMatrix, DVector};

use crate::error::{config, CliError};

pub struct ProblemSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub objective: Box<dyn TestFunction>,
    /// Default region; the objective's Lipschitz constant is valid on it.
    pub region: &'static str,
    pub x0: DVector<f64>,
    /// Known minimizer over the default region, when analytic.
    pub reference: Option<DVector<f64>>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }
}

pub const NAMES: [&str; 6] = ["quad2d", "quad5d", "affine2d", "rosenbrock2d", "cossum2d", "cossum3d"];

fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Quadratic {
    Quadratic::new(a, b, 0.0).expect("registry quadratic is well formed")
}

pub fn lookup(name: &str) -> Result<ProblemSpec, CliError> {
    let spec = match name {
        "quad2d" => {
            let q = quadratic(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), dvector![-0.4, 0.25]);
            let reference = q.stationary_point();
            ProblemSpec {
                name: "quad2d",
                description: "convex quadratic, interior minimizer",
                objective: Box::new(q),
                region: "box(-1, 1)^2",
                x0: dvector![-0.9, 0.9],
                reference,
            }
        }
        "quad5d" => {
            let a = DMatrix::from_fn(5, 5, |i, j| match i.abs_diff(j) {
                0 => 2.0,
                1 => -0.5,
                _ => 0.0,
            });
            ProblemSpec {
                name: "quad5d",
                description: "convex quadratic, minimizer on the boundary",
                objective: Box::new(quadratic(a, dvector![-3.0, 1.0, -3.0, 1.0, -3.0])),
                region: "box(-1, 1)^5",
                x0: DVector::zeros(5),
                reference: None,
            }
        }
        "affine2d" => ProblemSpec {
            name: "affine2d",
            description: "affine function, minimizer at a vertex",
            objective: Box::new(Affine { g: dvector![1.0, -2.0], c: 0.0 }),
            region: "box(-1, 1)^2",
            x0: dvector![0.5, 0.5],
            reference: Some(dvector![-1.0, 1.0]),
        },
        "rosenbrock2d" => ProblemSpec {
            name: "rosenbrock2d",
            description: "Rosenbrock over the unit disk, minimizer on the boundary",
            objective: Box::new(Rosenbrock::new(2, Rosenbrock::lipschitz_on_ball_2d(1.0)).expect("dimension 2")),
            region: "ball(1)^2",
            x0: dvector![-0.5, 0.5],
            reference: None,
        },
        "cossum2d" => ProblemSpec {
            name: "cossum2d",
            description: "sum of cosines, nonconvex",
            objective: Box::new(CosSum::new(dvector![1.0, 0.5], dvector![1.0, 2.0]).expect("matching lengths")),
            region: "box(-2, 2)^2",
            x0: dvector![0.5, -0.3],
            reference: None,
        },
        "cossum3d" => ProblemSpec {
            name: "cossum3d",
            description: "sum of cosines over a ball, nonconvex",
            objective: Box::new(CosSum::new(dvector![1.0, 0.5, 0.25], dvector![1.0, 2.0, 3.0]).expect("matching lengths")),
            region: "ball(2)^3",
            x0: dvector![0.3, -0.2, 0.1],
            reference: None,
        },
        other => return Err(config(format!("unknown problem '{other}'; registry: {}", NAMES.join(", ")))),
    };
    Ok(spec)
}
