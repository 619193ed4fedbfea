//! Builds the objective and starting point described by a [`ProblemSpec`].

use approxnewton::problems::{
    load_libsvm_with, synthetic_spectrum_matrix, synthetic_two_class, synthetic_with_spectrum, Dataset, FiniteSumObjective,
    HingeSquaredSvm, LabelPolicy, LeastSquares,
};
use nalgebra::DVector;

use crate::config::{DataSpec, ObjectiveSpec, ProblemSpec};
use crate::error::CliError;

pub struct Problem {
    pub objective: Box<dyn FiniteSumObjective>,
    pub x0: DVector<f64>,
    pub name: String,
}

pub fn load_dataset(spec: &ProblemSpec, full_scale: bool) -> Result<Dataset, CliError> {
    let k = if full_scale { 10 } else { 1 };
    let data = match &spec.data {
        DataSpec::SyntheticSpectrum { n, d, decay, seed } => synthetic_spectrum_matrix(n * k, d * k, *decay, *seed)?.data,
        DataSpec::Spiked {
            n,
            d,
            spikes,
            top,
            ratio,
            tail,
            seed,
        } => {
            let values = (0..d * k)
                .map(|i| if i < *spikes { top * ratio.powi(i as i32) } else { *tail })
                .collect();
            let name = format!("spiked_n{}_d{}", n * k, d * k);
            synthetic_with_spectrum(n * k, values, *seed, name)?.data
        }
        DataSpec::TwoClass {
            n,
            d,
            separation,
            flip,
            seed,
        } => synthetic_two_class(n * k, d * k, *separation, *flip, *seed)?,
        DataSpec::Libsvm {
            path,
            positive_class,
            dim,
        } => {
            let policy = match (positive_class, spec.objective) {
                (Some(c), _) => LabelPolicy::OneVsRest(*c),
                (None, ObjectiveSpec::LeastSquares) => LabelPolicy::Raw,
                (None, ObjectiveSpec::Svm { .. }) => LabelPolicy::Auto,
            };
            load_libsvm_with(path, policy, *dim)?
        }
    };
    Ok(data)
}

pub fn build_problem(spec: &ProblemSpec, full_scale: bool) -> Result<Problem, CliError> {
    let data = load_dataset(spec, full_scale)?;
    let objective: Box<dyn FiniteSumObjective> = match spec.objective {
        ObjectiveSpec::LeastSquares => Box::new(LeastSquares::from_dataset(&data)?),
        ObjectiveSpec::Svm { c } => Box::new(HingeSquaredSvm::new(&data, c)?),
    };
    if !spec.x0.is_finite() {
        return Err(CliError::Config(format!("x0 must be finite, got {}", spec.x0)));
    }
    Ok(Problem {
        x0: DVector::from_element(objective.dim(), spec.x0),
        name: objective.name().to_string(),
        objective,
    })
}
