//! Reading states, vectors and maps from files or inline arguments.

use std::fmt;
use std::path::Path;

use locc_core::io::parse_json;
use locc_core::{Dims, PureState, SchmidtVector};
use serde::de::DeserializeOwned;

/// Input problem tied to the argument it came from.
#[derive(Debug)]
pub struct InputError {
    pub argument: String,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.argument, self.message)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(argument: &str, message: impl fmt::Display) -> InputError {
    InputError {
        argument: argument.to_string(),
        message: message.to_string(),
    }
}

pub fn read_json<T: DeserializeOwned>(argument: &str, path: &Path) -> Result<T, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(argument, format!("{}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| input_error(argument, format!("{}: {e}", path.display())))
}

/// Comma-separated numbers, e.g. `0.75,0.25,0`.
pub fn parse_numbers(text: &str) -> Option<Vec<f64>> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    values.ok().filter(|v| !v.is_empty())
}

pub fn parse_vector(argument: &str, text: &str) -> Result<SchmidtVector, InputError> {
    let values = parse_numbers(text).ok_or_else(|| input_error(argument, format!("expected comma-separated numbers, got {text:?}")))?;
    SchmidtVector::from_unsorted(values).map_err(|e| input_error(argument, e))
}

/// A pure state given either as a JSON file or as an inline Schmidt vector.
pub enum StateArg {
    State(PureState),
    Vector(SchmidtVector),
}

impl StateArg {
    pub fn parse(argument: &str, text: &str) -> Result<Self, InputError> {
        if parse_numbers(text).is_some() {
            return parse_vector(argument, text).map(StateArg::Vector);
        }
        read_json(argument, Path::new(text)).map(StateArg::State)
    }

    fn dims(&self) -> Option<Dims> {
        match self {
            StateArg::State(s) => Some(s.dims()),
            StateArg::Vector(_) => None,
        }
    }

    fn min_len(&self) -> usize {
        match self {
            StateArg::State(s) => s.dims().schmidt_len(),
            StateArg::Vector(v) => v.rank().max(1),
        }
    }

    fn into_state(self, argument: &str, dims: Dims) -> Result<PureState, InputError> {
        match self {
            StateArg::State(s) if s.dims() == dims => Ok(s),
            StateArg::State(s) => Err(input_error(
                argument,
                format!("dimensions {}x{} differ from {}x{}", s.dims().0, s.dims().1, dims.0, dims.1),
            )),
            StateArg::Vector(v) => {
                if v.rank() > dims.schmidt_len() {
                    return Err(input_error(
                        argument,
                        format!("Schmidt rank {} exceeds {} for dimensions {}x{}", v.rank(), dims.schmidt_len(), dims.0, dims.1),
                    ));
                }
                let v = SchmidtVector::new(v.padded(dims.schmidt_len())).map_err(|e| input_error(argument, e))?;
                PureState::standard_form(dims, &v).map_err(|e| input_error(argument, e))
            }
        }
    }
}

/// Resolves a source/target pair onto common dimensions: those of a file
/// argument if any, otherwise `n x n` with `n` the longer vector.
pub fn resolve_pair(source: StateArg, target: StateArg) -> Result<(PureState, PureState), InputError> {
    let dims = match (source.dims(), target.dims()) {
        (Some(d), _) => d,
        (None, Some(d)) => d,
        (None, None) => {
            let n = source.min_len().max(target.min_len());
            Dims(n, n)
        }
    };
    Ok((source.into_state("source", dims)?, target.into_state("target", dims)?))
}

/// Source state matching dimensions `dims` of another input.
pub fn resolve_source(source: StateArg, dims: Dims) -> Result<PureState, InputError> {
    source.into_state("source", dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_numbers() {
        assert_eq!(parse_numbers("0.5, 0.5"), Some(vec![0.5, 0.5]));
        assert_eq!(parse_numbers("state.json"), None);
        assert!(parse_vector("mu", "0.5,0.6").is_err());
    }

    #[test]
    fn vectors_are_padded_to_common_dims() {
        let s = StateArg::parse("source", "0.7,0.3").unwrap();
        let t = StateArg::parse("target", "0.5,0.3,0.2").unwrap();
        let (s, t) = resolve_pair(s, t).unwrap();
        assert_eq!(s.dims(), Dims(3, 3));
        assert_eq!(t.dims(), Dims(3, 3));
    }

    #[test]
    fn oversized_vector_is_named() {
        let s = StateArg::State(PureState::basis(Dims(2, 2), 0, 0).unwrap());
        let t = StateArg::parse("target", "0.4,0.3,0.3").unwrap();
        let err = resolve_pair(s, t).err().unwrap();
        assert_eq!(err.argument, "target");
    }
}
