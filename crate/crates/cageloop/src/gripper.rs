//! Gripper geometry.

use crate::error::{Error, Result};

/// Physical gripper parameters that gate the search.
///
/// `h` is the finger length: an open two-finger gripper spans 2h, so distance
/// fields sweep to 2h and loops longer than 4h (out and back for both
/// fingers) can never be closed by this hand. `r` is the finger sweep radius;
/// the object is offset by the same r so that loops of zero-thickness curves
/// correspond to swept fingers of thickness r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperSpec {
    /// finger length (meters); total stretching length is 2h
    pub h: f64,
    /// finger sweep radius (meters); also the surface offset radius
    pub r: f64,
    /// height of the approach-cone test (meters)
    pub approach_depth: f64,
}

impl GripperSpec {
    pub fn new(h: f64, r: f64, approach_depth: f64) -> Result<GripperSpec> {
        for (name, v) in [("h", h), ("r", r), ("approach_depth", approach_depth)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::BadParams(format!(
                    "gripper {name} = {v} must be positive"
                )));
            }
        }
        Ok(GripperSpec {
            h,
            r,
            approach_depth,
        })
    }

    /// Distance-field sweep cap: 2h.
    pub fn sweep_cap(&self) -> f64 {
        2.0 * self.h
    }

    /// Longest loop this gripper can realize: 4h.
    pub fn max_loop_len(&self) -> f64 {
        4.0 * self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_dimensions() {
        assert!(GripperSpec::new(0.0, 0.01, 0.05).is_err());
        assert!(GripperSpec::new(0.1, -0.01, 0.05).is_err());
        assert!(GripperSpec::new(0.1, 0.01, f64::NAN).is_err());
        let g = GripperSpec::new(0.12, 0.01, 0.06).unwrap();
        assert_eq!(g.sweep_cap(), 0.24);
        assert_eq!(g.max_loop_len(), 0.48);
    }
}
