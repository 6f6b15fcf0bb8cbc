//! Harmonic gate: the cellwise product of activity, voicing, energy and
//! harmonic-location factors. Frame factors broadcast across all bins.

use crate::error::{Error, Result};
use crate::harmonic::BinaryRaster;
use crate::sed::FrameFlags;

#[derive(Debug, Clone)]
pub struct GateInputs {
    pub r_vad: FrameFlags,
    pub r_vrd: FrameFlags,
    pub r_a: BinaryRaster,
    pub r_h: BinaryRaster,
}

impl GateInputs {
    pub fn validate(&self) -> Result<()> {
        let (t, f) = (self.r_h.frames(), self.r_h.bins());
        if self.r_a.frames() != t {
            return Err(Error::shape("time", t, self.r_a.frames()));
        }
        if self.r_a.bins() != f {
            return Err(Error::shape("frequency", f, self.r_a.bins()));
        }
        if self.r_vad.len() != t {
            return Err(Error::shape("time", t, self.r_vad.len()));
        }
        if self.r_vrd.len() != t {
            return Err(Error::shape("time", t, self.r_vrd.len()));
        }
        Ok(())
    }
}

pub fn compose_gate(inputs: &GateInputs) -> Result<BinaryRaster> {
    inputs.validate()?;
    let GateInputs {
        r_vad,
        r_vrd,
        r_a,
        r_h,
    } = inputs;
    Ok(BinaryRaster::from_fn(r_h.frames(), r_h.bins(), |t, f| {
        r_vad.get(t) && r_vrd.get(t) && r_a.get(t, f) && r_h.get(t, f)
    }))
}
