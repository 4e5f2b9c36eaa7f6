use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Frames of one video, one `d`-dimensional column per frame, intensities
/// in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    frames: Matrix,
    label: String,
    id: String,
}

impl VideoSequence {
    pub fn new(frames: Matrix, label: impl Into<String>, id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if frames.ncols() < 2 {
            return Err(Error::input(format!(
                "video {id:?} has {} frames, at least 2 are required",
                frames.ncols()
            )));
        }
        if frames.nrows() == 0 {
            return Err(Error::input(format!("video {id:?} has empty frames")));
        }
        if let Some(v) = frames.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::input(format!(
                "video {id:?} has intensity {v} outside [0, 1]"
            )));
        }
        Ok(VideoSequence {
            frames,
            label: label.into(),
            id,
        })
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.frames.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.nrows()
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            return Err(Error::input(format!(
                "video {:?} has {} frames, {needed} needed",
                self.id,
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    /// The first frame followed by the last `tau - 1` frames.
    #[default]
    FirstPlusLast,
    /// The last `tau` frames as they are.
    RawWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// The last `tau` frames, each minus the first frame.
    #[default]
    NeutralSubtract,
    /// The last `tau` frames as they are.
    Raw,
}

pub fn build_test_unit(v: &VideoSequence, tau: usize, mode: TestMode) -> Result<Matrix> {
    if tau == 0 {
        return Err(Error::param("tau_tst must be positive"));
    }
    v.require(tau)?;
    let m = v.len();
    Ok(match mode {
        TestMode::FirstPlusLast => {
            let mut unit = Matrix::zeros(v.dim(), tau);
            unit.set_column(0, &v.frames.column(0));
            for k in 1..tau {
                unit.set_column(k, &v.frames.column(m - tau + k));
            }
            unit
        }
        TestMode::RawWindow => v.frames.columns(m - tau, tau).into_owned(),
    })
}

pub fn build_training_unit(v: &VideoSequence, tau: usize, mode: TrainMode) -> Result<Matrix> {
    if tau == 0 {
        return Err(Error::param("tau_trn must be positive"));
    }
    let m = v.len();
    match mode {
        TrainMode::NeutralSubtract => {
            v.require(tau + 1)?;
            let mut unit = v.frames.columns(m - tau, tau).into_owned();
            let neutral = v.frames.column(0);
            for mut col in unit.column_iter_mut() {
                col -= &neutral;
            }
            Ok(unit)
        }
        TrainMode::Raw => {
            v.require(tau)?;
            Ok(v.frames.columns(m - tau, tau).into_owned())
        }
    }
}

/// Splits a video into `count` disjoint sub-videos of `per` frames each.
/// Sub-video `j` takes frames `j, j + count, j + 2 count, ...`, so all of
/// them sample the whole action at the same spacing.
pub fn equispaced_subvideos(
    v: &VideoSequence,
    count: usize,
    per: usize,
) -> Result<Vec<VideoSequence>> {
    if count == 0 || per < 2 {
        return Err(Error::param(format!(
            "need count >= 1 and per >= 2, got count={count}, per={per}"
        )));
    }
    v.require(count * per)?;
    (0..count)
        .map(|j| {
            let indices: Vec<usize> = (0..per).map(|k| j + k * count).collect();
            VideoSequence::new(
                v.frames.select_columns(&indices),
                v.label.clone(),
                format!("{}#{}", v.id, j),
            )
        })
        .collect()
}
