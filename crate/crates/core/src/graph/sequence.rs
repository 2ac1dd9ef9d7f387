use crate::error::{Error, Result};
use crate::graph::NodeRoster;
use crate::numerics::Tensor;

/// Feature of the center-viewpoint node: image center, full extent.
pub const CENTER_FEATURE: [f64; 4] = [0.5, 0.5, 1.0, 1.0];

/// One detected bounding box, coordinates normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    /// 1-based frame index at 1 fps.
    pub frame: usize,
    pub class_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

impl Detection {
    pub fn feature(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn validate(&self, roster: &NodeRoster) -> Result<()> {
        if self.class_id == 0 || self.class_id >= roster.len() {
            return Err(Error::data(format!(
                "class id {} outside instrument range 1..{}",
                self.class_id,
                roster.len() - 1
            )));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.cx) && unit(self.cy) && unit(self.w) && unit(self.h) && unit(self.confidence)) {
            return Err(Error::data(format!(
                "detection at frame {} has values outside [0, 1]",
                self.frame
            )));
        }
        Ok(())
    }
}

/// `T × N × 4` node features (cx, cy, w, h) per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSequence {
    features: Tensor,
}

impl GraphSequence {
    pub fn from_tensor(features: Tensor) -> Result<Self> {
        match features.shape() {
            [_, n, 4] if *n >= 1 => Ok(GraphSequence { features }),
            s => Err(Error::dim(format!("graph sequence must be T×N×4, got {s:?}"))),
        }
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn frames(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn nodes(&self) -> usize {
        self.features.shape()[1]
    }

    /// Feature of `node` at 1-based `frame`.
    pub fn node_feature(&self, frame: usize, node: usize) -> [f64; 4] {
        let row = self.frame_row(frame - 1);
        let f = &row[node * 4..node * 4 + 4];
        [f[0], f[1], f[2], f[3]]
    }

    /// Flat `N·4` features of the 0-based frame index.
    pub fn frame_row(&self, index: usize) -> &[f64] {
        self.features.row(index)
    }

    /// First `frames` frames.
    pub fn prefix(&self, frames: usize) -> GraphSequence {
        let width = self.features.row_width();
        let n = self.nodes();
        let data = self.features.data()[..frames * width].to_vec();
        GraphSequence {
            features: Tensor::new(vec![frames, n, 4], data).expect("prefix shape"),
        }
    }
}

/// Picks, per (frame, class), the highest-confidence detection; ties go to
/// the one listed first. Returns `None` for empty cells.
pub(crate) fn best_detections(
    detections: &[Detection],
    frames: usize,
    nodes: usize,
) -> Vec<Option<&Detection>> {
    let mut best: Vec<Option<&Detection>> = vec![None; frames * nodes];
    for d in detections {
        let slot = &mut best[(d.frame - 1) * nodes + d.class_id];
        match slot {
            Some(current) if current.confidence >= d.confidence => {}
            _ => *slot = Some(d),
        }
    }
    best
}

/// Places detections into a `T × N × 4` sequence. Absent instruments get
/// zero rows; node 0 always carries [`CENTER_FEATURE`].
pub fn frames_to_sequence(detections: &[Detection], frames: usize, roster: &NodeRoster) -> Result<GraphSequence> {
    let n = roster.len();
    for d in detections {
        d.validate(roster)?;
        if d.frame == 0 || d.frame > frames {
            return Err(Error::data(format!("detection frame {} outside 1..={frames}", d.frame)));
        }
    }
    let mut features = Tensor::zeros(&[frames, n, 4]);
    let best = best_detections(detections, frames, n);
    for t in 0..frames {
        let row = &mut features.data_mut()[t * n * 4..(t + 1) * n * 4];
        row[..4].copy_from_slice(&CENTER_FEATURE);
        for node in 1..n {
            if let Some(d) = best[t * n + node] {
                row[node * 4..node * 4 + 4].copy_from_slice(&d.feature());
            }
        }
    }
    Ok(GraphSequence { features })
}

/// Builds the `N × 4` feature row for a single frame from its detections.
pub fn frame_features(detections: &[Detection], roster: &NodeRoster) -> Result<Vec<f64>> {
    let n = roster.len();
    for d in detections {
        d.validate(roster)?;
    }
    let mut row = vec![0.0; n * 4];
    row[..4].copy_from_slice(&CENTER_FEATURE);
    let mut best: Vec<Option<&Detection>> = vec![None; n];
    for d in detections {
        match best[d.class_id] {
            Some(current) if current.confidence >= d.confidence => {}
            _ => best[d.class_id] = Some(d),
        }
    }
    for (node, d) in best.iter().enumerate() {
        if let Some(d) = d {
            row[node * 4..node * 4 + 4].copy_from_slice(&d.feature());
        }
    }
    Ok(row)
}
