use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::detector::Detector;
use crate::data::{batch_ranges, SampleBatch};
use crate::detection::SlidingMin;
use crate::error::{Error, Result};
use crate::models::InferenceMode;
use crate::netcore::Matrix;

/// Decision for one row, emitted once its smoothing window is complete.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub index: usize,
    pub s_raw: f64,
    pub s_smooth: f64,
    pub threshold: f64,
    pub label: u8,
}

/// Row-at-a-time front end to a [`Detector`].
///
/// Rows are buffered and scored in the same contiguous batches the offline
/// detector would use on the whole stream, so events match an offline run
/// exactly. A batch is released once `stream_batch + 2` rows are buffered;
/// the rest is released by [`finish`](Self::finish). Static bundles score
/// every row on arrival. The final `window − 1` rows never get a decision.
pub struct StreamingDetector {
    detector: Detector,
    chunk: usize,
    buffer: Vec<f64>,
    buffered: usize,
    min: SlidingMin,
    // raw scores not yet matched with a smoothed value
    pending: VecDeque<f64>,
    next_index: usize,
    threshold: f64,
}

impl StreamingDetector {
    pub fn new(detector: Detector) -> Result<Self> {
        let scoring = detector.scoring()?;
        let min = SlidingMin::new(scoring.window)?;
        let threshold = scoring.threshold();
        let chunk = match detector.bundle.meta.inference {
            InferenceMode::Static => 1,
            _ => detector.bundle.meta.stream_batch,
        };
        Ok(StreamingDetector {
            detector,
            chunk,
            buffer: Vec::new(),
            buffered: 0,
            min,
            pending: VecDeque::new(),
            next_index: 0,
            threshold,
        })
    }

    fn width(&self) -> usize {
        self.detector.bundle.schema().width()
    }

    fn hold_back(&self) -> usize {
        if self.chunk == 1 {
            0
        } else {
            2
        }
    }

    /// Accepts one raw row in the bundle's column order.
    pub fn push(&mut self, row: &[f64]) -> Result<Vec<StreamEvent>> {
        if row.len() != self.width() {
            return Err(Error::dim("stream row", self.width(), row.len()));
        }
        self.buffer.extend_from_slice(row);
        self.buffered += 1;
        let mut events = Vec::new();
        while self.buffered >= self.chunk + self.hold_back() {
            events.extend(self.process(self.chunk)?);
        }
        Ok(events)
    }

    /// Scores whatever is still buffered, in the offline batch layout.
    pub fn finish(&mut self) -> Result<Vec<StreamEvent>> {
        let mut events = Vec::new();
        if self.buffered == 0 {
            return Ok(events);
        }
        let ranges: Vec<_> = if self.chunk == 1 {
            std::iter::once(0..self.buffered).collect()
        } else {
            batch_ranges(self.buffered, self.chunk)?
        };
        for r in ranges {
            events.extend(self.process(r.len())?);
        }
        Ok(events)
    }

    fn process(&mut self, rows: usize) -> Result<Vec<StreamEvent>> {
        let width = self.width();
        let values: Vec<f64> = self.buffer.drain(..rows * width).collect();
        self.buffered -= rows;
        let batch = SampleBatch::new(
            Matrix::from_vec(rows, width, values)?,
            self.detector.bundle.schema().clone(),
        )?;
        let scores = self.detector.chunk_scores(&batch)?;
        let mut events = Vec::new();
        for s in scores {
            self.pending.push_back(s);
            if let Some(smooth) = self.min.push(s) {
                let raw = self
                    .pending
                    .pop_front()
                    .expect("one pending score per pushed row");
                events.push(StreamEvent {
                    index: self.next_index,
                    s_raw: raw,
                    s_smooth: smooth,
                    threshold: self.threshold,
                    label: u8::from(smooth > self.threshold),
                });
                self.next_index += 1;
            }
        }
        Ok(events)
    }

    pub fn into_detector(self) -> Detector {
        self.detector
    }
}
