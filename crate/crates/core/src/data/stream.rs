use std::ops::Range;

use super::schema::SampleBatch;
use crate::error::{Error, Result};

/// Contiguous, time-ordered row ranges of at most `batch_size` rows; a final
/// remainder of a single row is merged into the previous batch.
pub fn batch_ranges(rows: usize, batch_size: usize) -> Result<Vec<Range<usize>>> {
    if batch_size < 2 {
        return Err(Error::Config(format!(
            "stream batch size must be >= 2, got {batch_size}"
        )));
    }
    let mut out: Vec<Range<usize>> = (0..rows)
        .step_by(batch_size)
        .map(|s| s..(s + batch_size).min(rows))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() < 2) {
        let tail = out.pop().expect("len > 1");
        out.last_mut().expect("len > 0").end = tail.end;
    }
    Ok(out)
}

/// Iterator over consecutive batches of a sample block.
pub struct StreamBatches<'a> {
    source: &'a SampleBatch,
    ranges: std::vec::IntoIter<Range<usize>>,
}

impl<'a> Iterator for StreamBatches<'a> {
    type Item = (Range<usize>, SampleBatch);

    fn next(&mut self) -> Option<Self::Item> {
        let r = self.ranges.next()?;
        let batch = self.source.slice_rows(r.start, r.end);
        Some((r, batch))
    }
}

pub fn stream_batches(batch: &SampleBatch, batch_size: usize) -> Result<StreamBatches<'_>> {
    Ok(StreamBatches {
        source: batch,
        ranges: batch_ranges(batch.rows(), batch_size)?.into_iter(),
    })
}
