//! One geodesic orbit tabulated at integer times, for evaluating `y g_t` at many `t`.
//!
//! Composing short flows one after another does not return to the same point after an
//! excursion to time `t` and back: rounding errors grow like `e^{|t|}`, so beyond
//! `|t| ~ 35` a walk that comes back to flow time 0 lands somewhere unrelated to where it
//! started. Reading every time off a single tabulated orbit keeps `y g_s` a function of
//! `s` alone, which is the property the skew product needs.

use super::frame::Frame;
use super::group::FuchsianGroup;
use crate::error::GeometryError;

#[derive(Debug, Clone)]
pub struct FlowLine<'a> {
    group: &'a FuchsianGroup,
    /// `forward[j] = y g_j`, `backward[j] = y g_{-j}`; both start at `y`.
    forward: Vec<Frame>,
    backward: Vec<Frame>,
}

impl<'a> FlowLine<'a> {
    /// `start` must be reduced.
    pub fn new(group: &'a FuchsianGroup, start: Frame) -> Self {
        Self {
            group,
            forward: vec![start],
            backward: vec![start],
        }
    }

    pub fn start(&self) -> Frame {
        self.forward[0]
    }

    /// Reduced `y g_j` for an integer `j`; extends the table as needed.
    pub fn node(&mut self, j: i64) -> Result<Frame, GeometryError> {
        let (table, dir) = if j >= 0 {
            (&mut self.forward, 1.0)
        } else {
            (&mut self.backward, -1.0)
        };
        let idx = j.unsigned_abs() as usize;
        while table.len() <= idx {
            let last = *table.last().expect("table starts non-empty");
            table.push(self.group.flow_reduced(&last, dir)?);
        }
        Ok(table[idx])
    }

    /// Reduced `y g_t`, as a flow of at most 1/2 from the nearest node.
    pub fn at(&mut self, t: f64) -> Result<Frame, GeometryError> {
        if !t.is_finite() {
            return Err(GeometryError::FlowTooLong(t));
        }
        let j = t.round();
        let node = self.node(j as i64)?;
        self.group.flow_reduced(&node, t - j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc;

    #[test]
    fn short_times_match_direct_flow() {
        let g = FuchsianGroup::bolza();
        let y = g.sample_haar(&mut mc::stream(1, 0)).unwrap().frame;
        let mut line = FlowLine::new(&g, y);
        for t in [-7.3, -0.4, 0.0, 0.49, 2.6, 9.9] {
            let direct = g.flow_reduced(&y, t).unwrap();
            assert!(line.at(t).unwrap().projectively_eq(&direct, 1e-7), "t={t}");
        }
        assert_eq!(line.at(0.0).unwrap(), y);
    }

    #[test]
    fn returns_are_exact_after_long_excursions() {
        let g = FuchsianGroup::bolza();
        let y = g.sample_haar(&mut mc::stream(2, 0)).unwrap().frame;
        let mut line = FlowLine::new(&g, y);
        let before = line.at(0.3).unwrap();
        line.at(80.0).unwrap();
        line.at(-80.0).unwrap();
        assert_eq!(line.at(0.3).unwrap(), before);
        assert_eq!(line.start(), y);
    }
}
