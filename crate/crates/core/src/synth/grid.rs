use crate::dynamics::HyperRectangle;

/// Tensor grid over a box, `resolution` nodes per axis.
///
/// Nodes are enumerated row-major: the last coordinate varies fastest.
/// Zero-width axes collapse to a single node.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    axes: Vec<Vec<f64>>,
}

impl TensorGrid {
    pub fn new(bounds: &HyperRectangle, resolution: usize) -> Self {
        let axes = (0..bounds.dim())
            .map(|i| {
                let (lo, hi) = (bounds.lo()[i], bounds.hi()[i]);
                if resolution <= 1 || lo == hi {
                    vec![if lo == hi { lo } else { 0.5 * (lo + hi) }]
                } else {
                    (0..resolution)
                        .map(|k| lo + (hi - lo) * k as f64 / (resolution - 1) as f64)
                        .collect()
                }
            })
            .collect();
        Self { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_into(&self, mut index: usize, out: &mut [f64]) {
        for i in (0..self.dim()).rev() {
            let axis = &self.axes[i];
            out[i] = axis[index % axis.len()];
            index /= axis.len();
        }
    }

    pub fn node(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(index, &mut out);
        out
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Spacing along axis `i` (zero for a collapsed axis).
    pub fn spacing(&self, i: usize) -> f64 {
        let a = &self.axes[i];
        if a.len() < 2 { 0.0 } else { a[1] - a[0] }
    }

    /// Area (volume) represented by one node.
    pub fn cell_measure(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).filter(|s| *s > 0.0).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_order_and_bounds() {
        let g = TensorGrid::new(&HyperRectangle::cube(2, -1.0, 1.0).unwrap(), 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g.node(0), vec![-1.0, -1.0]);
        assert_eq!(g.node(1), vec![-1.0, 0.0]);
        assert_eq!(g.node(3), vec![0.0, -1.0]);
        assert_eq!(g.node(8), vec![1.0, 1.0]);
        assert_eq!(g.spacing(0), 1.0);
    }

    #[test]
    fn degenerate_axis_has_one_node() {
        let g = TensorGrid::new(&HyperRectangle::new(vec![0.0], vec![0.0]).unwrap(), 21);
        assert_eq!(g.len(), 1);
        assert_eq!(g.node(0), vec![0.0]);
    }
}
