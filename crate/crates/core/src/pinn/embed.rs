use crate::dynamics::HyperRectangle;

/// Hyper-interval embedding of `n`-dimensional boxes into `ℝ^{2n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Embedding {
    pub n: usize,
}

impl Embedding {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }
}

/// `{x} ↦ (x, x)`.
pub fn embed_singleton(x: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; 2 * x.len()];
    embed_singleton_into(x, &mut z);
    z
}

pub fn embed_singleton_into(x: &[f64], z: &mut [f64]) {
    let n = x.len();
    z[..n].copy_from_slice(x);
    z[n..].copy_from_slice(x);
}

/// `[lo, hi] ↦ (lo, hi)`.
pub fn embed_rect(r: &HyperRectangle) -> Vec<f64> {
    let mut z = Vec::with_capacity(2 * r.dim());
    z.extend_from_slice(r.lo());
    z.extend_from_slice(r.hi());
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(embed_singleton(&[1.0, 2.0]), vec![1.0, 2.0, 1.0, 2.0]);
        assert_eq!(embed_singleton(&[0.0; 3]), vec![0.0; 6]);
        let p = [0.3, -0.2];
        assert_eq!(embed_singleton(&p), embed_rect(&HyperRectangle::point(&p).unwrap()));
        let r = HyperRectangle::new(vec![0.0, -0.05], vec![0.0, 0.05]).unwrap();
        assert_eq!(embed_rect(&r), vec![0.0, -0.05, 0.0, 0.05]);
        assert_eq!(embed_rect(&HyperRectangle::cube(2, 0.0, 1.0).unwrap()), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(Embedding::new(3).dim(), 6);
    }

    fn boxes() -> impl Strategy<Value = HyperRectangle> {
        proptest::collection::vec((-5.0f64..5.0, 0.0f64..2.0), 2).prop_map(|v| {
            let lo: Vec<f64> = v.iter().map(|(l, _)| *l).collect();
            let hi: Vec<f64> = v.iter().map(|(l, w)| l + w).collect();
            HyperRectangle::new(lo, hi).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn injective_and_recoverable(a in boxes(), b in boxes()) {
            let (za, zb) = (embed_rect(&a), embed_rect(&b));
            prop_assert_eq!(&za[..2], a.lo());
            prop_assert_eq!(&za[2..], a.hi());
            prop_assert_eq!(a == b, za == zb);
        }
    }
}
