//! The 24-element single-qubit Clifford group, up to global phase.

use std::sync::OnceLock;

use crate::gates;
use crate::linalg::{aligned_max_diff2, Mat2};

pub const GROUP_ORDER: usize = 24;

#[derive(Debug, Clone)]
pub struct CliffordTable {
    elements: Vec<Mat2>,
    product: Vec<[usize; GROUP_ORDER]>,
    inverse: [usize; GROUP_ORDER],
}

impl CliffordTable {
    /// Breadth-first closure of {H, S} starting from the identity, so index 0
    /// is the identity and the ordering is deterministic.
    fn build() -> Self {
        let generators = [gates::h(), gates::s()];
        let mut elements = vec![Mat2::identity()];
        let mut frontier = 0;
        while frontier < elements.len() {
            let g = elements[frontier];
            for gen in &generators {
                let cand = gen * g;
                if find(&elements, &cand).is_none() {
                    elements.push(cand);
                }
            }
            frontier += 1;
        }
        assert_eq!(elements.len(), GROUP_ORDER);
        let mut product = vec![[0; GROUP_ORDER]; GROUP_ORDER];
        let mut inverse = [0; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            for b in 0..GROUP_ORDER {
                let p = elements[a] * elements[b];
                product[a][b] = find(&elements, &p).expect("group closure");
                if product[a][b] == 0 {
                    inverse[a] = b;
                }
            }
        }
        Self { elements, product, inverse }
    }

    pub fn get() -> &'static CliffordTable {
        static TABLE: OnceLock<CliffordTable> = OnceLock::new();
        TABLE.get_or_init(Self::build)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn matrix(&self, idx: usize) -> Mat2 {
        self.elements[idx]
    }

    /// Index of `elements[a] · elements[b]` (b applied first).
    pub fn compose(&self, a: usize, b: usize) -> usize {
        self.product[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn index_of(&self, u: &Mat2) -> Option<usize> {
        find(&self.elements, u)
    }
}

fn find(elements: &[Mat2], u: &Mat2) -> Option<usize> {
    elements.iter().position(|e| aligned_max_diff2(e, u) < 1e-9)
}
