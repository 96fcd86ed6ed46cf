use crate::error::{Error, Result};

/// Assignment of `C` code blocks to `M` code block groups.
///
/// The first `C mod M` groups take `ceil(C / M)` CBs and the rest
/// `floor(C / M)`, in CB index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbgLayout {
    group_sizes: Vec<usize>,
}

impl CbgLayout {
    pub fn new(num_cbs: usize, num_cbgs: usize) -> Result<Self> {
        if num_cbgs == 0 || num_cbgs > num_cbs {
            return Err(Error::domain(format!(
                "cannot group {num_cbs} CBs into {num_cbgs} CBGs"
            )));
        }
        let base = num_cbs / num_cbgs;
        let extra = num_cbs % num_cbgs;
        Ok(Self {
            group_sizes: (0..num_cbgs)
                .map(|g| base + usize::from(g < extra))
                .collect(),
        })
    }

    pub fn num_cbs(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn num_cbgs(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// Half-open CB index range of every group.
    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.group_sizes.iter().scan(0usize, |start, &len| {
            let r = *start..*start + len;
            *start += len;
            Some(r)
        })
    }

    /// Group index of each CB.
    pub fn cb_to_cbg(&self) -> Vec<usize> {
        self.ranges()
            .enumerate()
            .flat_map(|(g, r)| r.map(move |_| g))
            .collect()
    }
}
