use crate::glm::{Family, Link};

/// GLM family/link pair plus coefficient naming derived from the formula.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: Family,
    pub link: Link,
    pub coef_names: Vec<String>,
}

impl ModelSpec {
    pub fn new(family: Family, link: Link, coef_names: Vec<String>) -> Self {
        ModelSpec { family, link, coef_names }
    }

    /// Anonymous coefficient names b0..b{p-1}.
    pub fn unnamed(family: Family, link: Link, p: usize) -> Self {
        ModelSpec {
            family,
            link,
            coef_names: (0..p).map(|j| format!("b{j}")).collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.coef_names.len()
    }

    pub fn dispersion_free(&self) -> bool {
        !self.family.dispersion_fixed()
    }
}
