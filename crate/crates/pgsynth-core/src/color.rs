//! Basic color classes, static subclasses and the symmetry group over them.

use std::fmt;
use std::ops::Range;

use itertools::Itertools;

use crate::error::{Error, Result};

/// A finite basic color class partitioned into contiguous static subclasses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorClass {
    pub name: String,
    pub colors: Vec<String>,
    /// Exclusive end index of every static subclass, ascending; the last equals `colors.len()`.
    bounds: Vec<usize>,
}

impl ColorClass {
    /// A class with a single static subclass.
    pub fn new(name: impl Into<String>, colors: Vec<String>) -> Result<Self> {
        let n = colors.len();
        Self::with_subclasses(name, colors, vec![n])
    }

    /// A class whose static subclasses end at the given exclusive bounds.
    pub fn with_subclasses(
        name: impl Into<String>,
        colors: Vec<String>,
        bounds: Vec<usize>,
    ) -> Result<Self> {
        let name = name.into();
        if colors.is_empty() {
            return Err(Error::invalid(format!("class {name} has no colors")));
        }
        let mut prev = 0;
        for &b in &bounds {
            if b <= prev {
                return Err(Error::invalid(format!("class {name} has an empty static subclass")));
            }
            prev = b;
        }
        if prev != colors.len() {
            return Err(Error::invalid(format!("static subclasses of {name} do not cover the class")));
        }
        if colors.iter().duplicates().next().is_some() {
            return Err(Error::invalid(format!("class {name} repeats a color")));
        }
        Ok(ColorClass { name, colors, bounds })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn num_subclasses(&self) -> usize {
        self.bounds.len()
    }

    /// Index range of static subclass `q`.
    pub fn subclass(&self, q: usize) -> Range<usize> {
        let start = if q == 0 { 0 } else { self.bounds[q - 1] };
        start..self.bounds[q]
    }

    pub fn subclasses(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.bounds.len()).map(|q| self.subclass(q))
    }

    /// Static subclass containing color `c`.
    pub fn subclass_of(&self, c: usize) -> usize {
        self.bounds.partition_point(|&b| b <= c)
    }

    pub fn color_index(&self, name: &str) -> Option<usize> {
        self.colors.iter().position(|c| c == name)
    }
}

/// The ordered list of basic color classes of a net.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ColorUniverse {
    pub classes: Vec<ColorClass>,
}

/// A color identified by class and position within the class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Color {
    pub class: usize,
    pub index: usize,
}

impl ColorUniverse {
    pub fn new(classes: Vec<ColorClass>) -> Result<Self> {
        if let Some(dup) = classes.iter().map(|c| &c.name).duplicates().next() {
            return Err(Error::invalid(format!("duplicate class name {dup}")));
        }
        Ok(ColorUniverse { classes })
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn class(&self, i: usize) -> &ColorClass {
        &self.classes[i]
    }

    /// Size of the symmetry group: product of factorials of static subclass sizes.
    pub fn num_symmetries(&self) -> u128 {
        self.classes
            .iter()
            .flat_map(|c| c.subclasses())
            .map(|r| (1..=r.len() as u128).product::<u128>())
            .product()
    }

    /// All symmetries, identity first.
    pub fn enumerate_symmetries(&self) -> Vec<Symmetry> {
        let per_class: Vec<Vec<Vec<usize>>> = self
            .classes
            .iter()
            .map(|class| {
                class
                    .subclasses()
                    .map(|r| r.clone().permutations(r.len()).collect::<Vec<_>>())
                    .multi_cartesian_product()
                    .map(|parts| parts.concat())
                    .collect()
            })
            .collect();
        if per_class.is_empty() {
            return vec![Symmetry { perms: Vec::new() }];
        }
        per_class
            .into_iter()
            .multi_cartesian_product()
            .map(|perms| Symmetry { perms })
            .collect()
    }

    pub fn identity(&self) -> Symmetry {
        Symmetry {
            perms: self.classes.iter().map(|c| (0..c.len()).collect()).collect(),
        }
    }

    /// Checks that `s` is a symmetry of this universe.
    pub fn check_symmetry(&self, s: &Symmetry) -> Result<()> {
        if s.perms.len() != self.classes.len() {
            return Err(Error::UniverseMismatch);
        }
        for (class, p) in self.classes.iter().zip(&s.perms) {
            if p.len() != class.len() || p.iter().any(|&x| x >= class.len()) {
                return Err(Error::UniverseMismatch);
            }
            let mut seen = vec![false; p.len()];
            for (c, &x) in p.iter().enumerate() {
                if seen[x] || class.subclass_of(c) != class.subclass_of(x) {
                    return Err(Error::invalid("permutation does not preserve static subclasses"));
                }
                seen[x] = true;
            }
        }
        Ok(())
    }
}

/// Per-class permutations of color indices preserving static subclasses.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Symmetry {
    pub perms: Vec<Vec<usize>>,
}

impl Symmetry {
    pub fn is_identity(&self) -> bool {
        self.perms.iter().all(|p| p.iter().enumerate().all(|(i, &x)| i == x))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Symmetry) -> Result<Symmetry> {
        if !self.same_shape(other) {
            return Err(Error::UniverseMismatch);
        }
        Ok(Symmetry {
            perms: self
                .perms
                .iter()
                .zip(&other.perms)
                .map(|(a, b)| b.iter().map(|&x| a[x]).collect())
                .collect(),
        })
    }

    pub fn invert(&self) -> Symmetry {
        Symmetry {
            perms: self
                .perms
                .iter()
                .map(|p| {
                    let mut inv = vec![0; p.len()];
                    for (i, &x) in p.iter().enumerate() {
                        inv[x] = i;
                    }
                    inv
                })
                .collect(),
        }
    }

    fn same_shape(&self, other: &Symmetry) -> bool {
        self.perms.len() == other.perms.len()
            && self.perms.iter().zip(&other.perms).all(|(a, b)| a.len() == b.len())
    }

    pub fn color(&self, c: Color) -> Color {
        Color { class: c.class, index: self.perms[c.class][c.index] }
    }

    /// Applies the symmetry to a tuple whose components have the given classes.
    pub fn tuple(&self, classes: &[usize], colors: &[usize]) -> Vec<usize> {
        classes.iter().zip(colors).map(|(&i, &c)| self.perms[i][c]).collect()
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.perms.iter().map(|p| format!("{p:?}")).collect();
        write!(f, "<{}>", parts.join(" "))
    }
}
