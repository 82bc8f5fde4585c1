//! Partition of spin orbitals into occupied/virtual × α/β classes.
//!
//! Block-sparse tensors key their blocks by these classes; particle-hole
//! contractions only ever run over one occupancy type, and spin conservation
//! removes whole blocks.

use crate::reference::ReferenceFrame;

pub type Class = u8;

pub const OCC_ALPHA: Class = 0;
pub const OCC_BETA: Class = 1;
pub const VIR_ALPHA: Class = 2;
pub const VIR_BETA: Class = 3;
pub const N_CLASSES: usize = 4;

#[inline]
pub fn is_occupied(c: Class) -> bool {
    c < 2
}

#[inline]
pub fn spin(c: Class) -> u8 {
    c & 1
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitalClasses {
    m: usize,
    members: [Vec<usize>; N_CLASSES],
    /// `(class, position within class)` for every spin orbital.
    class_of: Vec<(Class, usize)>,
}

impl OrbitalClasses {
    /// Classes for spin orbitals `0..m` with the given occupied set. Spin is the
    /// parity of the index.
    pub fn new(m: usize, occupied: &[usize]) -> Self {
        let mut members: [Vec<usize>; N_CLASSES] = Default::default();
        let mut class_of = vec![(0, 0); m];
        for p in 0..m {
            let occ = occupied.contains(&p);
            let c = match (occ, p & 1) {
                (true, 0) => OCC_ALPHA,
                (true, _) => OCC_BETA,
                (false, 0) => VIR_ALPHA,
                (false, _) => VIR_BETA,
            };
            class_of[p] = (c, members[c as usize].len());
            members[c as usize].push(p);
        }
        OrbitalClasses { m, members, class_of }
    }

    pub fn from_reference(reference: &ReferenceFrame) -> Self {
        Self::new(reference.m(), &reference.occupied)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn members(&self, c: Class) -> &[usize] {
        &self.members[c as usize]
    }

    pub fn size(&self, c: Class) -> usize {
        self.members[c as usize].len()
    }

    pub fn class_of(&self, p: usize) -> (Class, usize) {
        self.class_of[p]
    }

    /// Classes with at least one member.
    pub fn nonempty(&self) -> Vec<Class> {
        (0..N_CLASSES as Class).filter(|&c| self.size(c) > 0).collect()
    }

    pub fn occupied_classes(&self) -> Vec<Class> {
        self.nonempty().into_iter().filter(|&c| is_occupied(c)).collect()
    }

    pub fn virtual_classes(&self) -> Vec<Class> {
        self.nonempty().into_iter().filter(|&c| !is_occupied(c)).collect()
    }

    pub fn dims(&self, key: &[Class]) -> Vec<usize> {
        key.iter().map(|&c| self.size(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaved_spin_classes() {
        let c = OrbitalClasses::new(6, &[0, 1]);
        assert_eq!(c.members(OCC_ALPHA), &[0]);
        assert_eq!(c.members(OCC_BETA), &[1]);
        assert_eq!(c.members(VIR_ALPHA), &[2, 4]);
        assert_eq!(c.members(VIR_BETA), &[3, 5]);
        assert_eq!(c.class_of(4), (VIR_ALPHA, 1));
    }
}
