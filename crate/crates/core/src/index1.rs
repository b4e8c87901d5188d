//! Serde adapters that write 0-based indices as 1-based numbers.
//!
//! Indices are 0-based in memory and 1-based in every file format, matching
//! the usual `X1, ..., Xp` naming of features.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn up(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn down<E: serde::de::Error>(v: Vec<usize>) -> Result<Vec<usize>, E> {
    v.into_iter()
        .map(|i| {
            i.checked_sub(1)
                .ok_or_else(|| E::custom("indices are 1-based"))
        })
        .collect()
}

pub mod one {
    use super::*;

    pub fn serialize<S: Serializer>(i: &usize, s: S) -> Result<S::Ok, S::Error> {
        (i + 1).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        usize::deserialize(d)?
            .checked_sub(1)
            .ok_or_else(|| D::Error::custom("indices are 1-based"))
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        up(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        down(Vec::<usize>::deserialize(d)?)
    }
}

pub mod opt_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vec<usize>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_deref().map(up).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<usize>>, D::Error> {
        Option::<Vec<usize>>::deserialize(d)?.map(down).transpose()
    }
}

pub mod nested {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| up(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
        Vec::<Vec<usize>>::deserialize(d)?
            .into_iter()
            .map(down)
            .collect()
    }
}

pub mod pairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[(usize, f64)], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|(i, x)| (i + 1, *x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(usize, f64)>, D::Error> {
        Vec::<(usize, f64)>::deserialize(d)?
            .into_iter()
            .map(|(i, x)| {
                i.checked_sub(1)
                    .map(|i| (i, x))
                    .ok_or_else(|| D::Error::custom("indices are 1-based"))
            })
            .collect()
    }
}

pub mod nested_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<(usize, f64)>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| row.iter().map(|(i, x)| (i + 1, *x)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<Vec<(usize, f64)>>, D::Error> {
        Vec::<Vec<(usize, f64)>>::deserialize(d)?
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|(i, x)| {
                        i.checked_sub(1)
                            .map(|i| (i, x))
                            .ok_or_else(|| D::Error::custom("indices are 1-based"))
                    })
                    .collect()
            })
            .collect()
    }
}
