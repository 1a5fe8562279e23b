use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;
use crate::serde_ext::ExtFloat;

/// Lower bounds `rho*_{pi,tau}` on future predicate robustness.
///
/// Entries live in the window `t+1 ..= t+H`. In JSON each entry is keyed
/// `"<predicate name>@<tau>"`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateBoundMap<T> {
    observed_until: usize,
    horizon: usize,
    entries: BTreeMap<(String, usize), T>,
}

impl<T: Scalar> PredicateBoundMap<T> {
    /// Empty map for observations up to `t` and prediction horizon `H`.
    pub fn new(t: usize, horizon: usize) -> Self {
        Self {
            observed_until: t,
            horizon,
            entries: BTreeMap::new(),
        }
    }

    pub fn observed_until(&self) -> usize {
        self.observed_until
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Last time covered, `t + H`.
    pub fn window_end(&self) -> usize {
        self.observed_until + self.horizon
    }

    pub fn in_window(&self, time: usize) -> bool {
        time > self.observed_until && time <= self.window_end()
    }

    /// Inserts a bound; returns `false` (and ignores it) outside the window.
    pub fn insert(&mut self, name: impl Into<String>, time: usize, bound: T) -> bool {
        if !self.in_window(time) {
            return false;
        }
        self.entries.insert((name.into(), time), bound);
        true
    }

    pub fn get(&self, name: &str, time: usize) -> Option<T> {
        // BTreeMap lookups need an owned key for tuple keys.
        self.entries.get(&(name.to_string(), time)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize, T)> + '_ {
        self.entries.iter().map(|((n, t), v)| (n.as_str(), *t, *v))
    }

    /// Pointwise `self <= other` over the keys of `self`.
    pub fn dominated_by(&self, other: &Self) -> bool {
        self.iter()
            .all(|(n, t, v)| other.get(n, t).is_some_and(|w| v <= w))
    }
}

#[derive(Serialize, Deserialize)]
struct Repr {
    observed_until: usize,
    horizon: usize,
    bounds: BTreeMap<String, ExtFloat>,
}

struct KeyedBounds<'a, T>(&'a BTreeMap<(String, usize), T>);

impl<T: Scalar> Serialize for KeyedBounds<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for ((name, tau), v) in self.0 {
            m.serialize_entry(&format!("{name}@{tau}"), &ExtFloat(v.to_f64_lossy()))?;
        }
        m.end()
    }
}

impl<T: Scalar> Serialize for PredicateBoundMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PredicateBoundMap", 3)?;
        st.serialize_field("observed_until", &self.observed_until)?;
        st.serialize_field("horizon", &self.horizon)?;
        st.serialize_field("bounds", &KeyedBounds(&self.entries))?;
        st.end()
    }
}

impl<'de, T: Scalar> Deserialize<'de> for PredicateBoundMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = Repr::deserialize(d)?;
        let mut out = Self::new(repr.observed_until, repr.horizon);
        for (key, ExtFloat(v)) in repr.bounds {
            let (name, tau) = key
                .rsplit_once('@')
                .ok_or_else(|| D::Error::custom(format!("bound key '{key}' lacks '@tau'")))?;
            let tau: usize = tau
                .parse()
                .map_err(|_| D::Error::custom(format!("bad time in bound key '{key}'")))?;
            let v = T::from_f64(v).ok_or_else(|| D::Error::custom("bound not representable"))?;
            if !out.insert(name, tau, v) {
                return Err(D::Error::custom(format!("bound '{key}' outside window")));
            }
        }
        Ok(out)
    }
}
