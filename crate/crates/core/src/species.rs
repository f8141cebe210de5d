use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

/// Pollutant species tracked by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    Pm10,
    Nox,
    Sox,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::Pm10, Species::Nox, Species::Sox];

    pub fn index(self) -> usize {
        match self {
            Species::Pm10 => 0,
            Species::Nox => 1,
            Species::Sox => 2,
        }
    }

    /// Lower-case tag used in file names, CSV rows and scenario keys.
    pub fn tag(self) -> &'static str {
        match self {
            Species::Pm10 => "pm10",
            Species::Nox => "nox",
            Species::Sox => "sox",
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Species::Pm10 => "PM10",
            Species::Nox => "NOx",
            Species::Sox => "SOx",
        })
    }
}

impl FromStr for Species {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pm10" => Ok(Species::Pm10),
            "nox" => Ok(Species::Nox),
            "sox" | "so2" => Ok(Species::Sox),
            other => Err(format!("unknown species `{other}`")),
        }
    }
}

/// One value per species, indexable by [`Species`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerSpecies<T>(pub [T; 3]);

impl<T> PerSpecies<T> {
    pub fn from_fn(mut f: impl FnMut(Species) -> T) -> Self {
        PerSpecies([f(Species::Pm10), f(Species::Nox), f(Species::Sox)])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Species, &T)> {
        Species::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(Species, &T) -> U) -> PerSpecies<U> {
        PerSpecies::from_fn(|s| f(s, &self[s]))
    }
}

impl<T: Copy> PerSpecies<T> {
    pub fn splat(value: T) -> Self {
        PerSpecies([value; 3])
    }
}

impl<T> Index<Species> for PerSpecies<T> {
    type Output = T;

    fn index(&self, s: Species) -> &T {
        &self.0[s.index()]
    }
}

impl<T> IndexMut<Species> for PerSpecies<T> {
    fn index_mut(&mut self, s: Species) -> &mut T {
        &mut self.0[s.index()]
    }
}
