//! Named parameter storage and per-forward graph binding.
//!
//! Parameters live outside any one compute graph in a [`ParamStore`]. Each
//! forward pass opens a [`Ctx`], which lazily binds store entries to leaf
//! tensors on a fresh [`Graph`]. Initialization is a pure function of
//! `(store seed, parameter name)` so creation order never matters.

use std::rc::Rc;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Tensor};

/// How a parameter is initialized on first use.
#[derive(Clone, Copy, Debug)]
pub enum Init {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    UniformFanIn(usize),
    Zeros,
    Ones,
}

#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// All trainable state of a model, keyed by dotted parameter names.
#[derive(Clone, Debug)]
pub struct ParamStore {
    seed: u64,
    entries: IndexMap<String, ParamEntry>,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            seed,
            entries: IndexMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn total_params(&self) -> usize {
        self.entries.values().map(|e| e.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamEntry> {
        self.entries.get_mut(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.insert(name.into(), ParamEntry { shape, data });
    }

    /// Fetch a parameter, initializing it if absent. The RNG stream is
    /// derived from the store seed and the name alone.
    pub fn get_or_init(&mut self, name: &str, shape: &[usize], init: Init) -> ParamEntry {
        if let Some(entry) = self.entries.get(name) {
            assert_eq!(
                entry.shape, shape,
                "parameter {} requested with shape {:?} but stored as {:?}",
                name, shape, entry.shape
            );
            return entry.clone();
        }
        let n = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::UniformFanIn(fan_in) => {
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(name.as_bytes()));
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            }
        };
        let entry = ParamEntry {
            shape: shape.to_vec(),
            data,
        };
        self.entries.insert(name.to_string(), entry.clone());
        entry
    }
}

/// FNV-1a, used to derive stable per-name RNG streams and corpus splits.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Binds a [`ParamStore`] to one compute graph for a single forward pass.
pub struct Ctx<'a> {
    pub graph: Rc<Graph>,
    store: &'a mut ParamStore,
    bindings: IndexMap<String, Tensor>,
    trainable: bool,
}

impl<'a> Ctx<'a> {
    pub fn new(store: &'a mut ParamStore, trainable: bool) -> Self {
        Ctx {
            graph: Graph::new(),
            store,
            bindings: IndexMap::new(),
            trainable,
        }
    }

    /// Leaf tensor for a named parameter; repeated calls within one forward
    /// share the same node, so gradients accumulate correctly.
    pub fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Tensor {
        if let Some(t) = self.bindings.get(name) {
            return t.clone();
        }
        let entry = self.store.get_or_init(name, shape, init);
        let t = self.graph.leaf(&entry.shape, entry.data, self.trainable);
        self.bindings.insert(name.to_string(), t.clone());
        t
    }

    pub fn constant(&self, shape: &[usize], data: Vec<f64>) -> Tensor {
        self.graph.constant(shape, data)
    }

    /// `(name, leaf gradient)` for every parameter bound in this pass, in
    /// binding order. Call after `backward()`.
    pub fn grads(&self) -> Vec<(String, Vec<f64>)> {
        self.bindings
            .iter()
            .map(|(name, t)| (name.clone(), t.grad()))
            .collect()
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }
}
