//! Debug-build guard that read-only operations leave the model digest
//! untouched.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::model::ReflectionModel;

static CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of guarded calls whose digest was compared in this process.
pub fn checks_performed() -> u64 {
    CHECKS.load(Ordering::Relaxed)
}

/// Runs `f` and, in debug builds, panics if the model digest changed.
pub(crate) fn guarded<T>(model: &mut ReflectionModel, what: &str, f: impl FnOnce(&mut ReflectionModel) -> T) -> T {
    if !cfg!(debug_assertions) {
        return f(model);
    }
    let before = model.digest();
    let out = f(model);
    assert_eq!(before, model.digest(), "{what} changed the model digest");
    CHECKS.fetch_add(1, Ordering::Relaxed);
    out
}

/// Read-only flavour of [`guarded`].
pub(crate) fn guarded_ref<T>(model: &ReflectionModel, what: &str, f: impl FnOnce(&ReflectionModel) -> T) -> T {
    if !cfg!(debug_assertions) {
        return f(model);
    }
    let before = model.digest();
    let out = f(model);
    assert_eq!(before, model.digest(), "{what} changed the model digest");
    CHECKS.fetch_add(1, Ordering::Relaxed);
    out
}
